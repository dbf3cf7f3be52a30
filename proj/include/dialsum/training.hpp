#pragma once

#include "dialsum/example.hpp"
#include "dialsum/tinymodel.hpp"
#include "dialsum/vocab.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace dialsum::nn {

struct OptimConfig {
    double learning_rate = 3e-4;
    int warmup_steps = 500;
    int batch_size = 16;
    int max_steps = 5000;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    /// Throws Error(InvalidConfig).
    void validate() const;
};

/// Linear warmup from 0 to the base rate over `warmup_steps`, then constant.
double lr_at(long step, const OptimConfig &opt);

template <typename Real>
struct AdamWState {
    std::vector<Matrix<Real>> m;
    std::vector<Matrix<Real>> v;
    long step = 0;
};

/// One AdamW update from the gradients stored in `params`. Weight decay is
/// applied to the weights directly, not folded into the gradient.
/// Throws Error(ShapeMismatch) if `state` was built for other shapes.
template <typename Real>
void adamw_step(std::span<const ParamPtr<Real>> params, AdamWState<Real> &state, double lr, const OptimConfig &opt);

struct LossStats {
    std::size_t labels = 0;
    std::size_t correct = 0;
};

/// Mean cross-entropy over every labelled [SEP] (2-way) and [MASK]
/// (person-way) position of the batch. Throws Error(NoLabels).
template <typename Real>
Var loss_pretext(Graph<Real> &g, const TinyModel<Real> &model, std::span<const PretextExample *const> batch,
                 const Vocab &vocab, ForwardMode mode, LossStats *stats = nullptr);

/// Fraction of labelled marker positions predicted correctly (eval mode).
template <typename Real>
double pretext_accuracy(const TinyModel<Real> &model, std::span<const PretextExample> examples, const Vocab &vocab);

struct TraceRecord {
    long step = 0;
    double loss = 0.0;
    double acc = 0.0;
    double lr = 0.0;

    bool operator==(const TraceRecord &) const = default;
};

struct TrainOptions {
    int eval_interval = 100;
    /// Stop once the mean loss of the last `convergence_window` steps improves
    /// on the window before it by less than `convergence_tol`. Checked only
    /// after warmup.
    bool early_stop = true;
    int convergence_window = 200;
    double convergence_tol = 1e-4;
};

struct TrainResult {
    std::vector<TraceRecord> trace;
    long steps = 0;
    bool converged = false;
};

/// Mini-batch AdamW on the marker heads. `eval_set` supplies the accuracy
/// column of the trace; when empty the training set is used.
template <typename Real>
TrainResult train_pretext(TinyModel<Real> &model, std::span<const PretextExample> dataset,
                          std::span<const PretextExample> eval_set, const Vocab &vocab, const OptimConfig &opt,
                          const TrainOptions &options = {});

struct Seq2SeqPair {
    std::vector<TokenId> source;
    std::vector<TokenId> target;
};

/// Teacher-forced cross-entropy: the decoder reads [bos] + target and
/// predicts target + [eos].
template <typename Real>
Var loss_summarize(Graph<Real> &g, const TinyModel<Real> &model, std::span<const Seq2SeqPair *const> batch,
                   TokenId bos, TokenId eos, ForwardMode mode, LossStats *stats = nullptr);

template <typename Real>
TrainResult finetune_summarize(TinyModel<Real> &model, std::span<const Seq2SeqPair> pairs, TokenId bos, TokenId eos,
                               const OptimConfig &opt, const TrainOptions &options = {});

/// Emits argmax tokens until `eos` or `max_tokens` tokens.
template <typename Real>
std::vector<TokenId> greedy_decode(const TinyModel<Real> &model, std::span<const TokenId> source, TokenId bos,
                                   TokenId eos, int max_tokens);

template <typename Real>
double exact_match(const TinyModel<Real> &model, std::span<const Seq2SeqPair> pairs, TokenId bos, TokenId eos);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

using LossBuilder = std::function<Var(Graph<double> &)>;

/// Compares analytic gradients with central differences on `n_coords`
/// randomly chosen coordinates. Error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(std::span<const ParamPtr<double>> params, const LossBuilder &loss, double epsilon = 1e-4,
                           std::size_t n_coords = 200, std::uint64_t seed = 0);

/// Pretext loss of `batch` in eval mode.
GradCheckResult grad_check(TinyModel<double> &model, std::span<const PretextExample> batch, const Vocab &vocab,
                           double epsilon = 1e-4, std::size_t n_coords = 200, std::uint64_t seed = 0);

template <typename Real>
void save_checkpoint(const TinyModel<Real> &model, const std::filesystem::path &path);
template <typename Real>
TinyModel<Real> load_checkpoint(const std::filesystem::path &path);

} // namespace dialsum::nn
