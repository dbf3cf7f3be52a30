#pragma once

#include "dialsum/autograd.hpp"
#include "dialsum/example.hpp"
#include "dialsum/rng.hpp"
#include "dialsum/vocab.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dialsum::nn {

struct ModelConfig {
    int d_model = 64;
    int n_heads = 2;
    int n_layers = 2;
    int d_ff = 256;
    int vocab_size = 0;
    int max_len = 512;
    double dropout = 0.1;
    bool share_weights = true;
    int n_persons = kDefaultMaxPersons;

    /// Throws Error(InvalidConfig).
    void validate() const;
    bool operator==(const ModelConfig &) const = default;
};

/// Training mode turns dropout on; it then draws from `rng`.
struct ForwardMode {
    bool train = false;
    RngStream *rng = nullptr;

    static ForwardMode eval() { return {}; }
};

template <typename Real>
struct AttentionWeights {
    // No key bias: it shifts every score of a query equally, which softmax
    // cancels, so it could never be trained.
    ParamPtr<Real> wq, bq, wk, wv, bv, wo, bo;
};

template <typename Real>
struct LayerWeights {
    AttentionWeights<Real> self_attn;
    ParamPtr<Real> ln1_gamma, ln1_beta;
    ParamPtr<Real> ff1_w, ff1_b, ff2_w, ff2_b;
    ParamPtr<Real> ln2_gamma, ln2_beta;
};

/// Embeddings plus the self-attention/feed-forward stack. The decoder's
/// stack holds the same pointers as the encoder's when weights are shared.
template <typename Real>
struct StackWeights {
    ParamPtr<Real> token_emb, pos_emb, emb_ln_gamma, emb_ln_beta;
    std::vector<LayerWeights<Real>> layers;
};

template <typename Real>
struct CrossWeights {
    AttentionWeights<Real> attn;
    ParamPtr<Real> ln_gamma, ln_beta;
};

template <typename Real>
struct HeadWeights {
    ParamPtr<Real> w, b;
};

template <typename Real>
struct MarkerLogits {
    Var sep;  // |sep_positions| x 2
    Var mask; // |mask_positions| x n_persons
};

/// Post-LN transformer encoder-decoder with [SEP]/[MASK] heads and an LM head.
template <typename Real>
class TinyModel {
public:
    using Mat = Matrix<Real>;

    /// Each tensor is drawn from its own stream derived from (seed, name), so
    /// tensors with the same name start identical in shared and unshared
    /// models. Throws Error(InvalidConfig).
    static TinyModel init(const ModelConfig &cfg, std::uint64_t seed);

    const ModelConfig &config() const noexcept { return cfg_; }

    /// Unique trainable tensors in a stable order.
    std::vector<ParamPtr<Real>> parameters() const;
    std::size_t parameter_count() const;
    ParamPtr<Real> find_parameter(const std::string &name) const;
    void zero_grad();

    StackWeights<Real> &encoder_weights() noexcept { return encoder_; }
    StackWeights<Real> &decoder_weights() noexcept { return decoder_; }
    const StackWeights<Real> &encoder_weights() const noexcept { return encoder_; }
    const StackWeights<Real> &decoder_weights() const noexcept { return decoder_; }

    /// `pad` marks padding positions (nonzero = pad); may be empty.
    /// Throws Error(SequenceTooLong).
    Var encode(Graph<Real> &g, std::span<const TokenId> ids, std::span<const std::uint8_t> pad, ForwardMode mode) const;
    Mat encode(std::span<const TokenId> ids, std::span<const std::uint8_t> pad = {}) const;

    /// Throws Error(PositionOutOfRange).
    MarkerLogits<Real> classify_markers(Graph<Real> &g, Var hidden, std::span<const int> sep_positions,
                                        std::span<const int> mask_positions, ForwardMode mode) const;

    /// Causal decoder over `target_in` attending to `memory`.
    Var decode(Graph<Real> &g, Var memory, std::span<const std::uint8_t> memory_pad,
               std::span<const TokenId> target_in, ForwardMode mode) const;
    Var lm_logits(Graph<Real> &g, Var decoder_hidden, ForwardMode mode) const;

private:
    Var attention(Graph<Real> &g, const AttentionWeights<Real> &w, Var queries, Var keys,
                  std::span<const std::uint8_t> key_keep, bool causal) const;
    Var feed_forward(Graph<Real> &g, const LayerWeights<Real> &w, Var x) const;
    Var embed(Graph<Real> &g, const StackWeights<Real> &w, std::span<const TokenId> ids, ForwardMode mode) const;
    Var maybe_dropout(Graph<Real> &g, Var x, ForwardMode mode) const;
    Var head(Graph<Real> &g, const HeadWeights<Real> &h, Var x, ForwardMode mode) const;

    ModelConfig cfg_;
    StackWeights<Real> encoder_;
    StackWeights<Real> decoder_;
    std::vector<CrossWeights<Real>> cross_;
    HeadWeights<Real> sep_head_, mask_head_, lm_head_;
};

extern template class TinyModel<float>;
extern template class TinyModel<double>;

} // namespace dialsum::nn
