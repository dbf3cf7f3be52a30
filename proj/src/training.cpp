#include "dialsum/training.hpp"

#include "dialsum/error.hpp"
#include "dialsum/example_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace dialsum::nn {

void OptimConfig::validate() const {
    auto fail = [](const std::string &msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (warmup_steps < 0) fail("warmup_steps must be non-negative");
    if (batch_size <= 0) fail("batch_size must be positive");
    if (max_steps < 0) fail("max_steps must be non-negative");
    if (weight_decay < 0.0) fail("weight_decay must be non-negative");
}

double lr_at(long step, const OptimConfig &opt) {
    if (step < 0) step = 0;
    if (opt.warmup_steps > 0 && step < opt.warmup_steps) {
        return opt.learning_rate * static_cast<double>(step) / static_cast<double>(opt.warmup_steps);
    }
    return opt.learning_rate;
}

template <typename Real>
void adamw_step(std::span<const ParamPtr<Real>> params, AdamWState<Real> &state, double lr, const OptimConfig &opt) {
    if (state.m.empty()) {
        for (const auto &p : params) {
            state.m.push_back(Matrix<Real>::Zero(p->value.rows(), p->value.cols()));
            state.v.push_back(Matrix<Real>::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (state.m.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "optimizer state holds another parameter set");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto &p = *params[i];
        if (state.m[i].rows() != p.value.rows() || state.m[i].cols() != p.value.cols() ||
            p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
            throw Error(ErrorCode::ShapeMismatch, "shape mismatch for parameter " + p.name);
        }
    }

    ++state.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
    const auto b1 = static_cast<Real>(opt.beta1);
    const auto b2 = static_cast<Real>(opt.beta2);
    const auto decay = static_cast<Real>(1.0 - lr * opt.weight_decay);
    const auto step_size = static_cast<Real>(lr / bc1);
    const auto root_bc2 = static_cast<Real>(std::sqrt(bc2));
    const auto eps = static_cast<Real>(opt.epsilon);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto &p = *params[i];
        auto &m = state.m[i];
        auto &v = state.v[i];
        m = b1 * m + (Real(1) - b1) * p.grad;
        v = b2 * v + (Real(1) - b2) * p.grad.cwiseProduct(p.grad);
        p.value *= decay;
        p.value.array() -= step_size * m.array() / (v.array().sqrt() / root_bc2 + eps);
    }
}

namespace {

template <typename Real>
std::size_t argmax_matches(const Matrix<Real> &logits, std::span<const int> targets) {
    std::size_t hits = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Eigen::Index best;
        logits.row(r).maxCoeff(&best);
        if (best == targets[static_cast<std::size_t>(r)]) ++hits;
    }
    return hits;
}

} // namespace

template <typename Real>
Var loss_pretext(Graph<Real> &g, const TinyModel<Real> &model, std::span<const PretextExample *const> batch,
                 const Vocab &vocab, ForwardMode mode, LossStats *stats) {
    std::vector<Var> terms;
    std::size_t labels = 0;
    std::size_t correct = 0;
    for (const PretextExample *ex : batch) {
        if (ex->sep_positions.empty() && ex->mask_positions.empty()) continue;
        std::vector<int> persons;
        persons.reserve(ex->mask_targets.size());
        for (TokenId id : ex->mask_targets) {
            auto k = vocab.person_index(id);
            if (!k || *k >= model.config().n_persons) {
                throw Error(ErrorCode::InvalidConfig, "mask target " + std::to_string(id) + " is not a person token");
            }
            persons.push_back(*k);
        }
        Var hidden = model.encode(g, ex->tokens.ids, {}, mode);
        auto logits = model.classify_markers(g, hidden, ex->sep_positions, ex->mask_positions, mode);
        if (!ex->sep_positions.empty()) {
            terms.push_back(g.cross_entropy_sum(logits.sep, ex->sep_labels));
            correct += argmax_matches<Real>(g.value(logits.sep), ex->sep_labels);
        }
        if (!persons.empty()) {
            terms.push_back(g.cross_entropy_sum(logits.mask, persons));
            correct += argmax_matches<Real>(g.value(logits.mask), persons);
        }
        labels += ex->sep_positions.size() + persons.size();
    }
    if (labels == 0) throw Error(ErrorCode::NoLabels, "batch has no labelled marker positions");
    Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = g.add(total, terms[i]);
    if (stats) {
        stats->labels += labels;
        stats->correct += correct;
    }
    return g.scale(total, static_cast<Real>(1.0 / static_cast<double>(labels)));
}

template <typename Real>
double pretext_accuracy(const TinyModel<Real> &model, std::span<const PretextExample> examples, const Vocab &vocab) {
    LossStats stats;
    for (const auto &ex : examples) {
        if (ex.sep_positions.empty() && ex.mask_positions.empty()) continue;
        Graph<Real> g;
        const PretextExample *one[] = {&ex};
        loss_pretext<Real>(g, model, one, vocab, ForwardMode::eval(), &stats);
    }
    return stats.labels == 0 ? 0.0 : static_cast<double>(stats.correct) / static_cast<double>(stats.labels);
}

namespace {

/// Shared mini-batch loop. `batch_loss` builds the loss for the given item
/// indices; `evaluate` produces the accuracy column of the trace.
template <typename Real, typename BatchLoss, typename Evaluate>
TrainResult run_training(TinyModel<Real> &model, std::size_t n_items, BatchLoss &&batch_loss, Evaluate &&evaluate,
                         const OptimConfig &opt, const TrainOptions &options) {
    opt.validate();
    if (options.eval_interval <= 0) throw Error(ErrorCode::InvalidConfig, "eval_interval must be positive");
    TrainResult result;
    if (n_items == 0) throw Error(ErrorCode::NoLabels, "training set is empty");

    auto order_rng = derive_rng(opt.seed, "batch-order");
    auto dropout_rng = derive_rng(opt.seed, "dropout");
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order);
    std::size_t cursor = 0;

    const auto params = model.parameters();
    AdamWState<Real> state;
    std::vector<double> history;
    double interval_loss = 0.0;
    long interval_steps = 0;
    const auto batch = static_cast<std::size_t>(opt.batch_size);

    auto record = [&](long step, double lr) {
        TraceRecord r;
        r.step = step;
        r.loss = interval_steps > 0 ? interval_loss / static_cast<double>(interval_steps) : 0.0;
        r.acc = evaluate();
        r.lr = lr;
        result.trace.push_back(r);
        interval_loss = 0.0;
        interval_steps = 0;
    };

    for (long step = 0; step < opt.max_steps; ++step) {
        std::vector<std::size_t> indices;
        while (indices.size() < std::min(batch, n_items)) {
            if (cursor == order.size()) {
                order_rng.shuffle(order);
                cursor = 0;
            }
            indices.push_back(order[cursor++]);
        }

        model.zero_grad();
        Graph<Real> g;
        Var loss = batch_loss(g, indices, ForwardMode{true, &dropout_rng});
        g.backward(loss);
        const double lr = lr_at(step, opt);
        adamw_step<Real>(params, state, lr, opt);

        const double value = static_cast<double>(g.scalar(loss));
        history.push_back(value);
        interval_loss += value;
        ++interval_steps;
        const long done = step + 1;
        result.steps = done;

        bool stop = false;
        const auto w = static_cast<std::size_t>(options.convergence_window);
        if (options.early_stop && w > 0 && done >= opt.warmup_steps && history.size() >= 2 * w) {
            const auto end = history.end();
            double recent = std::accumulate(end - static_cast<std::ptrdiff_t>(w), end, 0.0) / static_cast<double>(w);
            double before = std::accumulate(end - static_cast<std::ptrdiff_t>(2 * w), end - static_cast<std::ptrdiff_t>(w),
                                            0.0) /
                            static_cast<double>(w);
            stop = before - recent < options.convergence_tol;
        }
        if (done % options.eval_interval == 0 || stop || done == opt.max_steps) record(done, lr);
        if (stop) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace

template <typename Real>
TrainResult train_pretext(TinyModel<Real> &model, std::span<const PretextExample> dataset,
                          std::span<const PretextExample> eval_set, const Vocab &vocab, const OptimConfig &opt,
                          const TrainOptions &options) {
    std::vector<const PretextExample *> usable;
    for (const auto &ex : dataset) {
        if (!ex.sep_positions.empty() || !ex.mask_positions.empty()) usable.push_back(&ex);
    }
    if (usable.empty()) throw Error(ErrorCode::NoLabels, "no example carries marker labels");
    auto eval_examples = eval_set.empty() ? dataset : eval_set;

    return run_training<Real>(
        model, usable.size(),
        [&](Graph<Real> &g, const std::vector<std::size_t> &idx, ForwardMode mode) {
            std::vector<const PretextExample *> batch;
            for (auto i : idx) batch.push_back(usable[i]);
            return loss_pretext<Real>(g, model, batch, vocab, mode);
        },
        [&] { return pretext_accuracy<Real>(model, eval_examples, vocab); }, opt, options);
}

template <typename Real>
Var loss_summarize(Graph<Real> &g, const TinyModel<Real> &model, std::span<const Seq2SeqPair *const> batch,
                   TokenId bos, TokenId eos, ForwardMode mode, LossStats *stats) {
    std::vector<Var> terms;
    std::size_t tokens = 0;
    std::size_t correct = 0;
    for (const Seq2SeqPair *pair : batch) {
        std::vector<TokenId> input{bos};
        input.insert(input.end(), pair->target.begin(), pair->target.end());
        std::vector<int> expected(pair->target.begin(), pair->target.end());
        expected.push_back(eos);

        Var memory = model.encode(g, pair->source, {}, mode);
        Var hidden = model.decode(g, memory, {}, input, mode);
        Var logits = model.lm_logits(g, hidden, mode);
        terms.push_back(g.cross_entropy_sum(logits, expected));
        correct += argmax_matches<Real>(g.value(logits), expected);
        tokens += expected.size();
    }
    if (tokens == 0) throw Error(ErrorCode::NoLabels, "empty summarization batch");
    Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = g.add(total, terms[i]);
    if (stats) {
        stats->labels += tokens;
        stats->correct += correct;
    }
    return g.scale(total, static_cast<Real>(1.0 / static_cast<double>(tokens)));
}

template <typename Real>
TrainResult finetune_summarize(TinyModel<Real> &model, std::span<const Seq2SeqPair> pairs, TokenId bos, TokenId eos,
                               const OptimConfig &opt, const TrainOptions &options) {
    if (pairs.empty()) throw Error(ErrorCode::EmptyPairs, "no summarization pairs");
    return run_training<Real>(
        model, pairs.size(),
        [&](Graph<Real> &g, const std::vector<std::size_t> &idx, ForwardMode mode) {
            std::vector<const Seq2SeqPair *> batch;
            for (auto i : idx) batch.push_back(&pairs[i]);
            return loss_summarize<Real>(g, model, batch, bos, eos, mode);
        },
        [&] {
            LossStats stats;
            for (const auto &p : pairs) {
                Graph<Real> g;
                const Seq2SeqPair *one[] = {&p};
                loss_summarize<Real>(g, model, one, bos, eos, ForwardMode::eval(), &stats);
            }
            return static_cast<double>(stats.correct) / static_cast<double>(stats.labels);
        },
        opt, options);
}

template <typename Real>
std::vector<TokenId> greedy_decode(const TinyModel<Real> &model, std::span<const TokenId> source, TokenId bos,
                                   TokenId eos, int max_tokens) {
    std::vector<TokenId> out;
    if (max_tokens <= 0) return out;
    Graph<Real> g;
    Var memory = model.encode(g, source, {}, ForwardMode::eval());
    const int limit = std::min(max_tokens, model.config().max_len - 1);
    std::vector<TokenId> input{bos};
    for (int t = 0; t < limit; ++t) {
        Var hidden = model.decode(g, memory, {}, input, ForwardMode::eval());
        Var logits = model.lm_logits(g, hidden, ForwardMode::eval());
        Eigen::Index best;
        g.value(logits).row(g.rows(logits) - 1).maxCoeff(&best);
        const auto next = static_cast<TokenId>(best);
        if (next == eos) break;
        out.push_back(next);
        input.push_back(next);
    }
    return out;
}

template <typename Real>
double exact_match(const TinyModel<Real> &model, std::span<const Seq2SeqPair> pairs, TokenId bos, TokenId eos) {
    if (pairs.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto &p : pairs) {
        auto decoded = greedy_decode(model, p.source, bos, eos, static_cast<int>(p.target.size()) + 1);
        if (decoded == p.target) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

GradCheckResult grad_check(std::span<const ParamPtr<double>> params, const LossBuilder &loss, double epsilon,
                           std::size_t n_coords, std::uint64_t seed) {
    GradCheckResult result;
    if (params.empty()) return result;
    for (const auto &p : params) p->zero_grad();
    {
        Graph<double> g;
        Var l = loss(g);
        g.backward(l);
    }
    auto eval = [&] {
        Graph<double> g;
        return g.scalar(loss(g));
    };

    std::size_t total = 0;
    for (const auto &p : params) total += static_cast<std::size_t>(p->size());
    n_coords = std::min(n_coords, total);

    auto rng = derive_rng(seed, "grad-check");
    std::set<std::pair<std::size_t, Eigen::Index>> chosen;
    while (chosen.size() < n_coords) {
        auto pi = static_cast<std::size_t>(rng.uniform_int(params.size()));
        auto ei = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(params[pi]->size())));
        chosen.emplace(pi, ei);
    }

    for (const auto &[pi, ei] : chosen) {
        auto &p = *params[pi];
        const double analytic = p.grad.data()[ei];
        const double saved = p.value.data()[ei];
        p.value.data()[ei] = saved + epsilon;
        const double plus = eval();
        p.value.data()[ei] = saved - epsilon;
        const double minus = eval();
        p.value.data()[ei] = saved;
        const double numeric = (plus - minus) / (2.0 * epsilon);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        result.max_rel_error = std::max(result.max_rel_error, std::abs(analytic - numeric) / denom);
        ++result.coordinates;
    }
    return result;
}

GradCheckResult grad_check(TinyModel<double> &model, std::span<const PretextExample> batch, const Vocab &vocab,
                           double epsilon, std::size_t n_coords, std::uint64_t seed) {
    std::vector<const PretextExample *> ptrs;
    for (const auto &ex : batch) ptrs.push_back(&ex);
    const auto params = model.parameters();
    return grad_check(
        params, [&](Graph<double> &g) { return loss_pretext<double>(g, model, ptrs, vocab, ForwardMode::eval()); },
        epsilon, n_coords, seed);
}

template <typename Real>
void save_checkpoint(const TinyModel<Real> &model, const std::filesystem::path &path) {
    const auto &c = model.config();
    nlohmann::json cfg = {{"d_model", c.d_model},     {"n_heads", c.n_heads},   {"n_layers", c.n_layers},
                          {"d_ff", c.d_ff},           {"vocab_size", c.vocab_size}, {"max_len", c.max_len},
                          {"dropout", c.dropout},     {"share_weights", c.share_weights},
                          {"n_persons", c.n_persons}};
    nlohmann::json params = nlohmann::json::array();
    for (const auto &p : model.parameters()) {
        std::vector<double> data(p->value.data(), p->value.data() + p->value.size());
        params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", data}});
    }
    nlohmann::json doc = {{"format", "dialsum-tinymodel/1"}, {"config", cfg}, {"parameters", params}};
    write_file_atomic(path, doc.dump() + "\n");
}

template <typename Real>
TinyModel<Real> load_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const std::exception &e) {
        throw Error(ErrorCode::MalformedRecord, std::string("checkpoint is not valid JSON: ") + e.what());
    }
    const auto &j = doc.at("config");
    ModelConfig cfg;
    j.at("d_model").get_to(cfg.d_model);
    j.at("n_heads").get_to(cfg.n_heads);
    j.at("n_layers").get_to(cfg.n_layers);
    j.at("d_ff").get_to(cfg.d_ff);
    j.at("vocab_size").get_to(cfg.vocab_size);
    j.at("max_len").get_to(cfg.max_len);
    j.at("dropout").get_to(cfg.dropout);
    j.at("share_weights").get_to(cfg.share_weights);
    j.at("n_persons").get_to(cfg.n_persons);

    auto model = TinyModel<Real>::init(cfg, 0);
    std::size_t loaded = 0;
    for (const auto &rec : doc.at("parameters")) {
        auto p = model.find_parameter(rec.at("name").get<std::string>());
        if (!p) throw Error(ErrorCode::ShapeMismatch, "unknown parameter " + rec.at("name").get<std::string>());
        auto data = rec.at("data").get<std::vector<double>>();
        if (rec.at("rows").get<Eigen::Index>() != p->value.rows() || rec.at("cols").get<Eigen::Index>() != p->value.cols() ||
            static_cast<Eigen::Index>(data.size()) != p->value.size()) {
            throw Error(ErrorCode::ShapeMismatch, "shape mismatch for parameter " + p->name);
        }
        for (std::size_t i = 0; i < data.size(); ++i) p->value.data()[i] = static_cast<Real>(data[i]);
        ++loaded;
    }
    if (loaded != model.parameters().size()) throw Error(ErrorCode::ShapeMismatch, "checkpoint is missing parameters");
    return model;
}

#define DIALSUM_INSTANTIATE(Real)                                                                                        \
    template void adamw_step<Real>(std::span<const ParamPtr<Real>>, AdamWState<Real> &, double, const OptimConfig &);   \
    template Var loss_pretext<Real>(Graph<Real> &, const TinyModel<Real> &, std::span<const PretextExample *const>,     \
                                    const Vocab &, ForwardMode, LossStats *);                                          \
    template double pretext_accuracy<Real>(const TinyModel<Real> &, std::span<const PretextExample>, const Vocab &);    \
    template TrainResult train_pretext<Real>(TinyModel<Real> &, std::span<const PretextExample>,                        \
                                             std::span<const PretextExample>, const Vocab &, const OptimConfig &,      \
                                             const TrainOptions &);                                                    \
    template Var loss_summarize<Real>(Graph<Real> &, const TinyModel<Real> &, std::span<const Seq2SeqPair *const>,      \
                                      TokenId, TokenId, ForwardMode, LossStats *);                                     \
    template TrainResult finetune_summarize<Real>(TinyModel<Real> &, std::span<const Seq2SeqPair>, TokenId, TokenId,   \
                                                  const OptimConfig &, const TrainOptions &);                          \
    template std::vector<TokenId> greedy_decode<Real>(const TinyModel<Real> &, std::span<const TokenId>, TokenId,       \
                                                      TokenId, int);                                                   \
    template double exact_match<Real>(const TinyModel<Real> &, std::span<const Seq2SeqPair>, TokenId, TokenId);         \
    template void save_checkpoint<Real>(const TinyModel<Real> &, const std::filesystem::path &);                        \
    template TinyModel<Real> load_checkpoint<Real>(const std::filesystem::path &);

DIALSUM_INSTANTIATE(float)
DIALSUM_INSTANTIATE(double)

#undef DIALSUM_INSTANTIATE

} // namespace dialsum::nn
