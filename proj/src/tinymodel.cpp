#include "dialsum/tinymodel.hpp"

#include "dialsum/error.hpp"

#include <cmath>
#include <numeric>
#include <unordered_set>

namespace dialsum::nn {

void ModelConfig::validate() const {
    auto fail = [](const std::string &msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0) fail("model dimensions must be positive");
    if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
    if (vocab_size <= 0) fail("vocab_size must be positive");
    if (max_len <= 0) fail("max_len must be positive");
    if (n_persons <= 0) fail("n_persons must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
}

namespace {

enum class InitKind { uniform, zeros, ones };

template <typename Real>
ParamPtr<Real> make_param(std::vector<ParamPtr<Real>> &registry, std::uint64_t seed, const std::string &name,
                          Eigen::Index rows, Eigen::Index cols, InitKind kind, double scale) {
    auto p = std::make_shared<Parameter<Real>>(name, rows, cols);
    switch (kind) {
    case InitKind::uniform: {
        auto rng = derive_rng(seed, name);
        for (Eigen::Index i = 0; i < p->value.size(); ++i) {
            p->value.data()[i] = static_cast<Real>((2.0 * rng.uniform01() - 1.0) * scale);
        }
        break;
    }
    case InitKind::zeros: break;
    case InitKind::ones: p->value.setOnes(); break;
    }
    registry.push_back(p);
    return p;
}

} // namespace

template <typename Real>
TinyModel<Real> TinyModel<Real>::init(const ModelConfig &cfg, std::uint64_t seed) {
    cfg.validate();
    TinyModel m;
    m.cfg_ = cfg;
    std::vector<ParamPtr<Real>> registry;
    const Eigen::Index d = cfg.d_model;
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));

    auto param = [&](const std::string &name, Eigen::Index r, Eigen::Index c, InitKind kind = InitKind::uniform) {
        return make_param<Real>(registry, seed, name, r, c, kind, scale);
    };
    auto attention = [&](const std::string &prefix) {
        AttentionWeights<Real> a;
        a.wq = param(prefix + ".wq", d, d);
        a.bq = param(prefix + ".bq", 1, d, InitKind::zeros);
        a.wk = param(prefix + ".wk", d, d);
        a.wv = param(prefix + ".wv", d, d);
        a.bv = param(prefix + ".bv", 1, d, InitKind::zeros);
        a.wo = param(prefix + ".wo", d, d);
        a.bo = param(prefix + ".bo", 1, d, InitKind::zeros);
        return a;
    };
    auto stack = [&](const std::string &prefix) {
        StackWeights<Real> s;
        s.token_emb = param(prefix + "embeddings.token", cfg.vocab_size, d);
        s.pos_emb = param(prefix + "embeddings.position", cfg.max_len, d);
        s.emb_ln_gamma = param(prefix + "embeddings.ln.gamma", 1, d, InitKind::ones);
        s.emb_ln_beta = param(prefix + "embeddings.ln.beta", 1, d, InitKind::zeros);
        for (int l = 0; l < cfg.n_layers; ++l) {
            const std::string lp = prefix + "layer" + std::to_string(l);
            LayerWeights<Real> w;
            w.self_attn = attention(lp + ".self_attn");
            w.ln1_gamma = param(lp + ".ln1.gamma", 1, d, InitKind::ones);
            w.ln1_beta = param(lp + ".ln1.beta", 1, d, InitKind::zeros);
            w.ff1_w = param(lp + ".ff1.w", d, cfg.d_ff);
            w.ff1_b = param(lp + ".ff1.b", 1, cfg.d_ff, InitKind::zeros);
            w.ff2_w = param(lp + ".ff2.w", cfg.d_ff, d);
            w.ff2_b = param(lp + ".ff2.b", 1, d, InitKind::zeros);
            w.ln2_gamma = param(lp + ".ln2.gamma", 1, d, InitKind::ones);
            w.ln2_beta = param(lp + ".ln2.beta", 1, d, InitKind::zeros);
            s.layers.push_back(std::move(w));
        }
        return s;
    };

    m.encoder_ = stack("encoder.");
    m.decoder_ = cfg.share_weights ? m.encoder_ : stack("decoder.");
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string lp = "decoder.layer" + std::to_string(l) + ".cross";
        CrossWeights<Real> c;
        c.attn = attention(lp + "_attn");
        c.ln_gamma = param(lp + "_ln.gamma", 1, d, InitKind::ones);
        c.ln_beta = param(lp + "_ln.beta", 1, d, InitKind::zeros);
        m.cross_.push_back(std::move(c));
    }
    m.sep_head_ = {param("sep_head.w", d, 2), param("sep_head.b", 1, 2, InitKind::zeros)};
    m.mask_head_ = {param("mask_head.w", d, cfg.n_persons), param("mask_head.b", 1, cfg.n_persons, InitKind::zeros)};
    m.lm_head_ = {param("lm_head.w", d, cfg.vocab_size), param("lm_head.b", 1, cfg.vocab_size, InitKind::zeros)};
    return m;
}

template <typename Real>
std::vector<ParamPtr<Real>> TinyModel<Real>::parameters() const {
    std::vector<ParamPtr<Real>> out;
    std::unordered_set<const Parameter<Real> *> seen;
    auto add = [&](const ParamPtr<Real> &p) {
        if (seen.insert(p.get()).second) out.push_back(p);
    };
    auto add_attn = [&](const AttentionWeights<Real> &a) {
        for (const auto *p : {&a.wq, &a.bq, &a.wk, &a.wv, &a.bv, &a.wo, &a.bo}) add(*p);
    };
    auto add_stack = [&](const StackWeights<Real> &s) {
        add(s.token_emb);
        add(s.pos_emb);
        add(s.emb_ln_gamma);
        add(s.emb_ln_beta);
        for (const auto &l : s.layers) {
            add_attn(l.self_attn);
            for (const auto *p : {&l.ln1_gamma, &l.ln1_beta, &l.ff1_w, &l.ff1_b, &l.ff2_w, &l.ff2_b, &l.ln2_gamma,
                                  &l.ln2_beta}) {
                add(*p);
            }
        }
    };
    add_stack(encoder_);
    add_stack(decoder_);
    for (const auto &c : cross_) {
        add_attn(c.attn);
        add(c.ln_gamma);
        add(c.ln_beta);
    }
    for (const auto *h : {&sep_head_, &mask_head_, &lm_head_}) {
        add(h->w);
        add(h->b);
    }
    return out;
}

template <typename Real>
std::size_t TinyModel<Real>::parameter_count() const {
    std::size_t n = 0;
    for (const auto &p : parameters()) n += static_cast<std::size_t>(p->size());
    return n;
}

template <typename Real>
ParamPtr<Real> TinyModel<Real>::find_parameter(const std::string &name) const {
    for (const auto &p : parameters()) {
        if (p->name == name) return p;
    }
    return nullptr;
}

template <typename Real>
void TinyModel<Real>::zero_grad() {
    for (const auto &p : parameters()) p->zero_grad();
}

template <typename Real>
Var TinyModel<Real>::maybe_dropout(Graph<Real> &g, Var x, ForwardMode mode) const {
    if (!mode.train || cfg_.dropout <= 0.0) return x;
    return g.dropout(x, static_cast<Real>(cfg_.dropout), *mode.rng);
}

template <typename Real>
Var TinyModel<Real>::attention(Graph<Real> &g, const AttentionWeights<Real> &w, Var queries, Var keys,
                               std::span<const std::uint8_t> key_keep, bool causal) const {
    Var q = g.add_row(g.matmul(queries, g.param(*w.wq)), g.param(*w.bq));
    Var k = g.matmul(keys, g.param(*w.wk));
    Var v = g.add_row(g.matmul(keys, g.param(*w.wv)), g.param(*w.bv));
    const Eigen::Index dh = cfg_.d_model / cfg_.n_heads;
    const Real inv_sqrt = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh)));
    std::vector<Var> heads;
    for (int h = 0; h < cfg_.n_heads; ++h) {
        Var qh = g.slice_cols(q, h * dh, dh);
        Var kh = g.slice_cols(k, h * dh, dh);
        Var vh = g.slice_cols(v, h * dh, dh);
        Var scores = g.scale(g.matmul_nt(qh, kh), inv_sqrt);
        Var probs = g.softmax_rows(scores, key_keep, causal);
        heads.push_back(g.matmul(probs, vh));
    }
    Var merged = heads.size() == 1 ? heads.front() : g.concat_cols(heads);
    return g.add_row(g.matmul(merged, g.param(*w.wo)), g.param(*w.bo));
}

template <typename Real>
Var TinyModel<Real>::feed_forward(Graph<Real> &g, const LayerWeights<Real> &w, Var x) const {
    Var h = g.gelu(g.add_row(g.matmul(x, g.param(*w.ff1_w)), g.param(*w.ff1_b)));
    return g.add_row(g.matmul(h, g.param(*w.ff2_w)), g.param(*w.ff2_b));
}

template <typename Real>
Var TinyModel<Real>::embed(Graph<Real> &g, const StackWeights<Real> &w, std::span<const TokenId> ids,
                           ForwardMode mode) const {
    if (static_cast<int>(ids.size()) > cfg_.max_len) {
        throw Error(ErrorCode::SequenceTooLong, "sequence of " + std::to_string(ids.size()) +
                                                    " tokens exceeds max_len " + std::to_string(cfg_.max_len));
    }
    for (TokenId id : ids) {
        if (id < 0 || id >= cfg_.vocab_size) {
            throw Error(ErrorCode::InvalidConfig, "token id " + std::to_string(id) + " outside the model vocab");
        }
    }
    std::vector<TokenId> positions(ids.size());
    std::iota(positions.begin(), positions.end(), 0);
    Var tok = g.embedding(g.param(*w.token_emb), ids);
    Var pos = g.embedding(g.param(*w.pos_emb), positions);
    Var x = g.layer_norm(g.add(tok, pos), g.param(*w.emb_ln_gamma), g.param(*w.emb_ln_beta));
    return maybe_dropout(g, x, mode);
}

template <typename Real>
Var TinyModel<Real>::encode(Graph<Real> &g, std::span<const TokenId> ids, std::span<const std::uint8_t> pad,
                            ForwardMode mode) const {
    std::vector<std::uint8_t> keep;
    if (!pad.empty()) {
        if (pad.size() != ids.size()) throw Error(ErrorCode::ShapeMismatch, "pad mask length differs from ids");
        keep.reserve(pad.size());
        for (auto p : pad) keep.push_back(p ? 0 : 1);
    }
    Var x = embed(g, encoder_, ids, mode);
    for (const auto &layer : encoder_.layers) {
        Var a = attention(g, layer.self_attn, x, x, keep, false);
        x = g.layer_norm(g.add(x, maybe_dropout(g, a, mode)), g.param(*layer.ln1_gamma), g.param(*layer.ln1_beta));
        Var f = feed_forward(g, layer, x);
        x = g.layer_norm(g.add(x, maybe_dropout(g, f, mode)), g.param(*layer.ln2_gamma), g.param(*layer.ln2_beta));
    }
    return x;
}

template <typename Real>
typename TinyModel<Real>::Mat TinyModel<Real>::encode(std::span<const TokenId> ids,
                                                      std::span<const std::uint8_t> pad) const {
    Graph<Real> g;
    return g.value(encode(g, ids, pad, ForwardMode::eval()));
}

template <typename Real>
Var TinyModel<Real>::head(Graph<Real> &g, const HeadWeights<Real> &h, Var x, ForwardMode mode) const {
    return g.add_row(g.matmul(maybe_dropout(g, x, mode), g.param(*h.w)), g.param(*h.b));
}

template <typename Real>
MarkerLogits<Real> TinyModel<Real>::classify_markers(Graph<Real> &g, Var hidden, std::span<const int> sep_positions,
                                                     std::span<const int> mask_positions, ForwardMode mode) const {
    const auto len = g.rows(hidden);
    for (auto span : {sep_positions, mask_positions}) {
        for (int p : span) {
            if (p < 0 || p >= len) {
                throw Error(ErrorCode::PositionOutOfRange,
                            "marker position " + std::to_string(p) + " outside sequence of length " + std::to_string(len));
            }
        }
    }
    MarkerLogits<Real> out;
    out.sep = head(g, sep_head_, g.gather_rows(hidden, sep_positions), mode);
    out.mask = head(g, mask_head_, g.gather_rows(hidden, mask_positions), mode);
    return out;
}

template <typename Real>
Var TinyModel<Real>::decode(Graph<Real> &g, Var memory, std::span<const std::uint8_t> memory_pad,
                            std::span<const TokenId> target_in, ForwardMode mode) const {
    std::vector<std::uint8_t> memory_keep;
    if (!memory_pad.empty()) {
        for (auto p : memory_pad) memory_keep.push_back(p ? 0 : 1);
    }
    Var x = embed(g, decoder_, target_in, mode);
    for (std::size_t l = 0; l < decoder_.layers.size(); ++l) {
        const auto &layer = decoder_.layers[l];
        const auto &cross = cross_[l];
        Var a = attention(g, layer.self_attn, x, x, {}, true);
        x = g.layer_norm(g.add(x, maybe_dropout(g, a, mode)), g.param(*layer.ln1_gamma), g.param(*layer.ln1_beta));
        Var c = attention(g, cross.attn, x, memory, memory_keep, false);
        x = g.layer_norm(g.add(x, maybe_dropout(g, c, mode)), g.param(*cross.ln_gamma), g.param(*cross.ln_beta));
        Var f = feed_forward(g, layer, x);
        x = g.layer_norm(g.add(x, maybe_dropout(g, f, mode)), g.param(*layer.ln2_gamma), g.param(*layer.ln2_beta));
    }
    return x;
}

template <typename Real>
Var TinyModel<Real>::lm_logits(Graph<Real> &g, Var decoder_hidden, ForwardMode mode) const {
    return head(g, lm_head_, decoder_hidden, mode);
}

template class TinyModel<float>;
template class TinyModel<double>;

} // namespace dialsum::nn
