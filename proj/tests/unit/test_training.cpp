#include "dialsum/pretext.hpp"
#include "dialsum/synthetic.hpp"
#include "dialsum/training.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace dialsum;
using namespace dialsum::nn;
using testing::error_of;

namespace {

ModelConfig tiny_config(const Vocab &vocab, bool share = true) {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.d_ff = 32;
    cfg.vocab_size = static_cast<int>(vocab.size());
    cfg.max_len = 64;
    cfg.n_persons = vocab.max_persons();
    cfg.dropout = 0.0;
    cfg.share_weights = share;
    return cfg;
}

struct Fixture {
    synth::TemplateOptions topts;
    Vocab vocab;
    Dataset data;

    explicit Fixture(std::size_t n = 30, Task task = Task::switch_utterance) {
        topts.n_dialogues = n;
        topts.seed = 4;
        vocab = synth::templated_vocab(topts);
        PretextConfig cfg;
        cfg.task = task;
        cfg.p_u = 1.0;
        cfg.mask_names = true;
        cfg.p_n = 0.5;
        cfg.max_len = 64;
        cfg.seed = 2;
        data = generate_dataset(synth::templated_corpus(topts), cfg, vocab);
    }
};

} // namespace

TEST_CASE("learning-rate schedule") {
    OptimConfig opt;
    opt.learning_rate = 1e-3;
    opt.warmup_steps = 500;
    CHECK(lr_at(0, opt) == 0.0);
    CHECK(lr_at(250, opt) == doctest::Approx(5e-4));
    CHECK(lr_at(500, opt) == doctest::Approx(1e-3));
    CHECK(lr_at(4000, opt) == doctest::Approx(1e-3));
    for (long s = 1; s < 600; ++s) CHECK(lr_at(s, opt) >= lr_at(s - 1, opt));
    opt.warmup_steps = 0;
    CHECK(lr_at(0, opt) == doctest::Approx(1e-3));

    opt.learning_rate = -1;
    CHECK(error_of([&] { opt.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("AdamW single steps") {
    OptimConfig opt;
    opt.weight_decay = 0.1;
    const double lr = 0.01;

    auto p = std::make_shared<Parameter<double>>("p", 2, 2);
    p->value << 1.0, -2.0, 0.5, 3.0;
    p->grad << 0.2, -0.4, 0.0, 1.5;
    const Matrix<double> theta0 = p->value;
    const Matrix<double> g = p->grad;
    std::vector<ParamPtr<double>> params = {p};
    AdamWState<double> state;
    adamw_step<double>(params, state, lr, opt);
    CHECK(state.step == 1);
    // With bias correction the first update is g / (|g| + eps) per entry.
    for (Eigen::Index i = 0; i < 4; ++i) {
        const double gi = g.data()[i];
        const double expect = theta0.data()[i] * (1 - lr * opt.weight_decay) - lr * gi / (std::abs(gi) + opt.epsilon);
        CHECK(p->value.data()[i] == doctest::Approx(expect).epsilon(1e-12));
    }

    SUBCASE("no gradient and no decay leaves weights alone") {
        OptimConfig plain = opt;
        plain.weight_decay = 0.0;
        auto q = std::make_shared<Parameter<double>>("q", 3, 1);
        q->value << 1, 2, 3;
        const Matrix<double> before = q->value;
        std::vector<ParamPtr<double>> qs = {q};
        AdamWState<double> st;
        for (int i = 0; i < 5; ++i) adamw_step<double>(qs, st, lr, plain);
        CHECK(q->value == before);
    }

    SUBCASE("decay alone shrinks toward zero") {
        auto q = std::make_shared<Parameter<double>>("q", 1, 3);
        q->value << 1, -2, 4;
        std::vector<ParamPtr<double>> qs = {q};
        AdamWState<double> st;
        adamw_step<double>(qs, st, lr, opt);
        CHECK(q->value(0, 0) == doctest::Approx(1 - lr * 0.1));
        CHECK(q->value(0, 2) == doctest::Approx(4 * (1 - lr * 0.1)));
    }

    SUBCASE("state shape mismatch") {
        auto q = std::make_shared<Parameter<double>>("q", 3, 3);
        std::vector<ParamPtr<double>> qs = {q};
        CHECK(error_of([&] { adamw_step<double>(qs, state, lr, opt); }) == ErrorCode::ShapeMismatch);
    }
}

TEST_CASE("full-model gradient check") {
    Fixture fx(6);
    REQUIRE(fx.data.examples.size() >= 3);
    auto cfg = tiny_config(fx.vocab);
    cfg.n_layers = 2;
    for (std::uint64_t seed : {1u, 2u}) {
        auto model = TinyModel<double>::init(cfg, seed);
        std::span<const PretextExample> batch(fx.data.examples.data(), 3);
        auto r = grad_check(model, batch, fx.vocab, 1e-4, 80, seed);
        CHECK(r.coordinates == 80);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("pretext loss gradients do not depend on sharing") {
    Fixture fx(6);
    auto shared = TinyModel<double>::init(tiny_config(fx.vocab, true), 9);
    auto split = TinyModel<double>::init(tiny_config(fx.vocab, false), 9);
    std::vector<const PretextExample *> batch;
    for (const auto &e : fx.data.examples) batch.push_back(&e);

    auto grads = [&](TinyModel<double> &m) {
        m.zero_grad();
        Graph<double> g;
        Var loss = loss_pretext(g, m, std::span<const PretextExample *const>(batch), fx.vocab, ForwardMode::eval());
        g.backward(loss);
        std::map<std::string, Matrix<double>> out;
        for (const auto &p : m.parameters()) out[p->name] = p->grad;
        return std::pair{g.scalar(loss), out};
    };
    auto [la, ga] = grads(shared);
    auto [lb, gb] = grads(split);
    CHECK(la == lb);
    for (const auto &[name, grad] : ga) {
        CAPTURE(name);
        REQUIRE(gb.count(name));
        CHECK(grad == gb.at(name));
    }
    for (const auto &[name, grad] : gb) {
        if (name.rfind("decoder.", 0) == 0) CHECK(grad.isZero());
    }
}

TEST_CASE("loss_pretext errors and stats") {
    Fixture fx(6);
    auto model = TinyModel<float>::init(tiny_config(fx.vocab), 1);
    PretextExample empty;
    empty.tokens.push_back(5, "x");
    std::vector<const PretextExample *> batch = {&empty};
    Graph<float> g;
    CHECK(error_of([&] { loss_pretext(g, model, std::span<const PretextExample *const>(batch), fx.vocab,
                                      ForwardMode::eval()); }) == ErrorCode::NoLabels);

    batch.clear();
    std::size_t labels = 0;
    for (const auto &e : fx.data.examples) {
        batch.push_back(&e);
        labels += e.sep_labels.size() + e.mask_targets.size();
    }
    LossStats stats;
    Var loss = loss_pretext(g, model, std::span<const PretextExample *const>(batch), fx.vocab, ForwardMode::eval(), &stats);
    CHECK(stats.labels == labels);
    CHECK(stats.correct <= stats.labels);
    CHECK(std::isfinite(g.scalar(loss)));
    CHECK(g.scalar(loss) > 0);
}

TEST_CASE("training is deterministic for a fixed seed") {
    Fixture fx(20);
    OptimConfig opt;
    opt.learning_rate = 1e-3;
    opt.warmup_steps = 5;
    opt.batch_size = 4;
    opt.max_steps = 30;
    opt.seed = 7;
    TrainOptions to;
    to.eval_interval = 10;
    auto cfg = tiny_config(fx.vocab);
    cfg.dropout = 0.1;

    auto run = [&] {
        auto m = TinyModel<float>::init(cfg, opt.seed);
        auto r = train_pretext<float>(m, fx.data.examples, {}, fx.vocab, opt, to);
        return std::pair{r, m.parameters().front()->value};
    };
    auto [r1, w1] = run();
    auto [r2, w2] = run();
    CHECK(r1.trace == r2.trace);
    CHECK(w1 == w2);
    REQUIRE(r1.trace.size() == 3);
    CHECK(r1.trace[0].step == 10);
    CHECK(r1.trace.back().step == 30);
    CHECK(r1.steps == 30);
    for (const auto &t : r1.trace) {
        CHECK(std::isfinite(t.loss));
        CHECK(t.acc >= 0.0);
        CHECK(t.acc <= 1.0);
    }

    opt.seed = 8;
    auto m3 = TinyModel<float>::init(cfg, 7);
    auto r3 = train_pretext<float>(m3, fx.data.examples, {}, fx.vocab, opt, to);
    CHECK(r3.trace != r1.trace);

    auto m4 = TinyModel<float>::init(cfg, 7);
    for (const auto &p : m4.parameters()) CHECK(p->value.allFinite());
}

TEST_CASE("a single example is memorised") {
    Fixture fx(4);
    std::vector<PretextExample> one = {fx.data.examples.front()};
    REQUIRE(!one.front().sep_labels.empty());
    OptimConfig opt;
    opt.learning_rate = 3e-3;
    opt.warmup_steps = 10;
    opt.batch_size = 1;
    opt.max_steps = 2000;
    TrainOptions to;
    to.eval_interval = 25;
    to.early_stop = false;
    auto model = TinyModel<float>::init(tiny_config(fx.vocab), 3);

    long reached = -1;
    for (int round = 0; round < 80 && reached < 0; ++round) {
        opt.max_steps = 25;
        opt.seed = static_cast<std::uint64_t>(round);
        opt.warmup_steps = round == 0 ? 10 : 0;
        train_pretext<float>(model, one, {}, fx.vocab, opt, to);
        if (pretext_accuracy<float>(model, one, fx.vocab) == 1.0) reached = (round + 1) * 25;
    }
    CHECK(reached > 0);
    CHECK(reached < 2000);
}

TEST_CASE("early stopping halts once the loss plateaus") {
    Fixture fx(4);
    std::vector<PretextExample> one = {fx.data.examples.front()};
    OptimConfig opt;
    opt.learning_rate = 3e-3;
    opt.warmup_steps = 10;
    opt.batch_size = 1;
    opt.max_steps = 5000;
    TrainOptions to;
    to.convergence_window = 50;
    to.convergence_tol = 1e-3;
    auto model = TinyModel<float>::init(tiny_config(fx.vocab), 3);
    auto r = train_pretext<float>(model, one, {}, fx.vocab, opt, to);
    CHECK(r.converged);
    CHECK(r.steps < 5000);
    CHECK(r.steps >= 100);
    CHECK(r.trace.back().step == r.steps);
}

TEST_CASE("summarisation fine-tuning") {
    auto vocab = testing::vocab_with({"a", "b", "c", "d", "e", "f", "g", "h"});
    auto pairs = synth::copy_task_pairs(vocab, 8, 1, 3);
    for (const auto &p : pairs) {
        CHECK(p.target.size() == 3);
        CHECK(std::equal(p.target.begin(), p.target.end(), p.source.begin()));
        for (auto id : p.source) CHECK(!vocab.is_special(id));
    }
    auto cfg = tiny_config(vocab);
    auto model = TinyModel<float>::init(cfg, 5);
    const auto probe = pairs.front().source;
    const auto before = model.encode(probe);
    const auto bos = vocab.cls_id(), eos = vocab.sep_id();

    CHECK(greedy_decode<float>(model, probe, bos, eos, 0).empty());
    CHECK(greedy_decode<float>(model, probe, bos, eos, 4).size() <= 4);

    OptimConfig opt;
    opt.learning_rate = 3e-3;
    opt.warmup_steps = 5;
    opt.batch_size = 4;
    opt.max_steps = 40;
    TrainOptions to;
    to.eval_interval = 20;
    auto r = finetune_summarize<float>(model, pairs, bos, eos, opt, to);
    CHECK(r.steps == 40);
    CHECK(r.trace.back().loss < r.trace.front().loss);
    // Summary-side gradients reach the shared encoder.
    CHECK(!model.encode(probe).isApprox(before));
    const double em = exact_match<float>(model, pairs, bos, eos);
    CHECK(em >= 0.0);
    CHECK(em <= 1.0);
}

TEST_CASE("checkpoint round trip") {
    testing::TempDir dir("ckpt");
    auto vocab = testing::vocab_with({"a", "b"});
    auto cfg = tiny_config(vocab, false);
    auto model = TinyModel<double>::init(cfg, 21);
    model.parameters()[3]->value(0, 0) = 0.1234567890123;
    save_checkpoint(model, dir / "m.json");
    auto back = load_checkpoint<double>(dir / "m.json");
    CHECK(back.config() == cfg);
    auto a = model.parameters(), b = back.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i]->name == b[i]->name);
        CHECK(a[i]->value == b[i]->value);
    }
    std::vector<TokenId> ids = {5, 6, 5};
    CHECK(model.encode(ids) == back.encode(ids));

    CHECK(error_of([&] { load_checkpoint<double>(dir / "missing.json"); }) == ErrorCode::IoError);

    auto text = testing::slurp(dir / "m.json");
    const auto at = text.find("\"rows\":");
    REQUIRE(at != std::string::npos);
    text.replace(at, 7, "\"rows\":9999,\"_\":");
    testing::spit(dir / "bad.json", text);
    CHECK(error_of([&] { load_checkpoint<double>(dir / "bad.json"); }) == ErrorCode::ShapeMismatch);
}
