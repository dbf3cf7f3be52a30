#include "dialsum/cli.hpp"

#include "dialsum/corpus.hpp"
#include "dialsum/error.hpp"
#include "dialsum/evalmetrics.hpp"
#include "dialsum/example_io.hpp"
#include "dialsum/pretext.hpp"
#include "dialsum/synthetic.hpp"
#include "dialsum/training.hpp"
#include "dialsum/vocab.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace dialsum::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 0;
};

// Flag-derived configs are validated before any input is read.
template <typename F>
void check_flags(F &&validate) {
    try {
        validate();
    } catch (const Error &e) {
        if (e.code() == ErrorCode::InvalidConfig) throw UsageError(e.what());
        throw;
    }
}

std::string dump_line(const json &j) { return j.dump() + "\n"; }

/// Every option of the subcommand with the value it ran with.
json effective_config(const CLI::App &root, const CLI::App &sub) {
    json flags = json::object();
    auto collect = [&flags](const CLI::App &app) {
        for (const CLI::Option *o : app.get_options()) {
            const std::string name = o->get_name(false, true);
            if (name.empty() || name == "--help" || name == "-h") continue;
            const std::string key = o->get_single_name();
            if (o->count() > 0) {
                auto r = o->results();
                if (o->get_expected_max() > 1) {
                    flags[key] = r;
                } else {
                    flags[key] = r.back();
                }
            } else if (!o->get_default_str().empty()) {
                flags[key] = o->get_default_str();
            } else if (o->get_expected_max() == 0) {
                flags[key] = "false";
            }
        }
    };
    collect(root);
    collect(sub);
    return {{"subcommand", sub.get_name()}, {"flags", flags}};
}

void write_config_beside(const fs::path &out, const json &cfg) {
    write_file_atomic(fs::path(out.string() + ".config.json"), cfg.dump(2) + "\n");
}

CorpusFormat parse_format(const std::string &name) {
    if (name == "jsonl") return CorpusFormat::jsonl;
    if (name == "blocks") return CorpusFormat::plaintext_blocks;
    throw UsageError("unknown corpus format: " + name);
}

void add_corpus_flags(CLI::App *sub, std::string &corpus, std::string &format, bool required = true) {
    auto *o = sub->add_option("--corpus", corpus, "Corpus file");
    if (required) o->required();
    sub->add_option("--format", format, "Corpus layout")->check(CLI::IsMember({"jsonl", "blocks"}))->capture_default_str();
}

struct TrainFlags {
    nn::ModelConfig model;
    nn::OptimConfig optim;
    nn::TrainOptions options;
    bool no_share = false;
    bool no_early_stop = false;
};

void add_train_flags(CLI::App *sub, TrainFlags &f) {
    sub->add_option("--d-model", f.model.d_model)->capture_default_str();
    sub->add_option("--heads", f.model.n_heads)->capture_default_str();
    sub->add_option("--layers", f.model.n_layers)->capture_default_str();
    sub->add_option("--d-ff", f.model.d_ff)->capture_default_str();
    sub->add_option("--max-len", f.model.max_len)->capture_default_str();
    sub->add_option("--dropout", f.model.dropout)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sub->add_flag("--no-share", f.no_share, "Separate encoder and decoder weights");
    sub->add_option("--lr", f.optim.learning_rate)->capture_default_str();
    sub->add_option("--warmup", f.optim.warmup_steps)->capture_default_str();
    sub->add_option("--batch", f.optim.batch_size)->capture_default_str();
    sub->add_option("--steps", f.optim.max_steps, "Upper bound on optimizer steps")->capture_default_str();
    sub->add_option("--weight-decay", f.optim.weight_decay)->capture_default_str();
    sub->add_option("--eval-interval", f.options.eval_interval)->capture_default_str();
    sub->add_flag("--no-early-stop", f.no_early_stop, "Always run --steps steps");
}

void finish_train_flags(TrainFlags &f, const Vocab &vocab, std::uint64_t seed) {
    f.model.share_weights = !f.no_share;
    f.model.vocab_size = static_cast<int>(vocab.size());
    f.model.n_persons = std::max(1, vocab.max_persons());
    f.options.early_stop = !f.no_early_stop;
    f.optim.seed = seed;
}

std::string trace_jsonl(const nn::TrainResult &r) {
    std::string s;
    for (const auto &t : r.trace) s += dump_line({{"step", t.step}, {"loss", t.loss}, {"acc", t.acc}, {"lr", t.lr}});
    return s;
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
    std::string corpus, vocab, format = "jsonl", out;
    std::size_t budget = kDefaultEmojiBudget;
};

json stats_json(const std::string &name, const StatsReport &r) {
    return {{"vocab", name},
            {"dialogues", r.n_dialogues},
            {"utterances", r.n_utterances},
            {"interlocutors", r.n_interlocutors},
            {"oov_utterances", r.n_oov_utterances},
            {"oov_fraction", r.oov_fraction}};
}

void cmd_stats(const StatsArgs &a, const json &cfg, std::ostream &out) {
    const auto format = parse_format(a.format);
    auto vocab = Vocab::load(a.vocab);
    auto corpus = load_corpus(a.corpus, format);
    auto emoji_vocab = vocab.extended(build_emoji_vocab(corpus, a.budget));

    auto base = corpus_stats(corpus, vocab);
    auto ext = corpus_stats(corpus, emoji_vocab);
    out << std::left << std::setw(8) << "vocab" << std::right << std::setw(12) << "dialogues" << std::setw(12)
        << "utterances" << std::setw(15) << "interlocutors" << std::setw(16) << "oov_utterances" << std::setw(14)
        << "oov_fraction" << "\n";
    for (auto [name, r] : {std::pair{"base", base}, std::pair{"emoji", ext}}) {
        out << std::left << std::setw(8) << name << std::right << std::setw(12) << r.n_dialogues << std::setw(12)
            << r.n_utterances << std::setw(15) << r.n_interlocutors << std::setw(16) << r.n_oov_utterances
            << std::setw(14) << std::fixed << std::setprecision(4) << r.oov_fraction << "\n";
    }
    if (!a.out.empty()) {
        write_file_atomic(a.out, dump_line(stats_json("base", base)) + dump_line(stats_json("emoji", ext)));
        write_config_beside(a.out, cfg);
    }
}

// ---------------------------------------------------------------- build-vocab

struct BuildVocabArgs {
    std::string corpus, vocab, format = "jsonl", out;
    std::size_t budget = kDefaultEmojiBudget;
};

void cmd_build_vocab(const BuildVocabArgs &a, const json &cfg, std::ostream &out) {
    const auto format = parse_format(a.format);
    auto vocab = Vocab::load(a.vocab);
    auto corpus = load_corpus(a.corpus, format);

    std::ifstream in(a.vocab, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!content.empty() && content.back() != '\n') content += '\n';
    std::size_t added = 0;
    for (const auto &tok : build_emoji_vocab(corpus, a.budget)) {
        if (vocab.contains(tok)) continue;
        content += tok + "\n";
        ++added;
    }
    write_file_atomic(a.out, content);
    write_config_beside(a.out, cfg);
    out << "added " << added << " emoji tokens -> " << a.out << "\n";
}

// ---------------------------------------------------------------- corrupt

struct CorruptArgs {
    std::string corpus, vocab, format = "jsonl", out, task;
    PretextConfig cfg;
    double insert_prob = 0.0;
    unsigned threads = 1;
};

void check_corrupt_flags(const CLI::App &sub, CorruptArgs &a) {
    Task task{};
    check_flags([&] { task = parse_task(a.task); });
    a.cfg.task = task;
    auto given = [&sub](const char *name) { return sub.get_option(name)->count() > 0; };
    auto only = [&](const char *flag, std::initializer_list<Task> allowed) {
        if (!given(flag)) return;
        for (Task t : allowed) {
            if (t == task) return;
        }
        throw UsageError(std::string(flag) + " does not apply to task " + std::string(to_string(task)));
    };
    only("--pu", {Task::switch_utterance});
    only("--pi", {Task::switch_interlocutor});
    only("--k", {Task::insert_utterance});
    only("--insert-prob", {Task::insert_utterance});
    only("--pn", {Task::switch_utterance, Task::insert_utterance});
    only("--mask-names", {Task::switch_utterance, Task::insert_utterance});
    if (given("--k") && given("--insert-prob")) throw UsageError("--k and --insert-prob are mutually exclusive");
    if (given("--pn")) a.cfg.mask_names = true;
    if (given("--insert-prob")) a.cfg.insert_prob = a.insert_prob;
    if (a.threads == 0) throw UsageError("--threads must be positive");
    check_flags([&] { a.cfg.validate(); });
}

void cmd_corrupt(const CorruptArgs &a, const json &cfg, std::ostream &out) {
    const auto format = parse_format(a.format);
    auto vocab = Vocab::load(a.vocab);
    auto corpus = load_corpus(a.corpus, format);
    auto ds = generate_dataset(corpus, a.cfg, vocab, a.threads);
    write_examples(ds.examples, fs::path(a.out));
    write_config_beside(a.out, cfg);
    out << "task " << to_string(a.cfg.task) << ": " << ds.examples.size() << " examples, " << ds.total_skipped()
        << " skipped";
    for (const auto &[reason, n] : ds.skipped) out << ", " << reason << "=" << n;
    out << "\n";
}

// ---------------------------------------------------------------- eval-rouge

struct EvalRougeArgs {
    std::string pred, ref, out;
};

std::vector<std::pair<std::string, std::string>> read_texts(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::vector<std::pair<std::string, std::string>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto rec = json::parse(line);
            const auto &jid = rec.at("id");
            std::string id = jid.is_string() ? jid.get<std::string>() : jid.dump();
            std::string text;
            bool found = false;
            for (const char *key : {"summary", "text", "prediction"}) {
                if (rec.contains(key) && rec[key].is_string()) {
                    text = rec[key].get<std::string>();
                    found = true;
                    break;
                }
            }
            if (!found) throw std::runtime_error("record has no summary/text/prediction string");
            rows.emplace_back(std::move(id), std::move(text));
        } catch (const Error &) {
            throw;
        } catch (const std::exception &e) {
            throw MalformedRecord(line_no, e.what());
        }
    }
    return rows;
}

void cmd_eval_rouge(const EvalRougeArgs &a, const json &cfg, std::ostream &out) {
    auto preds = read_texts(a.pred);
    auto refs = read_texts(a.ref);
    std::map<std::string, std::string> by_id;
    for (auto &[id, text] : preds) {
        if (!by_id.emplace(id, text).second) throw Error(ErrorCode::MalformedRecord, "duplicate prediction id " + id);
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto &[id, text] : refs) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(ErrorCode::MissingId, "no prediction for id " + id);
        pairs.emplace_back(it->second, text);
        by_id.erase(it);
    }
    if (!by_id.empty()) throw Error(ErrorCode::MissingId, "no reference for id " + by_id.begin()->first);

    auto report = rouge_report(pairs);
    out << format_report_table(report);
    if (!a.out.empty()) {
        write_file_atomic(a.out, dump_line({{"r1", report.r1},
                                            {"r2", report.r2},
                                            {"rl", report.rl},
                                            {"r_avg", report.r_avg},
                                            {"n_pairs", report.n_pairs}}));
        write_config_beside(a.out, cfg);
    }
}

// ---------------------------------------------------------------- eval-cossim

struct EvalCosArgs {
    std::string pred, ref, corpus, format = "jsonl", longest_by = "dialogue", out;
    std::size_t n = 100;
};

void cmd_eval_cossim(const EvalCosArgs &a, const json &cfg, std::ostream &out) {
    auto pred = load_embeddings(a.pred);
    auto ref = load_embeddings(a.ref);
    std::vector<std::string> ids;
    if (!a.corpus.empty()) {
        auto corpus = load_corpus(a.corpus, parse_format(a.format));
        ids = select_longest(corpus, a.n, a.longest_by == "summary" ? LongestBy::summary : LongestBy::dialogue);
    } else {
        ids = ref.ids;
    }
    const double cos = cosine_eval(pred, ref, ids);
    out << "COS " << std::fixed << std::setprecision(4) << cos << " over " << ids.size() << " ids\n";
    if (!a.out.empty()) {
        write_file_atomic(a.out, dump_line({{"cos", cos}, {"n", ids.size()}}));
        write_config_beside(a.out, cfg);
    }
}

// ---------------------------------------------------------------- train-toy

struct TrainToyArgs {
    std::string mode = "pretext", data, eval_data, corpus, format = "jsonl", vocab, out;
    std::size_t pairs = 200;
    TrainFlags train;
};

std::vector<nn::Seq2SeqPair> summary_pairs(const Corpus &corpus, const Vocab &vocab, int max_len) {
    PretextConfig pc;
    pc.max_len = max_len;
    std::vector<nn::Seq2SeqPair> pairs;
    for (const auto &d : corpus.dialogues) {
        if (!d.summary || d.turns.empty()) continue;
        CanonicalDialogue canon;
        try {
            canon = canonicalize_names(d, vocab.max_persons());
        } catch (const Error &e) {
            if (e.code() == ErrorCode::TooManySpeakers) continue;
            throw;
        }
        CorruptedDialogue cd;
        cd.dialogue = canon.dialogue;
        cd.turn_labels.assign(cd.dialogue.turns.size(), 0);
        cd.speaker_masked.assign(cd.dialogue.turns.size(), false);
        nn::Seq2SeqPair p;
        try {
            p.source = assemble_sequence(cd, pc, vocab).tokens.ids;
        } catch (const Error &e) {
            if (e.code() == ErrorCode::SequenceEmpty) continue;
            throw;
        }
        p.target = tokenize(*canon.dialogue.summary, vocab).ids;
        if (p.target.size() + 1 > static_cast<std::size_t>(max_len)) p.target.resize(static_cast<std::size_t>(max_len - 1));
        pairs.push_back(std::move(p));
    }
    return pairs;
}

void cmd_train_toy(TrainToyArgs &a, const Common &common, const json &cfg, std::ostream &out) {
    if (a.mode == "pretext" && a.data.empty()) throw UsageError("--mode pretext needs --data");
    if (a.mode == "summarize" && a.corpus.empty()) throw UsageError("--mode summarize needs --corpus");
    const auto format = parse_format(a.format);
    auto vocab = Vocab::load(a.vocab);
    finish_train_flags(a.train, vocab, common.seed);
    check_flags([&] {
        a.train.model.validate();
        a.train.optim.validate();
    });

    auto model = nn::TinyModel<float>::init(a.train.model, common.seed);
    nn::TrainResult result;
    std::string extra;
    if (a.mode == "pretext") {
        auto data = read_examples(fs::path(a.data), &vocab);
        std::vector<PretextExample> eval;
        if (!a.eval_data.empty()) eval = read_examples(fs::path(a.eval_data), &vocab);
        result = nn::train_pretext(model, data, eval, vocab, a.train.optim, a.train.options);
    } else {
        auto pairs = a.mode == "copy" ? synth::copy_task_pairs(vocab, a.pairs, common.seed)
                                      : summary_pairs(load_corpus(a.corpus, format), vocab, a.train.model.max_len);
        if (pairs.empty()) throw Error(ErrorCode::EmptyPairs, "no usable dialogue/summary pairs");
        result = nn::finetune_summarize(model, pairs, vocab.cls_id(), vocab.sep_id(), a.train.optim, a.train.options);
        std::ostringstream em;
        em << ", exact match " << std::fixed << std::setprecision(4)
           << nn::exact_match(model, pairs, vocab.cls_id(), vocab.sep_id());
        extra = em.str();
    }

    fs::create_directories(a.out);
    const fs::path dir(a.out);
    write_file_atomic(dir / "trace.jsonl", trace_jsonl(result));
    nn::save_checkpoint(model, dir / "model.json");
    write_file_atomic(dir / "effective_config.json", cfg.dump(2) + "\n");
    const auto &last = result.trace.back();
    out << a.mode << ": " << result.steps << " steps" << (result.converged ? " (converged)" : "") << ", loss "
        << std::fixed << std::setprecision(4) << last.loss << ", acc " << last.acc << extra << "\n";
}

// ---------------------------------------------------------------- ablation-grid

struct GridArgs {
    std::string corpus, format = "jsonl", vocab, out;
    std::vector<double> pu_list, pn_list;
    double holdout = 0.2;
    unsigned threads = 1;
    TrainFlags train;
};

void cmd_ablation_grid(GridArgs &a, const Common &common, const json &cfg, std::ostream &out) {
    if (a.pu_list.empty() || a.pn_list.empty()) throw UsageError("--pu-list and --pn-list must be nonempty");
    for (double p : a.pu_list) {
        if (!(p >= 0.0 && p <= 1.0)) throw UsageError("--pu-list values must lie in [0, 1]");
    }
    for (double p : a.pn_list) {
        if (!(p >= 0.0 && p <= 1.0)) throw UsageError("--pn-list values must lie in [0, 1]");
    }
    if (!(a.holdout > 0.0 && a.holdout < 1.0)) throw UsageError("--holdout must lie in (0, 1)");
    if (a.threads == 0) throw UsageError("--threads must be positive");
    const auto format = parse_format(a.format);
    auto vocab = Vocab::load(a.vocab);
    finish_train_flags(a.train, vocab, common.seed);
    check_flags([&] {
        a.train.model.validate();
        a.train.optim.validate();
    });

    auto corpus = load_corpus(a.corpus, format);
    const auto n = corpus.dialogues.size();
    auto n_held = static_cast<std::size_t>(static_cast<double>(n) * a.holdout);
    if (n < 2) throw Error(ErrorCode::EmptyPairs, "grid needs at least two dialogues");
    n_held = std::clamp<std::size_t>(n_held, 1, n - 1);
    Corpus train, held;
    train.dialogues.assign(corpus.dialogues.begin(), corpus.dialogues.end() - static_cast<std::ptrdiff_t>(n_held));
    held.dialogues.assign(corpus.dialogues.end() - static_cast<std::ptrdiff_t>(n_held), corpus.dialogues.end());

    const std::size_t cells = a.pu_list.size() * a.pn_list.size();
    std::vector<double> acc(cells, 0.0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t c = next++; c < cells; c = next++) {
            try {
                const double pu = a.pu_list[c / a.pn_list.size()];
                const double pn = a.pn_list[c % a.pn_list.size()];
                const auto cell_seed = stable_hash("cell:" + std::to_string(c), common.seed);
                PretextConfig pc;
                pc.task = Task::switch_utterance;
                pc.p_u = pu;
                pc.p_n = pn;
                pc.mask_names = pn > 0.0;
                pc.max_len = a.train.model.max_len;
                pc.seed = cell_seed;
                auto train_ds = generate_dataset(train, pc, vocab);
                pc.seed = stable_hash("held", cell_seed);
                auto held_ds = generate_dataset(held, pc, vocab);
                auto optim = a.train.optim;
                optim.seed = cell_seed;
                auto model = nn::TinyModel<float>::init(a.train.model, cell_seed);
                nn::train_pretext(model, train_ds.examples, held_ds.examples, vocab, optim, a.train.options);
                acc[c] = nn::pretext_accuracy(model, std::span<const PretextExample>(held_ds.examples), vocab);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::min<std::size_t>(a.threads, cells); ++t) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::string rows;
    out << std::setw(8) << "pu\\pn";
    for (double pn : a.pn_list) out << std::setw(8) << std::fixed << std::setprecision(2) << pn;
    out << "\n";
    for (std::size_t i = 0; i < a.pu_list.size(); ++i) {
        out << std::setw(8) << std::fixed << std::setprecision(2) << a.pu_list[i];
        for (std::size_t j = 0; j < a.pn_list.size(); ++j) {
            const double v = acc[i * a.pn_list.size() + j];
            out << std::setw(8) << std::setprecision(4) << v;
            rows += dump_line({{"pu", a.pu_list[i]}, {"pn", a.pn_list[j]}, {"acc", v}});
        }
        out << "\n";
    }
    write_file_atomic(a.out, rows);
    write_config_beside(a.out, cfg);
}

} // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Dialogue corpus tools: statistics, pretext corruption, evaluation and toy training", "dialsum"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("--seed", common.seed, "Global random seed")->capture_default_str();

    StatsArgs stats;
    auto *s_stats = app.add_subcommand("stats", "Corpus statistics with the base and emoji-extended vocab");
    add_corpus_flags(s_stats, stats.corpus, stats.format);
    s_stats->add_option("--vocab", stats.vocab, "Vocab file")->required();
    s_stats->add_option("--budget", stats.budget, "Emoji budget for the extended vocab")->capture_default_str();
    s_stats->add_option("--out", stats.out, "Write the report as jsonl");

    BuildVocabArgs bv;
    auto *s_bv = app.add_subcommand("build-vocab", "Append the most frequent facial emoji to a vocab");
    add_corpus_flags(s_bv, bv.corpus, bv.format);
    s_bv->add_option("--vocab", bv.vocab, "Base vocab file")->required();
    s_bv->add_option("--budget", bv.budget)->capture_default_str();
    s_bv->add_option("--out", bv.out, "Output vocab file")->required();

    CorruptArgs cor;
    auto *s_cor = app.add_subcommand("corrupt", "Build a pretext dataset");
    add_corpus_flags(s_cor, cor.corpus, cor.format);
    s_cor->add_option("--vocab", cor.vocab)->required();
    s_cor->add_option("--task", cor.task)
        ->required()
        ->check(CLI::IsMember({"switch_utterance", "switch_interlocutor", "insert_utterance", "mask_interlocutor"}));
    s_cor->add_option("--pu", cor.cfg.p_u, "Utterance selection probability")->capture_default_str();
    s_cor->add_option("--pn", cor.cfg.p_n, "Speaker masking probability (implies --mask-names)")->capture_default_str();
    s_cor->add_option("--pi", cor.cfg.p_i, "Speaker replacement probability")->capture_default_str();
    s_cor->add_option("--k", cor.cfg.k_insert, "Inserted utterances per dialogue")->capture_default_str();
    s_cor->add_option("--insert-prob", cor.insert_prob, "Per-gap insertion probability instead of --k");
    s_cor->add_flag("--include-summary", cor.cfg.include_summary);
    s_cor->add_flag("--mask-names", cor.cfg.mask_names);
    s_cor->add_option("--max-len", cor.cfg.max_len)->capture_default_str();
    s_cor->add_option("--threads", cor.threads)->capture_default_str();
    s_cor->add_option("--out", cor.out, "Output jsonl")->required();

    EvalRougeArgs er;
    auto *s_er = app.add_subcommand("eval-rouge", "ROUGE-1/2/L of predictions against references");
    s_er->add_option("--pred", er.pred)->required();
    s_er->add_option("--ref", er.ref)->required();
    s_er->add_option("--out", er.out, "Write the report as jsonl");

    EvalCosArgs ec;
    auto *s_ec = app.add_subcommand("eval-cossim", "Mean cosine similarity of summary embeddings");
    s_ec->add_option("--pred", ec.pred)->required();
    s_ec->add_option("--ref", ec.ref)->required();
    add_corpus_flags(s_ec, ec.corpus, ec.format, false);
    s_ec->add_option("--n", ec.n, "Number of longest dialogues")->capture_default_str();
    s_ec->add_option("--longest-by", ec.longest_by)->check(CLI::IsMember({"dialogue", "summary"}))->capture_default_str();
    s_ec->add_option("--out", ec.out, "Write the result as jsonl");

    TrainToyArgs tt;
    auto *s_tt = app.add_subcommand("train-toy", "Train the tiny model");
    s_tt->add_option("--mode", tt.mode)->check(CLI::IsMember({"pretext", "summarize", "copy"}))->capture_default_str();
    s_tt->add_option("--data", tt.data, "Pretext examples (jsonl)");
    s_tt->add_option("--eval-data", tt.eval_data, "Held-out pretext examples");
    add_corpus_flags(s_tt, tt.corpus, tt.format, false);
    s_tt->add_option("--pairs", tt.pairs, "Copy-task pairs")->capture_default_str();
    s_tt->add_option("--vocab", tt.vocab)->required();
    add_train_flags(s_tt, tt.train);
    s_tt->add_option("--out", tt.out, "Output directory")->required();

    GridArgs grid;
    grid.train.optim.max_steps = 400;
    grid.train.optim.warmup_steps = 40;
    auto *s_grid = app.add_subcommand("ablation-grid", "Pretext accuracy over a P_u x P_n grid");
    add_corpus_flags(s_grid, grid.corpus, grid.format);
    s_grid->add_option("--vocab", grid.vocab)->required();
    s_grid->add_option("--pu-list", grid.pu_list)->delimiter(',')->required();
    s_grid->add_option("--pn-list", grid.pn_list)->delimiter(',')->required();
    s_grid->add_option("--holdout", grid.holdout, "Held-out fraction of dialogues")->capture_default_str();
    s_grid->add_option("--threads", grid.threads)->capture_default_str();
    add_train_flags(s_grid, grid.train);
    s_grid->add_option("--out", grid.out, "Matrix jsonl")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        const CLI::App *sub = app.get_subcommands().front();
        const json cfg = effective_config(app, *sub);
        if (sub == s_stats) cmd_stats(stats, cfg, out);
        else if (sub == s_bv) cmd_build_vocab(bv, cfg, out);
        else if (sub == s_cor) {
            check_corrupt_flags(*s_cor, cor);
            cor.cfg.seed = common.seed;
            cmd_corrupt(cor, cfg, out);
        } else if (sub == s_er) cmd_eval_rouge(er, cfg, out);
        else if (sub == s_ec) cmd_eval_cossim(ec, cfg, out);
        else if (sub == s_tt) cmd_train_toy(tt, common, cfg, out);
        else if (sub == s_grid) cmd_ablation_grid(grid, common, cfg, out);
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace dialsum::cli
