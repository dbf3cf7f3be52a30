#include "dialsum/cli.hpp"
#include "dialsum/corpus.hpp"
#include "dialsum/error.hpp"
#include "dialsum/evalmetrics.hpp"
#include "dialsum/example_io.hpp"
#include "dialsum/pretext.hpp"
#include "dialsum/tinymodel.hpp"
#include "dialsum/vocab.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include <sstream>

namespace py = pybind11;
using namespace dialsum;

namespace {

// Examples cross the boundary as JSON text; the package decodes them.
std::vector<std::string> examples_as_json(const std::vector<PretextExample> &examples) {
    std::vector<std::string> out;
    out.reserve(examples.size());
    for (const auto &ex : examples) out.push_back(to_json(ex).dump());
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Dialogue corpus tools";

    py::register_exception<Error>(m, "DialsumError", PyExc_RuntimeError);

    py::class_<Utterance>(m, "Utterance")
        .def(py::init<>())
        .def(py::init([](std::string speaker, std::string text) { return Utterance{std::move(speaker), std::move(text)}; }),
             py::arg("speaker"), py::arg("text"))
        .def_readwrite("speaker", &Utterance::speaker)
        .def_readwrite("text", &Utterance::text)
        .def("__eq__", &Utterance::operator==)
        .def("__repr__", [](const Utterance &u) { return "Utterance(" + u.speaker + ": " + u.text + ")"; });

    py::class_<Dialogue>(m, "Dialogue")
        .def(py::init<>())
        .def_readwrite("id", &Dialogue::id)
        .def_readwrite("turns", &Dialogue::turns)
        .def_readwrite("summary", &Dialogue::summary)
        .def("__eq__", &Dialogue::operator==)
        .def("interlocutors", [](const Dialogue &d) { return interlocutors(d); });

    py::enum_<Split>(m, "Split").value("train", Split::train).value("valid", Split::valid).value("test", Split::test);

    py::enum_<CorpusFormat>(m, "CorpusFormat")
        .value("jsonl", CorpusFormat::jsonl)
        .value("plaintext_blocks", CorpusFormat::plaintext_blocks);

    py::class_<Corpus>(m, "Corpus")
        .def(py::init<>())
        .def_readwrite("dialogues", &Corpus::dialogues)
        .def("__len__", [](const Corpus &c) { return c.dialogues.size(); });

    py::class_<StatsReport>(m, "StatsReport")
        .def_readonly("n_dialogues", &StatsReport::n_dialogues)
        .def_readonly("n_utterances", &StatsReport::n_utterances)
        .def_readonly("n_interlocutors", &StatsReport::n_interlocutors)
        .def_readonly("n_oov_utterances", &StatsReport::n_oov_utterances)
        .def_readonly("oov_fraction", &StatsReport::oov_fraction);

    m.def("parse_dialogue", &parse_dialogue, py::arg("raw"), py::arg("id") = "");
    m.def("format_dialogue", &format_dialogue);
    m.def("load_corpus", &load_corpus, py::arg("path"), py::arg("format") = CorpusFormat::jsonl,
          py::arg("split") = Split::train);
    m.def("read_corpus_jsonl", [](const std::string &text) {
        std::istringstream in(text);
        return read_corpus_jsonl(in);
    });
    m.def("corpus_stats", &corpus_stats);

    py::class_<Vocab>(m, "Vocab")
        .def_static("from_tokens", [](std::vector<std::string> tokens) { return Vocab::from_tokens(std::move(tokens)); })
        .def_static("load", [](const std::filesystem::path &p) { return Vocab::load(p); })
        .def("save", &Vocab::save)
        .def("__len__", &Vocab::size)
        .def("__contains__", [](const Vocab &v, const std::string &t) { return v.contains(t); })
        .def("find", &Vocab::find)
        .def("token", &Vocab::token)
        .def("tokens", &Vocab::tokens)
        .def("extended", &Vocab::extended)
        .def_property_readonly("sep_id", &Vocab::sep_id)
        .def_property_readonly("mask_id", &Vocab::mask_id)
        .def_property_readonly("unk_id", &Vocab::unk_id)
        .def_property_readonly("pad_id", &Vocab::pad_id)
        .def_property_readonly("cls_id", &Vocab::cls_id);

    m.def(
        "tokenize",
        [](const std::string &text, const Vocab &vocab) {
            auto seq = tokenize(text, vocab);
            return py::make_tuple(seq.ids, seq.pieces);
        },
        "Returns (ids, pieces).");
    m.def("build_emoji_vocab", [](const Corpus &c, std::size_t budget) { return build_emoji_vocab(c, budget); },
          py::arg("corpus"), py::arg("budget") = kDefaultEmojiBudget);
    m.def("canonicalize_names", [](const Dialogue &d, int max_persons) {
        auto c = canonicalize_names(d, max_persons);
        return py::make_tuple(c.dialogue, c.name_map);
    }, py::arg("dialogue"), py::arg("max_persons") = kDefaultMaxPersons);

    py::enum_<Task>(m, "Task")
        .value("switch_utterance", Task::switch_utterance)
        .value("switch_interlocutor", Task::switch_interlocutor)
        .value("insert_utterance", Task::insert_utterance)
        .value("mask_interlocutor", Task::mask_interlocutor);

    py::class_<PretextConfig>(m, "PretextConfig")
        .def(py::init<>())
        .def_readwrite("task", &PretextConfig::task)
        .def_readwrite("p_u", &PretextConfig::p_u)
        .def_readwrite("p_n", &PretextConfig::p_n)
        .def_readwrite("p_i", &PretextConfig::p_i)
        .def_readwrite("k_insert", &PretextConfig::k_insert)
        .def_readwrite("insert_prob", &PretextConfig::insert_prob)
        .def_readwrite("include_summary", &PretextConfig::include_summary)
        .def_readwrite("mask_names", &PretextConfig::mask_names)
        .def_readwrite("max_len", &PretextConfig::max_len)
        .def_readwrite("seed", &PretextConfig::seed)
        .def("validate", &PretextConfig::validate);

    m.def(
        "_generate_dataset",
        [](const Corpus &corpus, const PretextConfig &cfg, const Vocab &vocab, unsigned threads) {
            Dataset ds;
            {
                py::gil_scoped_release release;
                ds = generate_dataset(corpus, cfg, vocab, threads);
            }
            return py::make_tuple(examples_as_json(ds.examples), ds.skipped);
        },
        py::arg("corpus"), py::arg("config"), py::arg("vocab"), py::arg("threads") = 1);

    py::class_<RougeScore>(m, "RougeScore")
        .def_readonly("precision", &RougeScore::precision)
        .def_readonly("recall", &RougeScore::recall)
        .def_readonly("f1", &RougeScore::f1);
    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("r1", &EvalReport::r1)
        .def_readonly("r2", &EvalReport::r2)
        .def_readonly("rl", &EvalReport::rl)
        .def_readonly("r_avg", &EvalReport::r_avg)
        .def_readonly("n_pairs", &EvalReport::n_pairs)
        .def("table", [](const EvalReport &r) { return format_report_table(r); });

    m.def("rouge_n", [](const std::string &c, const std::string &r, std::size_t n) { return rouge_n(c, r, n); },
          py::arg("candidate"), py::arg("reference"), py::arg("n"));
    m.def("rouge_l", [](const std::string &c, const std::string &r) { return rouge_l(c, r); }, py::arg("candidate"),
          py::arg("reference"));
    m.def("rouge_report", &rouge_report, py::arg("pairs"));
    m.def("cosine", &cosine);

    py::class_<nn::ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("d_model", &nn::ModelConfig::d_model)
        .def_readwrite("n_heads", &nn::ModelConfig::n_heads)
        .def_readwrite("n_layers", &nn::ModelConfig::n_layers)
        .def_readwrite("d_ff", &nn::ModelConfig::d_ff)
        .def_readwrite("vocab_size", &nn::ModelConfig::vocab_size)
        .def_readwrite("max_len", &nn::ModelConfig::max_len)
        .def_readwrite("dropout", &nn::ModelConfig::dropout)
        .def_readwrite("share_weights", &nn::ModelConfig::share_weights)
        .def_readwrite("n_persons", &nn::ModelConfig::n_persons);

    m.def("parameter_count", [](const nn::ModelConfig &cfg) {
        return nn::TinyModel<float>::init(cfg, 0).parameter_count();
    });

    m.def(
        "_run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "dialsum");
            std::vector<const char *> argv;
            for (const auto &a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
