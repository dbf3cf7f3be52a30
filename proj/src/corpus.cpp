#include "dialsum/corpus.hpp"

#include "dialsum/error.hpp"
#include "dialsum/unicode.hpp"
#include "dialsum/vocab.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace dialsum {

using json = nlohmann::json;

std::vector<std::string> interlocutors(const Dialogue &d) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto &t : d.turns) {
        if (seen.insert(t.speaker).second) out.push_back(t.speaker);
    }
    return out;
}

std::string_view to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view name) {
    if (name == "train") return Split::train;
    if (name == "valid" || name == "val" || name == "validation") return Split::valid;
    if (name == "test") return Split::test;
    throw Error(ErrorCode::InvalidConfig, "unknown split: " + std::string(name));
}

namespace {

std::string collapse_newlines(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\r') continue;
        out.push_back(c == '\n' ? ' ' : c);
    }
    return out;
}

} // namespace

Dialogue parse_dialogue(std::string_view raw, std::string id) {
    const std::string text = unicode::nfc(raw);
    Dialogue d;
    d.id = std::move(id);

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string_view line(text.data() + pos, nl - pos);
        pos = nl + 1;

        line = unicode::trim(line);
        if (line.empty()) continue;
        ++line_no;

        auto colon = line.find(':');
        std::string_view speaker =
            colon == std::string_view::npos ? std::string_view{} : unicode::trim(line.substr(0, colon));
        if (!speaker.empty()) {
            d.turns.push_back({std::string(speaker), std::string(unicode::trim(line.substr(colon + 1)))});
            continue;
        }
        if (d.turns.empty()) {
            throw Error(ErrorCode::MissingSpeaker,
                        "dialogue '" + d.id + "': first line has no speaker: " + std::string(line));
        }
        // Continuation of a wrapped message.
        auto &prev = d.turns.back().text;
        if (!prev.empty()) prev.push_back(' ');
        prev.append(line);
    }
    if (d.turns.empty()) throw Error(ErrorCode::EmptyDialogue, "dialogue '" + d.id + "' has no utterances");
    return d;
}

std::string format_dialogue(const Dialogue &d) {
    std::string out;
    for (const auto &t : d.turns) {
        out += t.speaker;
        out += ": ";
        out += t.text;
        out += '\n';
    }
    return out;
}

namespace {

Dialogue dialogue_from_json(const json &rec, std::size_t index) {
    if (!rec.is_object()) throw std::runtime_error("record is not an object");
    std::string id;
    if (auto it = rec.find("id"); it != rec.end() && !it->is_null()) {
        id = it->is_string() ? it->get<std::string>() : it->dump();
    } else {
        id = std::to_string(index);
    }

    auto dit = rec.find("dialogue");
    if (dit == rec.end()) throw std::runtime_error("missing field 'dialogue'");

    Dialogue d;
    if (dit->is_string()) {
        d = parse_dialogue(dit->get<std::string>(), id);
    } else if (dit->is_array()) {
        d.id = id;
        for (const auto &turn : *dit) {
            std::string speaker(unicode::trim(unicode::nfc(collapse_newlines(turn.at("speaker").get<std::string>()))));
            std::string text(unicode::trim(unicode::nfc(collapse_newlines(turn.at("text").get<std::string>()))));
            if (speaker.empty()) throw std::runtime_error("turn with empty speaker");
            d.turns.push_back({std::move(speaker), std::move(text)});
        }
        if (d.turns.empty()) throw Error(ErrorCode::EmptyDialogue, "dialogue '" + id + "' has no utterances");
    } else {
        throw std::runtime_error("field 'dialogue' must be a string or a list of turns");
    }

    if (auto sit = rec.find("summary"); sit != rec.end() && !sit->is_null()) {
        d.summary = unicode::nfc(collapse_newlines(sit->get<std::string>()));
    }
    return d;
}

void add_unique(Corpus &corpus, std::unordered_set<std::string> &ids, Dialogue d, std::size_t line) {
    if (!ids.insert(d.id).second) throw MalformedRecord(line, "duplicate id '" + d.id + "'");
    corpus.dialogues.push_back(std::move(d));
}

} // namespace

Corpus read_corpus_jsonl(std::istream &in, Split split) {
    Corpus corpus;
    corpus.split = split;
    std::unordered_set<std::string> ids;

    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto first = content.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return corpus;

    if (content[first] == '[') {
        json arr;
        try {
            arr = json::parse(content);
        } catch (const json::exception &e) {
            throw MalformedRecord(1, e.what());
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            try {
                add_unique(corpus, ids, dialogue_from_json(arr[i], i), i + 1);
            } catch (const MalformedRecord &) {
                throw;
            } catch (const std::exception &e) {
                throw MalformedRecord(i + 1, e.what());
            }
        }
        return corpus;
    }

    std::istringstream lines(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (unicode::trim(line).empty()) continue;
        try {
            add_unique(corpus, ids, dialogue_from_json(json::parse(line), corpus.dialogues.size()), line_no);
        } catch (const MalformedRecord &) {
            throw;
        } catch (const std::exception &e) {
            throw MalformedRecord(line_no, e.what());
        }
    }
    return corpus;
}

Corpus read_corpus_blocks(std::istream &in, Split split) {
    Corpus corpus;
    corpus.split = split;
    std::unordered_set<std::string> ids;

    std::vector<std::string> block;
    std::size_t block_start = 0;
    std::size_t line_no = 0;

    auto flush = [&] {
        if (block.empty()) return;
        std::optional<std::string> summary;
        auto last = unicode::trim(block.back());
        if (last.rfind("SUMMARY:", 0) == 0) {
            summary = unicode::nfc(unicode::trim(last.substr(8)));
            block.pop_back();
        }
        std::string raw;
        for (const auto &l : block) {
            raw += l;
            raw += '\n';
        }
        try {
            Dialogue d = parse_dialogue(raw, std::to_string(corpus.dialogues.size()));
            d.summary = std::move(summary);
            add_unique(corpus, ids, std::move(d), block_start);
        } catch (const MalformedRecord &) {
            throw;
        } catch (const std::exception &e) {
            throw MalformedRecord(block_start, e.what());
        }
        block.clear();
    };

    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (unicode::trim(line).empty()) {
            flush();
            continue;
        }
        if (block.empty()) block_start = line_no;
        block.push_back(line);
    }
    flush();
    return corpus;
}

Corpus load_corpus(const std::filesystem::path &path, CorpusFormat format, Split split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open corpus file: " + path.string());
    return format == CorpusFormat::jsonl ? read_corpus_jsonl(in, split) : read_corpus_blocks(in, split);
}

void write_corpus_jsonl(const Corpus &corpus, std::ostream &out) {
    for (const auto &d : corpus.dialogues) {
        json turns = json::array();
        for (const auto &t : d.turns) turns.push_back({{"speaker", t.speaker}, {"text", t.text}});
        json rec = {{"id", d.id}, {"dialogue", std::move(turns)}};
        if (d.summary) rec["summary"] = *d.summary;
        out << rec.dump() << '\n';
    }
}

StatsReport corpus_stats(const Corpus &corpus, const Vocab &vocab) {
    StatsReport r;
    std::unordered_set<std::string> names;
    for (const auto &d : corpus.dialogues) {
        ++r.n_dialogues;
        for (const auto &t : d.turns) {
            ++r.n_utterances;
            names.insert(t.speaker);
            if (tokenize(t.text, vocab).unk_count(vocab) > 0) ++r.n_oov_utterances;
        }
    }
    r.n_interlocutors = names.size();
    r.oov_fraction =
        r.n_utterances == 0 ? 0.0 : static_cast<double>(r.n_oov_utterances) / static_cast<double>(r.n_utterances);
    return r;
}

} // namespace dialsum
