#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dialsum {

class Vocab;

struct Utterance {
    std::string speaker;
    std::string text;

    bool operator==(const Utterance &) const = default;
};

struct Dialogue {
    std::string id;
    std::vector<Utterance> turns;
    std::optional<std::string> summary;

    bool operator==(const Dialogue &) const = default;
};

/// Unique speakers in order of first appearance.
std::vector<std::string> interlocutors(const Dialogue &d);

enum class Split { train, valid, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct Corpus {
    Split split = Split::train;
    std::vector<Dialogue> dialogues;
};

enum class CorpusFormat { jsonl, plaintext_blocks };

struct StatsReport {
    std::size_t n_dialogues = 0;
    std::size_t n_utterances = 0;
    std::size_t n_interlocutors = 0;
    std::size_t n_oov_utterances = 0;
    double oov_fraction = 0.0;

    bool operator==(const StatsReport &) const = default;
};

/// Parses a "Name: content" block. The input is NFC-normalized first.
/// Throws Error(EmptyDialogue) or Error(MissingSpeaker).
Dialogue parse_dialogue(std::string_view raw, std::string id);

/// Renders turns back as "speaker: text" lines.
std::string format_dialogue(const Dialogue &d);

/// Reads one record per line. A file whose first non-blank byte is '['
/// is read as a single JSON array (the layout SAMSum ships in).
Corpus read_corpus_jsonl(std::istream &in, Split split = Split::train);
Corpus read_corpus_blocks(std::istream &in, Split split = Split::train);
Corpus load_corpus(const std::filesystem::path &path, CorpusFormat format, Split split = Split::train);

void write_corpus_jsonl(const Corpus &corpus, std::ostream &out);

StatsReport corpus_stats(const Corpus &corpus, const Vocab &vocab);

} // namespace dialsum
