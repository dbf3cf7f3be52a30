#pragma once

#include "dialsum/corpus.hpp"

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dialsum {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    static RougeScore from_counts(std::size_t overlap, std::size_t candidate_total, std::size_t reference_total);
};

struct EvalReport {
    double r1 = 0.0;
    double r2 = 0.0;
    double rl = 0.0;
    double r_avg = 0.0;
    std::optional<double> cos;
    std::size_t n_pairs = 0;
};

/// Lowercased alphanumeric runs; everything else separates tokens.
std::vector<std::string> rouge_tokenize(std::string_view text);

RougeScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n);
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

RougeScore rouge_n_tokens(const std::vector<std::string> &candidate, const std::vector<std::string> &reference,
                          std::size_t n);
RougeScore rouge_l_tokens(const std::vector<std::string> &candidate, const std::vector<std::string> &reference);

/// Mean per-pair F1 for ROUGE-1/2/L. Throws Error(EmptyPairs).
EvalReport rouge_report(const std::vector<std::pair<std::string, std::string>> &pairs);

/// Scores are shown x100 with two decimals.
std::string format_report_table(const EvalReport &report);

enum class LongestBy { dialogue, summary };

/// Ids of the `n` dialogues with the most tokens; ties by ascending id.
std::vector<std::string> select_longest(const Corpus &corpus, std::size_t n = 100,
                                        LongestBy by = LongestBy::dialogue);

struct EmbeddingFile {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> vectors;
    std::unordered_map<std::string, std::size_t> index;

    std::size_t dimension() const { return vectors.empty() ? 0 : vectors.front().size(); }
    const std::vector<double> &at(const std::string &id) const;
};

/// Reads {"id": str, "vector": [float]} lines; dimensions must agree and ids
/// must be unique.
EmbeddingFile read_embeddings(std::istream &in);
EmbeddingFile load_embeddings(const std::filesystem::path &path);

double cosine(const std::vector<double> &u, const std::vector<double> &v);

/// Mean cosine over `ids`; zero vectors score 0.
/// Throws Error(MissingId) or Error(DimensionMismatch).
double cosine_eval(const EmbeddingFile &pred, const EmbeddingFile &ref, const std::vector<std::string> &ids);

} // namespace dialsum
