#include "dialsum/evalmetrics.hpp"

#include "dialsum/error.hpp"
#include "dialsum/unicode.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace dialsum {

RougeScore RougeScore::from_counts(std::size_t overlap, std::size_t candidate_total, std::size_t reference_total) {
    RougeScore s;
    s.precision = candidate_total == 0 ? 0.0 : static_cast<double>(overlap) / static_cast<double>(candidate_total);
    s.recall = reference_total == 0 ? 0.0 : static_cast<double>(overlap) / static_cast<double>(reference_total);
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

std::vector<std::string> rouge_tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::u32string word;
    auto flush = [&] {
        if (word.empty()) return;
        out.push_back(unicode::to_lower(unicode::encode(word)));
        word.clear();
    };
    for (char32_t c : unicode::decode(text)) {
        if (unicode::is_alnum(c)) {
            word.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

namespace {

std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string> &tokens, std::size_t n) {
    std::unordered_map<std::string, std::size_t> counts;
    if (n == 0 || tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t k = 1; k < n; ++k) {
            key.push_back('\x1f');
            key += tokens[i + k];
        }
        ++counts[key];
    }
    return counts;
}

} // namespace

RougeScore rouge_n_tokens(const std::vector<std::string> &candidate, const std::vector<std::string> &reference,
                          std::size_t n) {
    if (n == 0) throw Error(ErrorCode::InvalidConfig, "ROUGE-N needs n >= 1");
    auto cand = ngram_counts(candidate, n);
    auto ref = ngram_counts(reference, n);
    std::size_t overlap = 0;
    for (const auto &[gram, c] : cand) {
        if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(c, it->second);
    }
    auto total = [](const std::vector<std::string> &t, std::size_t k) { return t.size() >= k ? t.size() - k + 1 : 0; };
    return RougeScore::from_counts(overlap, total(candidate, n), total(reference, n));
}

RougeScore rouge_l_tokens(const std::vector<std::string> &candidate, const std::vector<std::string> &reference) {
    const auto m = candidate.size();
    const auto n = reference.size();
    std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return RougeScore::from_counts(prev[n], m, n);
}

RougeScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n) {
    return rouge_n_tokens(rouge_tokenize(candidate), rouge_tokenize(reference), n);
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
    return rouge_l_tokens(rouge_tokenize(candidate), rouge_tokenize(reference));
}

EvalReport rouge_report(const std::vector<std::pair<std::string, std::string>> &pairs) {
    if (pairs.empty()) throw Error(ErrorCode::EmptyPairs, "no candidate/reference pairs to score");
    EvalReport r;
    for (const auto &[cand, ref] : pairs) {
        auto c = rouge_tokenize(cand);
        auto g = rouge_tokenize(ref);
        r.r1 += rouge_n_tokens(c, g, 1).f1;
        r.r2 += rouge_n_tokens(c, g, 2).f1;
        r.rl += rouge_l_tokens(c, g).f1;
    }
    const auto n = static_cast<double>(pairs.size());
    r.r1 /= n;
    r.r2 /= n;
    r.rl /= n;
    r.r_avg = (r.r1 + r.r2 + r.rl) / 3.0;
    r.n_pairs = pairs.size();
    return r;
}

std::string format_report_table(const EvalReport &report) {
    char buf[256];
    std::string out;
    if (report.cos) {
        std::snprintf(buf, sizeof buf, "%8s %8s %8s %8s %8s %8s\n", "R-1", "R-2", "R-L", "R-AVG", "COS.", "N");
        out += buf;
        std::snprintf(buf, sizeof buf, "%8.2f %8.2f %8.2f %8.2f %8.4f %8zu\n", report.r1 * 100, report.r2 * 100,
                      report.rl * 100, report.r_avg * 100, *report.cos, report.n_pairs);
    } else {
        std::snprintf(buf, sizeof buf, "%8s %8s %8s %8s %8s\n", "R-1", "R-2", "R-L", "R-AVG", "N");
        out += buf;
        std::snprintf(buf, sizeof buf, "%8.2f %8.2f %8.2f %8.2f %8zu\n", report.r1 * 100, report.r2 * 100,
                      report.rl * 100, report.r_avg * 100, report.n_pairs);
    }
    out += buf;
    return out;
}

std::vector<std::string> select_longest(const Corpus &corpus, std::size_t n, LongestBy by) {
    std::vector<std::pair<std::size_t, const std::string *>> lengths;
    lengths.reserve(corpus.dialogues.size());
    for (const auto &d : corpus.dialogues) {
        std::size_t len = 0;
        if (by == LongestBy::dialogue) {
            for (const auto &t : d.turns) len += rouge_tokenize(t.text).size();
        } else if (d.summary) {
            len = rouge_tokenize(*d.summary).size();
        }
        lengths.emplace_back(len, &d.id);
    }
    std::sort(lengths.begin(), lengths.end(), [](const auto &a, const auto &b) {
        if (a.first != b.first) return a.first > b.first;
        return *a.second < *b.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < lengths.size() && i < n; ++i) ids.push_back(*lengths[i].second);
    return ids;
}

const std::vector<double> &EmbeddingFile::at(const std::string &id) const {
    auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorCode::MissingId, "no embedding for id '" + id + "'");
    return vectors[it->second];
}

EmbeddingFile read_embeddings(std::istream &in) {
    EmbeddingFile f;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::string id;
        std::vector<double> vec;
        try {
            auto rec = nlohmann::json::parse(line);
            const auto &jid = rec.at("id");
            id = jid.is_string() ? jid.get<std::string>() : jid.dump();
            rec.at("vector").get_to(vec);
        } catch (const std::exception &e) {
            throw MalformedRecord(line_no, e.what());
        }
        if (vec.empty()) throw MalformedRecord(line_no, "empty vector");
        if (!f.vectors.empty() && vec.size() != f.dimension()) {
            throw Error(ErrorCode::DimensionMismatch, "line " + std::to_string(line_no) + ": vector of dimension " +
                                                          std::to_string(vec.size()) + ", expected " +
                                                          std::to_string(f.dimension()));
        }
        if (!f.index.emplace(id, f.ids.size()).second) throw MalformedRecord(line_no, "duplicate id '" + id + "'");
        f.ids.push_back(std::move(id));
        f.vectors.push_back(std::move(vec));
    }
    return f;
}

EmbeddingFile load_embeddings(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open embedding file: " + path.string());
    return read_embeddings(in);
}

double cosine(const std::vector<double> &u, const std::vector<double> &v) {
    if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "vectors differ in dimension");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double cosine_eval(const EmbeddingFile &pred, const EmbeddingFile &ref, const std::vector<std::string> &ids) {
    if (ids.empty()) return 0.0;
    if (pred.dimension() != ref.dimension()) {
        throw Error(ErrorCode::DimensionMismatch, "prediction and reference embeddings differ in dimension");
    }
    double total = 0.0;
    for (const auto &id : ids) total += cosine(pred.at(id), ref.at(id));
    return total / static_cast<double>(ids.size());
}

} // namespace dialsum
