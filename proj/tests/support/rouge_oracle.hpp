#pragma once

// Reference implementations used to cross-check the ROUGE scorer. They are
// deliberately naive: n-grams are compared element by element and the LCS is
// the textbook full-table recurrence.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace oracle {

using Tokens = std::vector<std::string>;

inline std::vector<Tokens> ngrams(const Tokens &t, std::size_t n) {
    std::vector<Tokens> out;
    for (std::size_t i = 0; i + n <= t.size(); ++i) out.emplace_back(t.begin() + i, t.begin() + i + n);
    return out;
}

/// Clipped overlap by repeatedly striking matched reference n-grams.
inline std::size_t ngram_overlap(const Tokens &cand, const Tokens &ref, std::size_t n) {
    auto c = ngrams(cand, n);
    auto r = ngrams(ref, n);
    std::vector<bool> used(r.size(), false);
    std::size_t hits = 0;
    for (const auto &g : c) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (!used[j] && r[j] == g) {
                used[j] = true;
                ++hits;
                break;
            }
        }
    }
    return hits;
}

inline std::size_t lcs(const Tokens &a, const Tokens &b) {
    std::vector<std::vector<std::size_t>> t(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
        }
    }
    return t[a.size()][b.size()];
}

struct Prf {
    double p, r, f;
};

inline Prf prf(std::size_t overlap, std::size_t n_cand, std::size_t n_ref) {
    double p = n_cand ? static_cast<double>(overlap) / static_cast<double>(n_cand) : 0.0;
    double r = n_ref ? static_cast<double>(overlap) / static_cast<double>(n_ref) : 0.0;
    double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    return {p, r, f};
}

inline Prf rouge_n(const Tokens &cand, const Tokens &ref, std::size_t n) {
    return prf(ngram_overlap(cand, ref, n), ngrams(cand, n).size(), ngrams(ref, n).size());
}

inline Prf rouge_l(const Tokens &cand, const Tokens &ref) { return prf(lcs(cand, ref), cand.size(), ref.size()); }

} // namespace oracle
