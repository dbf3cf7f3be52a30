#pragma once

#include "dialsum/corpus.hpp"
#include "dialsum/error.hpp"
#include "dialsum/vocab.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testing {

template <typename F>
std::optional<dialsum::ErrorCode> error_of(F &&f) {
    try {
        f();
    } catch (const dialsum::Error &e) {
        return e.code();
    }
    return std::nullopt;
}

inline std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path &p, const std::string &content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("dialsum-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const { return path_; }
    std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline dialsum::Dialogue make_dialogue(std::string id, std::vector<std::pair<std::string, std::string>> turns,
                                       std::optional<std::string> summary = std::nullopt) {
    dialsum::Dialogue d;
    d.id = std::move(id);
    for (auto &[s, t] : turns) d.turns.push_back({s, t});
    d.summary = std::move(summary);
    return d;
}

inline std::vector<std::string> reserved_tokens() { return {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}; }

inline dialsum::Vocab vocab_with(std::vector<std::string> words) {
    auto tokens = reserved_tokens();
    tokens.insert(tokens.end(), words.begin(), words.end());
    return dialsum::Vocab::from_tokens(std::move(tokens));
}

} // namespace testing
