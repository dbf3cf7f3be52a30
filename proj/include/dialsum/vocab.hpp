#pragma once

#include "dialsum/corpus.hpp"
#include "dialsum/unicode.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dialsum {

using TokenId = std::int32_t;

inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr int kDefaultMaxPersons = 64;
inline constexpr std::size_t kDefaultEmojiBudget = 311;

std::string person_token(int index);

struct VocabOptions {
    int max_persons = kDefaultMaxPersons;
    std::vector<unicode::CodepointRange> emoji_ranges = unicode::facial_emoji_ranges();
};

/// Token inventory: base subwords, the five reserved markers, person
/// placeholders and appended emoji. Ids are dense and fixed after build.
class Vocab {
public:
    /// Builds from an ordered token list (index = id). Reserved markers must
    /// be present; missing "[PERSON_k]" tokens are appended in order.
    static Vocab from_tokens(std::vector<std::string> tokens, VocabOptions options = {});
    static Vocab load(const std::filesystem::path &path, VocabOptions options = {});

    /// Writes the full inventory, one token per line (line number = id).
    void save(const std::filesystem::path &path) const;

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string &token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    std::optional<TokenId> find(std::string_view token) const;
    bool contains(std::string_view token) const { return find(token).has_value(); }

    TokenId sep_id() const noexcept { return sep_; }
    TokenId mask_id() const noexcept { return mask_; }
    TokenId unk_id() const noexcept { return unk_; }
    TokenId pad_id() const noexcept { return pad_; }
    TokenId cls_id() const noexcept { return cls_; }

    int max_persons() const noexcept { return static_cast<int>(person_ids_.size()); }
    TokenId person_id(int index) const { return person_ids_.at(static_cast<std::size_t>(index)); }
    /// Index k when `id` is "[PERSON_k]".
    std::optional<int> person_index(TokenId id) const;

    bool is_special(TokenId id) const;
    /// Tokens consisting only of codepoints in the configured emoji ranges.
    std::vector<std::string> emoji_tokens() const;
    const VocabOptions &options() const noexcept { return options_; }
    const std::vector<std::string> &tokens() const noexcept { return tokens_; }

    /// New vocab with `extra` appended (already-present tokens skipped).
    Vocab extended(const std::vector<std::string> &extra) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
    std::vector<TokenId> person_ids_;
    std::unordered_map<TokenId, int> person_index_;
    TokenId sep_ = -1, mask_ = -1, unk_ = -1, pad_ = -1, cls_ = -1;
    VocabOptions options_;
};

struct TokenSeq {
    std::vector<TokenId> ids;
    std::vector<std::string> pieces;

    std::size_t size() const noexcept { return ids.size(); }
    std::size_t unk_count(const Vocab &vocab) const;
    void append(const TokenSeq &other);
    void push_back(TokenId id, std::string piece);

    bool operator==(const TokenSeq &) const = default;
};

/// Lowercases, splits on whitespace and punctuation (pictographic symbols
/// stand alone), then segments each word greedily longest-match-first with
/// "##" continuation pieces. A word that cannot be fully segmented becomes a
/// single [UNK]. Bracketed special tokens such as "[PERSON_3]" are kept whole.
TokenSeq tokenize(std::string_view text, const Vocab &vocab);

/// Joins pieces with spaces, gluing "##" continuations to the previous piece.
std::string detokenize(const TokenSeq &seq);

/// Most frequent emoji codepoints (within `ranges`) over all utterance texts.
/// Ties are broken by ascending codepoint.
std::vector<std::string> build_emoji_vocab(const Corpus &corpus, std::size_t budget = kDefaultEmojiBudget,
                                           const std::vector<unicode::CodepointRange> &ranges =
                                               unicode::facial_emoji_ranges());

struct CanonicalDialogue {
    Dialogue dialogue;
    /// name -> "[PERSON_k]" in order of first appearance.
    std::vector<std::pair<std::string, std::string>> name_map;
};

/// Replaces speakers by person tokens and rewrites whole-word,
/// case-insensitive mentions of the same names in texts and the summary.
/// Throws Error(TooManySpeakers) past `max_persons`.
CanonicalDialogue canonicalize_names(const Dialogue &d, int max_persons = kDefaultMaxPersons);

/// Whole-word case-insensitive replacement of each name by its token.
std::string replace_names(std::string_view text, const std::vector<std::pair<std::string, std::string>> &name_map);

} // namespace dialsum
