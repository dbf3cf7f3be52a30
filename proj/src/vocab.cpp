#include "dialsum/vocab.hpp"

#include "dialsum/error.hpp"

#include <unicode/uchar.h>

#include <algorithm>
#include <fstream>
#include <map>

namespace dialsum {

std::string person_token(int index) {
    return "[PERSON_" + std::to_string(index) + "]";
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens, VocabOptions options) {
    Vocab v;
    v.options_ = std::move(options);
    if (v.options_.max_persons < 0) throw Error(ErrorCode::InvalidConfig, "max_persons must be non-negative");

    auto add = [&v](std::string tok) {
        auto id = static_cast<TokenId>(v.tokens_.size());
        if (!v.index_.emplace(tok, id).second) {
            throw Error(ErrorCode::MalformedVocab, "duplicate token in vocab: " + tok);
        }
        v.tokens_.push_back(std::move(tok));
    };
    for (auto &t : tokens) {
        if (t.empty()) throw Error(ErrorCode::MalformedVocab, "empty token at id " + std::to_string(v.tokens_.size()));
        add(std::move(t));
    }

    auto require = [&v](std::string_view name) {
        auto id = v.find(name);
        if (!id) throw Error(ErrorCode::MalformedVocab, "vocab lacks reserved token " + std::string(name));
        return *id;
    };
    v.sep_ = require(kSep);
    v.mask_ = require(kMask);
    v.unk_ = require(kUnk);
    v.pad_ = require(kPad);
    v.cls_ = require(kCls);

    for (int k = 0; k < v.options_.max_persons; ++k) {
        auto name = person_token(k);
        auto id = v.find(name);
        if (!id) {
            add(name);
            id = static_cast<TokenId>(v.tokens_.size() - 1);
        }
        v.person_ids_.push_back(*id);
        v.person_index_.emplace(*id, k);
    }
    return v;
}

Vocab Vocab::load(const std::filesystem::path &path, VocabOptions options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open vocab file: " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(unicode::nfc(line));
    }
    return from_tokens(std::move(tokens), std::move(options));
}

void Vocab::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write vocab file: " + path.string());
    for (const auto &t : tokens_) out << t << '\n';
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Vocab::person_index(TokenId id) const {
    auto it = person_index_.find(id);
    if (it == person_index_.end()) return std::nullopt;
    return it->second;
}

bool Vocab::is_special(TokenId id) const {
    return id == sep_ || id == mask_ || id == unk_ || id == pad_ || id == cls_ || person_index_.count(id) > 0;
}

std::vector<std::string> Vocab::emoji_tokens() const {
    std::vector<std::string> out;
    for (const auto &t : tokens_) {
        auto cps = unicode::decode(t);
        bool all = !cps.empty();
        for (char32_t c : cps) all = all && unicode::in_ranges(c, options_.emoji_ranges);
        if (all) out.push_back(t);
    }
    return out;
}

Vocab Vocab::extended(const std::vector<std::string> &extra) const {
    std::vector<std::string> tokens = tokens_;
    for (const auto &t : extra) {
        if (!contains(t)) tokens.push_back(t);
    }
    return from_tokens(std::move(tokens), options_);
}

std::size_t TokenSeq::unk_count(const Vocab &vocab) const {
    return static_cast<std::size_t>(std::count(ids.begin(), ids.end(), vocab.unk_id()));
}

void TokenSeq::append(const TokenSeq &other) {
    ids.insert(ids.end(), other.ids.begin(), other.ids.end());
    pieces.insert(pieces.end(), other.pieces.begin(), other.pieces.end());
}

void TokenSeq::push_back(TokenId id, std::string piece) {
    ids.push_back(id);
    pieces.push_back(std::move(piece));
}

namespace {

constexpr std::size_t kMaxWordChars = 100;
constexpr std::size_t kMaxSpecialChars = 24;

bool is_ignorable(char32_t c) {
    if (c == 0 || c == 0xFFFD) return true;
    if (c >= 0xFE00 && c <= 0xFE0F) return true; // variation selectors
    auto type = u_charType(static_cast<UChar32>(c));
    return type == U_FORMAT_CHAR || (type == U_CONTROL_CHAR && !unicode::is_space(c));
}

std::optional<TokenId> find_piece(const Vocab &vocab, const std::string &piece) {
    auto id = vocab.find(piece);
    if (id && vocab.is_special(*id)) return std::nullopt;
    return id;
}

void wordpiece(std::u32string_view word, const Vocab &vocab, TokenSeq &out) {
    if (word.empty()) return;
    const std::u32string lowered = unicode::decode(unicode::to_lower(unicode::encode(word)));
    if (lowered.size() > kMaxWordChars) {
        out.push_back(vocab.unk_id(), std::string(kUnk));
        return;
    }
    TokenSeq pieces;
    std::size_t start = 0;
    while (start < lowered.size()) {
        std::size_t end = lowered.size();
        std::optional<TokenId> found;
        std::string piece;
        while (start < end) {
            piece = unicode::encode(std::u32string_view(lowered).substr(start, end - start));
            if (start > 0) piece.insert(0, "##");
            found = find_piece(vocab, piece);
            if (found) break;
            --end;
        }
        if (!found) {
            out.push_back(vocab.unk_id(), std::string(kUnk));
            return;
        }
        pieces.push_back(*found, std::move(piece));
        start = end;
    }
    out.append(pieces);
}

} // namespace

TokenSeq tokenize(std::string_view text, const Vocab &vocab) {
    const std::u32string cps = unicode::decode(text);
    TokenSeq out;
    std::u32string word;
    auto flush = [&] {
        wordpiece(word, vocab, out);
        word.clear();
    };

    for (std::size_t i = 0; i < cps.size(); ++i) {
        char32_t c = cps[i];
        if (c == U'[') {
            std::size_t limit = std::min(cps.size(), i + kMaxSpecialChars);
            std::size_t j = i + 1;
            while (j < limit && cps[j] != U']') ++j;
            if (j < limit) {
                auto candidate = unicode::encode(std::u32string_view(cps).substr(i, j - i + 1));
                if (auto id = vocab.find(candidate); id && vocab.is_special(*id)) {
                    flush();
                    out.push_back(*id, std::move(candidate));
                    i = j;
                    continue;
                }
            }
        }
        if (is_ignorable(c)) continue;
        if (unicode::is_space(c)) {
            flush();
        } else if (unicode::is_punct(c) || unicode::is_symbol(c) ||
                   unicode::in_ranges(c, vocab.options().emoji_ranges)) {
            flush();
            word.push_back(c);
            flush();
        } else {
            word.push_back(c);
        }
    }
    flush();
    return out;
}

std::string detokenize(const TokenSeq &seq) {
    std::string out;
    for (const auto &p : seq.pieces) {
        if (p.rfind("##", 0) == 0 && p.size() > 2) {
            out.append(p, 2, std::string::npos);
        } else {
            if (!out.empty()) out.push_back(' ');
            out += p;
        }
    }
    return out;
}

std::vector<std::string> build_emoji_vocab(const Corpus &corpus, std::size_t budget,
                                           const std::vector<unicode::CodepointRange> &ranges) {
    std::map<char32_t, std::size_t> counts;
    for (const auto &d : corpus.dialogues) {
        for (const auto &t : d.turns) {
            for (char32_t c : unicode::decode(t.text)) {
                if (unicode::in_ranges(c, ranges)) ++counts[c];
            }
        }
    }
    std::vector<std::pair<char32_t, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto &a, const auto &b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < budget; ++i) out.push_back(unicode::encode(ranked[i].first));
    return out;
}

std::string replace_names(std::string_view text, const std::vector<std::pair<std::string, std::string>> &name_map) {
    struct Pattern {
        std::u32string folded;
        const std::string *replacement;
    };
    std::vector<Pattern> patterns;
    for (const auto &[name, tok] : name_map) {
        std::u32string folded;
        for (char32_t c : unicode::decode(name)) folded.push_back(unicode::fold_case(c));
        if (!folded.empty()) patterns.push_back({std::move(folded), &tok});
    }
    // Longest first so "Mary Ann" wins over "Mary".
    std::stable_sort(patterns.begin(), patterns.end(),
                     [](const Pattern &a, const Pattern &b) { return a.folded.size() > b.folded.size(); });

    const std::u32string cps = unicode::decode(text);
    std::u32string folded;
    folded.reserve(cps.size());
    for (char32_t c : cps) folded.push_back(unicode::fold_case(c));

    std::string out;
    std::size_t i = 0;
    while (i < cps.size()) {
        bool at_boundary = i == 0 || !unicode::is_alnum(cps[i - 1]);
        const Pattern *hit = nullptr;
        if (at_boundary) {
            for (const auto &p : patterns) {
                auto n = p.folded.size();
                if (i + n > cps.size()) continue;
                if (folded.compare(i, n, p.folded) != 0) continue;
                if (i + n < cps.size() && unicode::is_alnum(cps[i + n])) continue;
                hit = &p;
                break;
            }
        }
        if (hit) {
            out += *hit->replacement;
            i += hit->folded.size();
        } else {
            out += unicode::encode(cps[i]);
            ++i;
        }
    }
    return out;
}

CanonicalDialogue canonicalize_names(const Dialogue &d, int max_persons) {
    auto names = interlocutors(d);
    if (static_cast<int>(names.size()) > max_persons) {
        throw Error(ErrorCode::TooManySpeakers, "dialogue '" + d.id + "' has " + std::to_string(names.size()) +
                                                    " speakers, limit is " + std::to_string(max_persons));
    }
    CanonicalDialogue out;
    for (std::size_t k = 0; k < names.size(); ++k) {
        out.name_map.emplace_back(names[k], person_token(static_cast<int>(k)));
    }
    std::unordered_map<std::string, std::string> lookup(out.name_map.begin(), out.name_map.end());

    out.dialogue.id = d.id;
    for (const auto &t : d.turns) {
        out.dialogue.turns.push_back({lookup.at(t.speaker), replace_names(t.text, out.name_map)});
    }
    if (d.summary) out.dialogue.summary = replace_names(*d.summary, out.name_map);
    return out;
}

} // namespace dialsum
