#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dialsum::unicode {

struct CodepointRange {
    char32_t lo;
    char32_t hi; // inclusive

    bool contains(char32_t c) const noexcept { return c >= lo && c <= hi; }
    bool operator==(const CodepointRange &) const = default;
};

// U+1F600..U+1F64F, the "Emoticons" block.
std::vector<CodepointRange> facial_emoji_ranges();

bool in_ranges(char32_t c, const std::vector<CodepointRange> &ranges);

std::string nfc(std::string_view utf8);
std::string to_lower(std::string_view utf8);

std::u32string decode(std::string_view utf8);
std::string encode(char32_t c);
std::string encode(std::u32string_view s);

char32_t fold_case(char32_t c);
bool is_space(char32_t c);
bool is_alnum(char32_t c);
// Characters emitted as standalone tokens: punctuation and pictographic symbols.
bool is_punct(char32_t c);
bool is_symbol(char32_t c);

std::string_view trim(std::string_view s);

} // namespace dialsum::unicode
