#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace defamekit::text {

// Number of UTF-8 code points. Invalid continuation bytes count as one each.
std::size_t utf8_length(std::string_view s);

std::string trim(std::string_view s);

// Trims and collapses every internal whitespace run to a single space.
std::string normalize_whitespace(std::string_view s);

std::string to_lower_ascii(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

// Whole-word, case-insensitive match; word characters are ASCII alnum and
// any byte >= 0x80.
bool contains_word_ci(std::string_view haystack, std::string_view word);

std::vector<std::string> split_lines(std::string_view s);

// Maximal runs of word characters.
std::vector<std::string> words(std::string_view s);

// Truncates to at most `max_chars` code points.
std::string truncate_utf8(std::string_view s, std::size_t max_chars);

}  // namespace defamekit::text
