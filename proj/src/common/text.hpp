#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gbias::text {

// Number of Unicode code points in a UTF-8 string (invalid bytes count as one).
std::size_t utf8_length(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);  // ASCII only; UTF-8 bytes pass through

// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize_entry(std::string_view s);

// "Hair Colour" / "hairColour" / "hair-colour" -> "hair_colour".
std::string snake_case(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

}  // namespace gbias::text
