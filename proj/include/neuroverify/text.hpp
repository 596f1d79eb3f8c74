#pragma once

// Small lexical helpers shared by the constraint checks, the summary scorer
// and the reasoning metrics. Matching is ASCII case-insensitive.

#include <string>
#include <string_view>
#include <vector>

namespace neuroverify::text {

std::string lower(std::string_view s);
std::string_view trim(std::string_view s);

// Case-insensitive substring test.
bool contains(std::string_view haystack, std::string_view needle);

// Case-insensitive match of `needle` delimited by non-alphanumeric characters
// on both sides, so "normal" does not match inside "abnormal".
bool contains_word(std::string_view haystack, std::string_view needle);

bool contains_any(std::string_view haystack, const std::vector<std::string>& needles);
bool contains_any_word(std::string_view haystack, const std::vector<std::string>& needles);

// Splits on '.', ';', '!', '?' and newlines. A '.' between two digits is not
// a boundary ("0.87"). Empty pieces are dropped.
std::vector<std::string_view> sentences(std::string_view s);

}  // namespace neuroverify::text
