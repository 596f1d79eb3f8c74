#include "neuroverify/text.hpp"

#include <algorithm>
#include <cctype>

namespace neuroverify::text {
namespace {

char fold(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from) {
  if (needle.empty()) return from <= hay.size() ? from : std::string_view::npos;
  if (needle.size() > hay.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
    std::size_t k = 0;
    while (k < needle.size() && fold(hay[i + k]) == fold(needle[k])) ++k;
    if (k == needle.size()) return i;
  }
  return std::string_view::npos;
}

}  // namespace

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), fold);
  return out;
}

std::string_view trim(std::string_view s) {
  auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

bool contains(std::string_view haystack, std::string_view needle) {
  return !needle.empty() && find_ci(haystack, needle, 0) != std::string_view::npos;
}

bool contains_word(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return false;
  std::size_t pos = 0;
  while ((pos = find_ci(haystack, needle, pos)) != std::string_view::npos) {
    const bool left_ok = pos == 0 || !is_word_char(haystack[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == haystack.size() || !is_word_char(haystack[end]);
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

bool contains_any(std::string_view haystack, const std::vector<std::string>& needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](const std::string& n) { return contains(haystack, n); });
}

bool contains_any_word(std::string_view haystack, const std::vector<std::string>& needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](const std::string& n) { return contains_word(haystack, n); });
}

std::vector<std::string_view> sentences(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto piece = trim(s.substr(start, end - start));
    if (!piece.empty()) out.push_back(piece);
    start = end + 1;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '.' && i > 0 && i + 1 < s.size() && is_digit(s[i - 1]) && is_digit(s[i + 1])) {
      continue;
    }
    if (c == '.' || c == ';' || c == '!' || c == '?' || c == '\n') flush(i);
  }
  if (start < s.size()) flush(s.size());
  return out;
}

}  // namespace neuroverify::text
