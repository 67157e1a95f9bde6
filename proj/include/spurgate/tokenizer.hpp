#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "spurgate/unicode.hpp"

namespace spurgate {

// One whitespace-delimited token with its byte range in the source string.
// source[byte_start, byte_end) == text always holds.
struct TokenSpan {
  std::string text;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;

  bool operator==(const TokenSpan&) const = default;
};

// Splits text into maximal runs of non-whitespace bytes. Unicode whitespace
// delimits; anything else (including malformed bytes) belongs to a token.
inline std::vector<TokenSpan> tokenize(std::string_view text) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  std::size_t token_start = 0;
  bool in_token = false;
  while (i < text.size()) {
    const std::size_t at = i;
    const char32_t cp = unicode::decode(text, i);
    if (unicode::is_whitespace(cp)) {
      if (in_token) {
        spans.push_back({std::string(text.substr(token_start, at - token_start)),
                         token_start, at});
        in_token = false;
      }
    } else if (!in_token) {
      token_start = at;
      in_token = true;
    }
  }
  if (in_token) {
    spans.push_back({std::string(text.substr(token_start)), token_start,
                     text.size()});
  }
  return spans;
}

// Canonicalizes one token for counting: optional lowercase folding and
// stripping of leading/trailing punctuation (interior punctuation is kept,
// so "2014-09-25" survives intact). May return an empty string; callers
// skip those.
inline std::string normalize(std::string_view token, bool lowercase,
                             bool strip_punct) {
  std::vector<char32_t> cps;
  cps.reserve(token.size());
  std::size_t i = 0;
  while (i < token.size()) cps.push_back(unicode::decode(token, i));

  std::size_t lo = 0;
  std::size_t hi = cps.size();
  if (strip_punct) {
    while (lo < hi && unicode::is_edge_punct(cps[lo])) ++lo;
    while (hi > lo && unicode::is_edge_punct(cps[hi - 1])) --hi;
  }
  std::string out;
  out.reserve(token.size());
  for (std::size_t k = lo; k < hi; ++k) {
    unicode::encode(lowercase ? unicode::to_lower(cps[k]) : cps[k], out);
  }
  return out;
}

}  // namespace spurgate
