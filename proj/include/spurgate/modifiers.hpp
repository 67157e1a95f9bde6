#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spurgate/generators.hpp"
#include "spurgate/rng.hpp"
#include "spurgate/tokenizer.hpp"

namespace spurgate {

enum class InjectionLocation { beginning, end, random_gaps };

// Injection budget per sample: an absolute token count, or a fraction of the
// sample's own token count. Fractions round half-up with a floor of one
// token, so 10% of a 23-word text injects exactly 2 tokens and a fraction on
// an empty text still injects 1.
class InjectionAmount {
 public:
  static InjectionAmount count(std::uint64_t n) {
    if (n < 1) throw std::invalid_argument("injection count must be >= 1");
    InjectionAmount a;
    a.is_count_ = true;
    a.count_ = n;
    return a;
  }

  static InjectionAmount fraction(double f) {
    if (!(f > 0.0) || f > 1.0) {
      throw std::invalid_argument("injection fraction must be in (0, 1]");
    }
    InjectionAmount a;
    a.is_count_ = false;
    a.fraction_ = f;
    return a;
  }

  bool is_count() const { return is_count_; }
  std::uint64_t count_value() const { return count_; }
  double fraction_value() const { return fraction_; }

 private:
  InjectionAmount() = default;
  bool is_count_ = true;
  std::uint64_t count_ = 1;
  double fraction_ = 0.0;
};

// Full description of one corruption: where tokens come from, where they
// land, and how many per sample. `seed` drives standalone application;
// dataset-level runs derive per-sample streams instead.
struct InjectionSpec {
  TokenSource source;
  InjectionLocation location = InjectionLocation::beginning;
  InjectionAmount amount = InjectionAmount::count(1);
  std::uint64_t seed = 0;
};

inline std::uint64_t resolve_amount(const InjectionAmount& amount,
                                    std::uint64_t token_count) {
  if (amount.is_count()) return amount.count_value();
  const double scaled = amount.fraction_value() * static_cast<double>(token_count);
  const auto k = static_cast<std::uint64_t>(std::floor(scaled + 0.5));
  return k < 1 ? 1 : k;
}

struct InjectionResult {
  std::string text;
  std::string label;
  std::vector<std::string> injected;  // inserted strings, in insertion order
};

namespace detail {

// Splices items into the word gaps of `text`. gap_items[g] lands in gap g
// (gap 0 = before the first word, gap T = after the last). Inserted items are
// separated from their neighbors by single spaces; all original bytes,
// including inter-word whitespace, are preserved. A text with no words is
// replaced by the joined items.
inline std::string splice_gaps(std::string_view text,
                               const std::vector<TokenSpan>& spans,
                               const std::vector<std::vector<std::string>>& gap_items) {
  const std::size_t t = spans.size();
  if (t == 0) {
    std::string out;
    for (const auto& items : gap_items) {
      for (const std::string& item : items) {
        if (!out.empty()) out += ' ';
        out += item;
      }
    }
    return out;
  }
  std::string out;
  out.reserve(text.size() + 16 * gap_items.size());
  std::size_t cursor = 0;
  for (std::size_t g = 0; g <= t; ++g) {
    if (g == 0) {
      out.append(text.substr(0, spans[0].byte_start));
      for (const std::string& item : gap_items[0]) {
        out += item;
        out += ' ';
      }
      cursor = spans[0].byte_start;
    } else {
      // emit source bytes up to the end of word g-1, then the gap's items
      out.append(text.substr(cursor, spans[g - 1].byte_end - cursor));
      cursor = spans[g - 1].byte_end;
      for (const std::string& item : gap_items[g]) {
        out += ' ';
        out += item;
      }
    }
  }
  out.append(text.substr(cursor));
  return out;
}

}  // namespace detail

// Injects k tokens drawn from spec.source into the text; the label passes
// through untouched. Placement: beginning prepends all k, end appends all k,
// random drops each token independently into one of the T+1 word gaps of the
// original text (so injected tokens never nest inside each other).
inline InjectionResult item_injection(std::string_view text, std::string_view label,
                                      InjectionSpec& spec, RngStream& rng) {
  const std::vector<TokenSpan> spans = tokenize(text);
  const std::uint64_t t = spans.size();
  const std::uint64_t k = resolve_amount(spec.amount, t);

  std::vector<std::string> drawn;
  drawn.reserve(k);
  for (std::uint64_t i = 0; i < k; ++i) drawn.push_back(spec.source.next_token(rng));

  std::vector<std::vector<std::string>> gaps(t + 1);
  switch (spec.location) {
    case InjectionLocation::beginning:
      gaps.front() = drawn;
      break;
    case InjectionLocation::end:
      gaps.back() = drawn;
      break;
    case InjectionLocation::random_gaps:
      for (const std::string& token : drawn) {
        gaps[rng.bounded(t + 1)].push_back(token);
      }
      break;
  }
  return {detail::splice_gaps(text, spans, gaps), std::string(label), std::move(drawn)};
}

inline InjectionResult item_injection(std::string_view text, std::string_view label,
                                      InjectionSpec& spec) {
  RngStream rng(spec.seed);
  return item_injection(text, label, spec, rng);
}

// An HTML tag, optionally paired with its closing form.
struct HtmlTag {
  std::string open;                 // "<p>"
  std::string close;                // "</p>", empty for void elements
  bool has_close() const { return !close.empty(); }

  bool operator==(const HtmlTag&) const = default;
};

// Elements that never take a closing tag.
inline constexpr std::array<std::string_view, 7> kVoidElements = {
    "br", "hr", "img", "col", "input", "meta", "link"};

inline HtmlTag make_html_tag(std::string_view name) {
  if (name.empty() || !std::isalpha(static_cast<unsigned char>(name.front()))) {
    throw std::invalid_argument("invalid HTML tag name: \"" + std::string(name) + "\"");
  }
  for (const char ch : name) {
    if (!std::isalnum(static_cast<unsigned char>(ch))) {
      throw std::invalid_argument("invalid HTML tag name: \"" + std::string(name) + "\"");
    }
  }
  HtmlTag tag;
  tag.open = "<" + std::string(name) + ">";
  for (const std::string_view void_name : kVoidElements) {
    if (name == void_name) return tag;
  }
  tag.close = "</" + std::string(name) + ">";
  return tag;
}

// Tag list file: one tag name per line; pairs are derived automatically for
// non-void elements.
inline std::vector<HtmlTag> load_html_tags(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::vector<HtmlTag> tags;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      tags.push_back(make_html_tag(line));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  if (tags.empty()) throw std::runtime_error(path.string() + ": no tags");
  return tags;
}

// Injects k tag draws. A single tag is placed like an item token; a pair puts
// the opening tag per the location policy and the closing tag at a uniformly
// chosen gap strictly after it (location=end pins the closing tag to the
// final gap instead, with the opening at a uniformly chosen earlier gap).
// Pairs from different draws may interleave; only each pair's own ordering is
// guaranteed.
inline InjectionResult html_injection(std::string_view text, std::string_view label,
                                      InjectionSpec& spec, RngStream& rng,
                                      const std::vector<HtmlTag>& tags) {
  if (tags.empty()) throw std::invalid_argument("html_injection: no tags");
  const std::vector<TokenSpan> spans = tokenize(text);
  const std::uint64_t t = spans.size();
  const std::uint64_t k = resolve_amount(spec.amount, t);

  std::vector<std::vector<std::string>> gaps(t + 1);
  std::vector<std::string> injected;
  injected.reserve(k * 2);
  for (std::uint64_t i = 0; i < k; ++i) {
    const HtmlTag& tag = tags[rng.bounded(tags.size())];
    std::uint64_t open_gap = 0;
    std::uint64_t close_gap = t;
    switch (spec.location) {
      case InjectionLocation::beginning:
        open_gap = 0;
        if (tag.has_close()) close_gap = t == 0 ? 0 : 1 + rng.bounded(t);
        break;
      case InjectionLocation::end:
        if (tag.has_close()) {
          close_gap = t;
          open_gap = t == 0 ? 0 : rng.bounded(t);
        } else {
          open_gap = t;
        }
        break;
      case InjectionLocation::random_gaps:
        open_gap = rng.bounded(t + 1);
        if (tag.has_close()) {
          close_gap = open_gap < t ? open_gap + 1 + rng.bounded(t - open_gap) : t;
        }
        break;
    }
    gaps[open_gap].push_back(tag.open);
    injected.push_back(tag.open);
    if (tag.has_close()) {
      gaps[close_gap].push_back(tag.close);
      injected.push_back(tag.close);
    }
  }
  return {detail::splice_gaps(text, spans, gaps), std::string(label), std::move(injected)};
}

inline InjectionResult html_injection(std::string_view text, std::string_view label,
                                      InjectionSpec& spec,
                                      const std::vector<HtmlTag>& tags) {
  RngStream rng(spec.seed);
  return html_injection(text, label, spec, rng, tags);
}

}  // namespace spurgate
