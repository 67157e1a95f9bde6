#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "spurgate/rng.hpp"
#include "spurgate/unicode.hpp"

namespace spurgate {

using GeneratorFn = std::function<std::string(RngStream&)>;

// A stream of injectable tokens. Three kinds:
//   dates  — uniformly random valid "YYYY-MM-DD" within a year range
//   list   — uniform draws from a fixed item list, with or without replacement
//   fn     — caller-supplied generator function
//
// An optional diversity cap K limits the source to K distinct tokens: the
// first K distinct draws define the space, and every later draw is resampled
// uniformly from that set. freeze_diversity_space() resolves the capped space
// up front so that copies of the source (one per sample) agree on it.
class TokenSource {
 public:
  TokenSource() : kind_(ListCfg{std::make_shared<std::vector<std::string>>(), true}) {}

  static TokenSource dates(int year_lo, int year_hi) {
    if (year_lo > year_hi) throw std::invalid_argument("date source: year_lo > year_hi");
    if (year_lo < 1 || year_hi > 9999) {
      throw std::invalid_argument("date source: years must be within 1..9999");
    }
    TokenSource src;
    src.kind_ = DateCfg{year_lo, year_hi};
    return src;
  }

  static TokenSource list(std::vector<std::string> items, bool with_replacement) {
    if (items.empty()) throw std::invalid_argument("list source: no items");
    for (const std::string& item : items) {
      if (item.empty()) throw std::invalid_argument("list source: empty item");
    }
    TokenSource src;
    src.kind_ = ListCfg{std::make_shared<std::vector<std::string>>(std::move(items)),
                        with_replacement};
    return src;
  }

  static TokenSource from_function(GeneratorFn fn) {
    if (!fn) throw std::invalid_argument("fn source: null generator");
    TokenSource src;
    src.kind_ = std::move(fn);
    return src;
  }

  TokenSource& set_diversity_cap(std::size_t cap) {
    if (cap == 0) throw std::invalid_argument("diversity cap must be positive");
    diversity_cap_ = cap;
    return *this;
  }

  std::optional<std::size_t> diversity_cap() const { return diversity_cap_; }

  // Configuration copy with clean draw state. A frozen diversity space is
  // shared by the copy.
  TokenSource fresh() const {
    TokenSource src;
    src.kind_ = kind_;
    src.diversity_cap_ = diversity_cap_;
    src.frozen_space_ = frozen_space_;
    return src;
  }

  std::string next_token(RngStream& rng) {
    if (frozen_space_) {
      return (*frozen_space_)[rng.bounded(frozen_space_->size())];
    }
    if (diversity_cap_ && emitted_distinct_.size() >= *diversity_cap_) {
      return emitted_distinct_[rng.bounded(emitted_distinct_.size())];
    }
    std::string token = draw_underlying(rng);
    if (diversity_cap_ && !emitted_lookup_.count(token)) {
      emitted_distinct_.push_back(token);
      emitted_lookup_.insert(token);
    }
    return token;
  }

  // Pre-draws the capped token space (up to cap distinct tokens, fewer when
  // the underlying domain is smaller). Requires a diversity cap.
  void freeze_diversity_space(RngStream& rng) {
    if (!diversity_cap_) {
      throw std::logic_error("freeze_diversity_space requires a diversity cap");
    }
    if (frozen_space_) return;
    std::vector<std::string> space;
    std::unordered_set<std::string> seen;
    const std::size_t target = space_target();
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * target + 1000;  // fn sources only
    while (space.size() < target) {
      if (!domain_size_known() && ++attempts > max_attempts) break;
      std::string token = draw_underlying(rng);
      if (seen.insert(token).second) space.push_back(std::move(token));
    }
    frozen_space_ = std::make_shared<const std::vector<std::string>>(std::move(space));
  }

  bool has_frozen_space() const { return frozen_space_ != nullptr; }

 private:
  struct DateCfg {
    int year_lo;
    int year_hi;
  };
  struct ListCfg {
    std::shared_ptr<const std::vector<std::string>> items;
    bool with_replacement;
  };

  static bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

  static int days_in_month(int month, int year) {
    static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap(year)) return 29;
    return kDays[month - 1];
  }

  std::string draw_underlying(RngStream& rng) {
    if (const auto* date = std::get_if<DateCfg>(&kind_)) {
      const int year = date->year_lo +
                       static_cast<int>(rng.bounded(
                           static_cast<std::uint64_t>(date->year_hi - date->year_lo + 1)));
      const int month = 1 + static_cast<int>(rng.bounded(12));
      const int day = 1 + static_cast<int>(rng.bounded(
                              static_cast<std::uint64_t>(days_in_month(month, year))));
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
      return std::string(buf);
    }
    if (const auto* list = std::get_if<ListCfg>(&kind_)) {
      const std::vector<std::string>& items = *list->items;
      if (items.empty()) throw std::runtime_error("token source: empty list");
      if (list->with_replacement) {
        return items[rng.bounded(items.size())];
      }
      if (!pool_init_) {
        pool_.resize(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) pool_[i] = i;
        pool_init_ = true;
      }
      if (pool_.empty()) {
        throw std::runtime_error(
            "token source exhausted: enlarge the list or enable replacement");
      }
      const std::size_t j = rng.bounded(pool_.size());
      const std::size_t idx = pool_[j];
      pool_[j] = pool_.back();
      pool_.pop_back();
      return items[idx];
    }
    return std::get<GeneratorFn>(kind_)(rng);
  }

  bool domain_size_known() const { return !std::holds_alternative<GeneratorFn>(kind_); }

  // min(cap, number of distinct tokens the source can produce)
  std::size_t space_target() const {
    std::size_t domain = *diversity_cap_;
    if (const auto* date = std::get_if<DateCfg>(&kind_)) {
      std::size_t days = 0;
      for (int y = date->year_lo; y <= date->year_hi; ++y) days += is_leap(y) ? 366 : 365;
      domain = days;
    } else if (const auto* list = std::get_if<ListCfg>(&kind_)) {
      domain = std::unordered_set<std::string>(list->items->begin(), list->items->end())
                   .size();
    }
    return std::min(*diversity_cap_, domain);
  }

  std::variant<DateCfg, ListCfg, GeneratorFn> kind_;
  std::optional<std::size_t> diversity_cap_;
  std::shared_ptr<const std::vector<std::string>> frozen_space_;
  std::vector<std::string> emitted_distinct_;
  std::unordered_set<std::string> emitted_lookup_;
  std::vector<std::size_t> pool_;
  bool pool_init_ = false;
};

// Loads a newline-delimited token list. Blank lines are skipped; duplicate
// lines are kept as distinct draws.
inline TokenSource load_list_source(const std::filesystem::path& path,
                                    bool with_replacement) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::vector<std::string> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!unicode::valid(line)) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) +
                               ": invalid UTF-8");
    }
    bool blank = true;
    std::size_t i = 0;
    while (i < line.size()) {
      if (!unicode::is_whitespace(unicode::decode(line, i))) {
        blank = false;
        break;
      }
    }
    if (!blank) items.push_back(line);
  }
  if (items.empty()) {
    throw std::runtime_error(path.string() + ": no tokens (file empty or all blank)");
  }
  return TokenSource::list(std::move(items), with_replacement);
}

}  // namespace spurgate
