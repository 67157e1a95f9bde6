#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "spurgate/dataset_io.hpp"
#include "spurgate/tokenizer.hpp"

namespace spurgate {

// Per-token tally: how many samples contain the token (presence counting —
// a token counts once per sample regardless of multiplicity), how those
// samples split across labels, and the conditional label entropy in bits.
struct TokenStats {
  std::string token;
  std::uint64_t support = 0;
  std::map<std::string, std::uint64_t> class_counts;
  double entropy_bits = 0.0;
  bool flagged = false;
};

struct NormalizeFlags {
  bool lowercase = true;
  bool strip_punct = true;
};

struct EntropyReport {
  std::vector<TokenStats> stats;  // ascending by (entropy, token)
  std::uint64_t min_support = 0;
  std::size_t label_count = 0;
  std::vector<std::string> flagged;
};

namespace detail {

inline double entropy_bits_from_counts(const std::map<std::string, std::uint64_t>& counts,
                                       std::uint64_t support) {
  double h = 0.0;
  for (const auto& [label, count] : counts) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / static_cast<double>(support);
    h -= p * std::log2(p);
  }
  return h < 0.0 ? 0.0 : h;
}

}  // namespace detail

// Tallies H(y|t) for every normalized token with support >= min_support.
// A token that fully determines the label scores 0 bits; a token whose
// supporting samples split evenly over L labels scores log2(L).
inline EntropyReport conditional_entropy(const Dataset& ds,
                                         std::uint64_t min_support = 50,
                                         NormalizeFlags flags = {}) {
  if (ds.samples.empty()) throw std::runtime_error("dataset is empty");
  if (ds.label_set.size() < 2) {
    throw std::runtime_error("conditional entropy needs at least 2 labels; dataset has " +
                             std::to_string(ds.label_set.size()));
  }

  std::unordered_map<std::string, std::map<std::string, std::uint64_t>> counts;
  std::unordered_set<std::string> seen_in_sample;
  for (const Sample& sample : ds.samples) {
    seen_in_sample.clear();
    for (const TokenSpan& span : tokenize(sample.text)) {
      std::string token = normalize(span.text, flags.lowercase, flags.strip_punct);
      if (token.empty()) continue;
      if (seen_in_sample.insert(token).second) {
        ++counts[std::move(token)][sample.label];
      }
    }
  }

  EntropyReport report;
  report.min_support = min_support;
  report.label_count = ds.label_set.size();
  report.stats.reserve(counts.size());
  for (auto& [token, class_counts] : counts) {
    std::uint64_t support = 0;
    for (const auto& [label, count] : class_counts) support += count;
    if (support < min_support) continue;
    TokenStats stats;
    stats.token = token;
    stats.support = support;
    stats.entropy_bits = detail::entropy_bits_from_counts(class_counts, support);
    stats.class_counts = std::move(class_counts);
    report.stats.push_back(std::move(stats));
  }
  std::sort(report.stats.begin(), report.stats.end(),
            [](const TokenStats& a, const TokenStats& b) {
              if (a.entropy_bits != b.entropy_bits) return a.entropy_bits < b.entropy_bits;
              return a.token < b.token;
            });
  return report;
}

// Marks tokens whose entropy is suspiciously low. Default rule: at or below
// 25% of the maximum possible entropy log2(label_count); an absolute
// threshold overrides that. top_gap instead flags everything below the
// largest jump in the entropy-sorted sequence.
inline std::vector<std::string> flag_spurious(EntropyReport& report,
                                              std::optional<double> abs_threshold = {},
                                              bool top_gap = false) {
  if (report.stats.empty()) throw std::runtime_error("entropy report is empty");
  report.flagged.clear();
  for (TokenStats& stats : report.stats) stats.flagged = false;

  std::size_t flag_end = 0;
  if (top_gap) {
    double best_gap = 0.0;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i + 1 < report.stats.size(); ++i) {
      const double gap = report.stats[i + 1].entropy_bits - report.stats[i].entropy_bits;
      if (gap > best_gap) {
        best_gap = gap;
        best_index = i + 1;
      }
    }
    flag_end = best_gap > 0.0 ? best_index : 0;
  } else {
    const double threshold =
        abs_threshold.value_or(0.25 * std::log2(static_cast<double>(report.label_count)));
    while (flag_end < report.stats.size() &&
           report.stats[flag_end].entropy_bits <= threshold) {
      ++flag_end;
    }
  }

  for (std::size_t i = 0; i < flag_end; ++i) {
    report.stats[i].flagged = true;
    report.flagged.push_back(report.stats[i].token);
  }
  return report.flagged;
}

struct Histogram {
  std::vector<double> edges;          // bins + 1 edges over [0, log2(labels)]
  std::vector<std::uint64_t> counts;  // sums to |stats|
};

inline Histogram entropy_histogram(const EntropyReport& report, std::size_t bins) {
  if (bins < 1) throw std::invalid_argument("histogram needs at least 1 bin");
  const double max_entropy = std::log2(static_cast<double>(report.label_count));
  Histogram hist;
  hist.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    hist.edges[i] = max_entropy * static_cast<double>(i) / static_cast<double>(bins);
  }
  hist.counts.assign(bins, 0);
  for (const TokenStats& stats : report.stats) {
    auto bin = static_cast<std::size_t>(
        std::floor(stats.entropy_bits / max_entropy * static_cast<double>(bins)));
    if (bin >= bins) bin = bins - 1;  // H == max lands in the last bin
    ++hist.counts[bin];
  }
  return hist;
}

inline void write_entropy_report(const EntropyReport& report, std::ostream& out,
                                 const nlohmann::ordered_json& header_extra = {}) {
  nlohmann::ordered_json summary;
  summary["schema_version"] = 1;
  summary["tokens"] = report.stats.size();
  summary["label_count"] = report.label_count;
  summary["min_support"] = report.min_support;
  summary["max_entropy_bits"] = std::log2(static_cast<double>(report.label_count));
  summary["flagged"] = report.flagged;
  if (header_extra.is_object()) {
    for (const auto& [key, value] : header_extra.items()) summary[key] = value;
  }
  out << summary.dump() << '\n';
  for (const TokenStats& stats : report.stats) {
    nlohmann::ordered_json obj;
    obj["token"] = stats.token;
    obj["support"] = stats.support;
    obj["class_counts"] = stats.class_counts;
    obj["entropy_bits"] = stats.entropy_bits;
    obj["flagged"] = stats.flagged;
    out << obj.dump() << '\n';
  }
}

inline void write_histogram_csv(const Histogram& hist, std::ostream& out) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    out << nlohmann::json(hist.edges[i]).dump() << ','
        << nlohmann::json(hist.edges[i + 1]).dump() << ',' << hist.counts[i] << '\n';
  }
}

}  // namespace spurgate
