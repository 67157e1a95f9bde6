#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spurgate/dataset_io.hpp"

namespace spurgate {

// One exported attention row: non-negative token-level scores for a sample,
// tagged with a comparison group (a class label, or "spurious"/"clean").
struct AttentionRecord {
  std::string sample_id;
  std::string group;
  std::vector<double> scores;
  std::vector<std::string> tokens;  // optional, same length as scores when present
};

// Shannon entropy of the normalized score vector, in bits. Scale-invariant:
// scores are divided by their sum, so only the shape of the distribution
// matters.
inline double attention_entropy(std::span<const double> scores) {
  if (scores.empty()) throw std::runtime_error("attention scores are empty");
  double total = 0.0;
  for (const double s : scores) {
    if (std::isnan(s)) throw std::runtime_error("attention score is NaN");
    if (s < 0.0) throw std::runtime_error("attention score is negative");
    total += s;
  }
  if (total <= 0.0) throw std::runtime_error("attention scores are all zero");
  double h = 0.0;
  for (const double s : scores) {
    if (s <= 0.0) continue;
    const double p = s / total;
    h -= p * std::log2(p);
  }
  return h < 0.0 ? 0.0 : h;
}

inline double attention_entropy(const AttentionRecord& record) {
  return attention_entropy(std::span<const double>(record.scores));
}

struct GroupEntropy {
  std::size_t n_records = 0;
  double mean_entropy_bits = 0.0;
  double stdev = 0.0;  // population
};

// Grouped comparison of attention entropies. `ratio` is the minimum over
// group pairs of (smaller mean / larger mean); a ratio below the threshold
// flags the record set. `pairwise_below_fraction` reports how consistent the
// separation is: the fraction of cross-group record pairs in which one
// record's entropy is below threshold times the other's.
struct AuditReport {
  std::map<std::string, GroupEntropy> per_group;
  double ratio = 1.0;
  bool flagged = false;
  double threshold = 0.95;
  double pairwise_below_fraction = 0.0;
};

inline AuditReport audit(const std::vector<AttentionRecord>& records,
                         double threshold = 0.95) {
  std::map<std::string, std::vector<double>> entropies;
  for (const AttentionRecord& record : records) {
    entropies[record.group].push_back(attention_entropy(record));
  }
  if (entropies.size() < 2) {
    throw std::runtime_error("attention audit needs records from at least 2 groups; got " +
                             std::to_string(entropies.size()));
  }

  AuditReport report;
  report.threshold = threshold;
  for (const auto& [group, values] : entropies) {
    GroupEntropy stats;
    stats.n_records = values.size();
    double sum = 0.0;
    for (const double h : values) sum += h;
    stats.mean_entropy_bits = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (const double h : values) {
      const double d = h - stats.mean_entropy_bits;
      sq += d * d;
    }
    stats.stdev = std::sqrt(sq / static_cast<double>(values.size()));
    report.per_group[group] = stats;
  }

  report.ratio = 1.0;
  std::uint64_t below_pairs = 0;
  std::uint64_t total_pairs = 0;
  for (auto a = entropies.begin(); a != entropies.end(); ++a) {
    for (auto b = std::next(a); b != entropies.end(); ++b) {
      const double mean_a = report.per_group[a->first].mean_entropy_bits;
      const double mean_b = report.per_group[b->first].mean_entropy_bits;
      const double lo = std::min(mean_a, mean_b);
      const double hi = std::max(mean_a, mean_b);
      const double pair_ratio = hi > 0.0 ? lo / hi : 1.0;
      report.ratio = std::min(report.ratio, pair_ratio);
      for (const double ha : a->second) {
        for (const double hb : b->second) {
          ++total_pairs;
          if (std::min(ha, hb) < threshold * std::max(ha, hb)) ++below_pairs;
        }
      }
    }
  }
  report.pairwise_below_fraction =
      total_pairs ? static_cast<double>(below_pairs) / static_cast<double>(total_pairs) : 0.0;
  report.flagged = report.ratio < threshold;
  return report;
}

// Input: JSONL, one record per line:
//   {"sample_id": str, "group": str, "scores": [num], "tokens": [str]?}
inline std::vector<AttentionRecord> read_attention_records(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::vector<AttentionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      detail::fail_at(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) detail::fail_at(path, lineno, "expected a JSON object");
    AttentionRecord record;
    try {
      record.sample_id = obj.at("sample_id").get<std::string>();
      record.group = obj.at("group").get<std::string>();
      record.scores = obj.at("scores").get<std::vector<double>>();
      if (obj.contains("tokens")) {
        record.tokens = obj.at("tokens").get<std::vector<std::string>>();
      }
    } catch (const nlohmann::json::exception& e) {
      detail::fail_at(path, lineno, std::string("bad record: ") + e.what());
    }
    if (record.scores.empty()) detail::fail_at(path, lineno, "empty \"scores\"");
    if (!record.tokens.empty() && record.tokens.size() != record.scores.size()) {
      detail::fail_at(path, lineno, "\"tokens\" and \"scores\" lengths differ");
    }
    records.push_back(std::move(record));
  }
  return records;
}

inline nlohmann::ordered_json audit_report_json(const AuditReport& report) {
  nlohmann::ordered_json out;
  out["schema_version"] = 1;
  out["threshold"] = report.threshold;
  out["ratio"] = report.ratio;
  out["flagged"] = report.flagged;
  out["pairwise_below_fraction"] = report.pairwise_below_fraction;
  nlohmann::ordered_json groups;
  for (const auto& [name, stats] : report.per_group) {
    nlohmann::ordered_json g;
    g["n_records"] = stats.n_records;
    g["mean_entropy_bits"] = stats.mean_entropy_bits;
    g["stdev"] = stats.stdev;
    groups[name] = g;
  }
  out["per_group"] = groups;
  return out;
}

}  // namespace spurgate
