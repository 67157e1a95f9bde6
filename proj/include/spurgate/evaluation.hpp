#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "spurgate/dataset_io.hpp"

namespace spurgate {

struct Prediction {
  std::uint64_t id = 0;
  std::string predicted;
};

// Discrete predictions keyed by sample id; must cover every dataset id
// exactly once to be scoreable.
struct Predictions {
  std::vector<Prediction> rows;
};

struct ScoreReport {
  double balanced_accuracy = 0.0;              // mean of per-class recall
  std::map<std::string, double> per_class_recall;
  std::vector<std::string> labels;             // row/column basis, sorted
  std::vector<std::vector<std::uint64_t>> confusion;  // [reference][predicted]
  std::map<std::string, std::uint64_t> class_counts;  // predicted label tallies
};

// Prediction files: JSONL {"id": int, "predicted": str} or CSV id,predicted.
inline Predictions read_predictions(const std::filesystem::path& path,
                                    DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  Predictions preds;
  if (format == DatasetFormat::jsonl) {
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
      if (!obj.is_object() || !obj.contains("id") || !obj.contains("predicted")) {
        detail::fail_at(path, lineno, "expected {\"id\": int, \"predicted\": str}");
      }
      if (!obj["id"].is_number_unsigned() && !obj["id"].is_number_integer()) {
        detail::fail_at(path, lineno, "\"id\" must be an integer");
      }
      if (obj["id"].is_number_integer() && obj["id"].get<std::int64_t>() < 0) {
        detail::fail_at(path, lineno, "\"id\" must be non-negative");
      }
      if (!obj["predicted"].is_string()) {
        detail::fail_at(path, lineno, "\"predicted\" must be a string");
      }
      preds.rows.push_back(
          {obj["id"].get<std::uint64_t>(), obj["predicted"].get<std::string>()});
    }
  } else {
    std::vector<std::string> fields;
    std::size_t lineno = 0;
    if (!detail::read_csv_record(in, fields, lineno, path)) return preds;
    std::ptrdiff_t id_col = -1;
    std::ptrdiff_t pred_col = -1;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i] == "id") id_col = static_cast<std::ptrdiff_t>(i);
      else if (fields[i] == "predicted") pred_col = static_cast<std::ptrdiff_t>(i);
    }
    if (id_col < 0 || pred_col < 0) {
      detail::fail_at(path, 1, "header must contain \"id\" and \"predicted\" columns");
    }
    while (true) {
      const std::size_t record_line = lineno + 1;
      if (!detail::read_csv_record(in, fields, lineno, path)) break;
      const std::size_t needed =
          static_cast<std::size_t>(std::max(id_col, pred_col)) + 1;
      if (fields.size() < needed) detail::fail_at(path, record_line, "row has too few columns");
      std::uint64_t id = 0;
      try {
        std::size_t pos = 0;
        const std::string& raw = fields[static_cast<std::size_t>(id_col)];
        id = std::stoull(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
      } catch (const std::exception&) {
        detail::fail_at(path, record_line, "\"id\" must be a non-negative integer");
      }
      preds.rows.push_back({id, fields[static_cast<std::size_t>(pred_col)]});
    }
  }
  return preds;
}

inline Predictions read_predictions(const std::filesystem::path& path) {
  return read_predictions(path, format_from_path(path));
}

// Balanced accuracy plus the per-class breakdown. Predictions must cover the
// dataset ids exactly; predicted labels must come from the dataset's label
// set.
inline ScoreReport balanced_accuracy(const Predictions& preds, const Dataset& ds) {
  if (ds.samples.empty()) throw std::runtime_error("reference dataset is empty");
  std::unordered_map<std::uint64_t, const std::string*> reference;
  reference.reserve(ds.samples.size());
  for (const Sample& sample : ds.samples) reference[sample.id] = &sample.label;

  std::unordered_map<std::string, std::size_t> label_index;
  for (std::size_t i = 0; i < ds.label_set.size(); ++i) label_index[ds.label_set[i]] = i;

  ScoreReport report;
  report.labels = ds.label_set;
  report.confusion.assign(ds.label_set.size(),
                          std::vector<std::uint64_t>(ds.label_set.size(), 0));

  std::unordered_map<std::uint64_t, std::size_t> seen;  // id -> row number
  for (std::size_t row = 0; row < preds.rows.size(); ++row) {
    const Prediction& pred = preds.rows[row];
    const auto ref = reference.find(pred.id);
    if (ref == reference.end()) {
      throw std::runtime_error("prediction row " + std::to_string(row + 1) + ": id " +
                               std::to_string(pred.id) + " is not in the dataset");
    }
    if (!seen.emplace(pred.id, row).second) {
      throw std::runtime_error("prediction row " + std::to_string(row + 1) +
                               ": duplicate id " + std::to_string(pred.id));
    }
    const auto pred_it = label_index.find(pred.predicted);
    if (pred_it == label_index.end()) {
      throw std::runtime_error("prediction row " + std::to_string(row + 1) +
                               ": unknown label \"" + pred.predicted + "\"");
    }
    ++report.confusion[label_index[*ref->second]][pred_it->second];
    ++report.class_counts[pred.predicted];
  }
  if (preds.rows.size() != ds.samples.size()) {
    for (const Sample& sample : ds.samples) {
      if (!seen.count(sample.id)) {
        throw std::runtime_error("prediction file is missing id " +
                                 std::to_string(sample.id));
      }
    }
  }

  double recall_sum = 0.0;
  for (std::size_t i = 0; i < ds.label_set.size(); ++i) {
    std::uint64_t total = 0;
    for (const std::uint64_t count : report.confusion[i]) total += count;
    const double recall =
        total ? static_cast<double>(report.confusion[i][i]) / static_cast<double>(total)
              : 0.0;
    report.per_class_recall[ds.label_set[i]] = recall;
    recall_sum += recall;
  }
  report.balanced_accuracy = recall_sum / static_cast<double>(ds.label_set.size());
  for (const std::string& label : ds.label_set) report.class_counts.try_emplace(label, 0);
  return report;
}

// Signed difference in percentage points: positive when the spurious set
// scores higher than the clean one.
inline double degradation(const ScoreReport& clean, const ScoreReport& spurious) {
  if (clean.labels != spurious.labels) {
    throw std::runtime_error("score reports cover different label sets");
  }
  return (spurious.balanced_accuracy - clean.balanced_accuracy) * 100.0;
}

inline nlohmann::ordered_json score_report_json(const ScoreReport& report) {
  nlohmann::ordered_json out;
  out["balanced_accuracy"] = report.balanced_accuracy;
  out["per_class_recall"] = report.per_class_recall;
  out["labels"] = report.labels;
  out["confusion"] = report.confusion;
  out["class_counts"] = report.class_counts;
  return out;
}

}  // namespace spurgate
