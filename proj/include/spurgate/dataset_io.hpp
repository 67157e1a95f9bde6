#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spurgate/unicode.hpp"

namespace spurgate {

// One labeled text record. `id` is the 0-based position in the source file.
struct Sample {
  std::uint64_t id = 0;
  std::string text;
  std::string label;

  bool operator==(const Sample&) const = default;
};

// Samples in file order plus the sorted set of distinct labels.
struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> label_set;

  bool operator==(const Dataset&) const = default;

  bool has_label(std::string_view label) const {
    return std::binary_search(label_set.begin(), label_set.end(), label);
  }
};

enum class DatasetFormat { jsonl, csv };

inline Dataset make_dataset(std::vector<std::pair<std::string, std::string>> rows) {
  Dataset ds;
  std::set<std::string> labels;
  ds.samples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    labels.insert(rows[i].second);
    ds.samples.push_back(
        {static_cast<std::uint64_t>(i), std::move(rows[i].first), std::move(rows[i].second)});
  }
  ds.label_set.assign(labels.begin(), labels.end());
  return ds;
}

namespace detail {

[[noreturn]] inline void fail_at(const std::filesystem::path& path, std::size_t line,
                                 const std::string& what) {
  throw std::runtime_error(path.string() + ": line " + std::to_string(line) + ": " + what);
}

inline std::string require_string_field(const nlohmann::json& obj, const char* key,
                                        const std::filesystem::path& path,
                                        std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail_at(path, line, std::string("missing \"") + key + "\" field");
  if (!it->is_string()) fail_at(path, line, std::string("field \"") + key + "\" must be a string");
  return it->get<std::string>();
}

inline Dataset read_jsonl(const std::filesystem::path& path, std::istream& in) {
  std::vector<std::pair<std::string, std::string>> rows;
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
      fail_at(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) fail_at(path, lineno, "expected a JSON object");
    std::string text = require_string_field(obj, "text", path, lineno);
    std::string label = require_string_field(obj, "label", path, lineno);
    if (label.empty()) fail_at(path, lineno, "empty \"label\"");
    rows.emplace_back(std::move(text), std::move(label));
  }
  return make_dataset(std::move(rows));
}

// RFC 4180 record reader. Accepts LF and CRLF separators, quoted fields with
// doubled quotes, and newlines inside quoted fields. Returns false at EOF.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t& lineno, const std::filesystem::path& path) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  ++lineno;
  const std::size_t start_line = lineno;
  std::string field;
  bool quoted = false;
  for (;;) {
    if (c == EOF) {
      if (quoted) fail_at(path, start_line, "unterminated quoted field");
      fields.push_back(std::move(field));
      return true;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        const int peek = in.peek();
        if (peek == '"') {
          in.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++lineno;
        field.push_back(ch);
      }
    } else if (ch == '"' && field.empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else if (ch == '\r' && in.peek() == '\n') {
      in.get();
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
    }
    c = in.get();
  }
}

inline Dataset read_csv(const std::filesystem::path& path, std::istream& in) {
  std::vector<std::string> fields;
  std::size_t lineno = 0;
  if (!read_csv_record(in, fields, lineno, path)) return make_dataset({});

  std::ptrdiff_t text_col = -1;
  std::ptrdiff_t label_col = -1;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i] == "text") {
      if (text_col >= 0) fail_at(path, 1, "duplicate \"text\" column");
      text_col = static_cast<std::ptrdiff_t>(i);
    } else if (fields[i] == "label") {
      if (label_col >= 0) fail_at(path, 1, "duplicate \"label\" column");
      label_col = static_cast<std::ptrdiff_t>(i);
    }
  }
  if (text_col < 0) fail_at(path, 1, "header is missing a \"text\" column");
  if (label_col < 0) fail_at(path, 1, "header is missing a \"label\" column");

  std::vector<std::pair<std::string, std::string>> rows;
  while (true) {
    const std::size_t record_line = lineno + 1;
    if (!read_csv_record(in, fields, lineno, path)) break;
    const std::size_t needed =
        static_cast<std::size_t>(std::max(text_col, label_col)) + 1;
    if (fields.size() < needed) fail_at(path, record_line, "row has too few columns");
    std::string& text = fields[static_cast<std::size_t>(text_col)];
    std::string& label = fields[static_cast<std::size_t>(label_col)];
    if (!unicode::valid(text) || !unicode::valid(label)) {
      fail_at(path, record_line, "invalid UTF-8");
    }
    if (label.empty()) fail_at(path, record_line, "empty \"label\"");
    rows.emplace_back(std::move(text), std::move(label));
  }
  return make_dataset(std::move(rows));
}

inline void write_csv_field(std::ostream& out, const std::string& value) {
  const bool needs_quote =
      value.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quote) {
    out << value;
    return;
  }
  out << '"';
  for (const char ch : value) {
    if (ch == '"') out << "\"\"";
    else out << ch;
  }
  out << '"';
}

}  // namespace detail

inline DatasetFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::csv : DatasetFormat::jsonl;
}

inline Dataset read_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  return format == DatasetFormat::jsonl ? detail::read_jsonl(path, in)
                                        : detail::read_csv(path, in);
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  return read_dataset(path, format_from_path(path));
}

// Serialization is a pure function of the Dataset value: fixed "text","label"
// key order, "\n" line endings, RFC 4180 quoting for CSV. Writing the same
// Dataset twice yields byte-identical files.
inline void write_dataset(const Dataset& ds, std::ostream& out, DatasetFormat format) {
  if (format == DatasetFormat::jsonl) {
    for (const Sample& s : ds.samples) {
      nlohmann::ordered_json obj;
      obj["text"] = s.text;
      obj["label"] = s.label;
      out << obj.dump() << '\n';
    }
  } else {
    if (ds.samples.empty()) return;  // empty dataset -> empty file, both formats
    out << "text,label\n";
    for (const Sample& s : ds.samples) {
      detail::write_csv_field(out, s.text);
      out << ',';
      detail::write_csv_field(out, s.label);
      out << '\n';
    }
  }
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& path,
                          DatasetFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  write_dataset(ds, out, format);
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_dataset(ds, path, format_from_path(path));
}

}  // namespace spurgate
