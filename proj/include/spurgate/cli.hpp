#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spurgate/attention.hpp"
#include "spurgate/dataset_io.hpp"
#include "spurgate/entropy.hpp"
#include "spurgate/evaluation.hpp"
#include "spurgate/generators.hpp"
#include "spurgate/modifiers.hpp"
#include "spurgate/transform.hpp"

namespace spurgate::cli {

// ---------------------------------------------------------------------------
// Flag grammars
// ---------------------------------------------------------------------------

// Amount grammar: "3" -> absolute count, "0.10" or "10%" -> fraction of the
// sample's own token count.
inline InjectionAmount parse_amount(const std::string& raw) {
  std::string s = raw;
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  while (!s.empty() && s.back() == ' ') s.pop_back();
  if (s.empty()) throw std::runtime_error("empty amount");
  try {
    if (s.back() == '%') {
      return InjectionAmount::fraction(std::stod(s.substr(0, s.size() - 1)) / 100.0);
    }
    if (s.find_first_of(".eE") != std::string::npos) {
      return InjectionAmount::fraction(std::stod(s));
    }
    std::size_t pos = 0;
    const std::uint64_t n = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return InjectionAmount::count(n);
  } catch (const std::invalid_argument&) {
    throw std::runtime_error("bad amount \"" + raw +
                             "\" (use an integer count, a fraction like 0.1, or \"10%\")");
  } catch (const std::out_of_range&) {
    throw std::runtime_error("amount \"" + raw + "\" is out of range");
  }
}

struct SourceSpec {
  ModifierKind kind = ModifierKind::item;
  TokenSource source;          // item kind
  std::vector<HtmlTag> tags;   // html kind
  std::string text;            // the grammar string, echoed in reports
};

// Source grammar:
//   date:<ylo>-<yhi>[:cap=K]
//   list:<path>[:no-replace][:cap=K]
//   html:<path>
inline SourceSpec parse_source_spec(const std::string& raw) {
  const auto bad = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error("bad source \"" + raw + "\": " + why);
  };
  const std::size_t colon = raw.find(':');
  if (colon == std::string::npos) {
    throw bad("expected date:<ylo>-<yhi>, list:<path>, or html:<path>");
  }
  const std::string head = raw.substr(0, colon);
  std::string rest = raw.substr(colon + 1);

  SourceSpec spec;
  spec.text = raw;
  if (head == "html") {
    if (rest.empty()) throw bad("missing tag file path");
    spec.kind = ModifierKind::html;
    spec.tags = load_html_tags(rest);
    return spec;
  }

  // peel options off the right so paths may contain ':'
  bool no_replace = false;
  std::optional<std::size_t> cap;
  for (;;) {
    const std::size_t sep = rest.rfind(':');
    if (sep == std::string::npos) break;
    const std::string tail = rest.substr(sep + 1);
    if (tail == "no-replace") {
      no_replace = true;
    } else if (tail.rfind("cap=", 0) == 0) {
      try {
        std::size_t pos = 0;
        cap = std::stoull(tail.substr(4), &pos);
        if (pos != tail.size() - 4 || *cap == 0) throw std::invalid_argument(tail);
      } catch (const std::exception&) {
        throw bad("cap must be a positive integer");
      }
    } else {
      break;
    }
    rest = rest.substr(0, sep);
  }

  if (head == "date") {
    const std::size_t dash = rest.find('-');
    if (dash == std::string::npos) throw bad("expected date:<ylo>-<yhi>");
    try {
      const int ylo = std::stoi(rest.substr(0, dash));
      const int yhi = std::stoi(rest.substr(dash + 1));
      spec.source = TokenSource::dates(ylo, yhi);
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      throw bad(e.what());
    }
  } else if (head == "list") {
    if (rest.empty()) throw bad("missing list file path");
    spec.source = load_list_source(rest, !no_replace);
  } else {
    throw bad("unknown source kind \"" + head + "\"");
  }
  if (no_replace && head != "list") throw bad("no-replace applies to list sources only");
  if (cap) spec.source.set_diversity_cap(*cap);
  return spec;
}

// ---------------------------------------------------------------------------
// Plan files (JSON object or key=value lines); flags override file values
// ---------------------------------------------------------------------------

struct PlanValues {
  std::optional<std::string> label;
  std::optional<double> proportion;
  std::optional<std::string> location;
  std::optional<std::string> amount;
  std::optional<std::string> source;
  std::optional<std::uint64_t> seed;
};

namespace detail {

inline std::string source_object_to_text(const nlohmann::json& obj) {
  const std::string kind = obj.at("kind").get<std::string>();
  std::ostringstream out;
  if (kind == "date") {
    out << "date:" << obj.at("year_lo").get<int>() << '-' << obj.at("year_hi").get<int>();
  } else if (kind == "list") {
    out << "list:" << obj.at("path").get<std::string>();
    if (!obj.value("replace", true)) out << ":no-replace";
  } else if (kind == "html") {
    out << "html:" << obj.at("path").get<std::string>();
    return out.str();
  } else {
    throw std::runtime_error("plan: unknown source kind \"" + kind + "\"");
  }
  if (obj.contains("cap")) out << ":cap=" << obj.at("cap").get<std::uint64_t>();
  return out.str();
}

inline PlanValues parse_plan_json(const nlohmann::json& plan) {
  PlanValues values;
  if (!plan.is_object()) throw std::runtime_error("plan: expected a JSON object");
  if (plan.contains("label_to_modify")) {
    values.label = plan["label_to_modify"].is_string()
                       ? plan["label_to_modify"].get<std::string>()
                       : plan["label_to_modify"].dump();
  }
  if (plan.contains("text_proportion")) {
    values.proportion = plan["text_proportion"].get<double>();
  }
  if (plan.contains("seed")) values.seed = plan["seed"].get<std::uint64_t>();
  if (plan.contains("modifier")) {
    const nlohmann::json& mod = plan["modifier"];
    if (mod.contains("location")) values.location = mod["location"].get<std::string>();
    if (mod.contains("amount")) {
      const nlohmann::json& amount = mod["amount"];
      values.amount = amount.is_string() ? amount.get<std::string>() : amount.dump();
    }
  }
  if (plan.contains("source")) {
    const nlohmann::json& source = plan["source"];
    values.source = source.is_string() ? source.get<std::string>()
                                       : source_object_to_text(source);
  }
  return values;
}

inline PlanValues parse_plan_keyvalue(std::istream& in, const std::filesystem::path& path) {
  PlanValues values;
  nlohmann::json source_obj = nlohmann::json::object();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) +
                               ": expected key=value");
    }
    std::string key = line.substr(first, eq - first);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string value = line.substr(eq + 1);
    const std::size_t vstart = value.find_first_not_of(" \t");
    value = vstart == std::string::npos ? "" : value.substr(vstart);
    while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();

    try {
      if (key == "label_to_modify") values.label = value;
      else if (key == "text_proportion") values.proportion = std::stod(value);
      else if (key == "seed") values.seed = std::stoull(value);
      else if (key == "modifier.location") values.location = value;
      else if (key == "modifier.amount") values.amount = value;
      else if (key == "modifier.kind") {}  // implied by the source kind
      else if (key == "source") values.source = value;
      else if (key == "source.kind") source_obj["kind"] = value;
      else if (key == "source.path") source_obj["path"] = value;
      else if (key == "source.year_lo") source_obj["year_lo"] = std::stoi(value);
      else if (key == "source.year_hi") source_obj["year_hi"] = std::stoi(value);
      else if (key == "source.cap") source_obj["cap"] = std::stoull(value);
      else if (key == "source.replace") source_obj["replace"] = value == "true";
      else {
        throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) +
                                 ": unknown key \"" + key + "\"");
      }
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) +
                               ": bad value for \"" + key + "\"");
    }
  }
  if (!values.source && source_obj.contains("kind")) {
    values.source = source_object_to_text(source_obj);
  }
  return values;
}

}  // namespace detail

inline PlanValues load_plan_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  // JSON object or key=value lines, detected by the first character
  char first = 0;
  while (in.get(first) && (first == ' ' || first == '\t' || first == '\n' || first == '\r')) {
  }
  in.seekg(0);
  if (first == '{') {
    nlohmann::json plan;
    try {
      plan = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ": invalid JSON: " + e.what());
    }
    return detail::parse_plan_json(plan);
  }
  return detail::parse_plan_keyvalue(in, path);
}

// ---------------------------------------------------------------------------
// Shared option plumbing
// ---------------------------------------------------------------------------

namespace detail {

inline DatasetFormat resolve_format(const std::string& flag,
                                    const std::filesystem::path& path) {
  if (flag == "jsonl") return DatasetFormat::jsonl;
  if (flag == "csv") return DatasetFormat::csv;
  return format_from_path(path);
}

inline const char* format_name(DatasetFormat format) {
  return format == DatasetFormat::jsonl ? "jsonl" : "csv";
}

inline std::filesystem::path with_suffix(const std::filesystem::path& path,
                                         const std::string& suffix) {
  std::filesystem::path out = path;
  out.replace_extension();
  out += suffix;
  return out;
}

inline int default_workers() {
  const char* env = std::getenv("SPURGATE_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t pos = 0;
    const int workers = std::stoi(env, &pos);
    if (pos != std::string(env).size() || workers < 1) throw std::invalid_argument(env);
    return workers;
  } catch (const std::exception&) {
    throw std::runtime_error("SPURGATE_WORKERS must be a positive integer, got \"" +
                             std::string(env) + "\"");
  }
}

inline InjectionLocation parse_location(const std::string& name) {
  if (name == "beginning") return InjectionLocation::beginning;
  if (name == "end") return InjectionLocation::end;
  if (name == "random") return InjectionLocation::random_gaps;
  throw std::runtime_error("bad location \"" + name +
                           "\" (expected beginning, end, or random)");
}

inline void write_json_file(const nlohmann::ordered_json& value,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << value.dump(2) << '\n';
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// Options shared by inject and eval-split; resolved against a plan file
// (flags win) and validated.
struct CorruptionArgs {
  std::string plan_path;
  std::string label;
  double proportion = 1.0;
  std::string amount = "1";
  std::string location = "beginning";
  std::string source;
  std::uint64_t seed = 0;
  int workers = 0;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--plan", plan_path, "plan file (JSON object or key=value lines)");
    cmd->add_option("--label", label, "target label to corrupt");
    cmd->add_option("--proportion", proportion,
                    "fraction of target-label samples to modify, in [0,1]")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--amount", amount,
                    "tokens per modified sample: count (\"1\") or fraction (\"0.1\", \"10%\")");
    cmd->add_option("--location", location, "injection location")
        ->check(CLI::IsMember({"beginning", "end", "random"}));
    cmd->add_option("--source", source,
                    "token source: date:<ylo>-<yhi>[:cap=K] | list:<path>[:no-replace][:cap=K] "
                    "| html:<path>");
    cmd->add_option("--seed", seed, "64-bit seed (required; no silent entropy)");
    cmd->add_option("--workers", workers,
                    "parallel sample workers (default $SPURGATE_WORKERS or 1); "
                    "output bytes do not depend on this")
        ->check(CLI::PositiveNumber);
  }

  // Plan file values fill in whatever the command line left unset.
  TransformPlan resolve(const CLI::App* cmd, SourceSpec& source_spec) {
    PlanValues plan_values;
    if (!plan_path.empty()) plan_values = load_plan_file(plan_path);
    if (cmd->count("--label") == 0 && plan_values.label) label = *plan_values.label;
    if (cmd->count("--proportion") == 0 && plan_values.proportion) {
      proportion = *plan_values.proportion;
    }
    if (cmd->count("--amount") == 0 && plan_values.amount) amount = *plan_values.amount;
    if (cmd->count("--location") == 0 && plan_values.location) location = *plan_values.location;
    if (cmd->count("--source") == 0 && plan_values.source) source = *plan_values.source;
    const bool seed_set = cmd->count("--seed") > 0 || plan_values.seed.has_value();
    if (cmd->count("--seed") == 0 && plan_values.seed) seed = *plan_values.seed;
    if (workers == 0) workers = default_workers();

    if (label.empty()) throw CLI::ValidationError("--label", "a target label is required");
    if (source.empty()) throw CLI::ValidationError("--source", "a token source is required");
    if (!seed_set) {
      throw CLI::ValidationError("--seed", "a seed is required (flag or plan file)");
    }
    if (proportion < 0.0 || proportion > 1.0) {
      throw CLI::ValidationError("--proportion", "must be within [0,1]");
    }

    source_spec = parse_source_spec(source);
    TransformPlan plan;
    plan.label_to_modify = label;
    plan.text_proportion = proportion;
    plan.kind = source_spec.kind;
    plan.modifier.source = source_spec.source;
    plan.modifier.location = parse_location(location);
    plan.modifier.amount = parse_amount(amount);
    plan.modifier.seed = seed;
    plan.tags = source_spec.tags;
    plan.seed = seed;
    return plan;
  }

  nlohmann::ordered_json config_json() const {
    nlohmann::ordered_json config;
    config["label"] = label;
    config["proportion"] = proportion;
    config["amount"] = amount;
    config["location"] = location;
    config["source"] = source;
    config["seed"] = seed;
    config["workers"] = workers;
    return config;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Entry point. Exit codes: 0 success, 1 data error, 2 usage error.
// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args) {
  CLI::App app{"Deterministic spurious-token injection and dataset auditing toolkit"};
  app.set_version_flag("--version", "spurgate 0.1.0");
  app.require_subcommand(1);

  // ---- inject ----
  auto* inject = app.add_subcommand(
      "inject", "Corrupt a seeded fraction of one label's samples with injected tokens");
  std::string in_path, out_path, manifest_path;
  std::string format_in = "auto", format_out = "auto";
  detail::CorruptionArgs inject_args;
  inject->add_option("--in", in_path, "input dataset")->required();
  inject->add_option("--out", out_path, "output dataset")->required();
  inject->add_option("--manifest", manifest_path,
                     "manifest path (default: <out>.manifest.jsonl)");
  inject->add_option("--format", format_in, "input format")
      ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
  inject->add_option("--out-format", format_out, "output format")
      ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
  inject_args.add_flags(inject);

  // ---- eval-split ----
  auto* eval_split = app.add_subcommand(
      "eval-split", "Build a clean/spurious evaluation pair from a test split");
  std::string eval_in, eval_mode = "matched", out_clean, out_spurious, eval_manifest;
  std::string eval_format_in = "auto", eval_format_out = "auto";
  detail::CorruptionArgs eval_args;
  eval_split->add_option("--in", eval_in, "test dataset")->required();
  eval_split->add_option("--mode", eval_mode,
                         "matched: reuse the training corruption; all-classes: corrupt "
                         "100% of every class")
      ->check(CLI::IsMember({"matched", "all-classes"}));
  eval_split->add_option("--out-clean", out_clean, "clean output path")->required();
  eval_split->add_option("--out-spurious", out_spurious, "spurious output path")->required();
  eval_split->add_option("--manifest", eval_manifest,
                         "manifest path (default: <out-spurious>.manifest.jsonl)");
  eval_split->add_option("--format", eval_format_in, "input format")
      ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
  eval_split->add_option("--out-format", eval_format_out, "output format")
      ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
  eval_args.add_flags(eval_split);

  // ---- scan ----
  auto* scan = app.add_subcommand(
      "scan", "Rank tokens by conditional label entropy and flag suspicious ones");
  std::string scan_in, scan_report, scan_hist;
  std::string scan_format = "auto";
  std::uint64_t min_support = 50;
  std::size_t bins = 20;
  bool no_lowercase = false, no_strip_punct = false, top_gap = false;
  double abs_threshold = -1.0;
  scan->add_option("--in", scan_in, "dataset to scan")->required();
  scan->add_option("--format", scan_format, "input format")
      ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
  scan->add_option("--min-support", min_support,
                   "drop tokens appearing in fewer samples than this");
  scan->add_option("--bins", bins, "histogram bin count")->check(CLI::PositiveNumber);
  scan->add_flag("--no-lowercase", no_lowercase, "keep token case when counting");
  scan->add_flag("--no-strip-punct", no_strip_punct,
                 "keep leading/trailing punctuation when counting");
  auto* abs_opt = scan->add_option("--abs-threshold", abs_threshold,
                                   "flag tokens with entropy at or below this many bits");
  scan->add_flag("--top-gap", top_gap,
                 "flag tokens below the largest gap in the sorted entropies instead");
  scan->add_option("--out-report", scan_report,
                   "token report path (default: <in>.entropy.jsonl)");
  scan->add_option("--out-hist", scan_hist,
                   "histogram CSV path (default: <in>.entropy_hist.csv)");

  // ---- audit-attn ----
  auto* audit_cmd = app.add_subcommand(
      "audit-attn", "Compare attention entropy across groups and apply the 95% check");
  std::string attn_in, attn_out;
  double attn_threshold = 0.95;
  audit_cmd->add_option("--in", attn_in, "attention records (JSONL)")->required();
  audit_cmd->add_option("--threshold", attn_threshold,
                        "flag when the group mean-entropy ratio falls below this");
  audit_cmd->add_option("--out", attn_out, "also write the report to this path");

  // ---- score ----
  auto* score = app.add_subcommand(
      "score", "Balanced accuracy for prediction files, plus clean-vs-spurious degradation");
  std::string ref_path, pred_path, pred_clean, pred_spurious, score_out;
  std::string ref_format = "auto";
  score->add_option("--ref", ref_path, "reference dataset with true labels")->required();
  score->add_option("--format", ref_format, "reference format")
      ->check(CLI::IsMember({"auto", "jsonl", "csv"}));
  auto* pred_opt = score->add_option("--pred", pred_path, "prediction file to score");
  auto* clean_opt =
      score->add_option("--pred-clean", pred_clean, "clean-set prediction file");
  auto* spur_opt = score->add_option("--pred-spurious", pred_spurious,
                                     "spurious-set prediction file");
  score->add_option("--out", score_out, "also write the report to this path");
  pred_opt->excludes(clean_opt);
  pred_opt->excludes(spur_opt);
  clean_opt->needs(spur_opt);
  spur_opt->needs(clean_opt);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (inject->parsed()) {
      SourceSpec source_spec;
      TransformPlan plan = inject_args.resolve(inject, source_spec);
      const Dataset ds = read_dataset(in_path, detail::resolve_format(format_in, in_path));
      TransformResult result = spurious_transform(ds, plan, inject_args.workers);
      const DatasetFormat out_fmt = detail::resolve_format(format_out, out_path);
      write_dataset(result.dataset, out_path, out_fmt);
      const std::filesystem::path manifest =
          manifest_path.empty() ? detail::with_suffix(out_path, ".manifest.jsonl")
                                : std::filesystem::path(manifest_path);
      write_manifest(result.manifest, manifest);

      nlohmann::ordered_json echo;
      echo["schema_version"] = 1;
      echo["command"] = "inject";
      echo["in"] = in_path;
      echo["out"] = out_path;
      echo["manifest"] = manifest.string();
      echo["format"] = detail::format_name(out_fmt);
      echo["config"] = inject_args.config_json();
      echo["modified"] = result.manifest.size();
      std::cout << echo.dump() << '\n';
      return 0;
    }

    if (eval_split->parsed()) {
      SourceSpec source_spec;
      TransformPlan plan = eval_args.resolve(eval_split, source_spec);
      const Dataset ds = read_dataset(eval_in, detail::resolve_format(eval_format_in, eval_in));
      const EvalMode mode =
          eval_mode == "matched" ? EvalMode::matched : EvalMode::all_classes;
      EvalPair pair = make_eval_pair(ds, plan, mode, eval_args.workers);
      write_dataset(pair.clean, out_clean, detail::resolve_format(eval_format_out, out_clean));
      write_dataset(pair.spurious, out_spurious,
                    detail::resolve_format(eval_format_out, out_spurious));
      const std::filesystem::path manifest =
          eval_manifest.empty() ? detail::with_suffix(out_spurious, ".manifest.jsonl")
                                : std::filesystem::path(eval_manifest);
      write_manifest(pair.manifest, manifest);

      nlohmann::ordered_json echo;
      echo["schema_version"] = 1;
      echo["command"] = "eval-split";
      echo["in"] = eval_in;
      echo["mode"] = eval_mode;
      echo["out_clean"] = out_clean;
      echo["out_spurious"] = out_spurious;
      echo["manifest"] = manifest.string();
      echo["config"] = eval_args.config_json();
      echo["modified"] = pair.manifest.size();
      std::cout << echo.dump() << '\n';
      return 0;
    }

    if (scan->parsed()) {
      const Dataset ds = read_dataset(scan_in, detail::resolve_format(scan_format, scan_in));
      NormalizeFlags flags{!no_lowercase, !no_strip_punct};
      EntropyReport report = conditional_entropy(ds, min_support, flags);
      if (!report.stats.empty()) {
        std::optional<double> abs;
        if (abs_opt->count() > 0) abs = abs_threshold;
        flag_spurious(report, abs, top_gap);
      }
      const Histogram hist = entropy_histogram(report, bins);

      nlohmann::ordered_json config;
      config["in"] = scan_in;
      config["min_support"] = min_support;
      config["bins"] = bins;
      config["lowercase"] = !no_lowercase;
      config["strip_punct"] = !no_strip_punct;
      config["abs_threshold"] =
          abs_opt->count() > 0 ? nlohmann::ordered_json(abs_threshold)
                               : nlohmann::ordered_json(nullptr);
      config["top_gap"] = top_gap;

      const std::filesystem::path report_path =
          scan_report.empty() ? detail::with_suffix(scan_in, ".entropy.jsonl")
                              : std::filesystem::path(scan_report);
      const std::filesystem::path hist_path =
          scan_hist.empty() ? detail::with_suffix(scan_in, ".entropy_hist.csv")
                            : std::filesystem::path(scan_hist);
      {
        std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(report_path.string() + ": cannot open for writing");
        nlohmann::ordered_json extra;
        extra["config"] = config;
        write_entropy_report(report, out, extra);
      }
      {
        std::ofstream out(hist_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(hist_path.string() + ": cannot open for writing");
        write_histogram_csv(hist, out);
      }

      nlohmann::ordered_json echo;
      echo["schema_version"] = 1;
      echo["command"] = "scan";
      echo["config"] = config;
      echo["tokens"] = report.stats.size();
      echo["flagged"] = report.flagged;
      echo["report"] = report_path.string();
      echo["histogram"] = hist_path.string();
      std::cout << echo.dump() << '\n';
      return 0;
    }

    if (audit_cmd->parsed()) {
      const std::vector<AttentionRecord> records = read_attention_records(attn_in);
      const AuditReport report = audit(records, attn_threshold);
      nlohmann::ordered_json out = audit_report_json(report);
      out["config"] = {{"in", attn_in}, {"threshold", attn_threshold}};
      std::cout << out.dump(2) << '\n';
      if (!attn_out.empty()) detail::write_json_file(out, attn_out);
      return 0;
    }

    if (score->parsed()) {
      const Dataset ds = read_dataset(ref_path, detail::resolve_format(ref_format, ref_path));
      nlohmann::ordered_json out;
      out["schema_version"] = 1;
      out["command"] = "score";
      out["config"] = {{"ref", ref_path}};
      if (pred_opt->count() > 0) {
        out["config"]["pred"] = pred_path;
        out["report"] = score_report_json(balanced_accuracy(read_predictions(pred_path), ds));
      } else if (clean_opt->count() > 0) {
        out["config"]["pred_clean"] = pred_clean;
        out["config"]["pred_spurious"] = pred_spurious;
        const ScoreReport clean = balanced_accuracy(read_predictions(pred_clean), ds);
        const ScoreReport spurious = balanced_accuracy(read_predictions(pred_spurious), ds);
        out["clean"] = score_report_json(clean);
        out["spurious"] = score_report_json(spurious);
        out["degradation_pp"] = degradation(clean, spurious);
      } else {
        throw CLI::ValidationError("--pred",
                                   "provide --pred, or --pred-clean with --pred-spurious");
      }
      std::cout << out.dump(2) << '\n';
      if (!score_out.empty()) detail::write_json_file(out, score_out);
      return 0;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "spurgate: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "spurgate: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? static_cast<std::size_t>(argc - 1) : 0);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace spurgate::cli
