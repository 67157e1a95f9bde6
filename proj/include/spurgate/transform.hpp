#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "spurgate/dataset_io.hpp"
#include "spurgate/modifiers.hpp"
#include "spurgate/rng.hpp"

namespace spurgate {

enum class ModifierKind { item, html };

// Label-targeted corruption of a dataset: apply the modifier to a seeded
// random fraction of the samples carrying `label_to_modify`.
struct TransformPlan {
  std::string label_to_modify;
  double text_proportion = 1.0;
  ModifierKind kind = ModifierKind::item;
  InjectionSpec modifier;
  std::vector<HtmlTag> tags;  // used when kind == html
  std::uint64_t seed = 0;
};

struct ManifestEntry {
  std::uint64_t id = 0;
  std::vector<std::string> injected;

  bool operator==(const ManifestEntry&) const = default;
};

struct TransformResult {
  Dataset dataset;
  std::vector<ManifestEntry> manifest;  // modified ids, ascending
};

namespace detail {

inline void validate_plan(const TransformPlan& plan) {
  if (plan.text_proportion < 0.0 || plan.text_proportion > 1.0) {
    throw std::invalid_argument("text_proportion must be within [0, 1]");
  }
  if (plan.kind == ModifierKind::html && plan.tags.empty()) {
    throw std::invalid_argument("html modifier requires a tag list");
  }
}

inline std::uint64_t round_half_up(double x) {
  return static_cast<std::uint64_t>(std::floor(x + 0.5));
}

// Modifies the chosen samples in place. Sample i draws from its own stream
// derived from the plan seed, so the result does not depend on scheduling.
inline std::vector<ManifestEntry> apply_to_selected(Dataset& ds,
                                                    std::vector<std::size_t> selected,
                                                    const TransformPlan& plan,
                                                    const TokenSource& base_source,
                                                    int workers) {
  std::sort(selected.begin(), selected.end());
  std::vector<ManifestEntry> manifest(selected.size());

  const auto process_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      Sample& sample = ds.samples[selected[n]];
      RngStream stream = RngStream::for_sample(plan.seed, sample.id);
      InjectionSpec spec;
      spec.source = base_source.fresh();
      spec.location = plan.modifier.location;
      spec.amount = plan.modifier.amount;
      InjectionResult result =
          plan.kind == ModifierKind::item
              ? item_injection(sample.text, sample.label, spec, stream)
              : html_injection(sample.text, sample.label, spec, stream, plan.tags);
      sample.text = std::move(result.text);
      manifest[n] = {sample.id, std::move(result.injected)};
    }
  };

  if (workers <= 1 || selected.size() < 2) {
    process_range(0, selected.size());
    return manifest;
  }

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), selected.size());
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::size_t chunk = (selected.size() + n_threads - 1) / n_threads;
  for (std::size_t w = 0; w < n_threads; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(begin + chunk, selected.size());
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      try {
        process_range(begin, end);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
  return manifest;
}

// The capped token space is frozen on a stream derived from the seed alone,
// so a matched test-set corruption reuses the training run's token space
// regardless of how many selection draws either run made.
inline TokenSource prepare_source(const TransformPlan& plan) {
  TokenSource base = plan.modifier.source.fresh();
  if (plan.kind == ModifierKind::item && base.diversity_cap() && !base.has_frozen_space()) {
    RngStream space_stream(plan.seed ^ 0xD1B54A32D192ED03ULL);
    base.freeze_diversity_space(space_stream);
  }
  return base;
}

}  // namespace detail

// Applies plan.modifier to round_half_up(text_proportion * |M|) of the M
// samples labeled label_to_modify, chosen by a partial Fisher-Yates over
// their id-sorted order on the selection stream. Every other sample is
// byte-identical to its input. The manifest records each modified id with
// the injected token strings.
inline TransformResult spurious_transform(const Dataset& ds, const TransformPlan& plan,
                                          int workers = 1) {
  detail::validate_plan(plan);
  if (!ds.has_label(plan.label_to_modify)) {
    throw std::runtime_error("label \"" + plan.label_to_modify +
                             "\" does not occur in the dataset");
  }

  std::vector<std::size_t> target_positions;  // id order == file order
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].label == plan.label_to_modify) target_positions.push_back(i);
  }
  const std::uint64_t k = detail::round_half_up(
      plan.text_proportion * static_cast<double>(target_positions.size()));

  RngStream selection = RngStream::for_selection(plan.seed);
  for (std::uint64_t j = 0; j < k; ++j) {
    const std::uint64_t swap_with =
        j + selection.bounded(target_positions.size() - j);
    std::swap(target_positions[j], target_positions[swap_with]);
  }
  target_positions.resize(k);

  const TokenSource base_source = detail::prepare_source(plan);

  TransformResult result{ds, {}};
  result.manifest = detail::apply_to_selected(result.dataset, std::move(target_positions),
                                              plan, base_source, workers);
  return result;
}

enum class EvalMode { matched, all_classes };

struct EvalPair {
  Dataset clean;
  Dataset spurious;
  std::vector<ManifestEntry> manifest;
};

// Builds the two-sided evaluation set. `matched` corrupts the test split with
// exactly the plan's parameters; `all_classes` corrupts 100% of samples of
// every class, ignoring the plan's target label and proportion. The clean
// member is always identical to the input.
inline EvalPair make_eval_pair(const Dataset& test, const TransformPlan& plan,
                               EvalMode mode, int workers = 1) {
  detail::validate_plan(plan);
  if (mode == EvalMode::matched) {
    TransformResult result = spurious_transform(test, plan, workers);
    return {test, std::move(result.dataset), std::move(result.manifest)};
  }

  std::vector<std::size_t> selected(test.samples.size());
  for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = i;
  const TokenSource base_source = detail::prepare_source(plan);

  EvalPair pair{test, test, {}};
  pair.manifest = detail::apply_to_selected(pair.spurious, std::move(selected), plan,
                                            base_source, workers);
  return pair;
}

inline void write_manifest(const std::vector<ManifestEntry>& manifest, std::ostream& out) {
  for (const ManifestEntry& entry : manifest) {
    nlohmann::ordered_json obj;
    obj["id"] = entry.id;
    obj["injected"] = entry.injected;
    out << obj.dump() << '\n';
  }
}

inline void write_manifest(const std::vector<ManifestEntry>& manifest,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  write_manifest(manifest, out);
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  std::vector<ManifestEntry> manifest;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(lineno) +
                               ": invalid JSON: " + e.what());
    }
    ManifestEntry entry;
    entry.id = obj.at("id").get<std::uint64_t>();
    entry.injected = obj.at("injected").get<std::vector<std::string>>();
    manifest.push_back(std::move(entry));
  }
  return manifest;
}

}  // namespace spurgate
