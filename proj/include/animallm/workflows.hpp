#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "animallm/analytics.hpp"
#include "animallm/pipeline.hpp"
#include "animallm/providers.hpp"
#include "animallm/storage.hpp"

namespace animallm {

// Run-directory orchestration shared by the CLI and the Python module.
// Validation problems raise ValidationError; I/O problems raise
// StorageError.

struct GenerateOptions {
  std::string corpus_path;
  std::string run_dir;
  std::string model;               // e.g. "mock:7"
  std::string evaluator;           // defaults to `model`
  std::string pins_version = "pins-v1";
  std::string eval_version = "eval-v1";
  int repeats = 1;
  int execution = 1;
  int parallelism = 1;
  std::int64_t seed = 0;
  bool resume = false;
  std::optional<std::size_t> limit;
};

struct GenerateResult {
  std::string manifest_id;
  GenerationSummary summary;
};

GenerateResult generate_workflow(const GenerateOptions& options, ProviderRegistry& providers);

struct EvaluateOptions {
  std::string run_dir;
  // When set, must agree with the manifest; the manifest pins them.
  std::optional<std::string> evaluator;
  std::optional<std::string> eval_version;
  std::optional<int> repeats;
  int parallelism = 1;
  bool resume = false;
  std::optional<std::size_t> limit;
};

EvaluationSummary evaluate_workflow(const EvaluateOptions& options, ProviderRegistry& providers);

struct RegenOptions {
  std::string run_dir;
  int template_id = 0;
  std::string animal;
  std::string perspective_id;
  int target_s2 = 0;
  int tolerance = kDefaultRegenTolerance;
  int max_iterations = kDefaultRegenMaxIterations;
};

RegenReport regen_workflow(const RegenOptions& options, ProviderRegistry& providers);

AggregateTable aggregate_workflow(const std::string& run_dir,
                                  const std::vector<std::string>& group_by);

HeatmapMatrix heatmap_workflow(const std::string& run_dir, const std::string& animal,
                               const std::string& score, const std::string& perspective = "P1");

ModelComparison compare_workflow(const std::vector<std::string>& run_dirs, int template_id,
                                 const std::string& score, const std::string& perspective = "P1");

// Rebuilds a RunConfig from a stored manifest plus the run-dir corpus.
RunConfig config_from_store(const RunStore& store, int parallelism = 1);

}  // namespace animallm
