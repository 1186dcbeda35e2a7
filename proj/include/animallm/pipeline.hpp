#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "animallm/corpus.hpp"
#include "animallm/providers.hpp"
#include "animallm/storage.hpp"

namespace animallm {

struct InstructionVersion {
  std::string pins_version = "pins-v1";
  std::string eval_version = "eval-v1";
};

struct RunConfig {
  Corpus corpus;
  std::string corpus_hash;
  ModelSpec generation_model;
  ModelSpec evaluator_model;
  InstructionVersion versions;
  int repeats = 1;      // R >= 1
  int execution = 1;    // e >= 1
  int parallelism = 1;
  std::int64_t seed = 0;
  bool eval_includes_query = true;
};

RunManifest make_manifest(const RunConfig& config);

// Per-instance progress. Phases only move forward within a run; Failed is
// terminal for the attempt but the instance is retried on resume.
enum class Phase { Pending, Responded, Evaluated, Failed };

class PipelineStateTracker {
 public:
  void mark_pending(const RecordKey& key);
  void advance(const RecordKey& key, Phase phase);  // throws on regression
  Phase phase(const RecordKey& key) const;
  std::size_t count(Phase phase) const;

 private:
  mutable std::mutex mu_;
  std::map<RecordKey, Phase> phases_;
};

// Line that separates a model's answer from its appended reasoning section.
inline constexpr const char* kReasoningDelimiter = "Reasoning:";

// Splits model output on the first line equal to kReasoningDelimiter.
// Without a delimiter the whole text is the answer and reasoning is empty.
std::pair<std::string, std::string> split_answer_reasoning(const std::string& text);

// PINS: system text carries the rendered perspective (empty for P1), user
// text is the rendered query plus a fixed suffix asking for a reasoning
// section. Deterministic for fixed inputs.
ChatRequest build_perspective_instruction(const QueryInstance& instance,
                                          const InstructionVersion& version);

// EVAL_P0: the rubric header, both guidelines with {animal} substituted,
// the alignment sentence, query (when included), response and reasoning
// bodies, and the structured-payload directive.
ChatRequest build_eval_instruction(const std::string& animal, const std::string& response_text,
                                   const std::string& reasoning_text, const ScoreGuideline& s1,
                                   const ScoreGuideline& s2, const InstructionVersion& version,
                                   const std::string& query_text = "");

struct GenerationSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  std::string first_error;
};

struct EvaluationSummary {
  std::size_t written = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  std::size_t parse_failures = 0;
  std::string first_error;
};

// One ResponseRecord per pending QueryInstance. Instances already stored
// are skipped; individual provider failures are counted and the run
// continues. `limit` caps how many pending instances are attempted (used to
// exercise interrupted runs).
GenerationSummary run_generation(const RunConfig& config, ProviderRegistry& providers,
                                 RunStore& store, std::optional<std::size_t> limit = {});

// R EvalRecords per ResponseRecord. Unparseable evaluator output is stored
// with missing scores and counted, never aborts the run.
EvaluationSummary run_evaluation(const RunConfig& config, ProviderRegistry& providers,
                                 RunStore& store, std::optional<std::size_t> limit = {});

inline constexpr int kDefaultRegenTolerance = 10;
inline constexpr int kDefaultRegenMaxIterations = 3;

struct RegenReport {
  int target_s2 = 0;
  int tolerance = kDefaultRegenTolerance;
  bool converged = false;
  int iterations = 0;
  std::size_t best_index = 0;  // into attempts
  std::vector<RegenAttemptRecord> attempts;

  const RegenAttemptRecord& best() const { return attempts.at(best_index); }
};

// Regenerates the instance's response targeting an S2 score: the generation
// instruction embeds the S2 rubric and the target, each candidate is
// evaluated, and the loop stops once |achieved - target| <= tolerance or
// max_iterations is reached. Non-convergence is a flagged result, not an
// error. All attempts are persisted to regen.jsonl.
RegenReport regenerate_at_score(const QueryInstance& instance, int target_s2,
                                const RunConfig& config, ProviderRegistry& providers,
                                RunStore& store, int tolerance = kDefaultRegenTolerance,
                                int max_iterations = kDefaultRegenMaxIterations);

}  // namespace animallm
