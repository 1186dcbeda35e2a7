#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "animallm/corpus.hpp"
#include "animallm/errors.hpp"
#include "animallm/providers.hpp"
#include "animallm/scoring.hpp"

namespace animallm {

class StorageError : public std::runtime_error {
 public:
  explicit StorageError(const std::string& msg) : std::runtime_error("storage: " + msg) {}
};

// Immutable description of a run. manifest_id is derived from every field
// except created_at, so identical parameters always map to the same run.
struct RunManifest {
  std::string manifest_id;
  std::string corpus_hash;  // sha256 of the corpus file bytes
  std::string generation_model;
  std::string evaluator_model;
  std::string pins_version;
  std::string eval_version;
  int repeats = 1;
  int execution = 1;
  std::int64_t seed = 0;
  bool eval_includes_query = true;
  std::string created_at;  // ISO 8601 UTC

  std::string compute_id() const;
};

// Semantic identity of one generation result; never a file offset, so
// merges of partial runs stay well-defined.
struct RecordKey {
  std::string model;
  int template_id = 0;
  std::string animal;
  std::string perspective_id;
  std::string pins_version;
  int execution = 1;

  auto tie() const {
    return std::tie(model, template_id, animal, perspective_id, pins_version, execution);
  }
  bool operator==(const RecordKey& o) const { return tie() == o.tie(); }
  bool operator<(const RecordKey& o) const { return tie() < o.tie(); }
};

struct ResponseRecord {
  RecordKey key;
  std::string query_text;
  std::string perspective_text;
  std::string response_text;
  std::string reasoning_text;
  FinishReason finish_reason = FinishReason::Complete;
  std::int64_t latency_ms = 0;
  int attempt_count = 1;
};

struct EvalKey {
  RecordKey response;
  std::string eval_version;
  int repeat_index = 1;  // 1..R

  auto tie() const { return std::tuple_cat(response.tie(), std::tie(eval_version, repeat_index)); }
  bool operator==(const EvalKey& o) const { return tie() == o.tie(); }
  bool operator<(const EvalKey& o) const { return tie() < o.tie(); }
};

struct EvalRecord {
  EvalKey key;
  EvalScore score;
  ParseMode parse_mode = ParseMode::Failed;
  std::string evaluator_model;
  std::string raw_evaluator_text;
};

// One attempt of the score-targeted regeneration loop. Kept in a separate
// file so attempts never leak into the run's response/eval matrix.
struct RegenAttemptRecord {
  int attempt = 1;
  int target_s2 = 0;
  int template_id = 0;
  std::string animal;
  std::string perspective_id;
  std::string model;
  std::string response_text;
  std::string reasoning_text;
  EvalScore score;
  ParseMode parse_mode = ParseMode::Failed;
  std::string raw_evaluator_text;
};

enum class AppendResult { Accepted, Duplicate };

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);
std::string response_to_json_line(const ResponseRecord& r);
ResponseRecord response_from_json_line(const std::string& line);
std::string eval_to_json_line(const EvalRecord& r);
EvalRecord eval_from_json_line(const std::string& line);

void canonical_sort(std::vector<ResponseRecord>& records);
void canonical_sort(std::vector<EvalRecord>& records);

// Append-only run directory:
//   runs/<manifest_id>/manifest.json   immutable parameters
//                      corpus.json     byte copy of the corpus file
//                      responses.jsonl one ResponseRecord per line
//                      evals.jsonl     one EvalRecord per line
//                      regen.jsonl     regeneration attempts
//
// Single writer, multiple readers. Appends are flushed before they are
// acknowledged; a torn trailing line (e.g. after a crash) is discarded with
// a warning on open, so the intact prefix always loads.
class RunStore {
 public:
  static RunStore create(const std::filesystem::path& dir, const RunManifest& manifest,
                         const std::string& corpus_bytes);
  static RunStore open(const std::filesystem::path& dir);
  static bool exists(const std::filesystem::path& dir);

  const RunManifest& manifest() const { return manifest_; }
  const Corpus& corpus() const { return corpus_; }
  const std::filesystem::path& dir() const { return dir_; }

  // Duplicate keys are rejected without modifying the store. Key fields
  // must match the manifest; evals must reference a stored response.
  AppendResult append_response(const ResponseRecord& record);
  AppendResult append_eval(const EvalRecord& record);
  void append_regen(const RegenAttemptRecord& record);

  const std::vector<ResponseRecord>& responses() const { return responses_; }
  const std::vector<EvalRecord>& evals() const { return evals_; }
  std::vector<RegenAttemptRecord> regen_attempts() const;

  const ResponseRecord* find_response(const RecordKey& key) const;

  // Expansion keys with no ResponseRecord yet, in canonical order.
  std::vector<QueryInstance> pending_generation(const std::vector<QueryInstance>& expansion) const;

  struct EvalDeficit {
    RecordKey key;
    std::vector<int> missing_repeats;  // subset of 1..R
  };
  // Responses with fewer than `repeats` eval records for eval_version.
  std::vector<EvalDeficit> pending_evaluation(const std::string& eval_version, int repeats) const;

 private:
  RunStore() = default;
  void load_existing();
  void open_writers();

  std::filesystem::path dir_;
  RunManifest manifest_;
  Corpus corpus_;
  std::vector<ResponseRecord> responses_;
  std::vector<EvalRecord> evals_;
  std::map<RecordKey, std::size_t> response_index_;
  std::set<EvalKey> eval_index_;
  std::ofstream responses_out_;
  std::ofstream evals_out_;
  std::ofstream regen_out_;
};

}  // namespace animallm
