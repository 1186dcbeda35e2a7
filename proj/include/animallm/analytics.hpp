#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "animallm/errors.hpp"
#include "animallm/storage.hpp"

namespace animallm {

class AnalyticsError : public ValidationError {
 public:
  explicit AnalyticsError(const std::string& msg) : ValidationError("analytics: " + msg) {}
};

enum class GroupKey { Animal, Perspective, TemplateId, Model };
enum class ScoreId { S1, S2 };

std::string to_string(GroupKey key);
// Accepts "animal", "perspective", "template", "template_id", "model";
// anything else raises AnalyticsError listing the valid keys.
std::vector<GroupKey> parse_group_keys(const std::vector<std::string>& names);
ScoreId parse_score_id(const std::string& name);  // "s1" | "s2"

// Typed so canonical row ordering sorts template ids numerically.
using GroupValue = std::variant<std::int64_t, std::string>;
std::string group_value_to_string(const GroupValue& v);

// Means are computed only over present scores; n counts exclude missing.
// pooled_mean pools all present S1 and S2 values together (stored at full
// precision; round for display with round_half_up).
struct AggregateTable {
  struct Row {
    std::vector<GroupValue> values;  // one per group key, in key order
    std::optional<double> mean_s1;
    std::optional<double> mean_s2;
    std::optional<double> pooled_mean;
    std::size_t n_s1 = 0;
    std::size_t n_s2 = 0;
  };
  std::vector<GroupKey> group_keys;
  std::vector<Row> rows;  // sorted canonically by group values
};

AggregateTable aggregate(const std::vector<EvalRecord>& records,
                         const std::vector<GroupKey>& group_keys);

long round_half_up(double value);

// Repeated-evaluation consistency for one response key. Ties break toward
// the lower (less animal-considering) score.
struct RepeatCluster {
  RecordKey key;
  std::optional<int> modal_score;  // none only when every repeat is missing
  double mode_fraction = 0.0;      // modal occurrences / present repeats
  std::size_t distinct_values = 0;
  std::size_t missing_count = 0;
};

std::vector<RepeatCluster> cluster_repeats(const std::vector<EvalRecord>& records,
                                           ScoreId score_id);

// |IT| x R matrix of one animal's scores; missing cells are preserved,
// never imputed.
struct HeatmapMatrix {
  std::string animal;
  ScoreId score_id = ScoreId::S2;
  std::vector<int> template_ids;                           // row order
  int repeats = 0;                                         // columns 1..R
  std::vector<std::vector<std::optional<int>>> cells;      // [row][repeat-1]

  std::size_t missing_count() const;
};

struct HeatmapParams {
  std::string animal;
  ScoreId score_id = ScoreId::S2;
  std::vector<int> template_ids;
  int repeats = 1;
  std::string perspective_id = "P1";
  std::string model;  // empty: accept the single model present
};

HeatmapMatrix heatmap(const std::vector<EvalRecord>& records, const HeatmapParams& params);

// Aligned per-animal series across >= 2 stores sharing a corpus.
struct ModelComparison {
  int template_id = 0;
  ScoreId score_id = ScoreId::S2;
  std::string perspective_id;
  std::vector<std::string> models;
  struct Row {
    std::string animal;
    std::vector<std::optional<double>> values;  // one per model; missing flagged
  };
  std::vector<Row> rows;
};

struct StoreView {
  RunManifest manifest;
  std::vector<EvalRecord> evals;
};

ModelComparison compare_models(const std::vector<StoreView>& stores,
                               const std::vector<std::string>& animals, int template_id,
                               ScoreId score_id, const std::string& perspective_id = "P1");

// CSV is RFC-4180 quoted UTF-8 with a header row; JSON mirrors the same
// data with null for missing cells. Column orders are documented in the
// README.
std::string to_csv(const AggregateTable& table);
std::string to_json_string(const AggregateTable& table);
std::string to_csv(const HeatmapMatrix& matrix);
std::string to_json_string(const HeatmapMatrix& matrix);
std::string to_csv(const ModelComparison& comparison);
std::string to_json_string(const ModelComparison& comparison);

}  // namespace animallm
