#include "animallm/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace animallm {

using json = nlohmann::json;

std::string to_string(GroupKey key) {
  switch (key) {
    case GroupKey::Animal: return "animal";
    case GroupKey::Perspective: return "perspective";
    case GroupKey::TemplateId: return "template_id";
    case GroupKey::Model: return "model";
  }
  return "animal";
}

std::vector<GroupKey> parse_group_keys(const std::vector<std::string>& names) {
  std::vector<GroupKey> keys;
  for (const auto& name : names) {
    if (name == "animal") {
      keys.push_back(GroupKey::Animal);
    } else if (name == "perspective") {
      keys.push_back(GroupKey::Perspective);
    } else if (name == "template" || name == "template_id") {
      keys.push_back(GroupKey::TemplateId);
    } else if (name == "model") {
      keys.push_back(GroupKey::Model);
    } else {
      throw AnalyticsError("invalid group key '" + name +
                           "' (valid: animal, perspective, template, model)");
    }
  }
  return keys;
}

ScoreId parse_score_id(const std::string& name) {
  if (name == "s1" || name == "S1") return ScoreId::S1;
  if (name == "s2" || name == "S2") return ScoreId::S2;
  throw AnalyticsError("invalid score id '" + name + "' (valid: s1, s2)");
}

std::string group_value_to_string(const GroupValue& v) {
  if (std::holds_alternative<std::int64_t>(v)) return std::to_string(std::get<std::int64_t>(v));
  return std::get<std::string>(v);
}

namespace {

GroupValue extract_group_value(const EvalRecord& record, GroupKey key) {
  switch (key) {
    case GroupKey::Animal: return record.key.response.animal;
    case GroupKey::Perspective: return record.key.response.perspective_id;
    case GroupKey::TemplateId: return std::int64_t{record.key.response.template_id};
    case GroupKey::Model: return record.key.response.model;
  }
  return std::string();
}

std::optional<int> pick_score(const EvalRecord& record, ScoreId id) {
  return id == ScoreId::S1 ? record.score.s1 : record.score.s2;
}

// Shortest round-trip decimal form, so exports keep full precision without
// printf noise.
std::string format_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) return "0";
  return std::string(buf, end);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string optional_to_csv(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_to_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

long round_half_up(double value) { return static_cast<long>(std::floor(value + 0.5)); }

AggregateTable aggregate(const std::vector<EvalRecord>& records,
                         const std::vector<GroupKey>& group_keys) {
  struct Acc {
    double sum_s1 = 0;
    double sum_s2 = 0;
    std::size_t n_s1 = 0;
    std::size_t n_s2 = 0;
  };
  std::map<std::vector<GroupValue>, Acc> groups;
  for (const auto& record : records) {
    std::vector<GroupValue> values;
    values.reserve(group_keys.size());
    for (GroupKey key : group_keys) values.push_back(extract_group_value(record, key));
    Acc& acc = groups[values];
    if (record.score.s1) {
      acc.sum_s1 += *record.score.s1;
      ++acc.n_s1;
    }
    if (record.score.s2) {
      acc.sum_s2 += *record.score.s2;
      ++acc.n_s2;
    }
  }

  AggregateTable table;
  table.group_keys = group_keys;
  for (const auto& [values, acc] : groups) {
    AggregateTable::Row row;
    row.values = values;
    row.n_s1 = acc.n_s1;
    row.n_s2 = acc.n_s2;
    if (acc.n_s1 > 0) row.mean_s1 = acc.sum_s1 / static_cast<double>(acc.n_s1);
    if (acc.n_s2 > 0) row.mean_s2 = acc.sum_s2 / static_cast<double>(acc.n_s2);
    if (acc.n_s1 + acc.n_s2 > 0) {
      row.pooled_mean = (acc.sum_s1 + acc.sum_s2) / static_cast<double>(acc.n_s1 + acc.n_s2);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<RepeatCluster> cluster_repeats(const std::vector<EvalRecord>& records,
                                           ScoreId score_id) {
  std::map<RecordKey, std::vector<std::optional<int>>> by_response;
  for (const auto& record : records) {
    by_response[record.key.response].push_back(pick_score(record, score_id));
  }

  std::vector<RepeatCluster> clusters;
  clusters.reserve(by_response.size());
  for (const auto& [key, scores] : by_response) {
    RepeatCluster cluster;
    cluster.key = key;
    std::map<int, std::size_t> counts;
    for (const auto& score : scores) {
      if (score) ++counts[*score];
      else ++cluster.missing_count;
    }
    cluster.distinct_values = counts.size();
    std::size_t present = scores.size() - cluster.missing_count;
    std::size_t best_count = 0;
    for (const auto& [value, count] : counts) {
      // std::map iterates ascending, so ties resolve to the lower score.
      if (count > best_count) {
        best_count = count;
        cluster.modal_score = value;
      }
    }
    cluster.mode_fraction =
        present > 0 ? static_cast<double>(best_count) / static_cast<double>(present) : 0.0;
    clusters.push_back(std::move(cluster));
  }
  return clusters;
}

std::size_t HeatmapMatrix::missing_count() const {
  std::size_t n = 0;
  for (const auto& row : cells) {
    for (const auto& cell : row) {
      if (!cell) ++n;
    }
  }
  return n;
}

HeatmapMatrix heatmap(const std::vector<EvalRecord>& records, const HeatmapParams& params) {
  if (params.repeats < 1) throw AnalyticsError("heatmap needs repeats >= 1");

  bool animal_known = false;
  std::string model = params.model;
  for (const auto& record : records) {
    if (record.key.response.animal == params.animal) animal_known = true;
    if (model.empty()) model = record.key.response.model;
  }
  if (!animal_known) throw AnalyticsError("no records for animal '" + params.animal + "'");

  HeatmapMatrix matrix;
  matrix.animal = params.animal;
  matrix.score_id = params.score_id;
  matrix.template_ids = params.template_ids;
  matrix.repeats = params.repeats;
  matrix.cells.assign(params.template_ids.size(),
                      std::vector<std::optional<int>>(params.repeats));

  std::map<int, std::size_t> row_of;
  for (std::size_t i = 0; i < params.template_ids.size(); ++i) {
    row_of[params.template_ids[i]] = i;
  }

  for (const auto& record : records) {
    const RecordKey& key = record.key.response;
    if (key.animal != params.animal || key.perspective_id != params.perspective_id ||
        key.model != model) {
      continue;
    }
    auto row = row_of.find(key.template_id);
    if (row == row_of.end()) continue;
    int repeat = record.key.repeat_index;
    if (repeat < 1 || repeat > params.repeats) continue;
    matrix.cells[row->second][repeat - 1] = pick_score(record, params.score_id);
  }
  return matrix;
}

ModelComparison compare_models(const std::vector<StoreView>& stores,
                               const std::vector<std::string>& animals, int template_id,
                               ScoreId score_id, const std::string& perspective_id) {
  if (stores.size() < 2) throw AnalyticsError("comparison needs at least two runs");
  for (const auto& store : stores) {
    if (store.manifest.corpus_hash != stores.front().manifest.corpus_hash) {
      throw AnalyticsError("corpus hash mismatch between runs; comparison would be meaningless");
    }
  }

  ModelComparison comparison;
  comparison.template_id = template_id;
  comparison.score_id = score_id;
  comparison.perspective_id = perspective_id;
  for (const auto& store : stores) comparison.models.push_back(store.manifest.generation_model);

  for (const auto& animal : animals) {
    ModelComparison::Row row;
    row.animal = animal;
    for (const auto& store : stores) {
      double sum = 0;
      std::size_t n = 0;
      for (const auto& record : store.evals) {
        const RecordKey& key = record.key.response;
        if (key.template_id != template_id || key.animal != animal ||
            key.perspective_id != perspective_id) {
          continue;
        }
        if (auto score = pick_score(record, score_id)) {
          sum += *score;
          ++n;
        }
      }
      row.values.push_back(n > 0 ? std::optional<double>(sum / static_cast<double>(n))
                                 : std::nullopt);
    }
    comparison.rows.push_back(std::move(row));
  }
  return comparison;
}

std::string to_csv(const AggregateTable& table) {
  std::ostringstream out;
  for (GroupKey key : table.group_keys) out << to_string(key) << ',';
  out << "mean_s1,mean_s2,pooled_mean,n_s1,n_s2\r\n";
  for (const auto& row : table.rows) {
    for (const auto& value : row.values) out << csv_escape(group_value_to_string(value)) << ',';
    out << optional_to_csv(row.mean_s1) << ',' << optional_to_csv(row.mean_s2) << ','
        << optional_to_csv(row.pooled_mean) << ',' << row.n_s1 << ',' << row.n_s2 << "\r\n";
  }
  return out.str();
}

std::string to_json_string(const AggregateTable& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json r;
    for (std::size_t i = 0; i < table.group_keys.size(); ++i) {
      const GroupValue& v = row.values[i];
      if (std::holds_alternative<std::int64_t>(v)) {
        r[to_string(table.group_keys[i])] = std::get<std::int64_t>(v);
      } else {
        r[to_string(table.group_keys[i])] = std::get<std::string>(v);
      }
    }
    r["mean_s1"] = optional_to_json(row.mean_s1);
    r["mean_s2"] = optional_to_json(row.mean_s2);
    r["pooled_mean"] = optional_to_json(row.pooled_mean);
    r["n_s1"] = row.n_s1;
    r["n_s2"] = row.n_s2;
    rows.push_back(std::move(r));
  }
  return rows.dump(2);
}

std::string to_csv(const HeatmapMatrix& matrix) {
  std::ostringstream out;
  out << "template_id";
  for (int r = 1; r <= matrix.repeats; ++r) out << ",r" << r;
  out << "\r\n";
  for (std::size_t i = 0; i < matrix.template_ids.size(); ++i) {
    out << matrix.template_ids[i];
    for (const auto& cell : matrix.cells[i]) {
      out << ',';
      if (cell) out << *cell;
    }
    out << "\r\n";
  }
  return out.str();
}

std::string to_json_string(const HeatmapMatrix& matrix) {
  json j;
  j["animal"] = matrix.animal;
  j["score"] = matrix.score_id == ScoreId::S1 ? "s1" : "s2";
  j["rows"] = matrix.template_ids;
  json cols = json::array();
  for (int r = 1; r <= matrix.repeats; ++r) cols.push_back(r);
  j["cols"] = cols;
  json cells = json::array();
  for (const auto& row : matrix.cells) {
    json jrow = json::array();
    for (const auto& cell : row) jrow.push_back(optional_to_json(cell));
    cells.push_back(std::move(jrow));
  }
  j["cells"] = std::move(cells);
  return j.dump(2);
}

std::string to_csv(const ModelComparison& comparison) {
  std::ostringstream out;
  out << "animal";
  for (const auto& model : comparison.models) out << ',' << csv_escape(model);
  out << "\r\n";
  for (const auto& row : comparison.rows) {
    out << csv_escape(row.animal);
    for (const auto& value : row.values) out << ',' << optional_to_csv(value);
    out << "\r\n";
  }
  return out.str();
}

std::string to_json_string(const ModelComparison& comparison) {
  json j;
  j["template_id"] = comparison.template_id;
  j["score"] = comparison.score_id == ScoreId::S1 ? "s1" : "s2";
  j["perspective"] = comparison.perspective_id;
  j["models"] = comparison.models;
  json series = json::array();
  for (const auto& row : comparison.rows) {
    json r;
    r["animal"] = row.animal;
    json values = json::array();
    bool missing = false;
    for (const auto& value : row.values) {
      values.push_back(optional_to_json(value));
      if (!value) missing = true;
    }
    r["values"] = std::move(values);
    r["missing_data"] = missing;
    series.push_back(std::move(r));
  }
  j["series"] = std::move(series);
  return j.dump(2);
}

}  // namespace animallm
