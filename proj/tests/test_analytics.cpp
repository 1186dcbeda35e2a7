#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "animallm/analytics.hpp"
#include "test_support.hpp"

using namespace animallm;
using namespace animallm::testing;

namespace {

EvalRecord make_eval(const std::string& model, int template_id, const std::string& animal,
                     const std::string& perspective, int repeat, std::optional<int> s1,
                     std::optional<int> s2) {
  EvalRecord r;
  r.key.response = {model, template_id, animal, perspective, "pins-v1", 1};
  r.key.eval_version = "eval-v1";
  r.key.repeat_index = repeat;
  r.score.s1 = s1;
  r.score.s2 = s2;
  r.parse_mode = (s1 || s2) ? ParseMode::Structured : ParseMode::Failed;
  r.evaluator_model = "mock:2";
  return r;
}

std::vector<EvalRecord> random_records(std::mt19937& rng, std::size_t count) {
  const std::vector<std::string> animals{"dog", "cat", "shrimp", "pig", "ant"};
  const std::vector<std::string> perspectives{"P0", "P1", "P6"};
  const std::vector<std::string> models{"mock:1", "mock:2"};
  std::vector<EvalRecord> records;
  for (std::size_t i = 0; i < count; ++i) {
    auto maybe_score = [&]() -> std::optional<int> {
      if (rng() % 5 == 0) return std::nullopt;  // sprinkle missing scores
      return static_cast<int>(rng() % 101);
    };
    records.push_back(make_eval(models[rng() % models.size()], static_cast<int>(rng() % 6 + 1),
                                animals[rng() % animals.size()],
                                perspectives[rng() % perspectives.size()],
                                static_cast<int>(i), maybe_score(), maybe_score()));
  }
  return records;
}

}  // namespace

TEST_CASE("group key parsing accepts aliases and rejects junk") {
  auto keys = parse_group_keys({"animal", "perspective", "template", "model"});
  CHECK(keys == std::vector<GroupKey>{GroupKey::Animal, GroupKey::Perspective,
                                      GroupKey::TemplateId, GroupKey::Model});
  CHECK(parse_group_keys({"template_id"})[0] == GroupKey::TemplateId);
  CHECK_THROWS_WITH_AS(parse_group_keys({"flavor"}), doctest::Contains("valid:"), AnalyticsError);
  CHECK_THROWS_AS(parse_score_id("s3"), AnalyticsError);
}

TEST_CASE("single-record aggregate reproduces its scores") {
  std::vector<EvalRecord> records{make_eval("mock:1", 3, "chicken", "P6", 1, 82, 3)};
  AggregateTable table = aggregate(records, {GroupKey::Animal});
  REQUIRE(table.rows.size() == 1);
  CHECK(group_value_to_string(table.rows[0].values[0]) == "chicken");
  CHECK(table.rows[0].mean_s1 == 82.0);
  CHECK(table.rows[0].mean_s2 == 3.0);
  CHECK(table.rows[0].n_s1 == 1);
  CHECK(table.rows[0].n_s2 == 1);
}

TEST_CASE("pooled mean of a symmetric record is the score itself") {
  std::vector<EvalRecord> records{make_eval("mock:1", 1, "dog", "P1", 1, 64, 64)};
  AggregateTable table = aggregate(records, {GroupKey::Animal});
  CHECK(table.rows[0].pooled_mean == 64.0);
}

TEST_CASE("aggregate matches a nested-loop oracle on random records") {
  std::mt19937 rng(17);
  std::vector<EvalRecord> records = random_records(rng, 50);
  std::vector<GroupKey> keys{GroupKey::Animal, GroupKey::Perspective};

  AggregateTable table = aggregate(records, keys);

  // Brute-force oracle: direct filtering per observed group.
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for (const auto& row : table.rows) {
    std::string animal = group_value_to_string(row.values[0]);
    std::string perspective = group_value_to_string(row.values[1]);
    seen[{animal, perspective}]++;

    double sum_s1 = 0, sum_s2 = 0;
    std::size_t n_s1 = 0, n_s2 = 0;
    for (const auto& r : records) {
      if (r.key.response.animal != animal || r.key.response.perspective_id != perspective) continue;
      if (r.score.s1) {
        sum_s1 += *r.score.s1;
        ++n_s1;
      }
      if (r.score.s2) {
        sum_s2 += *r.score.s2;
        ++n_s2;
      }
    }
    CHECK(row.n_s1 == n_s1);
    CHECK(row.n_s2 == n_s2);
    if (n_s1 > 0) CHECK(*row.mean_s1 == doctest::Approx(sum_s1 / n_s1).epsilon(1e-9));
    if (n_s1 + n_s2 > 0) {
      CHECK(*row.pooled_mean ==
            doctest::Approx((sum_s1 + sum_s2) / (n_s1 + n_s2)).epsilon(1e-9));
    }
  }
  for (const auto& [group, count] : seen) CHECK(count == 1);
}

TEST_CASE("grouping by every key field returns per-record rows") {
  std::mt19937 rng(3);
  std::vector<EvalRecord> records;
  // Distinct keys, R=1.
  for (int i = 0; i < 10; ++i) {
    records.push_back(make_eval("mock:1", i + 1, "dog", "P1", 1, i * 7 % 101, i * 11 % 101));
  }
  AggregateTable table = aggregate(
      records, {GroupKey::Model, GroupKey::TemplateId, GroupKey::Animal, GroupKey::Perspective});
  REQUIRE(table.rows.size() == records.size());
  for (const auto& row : table.rows) {
    CHECK(row.n_s1 == 1);
    CHECK(row.n_s2 == 1);
  }
}

TEST_CASE("weighted subgroup means recombine into the parent mean") {
  std::mt19937 rng(29);
  std::vector<EvalRecord> records = random_records(rng, 120);

  AggregateTable parent = aggregate(records, {GroupKey::Animal});
  AggregateTable refined = aggregate(records, {GroupKey::Animal, GroupKey::Perspective});

  for (const auto& prow : parent.rows) {
    std::string animal = group_value_to_string(prow.values[0]);
    double weighted = 0;
    std::size_t n = 0;
    for (const auto& rrow : refined.rows) {
      if (group_value_to_string(rrow.values[0]) != animal) continue;
      if (rrow.mean_s1) {
        weighted += *rrow.mean_s1 * static_cast<double>(rrow.n_s1);
        n += rrow.n_s1;
      }
    }
    if (prow.mean_s1) {
      REQUIRE(n == prow.n_s1);
      CHECK(*prow.mean_s1 == doctest::Approx(weighted / n).epsilon(1e-9));
    }
  }
}

TEST_CASE("missing scores never contribute to any mean or count") {
  std::vector<EvalRecord> records{
      make_eval("mock:1", 1, "dog", "P1", 1, 80, std::nullopt),
      make_eval("mock:1", 1, "dog", "P1", 2, std::nullopt, 20),
      make_eval("mock:1", 1, "dog", "P1", 3, std::nullopt, std::nullopt),
  };
  AggregateTable table = aggregate(records, {GroupKey::Animal});
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].n_s1 == 1);
  CHECK(table.rows[0].n_s2 == 1);
  CHECK(*table.rows[0].mean_s1 == 80.0);
  CHECK(*table.rows[0].mean_s2 == 20.0);
  CHECK(*table.rows[0].pooled_mean == 50.0);
}

TEST_CASE("empty record set aggregates to an empty table") {
  AggregateTable table = aggregate({}, {GroupKey::Animal});
  CHECK(table.rows.empty());
}

TEST_CASE("template rows sort numerically") {
  std::vector<EvalRecord> records{
      make_eval("mock:1", 10, "dog", "P1", 1, 1, 1),
      make_eval("mock:1", 2, "dog", "P1", 1, 2, 2),
  };
  AggregateTable table = aggregate(records, {GroupKey::TemplateId});
  REQUIRE(table.rows.size() == 2);
  CHECK(group_value_to_string(table.rows[0].values[0]) == "2");
  CHECK(group_value_to_string(table.rows[1].values[0]) == "10");
}

TEST_CASE("round_half_up matches display rounding") {
  CHECK(round_half_up(2.5) == 3);
  CHECK(round_half_up(2.49) == 2);
  CHECK(round_half_up(0.5) == 1);
  CHECK(round_half_up(82.0) == 82);
}

TEST_CASE("repeat clusters follow the low-score tie rule") {
  std::vector<EvalRecord> records;
  auto add = [&](int repeat, std::optional<int> s2) {
    records.push_back(make_eval("mock:1", 1, "dog", "P1", repeat, s2, s2));
  };

  SUBCASE("unanimous repeats") {
    add(1, 70);
    add(2, 70);
    add(3, 70);
    auto clusters = cluster_repeats(records, ScoreId::S2);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].modal_score == 70);
    CHECK(clusters[0].mode_fraction == doctest::Approx(1.0));
    CHECK(clusters[0].distinct_values == 1);
    CHECK(clusters[0].missing_count == 0);
  }

  SUBCASE("majority with one missing") {
    add(1, 60);
    add(2, 80);
    add(3, 80);
    add(4, std::nullopt);
    auto clusters = cluster_repeats(records, ScoreId::S2);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].modal_score == 80);
    CHECK(clusters[0].mode_fraction == doctest::Approx(2.0 / 3.0));
    CHECK(clusters[0].missing_count == 1);
    CHECK(clusters[0].distinct_values == 2);
  }

  SUBCASE("ties break toward the lower score") {
    add(1, 40);
    add(2, 60);
    auto clusters = cluster_repeats(records, ScoreId::S2);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].modal_score == 40);
    CHECK(clusters[0].mode_fraction == doctest::Approx(0.5));
  }

  SUBCASE("all repeats missing") {
    add(1, std::nullopt);
    add(2, std::nullopt);
    auto clusters = cluster_repeats(records, ScoreId::S2);
    REQUIRE(clusters.size() == 1);
    CHECK_FALSE(clusters[0].modal_score.has_value());
    CHECK(clusters[0].missing_count == 2);
    CHECK(clusters[0].mode_fraction == 0.0);
  }
}

TEST_CASE("heatmap preserves shape and missing cells") {
  std::vector<EvalRecord> records;
  std::vector<int> template_ids{1, 2, 3};
  for (int t : template_ids) {
    for (int r = 1; r <= 4; ++r) {
      if (t == 2 && r == 3) continue;  // injected failure position
      records.push_back(make_eval("mock:1", t, "shrimp", "P1", r, 50, t * 10 + r));
    }
  }
  HeatmapParams params{"shrimp", ScoreId::S2, template_ids, 4, "P1", "mock:1"};
  HeatmapMatrix matrix = heatmap(records, params);
  CHECK(matrix.template_ids == template_ids);
  CHECK(matrix.repeats == 4);
  CHECK(matrix.missing_count() == 1);
  CHECK_FALSE(matrix.cells[1][2].has_value());
  CHECK(matrix.cells[0][0] == 11);
  CHECK(matrix.cells[2][3] == 34);

  SUBCASE("degenerate single-repeat width") {
    params.repeats = 1;
    HeatmapMatrix column = heatmap(records, params);
    CHECK(column.cells.size() == 3);
    CHECK(column.cells[0].size() == 1);
  }

  SUBCASE("unknown animal is an error") {
    params.animal = "unicorn";
    CHECK_THROWS_AS(heatmap(records, params), AnalyticsError);
  }
}

TEST_CASE("model comparison aligns series and refuses corpus mismatches") {
  RunManifest a;
  a.corpus_hash = "h1";
  a.generation_model = "mock:1";
  RunManifest b = a;
  b.generation_model = "mock:2";

  std::vector<EvalRecord> evals_a{make_eval("mock:1", 3, "dog", "P1", 1, 80, 72),
                                  make_eval("mock:1", 3, "cat", "P1", 1, 75, 66)};
  std::vector<EvalRecord> evals_b{make_eval("mock:2", 3, "dog", "P1", 1, 80, 72),
                                  make_eval("mock:2", 3, "cat", "P1", 1, 75, 60)};

  SUBCASE("identical stores give identical series") {
    ModelComparison c = compare_models({{a, evals_a}, {b, evals_a}}, {"dog", "cat"}, 3, ScoreId::S2);
    REQUIRE(c.rows.size() == 2);
    for (const auto& row : c.rows) CHECK(row.values[0] == row.values[1]);
  }

  SUBCASE("a differing score is localized to its animal") {
    ModelComparison c = compare_models({{a, evals_a}, {b, evals_b}}, {"dog", "cat"}, 3, ScoreId::S2);
    CHECK(c.rows[0].animal == "dog");
    CHECK(c.rows[0].values[0] == c.rows[0].values[1]);
    CHECK(c.rows[1].values[0] != c.rows[1].values[1]);
  }

  SUBCASE("missing animals are flagged, not dropped") {
    ModelComparison c =
        compare_models({{a, evals_a}, {b, evals_b}}, {"dog", "cat", "ant"}, 3, ScoreId::S2);
    REQUIRE(c.rows.size() == 3);
    CHECK_FALSE(c.rows[2].values[0].has_value());
  }

  SUBCASE("corpus hash mismatch refuses") {
    RunManifest other = b;
    other.corpus_hash = "h2";
    CHECK_THROWS_AS(compare_models({{a, evals_a}, {other, evals_b}}, {"dog"}, 3, ScoreId::S2),
                    AnalyticsError);
  }

  SUBCASE("fewer than two stores refuses") {
    CHECK_THROWS_AS(compare_models({{a, evals_a}}, {"dog"}, 3, ScoreId::S2), AnalyticsError);
  }
}

TEST_CASE("csv exports quote per RFC 4180") {
  std::vector<EvalRecord> records{make_eval("mock,with\"odd", 1, "dog", "P1", 1, 5, 6)};
  AggregateTable table = aggregate(records, {GroupKey::Model});
  std::string csv = to_csv(table);
  CHECK(csv.find("\"mock,with\"\"odd\"") != std::string::npos);
  CHECK(csv.find("model,mean_s1,mean_s2,pooled_mean,n_s1,n_s2") == 0);
}

TEST_CASE("heatmap exports carry nulls for missing cells") {
  std::vector<EvalRecord> records{make_eval("mock:1", 1, "dog", "P1", 1, 10, 20)};
  HeatmapParams params{"dog", ScoreId::S2, {1}, 2, "P1", "mock:1"};
  HeatmapMatrix matrix = heatmap(records, params);
  std::string json = to_json_string(matrix);
  CHECK(json.find("null") != std::string::npos);
  std::string csv = to_csv(matrix);
  CHECK(csv.find("template_id,r1,r2") == 0);
  CHECK(csv.find("1,20,") != std::string::npos);
}

TEST_CASE("analytics are stable across record order") {
  std::mt19937 rng(11);
  std::vector<EvalRecord> records = random_records(rng, 60);
  std::vector<EvalRecord> shuffled = records;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  CHECK(to_csv(aggregate(records, {GroupKey::Animal, GroupKey::Model})) ==
        to_csv(aggregate(shuffled, {GroupKey::Animal, GroupKey::Model})));

  auto clusters_a = cluster_repeats(records, ScoreId::S1);
  auto clusters_b = cluster_repeats(shuffled, ScoreId::S1);
  REQUIRE(clusters_a.size() == clusters_b.size());
  for (std::size_t i = 0; i < clusters_a.size(); ++i) {
    CHECK(clusters_a[i].key == clusters_b[i].key);
    CHECK(clusters_a[i].modal_score == clusters_b[i].modal_score);
  }
}
