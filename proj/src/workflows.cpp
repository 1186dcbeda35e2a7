#include "animallm/workflows.hpp"

#include <fstream>
#include <sstream>

#include "animallm/hash.hpp"

namespace animallm {

namespace {

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void check_matches_manifest(const RunManifest& manifest, const EvaluateOptions& options) {
  if (options.evaluator && *options.evaluator != manifest.evaluator_model) {
    throw ValidationError("--evaluator '" + *options.evaluator +
                          "' does not match the manifest (" + manifest.evaluator_model +
                          "); evaluation parameters are pinned at generation time");
  }
  if (options.eval_version && *options.eval_version != manifest.eval_version) {
    throw ValidationError("--eval-version '" + *options.eval_version +
                          "' does not match the manifest (" + manifest.eval_version +
                          "), which pinned it at generation time");
  }
  if (options.repeats && *options.repeats != manifest.repeats) {
    throw ValidationError("--repeats " + std::to_string(*options.repeats) +
                          " does not match the manifest (" + std::to_string(manifest.repeats) +
                          "), which pinned it at generation time");
  }
}

}  // namespace

RunConfig config_from_store(const RunStore& store, int parallelism) {
  const RunManifest& m = store.manifest();
  RunConfig config;
  config.corpus = store.corpus();
  config.corpus_hash = m.corpus_hash;
  config.generation_model = parse_model_spec(m.generation_model);
  config.evaluator_model = parse_model_spec(m.evaluator_model);
  config.versions = {m.pins_version, m.eval_version};
  config.repeats = m.repeats;
  config.execution = m.execution;
  config.parallelism = parallelism;
  config.seed = m.seed;
  config.eval_includes_query = m.eval_includes_query;
  return config;
}

GenerateResult generate_workflow(const GenerateOptions& options, ProviderRegistry& providers) {
  std::string corpus_bytes = read_file_bytes(options.corpus_path);

  RunConfig config;
  config.corpus = parse_corpus_json(corpus_bytes);
  config.corpus_hash = sha256_hex(corpus_bytes);
  config.generation_model = parse_model_spec(options.model);
  config.evaluator_model =
      parse_model_spec(options.evaluator.empty() ? options.model : options.evaluator);
  config.versions = {options.pins_version, options.eval_version};
  config.repeats = options.repeats;
  config.execution = options.execution;
  config.parallelism = options.parallelism;
  config.seed = options.seed;

  if (!providers.has(config.generation_model.provider_id)) {
    throw ValidationError("unknown provider '" + config.generation_model.provider_id + "'");
  }
  if (!providers.has(config.evaluator_model.provider_id)) {
    throw ValidationError("unknown provider '" + config.evaluator_model.provider_id + "'");
  }

  RunManifest manifest = make_manifest(config);

  RunStore store = [&] {
    if (RunStore::exists(options.run_dir)) {
      if (!options.resume) {
        throw ValidationError("run directory '" + options.run_dir +
                              "' already holds a run; pass --resume to continue it");
      }
      RunStore existing = RunStore::open(options.run_dir);
      if (existing.manifest().manifest_id != manifest.manifest_id) {
        throw ValidationError(
            "existing manifest does not match these parameters; resume requires the "
            "original configuration");
      }
      return existing;
    }
    return RunStore::create(options.run_dir, manifest, corpus_bytes);
  }();

  GenerateResult result;
  result.manifest_id = store.manifest().manifest_id;
  result.summary = run_generation(config, providers, store, options.limit);
  return result;
}

EvaluationSummary evaluate_workflow(const EvaluateOptions& options, ProviderRegistry& providers) {
  RunStore store = RunStore::open(options.run_dir);
  check_matches_manifest(store.manifest(), options);
  if (store.responses().empty()) {
    throw ValidationError("run '" + options.run_dir +
                          "' has no responses yet; run the generate step first");
  }
  RunConfig config = config_from_store(store, options.parallelism);
  return run_evaluation(config, providers, store, options.limit);
}

RegenReport regen_workflow(const RegenOptions& options, ProviderRegistry& providers) {
  if (options.target_s2 < kScoreMin || options.target_s2 > kScoreMax) {
    throw ValidationError("target score " + std::to_string(options.target_s2) +
                          " outside 0..100");
  }
  RunStore store = RunStore::open(options.run_dir);
  RunConfig config = config_from_store(store);

  for (const auto& instance : expand(config.corpus)) {
    if (instance.template_id == options.template_id && instance.animal == options.animal &&
        instance.perspective_id == options.perspective_id) {
      return regenerate_at_score(instance, options.target_s2, config, providers, store,
                                 options.tolerance, options.max_iterations);
    }
  }
  throw ValidationError("no instance (template " + std::to_string(options.template_id) + ", " +
                        options.animal + ", " + options.perspective_id + ") in this corpus");
}

AggregateTable aggregate_workflow(const std::string& run_dir,
                                  const std::vector<std::string>& group_by) {
  std::vector<GroupKey> keys = parse_group_keys(group_by);
  RunStore store = RunStore::open(run_dir);
  return aggregate(store.evals(), keys);
}

HeatmapMatrix heatmap_workflow(const std::string& run_dir, const std::string& animal,
                               const std::string& score, const std::string& perspective) {
  RunStore store = RunStore::open(run_dir);
  bool known = false;
  for (const auto& a : store.corpus().animals) known |= (a == animal);
  if (!known) throw AnalyticsError("animal '" + animal + "' is not in this run's corpus");

  HeatmapParams params;
  params.animal = animal;
  params.score_id = parse_score_id(score);
  params.repeats = store.manifest().repeats;
  params.perspective_id = perspective;
  params.model = store.manifest().generation_model;
  for (const auto& tmpl : store.corpus().templates) params.template_ids.push_back(tmpl.id);
  return heatmap(store.evals(), params);
}

ModelComparison compare_workflow(const std::vector<std::string>& run_dirs, int template_id,
                                 const std::string& score, const std::string& perspective) {
  if (run_dirs.size() < 2) throw ValidationError("comparison needs at least two --run-dir values");
  std::vector<StoreView> views;
  std::vector<std::string> animals;
  for (std::size_t i = 0; i < run_dirs.size(); ++i) {
    RunStore store = RunStore::open(run_dirs[i]);
    if (i == 0) animals = store.corpus().animals;
    views.push_back({store.manifest(), store.evals()});
  }
  return compare_models(views, animals, template_id, parse_score_id(score), perspective);
}

}  // namespace animallm
