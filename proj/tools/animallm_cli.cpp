#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "animallm/workflows.hpp"

namespace {

using namespace animallm;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw StorageError("failed while writing '" + path + "'");
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

int run_expand(const std::string& corpus_path, const std::string& out_path) {
  Corpus corpus = load_corpus(corpus_path);
  std::vector<QueryInstance> instances = expand(corpus);

  std::ostringstream lines;
  for (const auto& inst : instances) {
    nlohmann::json j{{"template_id", inst.template_id},
                     {"animal", inst.animal},
                     {"perspective_id", inst.perspective_id},
                     {"query_text", inst.query_text},
                     {"perspective_text", inst.perspective_text}};
    lines << j.dump() << '\n';
  }
  write_output(out_path, lines.str());
  std::cout << "instances=" << instances.size() << "\n";
  return kExitOk;
}

int run_generate(const GenerateOptions& options) {
  ProviderRegistry providers = ProviderRegistry::with_default_providers();
  GenerateResult result = generate_workflow(options, providers);
  const GenerationSummary& s = result.summary;
  std::cout << "manifest=" << result.manifest_id << " written=" << s.written
            << " skipped=" << s.skipped << " failed=" << s.failed << "\n";
  if (s.failed > 0) {
    std::cerr << "first error: " << s.first_error << "\n";
    if (s.written == 0) return kExitRuntime;  // every attempted instance failed
  }
  return kExitOk;
}

int run_evaluate(const EvaluateOptions& options) {
  ProviderRegistry providers = ProviderRegistry::with_default_providers();
  EvaluationSummary s = evaluate_workflow(options, providers);
  std::cout << "written=" << s.written << " skipped=" << s.skipped << " failed=" << s.failed
            << " parse_failures=" << s.parse_failures << "\n";
  if (s.failed > 0) {
    std::cerr << "first error: " << s.first_error << "\n";
    if (s.written == 0) return kExitRuntime;
  }
  return kExitOk;
}

int run_regen(const RegenOptions& options) {
  ProviderRegistry providers = ProviderRegistry::with_default_providers();
  RegenReport report = regen_workflow(options, providers);
  for (const auto& attempt : report.attempts) {
    std::cout << "iteration=" << attempt.attempt << " achieved="
              << (attempt.score.s2 ? std::to_string(*attempt.score.s2) : std::string("missing"))
              << "\n";
  }
  const RegenAttemptRecord& best = report.best();
  std::cout << "converged=" << (report.converged ? "true" : "false") << " target="
            << report.target_s2 << " best_achieved="
            << (best.score.s2 ? std::to_string(*best.score.s2) : std::string("missing"))
            << " iterations=" << report.iterations << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"animallm: expands animal/perspective query templates over language models,\n"
               "scores responses for truthfulness (S1) and animal consideration (S2), and\n"
               "analyzes the stored results."};
  app.require_subcommand(1);

  // expand
  auto* expand_cmd = app.add_subcommand("expand", "Expand a corpus into query instances");
  std::string expand_corpus, expand_out;
  expand_cmd->add_option("--corpus", expand_corpus, "Corpus JSON file")->required();
  expand_cmd->add_option("--out", expand_out, "Output JSONL path (stdout when omitted)");

  // generate
  auto* generate_cmd = app.add_subcommand("generate", "Run the generation model over a corpus");
  GenerateOptions gen;
  generate_cmd->add_option("--corpus", gen.corpus_path, "Corpus JSON file")->required();
  generate_cmd->add_option("--model", gen.model, "Generation model, e.g. mock:7 or openai:gpt-4-1106-preview")->required();
  generate_cmd->add_option("--evaluator", gen.evaluator, "Evaluator model (defaults to --model)");
  generate_cmd->add_option("--pins-version", gen.pins_version, "Perspective instruction version tag");
  generate_cmd->add_option("--eval-version", gen.eval_version, "Evaluation instruction version tag");
  generate_cmd->add_option("--repeats", gen.repeats, "Evaluation repeats R pinned in the manifest")
      ->check(CLI::PositiveNumber);
  generate_cmd->add_option("--execution", gen.execution, "Execution number e")->check(CLI::PositiveNumber);
  generate_cmd->add_option("--parallelism", gen.parallelism, "Concurrent workers")->check(CLI::PositiveNumber);
  generate_cmd->add_option("--seed", gen.seed, "Run seed (mock runs)");
  generate_cmd->add_option("--run-dir", gen.run_dir, "Run directory")->required();
  generate_cmd->add_flag("--resume", gen.resume, "Continue an existing run with the same parameters");

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score stored responses with the evaluator model");
  EvaluateOptions eval;
  std::string eval_evaluator, eval_version;
  int eval_repeats = 0;
  evaluate_cmd->add_option("--run-dir", eval.run_dir, "Run directory")->required();
  evaluate_cmd->add_option("--evaluator", eval_evaluator, "Must match the manifest when given");
  evaluate_cmd->add_option("--eval-version", eval_version, "Must match the manifest when given");
  evaluate_cmd->add_option("--repeats", eval_repeats, "Must match the manifest when given")
      ->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--parallelism", eval.parallelism, "Concurrent workers")->check(CLI::PositiveNumber);
  evaluate_cmd->add_flag("--resume", eval.resume, "Accepted for symmetry; evaluation always resumes");

  // aggregate
  auto* aggregate_cmd = app.add_subcommand("aggregate", "Grouped mean scores over stored evals");
  std::string agg_run_dir, agg_group_by = "animal", agg_format = "csv", agg_out;
  aggregate_cmd->add_option("--run-dir", agg_run_dir, "Run directory")->required();
  aggregate_cmd->add_option("--group-by", agg_group_by, "Comma list of animal,perspective,template,model");
  aggregate_cmd->add_option("--format", agg_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  aggregate_cmd->add_option("--out", agg_out, "Output path (stdout when omitted)");

  // heatmap
  auto* heatmap_cmd = app.add_subcommand("heatmap", "Template x repeat score matrix for one animal");
  std::string hm_run_dir, hm_animal, hm_score = "s2", hm_perspective = "P1", hm_format = "csv", hm_out;
  heatmap_cmd->add_option("--run-dir", hm_run_dir, "Run directory")->required();
  heatmap_cmd->add_option("--animal", hm_animal, "Animal name")->required();
  heatmap_cmd->add_option("--score", hm_score, "s1 or s2");
  heatmap_cmd->add_option("--perspective", hm_perspective, "Perspective id (default P1)");
  heatmap_cmd->add_option("--format", hm_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  heatmap_cmd->add_option("--out", hm_out, "Output path (stdout when omitted)");

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Per-animal score series across runs");
  std::vector<std::string> cmp_run_dirs;
  std::string cmp_score = "s2", cmp_perspective = "P1", cmp_format = "csv", cmp_out;
  int cmp_template = 0;
  compare_cmd->add_option("--run-dir", cmp_run_dirs, "Run directory (repeat for each run)")
      ->required()
      ->expected(-2);
  compare_cmd->add_option("--template", cmp_template, "Template id")->required();
  compare_cmd->add_option("--score", cmp_score, "s1 or s2");
  compare_cmd->add_option("--perspective", cmp_perspective, "Perspective id (default P1)");
  compare_cmd->add_option("--format", cmp_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  compare_cmd->add_option("--out", cmp_out, "Output path (stdout when omitted)");

  // regen
  auto* regen_cmd = app.add_subcommand("regen", "Regenerate one instance targeting an S2 score");
  RegenOptions regen;
  regen_cmd->add_option("--run-dir", regen.run_dir, "Run directory")->required();
  regen_cmd->add_option("--template", regen.template_id, "Template id")->required();
  regen_cmd->add_option("--animal", regen.animal, "Animal name")->required();
  regen_cmd->add_option("--perspective", regen.perspective_id, "Perspective id")->required();
  regen_cmd->add_option("--target", regen.target_s2, "Target S2 score 0..100")->required();
  regen_cmd->add_option("--tolerance", regen.tolerance, "Convergence tolerance in points");
  regen_cmd->add_option("--max-iter", regen.max_iterations, "Maximum regeneration attempts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (expand_cmd->parsed()) return run_expand(expand_corpus, expand_out);
    if (generate_cmd->parsed()) return run_generate(gen);
    if (evaluate_cmd->parsed()) {
      if (evaluate_cmd->count("--evaluator")) eval.evaluator = eval_evaluator;
      if (evaluate_cmd->count("--eval-version")) eval.eval_version = eval_version;
      if (evaluate_cmd->count("--repeats")) eval.repeats = eval_repeats;
      return run_evaluate(eval);
    }
    if (aggregate_cmd->parsed()) {
      AggregateTable table = aggregate_workflow(agg_run_dir, split_commas(agg_group_by));
      write_output(agg_out, agg_format == "json" ? to_json_string(table) : to_csv(table));
      std::cout << "rows=" << table.rows.size() << "\n";
      return kExitOk;
    }
    if (heatmap_cmd->parsed()) {
      HeatmapMatrix matrix = heatmap_workflow(hm_run_dir, hm_animal, hm_score, hm_perspective);
      write_output(hm_out, hm_format == "json" ? to_json_string(matrix) : to_csv(matrix));
      std::cout << "rows=" << matrix.template_ids.size() << " cols=" << matrix.repeats
                << " missing=" << matrix.missing_count() << "\n";
      return kExitOk;
    }
    if (compare_cmd->parsed()) {
      ModelComparison comparison =
          compare_workflow(cmp_run_dirs, cmp_template, cmp_score, cmp_perspective);
      write_output(cmp_out, cmp_format == "json" ? to_json_string(comparison) : to_csv(comparison));
      std::cout << "models=" << comparison.models.size() << " animals=" << comparison.rows.size()
                << "\n";
      return kExitOk;
    }
    if (regen_cmd->parsed()) return run_regen(regen);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
