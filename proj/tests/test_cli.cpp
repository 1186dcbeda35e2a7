#include <doctest.h>

#include <string>

#include "animallm/hash.hpp"
#include "test_support.hpp"

using namespace animallm;
using namespace animallm::testing;

namespace {

CliResult run_cli(const TempDir& tmp, const std::string& args) {
  return run_cli_binary(ANIMALLM_CLI_BIN, tmp, args);
}

std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

const std::string kVerbatim = std::string(ANIMALLM_DATA_DIR) + "/corpus_paper_verbatim.json";

}  // namespace

TEST_CASE("expand prints the published instance count") {
  TempDir tmp;
  auto out_file = tmp.file("instances.jsonl");
  CliResult r = run_cli(tmp, "expand --corpus " + kVerbatim + " --out " + quoted(out_file));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("instances=3264") != std::string::npos);
  CHECK(sorted_lines(out_file).size() == 3264);
}

TEST_CASE("expand with a missing corpus exits 1 and writes nothing") {
  TempDir tmp;
  auto out_file = tmp.file("instances.jsonl");
  CliResult r = run_cli(tmp, "expand --corpus /nonexistent/corpus.json --out " + quoted(out_file));
  CHECK(r.exit_code == 1);
  CHECK_FALSE(std::filesystem::exists(out_file));
}

TEST_CASE("expand of a one-of-each corpus prints 1") {
  TempDir tmp;
  auto corpus = tmp.file("one.json");
  write_all(corpus, make_corpus_json(1, {"dog"}, 1));
  CliResult r = run_cli(tmp, "expand --corpus " + quoted(corpus) + " --out " +
                                 quoted(tmp.file("x.jsonl")));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("instances=1") != std::string::npos);
}

TEST_CASE("generate/evaluate lifecycle with resume and analytics exports") {
  TempDir tmp;
  auto corpus = tmp.file("corpus.json");
  write_all(corpus, make_corpus_json(2, {"dog", "shrimp"}, 2));  // 8 instances
  auto run_dir = tmp.file("run");

  // Fresh generation.
  CliResult gen = run_cli(tmp, "generate --corpus " + quoted(corpus) + " --model mock:7 --repeats 2"
                                   " --seed 3 --run-dir " + quoted(run_dir));
  CHECK(gen.exit_code == 0);
  CHECK(gen.out.find("written=8") != std::string::npos);
  CHECK(gen.out.find("failed=0") != std::string::npos);

  // Re-running without --resume is refused before any side effect.
  CliResult no_resume = run_cli(tmp, "generate --corpus " + quoted(corpus) +
                                         " --model mock:7 --repeats 2 --seed 3 --run-dir " +
                                         quoted(run_dir));
  CHECK(no_resume.exit_code == 1);

  // Resume with matching parameters writes nothing new and leaves bytes
  // untouched.
  std::string before = read_all(run_dir / "responses.jsonl");
  CliResult resume = run_cli(tmp, "generate --corpus " + quoted(corpus) +
                                      " --model mock:7 --repeats 2 --seed 3 --resume --run-dir " +
                                      quoted(run_dir));
  CHECK(resume.exit_code == 0);
  CHECK(resume.out.find("written=0") != std::string::npos);
  CHECK(resume.out.find("skipped=8") != std::string::npos);
  CHECK(read_all(run_dir / "responses.jsonl") == before);

  // Resume with different parameters is a validation error.
  CliResult mismatch = run_cli(tmp, "generate --corpus " + quoted(corpus) +
                                        " --model mock:8 --repeats 2 --seed 3 --resume --run-dir " +
                                        quoted(run_dir));
  CHECK(mismatch.exit_code == 1);

  // Evaluation honors the manifest's repeats.
  CliResult eval = run_cli(tmp, "evaluate --run-dir " + quoted(run_dir));
  CHECK(eval.exit_code == 0);
  CHECK(eval.out.find("written=16") != std::string::npos);
  CHECK(eval.out.find("parse_failures=0") != std::string::npos);

  CliResult eval_again = run_cli(tmp, "evaluate --run-dir " + quoted(run_dir) + " --resume");
  CHECK(eval_again.exit_code == 0);
  CHECK(eval_again.out.find("written=0") != std::string::npos);

  CliResult bad_repeats = run_cli(tmp, "evaluate --run-dir " + quoted(run_dir) + " --repeats 5");
  CHECK(bad_repeats.exit_code == 1);
  CHECK(bad_repeats.err.find("pinned") != std::string::npos);

  // Aggregate export.
  auto agg_csv = tmp.file("agg.csv");
  CliResult agg = run_cli(tmp, "aggregate --run-dir " + quoted(run_dir) +
                                   " --group-by animal,perspective --out " + quoted(agg_csv));
  CHECK(agg.exit_code == 0);
  CHECK(agg.out.find("rows=4") != std::string::npos);  // |A| x |P| groups
  CHECK(read_all(agg_csv).find("animal,perspective,mean_s1") == 0);

  CliResult bad_key = run_cli(tmp, "aggregate --run-dir " + quoted(run_dir) + " --group-by flavor");
  CHECK(bad_key.exit_code == 1);
  CHECK(bad_key.err.find("valid:") != std::string::npos);

  // Heatmap export for one animal.
  auto hm_json = tmp.file("hm.json");
  CliResult hm = run_cli(tmp, "heatmap --run-dir " + quoted(run_dir) +
                                  " --animal shrimp --score s2 --format json --out " +
                                  quoted(hm_json));
  CHECK(hm.exit_code == 0);
  CHECK(hm.out.find("rows=2 cols=2 missing=0") != std::string::npos);

  CliResult hm_bad = run_cli(tmp, "heatmap --run-dir " + quoted(run_dir) + " --animal unicorn");
  CHECK(hm_bad.exit_code == 1);

  // JSON aggregate export.
  auto agg_json = tmp.file("agg.json");
  CliResult aggj = run_cli(tmp, "aggregate --run-dir " + quoted(run_dir) +
                                    " --group-by template --format json --out " + quoted(agg_json));
  CHECK(aggj.exit_code == 0);
  CHECK(read_all(agg_json).find("\"template_id\"") != std::string::npos);

  // Unknown flags are rejected before side effects.
  CliResult unknown = run_cli(tmp, "aggregate --run-dir " + quoted(run_dir) + " --bogus 1");
  CHECK(unknown.exit_code == 1);

  // A path that is not a run directory is a validation error.
  CliResult no_dir = run_cli(tmp, "evaluate --run-dir " + quoted(tmp.file("not-a-run")));
  CHECK(no_dir.exit_code == 1);
}

TEST_CASE("generate with an unregistered provider exits 1") {
  TempDir tmp;
  auto corpus = tmp.file("corpus.json");
  write_all(corpus, make_corpus_json(1, {"dog"}, 1));
  CliResult r = run_cli(tmp, "generate --corpus " + quoted(corpus) +
                                 " --model nosuch:model --run-dir " + quoted(tmp.file("run")));
  CHECK(r.exit_code == 1);
  CHECK_FALSE(std::filesystem::exists(tmp.file("run")));
}

TEST_CASE("transport-wide failure exits 2") {
  TempDir tmp;
  auto corpus = tmp.file("corpus.json");
  write_all(corpus, make_corpus_json(1, {"dog"}, 1));
  CliResult r = run_cli(tmp, "generate --corpus " + quoted(corpus) + " --model fail --run-dir " +
                                 quoted(tmp.file("run")));
  CHECK(r.exit_code == 2);
}

TEST_CASE("garbage evaluator reports a parse failure per response") {
  TempDir tmp;
  auto corpus = tmp.file("corpus.json");
  write_all(corpus, make_corpus_json(2, {"dog"}, 2));  // 4 responses
  auto run_dir = tmp.file("run");
  CliResult gen = run_cli(tmp, "generate --corpus " + quoted(corpus) +
                                   " --model mock:1 --evaluator garbage --run-dir " +
                                   quoted(run_dir));
  CHECK(gen.exit_code == 0);
  CliResult eval = run_cli(tmp, "evaluate --run-dir " + quoted(run_dir));
  CHECK(eval.exit_code == 0);
  CHECK(eval.out.find("written=4") != std::string::npos);
  CHECK(eval.out.find("parse_failures=4") != std::string::npos);
}

TEST_CASE("compare joins two runs over the same corpus") {
  TempDir tmp;
  auto corpus = tmp.file("corpus.json");
  write_all(corpus, make_corpus_json(1, {"dog", "cat"}, 2));
  for (int seed : {1, 2}) {
    std::string dir = quoted(tmp.file("run" + std::to_string(seed)));
    CHECK(run_cli(tmp, "generate --corpus " + quoted(corpus) + " --model mock:" +
                           std::to_string(seed) + " --run-dir " + dir).exit_code == 0);
    CHECK(run_cli(tmp, "evaluate --run-dir " + dir).exit_code == 0);
  }
  auto out = tmp.file("cmp.csv");
  CliResult cmp = run_cli(tmp, "compare --run-dir " + quoted(tmp.file("run1")) + " --run-dir " +
                                   quoted(tmp.file("run2")) + " --template 1 --score s2 --out " +
                                   quoted(out));
  CHECK(cmp.exit_code == 0);
  CHECK(cmp.out.find("models=2 animals=2") != std::string::npos);
  CHECK(read_all(out).find("animal,mock:1,mock:2") == 0);

  // Runs over different corpora refuse to compare.
  auto corpus_b = tmp.file("corpus-b.json");
  write_all(corpus_b, make_corpus_json(1, {"dog", "cat", "ant"}, 2));
  CHECK(run_cli(tmp, "generate --corpus " + quoted(corpus_b) + " --model mock:3 --run-dir " +
                         quoted(tmp.file("run3"))).exit_code == 0);
  CHECK(run_cli(tmp, "evaluate --run-dir " + quoted(tmp.file("run3"))).exit_code == 0);
  CliResult mismatch = run_cli(tmp, "compare --run-dir " + quoted(tmp.file("run1")) +
                                        " --run-dir " + quoted(tmp.file("run3")) + " --template 1");
  CHECK(mismatch.exit_code == 1);
}

TEST_CASE("regen subcommand covers the three scripted outcomes") {
  TempDir tmp;
  auto corpus = tmp.file("corpus.json");
  write_all(corpus, make_corpus_json(1, {"dog"}, 2));

  // Fixed-point evaluator: converges on the first iteration.
  auto fixed_dir = tmp.file("run-fixed");
  CHECK(run_cli(tmp, "generate --corpus " + quoted(corpus) +
                         " --model mock:1 --evaluator const:100 --run-dir " +
                         quoted(fixed_dir)).exit_code == 0);
  CliResult fixed = run_cli(tmp, "regen --run-dir " + quoted(fixed_dir) +
                                     " --template 1 --animal dog --perspective P1 --target 100");
  CHECK(fixed.exit_code == 0);
  CHECK(fixed.out.find("converged=true") != std::string::npos);
  CHECK(fixed.out.find("iterations=1") != std::string::npos);

  // Constant evaluator far from the target: best effort, flagged.
  auto const_dir = tmp.file("run-const");
  CHECK(run_cli(tmp, "generate --corpus " + quoted(corpus) +
                         " --model mock:1 --evaluator const:90 --run-dir " +
                         quoted(const_dir)).exit_code == 0);
  CliResult stuck = run_cli(tmp, "regen --run-dir " + quoted(const_dir) +
                                     " --template 1 --animal dog --perspective P1 --target 50"
                                     " --tolerance 10 --max-iter 3");
  CHECK(stuck.exit_code == 0);
  CHECK(stuck.out.find("converged=false") != std::string::npos);
  CHECK(stuck.out.find("best_achieved=90") != std::string::npos);
  CHECK(stuck.out.find("iterations=3") != std::string::npos);

  // Out-of-range target.
  CliResult bad = run_cli(tmp, "regen --run-dir " + quoted(fixed_dir) +
                                   " --template 1 --animal dog --perspective P1 --target 101");
  CHECK(bad.exit_code == 1);
}
