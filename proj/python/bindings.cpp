#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "animallm/workflows.hpp"

namespace py = pybind11;
using namespace animallm;

namespace {

py::dict summary_dict(const GenerationSummary& s) {
  py::dict d;
  d["written"] = s.written;
  d["skipped"] = s.skipped;
  d["failed"] = s.failed;
  return d;
}

py::dict summary_dict(const EvaluationSummary& s) {
  py::dict d;
  d["written"] = s.written;
  d["skipped"] = s.skipped;
  d["failed"] = s.failed;
  d["parse_failures"] = s.parse_failures;
  return d;
}

py::object opt_int(const std::optional<int>& v) {
  if (v) return py::int_(*v);
  return py::none();
}

py::object opt_double(const std::optional<double>& v) {
  if (v) return py::float_(*v);
  return py::none();
}

py::list aggregate_rows(const AggregateTable& table) {
  py::list rows;
  for (const auto& row : table.rows) {
    py::dict d;
    for (std::size_t i = 0; i < table.group_keys.size(); ++i) {
      const GroupValue& v = row.values[i];
      std::string name = to_string(table.group_keys[i]);
      if (std::holds_alternative<std::int64_t>(v)) {
        d[name.c_str()] = std::get<std::int64_t>(v);
      } else {
        d[name.c_str()] = std::get<std::string>(v);
      }
    }
    d["mean_s1"] = opt_double(row.mean_s1);
    d["mean_s2"] = opt_double(row.mean_s2);
    d["pooled_mean"] = opt_double(row.pooled_mean);
    d["n_s1"] = row.n_s1;
    d["n_s2"] = row.n_s2;
    rows.append(d);
  }
  return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Animal-consideration evaluation harness: corpus expansion, model runs, "
            "S1/S2 scoring, and analytics over stored runs.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<InputTemplate>(m, "InputTemplate")
      .def(py::init<int, std::string>(), py::arg("id"), py::arg("text"))
      .def_readonly("id", &InputTemplate::id)
      .def_readonly("text", &InputTemplate::text);

  py::class_<Perspective>(m, "Perspective")
      .def_readonly("id", &Perspective::id)
      .def_readonly("label", &Perspective::label)
      .def_readonly("definition", &Perspective::definition);

  py::class_<QueryInstance>(m, "QueryInstance")
      .def_readonly("template_id", &QueryInstance::template_id)
      .def_readonly("animal", &QueryInstance::animal)
      .def_readonly("perspective_id", &QueryInstance::perspective_id)
      .def_readonly("query_text", &QueryInstance::query_text)
      .def_readonly("perspective_text", &QueryInstance::perspective_text);

  py::class_<Corpus>(m, "Corpus")
      .def_readonly("label", &Corpus::label)
      .def_readonly("templates", &Corpus::templates)
      .def_readonly("animals", &Corpus::animals)
      .def_readonly("perspectives", &Corpus::perspectives);

  py::class_<EvalScore>(m, "EvalScore")
      .def_property_readonly("s1", [](const EvalScore& s) { return opt_int(s.s1); })
      .def_property_readonly("s2", [](const EvalScore& s) { return opt_int(s.s2); })
      .def_readonly("s1_justification", &EvalScore::s1_justification)
      .def_readonly("s2_justification", &EvalScore::s2_justification);

  py::class_<ParseOutcome>(m, "ParseOutcome")
      .def_readonly("score", &ParseOutcome::score)
      .def_property_readonly("parse_mode",
                             [](const ParseOutcome& o) { return to_string(o.parse_mode); });

  m.def("load_corpus", [](const std::string& path) { return load_corpus(path); },
        py::arg("path"), "Load and validate a corpus JSON file.");
  m.def("render_query", &render_query, py::arg("template"), py::arg("animal"),
        "Substitute every {animal} occurrence in a template.");
  m.def("expand", &expand, py::arg("corpus"),
        "Deterministic Cartesian expansion into query instances.");
  m.def("parse_scores", &parse_scores, py::arg("evaluator_text"),
        "Extract S1/S2 scores and justifications from evaluator output.");
  m.def("validate_score_range",
        [](std::int64_t v) { return opt_int(validate_score_range(v)); }, py::arg("value"));
  m.def("mock_complete",
        [](std::int64_t seed, const std::string& system_text, const std::string& user_text) {
          ChatRequest req;
          req.system_text = system_text;
          req.user_text = user_text;
          return mock_complete(seed, req).text;
        },
        py::arg("seed"), py::arg("system_text"), py::arg("user_text"),
        "Deterministic mock provider output for a request.");

  m.def("generate_run",
        [](const std::string& corpus_path, const std::string& run_dir, const std::string& model,
           const std::string& evaluator, const std::string& pins_version,
           const std::string& eval_version, int repeats, int execution, int parallelism,
           std::int64_t seed, bool resume) {
          GenerateOptions options;
          options.corpus_path = corpus_path;
          options.run_dir = run_dir;
          options.model = model;
          options.evaluator = evaluator;
          options.pins_version = pins_version;
          options.eval_version = eval_version;
          options.repeats = repeats;
          options.execution = execution;
          options.parallelism = parallelism;
          options.seed = seed;
          options.resume = resume;
          ProviderRegistry providers = ProviderRegistry::with_default_providers();
          GenerateResult result = generate_workflow(options, providers);
          py::dict d = summary_dict(result.summary);
          d["manifest_id"] = result.manifest_id;
          return d;
        },
        py::arg("corpus_path"), py::arg("run_dir"), py::arg("model"), py::arg("evaluator") = "",
        py::arg("pins_version") = "pins-v1", py::arg("eval_version") = "eval-v1",
        py::arg("repeats") = 1, py::arg("execution") = 1, py::arg("parallelism") = 1,
        py::arg("seed") = 0, py::arg("resume") = false,
        "Create or resume a run directory and collect model responses.");

  m.def("evaluate_run",
        [](const std::string& run_dir, int parallelism) {
          EvaluateOptions options;
          options.run_dir = run_dir;
          options.parallelism = parallelism;
          ProviderRegistry providers = ProviderRegistry::with_default_providers();
          return summary_dict(evaluate_workflow(options, providers));
        },
        py::arg("run_dir"), py::arg("parallelism") = 1,
        "Score stored responses; repeats/evaluator come from the manifest.");

  m.def("aggregate",
        [](const std::string& run_dir, const std::vector<std::string>& group_by) {
          return aggregate_rows(aggregate_workflow(run_dir, group_by));
        },
        py::arg("run_dir"), py::arg("group_by"),
        "Grouped mean scores; one dict per row.");

  m.def("heatmap",
        [](const std::string& run_dir, const std::string& animal, const std::string& score,
           const std::string& perspective) {
          HeatmapMatrix matrix = heatmap_workflow(run_dir, animal, score, perspective);
          py::dict d;
          d["animal"] = matrix.animal;
          d["rows"] = matrix.template_ids;
          d["repeats"] = matrix.repeats;
          py::list cells;
          for (const auto& row : matrix.cells) {
            py::list r;
            for (const auto& cell : row) r.append(opt_int(cell));
            cells.append(r);
          }
          d["cells"] = cells;
          d["missing"] = matrix.missing_count();
          return d;
        },
        py::arg("run_dir"), py::arg("animal"), py::arg("score") = "s2",
        py::arg("perspective") = "P1");

  m.def("clusters",
        [](const std::string& run_dir, const std::string& score) {
          RunStore store = RunStore::open(run_dir);
          py::list rows;
          for (const auto& c : cluster_repeats(store.evals(), parse_score_id(score))) {
            py::dict d;
            d["template_id"] = c.key.template_id;
            d["animal"] = c.key.animal;
            d["perspective_id"] = c.key.perspective_id;
            d["model"] = c.key.model;
            d["modal_score"] = opt_int(c.modal_score);
            d["mode_fraction"] = c.mode_fraction;
            d["distinct_values"] = c.distinct_values;
            d["missing_count"] = c.missing_count;
            rows.append(d);
          }
          return rows;
        },
        py::arg("run_dir"), py::arg("score") = "s2",
        "Repeated-evaluation consistency per response key.");

  m.def("compare",
        [](const std::vector<std::string>& run_dirs, int template_id, const std::string& score,
           const std::string& perspective) {
          ModelComparison c = compare_workflow(run_dirs, template_id, score, perspective);
          py::dict d;
          d["template_id"] = c.template_id;
          d["models"] = c.models;
          py::list series;
          for (const auto& row : c.rows) {
            py::dict r;
            r["animal"] = row.animal;
            py::list values;
            for (const auto& v : row.values) values.append(opt_double(v));
            r["values"] = values;
            series.append(r);
          }
          d["series"] = series;
          return d;
        },
        py::arg("run_dirs"), py::arg("template_id"), py::arg("score") = "s2",
        py::arg("perspective") = "P1");

  m.def("regenerate",
        [](const std::string& run_dir, int template_id, const std::string& animal,
           const std::string& perspective, int target, int tolerance, int max_iter) {
          RegenOptions options;
          options.run_dir = run_dir;
          options.template_id = template_id;
          options.animal = animal;
          options.perspective_id = perspective;
          options.target_s2 = target;
          options.tolerance = tolerance;
          options.max_iterations = max_iter;
          ProviderRegistry providers = ProviderRegistry::with_default_providers();
          RegenReport report = regen_workflow(options, providers);
          py::dict d;
          d["converged"] = report.converged;
          d["iterations"] = report.iterations;
          d["target"] = report.target_s2;
          d["best_achieved"] = opt_int(report.best().score.s2);
          py::list achieved;
          for (const auto& attempt : report.attempts) achieved.append(opt_int(attempt.score.s2));
          d["achieved"] = achieved;
          return d;
        },
        py::arg("run_dir"), py::arg("template_id"), py::arg("animal"), py::arg("perspective"),
        py::arg("target"), py::arg("tolerance") = kDefaultRegenTolerance,
        py::arg("max_iter") = kDefaultRegenMaxIterations,
        "Regenerate one instance until its evaluated S2 lands within tolerance of target.");
}
