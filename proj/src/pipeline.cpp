#include "animallm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <thread>

namespace animallm {

RunManifest make_manifest(const RunConfig& config) {
  if (config.repeats < 1) throw ValidationError("repeats must be >= 1");
  if (config.execution < 1) throw ValidationError("execution number must be >= 1");
  if (config.parallelism < 1) throw ValidationError("parallelism must be >= 1");
  if (config.versions.pins_version.empty() || config.versions.eval_version.empty()) {
    throw ValidationError("instruction version tags must be nonempty");
  }
  RunManifest m;
  m.corpus_hash = config.corpus_hash;
  m.generation_model = config.generation_model.id();
  m.evaluator_model = config.evaluator_model.id();
  m.pins_version = config.versions.pins_version;
  m.eval_version = config.versions.eval_version;
  m.repeats = config.repeats;
  m.execution = config.execution;
  m.seed = config.seed;
  m.eval_includes_query = config.eval_includes_query;
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  m.created_at = buf;
  m.manifest_id = m.compute_id();
  return m;
}

void PipelineStateTracker::mark_pending(const RecordKey& key) {
  std::lock_guard<std::mutex> lock(mu_);
  phases_.emplace(key, Phase::Pending);
}

void PipelineStateTracker::advance(const RecordKey& key, Phase phase) {
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = phases_.emplace(key, phase);
  if (inserted) return;
  // Pending -> Responded -> Evaluated, with Failed terminal per attempt.
  auto rank = [](Phase p) {
    switch (p) {
      case Phase::Pending: return 0;
      case Phase::Responded: return 1;
      case Phase::Evaluated: return 2;
      case Phase::Failed: return 3;
    }
    return 0;
  };
  if (rank(phase) < rank(it->second)) {
    throw std::logic_error("pipeline state regression");
  }
  it->second = phase;
}

Phase PipelineStateTracker::phase(const RecordKey& key) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = phases_.find(key);
  return it == phases_.end() ? Phase::Pending : it->second;
}

std::size_t PipelineStateTracker::count(Phase phase) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t n = 0;
  for (const auto& [key, p] : phases_) {
    if (p == phase) ++n;
  }
  return n;
}

std::pair<std::string, std::string> split_answer_reasoning(const std::string& text) {
  auto trim = [](std::string s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return std::string();
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  };

  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string line = text.substr(start, nl == std::string::npos ? std::string::npos : nl - start);
    if (trim(line) == kReasoningDelimiter) {
      std::string answer = trim(text.substr(0, start));
      std::string reasoning =
          nl == std::string::npos ? std::string() : trim(text.substr(nl + 1));
      return {answer, reasoning};
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return {trim(text), ""};
}

namespace {

std::string reasoning_suffix() {
  return std::string("\n\nAfter your answer, add a final line containing exactly \"") +
         kReasoningDelimiter + "\" followed by a brief explanation of the reasoning behind your answer.";
}

std::string payload_directive() {
  return "Answer with a single JSON object in exactly this form, using integer scores:\n"
         "{\"s1_score\": <integer 0-100>, \"s1_justification\": \"<text>\", "
         "\"s2_score\": <integer 0-100>, \"s2_justification\": \"<text>\"}\n"
         "Output only the JSON object.";
}

}  // namespace

ChatRequest build_perspective_instruction(const QueryInstance& instance,
                                          const InstructionVersion& version) {
  (void)version;  // pins-v1 is the only instruction revision so far
  ChatRequest req;
  req.system_text = instance.perspective_text;
  req.user_text = instance.query_text + reasoning_suffix();
  return req;
}

ChatRequest build_eval_instruction(const std::string& animal, const std::string& response_text,
                                   const std::string& reasoning_text, const ScoreGuideline& s1,
                                   const ScoreGuideline& s2, const InstructionVersion& version,
                                   const std::string& query_text) {
  (void)version;  // eval-v1 is the only instruction revision so far
  if (response_text.empty()) throw ValidationError("build_eval_instruction: response_text is empty");

  std::string body;
  body += "Perform an in-depth evaluation for the below Response and Response Reasoning. "
          "Provide justification and an accurate 0-100 score on the following dimensions:\n\n";
  body += render_animal_text(s1.guideline_text, animal) + "\n\n";
  body += render_animal_text(s2.guideline_text, animal) + "\n\n";
  body += "Score Guideline:\n\n";
  body += "Ensure that S1 and S2 scores align accurately with the definitions provided.\n\n";
  if (!query_text.empty()) {
    body += "Query:\n" + query_text + "\n\n";
  }
  body += "Response:\n" + response_text + "\n\n";
  body += "Response Reasoning:\n";
  body += reasoning_text.empty() ? "(none provided)" : reasoning_text;
  body += "\n\n";
  body += payload_directive();

  ChatRequest req;
  req.user_text = std::move(body);
  return req;
}

namespace {

// Workers claim tasks through a shared atomic cursor (each key is processed
// by exactly one worker) and funnel results through the store mutex: the
// contract is at most `parallelism` in-flight provider calls and a single
// writer.
template <typename Task, typename Work>
void run_workers(int parallelism, const std::vector<Task>& tasks, Work work) {
  if (tasks.empty()) return;
  int workers = std::min<int>(parallelism, static_cast<int>(tasks.size()));
  if (workers <= 1) {
    for (const auto& task : tasks) work(task);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = cursor.fetch_add(1);
        if (i >= tasks.size()) return;
        work(tasks[i]);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

GenerationSummary run_generation(const RunConfig& config, ProviderRegistry& providers,
                                 RunStore& store, std::optional<std::size_t> limit) {
  ProviderClient& client = providers.client_for(config.generation_model);
  client.preflight(config.generation_model);

  std::vector<QueryInstance> expansion = expand(config.corpus);
  std::vector<QueryInstance> pending = store.pending_generation(expansion);
  GenerationSummary summary;
  summary.skipped = expansion.size() - pending.size();
  if (limit && pending.size() > *limit) pending.resize(*limit);

  PipelineStateTracker tracker;
  std::mutex store_mu;

  run_workers(config.parallelism, pending, [&](const QueryInstance& inst) {
    RecordKey key{config.generation_model.id(), inst.template_id, inst.animal,
                  inst.perspective_id, config.versions.pins_version, config.execution};
    tracker.mark_pending(key);

    ChatRequest req = build_perspective_instruction(inst, config.versions);
    req.decode = config.generation_model.decode;
    req.decode.seed = config.seed;
    try {
      ChatResponse res = client.complete(config.generation_model, req);
      auto [answer, reasoning] = split_answer_reasoning(res.text);

      ResponseRecord record;
      record.key = key;
      record.query_text = inst.query_text;
      record.perspective_text = inst.perspective_text;
      record.response_text = answer;
      record.reasoning_text = reasoning;
      record.finish_reason = res.finish_reason;
      record.latency_ms = res.latency.count();
      record.attempt_count = res.attempt_count;

      std::lock_guard<std::mutex> lock(store_mu);
      if (store.append_response(record) == AppendResult::Accepted) {
        ++summary.written;
      } else {
        ++summary.skipped;
      }
      tracker.advance(key, Phase::Responded);
    } catch (const ProviderError& err) {
      tracker.advance(key, Phase::Failed);
      std::lock_guard<std::mutex> lock(store_mu);
      ++summary.failed;
      if (summary.first_error.empty()) summary.first_error = err.what();
    }
  });

  return summary;
}

EvaluationSummary run_evaluation(const RunConfig& config, ProviderRegistry& providers,
                                 RunStore& store, std::optional<std::size_t> limit) {
  ProviderClient& client = providers.client_for(config.evaluator_model);
  client.preflight(config.evaluator_model);

  const ScoreGuideline& s1 = config.corpus.guideline("S1");
  const ScoreGuideline& s2 = config.corpus.guideline("S2");

  struct EvalTask {
    RecordKey key;
    int repeat = 1;
  };
  std::vector<EvalTask> tasks;
  std::size_t total_expected = store.responses().size() * static_cast<std::size_t>(config.repeats);
  for (const auto& deficit : store.pending_evaluation(config.versions.eval_version, config.repeats)) {
    for (int repeat : deficit.missing_repeats) tasks.push_back({deficit.key, repeat});
  }

  EvaluationSummary summary;
  summary.skipped = total_expected - tasks.size();
  if (limit && tasks.size() > *limit) tasks.resize(*limit);

  std::mutex store_mu;

  run_workers(config.parallelism, tasks, [&](const EvalTask& task) {
    const ResponseRecord* response = store.find_response(task.key);
    if (response == nullptr) return;  // cannot happen: tasks derive from stored responses

    EvalRecord record;
    record.key = EvalKey{task.key, config.versions.eval_version, task.repeat};
    record.evaluator_model = config.evaluator_model.id();

    try {
      if (response->response_text.empty()) {
        // Nothing to evaluate (e.g. an empty refusal); keep the counting
        // identity with an explicit missing-score record.
        record.parse_mode = ParseMode::Failed;
      } else {
        ChatRequest req = build_eval_instruction(
            task.key.animal, response->response_text, response->reasoning_text, s1, s2,
            config.versions, config.eval_includes_query ? response->query_text : std::string());
        req.decode = config.evaluator_model.decode;
        req.decode.seed = config.seed;
        ChatResponse res = client.complete(config.evaluator_model, req);
        ParseOutcome outcome = parse_scores(res.text);
        record.score = outcome.score;
        record.parse_mode = outcome.parse_mode;
        record.raw_evaluator_text = res.text;
      }

      std::lock_guard<std::mutex> lock(store_mu);
      if (store.append_eval(record) == AppendResult::Accepted) {
        ++summary.written;
        if (record.parse_mode == ParseMode::Failed) ++summary.parse_failures;
      } else {
        ++summary.skipped;
      }
    } catch (const ProviderError& err) {
      std::lock_guard<std::mutex> lock(store_mu);
      ++summary.failed;
      if (summary.first_error.empty()) summary.first_error = err.what();
    }
  });

  return summary;
}

RegenReport regenerate_at_score(const QueryInstance& instance, int target_s2,
                                const RunConfig& config, ProviderRegistry& providers,
                                RunStore& store, int tolerance, int max_iterations) {
  if (target_s2 < kScoreMin || target_s2 > kScoreMax) {
    throw ValidationError("target score " + std::to_string(target_s2) + " outside 0..100");
  }
  if (tolerance < 0) throw ValidationError("tolerance must be >= 0");
  if (max_iterations < 1) throw ValidationError("max iterations must be >= 1");

  ProviderClient& generator = providers.client_for(config.generation_model);
  ProviderClient& evaluator = providers.client_for(config.evaluator_model);
  generator.preflight(config.generation_model);
  evaluator.preflight(config.evaluator_model);

  const ScoreGuideline& s1 = config.corpus.guideline("S1");
  const ScoreGuideline& s2 = config.corpus.guideline("S2");

  RegenReport report;
  report.target_s2 = target_s2;
  report.tolerance = tolerance;

  long best_distance = -1;
  for (int attempt = 1; attempt <= max_iterations; ++attempt) {
    ChatRequest gen_req;
    gen_req.system_text = instance.perspective_text;
    gen_req.user_text = instance.query_text +
                        "\n\nAnswer the query above with a response that would receive Score S2 = " +
                        std::to_string(target_s2) + " under the following guideline:\n" +
                        render_animal_text(s2.guideline_text, instance.animal) + reasoning_suffix();
    gen_req.decode = config.generation_model.decode;
    // Vary the decode seed per attempt so deterministic providers still
    // explore distinct candidates.
    gen_req.decode.seed = config.seed + attempt;

    ChatResponse gen_res = generator.complete(config.generation_model, gen_req);
    auto [answer, reasoning] = split_answer_reasoning(gen_res.text);

    RegenAttemptRecord record;
    record.attempt = attempt;
    record.target_s2 = target_s2;
    record.template_id = instance.template_id;
    record.animal = instance.animal;
    record.perspective_id = instance.perspective_id;
    record.model = config.generation_model.id();
    record.response_text = answer;
    record.reasoning_text = reasoning;

    if (!answer.empty()) {
      ChatRequest eval_req = build_eval_instruction(
          instance.animal, answer, reasoning, s1, s2, config.versions,
          config.eval_includes_query ? instance.query_text : std::string());
      eval_req.decode = config.evaluator_model.decode;
      eval_req.decode.seed = config.seed + attempt;
      ChatResponse eval_res = evaluator.complete(config.evaluator_model, eval_req);
      ParseOutcome outcome = parse_scores(eval_res.text);
      record.score = outcome.score;
      record.parse_mode = outcome.parse_mode;
      record.raw_evaluator_text = eval_res.text;
    }

    store.append_regen(record);
    report.attempts.push_back(record);
    report.iterations = attempt;

    long distance = record.score.s2 ? std::labs(*record.score.s2 - target_s2)
                                    : static_cast<long>(kScoreMax) + 1;
    if (best_distance < 0 || distance < best_distance) {
      best_distance = distance;
      report.best_index = report.attempts.size() - 1;
    }
    if (record.score.s2 && distance <= tolerance) {
      report.converged = true;
      break;
    }
  }
  return report;
}

}  // namespace animallm
