#include "animallm/storage.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "animallm/hash.hpp"

namespace animallm {

using json = nlohmann::json;

namespace {

// Model output is not guaranteed to be valid UTF-8; invalid sequences are
// replaced (deterministically) rather than aborting the append.
std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

constexpr const char* kManifestFile = "manifest.json";
constexpr const char* kCorpusFile = "corpus.json";
constexpr const char* kResponsesFile = "responses.jsonl";
constexpr const char* kEvalsFile = "evals.jsonl";
constexpr const char* kRegenFile = "regen.jsonl";

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write '" + path.string() + "'");
  out << bytes;
  out.flush();
  if (!out) throw StorageError("failed while writing '" + path.string() + "'");
}

json key_to_json(const RecordKey& key) {
  return json{{"model", key.model},
              {"template_id", key.template_id},
              {"animal", key.animal},
              {"perspective_id", key.perspective_id},
              {"pins_version", key.pins_version},
              {"execution", key.execution}};
}

RecordKey key_from_json(const json& j) {
  RecordKey key;
  key.model = j.at("model").get<std::string>();
  key.template_id = j.at("template_id").get<int>();
  key.animal = j.at("animal").get<std::string>();
  key.perspective_id = j.at("perspective_id").get<std::string>();
  key.pins_version = j.at("pins_version").get<std::string>();
  key.execution = j.at("execution").get<int>();
  return key;
}

json score_to_json(const EvalScore& score) {
  return json{{"s1", score.s1 ? json(*score.s1) : json(nullptr)},
              {"s2", score.s2 ? json(*score.s2) : json(nullptr)},
              {"s1_justification", score.s1_justification},
              {"s2_justification", score.s2_justification}};
}

EvalScore score_from_json(const json& j) {
  EvalScore score;
  if (j.contains("s1") && j.at("s1").is_number_integer()) score.s1 = j.at("s1").get<int>();
  if (j.contains("s2") && j.at("s2").is_number_integer()) score.s2 = j.at("s2").get<int>();
  score.s1_justification = j.value("s1_justification", "");
  score.s2_justification = j.value("s2_justification", "");
  return score;
}

// Splits into complete (newline-terminated) lines; a trailing fragment with
// no newline is returned separately so callers can treat it as torn.
std::pair<std::vector<std::string>, std::string> split_lines(const std::string& bytes) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < bytes.size()) {
    std::size_t nl = bytes.find('\n', start);
    if (nl == std::string::npos) return {std::move(lines), bytes.substr(start)};
    lines.push_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  return {std::move(lines), ""};
}

// Parses a jsonl file, discarding a torn final line (crash artifact) with a
// warning. Unparseable content anywhere else is corruption and raises.
template <typename Record>
std::vector<Record> load_jsonl(const std::filesystem::path& path,
                               Record (*from_line)(const std::string&)) {
  std::vector<Record> records;
  if (!std::filesystem::exists(path)) return records;
  std::string bytes = read_file(path);
  auto [lines, torn] = split_lines(bytes);
  std::size_t keep_bytes = bytes.size() - torn.size();

  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      records.push_back(from_line(lines[i]));
    } catch (const std::exception& err) {
      if (i + 1 == lines.size() && torn.empty()) {
        // A truncation can also land exactly on a '\n' boundary inside a
        // record that itself contained the byte; treat a bad final line
        // like a torn tail.
        std::cerr << "warning: " << path.string() << ": discarding unreadable final line\n";
        keep_bytes -= lines[i].size() + 1;
        break;
      }
      throw StorageError(path.string() + " line " + std::to_string(i + 1) + ": " + err.what());
    }
  }
  if (!torn.empty()) {
    std::cerr << "warning: " << path.string() << ": discarding torn trailing line ("
              << torn.size() << " bytes)\n";
  }
  if (keep_bytes != bytes.size()) {
    std::filesystem::resize_file(path, keep_bytes);
  }
  return records;
}

std::ofstream open_append(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw StorageError("cannot open '" + path.string() + "' for append");
  return out;
}

void append_line(std::ofstream& out, const std::filesystem::path& path, const std::string& line) {
  out << line << '\n';
  out.flush();
  if (!out) throw StorageError("append to '" + path.string() + "' failed");
}

}  // namespace

std::string RunManifest::compute_id() const {
  std::ostringstream canonical;
  canonical << corpus_hash << '\n'
            << generation_model << '\n'
            << evaluator_model << '\n'
            << pins_version << '\n'
            << eval_version << '\n'
            << repeats << '\n'
            << execution << '\n'
            << seed << '\n'
            << (eval_includes_query ? 1 : 0) << '\n';
  return sha256_hex(canonical.str());
}

std::string manifest_to_json(const RunManifest& m) {
  json j{{"manifest_id", m.manifest_id},
         {"corpus_hash", m.corpus_hash},
         {"generation_model", m.generation_model},
         {"evaluator_model", m.evaluator_model},
         {"pins_version", m.pins_version},
         {"eval_version", m.eval_version},
         {"repeats", m.repeats},
         {"execution", m.execution},
         {"seed", m.seed},
         {"eval_includes_query", m.eval_includes_query},
         {"created_at", m.created_at}};
  return j.dump(2);
}

RunManifest manifest_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw StorageError("manifest.json is not valid JSON");
  RunManifest m;
  try {
    m.manifest_id = j.at("manifest_id").get<std::string>();
    m.corpus_hash = j.at("corpus_hash").get<std::string>();
    m.generation_model = j.at("generation_model").get<std::string>();
    m.evaluator_model = j.at("evaluator_model").get<std::string>();
    m.pins_version = j.at("pins_version").get<std::string>();
    m.eval_version = j.at("eval_version").get<std::string>();
    m.repeats = j.at("repeats").get<int>();
    m.execution = j.at("execution").get<int>();
    m.seed = j.at("seed").get<std::int64_t>();
    m.eval_includes_query = j.at("eval_includes_query").get<bool>();
    m.created_at = j.value("created_at", "");
  } catch (const json::exception& err) {
    throw StorageError(std::string("manifest.json: ") + err.what());
  }
  if (m.manifest_id != m.compute_id()) {
    throw StorageError("manifest_id does not match the manifest fields");
  }
  return m;
}

std::string response_to_json_line(const ResponseRecord& r) {
  json j = key_to_json(r.key);
  j["query_text"] = r.query_text;
  j["perspective_text"] = r.perspective_text;
  j["response_text"] = r.response_text;
  j["reasoning_text"] = r.reasoning_text;
  j["finish_reason"] = to_string(r.finish_reason);
  j["latency_ms"] = r.latency_ms;
  j["attempt_count"] = r.attempt_count;
  return dump_line(j);
}

ResponseRecord response_from_json_line(const std::string& line) {
  json j = json::parse(line);
  ResponseRecord r;
  r.key = key_from_json(j);
  r.query_text = j.at("query_text").get<std::string>();
  r.perspective_text = j.at("perspective_text").get<std::string>();
  r.response_text = j.at("response_text").get<std::string>();
  r.reasoning_text = j.at("reasoning_text").get<std::string>();
  r.finish_reason = finish_reason_from_string(j.at("finish_reason").get<std::string>());
  r.latency_ms = j.at("latency_ms").get<std::int64_t>();
  r.attempt_count = j.at("attempt_count").get<int>();
  return r;
}

std::string eval_to_json_line(const EvalRecord& r) {
  json j = key_to_json(r.key.response);
  j["eval_version"] = r.key.eval_version;
  j["repeat_index"] = r.key.repeat_index;
  j["score"] = score_to_json(r.score);
  j["parse_mode"] = to_string(r.parse_mode);
  j["evaluator_model"] = r.evaluator_model;
  j["raw_evaluator_text"] = r.raw_evaluator_text;
  return dump_line(j);
}

EvalRecord eval_from_json_line(const std::string& line) {
  json j = json::parse(line);
  EvalRecord r;
  r.key.response = key_from_json(j);
  r.key.eval_version = j.at("eval_version").get<std::string>();
  r.key.repeat_index = j.at("repeat_index").get<int>();
  r.score = score_from_json(j.at("score"));
  r.parse_mode = parse_mode_from_string(j.at("parse_mode").get<std::string>());
  r.evaluator_model = j.at("evaluator_model").get<std::string>();
  r.raw_evaluator_text = j.at("raw_evaluator_text").get<std::string>();
  return r;
}

namespace {

std::string regen_to_json_line(const RegenAttemptRecord& r) {
  json j{{"attempt", r.attempt},
         {"target_s2", r.target_s2},
         {"template_id", r.template_id},
         {"animal", r.animal},
         {"perspective_id", r.perspective_id},
         {"model", r.model},
         {"response_text", r.response_text},
         {"reasoning_text", r.reasoning_text},
         {"score", score_to_json(r.score)},
         {"parse_mode", to_string(r.parse_mode)},
         {"raw_evaluator_text", r.raw_evaluator_text}};
  return dump_line(j);
}

RegenAttemptRecord regen_from_json_line(const std::string& line) {
  json j = json::parse(line);
  RegenAttemptRecord r;
  r.attempt = j.at("attempt").get<int>();
  r.target_s2 = j.at("target_s2").get<int>();
  r.template_id = j.at("template_id").get<int>();
  r.animal = j.at("animal").get<std::string>();
  r.perspective_id = j.at("perspective_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.response_text = j.at("response_text").get<std::string>();
  r.reasoning_text = j.at("reasoning_text").get<std::string>();
  r.score = score_from_json(j.at("score"));
  r.parse_mode = parse_mode_from_string(j.at("parse_mode").get<std::string>());
  r.raw_evaluator_text = j.at("raw_evaluator_text").get<std::string>();
  return r;
}

}  // namespace

void canonical_sort(std::vector<ResponseRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const ResponseRecord& a, const ResponseRecord& b) { return a.key < b.key; });
}

void canonical_sort(std::vector<EvalRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const EvalRecord& a, const EvalRecord& b) { return a.key < b.key; });
}

bool RunStore::exists(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / kManifestFile);
}

RunStore RunStore::create(const std::filesystem::path& dir, const RunManifest& manifest,
                          const std::string& corpus_bytes) {
  if (exists(dir)) throw StorageError("run directory '" + dir.string() + "' already exists");
  if (manifest.manifest_id != manifest.compute_id()) {
    throw StorageError("manifest_id does not match the manifest fields");
  }
  if (sha256_hex(corpus_bytes) != manifest.corpus_hash) {
    throw StorageError("corpus bytes do not match manifest corpus_hash");
  }
  std::filesystem::create_directories(dir);
  write_file(dir / kCorpusFile, corpus_bytes);
  write_file(dir / kManifestFile, manifest_to_json(manifest));
  return open(dir);
}

RunStore RunStore::open(const std::filesystem::path& dir) {
  RunStore store;
  store.dir_ = dir;
  // Not-a-run-directory is a caller mistake; damage inside one is not.
  if (!exists(dir)) throw ValidationError("no run manifest in '" + dir.string() + "'");
  store.manifest_ = manifest_from_json(read_file(dir / kManifestFile));
  std::string corpus_bytes = read_file(dir / kCorpusFile);
  if (sha256_hex(corpus_bytes) != store.manifest_.corpus_hash) {
    throw StorageError("corpus.json no longer matches manifest corpus_hash");
  }
  store.corpus_ = parse_corpus_json(corpus_bytes);
  store.load_existing();
  store.open_writers();
  return store;
}

void RunStore::load_existing() {
  responses_ = load_jsonl<ResponseRecord>(dir_ / kResponsesFile, &response_from_json_line);
  evals_ = load_jsonl<EvalRecord>(dir_ / kEvalsFile, &eval_from_json_line);
  for (std::size_t i = 0; i < responses_.size(); ++i) {
    if (!response_index_.emplace(responses_[i].key, i).second) {
      throw StorageError("duplicate response key on disk at record " + std::to_string(i + 1));
    }
  }
  for (const auto& eval : evals_) {
    if (!eval_index_.insert(eval.key).second) {
      throw StorageError("duplicate eval key on disk");
    }
  }
}

void RunStore::open_writers() {
  responses_out_ = open_append(dir_ / kResponsesFile);
  evals_out_ = open_append(dir_ / kEvalsFile);
  regen_out_ = open_append(dir_ / kRegenFile);
}

AppendResult RunStore::append_response(const ResponseRecord& record) {
  if (record.key.model != manifest_.generation_model ||
      record.key.pins_version != manifest_.pins_version ||
      record.key.execution != manifest_.execution) {
    throw StorageError("response key does not match the open manifest");
  }
  if (response_index_.count(record.key)) return AppendResult::Duplicate;
  append_line(responses_out_, dir_ / kResponsesFile, response_to_json_line(record));
  response_index_.emplace(record.key, responses_.size());
  responses_.push_back(record);
  return AppendResult::Accepted;
}

AppendResult RunStore::append_eval(const EvalRecord& record) {
  if (record.key.eval_version != manifest_.eval_version) {
    throw StorageError("eval_version does not match the open manifest");
  }
  if (record.key.repeat_index < 1 || record.key.repeat_index > manifest_.repeats) {
    throw StorageError("repeat_index " + std::to_string(record.key.repeat_index) +
                       " outside 1.." + std::to_string(manifest_.repeats));
  }
  if (record.evaluator_model != manifest_.evaluator_model) {
    throw StorageError("evaluator_model does not match the open manifest");
  }
  if (!response_index_.count(record.key.response)) {
    throw StorageError("eval record references a response that is not stored");
  }
  if (eval_index_.count(record.key)) return AppendResult::Duplicate;
  append_line(evals_out_, dir_ / kEvalsFile, eval_to_json_line(record));
  eval_index_.insert(record.key);
  evals_.push_back(record);
  return AppendResult::Accepted;
}

void RunStore::append_regen(const RegenAttemptRecord& record) {
  append_line(regen_out_, dir_ / kRegenFile, regen_to_json_line(record));
}

std::vector<RegenAttemptRecord> RunStore::regen_attempts() const {
  return load_jsonl<RegenAttemptRecord>(dir_ / kRegenFile, &regen_from_json_line);
}

const ResponseRecord* RunStore::find_response(const RecordKey& key) const {
  auto it = response_index_.find(key);
  if (it == response_index_.end()) return nullptr;
  return &responses_[it->second];
}

std::vector<QueryInstance> RunStore::pending_generation(
    const std::vector<QueryInstance>& expansion) const {
  std::vector<QueryInstance> pending;
  for (const auto& inst : expansion) {
    RecordKey key{manifest_.generation_model, inst.template_id, inst.animal, inst.perspective_id,
                  manifest_.pins_version, manifest_.execution};
    if (!response_index_.count(key)) pending.push_back(inst);
  }
  return pending;
}

std::vector<RunStore::EvalDeficit> RunStore::pending_evaluation(const std::string& eval_version,
                                                                int repeats) const {
  std::vector<EvalDeficit> deficits;
  for (const auto& response : responses_) {
    EvalDeficit deficit{response.key, {}};
    for (int repeat = 1; repeat <= repeats; ++repeat) {
      EvalKey key{response.key, eval_version, repeat};
      if (!eval_index_.count(key)) deficit.missing_repeats.push_back(repeat);
    }
    if (!deficit.missing_repeats.empty()) deficits.push_back(std::move(deficit));
  }
  return deficits;
}

}  // namespace animallm
