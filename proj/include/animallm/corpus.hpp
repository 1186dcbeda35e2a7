#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "animallm/errors.hpp"

namespace animallm {

inline constexpr const char* kAnimalToken = "{animal}";

class CorpusError : public ValidationError {
 public:
  explicit CorpusError(const std::string& msg) : ValidationError("corpus: " + msg) {}
};

struct InputTemplate {
  int id = 0;
  std::string text;  // contains "{animal}" at least once
};

struct Perspective {
  std::string id;          // "P0".."Pn"
  std::string label;
  std::string definition;  // empty for P1; may contain "{animal}"
};

struct ScoreGuideline {
  std::string score_id;  // "S1" or "S2"
  std::string guideline_text;
};

// One fully rendered (template, animal, perspective) query.
struct QueryInstance {
  int template_id = 0;
  std::string animal;
  std::string perspective_id;
  std::string query_text;
  std::string perspective_text;
};

// Immutable after load; safe for unrestricted concurrent reads.
struct Corpus {
  std::string label;
  std::vector<InputTemplate> templates;       // sorted by id
  std::vector<std::string> animals;           // file order
  std::vector<Perspective> perspectives;      // sorted by numeric suffix
  std::vector<ScoreGuideline> score_guidelines;
  std::map<std::string, std::string> plural_overrides;

  const ScoreGuideline& guideline(const std::string& score_id) const;
};

// Parses and validates a corpus document. Diagnostics name the offending
// record (e.g. "duplicate template id 3").
Corpus parse_corpus_json(const std::string& bytes);
Corpus load_corpus(const std::filesystem::path& path);

// Replaces "{animal}s" with the plural override when one exists for this
// animal, then every remaining "{animal}" with the name. With no override
// this is plain substitution ("fish" + "{animal}s" -> "fishs"); stimuli are
// never silently altered.
std::string render_animal_text(const std::string& text, const std::string& animal,
                               const std::map<std::string, std::string>& plural_overrides = {});

// Plain substitution of every "{animal}" occurrence; no other text altered.
std::string render_query(const InputTemplate& tmpl, const std::string& animal);

// Deterministic Cartesian expansion ordered by (template id, animal file
// order, perspective id). Pure: identical corpora yield identical lists.
std::vector<QueryInstance> expand(const Corpus& corpus);

}  // namespace animallm
