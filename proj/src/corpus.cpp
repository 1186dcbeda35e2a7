#include "animallm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace animallm {

using json = nlohmann::json;

namespace {

bool contains_animal_token(const std::string& text) {
  return text.find(kAnimalToken) != std::string::npos;
}

// Perspective ids are "P<digits>"; ordering is numeric so P10 sorts after P9.
std::optional<int> perspective_ordinal(const std::string& id) {
  if (id.size() < 2 || id[0] != 'P') return std::nullopt;
  int value = 0;
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return std::nullopt;
    value = value * 10 + (id[i] - '0');
  }
  return value;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

const json& require_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw CorpusError(where + ": missing '" + key + "'");
  return *it;
}

}  // namespace

const ScoreGuideline& Corpus::guideline(const std::string& score_id) const {
  for (const auto& g : score_guidelines) {
    if (g.score_id == score_id) return g;
  }
  throw CorpusError("no guideline for " + score_id);
}

Corpus parse_corpus_json(const std::string& bytes) {
  json doc = json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw CorpusError("file is not a valid JSON object");
  }

  Corpus corpus;
  corpus.label = doc.value("label", "");

  const json& templates = require_field(doc, "templates", "corpus");
  if (!templates.is_array()) throw CorpusError("'templates' must be an array");
  std::set<int> template_ids;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const json& t = templates[i];
    std::string where = "templates[" + std::to_string(i) + "]";
    if (!t.is_object()) throw CorpusError(where + ": not an object");
    const json& id = require_field(t, "id", where);
    const json& text = require_field(t, "text", where);
    if (!id.is_number_integer()) throw CorpusError(where + ": 'id' must be an integer");
    if (!text.is_string()) throw CorpusError(where + ": 'text' must be a string");
    InputTemplate tmpl{id.get<int>(), text.get<std::string>()};
    if (tmpl.id < 1) throw CorpusError(where + ": id " + std::to_string(tmpl.id) + " < 1");
    if (!contains_animal_token(tmpl.text)) {
      throw CorpusError(where + " (id " + std::to_string(tmpl.id) + "): text lacks the " +
                        std::string(kAnimalToken) + " placeholder");
    }
    if (!template_ids.insert(tmpl.id).second) {
      throw CorpusError("duplicate template id " + std::to_string(tmpl.id));
    }
    corpus.templates.push_back(std::move(tmpl));
  }
  std::sort(corpus.templates.begin(), corpus.templates.end(),
            [](const InputTemplate& a, const InputTemplate& b) { return a.id < b.id; });

  const json& animals = require_field(doc, "animals", "corpus");
  if (!animals.is_array()) throw CorpusError("'animals' must be an array");
  std::set<std::string> seen_animals;
  for (std::size_t i = 0; i < animals.size(); ++i) {
    std::string where = "animals[" + std::to_string(i) + "]";
    if (!animals[i].is_string()) throw CorpusError(where + ": not a string");
    std::string name = animals[i].get<std::string>();
    if (name.empty()) throw CorpusError(where + ": empty name");
    for (char c : name) {
      if (c >= 'A' && c <= 'Z') throw CorpusError(where + " ('" + name + "'): not lowercase");
    }
    if (!seen_animals.insert(name).second) throw CorpusError("duplicate animal '" + name + "'");
    corpus.animals.push_back(std::move(name));
  }

  const json& perspectives = require_field(doc, "perspectives", "corpus");
  if (!perspectives.is_array()) throw CorpusError("'perspectives' must be an array");
  std::set<std::string> seen_perspectives;
  for (std::size_t i = 0; i < perspectives.size(); ++i) {
    const json& p = perspectives[i];
    std::string where = "perspectives[" + std::to_string(i) + "]";
    if (!p.is_object()) throw CorpusError(where + ": not an object");
    Perspective persp;
    persp.id = require_field(p, "id", where).get<std::string>();
    persp.label = require_field(p, "label", where).get<std::string>();
    persp.definition = require_field(p, "definition", where).get<std::string>();
    if (!perspective_ordinal(persp.id)) {
      throw CorpusError(where + ": id '" + persp.id + "' is not of the form P<number>");
    }
    if (!seen_perspectives.insert(persp.id).second) {
      throw CorpusError("duplicate perspective id '" + persp.id + "'");
    }
    if (persp.id == "P1" && !persp.definition.empty()) {
      throw CorpusError("P1 (default) must have an empty definition");
    }
    if (persp.id == "P0" && !contains_animal_token(persp.definition)) {
      throw CorpusError("P0 definition must contain the " + std::string(kAnimalToken) +
                        " placeholder");
    }
    corpus.perspectives.push_back(std::move(persp));
  }
  std::sort(corpus.perspectives.begin(), corpus.perspectives.end(),
            [](const Perspective& a, const Perspective& b) {
              return *perspective_ordinal(a.id) < *perspective_ordinal(b.id);
            });

  const json& guidelines = require_field(doc, "score_guidelines", "corpus");
  if (!guidelines.is_array() || guidelines.size() != 2) {
    throw CorpusError("'score_guidelines' must be an array of exactly two entries");
  }
  for (std::size_t i = 0; i < guidelines.size(); ++i) {
    const json& g = guidelines[i];
    std::string where = "score_guidelines[" + std::to_string(i) + "]";
    ScoreGuideline guide;
    guide.score_id = require_field(g, "score_id", where).get<std::string>();
    guide.guideline_text = require_field(g, "guideline_text", where).get<std::string>();
    if (guide.score_id != "S1" && guide.score_id != "S2") {
      throw CorpusError(where + ": score_id must be S1 or S2");
    }
    if (!contains_animal_token(guide.guideline_text)) {
      throw CorpusError(where + ": guideline lacks the " + std::string(kAnimalToken) +
                        " placeholder");
    }
    corpus.score_guidelines.push_back(std::move(guide));
  }
  if (corpus.score_guidelines[0].score_id == corpus.score_guidelines[1].score_id) {
    throw CorpusError("score_guidelines must cover S1 and S2 once each");
  }
  std::sort(corpus.score_guidelines.begin(), corpus.score_guidelines.end(),
            [](const ScoreGuideline& a, const ScoreGuideline& b) { return a.score_id < b.score_id; });

  if (auto it = doc.find("plural_overrides"); it != doc.end()) {
    if (!it->is_object()) throw CorpusError("'plural_overrides' must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) throw CorpusError("plural_overrides['" + k + "']: not a string");
      corpus.plural_overrides[k] = v.get<std::string>();
    }
  }

  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus_json(buf.str());
}

std::string render_animal_text(const std::string& text, const std::string& animal,
                               const std::map<std::string, std::string>& plural_overrides) {
  std::string out = text;
  if (auto it = plural_overrides.find(animal); it != plural_overrides.end()) {
    out = replace_all(std::move(out), std::string(kAnimalToken) + "s", it->second);
  }
  return replace_all(std::move(out), kAnimalToken, animal);
}

std::string render_query(const InputTemplate& tmpl, const std::string& animal) {
  return render_animal_text(tmpl.text, animal);
}

std::vector<QueryInstance> expand(const Corpus& corpus) {
  std::vector<QueryInstance> instances;
  instances.reserve(corpus.templates.size() * corpus.animals.size() * corpus.perspectives.size());
  for (const auto& tmpl : corpus.templates) {
    for (const auto& animal : corpus.animals) {
      std::string query = render_animal_text(tmpl.text, animal, corpus.plural_overrides);
      for (const auto& persp : corpus.perspectives) {
        QueryInstance inst;
        inst.template_id = tmpl.id;
        inst.animal = animal;
        inst.perspective_id = persp.id;
        inst.query_text = query;
        inst.perspective_text = render_animal_text(persp.definition, animal, corpus.plural_overrides);
        instances.push_back(std::move(inst));
      }
    }
  }
  return instances;
}

}  // namespace animallm
