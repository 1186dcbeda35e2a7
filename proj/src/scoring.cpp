#include "animallm/scoring.hpp"

#include <regex>
#include <vector>

#include <json.hpp>

namespace animallm {

using json = nlohmann::json;

std::string to_string(ParseMode mode) {
  switch (mode) {
    case ParseMode::Structured: return "structured";
    case ParseMode::PatternFallback: return "pattern_fallback";
    case ParseMode::Failed: return "failed";
  }
  return "failed";
}

ParseMode parse_mode_from_string(const std::string& s) {
  if (s == "structured") return ParseMode::Structured;
  if (s == "pattern_fallback") return ParseMode::PatternFallback;
  return ParseMode::Failed;
}

std::optional<int> validate_score_range(std::int64_t value) {
  if (value < kScoreMin || value > kScoreMax) return std::nullopt;
  return static_cast<int>(value);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Strict integers only: integer JSON numbers or strings of digits. Floats
// (even x.0) and anything else become missing.
std::optional<int> score_from_json_value(const json& v) {
  if (v.is_number_unsigned()) {
    std::uint64_t u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(kScoreMax)) return std::nullopt;
    return validate_score_range(static_cast<std::int64_t>(u));
  }
  if (v.is_number_integer()) return validate_score_range(v.get<std::int64_t>());
  if (v.is_string()) {
    static const std::regex int_re(R"(^\s*(-?\d{1,10})\s*$)");
    std::smatch m;
    std::string s = v.get<std::string>();
    if (std::regex_match(s, m, int_re)) return validate_score_range(std::stoll(m[1].str()));
  }
  return std::nullopt;
}

bool looks_like_payload(const json& obj) {
  return obj.is_object() && (obj.contains("s1_score") || obj.contains("s2_score"));
}

// Unwraps ``` / ```json fences anywhere in the text.
std::optional<std::string> unfence(const std::string& text) {
  std::size_t open = text.find("```");
  if (open == std::string::npos) return std::nullopt;
  std::size_t body = text.find('\n', open);
  if (body == std::string::npos) return std::nullopt;
  ++body;
  std::size_t close = text.find("```", body);
  if (close == std::string::npos) return std::nullopt;
  return text.substr(body, close - body);
}

std::optional<json> extract_payload_object(const std::string& text) {
  auto try_parse = [](const std::string& candidate) -> std::optional<json> {
    json parsed = json::parse(candidate, nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && looks_like_payload(parsed)) return parsed;
    return std::nullopt;
  };

  if (auto direct = try_parse(trim(text))) return direct;
  if (auto fenced = unfence(text)) {
    if (auto parsed = try_parse(trim(*fenced))) return parsed;
  }
  // Evaluators often wrap the object in prose; take the outermost braces.
  std::size_t first = text.find('{');
  std::size_t last = text.rfind('}');
  if (first != std::string::npos && last != std::string::npos && last > first) {
    if (auto parsed = try_parse(text.substr(first, last - first + 1))) return parsed;
  }
  return std::nullopt;
}

// "Score S1: 85", "Score S2 = 40", "S1: 85", and the payload key form
// "s1_score": 85 in otherwise-broken JSON. Bounded gap keeps the scan from
// jumping to unrelated digits.
std::vector<std::regex> make_score_patterns(const char* label) {
  return {
      std::regex(std::string("[Ss]core\\s*[Ss]") + label + "\\b[^0-9+-]{0,40}(-?\\d{1,10})"),
      std::regex(std::string("[Ss]") + label + "_score\\\"?\\s*[:=]\\s*\\\"?(-?\\d{1,10})"),
      std::regex(std::string("\\b[Ss]") + label + "\\s*[:=]\\s*(-?\\d{1,10})"),
  };
}

std::optional<int> scan_score(const std::string& text, const std::vector<std::regex>& patterns) {
  for (const auto& pattern : patterns) {
    std::smatch m;
    if (std::regex_search(text, m, pattern)) {
      return validate_score_range(std::stoll(m[1].str()));
    }
  }
  return std::nullopt;
}

std::string scan_justification(const std::string& text, const std::regex& pattern) {
  std::smatch m;
  if (std::regex_search(text, m, pattern)) return trim(m[1].str());
  return "";
}

std::regex make_justification_pattern(const char* label) {
  return std::regex(std::string("[Ss]") + label +
                    "[_ ][Jj]ustification\\\"?\\s*[:=]\\s*\\\"?([^\"\r\n]*)");
}

}  // namespace

ParseOutcome parse_scores(const std::string& evaluator_text) {
  ParseOutcome outcome;
  EvalScore& score = outcome.score;
  bool fallback_used = false;

  if (auto payload = extract_payload_object(evaluator_text)) {
    if (payload->contains("s1_score")) score.s1 = score_from_json_value((*payload)["s1_score"]);
    if (payload->contains("s2_score")) score.s2 = score_from_json_value((*payload)["s2_score"]);
    if (payload->contains("s1_justification") && (*payload)["s1_justification"].is_string()) {
      score.s1_justification = (*payload)["s1_justification"].get<std::string>();
    }
    if (payload->contains("s2_justification") && (*payload)["s2_justification"].is_string()) {
      score.s2_justification = (*payload)["s2_justification"].get<std::string>();
    }
  }

  if (!score.s1 && !score.s2) {
    static const std::vector<std::regex> s1_patterns = make_score_patterns("1");
    static const std::vector<std::regex> s2_patterns = make_score_patterns("2");
    static const std::regex s1_just = make_justification_pattern("1");
    static const std::regex s2_just = make_justification_pattern("2");
    auto s1 = scan_score(evaluator_text, s1_patterns);
    auto s2 = scan_score(evaluator_text, s2_patterns);
    if (s1 || s2) {
      fallback_used = true;
      score.s1 = s1;
      score.s2 = s2;
      if (score.s1_justification.empty()) score.s1_justification = scan_justification(evaluator_text, s1_just);
      if (score.s2_justification.empty()) score.s2_justification = scan_justification(evaluator_text, s2_just);
    }
  }

  if (!score.s1 && !score.s2) {
    outcome.parse_mode = ParseMode::Failed;
  } else {
    outcome.parse_mode = fallback_used ? ParseMode::PatternFallback : ParseMode::Structured;
  }
  return outcome;
}

std::string render_payload(const EvalScore& score) {
  // Key order matches the documented payload format.
  nlohmann::ordered_json payload;
  payload["s1_score"] = score.s1 ? json(*score.s1) : json(nullptr);
  payload["s1_justification"] = score.s1_justification;
  payload["s2_score"] = score.s2 ? json(*score.s2) : json(nullptr);
  payload["s2_justification"] = score.s2_justification;
  return payload.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace animallm
