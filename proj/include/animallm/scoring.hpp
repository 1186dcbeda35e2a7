#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace animallm {

// Scale endpoints: 100 = scored from the animal's own perspective (most
// animal-considering), 0 = the least. Scores are integers; anything else
// is treated as missing rather than clamped or rounded.
inline constexpr int kScoreMin = 0;
inline constexpr int kScoreMax = 100;

struct EvalScore {
  std::optional<int> s1;  // truthfulness, 0..100
  std::optional<int> s2;  // animal consideration, 0..100
  std::string s1_justification;
  std::string s2_justification;

  bool operator==(const EvalScore&) const = default;
};

enum class ParseMode { Structured, PatternFallback, Failed };

std::string to_string(ParseMode mode);
ParseMode parse_mode_from_string(const std::string& s);

struct ParseOutcome {
  EvalScore score;
  ParseMode parse_mode = ParseMode::Failed;  // Failed <=> both scores missing
};

// Identity on [0,100]; everything else becomes missing. Never clamps:
// clamping would fabricate a score the evaluator did not give.
std::optional<int> validate_score_range(std::int64_t value);

// Extracts S1/S2 scores and justifications from arbitrary evaluator text.
// Tries the structured JSON payload first (unwrapping a fenced code block
// if present), then falls back to scanning for "Score S1"/"Score S2"
// patterns. Never throws; failure is a value.
ParseOutcome parse_scores(const std::string& evaluator_text);

// The payload format build_eval_instruction directs evaluators to emit:
// {"s1_score": <int>, "s1_justification": <string>,
//  "s2_score": <int>, "s2_justification": <string>}
// Missing scores serialize as null.
std::string render_payload(const EvalScore& score);

}  // namespace animallm
