#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpkit/core.hpp"

namespace dpkit::parser {

// How confidently the label was recovered. exact = the whole answer was the
// label; final_line = taken from a "Final answer:" line; fuzzy = heuristic
// (last yes/no token, echo-prefix stripping, tie-broken candidate).
enum class Confidence { Exact, FinalLine, Fuzzy };
const char* to_string(Confidence c);

enum class ParseFailure {
  None,
  Unparseable,       // no recognizable answer
  NoFinalLine,       // multi-line text without a final-answer line
  EmptyAnswer,       // nothing left after trimming/stripping
  NoCandidateMatched // no CTA candidate found in the final line
};
const char* to_string(ParseFailure f);

struct ParsedAnswer {
  Label label;
  std::string reason;  // text before the final-answer line, when present
  Confidence source = Confidence::Exact;
};

// All parsers are total: any input (including megabytes of garbage) yields
// either an answer or a failure code, never a throw.
struct ParseResult {
  std::optional<ParsedAnswer> answer;
  ParseFailure failure = ParseFailure::None;

  bool ok() const { return answer.has_value(); }
};

// Yes/No extraction: bare answer, then "Final answer:" line, then the last
// standalone yes/no token anywhere (flagged fuzzy).
ParseResult parse_binary(std::string_view text);

// Splits reasoning text at the last "Final answer:" line (case-insensitive,
// "Final Answer:" included). Single-line inputs count as label-only.
struct FinalSplit {
  std::string reason;
  std::string label_text;
  bool had_marker = false;
};
struct FinalSplitResult {
  std::optional<FinalSplit> split;
  ParseFailure failure = ParseFailure::None;
  bool ok() const { return split.has_value(); }
};
FinalSplitResult parse_final(std::string_view text);

// Value answers: trims whitespace/quotes/terminal period, strips known echo
// prefixes ("The city is ..."), honors a final-answer line when present.
ParseResult parse_value(std::string_view text);

// Category answers: candidates matched case-insensitively in the last
// non-empty line; when several match, the last-mentioned (rightmost) wins.
ParseResult parse_cta(std::string_view text, const std::vector<std::string>& candidates);

// Value answers where "N/A" (any case, quoted or not) is a first-class
// abstention, canonicalized to exactly "N/A".
ParseResult parse_ave(std::string_view text);

}  // namespace dpkit::parser
