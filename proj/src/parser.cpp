#include "dpkit/parser.hpp"

#include <array>
#include <cctype>

#include "dpkit/util.hpp"

namespace dpkit::parser {

const char* to_string(Confidence c) {
  switch (c) {
    case Confidence::Exact: return "exact";
    case Confidence::FinalLine: return "final-line";
    case Confidence::Fuzzy: return "fuzzy";
  }
  return "?";
}

const char* to_string(ParseFailure f) {
  switch (f) {
    case ParseFailure::None: return "none";
    case ParseFailure::Unparseable: return "unparseable";
    case ParseFailure::NoFinalLine: return "no-final-line";
    case ParseFailure::EmptyAnswer: return "empty-answer";
    case ParseFailure::NoCandidateMatched: return "no-candidate-matched";
  }
  return "?";
}

namespace {

ParseResult fail(ParseFailure f) {
  ParseResult r;
  r.failure = f;
  return r;
}

ParseResult success(Label label, std::string reason, Confidence source) {
  ParseResult r;
  r.answer = ParsedAnswer{std::move(label), std::move(reason), source};
  return r;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Strips surrounding whitespace, one layer of matching quotes, and trailing
// sentence punctuation; repeats until stable ("\"No.\"" -> "No").
std::string_view strip_decoration(std::string_view s) {
  while (true) {
    std::string_view before = s;
    s = util::trim(s);
    if (s.size() >= 2 &&
        ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
      s = s.substr(1, s.size() - 2);
    }
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == ',')) {
      s.remove_suffix(1);
    }
    if (s == before) return s;
  }
}

// Matches "final answer" at the start of a trimmed line, tolerating markdown
// asterisks, and returns the text after the colon; nullopt if no match.
std::optional<std::string_view> match_final_line(std::string_view line) {
  std::string_view s = util::trim(line);
  while (!s.empty() && (s.front() == '*' || s.front() == '#')) s.remove_prefix(1);
  s = util::trim(s);
  constexpr std::string_view kMarker = "final answer";
  if (s.size() < kMarker.size()) return std::nullopt;
  if (!util::iequals(s.substr(0, kMarker.size()), kMarker)) return std::nullopt;
  std::string_view rest = s.substr(kMarker.size());
  rest = util::trim(rest);
  if (rest.empty() || rest.front() != ':') return std::nullopt;
  rest.remove_prefix(1);
  return util::trim(rest);
}

// Scans for standalone yes/no words; returns the last one found.
std::optional<bool> last_yes_no_token(std::string_view text) {
  std::optional<bool> found;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && is_word_char(text[i])) ++i;
    std::string_view word = text.substr(start, i - start);
    if (util::iequals(word, "yes")) found = true;
    else if (util::iequals(word, "no")) found = false;
  }
  return found;
}

std::optional<bool> first_yes_no_token(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < text.size() && is_word_char(text[i])) ++i;
    std::string_view word = text.substr(start, i - start);
    if (util::iequals(word, "yes")) return true;
    if (util::iequals(word, "no")) return false;
  }
  return std::nullopt;
}

}  // namespace

ParseResult parse_binary(std::string_view text) {
  std::string_view bare = strip_decoration(text);
  if (util::iequals(bare, "yes")) return success(Label::binary(true), "", Confidence::Exact);
  if (util::iequals(bare, "no")) return success(Label::binary(false), "", Confidence::Exact);

  auto lines = util::split_lines(text);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (auto rest = match_final_line(*it)) {
      if (auto yn = first_yes_no_token(*rest)) {
        return success(Label::binary(*yn), "", Confidence::FinalLine);
      }
      break;  // a final-answer line without yes/no; fall back to fuzzy
    }
  }

  if (auto yn = last_yes_no_token(text)) {
    return success(Label::binary(*yn), "", Confidence::Fuzzy);
  }
  return fail(ParseFailure::Unparseable);
}

FinalSplitResult parse_final(std::string_view text) {
  auto lines = util::split_lines(text);

  // Find the last line carrying the final-answer marker.
  std::size_t marker_line = lines.size();
  std::string_view label_text;
  for (std::size_t i = lines.size(); i > 0; --i) {
    if (auto rest = match_final_line(lines[i - 1])) {
      marker_line = i - 1;
      label_text = *rest;
      break;
    }
  }

  FinalSplitResult out;
  if (marker_line == lines.size()) {
    // No marker. A single-line response is treated as label-only.
    std::string_view trimmed = util::trim(text);
    if (trimmed.empty()) {
      out.failure = ParseFailure::EmptyAnswer;
      return out;
    }
    if (trimmed.find('\n') != std::string_view::npos) {
      out.failure = ParseFailure::NoFinalLine;
      return out;
    }
    out.split = FinalSplit{"", std::string(trimmed), false};
    return out;
  }

  std::string reason;
  for (std::size_t i = 0; i < marker_line; ++i) {
    if (i) reason += '\n';
    reason += lines[i];
  }
  out.split = FinalSplit{std::string(util::trim(reason)), std::string(label_text), true};
  return out;
}

namespace {

// Echo prefixes models commonly prepend to value answers, longest first.
constexpr std::array<std::string_view, 10> kEchoPrefixes = {
    "the value of the missing attribute is",
    "the value of the attribute is",
    "the name of the city is",
    "the name of the brand is",
    "the missing value is",
    "the answer is",
    "the value is",
    "the city is",
    "the brand is",
    "answer:",
};

}  // namespace

ParseResult parse_value(std::string_view text) {
  Confidence source = Confidence::Exact;
  std::string_view body = text;

  if (auto split = parse_final(text); split.ok()) {
    if (split.split->had_marker) source = Confidence::FinalLine;
    // parse_final gives us the label side; keep working on a copy.
    std::string label_text = split.split->label_text;
    std::string_view stripped = strip_decoration(label_text);
    std::string candidate(stripped);
    std::string lowered = util::lower(candidate);
    for (std::string_view prefix : kEchoPrefixes) {
      if (lowered.size() > prefix.size() &&
          lowered.compare(0, prefix.size(), prefix) == 0) {
        candidate = std::string(strip_decoration(candidate.substr(prefix.size())));
        source = Confidence::Fuzzy;
        break;
      }
    }
    if (candidate.empty()) return fail(ParseFailure::EmptyAnswer);
    return success(Label::value(candidate), split.split->reason, source);
  } else if (split.failure == ParseFailure::EmptyAnswer) {
    return fail(ParseFailure::EmptyAnswer);
  }

  // Multi-line without a marker: fall back to the last non-empty line.
  std::string_view last = util::last_nonempty_line(body);
  std::string candidate(strip_decoration(last));
  if (candidate.empty()) return fail(ParseFailure::EmptyAnswer);
  std::string lowered = util::lower(candidate);
  for (std::string_view prefix : kEchoPrefixes) {
    if (lowered.size() > prefix.size() && lowered.compare(0, prefix.size(), prefix) == 0) {
      candidate = std::string(strip_decoration(candidate.substr(prefix.size())));
      break;
    }
  }
  if (candidate.empty()) return fail(ParseFailure::EmptyAnswer);
  return success(Label::value(candidate), "", Confidence::Fuzzy);
}

ParseResult parse_cta(std::string_view text, const std::vector<std::string>& candidates) {
  if (candidates.empty()) return fail(ParseFailure::NoCandidateMatched);
  std::string line = util::lower(util::last_nonempty_line(text));
  if (line.empty()) return fail(ParseFailure::EmptyAnswer);

  const std::string* best = nullptr;
  std::size_t best_pos = 0;
  for (const std::string& candidate : candidates) {
    if (candidate.empty()) continue;
    std::string needle = util::lower(candidate);
    std::size_t pos = line.rfind(needle);
    if (pos == std::string::npos) continue;
    // Rightmost match wins; on a tie prefer the longer candidate (handles
    // one candidate being a prefix of another at the same offset).
    if (!best || pos > best_pos ||
        (pos == best_pos && candidate.size() > best->size())) {
      best = &candidate;
      best_pos = pos;
    }
  }
  if (!best) return fail(ParseFailure::NoCandidateMatched);

  std::size_t matches = 0;
  for (const std::string& candidate : candidates) {
    if (!candidate.empty() && line.find(util::lower(candidate)) != std::string::npos)
      ++matches;
  }
  return success(Label::category(*best), "",
                 matches > 1 ? Confidence::Fuzzy : Confidence::Exact);
}

ParseResult parse_ave(std::string_view text) {
  ParseResult value = parse_value(text);
  if (!value.ok()) return value;
  std::string_view v = strip_decoration(value.answer->label.text);
  if (util::iequals(v, "n/a") || util::iequals(v, "na")) {
    value.answer->label = Label::value("N/A");
  }
  return value;
}

}  // namespace dpkit::parser
