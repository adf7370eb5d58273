#pragma once

// JSON-like record text: a single brace-delimited object with double-quoted
// keys in fixed schema order and unquoted values. Numbers carry exactly four
// decimals (half-even), missing values are the bare token nan, categorical
// tokens are unquoted. The same format is what generators emit and what the
// format reward checks, so parsing is deliberately strict about structure and
// tolerant only of whitespace.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedtab/rng.hpp"
#include "fedtab/schema.hpp"
#include "fedtab/text_format.hpp"

namespace fedtab {

enum class ParseErrorKind {
  None,
  NoBraceBlock,
  UnbalancedBraces,
  MalformedSyntax,
  DuplicateKey,
  UnknownKey,
  MissingField,
  MissingLabel,
  OutOfVocabulary,
  UnparseableNumber,
};

inline const char* parse_error_name(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::None: return "none";
    case ParseErrorKind::NoBraceBlock: return "no brace block";
    case ParseErrorKind::UnbalancedBraces: return "unbalanced braces";
    case ParseErrorKind::MalformedSyntax: return "malformed syntax";
    case ParseErrorKind::DuplicateKey: return "duplicate key";
    case ParseErrorKind::UnknownKey: return "unknown key";
    case ParseErrorKind::MissingField: return "missing field";
    case ParseErrorKind::MissingLabel: return "missing label";
    case ParseErrorKind::OutOfVocabulary: return "out-of-vocabulary category";
    case ParseErrorKind::UnparseableNumber: return "unparseable number";
  }
  return "?";
}

struct ParseResult {
  bool ok = false;
  Record record;
  ParseErrorKind error = ParseErrorKind::None;
  std::string message;

  static ParseResult failure(ParseErrorKind kind, std::string msg) {
    ParseResult r;
    r.error = kind;
    r.message = std::move(msg);
    return r;
  }
};

// First balanced {...} substring; leading and trailing prose is discarded.
// The result is always a contiguous substring of the input starting at the
// first '{'.
inline std::optional<std::string_view> extract_brace_block(std::string_view completion,
                                                           ParseErrorKind* why = nullptr) {
  const size_t open = completion.find('{');
  if (open == std::string_view::npos) {
    if (why) *why = ParseErrorKind::NoBraceBlock;
    return std::nullopt;
  }
  int depth = 0;
  for (size_t i = open; i < completion.size(); ++i) {
    if (completion[i] == '{') ++depth;
    if (completion[i] == '}') {
      --depth;
      if (depth == 0) return completion.substr(open, i - open + 1);
    }
  }
  if (why) *why = ParseErrorKind::UnbalancedBraces;
  return std::nullopt;
}

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

inline void skip_space(std::string_view s, size_t& i) {
  while (i < s.size() && is_space(s[i])) ++i;
}

}  // namespace detail

// Strict parse of one brace block against the schema. Whitespace between
// tokens is arbitrary; everything else is rigid. Each failure mode gets its
// own error kind so rewards and tests can distinguish them.
inline ParseResult parse_record(const Schema& schema, std::string_view text) {
  size_t i = 0;
  detail::skip_space(text, i);
  if (i >= text.size() || text[i] != '{')
    return ParseResult::failure(ParseErrorKind::MalformedSyntax, "expected '{'");
  ++i;

  Record record;
  detail::skip_space(text, i);
  bool first = true;
  while (true) {
    detail::skip_space(text, i);
    if (i >= text.size())
      return ParseResult::failure(ParseErrorKind::MalformedSyntax, "unterminated object");
    if (text[i] == '}') {
      ++i;
      break;
    }
    if (!first) {
      if (text[i] != ',')
        return ParseResult::failure(ParseErrorKind::MalformedSyntax, "expected ',' or '}'");
      ++i;
      detail::skip_space(text, i);
    }
    first = false;

    if (i >= text.size() || text[i] != '"')
      return ParseResult::failure(ParseErrorKind::MalformedSyntax, "expected '\"' before key");
    ++i;
    const size_t key_start = i;
    while (i < text.size() && text[i] != '"') ++i;
    if (i >= text.size())
      return ParseResult::failure(ParseErrorKind::MalformedSyntax, "unterminated key");
    const std::string key(text.substr(key_start, i - key_start));
    ++i;

    detail::skip_space(text, i);
    if (i >= text.size() || text[i] != ':')
      return ParseResult::failure(ParseErrorKind::MalformedSyntax, "expected ':' after key");
    ++i;
    detail::skip_space(text, i);

    const size_t val_start = i;
    while (i < text.size() && !detail::is_space(text[i]) && text[i] != ',' && text[i] != '}') ++i;
    const std::string_view token = text.substr(val_start, i - val_start);
    if (token.empty())
      return ParseResult::failure(ParseErrorKind::MalformedSyntax, "empty value for key " + key);

    const FieldSpec* field = schema.find(key);
    if (field == nullptr)
      return ParseResult::failure(ParseErrorKind::UnknownKey, "unknown key: " + key);
    if (record.find(key) != record.end())
      return ParseResult::failure(ParseErrorKind::DuplicateKey, "duplicate key: " + key);

    if (token == "nan") {
      if (key == schema.label_field)
        return ParseResult::failure(ParseErrorKind::MissingLabel, "label value is nan");
      record[key] = Value::missing();
      continue;
    }
    if (field->kind == FieldKind::Numeric) {
      double v = 0.0;
      if (!detail::parse_number(token, v))
        return ParseResult::failure(ParseErrorKind::UnparseableNumber,
                                    "unparseable number '" + std::string(token) + "' for key " +
                                        key);
      record[key] = Value::num(v);
    } else {
      if (std::find(field->vocabulary.begin(), field->vocabulary.end(), token) ==
          field->vocabulary.end())
        return ParseResult::failure(ParseErrorKind::OutOfVocabulary,
                                    "category '" + std::string(token) +
                                        "' not in vocabulary of field " + key);
      record[key] = Value::cat(std::string(token));
    }
  }

  detail::skip_space(text, i);
  if (i != text.size())
    return ParseResult::failure(ParseErrorKind::MalformedSyntax, "trailing characters after '}'");

  for (const auto& f : schema.fields) {
    if (record.find(f.name) == record.end())
      return ParseResult::failure(ParseErrorKind::MissingField,
                                  "missing required field: " + f.name);
  }

  ParseResult ok;
  ok.ok = true;
  ok.record = std::move(record);
  return ok;
}

class SerializeError : public std::runtime_error {
 public:
  explicit SerializeError(const ValidationReport& report)
      : std::runtime_error("cannot serialize invalid record: " + report.to_string()),
        report(report) {}
  ValidationReport report;
};

// Deterministic fixed-key-order rendering; refuses invalid records.
inline std::string serialize_record(const Schema& schema, const Record& record) {
  ValidationReport report = validate_record(schema, record);
  if (!report.ok()) throw SerializeError(report);

  std::string out = "{";
  bool first = true;
  for (const auto& f : schema.fields) {
    if (!first) out += ", ";
    first = false;
    out += '"';
    out += f.name;
    out += "\": ";
    const Value& v = record.at(f.name);
    if (v.is_missing())
      out += "nan";
    else if (f.kind == FieldKind::Numeric)
      out += render_fixed4(v.number);
    else
      out += v.category;
  }
  out += '}';
  return out;
}

// serialize -> parse; maps every numeric onto the 4-decimal lattice
inline Record quantize_record(const Schema& schema, const Record& record) {
  ParseResult r = parse_record(schema, serialize_record(schema, record));
  if (!r.ok) throw std::logic_error("quantize_record: round-trip failed: " + r.message);
  return r.record;
}

// The structured prompt equivalent: schema, five in-class exemplars, and the
// target label the generator must emit.
struct SynthesisCondition {
  static constexpr size_t kExemplarCount = 5;

  Schema schema;
  std::vector<std::string> exemplars;  // serialized, all labeled target_label
  std::string target_label;
  std::string condition_id;
};

// Exemplars are drawn (with replacement) from the in-class subset of the
// given records. Throws if no record carries the target label.
inline SynthesisCondition make_condition(const Schema& schema, const std::vector<Record>& records,
                                         const std::string& target_label,
                                         std::string condition_id, Rng& rng) {
  std::vector<const Record*> in_class;
  for (const auto& r : records) {
    auto it = r.find(schema.label_field);
    if (it != r.end() && it->second.kind == Value::Kind::Category &&
        it->second.category == target_label)
      in_class.push_back(&r);
  }
  if (in_class.empty())
    throw std::invalid_argument("make_condition: no records labeled '" + target_label + "'");

  SynthesisCondition c;
  c.schema = schema;
  c.target_label = target_label;
  c.condition_id = std::move(condition_id);
  for (size_t i = 0; i < SynthesisCondition::kExemplarCount; ++i)
    c.exemplars.push_back(serialize_record(schema, *in_class[rng.next_below(in_class.size())]));
  return c;
}

// Deterministic two-point format reward: +1 iff the completion contains one
// balanced brace block that parses against the schema, the label is one of
// the task label strings, and every present numeric lies within its field's
// outer bin edges. Everything else is -1; never throws.
inline double format_reward(const Schema& schema, const SynthesisCondition& condition,
                            std::string_view completion) {
  (void)condition;  // label space comes from the schema's task
  auto block = extract_brace_block(completion);
  if (!block) return -1.0;
  ParseResult parsed = parse_record(schema, *block);
  if (!parsed.ok) return -1.0;

  const Value& label = parsed.record.at(schema.label_field);
  if (label.category != schema.task.positive_label &&
      label.category != schema.task.negative_label)
    return -1.0;

  for (const auto& f : schema.fields) {
    if (f.kind != FieldKind::Numeric) continue;
    const Value& v = parsed.record.at(f.name);
    if (v.is_missing()) continue;
    if (v.number < f.bins.front() || v.number > f.bins.back()) return -1.0;
  }
  return 1.0;
}

}  // namespace fedtab
