#pragma once

// Tabular schema, records, and record validation.
//
// A schema fixes the field order (the "fixed key order" every serialized
// record follows), the type of each field, and the binary task attached to
// the label field. Records are plain name -> value maps so that malformed
// inputs (extra fields, missing fields) can be represented and reported as
// validation data rather than as failures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fedtab {

enum class FieldKind { Numeric, Categorical };

struct Value {
  enum class Kind { Number, Category, Missing };

  Kind kind = Kind::Missing;
  double number = 0.0;
  std::string category;

  static Value missing() { return Value{}; }
  static Value num(double v) { return Value{Kind::Number, v, {}}; }
  static Value cat(std::string token) { return Value{Kind::Category, 0.0, std::move(token)}; }

  bool is_missing() const { return kind == Kind::Missing; }

  friend bool operator==(const Value& a, const Value& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::Number: return a.number == b.number;
      case Kind::Category: return a.category == b.category;
      case Kind::Missing: return true;
    }
    return false;
  }
};

using Record = std::map<std::string, Value>;

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::Categorical;
  std::vector<std::string> vocabulary;  // categorical only, ordered, duplicate-free
  std::vector<double> bins;             // numeric only, strictly increasing edges
  size_t position = 0;                  // 0-based index in fixed key order

  size_t bin_count() const { return bins.size() < 2 ? 0 : bins.size() - 1; }

  double bin_midpoint(size_t bin) const { return 0.5 * (bins[bin] + bins[bin + 1]); }

  // value -> bin index, clamped to the outer bins
  size_t bin_of(double v) const {
    if (v <= bins.front()) return 0;
    if (v >= bins.back()) return bin_count() - 1;
    size_t i = static_cast<size_t>(std::upper_bound(bins.begin(), bins.end(), v) - bins.begin());
    return i - 1;
  }
};

struct TaskSpec {
  std::string task_id;
  std::string positive_label;
  std::string negative_label;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Schema {
  std::vector<FieldSpec> fields;  // ascending position
  std::string label_field;
  TaskSpec task;

  const FieldSpec* find(std::string_view name) const {
    for (const auto& f : fields)
      if (f.name == name) return &f;
    return nullptr;
  }

  size_t label_index() const {
    for (size_t i = 0; i < fields.size(); ++i)
      if (fields[i].name == label_field) return i;
    throw SchemaError("schema has no label field");
  }

  const FieldSpec& label_spec() const { return fields[label_index()]; }

  // 1 = positive_label, 0 = negative_label
  int label_value(const Record& r) const {
    auto it = r.find(label_field);
    if (it == r.end() || it->second.kind != Value::Kind::Category)
      throw SchemaError("record has no categorical label value");
    return it->second.category == task.positive_label ? 1 : 0;
  }
};

struct Violation {
  enum class Kind {
    MissingField,
    ExtraField,
    OutOfVocabulary,
    MissingLabel,
    WrongType,
    NonFiniteNumber,
  };
  Kind kind;
  std::string field;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }

  std::string to_string() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.detail;
    }
    return out;
  }
};

// Violations are data, not failures: the report is empty iff the record
// satisfies every record invariant (all schema fields present exactly once,
// no extras, in-vocabulary categories, label present).
inline ValidationReport validate_record(const Schema& schema, const Record& record) {
  ValidationReport report;
  for (const auto& f : schema.fields) {
    auto it = record.find(f.name);
    if (it == record.end()) {
      if (f.name == schema.label_field)
        report.violations.push_back({Violation::Kind::MissingLabel, f.name, "missing label"});
      else
        report.violations.push_back(
            {Violation::Kind::MissingField, f.name, "missing field: " + f.name});
      continue;
    }
    const Value& v = it->second;
    if (v.is_missing()) {
      if (f.name == schema.label_field)
        report.violations.push_back({Violation::Kind::MissingLabel, f.name, "missing label"});
      continue;
    }
    if (f.kind == FieldKind::Categorical) {
      if (v.kind != Value::Kind::Category) {
        report.violations.push_back({Violation::Kind::WrongType, f.name,
                                     "expected categorical value in field " + f.name});
        continue;
      }
      if (std::find(f.vocabulary.begin(), f.vocabulary.end(), v.category) == f.vocabulary.end())
        report.violations.push_back({Violation::Kind::OutOfVocabulary, f.name,
                                     "category '" + v.category + "' not in vocabulary of field " +
                                         f.name});
    } else {
      if (v.kind != Value::Kind::Number) {
        report.violations.push_back(
            {Violation::Kind::WrongType, f.name, "expected numeric value in field " + f.name});
        continue;
      }
      if (!std::isfinite(v.number))
        report.violations.push_back({Violation::Kind::NonFiniteNumber, f.name,
                                     "non-finite number in field " + f.name});
    }
  }
  for (const auto& [name, value] : record) {
    (void)value;
    if (schema.find(name) == nullptr)
      report.violations.push_back({Violation::Kind::ExtraField, name, "extra field: " + name});
  }
  return report;
}

namespace detail {

// tokens travel unquoted inside serialized records, so structural
// characters and whitespace are rejected up front
inline bool valid_token(std::string_view token) {
  if (token.empty() || token == "nan") return false;
  for (char c : token) {
    if (c == '{' || c == '}' || c == ':' || c == ',' || c == '"') return false;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

inline bool valid_field_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name)
    if (c == '"' || c == '\n' || c == '\r') return false;
  return true;
}

}  // namespace detail

// Parses and validates a schema document:
//
// {
//   "task": {"task_id": "...", "positive_label": "...", "negative_label": "..."},
//   "label_field": "...",
//   "fields": [
//     {"name": "...", "kind": "numeric", "bins": [...]},
//     {"name": "...", "kind": "categorical", "vocabulary": [...]}
//   ]
// }
//
// Field positions are assigned from file order. Only binary tasks are
// accepted; the label field must be categorical with vocabulary equal to the
// task's two label strings.
inline Schema schema_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema: invalid json: ") + e.what());
  }

  Schema schema;
  try {
    const auto& task = j.at("task");
    schema.task.task_id = task.at("task_id").get<std::string>();
    schema.task.positive_label = task.at("positive_label").get<std::string>();
    schema.task.negative_label = task.at("negative_label").get<std::string>();
    schema.label_field = j.at("label_field").get<std::string>();

    for (const auto& fj : j.at("fields")) {
      FieldSpec f;
      f.name = fj.at("name").get<std::string>();
      std::string kind = fj.at("kind").get<std::string>();
      if (kind == "numeric") {
        f.kind = FieldKind::Numeric;
        f.bins = fj.at("bins").get<std::vector<double>>();
      } else if (kind == "categorical") {
        f.kind = FieldKind::Categorical;
        f.vocabulary = fj.at("vocabulary").get<std::vector<std::string>>();
      } else {
        throw SchemaError("schema: field '" + f.name + "': unknown kind '" + kind + "'");
      }
      f.position = schema.fields.size();
      schema.fields.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema: ") + e.what());
  }

  if (schema.fields.empty()) throw SchemaError("schema: no fields");
  if (schema.task.positive_label == schema.task.negative_label)
    throw SchemaError("schema: positive_label equals negative_label");

  std::set<std::string> seen;
  for (const auto& f : schema.fields) {
    if (!detail::valid_field_name(f.name))
      throw SchemaError("schema: invalid field name '" + f.name + "'");
    if (!seen.insert(f.name).second)
      throw SchemaError("schema: duplicate field '" + f.name + "'");
    if (f.kind == FieldKind::Categorical) {
      if (f.vocabulary.empty())
        throw SchemaError("schema: field '" + f.name + "': empty vocabulary");
      std::set<std::string> vocab_seen;
      for (const auto& t : f.vocabulary) {
        if (!detail::valid_token(t))
          throw SchemaError("schema: field '" + f.name + "': invalid token '" + t + "'");
        if (!vocab_seen.insert(t).second)
          throw SchemaError("schema: field '" + f.name + "': duplicate token '" + t + "'");
      }
    } else {
      if (f.bins.size() < 2)
        throw SchemaError("schema: field '" + f.name + "': needs at least two bin edges");
      for (size_t i = 0; i + 1 < f.bins.size(); ++i)
        if (!(f.bins[i] < f.bins[i + 1]))
          throw SchemaError("schema: field '" + f.name + "': bin edges not strictly increasing");
      for (double e : f.bins)
        if (!std::isfinite(e))
          throw SchemaError("schema: field '" + f.name + "': non-finite bin edge");
    }
  }

  const FieldSpec* label = schema.find(schema.label_field);
  if (label == nullptr)
    throw SchemaError("schema: label_field '" + schema.label_field + "' names no field");
  if (label->kind != FieldKind::Categorical)
    throw SchemaError("schema: label field must be categorical");
  if (label->vocabulary.size() != 2)
    throw SchemaError("schema: only binary label spaces are supported");
  std::set<std::string> labels(label->vocabulary.begin(), label->vocabulary.end());
  if (labels != std::set<std::string>{schema.task.positive_label, schema.task.negative_label})
    throw SchemaError("schema: label vocabulary must equal the task label strings");

  return schema;
}

}  // namespace fedtab
