#pragma once

// Shared toy fixtures for the test suites.

#include <string>
#include <vector>

#include "fedtab/fedtab.hpp"

namespace testutil {

using namespace fedtab;

// Age numeric, Sex categorical, label last; heart-style binary task.
inline Schema heart_schema() {
  return schema_from_json(R"({
    "task": {"task_id": "heart", "positive_label": "heartdisease", "negative_label": "healthy"},
    "label_field": "label",
    "fields": [
      {"name": "Age", "kind": "numeric", "bins": [20, 40, 60, 80]},
      {"name": "Sex", "kind": "categorical", "vocabulary": ["M", "F"]},
      {"name": "label", "kind": "categorical", "vocabulary": ["healthy", "heartdisease"]}
    ]
  })");
}

// two categorical feature fields followed by the label; used by generator
// and federation tests
inline Schema pair_schema(const std::string& task_id = "toy") {
  return schema_from_json(R"({
    "task": {"task_id": ")" + task_id + R"(", "positive_label": "yes", "negative_label": "no"},
    "label_field": "label",
    "fields": [
      {"name": "A", "kind": "categorical", "vocabulary": ["a0", "a1", "a2", "a3"]},
      {"name": "B", "kind": "categorical", "vocabulary": ["b0", "b1", "b2", "b3"]},
      {"name": "label", "kind": "categorical", "vocabulary": ["no", "yes"]}
    ]
  })");
}

inline Record heart_record(double age, const std::string& sex, const std::string& label) {
  Record r;
  r["Age"] = Value::num(age);
  r["Sex"] = Value::cat(sex);
  r["label"] = Value::cat(label);
  return r;
}

inline Record pair_record(const std::string& a, const std::string& b, const std::string& label) {
  Record r;
  r["A"] = Value::cat(a);
  r["B"] = Value::cat(b);
  r["label"] = Value::cat(label);
  return r;
}

// random schema-valid heart record (numerics inside the bin range)
inline Record random_heart_record(Rng& rng, bool allow_missing_age = true) {
  Record r;
  if (allow_missing_age && rng.next_bernoulli(0.1))
    r["Age"] = Value::missing();
  else
    r["Age"] = Value::num(rng.next_in(20.0, 80.0));
  r["Sex"] = Value::cat(rng.next_bernoulli(0.5) ? "M" : "F");
  r["label"] = Value::cat(rng.next_bernoulli(0.5) ? "heartdisease" : "healthy");
  return r;
}

inline std::string random_bytes(Rng& rng, size_t max_len) {
  const size_t len = rng.next_below(max_len + 1);
  std::string s(len, '\0');
  for (char& c : s) c = static_cast<char>(rng.next_below(256));
  return s;
}

// structured-ish fuzz input: brace fragments, quotes, tokens, random bytes
inline std::string random_fuzz_string(Rng& rng) {
  static const char* pieces[] = {"{",  "}",   "\"",  ":",    ",",     "nan", "Age", "label",
                                 " ",  "\n",  "1.5", "-",    "65.0000", "M", "heartdisease",
                                 "{}", "\"Age\":", "e", "inf", "0x1p3"};
  std::string s;
  const size_t n = rng.next_below(24);
  for (size_t i = 0; i < n; ++i) {
    if (rng.next_bernoulli(0.25))
      s += random_bytes(rng, 6);
    else
      s += pieces[rng.next_below(sizeof(pieces) / sizeof(pieces[0]))];
  }
  return s;
}

}  // namespace testutil
