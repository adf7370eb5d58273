#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "helpers.hpp"

using namespace fedtab;
using testutil::heart_record;
using testutil::heart_schema;

TEST_CASE("schema load assigns positions in file order") {
  const Schema s = heart_schema();
  REQUIRE(s.fields.size() == 3);
  CHECK(s.fields[0].name == "Age");
  CHECK(s.fields[0].position == 0);
  CHECK(s.fields[2].name == "label");
  CHECK(s.fields[2].position == 2);
  CHECK(s.label_index() == 2);
  CHECK(s.task.positive_label == "heartdisease");
}

TEST_CASE("schema load rejects invariant violations") {
  auto mutate = [](const std::string& fields, const std::string& label_field = "label") {
    return std::string(R"({"task": {"task_id": "t", "positive_label": "p", "negative_label": "n"},
      "label_field": ")") + label_field + R"(", "fields": [)" + fields + "]}";
  };
  const std::string good_label =
      R"({"name": "label", "kind": "categorical", "vocabulary": ["p", "n"]})";

  CHECK_THROWS_AS(schema_from_json(mutate(
                      R"({"name": "x", "kind": "categorical", "vocabulary": ["a", "a"]}, )" +
                      good_label)),
                  SchemaError);
  CHECK_THROWS_AS(schema_from_json(mutate(
                      R"({"name": "x", "kind": "numeric", "bins": [3, 2, 5]}, )" + good_label)),
                  SchemaError);
  CHECK_THROWS_AS(schema_from_json(mutate(
                      R"({"name": "x", "kind": "categorical", "vocabulary": []}, )" + good_label)),
                  SchemaError);
  // label names a numeric field
  CHECK_THROWS_AS(schema_from_json(mutate(
                      R"({"name": "label", "kind": "numeric", "bins": [0, 1]})")),
                  SchemaError);
  // label vocabulary must equal the task labels
  CHECK_THROWS_AS(schema_from_json(mutate(
                      R"({"name": "label", "kind": "categorical", "vocabulary": ["p", "x"]})")),
                  SchemaError);
  // multiclass label space rejected
  CHECK_THROWS_AS(schema_from_json(mutate(
                      R"({"name": "label", "kind": "categorical", "vocabulary": ["p", "n", "m"]})")),
                  SchemaError);
  // "nan" cannot be a vocabulary token
  CHECK_THROWS_AS(schema_from_json(mutate(
                      R"({"name": "x", "kind": "categorical", "vocabulary": ["nan"]}, )" +
                      good_label)),
                  SchemaError);
}

TEST_CASE("validate_record") {
  const Schema s = heart_schema();

  SUBCASE("well-formed record yields an empty report") {
    CHECK(validate_record(s, heart_record(65, "M", "heartdisease")).ok());
  }
  SUBCASE("missing label") {
    Record r = heart_record(65, "M", "healthy");
    r.erase("label");
    const ValidationReport rep = validate_record(s, r);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].kind == Violation::Kind::MissingLabel);
  }
  SUBCASE("out-of-vocabulary category names the field") {
    Record r = heart_record(65, "M", "healthy");
    r["Sex"] = Value::cat("blue");
    const ValidationReport rep = validate_record(s, r);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].kind == Violation::Kind::OutOfVocabulary);
    CHECK(rep.violations[0].field == "Sex");
  }
  SUBCASE("extra field") {
    Record r = heart_record(65, "M", "healthy");
    r["Bogus"] = Value::num(1);
    const ValidationReport rep = validate_record(s, r);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0].kind == Violation::Kind::ExtraField);
  }
  SUBCASE("missing value allowed except for the label") {
    Record r = heart_record(65, "M", "healthy");
    r["Age"] = Value::missing();
    CHECK(validate_record(s, r).ok());
    r["label"] = Value::missing();
    CHECK_FALSE(validate_record(s, r).ok());
  }
}

namespace {

std::string toy_csv() {
  return "id,split,Age,Sex,label\n"
         "1,train,65,M,heartdisease\n"
         "2,train,33,F,healthy\n"
         "3,train,71,F,heartdisease\n"
         "4,train,29,M,healthy\n"
         "5,val,55,M,heartdisease\n"
         "6,test,41,F,healthy\n";
}

}  // namespace

TEST_CASE("load_dataset splits rows and computes the positive rate") {
  const Schema s = heart_schema();
  const DatasetSplit ds = load_dataset(toy_csv(), s);
  CHECK(ds.train.size() == 4);
  CHECK(ds.validation.size() == 1);
  CHECK(ds.test.size() == 1);
  // 2 positives in 4 train rows
  CHECK(ds.positive_rate == doctest::Approx(0.5).epsilon(1e-15));

  SUBCASE("positive_rate recomputation is exact") {
    CHECK(recompute_positive_rate(s, ds.train) == ds.positive_rate);
  }
  SUBCASE("every loaded record validates cleanly") {
    for (const auto* split : {&ds.train, &ds.validation, &ds.test})
      for (const auto& r : *split) CHECK(validate_record(s, r).ok());
  }
  SUBCASE("fixed key order is schema order for every loaded record") {
    for (const auto& r : ds.train) {
      size_t pos = 0;
      for (const auto& f : s.fields) {
        CHECK(r.find(f.name) != r.end());
        CHECK(f.position == pos++);
      }
    }
  }
}

TEST_CASE("load_dataset error paths name row and field") {
  const Schema s = heart_schema();

  SUBCASE("empty body") {
    CHECK_THROWS_WITH_AS(load_dataset("id,split,Age,Sex,label\n", s), "no records", IngestError);
  }
  SUBCASE("unknown column") {
    try {
      load_dataset("split,Age,Sex,label,Extra\ntrain,65,M,healthy,1\n", s);
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.field == "Extra");
    }
  }
  SUBCASE("header must cover the schema") {
    CHECK_THROWS_AS(load_dataset("split,Age,Sex\ntrain,65,M\n", s), IngestError);
  }
  SUBCASE("unparseable numeric") {
    try {
      load_dataset("split,Age,Sex,label\ntrain,sixty,M,healthy\n", s);
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.row == 1);
      CHECK(e.field == "Age");
    }
  }
  SUBCASE("out-of-vocabulary category") {
    try {
      load_dataset("split,Age,Sex,label\ntrain,65,X,healthy\n", s);
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.field == "Sex");
    }
  }
  SUBCASE("missing label cell") {
    try {
      load_dataset("split,Age,Sex,label\ntrain,65,M,nan\n", s);
      FAIL("expected IngestError");
    } catch (const IngestError& e) {
      CHECK(e.field == "label");
    }
  }
  SUBCASE("unknown split token") {
    CHECK_THROWS_AS(load_dataset("split,Age,Sex,label\nholdout,65,M,healthy\n", s), IngestError);
  }
  SUBCASE("duplicate row ids across splits") {
    CHECK_THROWS_AS(
        load_dataset("id,split,Age,Sex,label\n7,train,65,M,healthy\n7,val,44,F,healthy\n", s),
        IngestError);
  }
}

TEST_CASE("missing markers: empty cell and nan") {
  const Schema s = heart_schema();
  const DatasetSplit ds =
      load_dataset("split,Age,Sex,label\ntrain,,M,healthy\ntrain,nan,F,heartdisease\n", s);
  CHECK(ds.train[0].at("Age").is_missing());
  CHECK(ds.train[1].at("Age").is_missing());
}

TEST_CASE("three-file loader") {
  const Schema s = heart_schema();
  const std::string header = "Age,Sex,label\n";
  const DatasetSplit ds = load_dataset_files(header + "65,M,heartdisease\n33,F,healthy\n",
                                             header + "55,M,healthy\n",
                                             header + "41,F,heartdisease\n", s);
  CHECK(ds.train.size() == 2);
  CHECK(ds.validation.size() == 1);
  CHECK(ds.test.size() == 1);
  CHECK(ds.positive_rate == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("German-credit-sized ingest reproduces the published split shape") {
  // 700/100/200 rows with 203 train positives => positive rate 0.29
  const Schema s = schema_from_json(R"({
    "task": {"task_id": "credit", "positive_label": "bad", "negative_label": "good"},
    "label_field": "label",
    "fields": [
      {"name": "Amount", "kind": "numeric", "bins": [0, 2500, 5000, 10000, 20000]},
      {"name": "label", "kind": "categorical", "vocabulary": ["good", "bad"]}
    ]
  })");
  std::ostringstream csv;
  csv << "split,Amount,label\n";
  Rng rng(11);
  auto emit = [&](const char* split, size_t n, size_t positives) {
    for (size_t i = 0; i < n; ++i)
      csv << split << "," << 100.0 + rng.next_in(0.0, 15000.0) << ","
          << (i < positives ? "bad" : "good") << "\n";
  };
  emit("train", 700, 203);
  emit("val", 100, 30);
  emit("test", 200, 60);

  const DatasetSplit ds = load_dataset(csv.str(), s);
  CHECK(ds.train.size() == 700);
  CHECK(ds.validation.size() == 100);
  CHECK(ds.test.size() == 200);
  CHECK(ds.positive_rate == doctest::Approx(0.29).epsilon(1e-12));
}
