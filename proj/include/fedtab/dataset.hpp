#pragma once

// CSV ingestion into validated train/validation/test splits.
//
// Splits are always designated explicitly: either a "split" column in a
// single file (values train/val/test) or three separate files. Nothing is
// ever split randomly at load time.

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fedtab/schema.hpp"
#include "fedtab/text_format.hpp"

namespace fedtab {

struct DatasetSplit {
  std::vector<Record> train;
  std::vector<Record> validation;
  std::vector<Record> test;
  double positive_rate = 0.0;  // empirical positive fraction of train
};

class IngestError : public std::runtime_error {
 public:
  IngestError(std::string message, size_t row = 0, std::string field = {})
      : std::runtime_error(std::move(message)), row(row), field(std::move(field)) {}
  size_t row;         // 1-based data row, 0 if not row-specific
  std::string field;  // offending column, empty if not field-specific
};

inline double recompute_positive_rate(const Schema& schema, const std::vector<Record>& train) {
  if (train.empty()) throw IngestError("no train records");
  size_t positives = 0;
  for (const auto& r : train) positives += static_cast<size_t>(schema.label_value(r));
  return static_cast<double>(positives) / static_cast<double>(train.size());
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.emplace_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  for (size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) lines.push_back(line);
      start = i + 1;
    }
  }
  return lines;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable parse_csv(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty()) throw IngestError("empty csv: no header row");
  CsvTable t;
  t.header = split_csv_line(lines[0]);
  for (size_t i = 1; i < lines.size(); ++i) t.rows.push_back(split_csv_line(lines[i]));
  return t;
}

inline Record record_from_row(const Schema& schema, const std::vector<std::string>& header,
                              const std::vector<std::string>& cells, size_t row) {
  if (cells.size() != header.size())
    throw IngestError("row " + std::to_string(row) + ": expected " +
                          std::to_string(header.size()) + " cells, got " +
                          std::to_string(cells.size()),
                      row);
  Record r;
  for (size_t c = 0; c < header.size(); ++c) {
    const FieldSpec* f = schema.find(header[c]);
    if (f == nullptr) continue;  // split / id columns handled by caller
    const std::string& cell = cells[c];
    if (cell.empty() || cell == "nan") {
      if (f->name == schema.label_field)
        throw IngestError("row " + std::to_string(row) + ": missing label in field " + f->name,
                          row, f->name);
      r[f->name] = Value::missing();
      continue;
    }
    if (f->kind == FieldKind::Numeric) {
      double v = 0.0;
      if (!parse_number(cell, v))
        throw IngestError("row " + std::to_string(row) + ": unparseable numeric '" + cell +
                              "' in field " + f->name,
                          row, f->name);
      r[f->name] = Value::num(v);
    } else {
      if (std::find(f->vocabulary.begin(), f->vocabulary.end(), cell) == f->vocabulary.end())
        throw IngestError("row " + std::to_string(row) + ": category '" + cell +
                              "' not in vocabulary of field " + f->name,
                          row, f->name);
      r[f->name] = Value::cat(cell);
    }
  }
  for (const auto& f : schema.fields) {
    if (r.find(f.name) == r.end())
      throw IngestError("row " + std::to_string(row) + ": missing field " + f.name, row, f.name);
  }
  return r;
}

inline void check_header(const Schema& schema, const std::vector<std::string>& header,
                         const std::string& split_column, bool expect_split) {
  std::set<std::string> seen;
  bool has_split = false;
  for (const auto& name : header) {
    if (!seen.insert(name).second) throw IngestError("duplicate column '" + name + "'");
    if (name == split_column && expect_split) {
      has_split = true;
      continue;
    }
    if (name == "id") continue;
    if (schema.find(name) == nullptr) throw IngestError("unknown column '" + name + "'", 0, name);
  }
  for (const auto& f : schema.fields)
    if (seen.find(f.name) == seen.end())
      throw IngestError("header does not cover schema field '" + f.name + "'", 0, f.name);
  if (expect_split && !has_split)
    throw IngestError("header has no split column '" + split_column + "'");
}

}  // namespace detail

// Single-file loader; the split column assigns each row to train/val/test.
inline DatasetSplit load_dataset(std::string_view csv, const Schema& schema,
                                 const std::string& split_column = "split") {
  auto table = detail::parse_csv(csv);
  detail::check_header(schema, table.header, split_column, /*expect_split=*/true);
  if (table.rows.empty()) throw IngestError("no records");

  size_t split_idx = 0, id_idx = table.header.size();
  for (size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c] == split_column) split_idx = c;
    if (table.header[c] == "id") id_idx = c;
  }

  DatasetSplit ds;
  std::set<std::string> ids;
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const size_t row = i + 1;
    const auto& cells = table.rows[i];
    Record r = detail::record_from_row(schema, table.header, cells, row);
    if (id_idx < table.header.size() && !ids.insert(cells[id_idx]).second)
      throw IngestError("row " + std::to_string(row) + ": duplicate id '" + cells[id_idx] + "'",
                        row, "id");
    const std::string& split = cells[split_idx];
    if (split == "train")
      ds.train.push_back(std::move(r));
    else if (split == "val" || split == "validation")
      ds.validation.push_back(std::move(r));
    else if (split == "test")
      ds.test.push_back(std::move(r));
    else
      throw IngestError("row " + std::to_string(row) + ": unknown split '" + split + "'", row,
                        split_column);
  }
  ds.positive_rate = recompute_positive_rate(schema, ds.train);
  return ds;
}

// Three-file loader.
inline DatasetSplit load_dataset_files(std::string_view train_csv, std::string_view val_csv,
                                       std::string_view test_csv, const Schema& schema) {
  DatasetSplit ds;
  std::set<std::string> ids;
  auto load_one = [&](std::string_view csv, std::vector<Record>& out) {
    auto table = detail::parse_csv(csv);
    detail::check_header(schema, table.header, "", /*expect_split=*/false);
    size_t id_idx = table.header.size();
    for (size_t c = 0; c < table.header.size(); ++c)
      if (table.header[c] == "id") id_idx = c;
    for (size_t i = 0; i < table.rows.size(); ++i) {
      const size_t row = i + 1;
      out.push_back(detail::record_from_row(schema, table.header, table.rows[i], row));
      if (id_idx < table.header.size() && !ids.insert(table.rows[i][id_idx]).second)
        throw IngestError("row " + std::to_string(row) + ": duplicate id across splits '" +
                              table.rows[i][id_idx] + "'",
                          row, "id");
    }
  };
  load_one(train_csv, ds.train);
  load_one(val_csv, ds.validation);
  load_one(test_csv, ds.test);
  if (ds.train.empty() && ds.validation.empty() && ds.test.empty()) throw IngestError("no records");
  ds.positive_rate = recompute_positive_rate(schema, ds.train);
  return ds;
}

}  // namespace fedtab
