#pragma once

// Fixed-length feature encoding of records: one-hot slots per categorical
// token, a standardized slot per numeric (mean/std fitted on the client's
// train split), and a missing indicator per field. The learner encodes
// features only; the scorer additionally sees the label one-hot, mirroring a
// scorer that reads the full serialized record.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtab/schema.hpp"

namespace fedtab {

struct NumericStats {
  double mean = 0.0;
  double std = 1.0;
};

class FeatureEncoder {
 public:
  static FeatureEncoder fit(const Schema& schema, const std::vector<Record>& train,
                            bool include_label) {
    FeatureEncoder enc;
    enc.schema_ = schema;
    enc.include_label_ = include_label;

    size_t offset = 0;
    for (const auto& f : schema.fields) {
      const bool is_label = f.name == schema.label_field;
      if (is_label && !include_label) continue;
      enc.offsets_.push_back(offset);
      enc.field_indices_.push_back(f.position);
      if (f.kind == FieldKind::Categorical) {
        offset += f.vocabulary.size() + (is_label ? 0 : 1);  // tokens + missing slot
      } else {
        offset += 2;  // standardized value + missing slot
      }
    }
    enc.dim_ = offset;

    for (const auto& f : schema.fields) {
      NumericStats st;
      if (f.kind == FieldKind::Numeric) {
        double sum = 0.0, sum_sq = 0.0;
        size_t n = 0;
        for (const auto& r : train) {
          auto it = r.find(f.name);
          if (it == r.end() || it->second.kind != Value::Kind::Number) continue;
          sum += it->second.number;
          sum_sq += it->second.number * it->second.number;
          ++n;
        }
        if (n > 0) {
          st.mean = sum / static_cast<double>(n);
          const double var = sum_sq / static_cast<double>(n) - st.mean * st.mean;
          st.std = var > 1e-24 ? std::sqrt(var) : 1.0;
        }
      }
      enc.stats_.push_back(st);
    }
    return enc;
  }

  size_t dim() const { return dim_; }
  const Schema& schema() const { return schema_; }

  std::vector<double> encode(const Record& record) const {
    std::vector<double> out(dim_, 0.0);
    for (size_t k = 0; k < field_indices_.size(); ++k) {
      const FieldSpec& f = schema_.fields[field_indices_[k]];
      const size_t base = offsets_[k];
      const bool is_label = f.name == schema_.label_field;
      auto it = record.find(f.name);
      const bool missing = it == record.end() || it->second.is_missing();
      if (f.kind == FieldKind::Categorical) {
        if (missing) {
          if (!is_label) out[base + f.vocabulary.size()] = 1.0;
          continue;
        }
        if (it->second.kind != Value::Kind::Category)
          throw std::invalid_argument("encode: field " + f.name + " is not categorical");
        for (size_t t = 0; t < f.vocabulary.size(); ++t) {
          if (f.vocabulary[t] == it->second.category) {
            out[base + t] = 1.0;
            break;
          }
        }
      } else {
        if (missing) {
          out[base + 1] = 1.0;
          continue;
        }
        if (it->second.kind != Value::Kind::Number)
          throw std::invalid_argument("encode: field " + f.name + " is not numeric");
        const NumericStats& st = stats_[f.position];
        out[base] = (it->second.number - st.mean) / st.std;
      }
    }
    return out;
  }

 private:
  Schema schema_;
  bool include_label_ = false;
  size_t dim_ = 0;
  std::vector<size_t> offsets_;        // per encoded field
  std::vector<size_t> field_indices_;  // schema field position per encoded field
  std::vector<NumericStats> stats_;    // per schema field position
};

}  // namespace fedtab
