#pragma once

// Matthews correlation, validation-threshold selection, and the
// imbalance-aware validation signal q = 1 - MCC.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedtab/schema.hpp"

namespace fedtab {

struct ConfusionCounts {
  int64_t tp = 0;
  int64_t tn = 0;
  int64_t fp = 0;
  int64_t fn = 0;

  int64_t total() const { return tp + tn + fp + fn; }
};

// (tp*tn - fp*fn) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn)); 0 whenever a
// denominator factor vanishes (single-class predictions or labels)
inline double mcc(const ConfusionCounts& c) {
  const double pp = static_cast<double>(c.tp + c.fp);
  const double ap = static_cast<double>(c.tp + c.fn);
  const double pn = static_cast<double>(c.tn + c.fp);
  const double an = static_cast<double>(c.tn + c.fn);
  if (pp == 0.0 || ap == 0.0 || pn == 0.0 || an == 0.0) return 0.0;
  const double num =
      static_cast<double>(c.tp) * static_cast<double>(c.tn) -
      static_cast<double>(c.fp) * static_cast<double>(c.fn);
  return num / std::sqrt(pp * ap * pn * an);
}

struct ValidationSignal {
  double q = 1.0;          // 1 - mcc
  double mcc = 0.0;
  double threshold = 0.0;  // predict positive iff score > threshold
};

inline ConfusionCounts confusion_at(std::span<const double> scores, std::span<const int> labels,
                                    double threshold) {
  ConfusionCounts c;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    const bool truth = labels[i] != 0;
    if (pred && truth) ++c.tp;
    else if (pred && !truth) ++c.fp;
    else if (!pred && truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// Sweeps midpoints between consecutive distinct sorted scores plus the two
// infinite sentinels; returns the MCC-maximizing threshold, smallest first on
// ties.
inline ValidationSignal select_threshold(std::span<const double> scores,
                                         std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("select_threshold: scores/labels length mismatch");
  if (scores.empty()) throw std::invalid_argument("select_threshold: empty input");

  std::vector<double> distinct(scores.begin(), scores.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (size_t i = 0; i + 1 < distinct.size(); ++i)
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  candidates.push_back(std::numeric_limits<double>::infinity());

  ValidationSignal best;
  best.mcc = -2.0;
  for (double t : candidates) {
    const double m = mcc(confusion_at(scores, labels, t));
    if (m > best.mcc) {
      best.mcc = m;
      best.threshold = t;
    }
  }
  best.q = 1.0 - best.mcc;
  return best;
}

// Scores the validation records with the supplied model and selects the
// decision threshold on them; this is the scorer-refresh signal.
inline ValidationSignal validation_loss(const std::function<double(const Record&)>& model,
                                        const Schema& schema,
                                        const std::vector<Record>& validation) {
  if (validation.empty()) throw std::invalid_argument("validation_loss: empty validation split");
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(validation.size());
  labels.reserve(validation.size());
  for (const auto& r : validation) {
    scores.push_back(model(r));
    labels.push_back(schema.label_value(r));
  }
  return select_threshold(scores, labels);
}

}  // namespace fedtab
