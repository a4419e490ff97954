#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace topgan::eval {

struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels,
                          int positive_class = 1);

/// Undefined ratios (zero denominator) stay empty.
struct MetricSet {
  double accuracy = 0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> auc;
};

MetricSet metrics(const ConfusionCounts& c);

/// Mann-Whitney AUC with half credit for tied scores.
double roc_auc(std::span<const double> scores, std::span<const int> labels, int positive_class = 1);

}  // namespace topgan::eval
