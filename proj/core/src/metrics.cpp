#include "topgan/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "topgan/errors.hpp"

namespace topgan::eval {

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels,
                          int positive_class) {
  require(predictions.size() == labels.size(), "confusion: predictions and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pos = labels[i] == positive_class;
    const bool hit = predictions[i] == labels[i];
    if (pos) (hit ? c.tp : c.fn)++;
    else (hit ? c.tn : c.fp)++;
  }
  return c;
}

MetricSet metrics(const ConfusionCounts& c) {
  require(c.total() > 0, "metrics: empty confusion counts");
  MetricSet m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fn > 0) m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return m;
}

// Rank-sum with midranks for ties.
double roc_auc(std::span<const double> scores, std::span<const int> labels, int positive_class) {
  require(scores.size() == labels.size(), "auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == positive_class) {
        rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  require(n_pos > 0 && n_neg > 0, "auc: both classes must be present");
  const double p = static_cast<double>(n_pos);
  return (rank_sum - p * (p + 1) / 2) / (p * static_cast<double>(n_neg));
}

}  // namespace topgan::eval
