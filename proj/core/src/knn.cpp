#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <numeric>

#include "topgan/classify.hpp"

namespace topgan::clf {

void KnnConfig::validate(std::size_t train_size) const {
  require(train_size > 0, "knn: empty training set");
  require(k >= 1 && k % 2 == 1, "knn: k must be a positive odd number");
  require(static_cast<std::size_t>(k) <= train_size,
          fmt::format("knn: k = {} exceeds training set size {}", k, train_size));
}

std::vector<KnnVote> knn_vote(const std::vector<nn::Tensor>& train,
                              const std::vector<int>& train_labels,
                              const std::vector<nn::Tensor>& test, const KnnConfig& cfg) {
  cfg.validate(train.size());
  require(train.size() == train_labels.size(), "knn: images and labels differ in length");
  for (const auto& t : train)
    require(t.shape() == train.front().shape(), "knn: training images differ in shape");

  const auto k = static_cast<std::size_t>(cfg.k);
  std::vector<double> dist(train.size());
  std::vector<std::size_t> order(train.size());
  std::vector<KnnVote> out;
  out.reserve(test.size());
  for (const auto& q : test) {
    require(q.shape() == train.front().shape(), "knn: test image shape does not match training images");
    for (std::size_t i = 0; i < train.size(); ++i) {
      double d = 0;
      const float* a = train[i].data();
      const float* b = q.data();
      for (std::size_t j = 0; j < q.size(); ++j) d += std::abs(static_cast<double>(a[j]) - b[j]);
      dist[i] = d;
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

    std::map<int, std::pair<std::size_t, double>> votes;  // label -> (count, summed distance)
    for (std::size_t i = 0; i < k; ++i) {
      auto& v = votes[train_labels[order[i]]];
      ++v.first;
      v.second += dist[order[i]];
    }
    auto best = votes.begin();
    for (auto it = std::next(votes.begin()); it != votes.end(); ++it) {
      const auto& [c, s] = it->second;
      if (c > best->second.first || (c == best->second.first && s < best->second.second)) best = it;
    }
    KnnVote v;
    v.label = best->first;
    const auto pos = votes.find(1);
    v.positive_share = pos == votes.end() ? 0.0 : static_cast<double>(pos->second.first) / static_cast<double>(k);
    out.push_back(v);
  }
  return out;
}

std::vector<int> knn_classify(const std::vector<nn::Tensor>& train,
                              const std::vector<int>& train_labels,
                              const std::vector<nn::Tensor>& test, const KnnConfig& cfg) {
  std::vector<int> labels;
  for (const auto& v : knn_vote(train, train_labels, test, cfg)) labels.push_back(v.label);
  return labels;
}

}  // namespace topgan::clf
