#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "topgan/classify.hpp"
#include "topgan/metrics.hpp"
#include "topgan/synthdata.hpp"

namespace topgan::eval {

struct EncodeConfig {
  double opd_min_nm = 0;
  double opd_max_nm = 250;
  std::size_t size = 64;
};

void to_json(nlohmann::json& j, const EncodeConfig& c);
void from_json(const nlohmann::json& j, EncodeConfig& c);

/// Encoded labeled images with class indices (order of manifest specs) and
/// generation-time folds.
struct LabeledSet {
  std::vector<nn::Tensor> images;
  std::vector<int> labels;
  std::vector<int> folds;
};

LabeledSet load_labeled(const synth::DatasetManifest& manifest,
                        const std::filesystem::path& manifest_dir, const EncodeConfig& enc);
std::vector<nn::Tensor> load_unlabeled(const synth::DatasetManifest& manifest,
                                       const std::filesystem::path& manifest_dir,
                                       const EncodeConfig& enc);

struct FoldSplit {
  int fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per fold: test = that fold; train = train_size/2 per class drawn from the
/// other folds. Depends only on (data labels/folds, train_size, seed).
std::vector<FoldSplit> make_splits(const LabeledSet& data, std::size_t train_size,
                                   std::uint64_t seed);
std::string split_hash(const std::vector<FoldSplit>& splits);

struct FoldOutcome {
  std::vector<int> predictions;
  std::vector<double> scores;  // higher means more positive (class 1)
};

class Method {
 public:
  virtual ~Method() = default;
  virtual std::string name() const = 0;
  virtual FoldOutcome run(const LabeledSet& data, const FoldSplit& split, std::uint64_t seed) = 0;
};

inline const std::vector<std::string> kMethodNames{"knn", "cnn", "cnn-aug", "topgan", "topgan-aug"};

struct MethodConfig {
  clf::KnnConfig knn;
  clf::ClfTrainConfig train;
  gan::ArchConfig arch;
  std::optional<nn::Network<float>> discriminator;  // required by topgan*
};

std::unique_ptr<Method> make_method(const std::string& name, const MethodConfig& cfg);

struct FoldResult {
  int fold = 0;
  ConfusionCounts counts;
  MetricSet metrics;
};

struct SweepRow {
  std::string method;
  std::size_t train_size = 0;
  std::vector<FoldResult> folds;
  MetricSet mean;
  double accuracy_min = 0;
  double accuracy_max = 0;
  std::string split_hash;
};

/// Five-fold protocol for one method at one training size; class 1 is the
/// positive class.
SweepRow run_cv(Method& method, const LabeledSet& data, std::size_t train_size, std::uint64_t seed);

struct SweepResult {
  std::uint64_t seed = 0;
  std::vector<SweepRow> rows;
};

using ProgressCallback = std::function<void(const SweepRow&)>;

SweepResult sweep(const std::vector<Method*>& methods, const std::vector<std::size_t>& train_sizes,
                  const LabeledSet& data, std::uint64_t seed, const ProgressCallback& progress = {});

/// method,train_size,fold,acc,sens,spec,auc; fold rows then a "mean" row per
/// (method, size). Six decimals, NA for undefined values.
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);
nlohmann::json sweep_json(const SweepResult& result);
/// Mean accuracy vs training size per method with min/max bands.
void write_sweep_plot(const std::filesystem::path& path, const SweepResult& result);

}  // namespace topgan::eval
