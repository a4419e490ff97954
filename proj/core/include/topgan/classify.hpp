#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

#include "topgan/gan.hpp"
#include "topgan/network.hpp"

namespace topgan::clf {

inline constexpr int kHeadUnits = 100;
inline constexpr double kHeadDropout = 0.5;

/// fc(100) lrelu dropout(0.5), fc(100) lrelu dropout(0.5), fc(2), sigmoid.
std::vector<nn::LayerSpec> head_specs();
/// Discriminator body followed by the classification head.
std::vector<nn::LayerSpec> classifier_specs(const gan::ArchConfig& arch);
/// Number of leading layers before the first fc layer.
std::size_t body_length(const std::vector<nn::LayerSpec>& specs);

/// Copies the discriminator body (weights and batchnorm statistics) and
/// appends a freshly initialised head drawn from `seed`.
nn::Network<float> build_topgan(const nn::Network<float>& discriminator, std::uint64_t seed);
nn::Network<float> build_scratch_cnn(const gan::ArchConfig& arch, std::uint64_t seed);

/// Dihedral transform `index` in 0..7: index = 2 * r + f applies a horizontal
/// flip when f = 1, then r quarter turns counter-clockwise.
nn::Tensor dihedral(const nn::Tensor& image, int index);
nn::Tensor inverse_dihedral(const nn::Tensor& image, int index);
/// The 8 dihedral images of a square HWC image, in index order.
std::array<nn::Tensor, 8> augment_x8(const nn::Tensor& image);

struct ClfTrainConfig {
  nn::AdamConfig adam{1e-5, 0.6, 0.99, 1e-8};
  int max_epochs = 900;
  int batch = 16;
  bool augment = false;
  bool freeze_body = false;
  double convergence_delta = 1e-5;
  int convergence_window = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const ClfTrainConfig& c);
void from_json(const nlohmann::json& j, ClfTrainConfig& c);

struct ClfEpoch {
  int epoch = 0;
  double loss = 0;
  double train_accuracy = 0;
  friend bool operator==(const ClfEpoch&, const ClfEpoch&) = default;
};

struct TrainLog {
  std::vector<ClfEpoch> epochs;
  bool converged = false;
};

/// Mean binary cross-entropy of both sigmoid outputs against one-hot labels
/// in {0, 1}. Stops after max_epochs or once the epoch loss moved by less
/// than convergence_delta on each of convergence_window consecutive epochs.
TrainLog train_classifier(nn::Network<float>& net, const std::vector<nn::Tensor>& images,
                          const std::vector<int>& labels, const ClfTrainConfig& cfg);

void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log);

struct Prediction {
  int label = 0;
  float score = 0;   // sigmoid output of the predicted class
  float margin = 0;  // p1 - p0, used for ranking
};

/// argmax of the two outputs, ties to class 0.
Prediction decide(float p0, float p1);

std::vector<Prediction> predict(nn::Network<float>& net, const std::vector<nn::Tensor>& images,
                                std::size_t batch = 64);

struct KnnConfig {
  int k = 9;
  void validate(std::size_t train_size) const;
};

struct KnnVote {
  int label = 0;
  double positive_share = 0;  // fraction of the k neighbours labelled 1
};

/// L1 nearest neighbours; distance ties go to the lower train index, vote
/// ties to the class with the smaller summed neighbour distance, then to the
/// lower label.
std::vector<KnnVote> knn_vote(const std::vector<nn::Tensor>& train,
                              const std::vector<int>& train_labels,
                              const std::vector<nn::Tensor>& test, const KnnConfig& cfg);
std::vector<int> knn_classify(const std::vector<nn::Tensor>& train,
                              const std::vector<int>& train_labels,
                              const std::vector<nn::Tensor>& test, const KnnConfig& cfg);

}  // namespace topgan::clf
