#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "test_support.hpp"
#include "topgan/classify.hpp"

using namespace topgan;
using namespace topgan::clf;
using nn::Mode;
using namespace topgan::test;

namespace {

gan::ArchConfig small_arch() {
  gan::ArchConfig a;
  a.image_size = 32;
  a.base_channels = 4;
  a.conv_layers = 2;
  return a;
}

nn::Tensor grid2x2(float a, float b, float c, float d) {
  return nn::Tensor({2, 2, 1}, std::vector<float>{a, b, c, d});
}

std::vector<nn::Tensor> random_images(std::size_t n, nn::Shape shape, std::uint64_t seed) {
  std::vector<nn::Tensor> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(test::random_tensor<float>(shape, derive_seed(seed, {i})));
  return out;
}

// Two Gaussian clusters in 2D separated along the diagonal.
void toy_embedding(std::size_t n, std::uint64_t seed, std::vector<nn::Tensor>& x, std::vector<int>& y) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.3f);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const float c = label ? 1.5f : -1.5f;
    x.push_back(nn::Tensor({2}, std::vector<float>{c + noise(rng), c + noise(rng)}));
    y.push_back(label);
  }
}

}  // namespace

TEST(Architecture, HeadLayout) {
  const auto head = head_specs();
  ASSERT_EQ(head.size(), 8u);
  EXPECT_EQ(head[0], nn::LayerSpec::fc(100));
  EXPECT_EQ(head[2], nn::LayerSpec::dropout(0.5));
  EXPECT_EQ(head[3], nn::LayerSpec::fc(100));
  EXPECT_EQ(head[5], nn::LayerSpec::dropout(0.5));
  EXPECT_EQ(head[6], nn::LayerSpec::fc(2));
  EXPECT_EQ(head[7], nn::LayerSpec::sigmoid());
}

TEST(BuildTopgan, CopiesBodyAndDrawsFreshHead) {
  auto disc = gan::build_discriminator(small_arch(), 3);
  disc.forward(test::random_tensor<float>({4, 32, 32, 3}, 1), Mode::train, 1);  // non-trivial BN stats
  auto a = build_topgan(disc, 10), b = build_topgan(disc, 11);
  const std::size_t body = body_length(a.specs());
  EXPECT_EQ(body, body_length(disc.specs()));
  for (std::size_t i = 0; i < body; ++i) {
    auto& src = disc.layer(i);
    auto& dst = a.layer(i);
    auto& other = b.layer(i);
    const auto sp = src.params(), dp = dst.params(), op = other.params();
    for (std::size_t k = 0; k < sp.size(); ++k) {
      EXPECT_EQ(sp[k]->value, dp[k]->value);
      EXPECT_EQ(dp[k]->value, op[k]->value);
    }
    const auto sb = src.buffers(), db = dst.buffers();
    for (std::size_t k = 0; k < sb.size(); ++k) EXPECT_EQ(sb[k]->value, db[k]->value);
  }
  auto& ha = a.layer(body);
  auto& hb = b.layer(body);
  EXPECT_NE(ha.params()[0]->value, hb.params()[0]->value);

  // Head weights follow N(0, 0.02).
  std::vector<double> w;
  for (std::size_t i = body; i < a.layer_count(); ++i) {
    auto& layer = a.layer(i);
    if (layer.spec().kind != nn::LayerKind::fc) continue;
    for (float v : layer.params()[0]->value.values()) w.push_back(v);
  }
  ASSERT_GE(w.size(), 10000u);
  double mean = 0, var = 0;
  for (double v : w) mean += v / w.size();
  for (double v : w) var += (v - mean) * (v - mean) / w.size();
  EXPECT_LT(std::abs(mean), 0.005);
  EXPECT_GE(std::sqrt(var), 0.015);
  EXPECT_LE(std::sqrt(var), 0.025);
}

TEST(BuildTopgan, BodyActivationsMatchSourceBitwise) {
  auto disc = gan::build_discriminator(small_arch(), 5);
  disc.forward(test::random_tensor<float>({4, 32, 32, 3}, 2), Mode::train, 1);
  auto net = build_topgan(disc, 6);
  const std::size_t body = body_length(net.specs());
  const auto x = test::random_tensor<float>({3, 32, 32, 3}, 7);
  EXPECT_EQ(net.forward_range(x, 0, body, Mode::eval), disc.forward_range(x, 0, body, Mode::eval));
}

TEST(BuildTopgan, RejectsNonDiscriminator) {
  nn::Network<float> wrong({32, 32, 3}, {nn::LayerSpec::conv(4), nn::LayerSpec::fc(2), nn::LayerSpec::sigmoid()}, 1);
  EXPECT_THROW(build_topgan(wrong, 1), ValidationError);
}

TEST(ScratchCnn, SameArchitectureAsTopgan) {
  gan::ArchConfig full_scale;
  full_scale.image_size = 128;
  full_scale.base_channels = 4;
  auto scratch = build_scratch_cnn(full_scale, 1);
  auto topgan = build_topgan(gan::build_discriminator(full_scale, 2), 3);
  EXPECT_EQ(scratch.architecture(), topgan.architecture());
  const auto y = scratch.forward(test::random_tensor<float>({1, 128, 128, 3}, 1), Mode::eval);
  EXPECT_EQ(y.shape(), (nn::Shape{1, 2}));

  auto a = build_scratch_cnn(small_arch(), 1), b = build_scratch_cnn(small_arch(), 2);
  const auto x = test::random_tensor<float>({4, 32, 32, 3}, 3);
  const auto pa = a.forward(x, Mode::eval), pb = b.forward(x, Mode::eval);
  double la = 0, lb = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    la -= std::log(pa[i * 2 + i % 2]);
    lb -= std::log(pb[i * 2 + i % 2]);
  }
  EXPECT_NE(la, lb);
}

TEST(Augment, AsymmetricTwoByTwoGivesEightDistinctImages) {
  const auto out = augment_x8(grid2x2(1, 2, 3, 4));
  std::set<std::vector<float>> distinct;
  for (const auto& t : out) distinct.insert({t.values().begin(), t.values().end()});
  EXPECT_EQ(distinct.size(), 8u);
  EXPECT_EQ(out[0], grid2x2(1, 2, 3, 4));
}

TEST(Augment, ConstantImageGivesEightCopies) {
  const nn::Tensor c({5, 5, 3}, 0.25f);
  for (const auto& t : augment_x8(c)) EXPECT_EQ(t, c);
  EXPECT_THROW(augment_x8(nn::Tensor({4, 5, 3})), ValidationError);
}

TEST(Augment, InverseRecoversAndOrbitIsClosed) {
  const auto img = test::random_tensor<float>({6, 6, 2}, 9);
  const auto orbit = augment_x8(img);
  std::set<std::vector<float>> base;
  for (const auto& t : orbit) base.insert({t.values().begin(), t.values().end()});
  ASSERT_EQ(base.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(inverse_dihedral(orbit[static_cast<std::size_t>(i)], i), img) << i;
    std::set<std::vector<float>> again;
    for (const auto& t : augment_x8(orbit[static_cast<std::size_t>(i)])) again.insert({t.values().begin(), t.values().end()});
    EXPECT_EQ(again, base) << i;
  }
  // Quarter turn counter-clockwise: the top-right corner moves to the top-left.
  EXPECT_EQ(dihedral(grid2x2(1, 2, 3, 4), 2), grid2x2(2, 4, 1, 3));
  EXPECT_EQ(dihedral(grid2x2(1, 2, 3, 4), 1), grid2x2(2, 1, 4, 3));
}

TEST(Decide, ArgmaxWithTiesToClassZero) {
  auto p = decide(0.9f, 0.2f);
  EXPECT_EQ(p.label, 0);
  EXPECT_FLOAT_EQ(p.score, 0.9f);
  p = decide(0.5f, 0.5f);
  EXPECT_EQ(p.label, 0);
  p = decide(0.1f, 0.7f);
  EXPECT_EQ(p.label, 1);
  EXPECT_FLOAT_EQ(p.score, 0.7f);
}

TEST(Predict, EvalModeIsRepeatable) {
  auto net = build_scratch_cnn(small_arch(), 4);
  const auto images = random_images(5, {32, 32, 3}, 1);
  const auto a = predict(net, images, 2), b = predict(net, images, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_EQ(a[i].margin, b[i].margin);
  }
  EXPECT_THROW(predict(net, random_images(1, {16, 16, 3}, 1)), ValidationError);
}

TEST(TrainClassifier, TenImageRegimeAcceptedAndDeterministic) {
  const auto images = random_images(10, {32, 32, 3}, 2);
  const std::vector<int> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  ClfTrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.seed = 8;
  auto a = build_scratch_cnn(small_arch(), 1), b = build_scratch_cnn(small_arch(), 1);
  const auto la = train_classifier(a, images, labels, cfg);
  const auto lb = train_classifier(b, images, labels, cfg);
  EXPECT_EQ(la.epochs.size(), 3u);
  EXPECT_EQ(la.epochs, lb.epochs);
  const auto sa = a.state(), sb = b.state();
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(*sa[i].second, *sb[i].second) << sa[i].first;

  cfg.augment = true;
  cfg.max_epochs = 1;
  EXPECT_EQ(train_classifier(a, images, labels, cfg).epochs.size(), 1u);
}

TEST(TrainClassifier, ZeroLearningRateKeepsWeights) {
  const auto images = random_images(6, {32, 32, 3}, 3);
  const std::vector<int> labels{0, 1, 0, 1, 1, 0};
  auto net = build_scratch_cnn(small_arch(), 2);
  const auto before = net;
  ClfTrainConfig cfg;
  cfg.adam.lr = 0;
  cfg.max_epochs = 2;
  train_classifier(net, images, labels, cfg);
  const auto p = net.parameters();
  const auto q = before.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i]->value, q[i]->value);
}

TEST(TrainClassifier, RejectsSingleClassAndBadLabels) {
  auto net = build_scratch_cnn(small_arch(), 2);
  const auto images = random_images(4, {32, 32, 3}, 3);
  ClfTrainConfig cfg;
  cfg.max_epochs = 1;
  EXPECT_THROW(train_classifier(net, images, {1, 1, 1, 1}, cfg), ValidationError);
  EXPECT_THROW(train_classifier(net, images, {0, 1, 2, 1}, cfg), ValidationError);
  auto bad = images;
  bad[0][3] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(train_classifier(net, bad, {0, 1, 0, 1}, cfg), NumericError);
}

TEST(TrainClassifier, ConvergenceRuleStopsEarly) {
  auto net = build_scratch_cnn(small_arch(), 2);
  const auto images = random_images(4, {32, 32, 3}, 4);
  ClfTrainConfig cfg;
  cfg.max_epochs = 900;
  cfg.convergence_delta = 1e9;
  const auto quick = train_classifier(net, images, {0, 1, 0, 1}, cfg);
  EXPECT_TRUE(quick.converged);
  EXPECT_EQ(quick.epochs.size(), 21u);
  cfg.convergence_delta = 0;
  cfg.max_epochs = 5;
  const auto capped = train_classifier(net, images, {0, 1, 0, 1}, cfg);
  EXPECT_FALSE(capped.converged);
  EXPECT_EQ(capped.epochs.size(), 5u);
}

TEST(TrainClassifier, SeparableToyReachesFullAccuracy) {
  std::vector<nn::Tensor> x;
  std::vector<int> y;
  toy_embedding(40, 1, x, y);
  nn::Network<float> net({2}, head_specs(), 3);
  ClfTrainConfig cfg;
  cfg.seed = 2;
  const auto log = train_classifier(net, x, y, cfg);
  ASSERT_LE(log.epochs.size(), 900u);
  std::size_t correct = 0;
  const auto preds = predict(net, x);
  for (std::size_t i = 0; i < x.size(); ++i) correct += preds[i].label == y[i];
  EXPECT_EQ(correct, x.size());
}

TEST(TrainClassifier, LabelFlipSymmetry) {
  std::vector<nn::Tensor> x, test_x;
  std::vector<int> y, test_y;
  toy_embedding(40, 1, x, y);
  toy_embedding(40, 2, test_x, test_y);
  nn::Network<float> a({2}, head_specs(), 3);
  nn::Network<float> b = a;
  // Mirrored init: swap the two output units of the last fc layer.
  auto& last = b.layer(b.layer_count() - 2);
  auto params = last.params();
  auto& w = params[0]->value;
  const std::size_t in = w.dim(0);
  for (std::size_t r = 0; r < in; ++r) std::swap(w[r * 2], w[r * 2 + 1]);
  std::swap(params[1]->value[0], params[1]->value[1]);

  std::vector<int> flipped(y.size()), test_flipped(test_y.size());
  for (std::size_t i = 0; i < y.size(); ++i) flipped[i] = 1 - y[i];
  for (std::size_t i = 0; i < test_y.size(); ++i) test_flipped[i] = 1 - test_y[i];
  ClfTrainConfig cfg;
  cfg.max_epochs = 100;
  cfg.adam.lr = 1e-3;
  cfg.seed = 4;
  train_classifier(a, x, y, cfg);
  train_classifier(b, x, flipped, cfg);
  auto accuracy = [](nn::Network<float>& net, const std::vector<nn::Tensor>& xs, const std::vector<int>& ys) {
    std::size_t c = 0;
    const auto p = predict(net, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) c += p[i].label == ys[i];
    return static_cast<double>(c) / xs.size();
  };
  EXPECT_EQ(accuracy(a, test_x, test_y), accuracy(b, test_x, test_flipped));
}

TEST(Knn, ExactMatchAndUnanimousVote) {
  const auto train = random_images(9, {4, 4, 1}, 1);
  std::vector<int> labels{0, 1, 0, 1, 1, 0, 0, 1, 0};
  const auto hit = knn_classify(train, labels, {train[4]}, KnnConfig{1});
  EXPECT_EQ(hit[0], 1);
  std::vector<int> all_a(9, 1);
  const auto any = knn_classify(train, all_a, random_images(5, {4, 4, 1}, 2), KnnConfig{9});
  for (int l : any) EXPECT_EQ(l, 1);
}

TEST(Knn, ConfigValidation) {
  const auto train = random_images(5, {2, 2, 1}, 1);
  const std::vector<int> labels{0, 1, 0, 1, 0};
  EXPECT_THROW(knn_classify(train, labels, train, KnnConfig{2}), ValidationError);
  EXPECT_THROW(knn_classify(train, labels, train, KnnConfig{7}), ValidationError);
  EXPECT_THROW(knn_classify({}, {}, train, KnnConfig{1}), ValidationError);
  EXPECT_EQ(KnnConfig{}.k, 9);
}

TEST(Knn, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto train = random_images(20, {3, 3, 2}, 100 + static_cast<std::uint64_t>(trial));
    const auto test = random_images(10, {3, 3, 2}, 200 + static_cast<std::uint64_t>(trial));
    std::vector<int> labels(20);
    for (auto& l : labels) l = static_cast<int>(rng() % 2);
    ASSERT_EQ(knn_classify(train, labels, test, KnnConfig{9}), knn_oracle(train, labels, test, 9)) << trial;
  }
}

TEST(Knn, DistanceTiesGoToLowerIndexAndOrderInvariance) {
  // Three train points equidistant from the query; k = 1 takes index 0.
  std::vector<nn::Tensor> train{nn::Tensor({1}, std::vector<float>{1}), nn::Tensor({1}, std::vector<float>{-1}),
                                nn::Tensor({1}, std::vector<float>{1})};
  EXPECT_EQ(knn_classify(train, {1, 0, 0}, {nn::Tensor({1}, 0.0f)}, KnnConfig{1})[0], 1);
  EXPECT_EQ(knn_classify(train, {0, 1, 1}, {nn::Tensor({1}, 0.0f)}, KnnConfig{1})[0], 0);

  const auto tr = random_images(15, {2, 2, 1}, 7);
  const auto te = random_images(6, {2, 2, 1}, 8);
  std::vector<int> labels{0, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1};
  std::vector<std::size_t> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  std::vector<nn::Tensor> tr2;
  std::vector<int> l2;
  for (auto i : perm) {
    tr2.push_back(tr[i]);
    l2.push_back(labels[i]);
  }
  EXPECT_EQ(knn_classify(tr, labels, te, KnnConfig{5}), knn_classify(tr2, l2, te, KnnConfig{5}));
}
