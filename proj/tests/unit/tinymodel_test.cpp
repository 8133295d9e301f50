// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"
#include "fsd/error.hpp"
#include "fsd/rng.hpp"
#include "fsd/tiny_model.hpp"

namespace fsd {
namespace {

TinyModel single_pixel() {
  TinyModel m({1, 1, 1}, 1, 2);
  m.w1() = {1.0};
  m.w2() = {1.0, -1.0};
  return m;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

TEST(TinyModel, SinglePixelForward) {
  const auto f = forward(single_pixel(), Image(1, 1, 1, 0.5));
  EXPECT_DOUBLE_EQ(f.logits[0], 0.5);
  EXPECT_DOUBLE_EQ(f.logits[1], -0.5);
  EXPECT_NEAR(f.probs[0], 0.7311, 1e-4);
  EXPECT_NEAR(f.probs[1], 0.2689, 1e-4);
  EXPECT_EQ(f.embedding, std::vector<double>{0.5});
}

TEST(TinyModel, SoftmaxIsShiftInvariant) {
  const std::vector<double> z = {1.5, -2.0, 0.25, 3.0};
  std::vector<double> shifted = z;
  for (double& v : shifted) v += 123.0;
  const auto a = softmax(z);
  const auto b = softmax(shifted);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_NEAR(a[i], b[i], 1e-12);
    sum += a[i];
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  EXPECT_EQ(big[0], 1.0);
}

TEST(TinyModel, ForwardDefinition) {
  const TinyModel m = TinyModel::random({4, 4, 3}, 8, 3, 5);
  const auto x = random_vector(m.input_size(), 6);
  const auto f = forward(m, x);
  for (int j = 0; j < m.hidden(); ++j) {
    double pre = m.b1()[j];
    for (std::size_t i = 0; i < x.size(); ++i) pre += m.w1()[j * x.size() + i] * x[i];
    EXPECT_NEAR(f.pre_activation[j], pre, 1e-12);
    EXPECT_EQ(f.embedding[j], std::max(0.0, f.pre_activation[j]));
  }
  for (int c = 0; c < m.classes(); ++c) {
    double z = m.b2()[c];
    for (int j = 0; j < m.hidden(); ++j) z += m.w2()[c * m.hidden() + j] * f.embedding[j];
    EXPECT_NEAR(f.logits[c], z, 1e-12);
  }
}

TEST(TinyModel, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const TinyModel m = TinyModel::random({8, 8, 3}, 16, 4, seed);
    const auto x = random_vector(m.input_size(), seed + 1000);
    const auto ref = forward(m, random_vector(m.input_size(), seed + 2000)).embedding;
    const int cls = static_cast<int>(seed % 4);
    for (const LossKind& loss : {LossKind{loss::CrossEntropy{cls}}, LossKind{loss::NegCosine{ref}},
                                 LossKind{loss::Margin{cls}}}) {
      EXPECT_LT(oracle::gradient_relative_error(m, x, loss), 1e-4)
          << "seed " << seed << " loss " << loss.index();
    }
  }
}

TEST(TinyModel, BatchedGradientsMatchOneAtATime) {
  const TinyModel m = TinyModel::random({8, 8, 3}, 16, 4, 21);
  std::vector<std::vector<double>> xs;
  for (std::uint64_t i = 0; i < 5; ++i) xs.push_back(random_vector(m.input_size(), 50 + i));
  const auto ref = forward(m, random_vector(m.input_size(), 60)).embedding;
  for (const LossKind& loss : {LossKind{loss::CrossEntropy{1}}, LossKind{loss::NegCosine{ref}},
                               LossKind{loss::Margin{3}}}) {
    const auto batch = loss_and_input_gradients(m, xs, loss);
    ASSERT_EQ(batch.size(), xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto one = loss_and_input_gradient(m, xs[i], loss);
      EXPECT_NEAR(batch[i].loss, one.loss, 1e-12);
      ASSERT_EQ(batch[i].gradient.values.size(), one.gradient.values.size());
      for (std::size_t k = 0; k < one.gradient.values.size(); ++k) {
        EXPECT_NEAR(batch[i].gradient.values[k], one.gradient.values[k], 1e-12);
      }
    }
  }
  EXPECT_TRUE(loss_and_input_gradients(m, {}, loss::CrossEntropy{0}).empty());
}

TEST(TinyModel, NegCosineAgainstItself) {
  const TinyModel m = TinyModel::random({8, 8, 3}, 16, 4, 3);
  const auto x = random_vector(m.input_size(), 4);
  const auto e = forward(m, x).embedding;
  const auto lg = loss_and_input_gradient(m, x, loss::NegCosine{e});
  EXPECT_NEAR(lg.loss, -1.0, 1e-12);
  for (double g : lg.gradient.values) EXPECT_NEAR(g, 0.0, 1e-12);

  std::vector<double> scaled = e;
  for (double& v : scaled) v *= 7.5;
  const auto other = forward(m, random_vector(m.input_size(), 9)).embedding;
  const auto y = random_vector(m.input_size(), 10);
  EXPECT_NEAR(loss_value(m, y, loss::NegCosine{scaled}), loss_value(m, y, loss::NegCosine{e}), 1e-12);
  EXPECT_THROW(loss_value(m, y, loss::NegCosine{std::vector<double>(16, 0.0)}), DegenerateError);
  EXPECT_THROW(loss_value(m, y, loss::NegCosine{std::vector<double>(3, 1.0)}), DomainError);
  static_cast<void>(other);
}

TEST(TinyModel, LossKindsAgreeWithDefinitions) {
  const TinyModel m = TinyModel::random({4, 4, 1}, 6, 3, 8);
  const auto x = random_vector(m.input_size(), 12);
  const auto f = forward(m, x);
  EXPECT_NEAR(loss_value(m, x, loss::CrossEntropy{1}), -std::log(f.probs[1]), 1e-12);
  const double best_other = std::max(f.probs[0], f.probs[2]);
  EXPECT_NEAR(loss_value(m, x, loss::Margin{1}), best_other - f.probs[1], 1e-15);
  EXPECT_THROW(loss_value(m, x, loss::CrossEntropy{3}), DomainError);
}

std::vector<Image> toy_images(int n, std::vector<int>& labels) {
  std::vector<Image> images;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    std::vector<double> d(16);
    for (int p = 0; p < 16; ++p) d[p] = (p < 8) == (label == 0) ? 0.8 : 0.2;
    d[i % 16] = 0.5;
    images.emplace_back(4, 4, 1, std::move(d));
    labels.push_back(label);
  }
  return images;
}

TEST(TinyModel, TrainingWithZeroRateChangesNothing) {
  std::vector<int> labels;
  const auto images = toy_images(20, labels);
  const TinyModel init = TinyModel::random({4, 4, 1}, 8, 2, 1);
  TrainOptions opt;
  opt.learning_rate = 0.0;
  opt.epochs = 3;
  EXPECT_EQ(train(init, images, labels, opt), init);
}

TEST(TinyModel, TrainingIsDeterministicAndReducesLoss) {
  std::vector<int> labels;
  const auto images = toy_images(40, labels);
  const TinyModel init = TinyModel::random({4, 4, 1}, 8, 2, 2);
  TrainOptions opt;
  opt.learning_rate = 1e-3;
  opt.momentum = 0.0;
  opt.batch_size = 40;
  double previous = mean_cross_entropy(init, images, labels);
  TinyModel m = init;
  for (int round = 0; round < 5; ++round) {
    opt.epochs = 1;
    m = train(m, images, labels, opt);
    const double now = mean_cross_entropy(m, images, labels);
    EXPECT_LE(now, previous + 1e-12);
    previous = now;
  }
  opt.epochs = 4;
  opt.momentum = 0.9;
  opt.learning_rate = 0.01;
  opt.batch_size = 8;
  EXPECT_EQ(train(init, images, labels, opt), train(init, images, labels, opt));
  opt.seed = 2;
  const TinyModel other_seed = train(init, images, labels, opt);
  opt.seed = 1;
  EXPECT_NE(other_seed, train(init, images, labels, opt));
}

TEST(TinyModel, CheckpointRoundTrip) {
  const TinyModel m = TinyModel::random({8, 8, 3}, 16, 4, 21);
  const auto bytes = serialize_model(m);
  EXPECT_EQ(deserialize_model(bytes), m);
  EXPECT_EQ(model_hash(deserialize_model(bytes)), model_hash(m));
  EXPECT_EQ(model_hash(m).size(), 16u);
  EXPECT_NE(model_hash(m), model_hash(TinyModel::random({8, 8, 3}, 16, 4, 22)));

  const auto path = std::filesystem::temp_directory_path() / "fsd_tinymodel_test.bin";
  save_model(m, path);
  EXPECT_EQ(load_model(path), m);
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_model(bad), DecodeError);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(deserialize_model(truncated), DecodeError);
}

TEST(TinyModel, Fnv1aKnownValue) {
  const std::string s = "a";
  EXPECT_EQ(fnv1a_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex({}), "cbf29ce484222325");
}

TEST(TinyModel, ShapeChecks) {
  const TinyModel m = TinyModel::random({4, 4, 3}, 8, 3, 5);
  EXPECT_THROW(forward(m, Image(4, 4, 1)), DomainError);
  EXPECT_THROW(TinyModel({4, 4, 3}, 0, 3), DomainError);
  EXPECT_THROW(TinyModel({4, 4, 3}, 4, 1), DomainError);
}

}  // namespace
}  // namespace fsd
