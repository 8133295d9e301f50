// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fsd/image.hpp"

namespace fsd {

/// Input geometry of a model.
struct InputShape {
  int height = 32;
  int width = 32;
  int channels = 3;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  friend bool operator==(const InputShape&, const InputShape&) = default;
};

/// flatten -> dense(hidden) -> relu -> dense(classes).
///
/// The relu output is the embedding used for retrieval; the second layer is
/// the classification head. Weights are row-major:
///   w1[h * input + i], w2[k * hidden + h].
class TinyModel {
 public:
  TinyModel(InputShape shape, int hidden, int classes);

  /// He-uniform first layer, Glorot-uniform head, zero biases.
  static TinyModel random(InputShape shape, int hidden, int classes, std::uint64_t seed);

  const InputShape& shape() const noexcept { return shape_; }
  int hidden() const noexcept { return hidden_; }
  int classes() const noexcept { return classes_; }
  std::size_t input_size() const noexcept { return shape_.size(); }

  std::vector<double>& w1() noexcept { return w1_; }
  std::vector<double>& b1() noexcept { return b1_; }
  std::vector<double>& w2() noexcept { return w2_; }
  std::vector<double>& b2() noexcept { return b2_; }
  const std::vector<double>& w1() const noexcept { return w1_; }
  const std::vector<double>& b1() const noexcept { return b1_; }
  const std::vector<double>& w2() const noexcept { return w2_; }
  const std::vector<double>& b2() const noexcept { return b2_; }

  /// Dimension and finiteness check; throws DomainError.
  void validate() const;

  friend bool operator==(const TinyModel&, const TinyModel&) = default;

 private:
  InputShape shape_;
  int hidden_;
  int classes_;
  std::vector<double> w1_, b1_, w2_, b2_;
};

struct ForwardResult {
  std::vector<double> pre_activation;  // W1 x + b1
  std::vector<double> embedding;       // relu(pre_activation)
  std::vector<double> logits;
  std::vector<double> probs;
};

/// Runs on a flat input of model.input_size() reals. The input need not lie
/// in [0, 1]; attack internals evaluate transformed copies outside it.
ForwardResult forward(const TinyModel& model, std::span<const double> input);
ForwardResult forward(const TinyModel& model, const Image& img);

int predict(const TinyModel& model, const Image& img);

std::vector<double> softmax(std::span<const double> logits);

namespace loss {
/// -log p(target)
struct CrossEntropy {
  int target = 0;
};
/// -cos(embedding, reference)
struct NegCosine {
  std::vector<double> reference;
};
/// max_{c != true_class} p(c) - p(true_class)
struct Margin {
  int true_class = 0;
};
}  // namespace loss

using LossKind = std::variant<loss::CrossEntropy, loss::NegCosine, loss::Margin>;

/// Image-shaped gradient; values are unconstrained reals.
struct Gradient {
  InputShape shape;
  std::vector<double> values;
};

struct LossGradient {
  double loss = 0.0;
  Gradient gradient;
};

/// Loss value and analytic gradient with respect to the flat input.
/// NegCosine raises DegenerateError on a zero-norm embedding or reference.
LossGradient loss_and_input_gradient(const TinyModel& model, std::span<const double> input,
                                     const LossKind& loss);
LossGradient loss_and_input_gradient(const TinyModel& model, const Image& img,
                                     const LossKind& loss);

/// The same gradients for a batch of inputs, sharing one pass over the first
/// layer. Results agree with the per-input call up to rounding.
std::vector<LossGradient> loss_and_input_gradients(const TinyModel& model,
                                                  const std::vector<std::vector<double>>& inputs,
                                                  const LossKind& loss);
double loss_value(const TinyModel& model, std::span<const double> input, const LossKind& loss);

struct TrainOptions {
  int epochs = 40;
  double learning_rate = 0.002;
  double momentum = 0.9;
  double weight_decay = 0.0;  // L2 on the weight matrices only, not biases
  int batch_size = 16;
  std::uint64_t seed = 1;
};

/// Mini-batch SGD with momentum on mean cross-entropy. The visiting order of
/// each epoch is a seeded shuffle, so training is bit-reproducible.
TinyModel train(const TinyModel& initial, std::span<const Image> images,
                std::span<const int> labels, const TrainOptions& options);

/// Mean cross-entropy over a labelled set.
double mean_cross_entropy(const TinyModel& model, std::span<const Image> images,
                          std::span<const int> labels);

/// Versioned little-endian binary checkpoint:
///   "FSDTINY\0" u32 version=1, u32 H, W, C, hidden, classes,
///   f64 w1[], b1[], w2[], b2[]
std::vector<std::uint8_t> serialize_model(const TinyModel& model);
TinyModel deserialize_model(std::span<const std::uint8_t> bytes);
void save_model(const TinyModel& model, const std::filesystem::path& path);
TinyModel load_model(const std::filesystem::path& path);

/// FNV-1a 64 of the serialized checkpoint, as 16 hex digits.
std::string model_hash(const TinyModel& model);
std::string fnv1a_hex(std::span<const std::uint8_t> bytes);

}  // namespace fsd
