// SPDX-License-Identifier: Apache-2.0
#include "fsd/tiny_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fsd/error.hpp"
#include "fsd/rng.hpp"

namespace fsd {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

ConstMatrixMap w1_of(const TinyModel& m) {
  return {m.w1().data(), m.hidden(), static_cast<Eigen::Index>(m.input_size())};
}
ConstMatrixMap w2_of(const TinyModel& m) { return {m.w2().data(), m.classes(), m.hidden()}; }

void check_input(const TinyModel& model, std::size_t n) {
  if (n != model.input_size()) {
    throw DomainError("model expects " + std::to_string(model.input_size()) +
                      " input values, got " + std::to_string(n));
  }
}

void check_image(const TinyModel& model, const Image& img) {
  const auto& s = model.shape();
  if (img.height() != s.height || img.width() != s.width || img.channels() != s.channels) {
    throw DomainError("image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                      "x" + std::to_string(img.channels()) + " does not match model input " +
                      std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
                      std::to_string(s.channels));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

TinyModel::TinyModel(InputShape shape, int hidden, int classes)
    : shape_(shape), hidden_(hidden), classes_(classes) {
  if (shape.height <= 0 || shape.width <= 0 || (shape.channels != 1 && shape.channels != 3)) {
    throw DomainError("invalid model input shape");
  }
  if (hidden <= 0 || classes < 2) throw DomainError("model needs hidden >= 1 and classes >= 2");
  w1_.assign(static_cast<std::size_t>(hidden) * shape.size(), 0.0);
  b1_.assign(static_cast<std::size_t>(hidden), 0.0);
  w2_.assign(static_cast<std::size_t>(classes) * static_cast<std::size_t>(hidden), 0.0);
  b2_.assign(static_cast<std::size_t>(classes), 0.0);
}

TinyModel TinyModel::random(InputShape shape, int hidden, int classes, std::uint64_t seed) {
  TinyModel m(shape, hidden, classes);
  Rng rng(derive_seed(seed, {0x1417}));
  const double a1 = std::sqrt(6.0 / static_cast<double>(shape.size()));
  for (double& w : m.w1_) w = rng.uniform(-a1, a1);
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden + classes));
  for (double& w : m.w2_) w = rng.uniform(-a2, a2);
  return m;
}

void TinyModel::validate() const {
  if (w1_.size() != static_cast<std::size_t>(hidden_) * shape_.size() ||
      b1_.size() != static_cast<std::size_t>(hidden_) ||
      w2_.size() != static_cast<std::size_t>(classes_) * static_cast<std::size_t>(hidden_) ||
      b2_.size() != static_cast<std::size_t>(classes_)) {
    throw DomainError("model weight arrays do not match declared dimensions");
  }
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(w1_) || !finite(b1_) || !finite(w2_) || !finite(b2_)) {
    throw DomainError("model weights must be finite");
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

ForwardResult forward(const TinyModel& model, std::span<const double> input) {
  check_input(model, input.size());
  ForwardResult r;
  r.pre_activation.resize(static_cast<std::size_t>(model.hidden()));
  VectorMap pre(r.pre_activation.data(), model.hidden());
  pre.noalias() = w1_of(model) * ConstVectorMap(input.data(), static_cast<Eigen::Index>(input.size()));
  pre += ConstVectorMap(model.b1().data(), model.hidden());

  r.embedding.resize(r.pre_activation.size());
  std::transform(r.pre_activation.begin(), r.pre_activation.end(), r.embedding.begin(),
                 [](double v) { return v > 0.0 ? v : 0.0; });

  r.logits.resize(static_cast<std::size_t>(model.classes()));
  VectorMap logits(r.logits.data(), model.classes());
  logits.noalias() = w2_of(model) * ConstVectorMap(r.embedding.data(), model.hidden());
  logits += ConstVectorMap(model.b2().data(), model.classes());

  r.probs = softmax(r.logits);
  return r;
}

ForwardResult forward(const TinyModel& model, const Image& img) {
  check_image(model, img);
  return forward(model, img.data());
}

int predict(const TinyModel& model, const Image& img) {
  const auto r = forward(model, img);
  return static_cast<int>(std::max_element(r.logits.begin(), r.logits.end()) - r.logits.begin());
}

namespace {

struct LossHead {
  double loss = 0.0;
  std::vector<double> d_logits;     // empty when the loss reads the embedding directly
  std::vector<double> d_embedding;  // empty when the loss reads the logits
};

void check_class(const TinyModel& model, int c) {
  if (c < 0 || c >= model.classes()) throw DomainError("class index out of range");
}

LossHead head_gradient(const TinyModel& model, const ForwardResult& f, const LossKind& kind) {
  LossHead h;
  if (const auto* ce = std::get_if<loss::CrossEntropy>(&kind)) {
    check_class(model, ce->target);
    const double mx = *std::max_element(f.logits.begin(), f.logits.end());
    double z = 0.0;
    for (double l : f.logits) z += std::exp(l - mx);
    h.loss = mx + std::log(z) - f.logits[static_cast<std::size_t>(ce->target)];
    h.d_logits = f.probs;
    h.d_logits[static_cast<std::size_t>(ce->target)] -= 1.0;
  } else if (const auto* mg = std::get_if<loss::Margin>(&kind)) {
    check_class(model, mg->true_class);
    const auto t = static_cast<std::size_t>(mg->true_class);
    std::size_t best = t == 0 ? 1 : 0;
    for (std::size_t c = 0; c < f.probs.size(); ++c) {
      if (c != t && f.probs[c] > f.probs[best]) best = c;
    }
    h.loss = f.probs[best] - f.probs[t];
    h.d_logits.resize(f.probs.size());
    // d p_i / d z_j = p_i (delta_ij - p_j)
    for (std::size_t j = 0; j < f.probs.size(); ++j) {
      const double da = f.probs[best] * ((best == j ? 1.0 : 0.0) - f.probs[j]);
      const double dt = f.probs[t] * ((t == j ? 1.0 : 0.0) - f.probs[j]);
      h.d_logits[j] = da - dt;
    }
  } else {
    const auto& nc = std::get<loss::NegCosine>(kind);
    if (nc.reference.size() != f.embedding.size()) {
      throw DomainError("neg-cosine reference has dimension " + std::to_string(nc.reference.size()) +
                        ", embedding has " + std::to_string(f.embedding.size()));
    }
    const double ne = norm(f.embedding);
    const double nr = norm(nc.reference);
    if (ne == 0.0) throw DegenerateError("neg-cosine: embedding has zero norm");
    if (nr == 0.0) throw DegenerateError("neg-cosine: reference has zero norm");
    const double cos = dot(f.embedding, nc.reference) / (ne * nr);
    h.loss = -cos;
    h.d_embedding.resize(f.embedding.size());
    for (std::size_t i = 0; i < f.embedding.size(); ++i) {
      h.d_embedding[i] = -(nc.reference[i] / (ne * nr) - cos * f.embedding[i] / (ne * ne));
    }
  }
  return h;
}

}  // namespace

LossGradient loss_and_input_gradient(const TinyModel& model, std::span<const double> input,
                                     const LossKind& kind) {
  const auto f = forward(model, input);
  auto head = head_gradient(model, f, kind);

  std::vector<double> d_pre(static_cast<std::size_t>(model.hidden()));
  VectorMap dp(d_pre.data(), model.hidden());
  if (!head.d_logits.empty()) {
    dp.noalias() = w2_of(model).transpose() * ConstVectorMap(head.d_logits.data(), model.classes());
  } else {
    dp = ConstVectorMap(head.d_embedding.data(), model.hidden());
  }
  for (std::size_t i = 0; i < d_pre.size(); ++i) {
    if (!(f.pre_activation[i] > 0.0)) d_pre[i] = 0.0;
  }

  LossGradient out;
  out.loss = head.loss;
  out.gradient.shape = model.shape();
  out.gradient.values.resize(model.input_size());
  VectorMap gx(out.gradient.values.data(), static_cast<Eigen::Index>(model.input_size()));
  gx.noalias() = w1_of(model).transpose() * dp;
  return out;
}

std::vector<LossGradient> loss_and_input_gradients(const TinyModel& model,
                                                  const std::vector<std::vector<double>>& inputs,
                                                  const LossKind& kind) {
  const auto n = static_cast<Eigen::Index>(inputs.size());
  const auto in = static_cast<Eigen::Index>(model.input_size());
  const Eigen::Index hid = model.hidden();
  const Eigen::Index cls = model.classes();
  std::vector<LossGradient> out(inputs.size());
  if (inputs.empty()) return out;

  RowMatrix x(n, in);
  for (Eigen::Index r = 0; r < n; ++r) {
    check_input(model, inputs[static_cast<std::size_t>(r)].size());
    x.row(r) = ConstVectorMap(inputs[static_cast<std::size_t>(r)].data(), in).transpose();
  }
  // One pass over W1 for the whole batch instead of one per input.
  RowMatrix pre = x * w1_of(model).transpose();
  pre.rowwise() += ConstVectorMap(model.b1().data(), hid).transpose();

  RowMatrix d_pre(n, hid);
  for (Eigen::Index r = 0; r < n; ++r) {
    ForwardResult f;
    f.pre_activation.assign(pre.row(r).data(), pre.row(r).data() + hid);
    f.embedding.resize(f.pre_activation.size());
    std::transform(f.pre_activation.begin(), f.pre_activation.end(), f.embedding.begin(),
                   [](double v) { return v > 0.0 ? v : 0.0; });
    f.logits.resize(static_cast<std::size_t>(cls));
    VectorMap logits(f.logits.data(), cls);
    logits.noalias() = w2_of(model) * ConstVectorMap(f.embedding.data(), hid);
    logits += ConstVectorMap(model.b2().data(), cls);
    f.probs = softmax(f.logits);

    const auto head = head_gradient(model, f, kind);
    out[static_cast<std::size_t>(r)].loss = head.loss;
    Eigen::VectorXd dp(hid);
    if (!head.d_logits.empty()) {
      dp.noalias() = w2_of(model).transpose() * ConstVectorMap(head.d_logits.data(), cls);
    } else {
      dp = ConstVectorMap(head.d_embedding.data(), hid);
    }
    for (Eigen::Index j = 0; j < hid; ++j) {
      if (!(f.pre_activation[static_cast<std::size_t>(j)] > 0.0)) dp[j] = 0.0;
    }
    d_pre.row(r) = dp.transpose();
  }

  const RowMatrix gx = d_pre * w1_of(model);
  for (Eigen::Index r = 0; r < n; ++r) {
    auto& g = out[static_cast<std::size_t>(r)].gradient;
    g.shape = model.shape();
    g.values.assign(gx.row(r).data(), gx.row(r).data() + in);
  }
  return out;
}

LossGradient loss_and_input_gradient(const TinyModel& model, const Image& img,
                                     const LossKind& kind) {
  check_image(model, img);
  return loss_and_input_gradient(model, img.data(), kind);
}

double loss_value(const TinyModel& model, std::span<const double> input, const LossKind& kind) {
  return head_gradient(model, forward(model, input), kind).loss;
}

double mean_cross_entropy(const TinyModel& model, std::span<const Image> images,
                          std::span<const int> labels) {
  if (images.empty() || images.size() != labels.size()) {
    throw DomainError("mean_cross_entropy: need matching non-empty images and labels");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    check_image(model, images[i]);
    s += loss_value(model, images[i].data(), loss::CrossEntropy{labels[i]});
  }
  return s / static_cast<double>(images.size());
}

TinyModel train(const TinyModel& initial, std::span<const Image> images,
                std::span<const int> labels, const TrainOptions& options) {
  if (images.empty()) throw DomainError("train: empty dataset");
  if (images.size() != labels.size()) throw DomainError("train: images and labels differ in length");
  if (options.epochs < 0 || options.batch_size < 1 || !(options.weight_decay >= 0.0)) throw DomainError("train: invalid options");
  for (std::size_t i = 0; i < images.size(); ++i) {
    check_image(initial, images[i]);
    check_class(initial, labels[i]);
  }

  TinyModel model = initial;
  const Eigen::Index in = static_cast<Eigen::Index>(model.input_size());
  const Eigen::Index hid = model.hidden();
  const Eigen::Index cls = model.classes();

  MatrixMap w1(model.w1().data(), hid, in);
  VectorMap b1(model.b1().data(), hid);
  MatrixMap w2(model.w2().data(), cls, hid);
  VectorMap b2(model.b2().data(), cls);

  RowMatrix v_w1 = RowMatrix::Zero(hid, in);
  Eigen::VectorXd v_b1 = Eigen::VectorXd::Zero(hid);
  RowMatrix v_w2 = RowMatrix::Zero(cls, hid);
  Eigen::VectorXd v_b2 = Eigen::VectorXd::Zero(cls);

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(options.seed, {0x7a11}));

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(options.batch_size));
      const Eigen::Index b = static_cast<Eigen::Index>(stop - start);

      RowMatrix x(b, in);
      for (Eigen::Index r = 0; r < b; ++r) {
        const auto d = images[order[start + static_cast<std::size_t>(r)]].data();
        x.row(r) = ConstVectorMap(d.data(), in).transpose();
      }
      RowMatrix pre = x * w1.transpose();
      pre.rowwise() += b1.transpose();
      RowMatrix h = pre.cwiseMax(0.0);
      RowMatrix z = h * w2.transpose();
      z.rowwise() += b2.transpose();

      RowMatrix dz(b, cls);
      for (Eigen::Index r = 0; r < b; ++r) {
        const std::vector<double> row(z.row(r).data(), z.row(r).data() + cls);
        const auto p = softmax(row);
        for (Eigen::Index c = 0; c < cls; ++c) dz(r, c) = p[static_cast<std::size_t>(c)];
        dz(r, labels[order[start + static_cast<std::size_t>(r)]]) -= 1.0;
      }
      dz /= static_cast<double>(b);

      RowMatrix g_w2 = dz.transpose() * h;
      const Eigen::VectorXd g_b2 = dz.colwise().sum().transpose();
      RowMatrix dh = dz * w2;
      dh = dh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
      RowMatrix g_w1 = dh.transpose() * x;
      const Eigen::VectorXd g_b1 = dh.colwise().sum().transpose();

      if (options.weight_decay > 0.0) {
        g_w1 += options.weight_decay * w1;
        g_w2 += options.weight_decay * w2;
      }

      const double mu = options.momentum;
      const double lr = options.learning_rate;
      v_w1 = mu * v_w1 - lr * g_w1;
      v_b1 = mu * v_b1 - lr * g_b1;
      v_w2 = mu * v_w2 - lr * g_w2;
      v_b2 = mu * v_b2 - lr * g_b2;
      w1 += v_w1;
      b1 += v_b1;
      w2 += v_w2;
      b2 += v_b2;
    }
  }
  model.validate();
  return model;
}

namespace {

constexpr char kMagic[8] = {'F', 'S', 'D', 'T', 'I', 'N', 'Y', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes little-endian");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64s(std::vector<std::uint8_t>& out, const std::vector<double>& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  out.insert(out.end(), p, p + v.size() * sizeof(double));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> b) : bytes_(b) {}
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DecodeError("checkpoint truncated", pos_);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  void f64s(std::vector<double>& v) {
    need(v.size() * sizeof(double));
    std::memcpy(v.data(), bytes_.data() + pos_, v.size() * sizeof(double));
    pos_ += v.size() * sizeof(double);
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const TinyModel& model) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(model.shape().height));
  put_u32(out, static_cast<std::uint32_t>(model.shape().width));
  put_u32(out, static_cast<std::uint32_t>(model.shape().channels));
  put_u32(out, static_cast<std::uint32_t>(model.hidden()));
  put_u32(out, static_cast<std::uint32_t>(model.classes()));
  put_f64s(out, model.w1());
  put_f64s(out, model.b1());
  put_f64s(out, model.w2());
  put_f64s(out, model.b2());
  return out;
}

TinyModel deserialize_model(std::span<const std::uint8_t> bytes) {
  Cursor cur(bytes);
  cur.need(sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DecodeError("not a model checkpoint (bad magic)", 0);
  }
  cur.skip(sizeof(kMagic));
  const std::size_t version_pos = cur.pos();
  if (cur.u32() != kVersion) throw DecodeError("unsupported checkpoint version", version_pos);
  const std::size_t dims_pos = cur.pos();
  InputShape shape;
  shape.height = static_cast<int>(cur.u32());
  shape.width = static_cast<int>(cur.u32());
  shape.channels = static_cast<int>(cur.u32());
  const int hidden = static_cast<int>(cur.u32());
  const int classes = static_cast<int>(cur.u32());
  if (shape.height <= 0 || shape.width <= 0 || shape.height > 4096 || shape.width > 4096 ||
      hidden <= 0 || hidden > 1 << 16 || classes < 2 || classes > 1 << 16) {
    throw DecodeError("implausible checkpoint dimensions", dims_pos);
  }
  TinyModel model(shape, hidden, classes);
  cur.f64s(model.w1());
  cur.f64s(model.b1());
  cur.f64s(model.w2());
  cur.f64s(model.b2());
  if (cur.pos() != bytes.size()) throw DecodeError("trailing bytes after checkpoint", cur.pos());
  model.validate();
  return model;
}

void save_model(const TinyModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

TinyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

std::string fnv1a_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string model_hash(const TinyModel& model) { return fnv1a_hex(serialize_model(model)); }

}  // namespace fsd
