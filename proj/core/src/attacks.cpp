// SPDX-License-Identifier: Apache-2.0
#include "fsd/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fsd/dither.hpp"
#include "fsd/error.hpp"

namespace fsd {
namespace {

// Independent streams per purpose so that enabling one consumer never shifts
// the draws seen by another.
constexpr std::uint64_t kStreamStart = 0x57a27;
constexpr std::uint64_t kStreamSte = 0x5732;
constexpr std::uint64_t kStreamSia = 0x51a;

constexpr double kZeroGradientL1 = 1e-12;

double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_shape(const TinyModel& model, const Image& img) {
  const auto& s = model.shape();
  if (img.height() != s.height || img.width() != s.width || img.channels() != s.channels) {
    throw DomainError("attack input does not match the model input shape");
  }
}

enum class Update { sign_of_gradient, momentum };

template <typename GradientFn>
AttackResult iterate(const TinyModel& model, const Image& x_o, const LossKind& loss,
                     const AttackConfig& cfg, const SteConfig& ste, Update update,
                     GradientFn&& gradient_at) {
  cfg.validate();
  ste.validate();
  check_shape(model, x_o);

  const std::size_t n = x_o.size();
  const auto orig = x_o.data();
  const double eps = cfg.epsilon;
  std::vector<double> x(orig.begin(), orig.end());

  if (cfg.random_start && cfg.steps > 0) {
    Rng start(derive_seed(cfg.seed, {kStreamStart}));
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(orig[i] + start.uniform(-eps, eps), 0.0, 1.0);
  }

  Rng ste_rng(derive_seed(cfg.seed, {kStreamSte}));
  const double nu = cfg.steps > 0 ? cfg.resolved_step_size() : 0.0;
  std::vector<double> m(n, 0.0);

  AttackResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));
  for (int t = 0; t < cfg.steps; ++t) {
    const Image current(x_o.height(), x_o.width(), x_o.channels(), x);
    const SteOutput seen = ste_transform(current, ste, ste_rng);
    double loss_seen = 0.0;
    const Gradient g = ste_backward(gradient_at(seen.transformed.data(), loss_seen));
    result.loss_trace.push_back(loss_seen);

    const std::vector<double>* direction = &g.values;
    if (update == Update::momentum) {
      double l1 = 0.0;
      for (double v : g.values) l1 += std::abs(v);
      if (l1 < kZeroGradientL1) {
        for (std::size_t i = 0; i < n; ++i) m[i] = cfg.momentum * m[i] + g.values[i];
      } else {
        for (std::size_t i = 0; i < n; ++i) m[i] = cfg.momentum * m[i] + g.values[i] / l1;
      }
      direction = &m;
    }

    for (std::size_t i = 0; i < n; ++i) {
      double v = x[i] + nu * sign((*direction)[i]);
      v = std::clamp(v, orig[i] - eps, orig[i] + eps);
      x[i] = std::clamp(v, 0.0, 1.0);
    }
  }

  result.adversarial = Image(x_o.height(), x_o.width(), x_o.channels(), std::move(x));
  result.final_loss = loss_value(model, result.adversarial.data(), loss);
  result.linf_norm = linf_distance(result.adversarial, x_o);
  result.psnr_db = psnr(x_o, result.adversarial);
  result.iterations_run = cfg.steps;
  return result;
}

void require_family(const AttackConfig& cfg, AttackFamily f) {
  if (cfg.family != f) {
    throw DomainError("attack config family is '" + std::string(to_string(cfg.family)) +
                      "', expected '" + std::string(to_string(f)) + "'");
  }
}

struct BlockRegion {
  int y0, x0, bh, bw;
};

// Applies a block permutation (or its adjoint, which is the same map for the
// self-inverse flips used here) from src into dst.
void permute_block(std::span<const double> src, std::span<double> dst, const InputShape& s,
                   const BlockRegion& r, BlockTransform t) {
  const int ch = s.channels;
  for (int dy = 0; dy < r.bh; ++dy) {
    for (int dx = 0; dx < r.bw; ++dx) {
      int sy = dy;
      int sx = dx;
      if (t == BlockTransform::hflip || t == BlockTransform::rot180) sx = r.bw - 1 - dx;
      if (t == BlockTransform::vflip || t == BlockTransform::rot180) sy = r.bh - 1 - dy;
      const std::size_t to =
          (static_cast<std::size_t>(r.y0 + dy) * s.width + static_cast<std::size_t>(r.x0 + dx)) * ch;
      const std::size_t from =
          (static_cast<std::size_t>(r.y0 + sy) * s.width + static_cast<std::size_t>(r.x0 + sx)) * ch;
      for (int c = 0; c < ch; ++c) dst[to + c] = src[from + c];
    }
  }
}

template <typename Fn>
void for_block(const InputShape& s, const BlockRegion& r, Fn&& fn) {
  for (int y = r.y0; y < r.y0 + r.bh; ++y) {
    for (int x = r.x0; x < r.x0 + r.bw; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * s.width + static_cast<std::size_t>(x)) * s.channels;
      for (int c = 0; c < s.channels; ++c) fn(base + static_cast<std::size_t>(c));
    }
  }
}

double scale_of(BlockTransform t) {
  switch (t) {
    case BlockTransform::scale_half: return 0.5;
    case BlockTransform::scale_0_8: return 0.8;
    case BlockTransform::zero: return 0.0;
    default: return 1.0;
  }
}

}  // namespace

double AttackConfig::resolved_step_size() const {
  if (step_size) return *step_size;
  return steps > 0 ? 4.0 * epsilon / steps : 0.0;
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw DomainError("attack epsilon must be >= 0");
  if (steps < 0) throw DomainError("attack steps must be >= 0");
  if (steps > 0 && !(resolved_step_size() > 0.0) && epsilon > 0.0) {
    throw DomainError("attack step size must be > 0 when steps > 0");
  }
  if (step_size && !(*step_size > 0.0)) throw DomainError("attack step size must be > 0");
  if (!std::isfinite(momentum) || momentum < 0.0) throw DomainError("attack momentum must be >= 0");
  if (family == AttackFamily::sia) {
    if (!sia) throw DomainError("sia attack requires sia parameters");
    if (sia->copies < 1) throw DomainError("sia copies must be >= 1");
    if (sia->blocks < 1) throw DomainError("sia block splits must be >= 1");
    if (sia->transforms.empty()) throw DomainError("sia transform set must be non-empty");
  } else if (sia) {
    throw DomainError("sia parameters given for a non-sia attack");
  }
}

void SteConfig::validate() const {
  if (!enabled) return;
  if (k_attack < 2 || k_attack > 256) throw DomainError("ste k_attack must be in [2, 256]");
  if (!(p_q >= 0.0 && p_q <= 1.0)) throw DomainError("ste p_q must be in [0, 1]");
}

SteOutput ste_transform(const Image& img, const SteConfig& ste, Rng& rng) {
  if (!ste.enabled) return {img, false};
  if (!rng.bernoulli(ste.p_q)) return {img, false};
  const QuantSpec spec(ste.k_attack);
  if (ste.mode == SteMode::fs_dither) return {fs_dither(img, spec), true};
  return {quantize_uniform(img, spec), true};
}

Gradient sia_gradient(const TinyModel& model, std::span<const double> x, const LossKind& loss,
                      const SiaConfig& cfg, double noise_amplitude, Rng& rng) {
  const InputShape& s = model.shape();
  if (x.size() != s.size()) throw DomainError("sia_gradient: input size mismatch");
  if (cfg.blocks < 1 || s.height % cfg.blocks != 0 || s.width % cfg.blocks != 0) {
    throw DomainError("sia: image " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                      " is not divisible into " + std::to_string(cfg.blocks) + "x" +
                      std::to_string(cfg.blocks) + " blocks");
  }
  if (cfg.copies < 1 || cfg.transforms.empty()) throw DomainError("sia: invalid configuration");

  const int bh = s.height / cfg.blocks;
  const int bw = s.width / cfg.blocks;
  const std::size_t nblocks = static_cast<std::size_t>(cfg.blocks) * static_cast<std::size_t>(cfg.blocks);

  std::vector<std::vector<double>> copies(static_cast<std::size_t>(cfg.copies),
                                         std::vector<double>(x.begin(), x.end()));
  std::vector<std::vector<BlockTransform>> chosen(static_cast<std::size_t>(cfg.copies),
                                                  std::vector<BlockTransform>(nblocks));
  auto region = [&](std::size_t b) {
    return BlockRegion{static_cast<int>(b / cfg.blocks) * bh, static_cast<int>(b % cfg.blocks) * bw, bh, bw};
  };

  for (std::size_t k = 0; k < copies.size(); ++k) {
    auto& copy = copies[k];
    for (std::size_t b = 0; b < nblocks; ++b) {
      const BlockRegion r = region(b);
      const BlockTransform t = cfg.transforms[rng.below(cfg.transforms.size())];
      chosen[k][b] = t;
      switch (t) {
        case BlockTransform::identity:
          break;
        case BlockTransform::hflip:
        case BlockTransform::vflip:
        case BlockTransform::rot180:
          permute_block(x, copy, s, r, t);
          break;
        case BlockTransform::noise:
          for_block(s, r, [&](std::size_t i) { copy[i] = x[i] + rng.uniform(-noise_amplitude, noise_amplitude); });
          break;
        case BlockTransform::scale_half:
        case BlockTransform::scale_0_8:
        case BlockTransform::zero: {
          const double a = scale_of(t);
          for_block(s, r, [&](std::size_t i) { copy[i] = a * x[i]; });
          break;
        }
      }
    }
  }

  const auto grads = loss_and_input_gradients(model, copies, loss);
  Gradient total{s, std::vector<double>(x.size(), 0.0)};
  std::vector<double> pulled(x.size());
  for (std::size_t k = 0; k < copies.size(); ++k) {
    const auto& g = grads[k].gradient.values;
    std::copy(g.begin(), g.end(), pulled.begin());
    for (std::size_t b = 0; b < nblocks; ++b) {
      const BlockRegion r = region(b);
      const BlockTransform t = chosen[k][b];
      if (t == BlockTransform::hflip || t == BlockTransform::vflip || t == BlockTransform::rot180) {
        permute_block(g, pulled, s, r, t);
      } else if (const double a = scale_of(t); a != 1.0) {
        for_block(s, r, [&](std::size_t i) { pulled[i] = a * g[i]; });
      }
    }
    for (std::size_t i = 0; i < total.values.size(); ++i) total.values[i] += pulled[i];
  }
  const double inv = 1.0 / cfg.copies;
  if (cfg.copies > 1) {
    for (double& v : total.values) v *= inv;
  }
  return total;
}

AttackResult pgd(const TinyModel& model, const Image& x_o, const LossKind& loss,
                 const AttackConfig& cfg, const SteConfig& ste) {
  require_family(cfg, AttackFamily::pgd);
  return iterate(model, x_o, loss, cfg, ste, Update::sign_of_gradient,
                 [&](std::span<const double> xt, double& loss_seen) {
                   auto lg = loss_and_input_gradient(model, xt, loss);
                   loss_seen = lg.loss;
                   return std::move(lg.gradient);
                 });
}

AttackResult mifgsm(const TinyModel& model, const Image& x_o, const LossKind& loss,
                    const AttackConfig& cfg, const SteConfig& ste) {
  require_family(cfg, AttackFamily::mifgsm);
  return iterate(model, x_o, loss, cfg, ste, Update::momentum,
                 [&](std::span<const double> xt, double& loss_seen) {
                   auto lg = loss_and_input_gradient(model, xt, loss);
                   loss_seen = lg.loss;
                   return std::move(lg.gradient);
                 });
}

AttackResult sia(const TinyModel& model, const Image& x_o, const LossKind& loss,
                 const AttackConfig& cfg, const SteConfig& ste) {
  require_family(cfg, AttackFamily::sia);
  cfg.validate();
  const auto& s = model.shape();
  if (s.height % cfg.sia->blocks != 0 || s.width % cfg.sia->blocks != 0) {
    throw DomainError("sia: image dimensions are not divisible by the block split " +
                      std::to_string(cfg.sia->blocks));
  }
  Rng sia_rng(derive_seed(cfg.seed, {kStreamSia}));
  const double noise = cfg.epsilon / 2.0;
  return iterate(model, x_o, loss, cfg, ste, Update::momentum,
                 [&](std::span<const double> xt, double& loss_seen) {
                   loss_seen = loss_value(model, xt, loss);
                   return sia_gradient(model, xt, loss, *cfg.sia, noise, sia_rng);
                 });
}

AttackResult run_attack(const TinyModel& model, const Image& x_o, const LossKind& loss,
                        const AttackConfig& cfg, const SteConfig& ste) {
  switch (cfg.family) {
    case AttackFamily::pgd: return pgd(model, x_o, loss, cfg, ste);
    case AttackFamily::mifgsm: return mifgsm(model, x_o, loss, cfg, ste);
    case AttackFamily::sia: return sia(model, x_o, loss, cfg, ste);
  }
  throw DomainError("unknown attack family");
}

std::string_view to_string(AttackFamily f) noexcept {
  switch (f) {
    case AttackFamily::pgd: return "pgd";
    case AttackFamily::mifgsm: return "mifgsm";
    case AttackFamily::sia: return "sia";
  }
  return "?";
}

AttackFamily parse_attack_family(std::string_view name) {
  if (name == "pgd") return AttackFamily::pgd;
  if (name == "mifgsm" || name == "mi-fgsm") return AttackFamily::mifgsm;
  if (name == "sia") return AttackFamily::sia;
  throw DomainError("unknown attack family '" + std::string(name) + "'");
}

std::string_view to_string(BlockTransform t) noexcept {
  switch (t) {
    case BlockTransform::identity: return "identity";
    case BlockTransform::hflip: return "hflip";
    case BlockTransform::vflip: return "vflip";
    case BlockTransform::rot180: return "rot180";
    case BlockTransform::scale_half: return "scale_0.5";
    case BlockTransform::scale_0_8: return "scale_0.8";
    case BlockTransform::noise: return "noise";
    case BlockTransform::zero: return "zero";
  }
  return "?";
}

BlockTransform parse_block_transform(std::string_view name) {
  for (auto t : {BlockTransform::identity, BlockTransform::hflip, BlockTransform::vflip,
                 BlockTransform::rot180, BlockTransform::scale_half, BlockTransform::scale_0_8,
                 BlockTransform::noise, BlockTransform::zero}) {
    if (name == to_string(t)) return t;
  }
  throw DomainError("unknown SIA block transform '" + std::string(name) + "'");
}

std::string_view to_string(SteMode m) noexcept {
  return m == SteMode::fs_dither ? "fs_dither" : "uniform_quantize";
}

SteMode parse_ste_mode(std::string_view name) {
  if (name == "fs_dither") return SteMode::fs_dither;
  if (name == "uniform_quantize") return SteMode::uniform_quantize;
  throw DomainError("unknown STE mode '" + std::string(name) + "'");
}

}  // namespace fsd
