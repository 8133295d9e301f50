// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fsd/image.hpp"
#include "fsd/rng.hpp"
#include "fsd/tiny_model.hpp"

namespace fsd {

enum class AttackFamily { pgd, mifgsm, sia };

/// Per-block transforms available to SIA. Each has an exact adjoint:
/// flips and rot180 are self-adjoint permutations, scaling multiplies the
/// gradient by the same factor, additive noise passes it through, and
/// zero-out blocks it.
enum class BlockTransform { identity, hflip, vflip, rot180, scale_half, scale_0_8, noise, zero };

struct SiaConfig {
  int copies = 8;
  int blocks = 4;  // splits per side
  std::vector<BlockTransform> transforms = {
      BlockTransform::identity, BlockTransform::hflip,     BlockTransform::vflip,
      BlockTransform::rot180,   BlockTransform::scale_half, BlockTransform::scale_0_8,
      BlockTransform::noise,    BlockTransform::zero};
};

struct AttackConfig {
  AttackFamily family = AttackFamily::pgd;
  double epsilon = 3.0 / 255.0;
  int steps = 50;
  std::optional<double> step_size;  // defaults to 4 * epsilon / steps
  double momentum = 1.0;
  std::optional<SiaConfig> sia;  // required iff family == sia
  std::uint64_t seed = 0;
  bool random_start = false;  // uniform start inside the epsilon-ball

  double resolved_step_size() const;
  /// Throws DomainError on any violated invariant.
  void validate() const;
};

enum class SteMode { fs_dither, uniform_quantize };

/// Informed-attacker knobs: with probability p_q per iteration, the attack
/// sees the input quantized to k_attack levels and passes gradients straight
/// through the quantizer.
struct SteConfig {
  bool enabled = false;
  int k_attack = 3;
  double p_q = 0.0;
  SteMode mode = SteMode::fs_dither;

  void validate() const;
};

struct AttackResult {
  Image adversarial;
  double final_loss = 0.0;
  double linf_norm = 0.0;
  double psnr_db = 0.0;
  int iterations_run = 0;
  std::vector<double> loss_trace;  // loss seen by the attacker at each iteration
};

struct SteOutput {
  Image transformed;
  bool quantized = false;
};

/// Forward half of the straight-through estimator. Draws one Bernoulli(p_q)
/// from `rng` when enabled; a disabled config draws nothing.
SteOutput ste_transform(const Image& img, const SteConfig& ste, Rng& rng);

/// Backward half: the upstream gradient passes through unchanged.
inline const Gradient& ste_backward(const Gradient& upstream) noexcept { return upstream; }

AttackResult pgd(const TinyModel& model, const Image& x_o, const LossKind& loss,
                 const AttackConfig& cfg, const SteConfig& ste = {});
AttackResult mifgsm(const TinyModel& model, const Image& x_o, const LossKind& loss,
                    const AttackConfig& cfg, const SteConfig& ste = {});
AttackResult sia(const TinyModel& model, const Image& x_o, const LossKind& loss,
                 const AttackConfig& cfg, const SteConfig& ste = {});

/// Dispatches on cfg.family.
AttackResult run_attack(const TinyModel& model, const Image& x_o, const LossKind& loss,
                        const AttackConfig& cfg, const SteConfig& ste = {});

/// SIA gradient at one point: `copies` block-transformed versions of `x`,
/// each gradient pulled back through its block transform, then averaged.
/// Exposed for testing the adjoint bookkeeping.
Gradient sia_gradient(const TinyModel& model, std::span<const double> x, const LossKind& loss,
                      const SiaConfig& sia, double noise_amplitude, Rng& rng);

std::string_view to_string(AttackFamily f) noexcept;
AttackFamily parse_attack_family(std::string_view name);
std::string_view to_string(BlockTransform t) noexcept;
BlockTransform parse_block_transform(std::string_view name);
std::string_view to_string(SteMode m) noexcept;
SteMode parse_ste_mode(std::string_view name);

}  // namespace fsd
