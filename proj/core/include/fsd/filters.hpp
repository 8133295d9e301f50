// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "fsd/image.hpp"

namespace fsd {

/// Gaussian blur parameters used as the inverse-halftone step.
struct BlurSpec {
  double sigma = 3.0;
  int kernel_size = 9;

  /// Throws DomainError unless kernel_size is odd and >= 1 and sigma > 0.
  void validate() const;
};

/// Taps w_t ~ exp(-t^2 / (2 sigma^2)) for t in [-(n-1)/2, (n-1)/2], truncated
/// to the stated size and normalized to sum to one.
std::vector<double> gaussian_kernel(const BlurSpec& spec);

/// Separable convolution, horizontal pass then vertical, with clamp-to-edge
/// borders. Output is clamped to [0, 1].
Image gaussian_blur(const Image& img, const BlurSpec& spec);

}  // namespace fsd
