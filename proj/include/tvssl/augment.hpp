#ifndef TVSSL_AUGMENT_HPP_
#define TVSSL_AUGMENT_HPP_

#include <utility>

#include "tvssl/tensor.hpp"

namespace tvssl {

// Stochastic view sampling: resized crop, color jitter, random grayscale.
// Every draw is a pure function of (policy, rng_seed, draw index), so the
// whole augmentation stream is replayable.
struct AugmentPolicy {
  double crop_scale_lo = 0.3;   // area fraction
  double crop_scale_hi = 1.0;
  double crop_aspect_lo = 3.0 / 4.0;
  double crop_aspect_hi = 4.0 / 3.0;
  double jitter_strength = 0.4;  // brightness/contrast/saturation half-range
  double grayscale_prob = 0.2;
  uint64_t rng_seed = 0;

  void validate() const;
};

// image: [3,S,S], values in [0,1]; output same shape, clamped to [0,1]
Tensor sample_view(const AugmentPolicy& policy, const Tensor& image, uint64_t draw_index);

// two independent draws with distinct derived sub-seeds
std::pair<Tensor, Tensor> sample_view_pair(const AugmentPolicy& policy,
                                           const Tensor& image, uint64_t pair_index);

// ITU-R 601 luma
inline double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

}  // namespace tvssl

#endif  // TVSSL_AUGMENT_HPP_
