#include "tvssl/augment.hpp"

#include <algorithm>
#include <cmath>

namespace tvssl {

void AugmentPolicy::validate() const {
  TVSSL_CHECK_CFG(crop_scale_lo > 0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1.0,
                  "crop scale range must satisfy 0 < lo <= hi <= 1");
  TVSSL_CHECK_CFG(crop_aspect_lo > 0 && crop_aspect_lo <= crop_aspect_hi,
                  "crop aspect range invalid");
  TVSSL_CHECK_CFG(jitter_strength >= 0, "jitter strength must be >= 0");
  TVSSL_CHECK_CFG(grayscale_prob >= 0 && grayscale_prob <= 1,
                  "grayscale probability must be in [0,1]");
}

namespace {

// bilinear sample of channel plane src[S,S] restricted to the crop window
// (y0,x0,h,w), resampled to S x S with half-pixel-center mapping
void resize_crop(const double* src, int64_t S, int64_t y0, int64_t x0, int64_t h,
                 int64_t w, double* dst) {
  const double sy = static_cast<double>(h) / static_cast<double>(S);
  const double sx = static_cast<double>(w) / static_cast<double>(S);
  for (int64_t oy = 0; oy < S; ++oy) {
    const double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    const double fy_cl = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int64_t iy0 = static_cast<int64_t>(std::floor(fy_cl));
    const int64_t iy1 = std::min(iy0 + 1, h - 1);
    const double wy = fy_cl - static_cast<double>(iy0);
    for (int64_t ox = 0; ox < S; ++ox) {
      const double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      const double fx_cl = std::clamp(fx, 0.0, static_cast<double>(w - 1));
      const int64_t ix0 = static_cast<int64_t>(std::floor(fx_cl));
      const int64_t ix1 = std::min(ix0 + 1, w - 1);
      const double wx = fx_cl - static_cast<double>(ix0);
      const double v00 = src[(y0 + iy0) * S + x0 + ix0];
      const double v01 = src[(y0 + iy0) * S + x0 + ix1];
      const double v10 = src[(y0 + iy1) * S + x0 + ix0];
      const double v11 = src[(y0 + iy1) * S + x0 + ix1];
      dst[oy * S + ox] = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                         wy * ((1 - wx) * v10 + wx * v11);
    }
  }
}

}  // namespace

Tensor sample_view(const AugmentPolicy& policy, const Tensor& image, uint64_t draw_index) {
  policy.validate();
  TVSSL_CHECK(image.ndim() == 3 && image.dim(0) == 3 && image.dim(1) == image.dim(2),
              "sample_view expects [3,S,S]");
  const int64_t S = image.dim(1);
  Rng rng(hash_combine(policy.rng_seed, draw_index));

  // crop geometry
  const double area = rng.uniform(policy.crop_scale_lo, policy.crop_scale_hi);
  int64_t w = S, h = S;
  if (area < 1.0) {
    const double aspect = std::exp(
        rng.uniform(std::log(policy.crop_aspect_lo), std::log(policy.crop_aspect_hi)));
    const double target = area * static_cast<double>(S) * static_cast<double>(S);
    w = std::clamp<int64_t>(static_cast<int64_t>(std::lround(std::sqrt(target * aspect))), 1, S);
    h = std::clamp<int64_t>(static_cast<int64_t>(std::lround(std::sqrt(target / aspect))), 1, S);
  }
  TVSSL_CHECK(w >= 1 && h >= 1, "degenerate crop window");
  const int64_t x0 = (w < S) ? rng.uniform_int(S - w + 1) : 0;
  const int64_t y0 = (h < S) ? rng.uniform_int(S - h + 1) : 0;

  Tensor out({3, S, S});
  if (w == S && h == S) {
    std::copy(image.data(), image.data() + image.numel(), out.data());
  } else {
    for (int c = 0; c < 3; ++c)
      resize_crop(image.data() + c * S * S, S, y0, x0, h, w, out.data() + c * S * S);
  }

  // color jitter: independent multiplicative factors in 1 +/- strength
  const double s = policy.jitter_strength;
  const double fb = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
  const double fc = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
  const double fs = rng.uniform(std::max(0.0, 1.0 - s), 1.0 + s);
  double* R = out.data();
  double* G = out.data() + S * S;
  double* B = out.data() + 2 * S * S;
  if (s > 0) {
    double mean_lum = 0.0;
    for (int64_t i = 0; i < S * S; ++i) mean_lum += luminance(R[i], G[i], B[i]);
    mean_lum /= static_cast<double>(S * S);
    for (int64_t i = 0; i < S * S; ++i) {
      double r = R[i] * fb, g = G[i] * fb, b = B[i] * fb;
      r = mean_lum + fc * (r - mean_lum);
      g = mean_lum + fc * (g - mean_lum);
      b = mean_lum + fc * (b - mean_lum);
      const double lum = luminance(r, g, b);
      R[i] = lum + fs * (r - lum);
      G[i] = lum + fs * (g - lum);
      B[i] = lum + fs * (b - lum);
    }
  }

  if (rng.uniform() < policy.grayscale_prob) {
    for (int64_t i = 0; i < S * S; ++i) {
      const double lum = luminance(R[i], G[i], B[i]);
      R[i] = G[i] = B[i] = lum;
    }
  }

  for (int64_t i = 0; i < out.numel(); ++i)
    out.data()[i] = std::clamp(out.data()[i], 0.0, 1.0);
  return out;
}

std::pair<Tensor, Tensor> sample_view_pair(const AugmentPolicy& policy,
                                           const Tensor& image, uint64_t pair_index) {
  return {sample_view(policy, image, 2 * pair_index),
          sample_view(policy, image, 2 * pair_index + 1)};
}

}  // namespace tvssl
