#pragma once

#include "gsurf/image.hpp"

namespace gsurf {

// Images are expected in [0, 1]; shapes must match.
double mse(const Image& a, const Image& b);

// 10 log10(1 / mse), capped at 99 dB (identical images).
double psnr(const Image& a, const Image& b);

struct SsimOptions {
  int window = 11;       // odd; shrinks automatically on small images
  double sigma = 1.5;    // Gaussian window
  double c1 = 1e-4;      // (0.01)^2 for unit dynamic range
  double c2 = 9e-4;      // (0.03)^2
};

// Mean SSIM over windows fully inside the image, averaged over channels.
double ssim(const Image& a, const Image& b, const SsimOptions& opts = {});

struct SsimResult {
  double value = 0.0;
  Image grad;  // d(value)/d(a), same shape as a
};

SsimResult ssim_with_grad(const Image& a, const Image& b, const SsimOptions& opts = {});

// Multi-scale SSIM, 2x2 average downsampling between scales. The scale count
// drops (with renormalized weights) when the image is too small for five.
double ms_ssim(const Image& a, const Image& b);

}  // namespace gsurf
