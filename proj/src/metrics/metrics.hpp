#pragma once

#include "core/types.hpp"

namespace retouch::metrics {

// Mean of squared differences over all H*W*3 values.
double mse(const Image& a, const Image& b);

// 10*log10(1/mse) for unit-range images; +infinity when mse = 0.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

// Structural similarity: per channel, 11x11 Gaussian window (sigma 1.5,
// truncated and renormalized), unit dynamic range, averaged over every
// fully contained window position and over channels. Both images need at
// least 11x11 pixels.
double ssim(const Image& a, const Image& b);

} // namespace retouch::metrics
