#pragma once

#include <span>
#include <string>
#include <vector>

#include "sist/geometry.hpp"

namespace sist {

inline constexpr double kPsnrCap = 99.0;

// The three metrics below treat their inputs as already scaled to a unit
// dynamic range. compare() applies the reference-maximum normalization.

/// 10 log10(1 / MSE); kPsnrCap when the inputs are identical.
double psnr(std::span<const double> pred, std::span<const double> ref);
double rmse(std::span<const double> pred, std::span<const double> ref);
/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, averaged over windows fully inside the raster.
double ssim(std::span<const double> pred, std::span<const double> ref, int rows, int cols);

struct Quality {
  double psnr = 0.0;
  double ssim = 0.0;
  double rmse = 0.0;
};

/// Divides both operands by max |ref| (1 if ref is all zero), then scores.
Quality compare(std::span<const double> pred, std::span<const double> ref, int rows, int cols);
Quality compare(const Image& pred, const Image& ref);
Quality compare(const Sinogram& pred, const Sinogram& ref);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> values);

}  // namespace sist
