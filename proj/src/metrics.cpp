#include "sist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sist {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_match(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size() || a.empty())
    throw std::domain_error(std::string(what) + ": operands differ in shape or are empty");
}

double mse(std::span<const double> pred, std::span<const double> ref) {
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) acc += (pred[k] - ref[k]) * (pred[k] - ref[k]);
  return acc / static_cast<double>(pred.size());
}

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow * kWindow);
  const int half = kWindow / 2;
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j)
      total += g[i * kWindow + j] =
          std::exp(-((i - half) * (i - half) + (j - half) * (j - half)) / (2.0 * kSigma * kSigma));
  for (double& v : g) v /= total;
  return g;
}

}  // namespace

double psnr(std::span<const double> pred, std::span<const double> ref) {
  require_match(pred, ref, "psnr");
  const double e = mse(pred, ref);
  return e == 0.0 ? kPsnrCap : 10.0 * std::log10(1.0 / e);
}

double rmse(std::span<const double> pred, std::span<const double> ref) {
  require_match(pred, ref, "rmse");
  return std::sqrt(mse(pred, ref));
}

double ssim(std::span<const double> pred, std::span<const double> ref, int rows, int cols) {
  require_match(pred, ref, "ssim");
  if (static_cast<std::size_t>(rows) * cols != pred.size()) throw std::domain_error("ssim: shape mismatch");
  if (rows < kWindow || cols < kWindow) throw std::domain_error("ssim: input smaller than the 11x11 window");
  static const std::vector<double> g = gaussian_window();
  double acc = 0.0;
  int count = 0;
  for (int r0 = 0; r0 + kWindow <= rows; ++r0) {
    for (int c0 = 0; c0 + kWindow <= cols; ++c0) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (int i = 0; i < kWindow; ++i) {
        for (int j = 0; j < kWindow; ++j) {
          const double w = g[i * kWindow + j];
          const std::size_t k = static_cast<std::size_t>(r0 + i) * cols + c0 + j;
          const double x = pred[k];
          const double y = ref[k];
          mx += w * x;
          my += w * y;
          xx += w * x * x;
          yy += w * y * y;
          xy += w * x * y;
        }
      }
      const double vx = xx - mx * mx;
      const double vy = yy - my * my;
      const double cxy = xy - mx * my;
      acc += ((2 * mx * my + kC1) * (2 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      ++count;
    }
  }
  return acc / count;
}

Quality compare(std::span<const double> pred, std::span<const double> ref, int rows, int cols) {
  require_match(pred, ref, "compare");
  double peak = 0.0;
  for (double v : ref) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) peak = 1.0;
  std::vector<double> p(pred.size());
  std::vector<double> r(ref.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    p[k] = pred[k] / peak;
    r[k] = ref[k] / peak;
  }
  Quality q;
  q.psnr = psnr(p, r);
  q.rmse = rmse(p, r);
  q.ssim = ssim(p, r, rows, cols);
  return q;
}

Quality compare(const Image& pred, const Image& ref) {
  if (pred.width != ref.width || pred.height != ref.height) throw std::domain_error("compare: image sizes differ");
  return compare(pred.values, ref.values, ref.height, ref.width);
}

Quality compare(const Sinogram& pred, const Sinogram& ref) {
  if (pred.views() != ref.views() || pred.detectors() != ref.detectors())
    throw std::domain_error("compare: sinogram shapes differ");
  return compare(pred.values, ref.values, ref.views(), ref.detectors());
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(acc / static_cast<double>(values.size()));
  return out;
}

}  // namespace sist
