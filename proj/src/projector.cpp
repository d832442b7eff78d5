#include "sist/projector.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sist/kernels.hpp"

namespace sist {

namespace {

constexpr double kPi = std::numbers::pi;

// Frequency-domain Hann apodization cos^2(w/2) is the 3-tap spatial blur
// [1/4, 1/2, 1/4] applied to the kernel.
std::vector<double> apodize(const std::vector<double>& taps) {
  std::vector<double> out(taps.size());
  const std::size_t n = taps.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double left = k > 0 ? taps[k - 1] : 0.0;
    const double right = k + 1 < n ? taps[k + 1] : 0.0;
    out[k] = 0.5 * taps[k] + 0.25 * (left + right);
  }
  return out;
}

double unit_ramp(int k) {
  if (k == 0) return 0.25;
  if (k % 2 == 0) return 0.0;
  return -1.0 / (kPi * kPi * static_cast<double>(k) * k);
}

}  // namespace

FilterKind parse_filter_kind(const std::string& text) {
  if (text == "ramp") return FilterKind::ramp;
  if (text == "hann") return FilterKind::hann;
  throw std::invalid_argument("unknown filter '" + text + "'");
}

std::string to_string(FilterKind kind) { return kind == FilterKind::ramp ? "ramp" : "hann"; }

Sinogram forward_project(const Image& image, const FanGeometry& geom) {
  geom.validate();
  if (image.width != image.height) throw std::domain_error("forward_project: image must be square");
  Sinogram sino(geom);
  kernels::omp::project(image.values, image.width, geom, sino.values);
  return sino;
}

std::vector<double> ramp_taps(int n, FilterKind kind) {
  // One extra tap on each side so the Hann blur is exact at the ends.
  std::vector<double> wide(2 * n + 1);
  for (int k = -n; k <= n; ++k) wide[k + n] = unit_ramp(k);
  if (kind == FilterKind::hann) wide = apodize(wide);
  return std::vector<double>(wide.begin() + 1, wide.end() - 1);
}

std::vector<double> periodic_ramp_taps(int n, FilterKind kind) {
  // The band-limited ramp's spectrum is exactly |w| / (2 pi) on [-pi, pi], so
  // its period-n wrap is the inverse DFT of that response sampled on n bins.
  std::vector<double> period(n, 0.0);
  for (int m = 0; m < n; ++m) {
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
      const int kk = k <= n / 2 ? k : k - n;
      const double w = 2.0 * kPi * kk / n;
      double response = std::abs(w) / (2.0 * kPi);
      if (kind == FilterKind::hann) response *= 0.5 + 0.5 * std::cos(w);
      acc += response * std::cos(w * m);
    }
    period[m] = acc / n;
  }
  std::vector<double> taps(2 * n - 1);
  for (int d = -(n - 1); d <= n - 1; ++d) taps[d + n - 1] = period[((d % n) + n) % n];
  return taps;
}

std::vector<double> fan_ramp_taps(int n, double alpha, FilterKind kind) {
  std::vector<double> wide(2 * n + 1);
  for (int k = -n; k <= n; ++k) {
    double g = 0.0;
    if (k == 0) {
      g = 1.0 / (8.0 * alpha * alpha);
    } else if (k % 2 != 0) {
      const double s = std::sin(k * alpha);
      g = -1.0 / (2.0 * kPi * kPi * s * s);
    }
    wide[k + n] = alpha * g;
  }
  if (kind == FilterKind::hann) wide = apodize(wide);
  return std::vector<double>(wide.begin() + 1, wide.end() - 1);
}

Sinogram ramp_filter(const Sinogram& sino, FilterKind kind, RowExtension extension) {
  const int cols = sino.detectors();
  const auto taps = extension == RowExtension::periodic ? periodic_ramp_taps(cols, kind)
                                                        : ramp_taps(cols, kind);
  Sinogram out(sino.geometry);
  kernels::omp::filter_rows(sino.values, sino.views(), cols, taps, out.values);
  return out;
}

Image fbp(const Sinogram& sino, FilterKind kind, int width) {
  if (width < 8) throw std::domain_error("fbp: output width must be at least 8");
  const FanGeometry& geom = sino.geometry;
  geom.validate();
  if (sino.values.size() != geom.size()) throw std::domain_error("fbp: sinogram shape mismatch");
  const int rows = geom.num_views;
  const int cols = geom.num_detectors;
  std::vector<double> filtered(sino.values.size());
  double scale = 0.0;
  if (geom.mode == ScanMode::parallel) {
    kernels::omp::filter_rows(sino.values, rows, cols, ramp_taps(cols, kind), filtered);
    // Full-turn data counts every line twice, hence pi / P rather than 2 pi / P.
    scale = kPi / (rows * geom.detector_spacing);
  } else {
    std::vector<double> weighted(sino.values.size());
    const int half = geom.half_span();
    for (int i = 0; i < rows; ++i)
      for (int c = 0; c < cols; ++c)
        weighted[static_cast<std::size_t>(i) * cols + c] =
            sino.at(i, c) * geom.source_radius * std::cos((c - half) * geom.detector_spacing);
    kernels::omp::filter_rows(weighted, rows, cols,
                              fan_ramp_taps(cols, geom.detector_spacing, kind), filtered);
    scale = 2.0 * kPi / rows;
  }
  Image img = Image::square(width);
  kernels::omp::backproject(filtered, geom, width, scale, img.values);
  // Pixels outside the unit field of view are seen by only some views.
  for (int r = 0; r < width; ++r)
    for (int c = 0; c < width; ++c)
      if (img.x_of(c) * img.x_of(c) + img.y_of(r) * img.y_of(r) > 1.0) img.at(r, c) = 0.0;
  return img;
}

}  // namespace sist
