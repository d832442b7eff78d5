#include "sist/structure.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sist {

namespace {

// Offsets within this distance of an integer count as on-grid; the closed
// form P/2 + j k is only reproduced up to rounding in floating point.
constexpr double kGridTolerance = 1e-9;

double raw_offset(const FanGeometry& geom, int j) {
  const double gamma_d = geom.mode == ScanMode::fan ? geom.detector_spacing : 0.0;
  return (std::numbers::pi + 2.0 * j * gamma_d) * geom.num_views / (2.0 * std::numbers::pi);
}

int wrap(int view, int views) {
  const int r = view % views;
  return r < 0 ? r + views : r;
}

void check_size(std::span<const double> values, const FanGeometry& geom, const char* what) {
  if (values.size() != geom.size())
    throw std::domain_error(std::string(what) + ": sinogram shape does not match geometry");
}

}  // namespace

ConjugateMap::ConjugateMap(const FanGeometry& geom, ConjugateMode mode)
    : geom_(geom), mode_(mode) {
  geom_.validate();
  const int cols = geom_.num_detectors;
  const int half = geom_.half_span();
  offset_.resize(cols);
  fraction_.resize(cols);
  for (int c = 0; c < cols; ++c) {
    const double x = raw_offset(geom_, c - half);
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= kGridTolerance * std::max(1.0, std::abs(x))) {
      offset_[c] = static_cast<int>(nearest);
      fraction_[c] = 0.0;
      continue;
    }
    exact_ = false;
    if (mode_ == ConjugateMode::truncate) {
      offset_[c] = static_cast<int>(std::trunc(x));
      fraction_[c] = 0.0;
    } else {
      offset_[c] = static_cast<int>(std::floor(x));
      fraction_[c] = x - std::floor(x);
    }
  }
}

void ConjugateMap::gather(std::span<const double> in, std::span<double> out) const {
  check_size(in, geom_, "conjugate gather");
  const int views = geom_.num_views;
  const int cols = geom_.num_detectors;
  for (int i = 0; i < views; ++i) {
    for (int c = 0; c < cols; ++c) {
      const int mc = cols - 1 - c;  // column of -j
      const int v0 = wrap(i + offset_[c], views);
      const double f = fraction_[c];
      double value = in[static_cast<std::size_t>(v0) * cols + mc];
      if (f != 0.0) {
        const int v1 = wrap(v0 + 1, views);
        value = (1.0 - f) * value + f * in[static_cast<std::size_t>(v1) * cols + mc];
      }
      out[static_cast<std::size_t>(i) * cols + c] = value;
    }
  }
}

void ConjugateMap::scatter_add(std::span<const double> grad_out, std::span<double> grad_in) const {
  check_size(grad_out, geom_, "conjugate scatter");
  const int views = geom_.num_views;
  const int cols = geom_.num_detectors;
  for (int i = 0; i < views; ++i) {
    for (int c = 0; c < cols; ++c) {
      const int mc = cols - 1 - c;
      const int v0 = wrap(i + offset_[c], views);
      const double f = fraction_[c];
      const double g = grad_out[static_cast<std::size_t>(i) * cols + c];
      grad_in[static_cast<std::size_t>(v0) * cols + mc] += (1.0 - f) * g;
      if (f != 0.0) grad_in[static_cast<std::size_t>(wrap(v0 + 1, views)) * cols + mc] += f * g;
    }
  }
}

std::pair<int, int> conjugate_index(int view, int j, const FanGeometry& geom) {
  geom.validate();
  if (view < 0 || view >= geom.num_views) throw std::domain_error("conjugate_index: view out of range");
  if (std::abs(j) > geom.half_span()) throw std::domain_error("conjugate_index: detector out of range");
  const double x = raw_offset(geom, j);
  const double nearest = std::round(x);
  const int offset = std::abs(x - nearest) <= kGridTolerance * std::max(1.0, std::abs(x))
                         ? static_cast<int>(nearest)
                         : static_cast<int>(std::trunc(x));
  return {wrap(view + offset, geom.num_views), -j};
}

Sinogram conjugate_sinogram(const Sinogram& sino, ConjugateMode mode) {
  const ConjugateMap map(sino.geometry, mode);
  Sinogram out(sino.geometry);
  map.gather(sino.values, out.values);
  return out;
}

std::vector<double> conjugate_residual(std::span<const double> values, const ConjugateMap& map) {
  std::vector<double> r(values.size());
  map.gather(values, r);
  for (std::size_t k = 0; k < r.size(); ++k) r[k] = values[k] - r[k];
  return r;
}

LossGrad global_loss(std::span<const double> values, const ConjugateMap& map) {
  const std::vector<double> r = conjugate_residual(values, map);
  const double n = static_cast<double>(values.size());
  LossGrad out;
  double acc = 0.0;
  for (double v : r) acc += v * v;
  out.value = acc / n;
  // d/dS of mean (S - G S)^2 = (2/n) (r - G^T r).
  std::vector<double> back(values.size(), 0.0);
  map.scatter_add(r, back);
  out.gradient.resize(values.size());
  for (std::size_t k = 0; k < r.size(); ++k) out.gradient[k] = 2.0 * (r[k] - back[k]) / n;
  return out;
}

LossGrad global_loss(const Sinogram& s_hat, ConjugateMode mode) {
  return global_loss(s_hat.values, ConjugateMap(s_hat.geometry, mode));
}

SecondDerivatives second_order_derivatives(std::span<const double> values, int rows, int cols) {
  if (rows < 3 || cols < 3) throw std::domain_error("second derivatives need at least 3x3 samples");
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw std::domain_error("second derivatives: size mismatch");
  SecondDerivatives d;
  d.rows = rows;
  d.cols = cols;
  const std::size_t n = values.size();
  d.d_ii.assign(n, 0.0);
  d.d_jj.assign(n, 0.0);
  d.d_ij.assign(n, 0.0);
  auto at = [&](int i, int j) { return values[static_cast<std::size_t>(i) * cols + j]; };
  for (int i = 1; i < rows - 1; ++i) {
    for (int j = 1; j < cols - 1; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * cols + j;
      d.d_ii[k] = at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j);
      d.d_jj[k] = at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1);
      d.d_ij[k] = 0.25 * (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1));
    }
  }
  d.d_ji = d.d_ij;
  return d;
}

SecondDerivatives second_order_derivatives(const Sinogram& sino) {
  return second_order_derivatives(sino.values, sino.views(), sino.detectors());
}

LossGrad local_loss(std::span<const double> s_hat, std::span<const double> s_nd, int rows,
                    int cols) {
  if (s_hat.size() != s_nd.size()) throw std::domain_error("local_loss: shape mismatch");
  // The stencils are linear, so differentiate the difference field once.
  std::vector<double> diff(s_hat.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = s_hat[k] - s_nd[k];
  const SecondDerivatives d = second_order_derivatives(diff, rows, cols);
  const double n = static_cast<double>(diff.size());
  const double floor_term = std::sqrt(kLocalLossEpsilon);

  LossGrad out;
  out.gradient.assign(diff.size(), 0.0);
  double acc = 0.0;
  auto g = [&](int i, int j) -> double& { return out.gradient[static_cast<std::size_t>(i) * cols + j]; };
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * cols + j;
      const bool interior = i > 0 && i < rows - 1 && j > 0 && j < cols - 1;
      if (!interior) {
        acc += floor_term;
        continue;
      }
      const double r = std::sqrt(d.d_ii[k] * d.d_ii[k] + d.d_jj[k] * d.d_jj[k] +
                                 d.d_ij[k] * d.d_ij[k] + d.d_ji[k] * d.d_ji[k] + kLocalLossEpsilon);
      acc += r;
      const double a_ii = d.d_ii[k] / (n * r);
      const double a_jj = d.d_jj[k] / (n * r);
      const double a_mix = 0.25 * (d.d_ij[k] + d.d_ji[k]) / (n * r);
      g(i - 1, j) += a_ii;
      g(i + 1, j) += a_ii;
      g(i, j) -= 2.0 * a_ii;
      g(i, j - 1) += a_jj;
      g(i, j + 1) += a_jj;
      g(i, j) -= 2.0 * a_jj;
      g(i + 1, j + 1) += a_mix;
      g(i + 1, j - 1) -= a_mix;
      g(i - 1, j + 1) -= a_mix;
      g(i - 1, j - 1) += a_mix;
    }
  }
  out.value = acc / n;
  return out;
}

LossGrad local_loss(const Sinogram& s_hat, const Sinogram& s_nd) {
  if (!(s_hat.geometry == s_nd.geometry)) throw std::domain_error("local_loss: geometry mismatch");
  return local_loss(s_hat.values, s_nd.values, s_hat.views(), s_hat.detectors());
}

LossGrad sisl(std::span<const double> s_hat, std::span<const double> s_nd, const ConjugateMap& map,
              SislWeights weights) {
  const FanGeometry& geom = map.geometry();
  LossGrad out;
  out.gradient.assign(s_hat.size(), 0.0);
  if (weights.global != 0.0) {
    const LossGrad lc = global_loss(s_hat, map);
    out.value += weights.global * lc.value;
    for (std::size_t k = 0; k < s_hat.size(); ++k) out.gradient[k] += weights.global * lc.gradient[k];
  }
  if (weights.local != 0.0) {
    const LossGrad ls = local_loss(s_hat, s_nd, geom.num_views, geom.num_detectors);
    out.value += weights.local * ls.value;
    for (std::size_t k = 0; k < s_hat.size(); ++k) out.gradient[k] += weights.local * ls.gradient[k];
  }
  return out;
}

LossGrad sisl(const Sinogram& s_hat, const Sinogram& s_nd) {
  if (!(s_hat.geometry == s_nd.geometry)) throw std::domain_error("sisl: geometry mismatch");
  return sisl(s_hat.values, s_nd.values, ConjugateMap(s_hat.geometry));
}

}  // namespace sist
