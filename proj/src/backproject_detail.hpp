#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sist/geometry.hpp"

namespace sist::kernels::detail {

struct ViewTable {
  std::vector<double> cos_b;
  std::vector<double> sin_b;

  explicit ViewTable(const FanGeometry& geom) : cos_b(geom.num_views), sin_b(geom.num_views) {
    for (int i = 0; i < geom.num_views; ++i) {
      cos_b[i] = std::cos(geom.view_angle(i));
      sin_b[i] = std::sin(geom.view_angle(i));
    }
  }
};

// Sum over views of the linearly interpolated filtered projection through
// (x, y). Fan mode weights each view by 1 / L^2, L = source-to-pixel distance.
inline double backproject_pixel(std::span<const double> filtered, const FanGeometry& geom,
                                const ViewTable& views, double x, double y) {
  const int det = geom.num_detectors;
  const double half = geom.half_span();
  const double inv_spacing = 1.0 / geom.detector_spacing;
  const bool fan = geom.mode == ScanMode::fan;
  double acc = 0.0;
  for (int i = 0; i < geom.num_views; ++i) {
    const double c = views.cos_b[i];
    const double s = views.sin_b[i];
    double t = 0.0;
    double w = 1.0;
    if (fan) {
      const double u1 = geom.source_radius - (x * c + y * s);
      const double u2 = x * s - y * c;
      t = std::atan2(u2, u1) * inv_spacing + half;
      w = 1.0 / (u1 * u1 + u2 * u2);
    } else {
      t = (x * c + y * s) * inv_spacing + half;
    }
    if (t < 0.0 || t > det - 1) continue;
    const int i0 = static_cast<int>(t);
    const double f = t - i0;
    const double* row = filtered.data() + static_cast<std::size_t>(i) * det;
    const double v = i0 >= det - 1 ? row[det - 1] : (1.0 - f) * row[i0] + f * row[i0 + 1];
    acc += w * v;
  }
  return acc;
}

}  // namespace sist::kernels::detail
