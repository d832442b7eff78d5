#include "sist/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace sist {

namespace {

constexpr double kPi = std::numbers::pi;

// 53-bit uniform in [0, 1); avoids the implementation-defined
// std::uniform_real_distribution so phantoms are identical across toolchains.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

double support_radius(const Ellipse& e) {
  return std::hypot(e.cx, e.cy) + std::max(e.semi_x, e.semi_y);
}

}  // namespace

std::string to_string(ScanMode mode) { return mode == ScanMode::fan ? "fan" : "parallel"; }

ScanMode parse_scan_mode(const std::string& text) {
  if (text == "fan") return ScanMode::fan;
  if (text == "parallel") return ScanMode::parallel;
  throw std::invalid_argument("unknown scan mode '" + text + "'");
}

Complexity parse_complexity(const std::string& text) {
  if (text == "small") return Complexity::small;
  if (text == "medium") return Complexity::medium;
  throw std::invalid_argument("unknown phantom complexity '" + text + "'");
}

double FanGeometry::view_angle(int view) const { return 2.0 * kPi * view / num_views; }

void FanGeometry::validate() const {
  if (num_views < 1) throw std::domain_error("geometry: num_views must be positive");
  if (num_detectors < 1 || num_detectors % 2 == 0)
    throw std::domain_error("geometry: num_detectors must be a positive odd number");
  if (!(detector_spacing > 0.0) || !std::isfinite(detector_spacing))
    throw std::domain_error("geometry: detector_spacing must be positive and finite");
  if (mode == ScanMode::fan) {
    if (detector_spacing * half_span() >= kPi / 2)
      throw std::domain_error("geometry: fan half-angle must stay below pi/2");
    if (!(source_radius > 1.0) || !std::isfinite(source_radius))
      throw std::domain_error("geometry: source must lie outside the unit field of view");
  }
}

FanGeometry FanGeometry::exact_fan(int views, int detectors, int k, double source_radius) {
  FanGeometry g{views, detectors, k * kPi / views, source_radius, ScanMode::fan};
  g.validate();
  return g;
}

FanGeometry FanGeometry::parallel_beam(int views, int detectors, double spacing) {
  FanGeometry g{views, detectors, spacing, 0.0, ScanMode::parallel};
  g.validate();
  return g;
}

double detector_angle(int j, const FanGeometry& geom) {
  if (std::abs(j) > geom.half_span()) throw std::domain_error("detector index out of range");
  return j * geom.detector_spacing;
}

RayLine ray_line(const FanGeometry& geom, int view, int j) {
  const double beta = geom.view_angle(view);
  if (geom.mode == ScanMode::parallel) return {beta, j * geom.detector_spacing};
  // Source at R(cos b, sin b), ray direction at angle b + pi + gamma.
  const double gamma = j * geom.detector_spacing;
  return {beta + gamma + kPi / 2, -geom.source_radius * std::sin(gamma)};
}

void Phantom::validate() const {
  for (const auto& e : ellipses) {
    if (!(e.semi_x > 0.0) || !(e.semi_y > 0.0))
      throw std::domain_error("phantom: ellipse semi-axes must be positive");
    if (!std::isfinite(e.density) || !std::isfinite(e.cx) || !std::isfinite(e.cy) ||
        !std::isfinite(e.angle))
      throw std::domain_error("phantom: non-finite ellipse parameter");
    if (support_radius(e) > 1.0 + 1e-12)
      throw std::domain_error("phantom: ellipse leaves the unit field of view");
  }
}

Phantom shepp_logan() {
  constexpr double deg = kPi / 180.0;
  return Phantom{{
      {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
      {0.22, 0.0, 0.11, 0.31, -18.0 * deg, -0.2},
      {-0.22, 0.0, 0.16, 0.41, 18.0 * deg, -0.2},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
      {0.0, -0.605, 0.023, 0.023, 0.0, 0.1},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
  }};
}

Phantom make_phantom(std::uint64_t seed, Complexity complexity) {
  if (seed == 0) return shepp_logan();
  std::mt19937_64 rng(seed);
  const int count = complexity == Complexity::small ? 3 + static_cast<int>(rng() % 3)
                                                    : 6 + static_cast<int>(rng() % 5);
  Phantom p;
  // Body: a large soft-tissue-like ellipse that every feature sits inside.
  Ellipse body;
  body.cx = uniform(rng, -0.05, 0.05);
  body.cy = uniform(rng, -0.05, 0.05);
  body.semi_x = uniform(rng, 0.6, 0.85);
  body.semi_y = uniform(rng, 0.6, 0.85);
  body.angle = uniform(rng, 0.0, kPi);
  body.density = uniform(rng, 0.6, 1.0);
  p.ellipses.push_back(body);

  const double inner = std::min(body.semi_x, body.semi_y);
  for (int k = 1; k < count; ++k) {
    Ellipse e;
    e.semi_x = uniform(rng, 0.04, 0.3 * inner);
    e.semi_y = uniform(rng, 0.04, 0.3 * inner);
    const double reach = inner - std::max(e.semi_x, e.semi_y) - 0.02;
    const double r = reach * std::sqrt(uniform01(rng));
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    e.cx = body.cx + r * std::cos(phi);
    e.cy = body.cy + r * std::sin(phi);
    e.angle = uniform(rng, 0.0, kPi);
    e.density = uniform(rng, -0.3, 0.4);
    p.ellipses.push_back(e);
  }
  p.validate();
  return p;
}

Image::Image(int w, int h)
    : width(w), height(h), pixel_size(2.0 / w), values(static_cast<std::size_t>(w) * h, 0.0) {}

Sinogram::Sinogram(const FanGeometry& geom) : geometry(geom), values(geom.size(), 0.0) {}

Image rasterize(const Phantom& phantom, int width) {
  if (width < 8) throw std::domain_error("rasterize: width must be at least 8");
  Image img = Image::square(width);
  for (const auto& e : phantom.ellipses) {
    const double c = std::cos(e.angle);
    const double s = std::sin(e.angle);
    for (int r = 0; r < img.height; ++r) {
      const double dy = img.y_of(r) - e.cy;
      for (int col = 0; col < img.width; ++col) {
        const double dx = img.x_of(col) - e.cx;
        const double u = (c * dx + s * dy) / e.semi_x;
        const double v = (-s * dx + c * dy) / e.semi_y;
        if (u * u + v * v <= 1.0) img.at(r, col) += e.density;
      }
    }
  }
  return img;
}

double ellipse_line_integral(const Ellipse& e, RayLine ray) {
  const double cos_t = std::cos(ray.theta);
  const double sin_t = std::sin(ray.theta);
  const double shift = ray.offset - (e.cx * cos_t + e.cy * sin_t);
  const double cos_rel = std::cos(ray.theta - e.angle);
  // Written as b^2 + (a^2 - b^2) cos^2 so circles are exactly view-independent.
  const double a2 = e.semi_x * e.semi_x;
  const double b2 = e.semi_y * e.semi_y;
  const double rho2 = b2 + (a2 - b2) * cos_rel * cos_rel;
  const double gap = rho2 - shift * shift;
  if (gap <= 0.0) return 0.0;
  return e.density * 2.0 * e.semi_x * e.semi_y * std::sqrt(gap) / rho2;
}

Sinogram analytic_sinogram(const Phantom& phantom, const FanGeometry& geom) {
  geom.validate();
  if (geom.mode == ScanMode::fan) {
    for (const auto& e : phantom.ellipses)
      if (support_radius(e) >= geom.source_radius)
        throw std::domain_error("analytic_sinogram: source lies inside the phantom support");
  }
  Sinogram sino(geom);
  const int half = geom.half_span();
  for (int i = 0; i < geom.num_views; ++i) {
    for (int j = -half; j <= half; ++j) {
      const RayLine ray = ray_line(geom, i, j);
      double sum = 0.0;
      for (const auto& e : phantom.ellipses) sum += ellipse_line_integral(e, ray);
      sino.at(i, j + half) = sum;
    }
  }
  return sino;
}

}  // namespace sist
