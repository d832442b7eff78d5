#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sist {

enum class ScanMode { fan, parallel };

std::string to_string(ScanMode mode);
ScanMode parse_scan_mode(const std::string& text);

/// Circular scan over a full 2*pi turn.
///
/// Detector bins are indexed by a signed index j in [-(D-1)/2, (D-1)/2]; the
/// raster column of bin j is j + (D-1)/2. In fan mode `detector_spacing` is
/// the angular pitch of an equiangular arc detector and `source_radius` the
/// distance from the rotation center to the focal spot. In parallel mode
/// `detector_spacing` is the linear pitch and `source_radius` is unused.
struct FanGeometry {
  int num_views = 0;
  int num_detectors = 0;
  double detector_spacing = 0.0;
  double source_radius = 0.0;
  ScanMode mode = ScanMode::fan;

  int half_span() const { return (num_detectors - 1) / 2; }
  double view_angle(int view) const;
  std::size_t size() const {
    return static_cast<std::size_t>(num_views) * static_cast<std::size_t>(num_detectors);
  }

  /// Throws std::domain_error describing the first violated invariant.
  void validate() const;

  /// Fan geometry with detector pitch k*pi/P, so every conjugate view offset
  /// lands on the view grid.
  static FanGeometry exact_fan(int views, int detectors, int k, double source_radius);
  static FanGeometry parallel_beam(int views, int detectors, double spacing);

  bool operator==(const FanGeometry&) const = default;
};

/// Signed detector angle j * gamma_d. Throws std::domain_error when |j| is
/// outside the detector.
double detector_angle(int j, const FanGeometry& geom);

/// Ray in normal form: points x with x . (cos theta, sin theta) = offset.
struct RayLine {
  double theta = 0.0;
  double offset = 0.0;
};

RayLine ray_line(const FanGeometry& geom, int view, int j);

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double semi_x = 0.0;
  double semi_y = 0.0;
  double angle = 0.0;  // radians, counter-clockwise
  double density = 0.0;

  bool operator==(const Ellipse&) const = default;
};

struct Phantom {
  std::vector<Ellipse> ellipses;

  /// Throws std::domain_error if an ellipse leaves the unit field of view,
  /// is degenerate, or has a non-finite density.
  void validate() const;

  bool operator==(const Phantom&) const = default;
};

enum class Complexity { small, medium };

Complexity parse_complexity(const std::string& text);

/// The modified (high-contrast) 10-ellipse Shepp-Logan head.
Phantom shepp_logan();

/// Deterministic random ellipse scene; seed 0 always returns shepp_logan().
Phantom make_phantom(std::uint64_t seed, Complexity complexity = Complexity::small);

/// Square raster over [-1, 1]^2, row 0 at the top (y = +1).
struct Image {
  int width = 0;
  int height = 0;
  double pixel_size = 0.0;
  std::vector<double> values;

  Image() = default;
  Image(int w, int h);
  static Image square(int w) { return Image(w, w); }

  double& at(int row, int col) { return values[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }

  double x_of(int col) const { return -1.0 + (col + 0.5) * pixel_size; }
  double y_of(int row) const { return 1.0 - (row + 0.5) * pixel_size; }
};

/// P x D raster of line integrals; row i holds view angle 2*pi*i/P.
struct Sinogram {
  FanGeometry geometry;
  std::vector<double> values;

  Sinogram() = default;
  explicit Sinogram(const FanGeometry& geom);

  int views() const { return geometry.num_views; }
  int detectors() const { return geometry.num_detectors; }

  double& at(int view, int col) {
    return values[static_cast<std::size_t>(view) * geometry.num_detectors + col];
  }
  double at(int view, int col) const {
    return values[static_cast<std::size_t>(view) * geometry.num_detectors + col];
  }
  std::span<const double> row(int view) const {
    return std::span<const double>(values).subspan(
        static_cast<std::size_t>(view) * geometry.num_detectors, geometry.num_detectors);
  }
};

Image rasterize(const Phantom& phantom, int width);

/// Exact chord-length integral of one ellipse along a line.
double ellipse_line_integral(const Ellipse& e, RayLine ray);

Sinogram analytic_sinogram(const Phantom& phantom, const FanGeometry& geom);

}  // namespace sist
