#include <stdexcept>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "sist/metrics.hpp"
#include "sist/projector.hpp"

using namespace sist;

namespace {

const Phantom kDisk{{Ellipse{0, 0, 0.5, 0.5, 0, 1.0}}};

FanGeometry bench_fan() { return FanGeometry::exact_fan(360, 129, 1, 2.0); }

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_SUITE("projector") {

TEST_CASE("zero image projects to zero") {
  for (double v : forward_project(Image::square(32), FanGeometry::exact_fan(36, 33, 1, 1.5)).values)
    CHECK(v == 0.0);
}

TEST_CASE("projection is exactly linear in the image") {
  const Image img = rasterize(make_phantom(4, Complexity::medium), 64);
  Image twice = img;
  for (double& v : twice.values) v *= 2.0;
  const auto g = FanGeometry::exact_fan(36, 33, 1, 1.5);
  const Sinogram a = forward_project(img, g);
  const Sinogram b = forward_project(twice, g);
  for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(b.values[k] == 2.0 * a.values[k]);
}

TEST_CASE("uniform pixel projects its traversal length") {
  // One bright pixel at the centre-right of a 16 grid; a horizontal parallel
  // ray through its middle crosses exactly one pixel width.
  Image img = Image::square(16);
  img.at(7, 8) = 1.0;
  const auto g = FanGeometry::parallel_beam(4, 17, 1.0 / 16);
  const Sinogram s = forward_project(img, g);
  // View 1 is theta = pi/2: rays are horizontal lines y = offset. Pixel row 7
  // spans y in [0, 1/8]; detector j = 1 sits at y = 1/16.
  CHECK(s.at(1, 8 + 1) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("disk raster projection against the analytic chord") {
  const auto g = bench_fan();
  const Image img = rasterize(kDisk, 128);
  const Sinogram exact = analytic_sinogram(kDisk, g);
  const Sinogram numeric = forward_project(img, g);
  const double pixel = img.pixel_size;
  const int half = g.half_span();
  double worst = 0.0, worst_away = 0.0, sq = 0.0;
  for (int i = 0; i < g.num_views; ++i) {
    for (int j = -half; j <= half; ++j) {
      const double d = std::abs(exact.at(i, j + half) - numeric.at(i, j + half));
      worst = std::max(worst, d);
      sq += d * d;
      if (std::abs(std::abs(ray_line(g, i, j).offset) - 0.5) > 4 * pixel) worst_away = std::max(worst_away, d);
    }
  }
  const double rms = std::sqrt(sq / exact.values.size());
  MESSAGE("max ", worst, " away from tangency ", worst_away, " rms ", rms);
  // Staircase error: a ray grazing the raster boundary can pick up a chord of
  // order sqrt(r * pixel), well above a pixel width.
  CHECK(worst <= 0.08);
  CHECK(rms <= 0.01);
  CHECK(worst_away <= 2 * pixel);
}

TEST_CASE("disk raster projection within two pixel widths on every ray"
          * doctest::should_fail(true)) {
  const auto g = bench_fan();
  const Image img = rasterize(kDisk, 128);
  const Sinogram exact = analytic_sinogram(kDisk, g);
  const Sinogram numeric = forward_project(img, g);
  double worst = 0.0;
  for (std::size_t k = 0; k < exact.values.size(); ++k)
    worst = std::max(worst, std::abs(exact.values[k] - numeric.values[k]));
  CHECK(worst <= 2 * img.pixel_size);
}

TEST_CASE("ramp kernel taps") {
  const auto taps = ramp_taps(8, FilterKind::ramp);
  REQUIRE(taps.size() == 15);
  const int c = 7;
  CHECK(taps[c] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(taps[c + 1] == doctest::Approx(-1.0 / (std::numbers::pi * std::numbers::pi)).epsilon(1e-15));
  CHECK(taps[c - 1] == taps[c + 1]);
  CHECK(taps[c + 2] == 0.0);
  CHECK(taps[c - 2] == 0.0);
  CHECK(taps[c + 3] == doctest::Approx(-1.0 / (9 * std::numbers::pi * std::numbers::pi)));
  const auto hann = ramp_taps(8, FilterKind::hann);
  CHECK(hann[c] < taps[c]);
  for (int k = 1; k < 8; ++k) CHECK(hann[c + k] == hann[c - k]);
}

TEST_CASE("ramp filter of an impulse row reproduces the taps") {
  auto g = FanGeometry::parallel_beam(1, 9, 1.0);
  Sinogram s(g);
  s.at(0, 4) = 1.0;
  const Sinogram f = ramp_filter(s, FilterKind::ramp);
  const auto taps = ramp_taps(9, FilterKind::ramp);
  for (int c = 0; c < 9; ++c) CHECK(f.at(0, c) == doctest::Approx(taps[c - 4 + 8]));
}

TEST_CASE("ramp filter kills a constant row under periodic extension") {
  for (FilterKind kind : {FilterKind::ramp, FilterKind::hann}) {
    Sinogram s(FanGeometry::parallel_beam(3, 33, 0.1));
    std::fill(s.values.begin(), s.values.end(), 5.0);
    const Sinogram f = ramp_filter(s, kind, RowExtension::periodic);
    CHECK(max_abs(f.values) <= 1e-6 * 5.0);
  }
  Sinogram zero(FanGeometry::parallel_beam(3, 33, 0.1));
  CHECK(max_abs(ramp_filter(zero, FilterKind::ramp).values) == 0.0);
}

TEST_CASE("fbp of a zero sinogram is zero") {
  const Sinogram s(bench_fan());
  CHECK(max_abs(fbp(s, FilterKind::ramp, 64).values) == 0.0);
  CHECK_THROWS_AS(fbp(s, FilterKind::ramp, 7), std::domain_error);
}

TEST_CASE("fbp of the analytic disk") {
  const Image truth = rasterize(kDisk, 128);
  const double fan = psnr(fbp(analytic_sinogram(kDisk, bench_fan()), FilterKind::ramp, 128).values,
                          truth.values);
  const double par = psnr(fbp(analytic_sinogram(kDisk, FanGeometry::parallel_beam(360, 129, 2.0 / 128)),
                              FilterKind::ramp, 128).values,
                          truth.values);
  MESSAGE("disk fbp psnr fan ", fan, " parallel ", par);
  // Observed 27.65 (fan) and 27.25 (parallel): the residual sits on the edge
  // ring, where a binary raster cannot match a band-limited reconstruction.
  CHECK(fan >= 27.5);
  CHECK(par >= 27.0);
}

TEST_CASE("fbp of the analytic disk reaches 30 dB" * doctest::should_fail(true)) {
  const Image truth = rasterize(kDisk, 128);
  CHECK(psnr(fbp(analytic_sinogram(kDisk, bench_fan()), FilterKind::ramp, 128).values, truth.values) >= 30.0);
}

TEST_CASE("Shepp-Logan round trip") {
  const Image truth = rasterize(shepp_logan(), 128);
  double previous = 0.0;
  for (int views : {90, 180, 360}) {
    FanGeometry g = bench_fan();
    g.num_views = views;
    const double p = psnr(fbp(forward_project(truth, g), FilterKind::ramp, 128).values, truth.values);
    MESSAGE("P=", views, " psnr ", p);
    CHECK(p > previous);
    previous = p;
  }
  // Observed 26.34 dB at P = 360.
  CHECK(previous >= 26.0);
}

TEST_CASE("fbp is linear") {
  const auto g = FanGeometry::exact_fan(90, 65, 1, 2.0);
  const Sinogram s1 = analytic_sinogram(make_phantom(1), g);
  const Sinogram s2 = analytic_sinogram(make_phantom(2), g);
  Sinogram mix(g);
  for (std::size_t k = 0; k < mix.values.size(); ++k) mix.values[k] = 0.7 * s1.values[k] - 1.3 * s2.values[k];
  const Image a = fbp(s1, FilterKind::hann, 64);
  const Image b = fbp(s2, FilterKind::hann, 64);
  const Image m = fbp(mix, FilterKind::hann, 64);
  double scale = 0.0;
  for (double v : m.values) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k < m.values.size(); ++k)
    CHECK(std::abs(m.values[k] - (0.7 * a.values[k] - 1.3 * b.values[k])) <= 1e-5 * scale);
}

TEST_CASE("parallel reconstruction peak follows a translated disk") {
  const auto g = FanGeometry::parallel_beam(90, 65, 2.0 / 64);
  for (auto [cx, cy] : {std::pair{0.0, 0.0}, {0.25, -0.125}, {-0.4, 0.3}}) {
    const Phantom p{{Ellipse{cx, cy, 0.05, 0.05, 0, 1.0}}};
    const Image r = fbp(analytic_sinogram(p, g), FilterKind::ramp, 64);
    const auto best = std::max_element(r.values.begin(), r.values.end()) - r.values.begin();
    const double row = (1.0 - cy) / r.pixel_size - 0.5;
    const double col = (cx + 1.0) / r.pixel_size - 0.5;
    CHECK(std::abs(best / 64 - row) <= 1.0);
    CHECK(std::abs(best % 64 - col) <= 1.0);
  }
}

TEST_CASE("pixels outside the unit disk are zero") {
  const Image r = fbp(analytic_sinogram(make_phantom(3), bench_fan()), FilterKind::ramp, 64);
  CHECK(r.at(0, 0) == 0.0);
  CHECK(r.at(63, 63) == 0.0);
  CHECK(r.at(32, 32) != 0.0);
}

}  // TEST_SUITE
