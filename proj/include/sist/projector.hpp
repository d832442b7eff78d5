#pragma once

#include <string>
#include <vector>

#include "sist/geometry.hpp"

namespace sist {

enum class FilterKind { ramp, hann };

/// How a detector row is extended beyond its ends before filtering.
/// `zero_padded` is the linear convolution FBP needs; `periodic` is circular
/// convolution, under which the filter's zero DC response is exact.
enum class RowExtension { zero_padded, periodic };

FilterKind parse_filter_kind(const std::string& text);
std::string to_string(FilterKind kind);

/// Ray-driven projection with exact per-pixel traversal lengths.
Sinogram forward_project(const Image& image, const FanGeometry& geom);

/// Spatial taps of the band-limited ramp in sample units, offsets -(n-1)..n-1.
/// Classic values: 1/4 at 0, -1/(pi^2 k^2) at odd k, 0 at even k != 0.
std::vector<double> ramp_taps(int n, FilterKind kind);

/// Taps for circular convolution over a row of length n, laid out like
/// ramp_taps (index c - k + n - 1 holds the weight for output c, input k).
std::vector<double> periodic_ramp_taps(int n, FilterKind kind);

/// Equiangular fan-beam ramp (Kak & Slaney form) for angular pitch `alpha`,
/// including the alpha quadrature factor.
std::vector<double> fan_ramp_taps(int n, double alpha, FilterKind kind);

/// Convolves every row with the unit-spacing ramp kernel.
Sinogram ramp_filter(const Sinogram& sino, FilterKind kind,
                     RowExtension extension = RowExtension::zero_padded);

/// Filtered back-projection onto a W x W grid over [-1, 1]^2.
Image fbp(const Sinogram& sino, FilterKind kind, int width);

}  // namespace sist
