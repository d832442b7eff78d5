#pragma once

#include <cstdint>

#include "sist/geometry.hpp"

namespace sist {

/// Low-dose acquisition parameters. Defaults are the normal-dose photon
/// budget (1e5 incident photons) and electronic noise level (10) of the
/// validated insertion model.
struct DoseConfig {
  double dose_fraction = 1.0;  // a in (0, 1]
  double incident_photons = 1e5;
  double electronic_noise = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-sample standard deviation added to a normal-dose log projection `pA`
/// when simulating dose fraction a:
///   sqrt((1-a)/a * e^pA / N0 * (1 + (1+a)/a * Ne e^pA / N0)).
double noise_sigma(double pA, const DoseConfig& cfg);

/// Standard normal draw determined only by (seed, view, detector column).
double keyed_normal(std::uint64_t seed, std::uint64_t view, std::uint64_t col);

/// P_B = P_A + noise_sigma(P_A) * x with x from keyed_normal. No clipping.
Sinogram insert_low_dose_noise(const Sinogram& sino, const DoseConfig& cfg);

}  // namespace sist
