#include "sist/noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sist {

namespace {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

void DoseConfig::validate() const {
  if (!(dose_fraction > 0.0) || dose_fraction > 1.0)
    throw std::domain_error("dose fraction must lie in (0, 1]");
  if (!(incident_photons > 0.0)) throw std::domain_error("incident photon count must be positive");
  if (!(electronic_noise >= 0.0)) throw std::domain_error("electronic noise must be nonnegative");
}

double noise_sigma(double pA, const DoseConfig& cfg) {
  cfg.validate();
  const double a = cfg.dose_fraction;
  const double transmitted = std::exp(pA) / cfg.incident_photons;
  const double variance =
      (1.0 - a) / a * transmitted * (1.0 + (1.0 + a) / a * cfg.electronic_noise * transmitted);
  return std::sqrt(variance);
}

double keyed_normal(std::uint64_t seed, std::uint64_t view, std::uint64_t col) {
  const std::uint64_t key = mix64(mix64(mix64(seed) ^ view) ^ col);
  const std::uint64_t r1 = mix64(key);
  const std::uint64_t r2 = mix64(key ^ 0x5851f42d4c957f2dULL);
  const double u1 = (static_cast<double>(r1 >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(r2 >> 11) * 0x1.0p-53;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Sinogram insert_low_dose_noise(const Sinogram& sino, const DoseConfig& cfg) {
  cfg.validate();
  Sinogram out = sino;
  if (cfg.dose_fraction == 1.0) return out;
  const int views = sino.views();
  const int cols = sino.detectors();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < views; ++i) {
    for (int c = 0; c < cols; ++c) {
      const double pA = sino.at(i, c);
      out.at(i, c) = pA + noise_sigma(pA, cfg) * keyed_normal(cfg.seed, i, c);
    }
  }
  return out;
}

}  // namespace sist
