#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sist/geometry.hpp"
#include "sist/io.hpp"
#include "sist/noise.hpp"
#include "sist/projector.hpp"

namespace sist {

struct DatasetSpec {
  int count = 8;
  FanGeometry geometry = FanGeometry::parallel_beam(36, 33, 2.0 / 32);
  int image_size = 64;
  double dose_fraction = 0.1;
  double incident_photons = 1e5;
  double electronic_noise = 10.0;
  std::uint64_t seed = 1;
  Complexity complexity = Complexity::small;
  FilterKind filter = FilterKind::ramp;

  void validate() const;
};

/// One training quadruple plus the seeds that produced it.
struct Sample {
  std::string id;
  std::uint64_t phantom_seed = 0;
  std::uint64_t noise_seed = 0;
  Sinogram s_nd;
  Sinogram s_ld;
  Image i_nd;
  Image i_ld;
};

/// Phantom and noise seeds of sample `index`; neither depends on the dose.
std::uint64_t sample_phantom_seed(std::uint64_t seed, int index);
std::uint64_t sample_noise_seed(std::uint64_t seed, int index);

/// phantom -> raster (I_nd) -> analytic projection (S_nd) -> noise (S_ld)
/// -> FBP (I_ld).
Sample make_sample(const DatasetSpec& spec, int index);

/// Writes `manifest.txt` and four files per sample into `dir` (created if
/// needed). Returns the generated samples.
std::vector<Sample> gen_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);

struct Dataset {
  KeyValues manifest;
  std::vector<Sample> samples;
};

/// Reads a directory written by gen_dataset. Errors name the offending path.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace sist
