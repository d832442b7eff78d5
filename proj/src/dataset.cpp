#include "sist/dataset.hpp"

#include <cstdio>
#include <stdexcept>

namespace sist {

namespace fs = std::filesystem;

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string sample_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%04d", index);
  return buf;
}

std::string to_string(Complexity c) { return c == Complexity::small ? "small" : "medium"; }

}  // namespace

void DatasetSpec::validate() const {
  if (count < 1) throw std::invalid_argument("dataset needs at least one sample");
  if (image_size < 8) throw std::invalid_argument("image size must be at least 8");
  geometry.validate();
  DoseConfig dose{dose_fraction, incident_photons, electronic_noise, 0};
  dose.validate();
}

std::uint64_t sample_phantom_seed(std::uint64_t seed, int index) {
  // Seed 0 is reserved for the fixed preset.
  const std::uint64_t s = mix64(mix64(seed) ^ static_cast<std::uint64_t>(index));
  return s == 0 ? 1 : s;
}

std::uint64_t sample_noise_seed(std::uint64_t seed, int index) {
  return mix64(sample_phantom_seed(seed, index) ^ 0x6e6f697365ULL);
}

Sample make_sample(const DatasetSpec& spec, int index) {
  Sample s;
  s.id = sample_id(index);
  s.phantom_seed = sample_phantom_seed(spec.seed, index);
  s.noise_seed = sample_noise_seed(spec.seed, index);
  const Phantom phantom = make_phantom(s.phantom_seed, spec.complexity);
  s.i_nd = rasterize(phantom, spec.image_size);
  s.s_nd = analytic_sinogram(phantom, spec.geometry);
  const DoseConfig dose{spec.dose_fraction, spec.incident_photons, spec.electronic_noise, s.noise_seed};
  s.s_ld = insert_low_dose_noise(s.s_nd, dose);
  s.i_ld = fbp(s.s_ld, spec.filter, spec.image_size);
  return s;
}

std::vector<Sample> gen_dataset(const DatasetSpec& spec, const fs::path& dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": cannot create directory: " + ec.message());

  std::vector<Sample> samples(spec.count);
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < spec.count; ++k) samples[k] = make_sample(spec, k);

  KeyValues manifest;
  manifest.set("count", spec.count);
  manifest.set("image_size", spec.image_size);
  manifest.set("dose_fraction", spec.dose_fraction);
  manifest.set("incident_photons", spec.incident_photons);
  manifest.set("electronic_noise", spec.electronic_noise);
  manifest.set("seed", std::to_string(spec.seed));
  manifest.set("complexity", to_string(spec.complexity));
  manifest.set("filter", to_string(spec.filter));
  write_geometry(manifest, spec.geometry, "geometry.");
  for (const Sample& s : samples) {
    const std::string p = "sample." + s.id.substr(7) + ".";
    manifest.set(p + "id", s.id);
    manifest.set(p + "phantom_seed", std::to_string(s.phantom_seed));
    manifest.set(p + "noise_seed", std::to_string(s.noise_seed));
    manifest.set(p + "s_nd", s.id + "_nd.sgm1");
    manifest.set(p + "s_ld", s.id + "_ld.sgm1");
    manifest.set(p + "i_nd", s.id + "_nd.img1");
    manifest.set(p + "i_ld", s.id + "_ld.img1");
    write_sinogram(dir / (s.id + "_nd.sgm1"), s.s_nd);
    write_sinogram(dir / (s.id + "_ld.sgm1"), s.s_ld);
    write_image(dir / (s.id + "_nd.img1"), s.i_nd);
    write_image(dir / (s.id + "_ld.img1"), s.i_ld);
  }
  manifest.save(dir / "manifest.txt");
  return samples;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.manifest = KeyValues::load(dir / "manifest.txt");
  const long long count = ds.manifest.get_int("count");
  if (count < 1) throw std::runtime_error((dir / "manifest.txt").string() + ": empty dataset");
  for (long long k = 0; k < count; ++k) {
    const std::string p = "sample." + sample_id(static_cast<int>(k)).substr(7) + ".";
    Sample s;
    s.id = ds.manifest.get(p + "id");
    s.phantom_seed = std::stoull(ds.manifest.get(p + "phantom_seed"));
    s.noise_seed = std::stoull(ds.manifest.get(p + "noise_seed"));
    s.s_nd = read_sinogram(dir / ds.manifest.get(p + "s_nd"));
    s.s_ld = read_sinogram(dir / ds.manifest.get(p + "s_ld"));
    s.i_nd = read_image(dir / ds.manifest.get(p + "i_nd"));
    s.i_ld = read_image(dir / ds.manifest.get(p + "i_ld"));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace sist
