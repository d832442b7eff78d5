#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sist/io.hpp"
#include "sist/nn.hpp"

namespace sist {

// CKPT1: magic `CKPT1`, u32 little-endian header length, `key=value` header,
// then every parameter as float32 little-endian in registration order. The
// header names each parameter as `param.NNNN=<path> <d0>x<d1>...`. When
// `adam=1`, the first moments of all parameters follow, then the second
// moments; `adam.step` holds the update counter.
struct Checkpoint {
  KeyValues header;
  std::vector<std::string> names;
  std::vector<nn::Shape> shapes;
  std::vector<std::vector<float>> values;
  bool has_adam = false;
  long long adam_step = 0;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
};

/// `meta` is merged into the header (config, epoch, ...).
void write_checkpoint(const std::filesystem::path& path, const nn::ParamStore<float>& params,
                      const nn::Adam<float>* adam, const KeyValues& meta);

Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies values (and optimizer state when both sides have it) into a model
/// with the same parameter layout. Throws std::runtime_error on any name or
/// shape mismatch.
void restore_checkpoint(const Checkpoint& ckpt, nn::ParamStore<float>& params,
                        nn::Adam<float>* adam = nullptr);

}  // namespace sist
