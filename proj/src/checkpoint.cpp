#include "sist/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sist {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[5] = {'C', 'K', 'P', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_floats(std::ostream& out, std::span<const float> values) {
  std::vector<unsigned char> buf(values.size() * 4);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(values[k]);
    for (int b = 0; b < 4; ++b) buf[4 * k + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<float> get_floats(std::istream& in, std::size_t count, const fs::path& path) {
  std::vector<unsigned char> buf(count * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw std::runtime_error(path.string() + ": truncated checkpoint data");
  std::vector<float> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[4 * k + b]) << (8 * b);
    values[k] = std::bit_cast<float>(bits);
  }
  return values;
}

std::string param_key(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "param.%04zu", index);
  return buf;
}

std::string shape_text(const nn::Shape& shape) {
  std::string s;
  for (std::size_t k = 0; k < shape.size(); ++k) s += (k ? "x" : "") + std::to_string(shape[k]);
  return s;
}

nn::Shape parse_shape(const std::string& text, const fs::path& path) {
  nn::Shape shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      shape.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ": bad parameter shape '" + text + "'");
    }
  }
  return shape;
}

}  // namespace

void write_checkpoint(const fs::path& path, const nn::ParamStore<float>& params,
                      const nn::Adam<float>* adam, const KeyValues& meta) {
  KeyValues header = meta;
  const auto& entries = params.entries();
  header.set("param.count", static_cast<long long>(entries.size()));
  for (std::size_t k = 0; k < entries.size(); ++k)
    header.set(param_key(k), entries[k].first + " " + shape_text(entries[k].second.shape()));
  header.set("adam", adam ? 1 : 0);
  if (adam) header.set("adam.step", adam->steps());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  const std::string text = header.serialize();
  out.write(kMagic, sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : entries) put_floats(out, e.second.values());
  if (adam) {
    for (const auto& m : adam->first_moment()) put_floats(out, m);
    for (const auto& v : adam->second_moment()) put_floats(out, v);
  }
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  char magic[sizeof kMagic] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error(path.string() + ": not a CKPT1 file");
  unsigned char len_bytes[4];
  in.read(reinterpret_cast<char*>(len_bytes), 4);
  const std::uint32_t len = len_bytes[0] | (len_bytes[1] << 8) | (len_bytes[2] << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw std::runtime_error(path.string() + ": truncated header");

  Checkpoint ckpt;
  ckpt.header = KeyValues::parse(text);
  const long long count = ckpt.header.get_int("param.count");
  for (long long k = 0; k < count; ++k) {
    const std::string& line = ckpt.header.get(param_key(static_cast<std::size_t>(k)));
    const auto space = line.rfind(' ');
    if (space == std::string::npos) throw std::runtime_error(path.string() + ": bad parameter line");
    ckpt.names.push_back(line.substr(0, space));
    ckpt.shapes.push_back(parse_shape(line.substr(space + 1), path));
  }
  for (const auto& shape : ckpt.shapes) ckpt.values.push_back(get_floats(in, nn::numel(shape), path));
  ckpt.has_adam = ckpt.header.get_int_or("adam", 0) != 0;
  if (ckpt.has_adam) {
    ckpt.adam_step = ckpt.header.get_int("adam.step");
    for (const auto& shape : ckpt.shapes) ckpt.first_moment.push_back(get_floats(in, nn::numel(shape), path));
    for (const auto& shape : ckpt.shapes) ckpt.second_moment.push_back(get_floats(in, nn::numel(shape), path));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw std::runtime_error(path.string() + ": trailing bytes after checkpoint data");
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, nn::ParamStore<float>& params, nn::Adam<float>* adam) {
  auto& entries = params.entries();
  if (entries.size() != ckpt.names.size())
    throw std::runtime_error("checkpoint has " + std::to_string(ckpt.names.size()) +
                             " parameters, model has " + std::to_string(entries.size()));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].first != ckpt.names[k] || entries[k].second.shape() != ckpt.shapes[k])
      throw std::runtime_error("checkpoint parameter " + ckpt.names[k] + " does not match model parameter " +
                               entries[k].first);
    auto dst = entries[k].second.mutable_values();
    std::copy(ckpt.values[k].begin(), ckpt.values[k].end(), dst.begin());
  }
  if (adam && ckpt.has_adam) {
    adam->set_steps(ckpt.adam_step);
    adam->first_moment() = ckpt.first_moment;
    adam->second_moment() = ckpt.second_moment;
  }
}

}  // namespace sist
