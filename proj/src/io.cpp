#include "sist/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sist {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_floats(std::ostream& out, const std::vector<double>& values) {
  std::vector<unsigned char> buf(values.size() * 4);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[k]));
    for (int b = 0; b < 4; ++b) buf[4 * k + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

std::vector<double> read_floats(std::istream& in, std::size_t count, const fs::path& path) {
  std::vector<unsigned char> buf(count * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw std::runtime_error(path.string() + ": truncated sample data");
  std::vector<double> values(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[4 * k + b]) << (8 * b);
    values[k] = std::bit_cast<float>(bits);
  }
  return values;
}

void write_container(const fs::path& path, const char magic[4], const KeyValues& header,
                     const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  const std::string text = header.serialize();
  out.write(magic, 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_floats(out, values);
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

KeyValues read_header(std::istream& in, const char magic[4], const fs::path& path) {
  char got[4] = {};
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0)
    throw std::runtime_error(path.string() + ": bad magic, expected " + std::string(magic, 4));
  const std::uint32_t len = get_u32(in);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  return KeyValues::parse(text);
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key=value");
    kv.entries_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string KeyValues::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

void KeyValues::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << serialize();
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::out_of_range("missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key) const {
  const auto& v = get(key);
  std::size_t used = 0;
  const double d = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("key '" + key + "': not a number: " + v);
  return d;
}

double KeyValues::get_double_or(const std::string& key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

long long KeyValues::get_int(const std::string& key) const {
  const auto& v = get(key);
  std::size_t used = 0;
  const long long n = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("key '" + key + "': not an integer: " + v);
  return n;
}

long long KeyValues::get_int_or(const std::string& key, long long fallback) const {
  return contains(key) ? get_int(key) : fallback;
}

void KeyValues::set(const std::string& key, double value) { entries_[key] = format_double(value); }

void write_geometry(KeyValues& kv, const FanGeometry& geom, const std::string& prefix) {
  kv.set(prefix + "num_views", geom.num_views);
  kv.set(prefix + "num_detectors", geom.num_detectors);
  kv.set(prefix + "detector_spacing", geom.detector_spacing);
  kv.set(prefix + "source_radius", geom.source_radius);
  kv.set(prefix + "mode", to_string(geom.mode));
}

FanGeometry read_geometry(const KeyValues& kv, const std::string& prefix) {
  FanGeometry g;
  g.num_views = static_cast<int>(kv.get_int(prefix + "num_views"));
  g.num_detectors = static_cast<int>(kv.get_int(prefix + "num_detectors"));
  g.detector_spacing = kv.get_double(prefix + "detector_spacing");
  g.source_radius = kv.get_double_or(prefix + "source_radius", 0.0);
  g.mode = parse_scan_mode(kv.get_or(prefix + "mode", "fan"));
  g.validate();
  return g;
}

void write_image(const fs::path& path, const Image& image) {
  KeyValues header;
  header.set("width", image.width);
  header.set("height", image.height);
  header.set("pixel_size", image.pixel_size);
  write_container(path, "IMG1", header, image.values);
}

Image read_image(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  const KeyValues header = read_header(in, "IMG1", path);
  Image img(static_cast<int>(header.get_int("width")), static_cast<int>(header.get_int("height")));
  if (img.width < 1 || img.height < 1) throw std::runtime_error(path.string() + ": bad image size");
  img.pixel_size = header.get_double("pixel_size");
  img.values = read_floats(in, img.values.size(), path);
  return img;
}

void write_sinogram(const fs::path& path, const Sinogram& sino) {
  KeyValues header;
  write_geometry(header, sino.geometry);
  write_container(path, "SGM1", header, sino.values);
}

Sinogram read_sinogram(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  const KeyValues header = read_header(in, "SGM1", path);
  Sinogram sino(read_geometry(header));
  sino.values = read_floats(in, sino.values.size(), path);
  return sino;
}

}  // namespace sist
