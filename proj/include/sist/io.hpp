#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "sist/geometry.hpp"

namespace sist {

/// Ordered `key=value` store. Blank lines and lines starting with '#' are
/// ignored when parsing; serialization emits keys in sorted order.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::filesystem::path& path);

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long fallback) const;

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value) { entries_[key] = std::to_string(value); }
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

/// Round-trip-exact decimal text for a double.
std::string format_double(double value);

void write_geometry(KeyValues& kv, const FanGeometry& geom, const std::string& prefix = "");
FanGeometry read_geometry(const KeyValues& kv, const std::string& prefix = "");

// IMG1 / SGM1: 4 magic bytes, u32 little-endian header length, UTF-8
// `key=value` header, then float32 little-endian samples row-major.
void write_image(const std::filesystem::path& path, const Image& image);
Image read_image(const std::filesystem::path& path);
void write_sinogram(const std::filesystem::path& path, const Sinogram& sino);
Sinogram read_sinogram(const std::filesystem::path& path);

}  // namespace sist
