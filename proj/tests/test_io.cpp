#include <stdexcept>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sist/io.hpp"

using namespace sist;
namespace fs = std::filesystem;

TEST_SUITE("io") {

TEST_CASE("key value text") {
  const KeyValues kv = KeyValues::parse("# comment\n\nb=2\na = x y \nc=0.25\n");
  CHECK(kv.get("a") == "x y");
  CHECK(kv.get_int("b") == 2);
  CHECK(kv.get_double("c") == 0.25);
  CHECK(kv.get_or("missing", "z") == "z");
  CHECK(kv.serialize() == "a=x y\nb=2\nc=0.25\n");
  CHECK_THROWS(kv.get("missing"));
  CHECK_THROWS_AS(KeyValues::parse("novalue\n"), std::invalid_argument);
}

TEST_CASE("doubles survive a text round trip") {
  for (double v : {0.1, 1.0 / 3, 2.0 / 32, 1e-300, -7.25e12}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("geometry keys") {
  const FanGeometry g = FanGeometry::exact_fan(90, 33, 2, 1.5);
  KeyValues kv;
  write_geometry(kv, g, "g.");
  CHECK(read_geometry(kv, "g.") == g);
}

TEST_CASE("image and sinogram files") {
  const fs::path dir = fs::temp_directory_path() / "sist_io";
  fs::create_directories(dir);
  Image img = rasterize(make_phantom(1), 16);
  img.values[3] = 0.1;  // not representable in float32
  write_image(dir / "a.img1", img);
  const Image back = read_image(dir / "a.img1");
  CHECK(back.width == 16);
  CHECK(back.pixel_size == img.pixel_size);
  for (std::size_t k = 0; k < img.values.size(); ++k) CHECK(back.values[k] == static_cast<double>(static_cast<float>(img.values[k])));

  const Sinogram s = analytic_sinogram(make_phantom(1), FanGeometry::exact_fan(12, 9, 1, 1.5));
  write_sinogram(dir / "a.sgm1", s);
  const Sinogram sb = read_sinogram(dir / "a.sgm1");
  CHECK(sb.geometry == s.geometry);
  CHECK(sb.values.size() == s.values.size());

  std::ifstream in(dir / "a.img1", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "IMG1");
  CHECK_THROWS_AS(read_sinogram(dir / "a.img1"), std::runtime_error);
  CHECK_THROWS_AS(read_image(dir / "missing.img1"), std::runtime_error);
  fs::remove_all(dir);
}

}  // TEST_SUITE
