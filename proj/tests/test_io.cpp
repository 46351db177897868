#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dax/errors.hpp"
#include "dax/io.hpp"
#include "dax/rng.hpp"

using namespace dax;
using namespace dax::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dax-test-io-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("8-bit samples map by v / maxval") {
  const std::string p5 = std::string("P5\n# comment\n2 1\n255\n") + char(255) + char(128);
  const Image img = parse_netpbm(p5);
  CHECK(img.shape() == ImageShape{1, 2, 1});
  CHECK(img.at(0, 0, 0) == 1.0);
  CHECK(img.at(0, 1, 0) == 128.0 / 255.0);
  const Image ascii = parse_netpbm("P3 1 1 15\n15 0 5\n");
  CHECK(ascii.at(0, 0, 0) == 1.0);
  CHECK(ascii.at(0, 0, 2) == 5.0 / 15.0);
}

TEST_CASE("bitmaps read black as 1") {
  const Image p1 = parse_netpbm("P1\n3 2\n1 0 1\n0 0 1\n");
  CHECK(p1.shape() == ImageShape{2, 3, 1});
  CHECK(p1.at(0, 0, 0) == 1.0);
  CHECK(p1.at(1, 0, 0) == 0.0);
  BinaryMask m(3, 10);
  m.set(0, 0, true);
  m.set(2, 9, true);
  m.set(1, 8, true);
  const Image back = parse_netpbm(encode_pbm(m));
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 10; ++c) CHECK((back.at(r, c, 0) == 1.0) == m.at(r, c));
  }
}

TEST_CASE("8-bit round trip quantizes to the nearest level") {
  Image img({3, 4, 3});
  Rng rng(2);
  for (double& v : img.data()) v = std::round(rng.uniform() * 255.0) / 255.0;
  CHECK(parse_netpbm(encode_netpbm(img)) == img);
  Image gray({2, 2, 1}, std::vector<double>{-0.5, 0.0, 0.5, 2.0});
  const Image g = parse_netpbm(encode_netpbm(gray));
  CHECK(g.at(0, 0, 0) == 0.0);
  CHECK(g.at(1, 0, 0) == 128.0 / 255.0);
  CHECK(g.at(1, 1, 0) == 1.0);
  CHECK_THROWS_AS(encode_netpbm(Image({2, 2, 2})), IoError);
}

TEST_CASE("corrupt or unsupported netpbm input") {
  CHECK_THROWS_AS(parse_netpbm("P7\n1 1\n"), IoError);
  CHECK_THROWS_AS(parse_netpbm("P5\n2 2\n255\n\x01"), IoError);
  CHECK_THROWS_AS(parse_netpbm("P5\n1 1\n65535\n\x01\x02"), IoError);
  CHECK_THROWS_AS(parse_netpbm(""), IoError);
  CHECK_THROWS_AS(read_netpbm("/nonexistent/file.ppm"), IoError);
}

TEST_CASE("float container round trips bit for bit") {
  Image img({5, 3, 2});
  Rng rng(3);
  for (double& v : img.data()) v = rng.uniform(-1e3, 1e3);
  img.data()[0] = 0x1.fffffffffffffp-1;
  img.data()[1] = -0.0;
  CHECK(decode_dxt(encode_dxt(img)) == img);
  CHECK(std::signbit(decode_dxt(encode_dxt(img)).data()[1]));
  const fs::path dir = scratch_dir("dxt");
  Grid g(4, 6);
  for (double& v : g.data()) v = rng.uniform();
  write_dxt(dir / "g.dxt", g);
  CHECK(read_dxt_grid(dir / "g.dxt") == g);
  CHECK(load_input(dir / "g.dxt").shape() == ImageShape{4, 6, 1});
  CHECK(encode_dxt(img).substr(0, 11) == "DXT1 5 3 2\n");
  CHECK_THROWS_AS(decode_dxt("DXT1 2 2 1\nshort"), IoError);
  CHECK_THROWS_AS(decode_dxt("XYZ"), IoError);
  write_dxt(dir / "rgb.dxt", img);
  CHECK_THROWS_AS(read_dxt_grid(dir / "rgb.dxt"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("colormap") {
  CHECK(colormap(0.0) == kColormap.front());
  CHECK(colormap(1.0) == kColormap.back());
  CHECK(colormap(-3.0) == kColormap.front());
  const auto mid = colormap(1.0 / 16.0);
  for (int k = 0; k < 3; ++k) CHECK(mid[k] == doctest::Approx(0.5 * (kColormap[0][k] + kColormap[1][k])));
  auto luminance = [](const std::array<double, 3>& c) { return 0.2126 * c[0] + 0.7152 * c[1] + 0.0722 * c[2]; };
  for (std::size_t i = 1; i < kColormap.size(); ++i) CHECK(luminance(kColormap[i]) > luminance(kColormap[i - 1]));
}

TEST_CASE("heatmap overlay") {
  const Image x({2, 2, 3}, 0.5);
  const Grid sal(2, 2, {0.0, 1.0, 2.0, 4.0});
  const Image h = heatmap_overlay(x, sal, 0.6);
  CHECK(h.shape() == ImageShape{2, 2, 3});
  for (int k = 0; k < 3; ++k) {
    CHECK(h.at(0, 0, k) == doctest::Approx(0.4 * 0.5 + 0.6 * kColormap[0][k]));
    CHECK(h.at(1, 1, k) == doctest::Approx(0.4 * 0.5 + 0.6 * kColormap[8][k]));
  }
  CHECK_THROWS_AS(heatmap_overlay(x, Grid(3, 2), 0.6), ConfigError);
}

TEST_CASE("hashing") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("files") {
  const fs::path dir = scratch_dir("files");
  write_file(dir / "a.bin", std::string("x\0y", 3));
  CHECK(read_file(dir / "a.bin") == std::string("x\0y", 3));
  CHECK_THROWS_AS(read_file(dir / "missing"), IoError);
  fs::remove_all(dir);
}
