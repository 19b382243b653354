#include <fstream>

#include "dcf/errors.hpp"
#include "dcf/image_io.hpp"
#include "support.hpp"

using namespace dcf;

namespace {

Image8 gradient_image(int w, int h, int channels) {
  Image8 img{w, h, channels, {}};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) img.pixels.push_back(static_cast<std::uint8_t>((x * 37 + y * 11 + c * 80) % 256));
  return img;
}

bool same_image(const Image8& a, const Image8& b) {
  return a.width == b.width && a.height == b.height && a.channels == b.channels && a.pixels == b.pixels;
}

}  // namespace

TEST_SUITE("image_io") {

TEST_CASE("PNG, PPM and PGM round trips are lossless") {
  auto dir = dcf::test::scratch_dir("image_io");
  const Image8 rgb = gradient_image(13, 7, 3), gray = gradient_image(9, 5, 1);
  for (const char* name : {"rgb.png", "rgb.ppm"}) {
    write_image(dir / name, rgb);
    CHECK(same_image(read_image(dir / name), rgb));
  }
  for (const char* name : {"gray.png", "gray.pgm"}) {
    write_image(dir / name, gray);
    CHECK(same_image(read_image(dir / name), gray));
  }
}

TEST_CASE("every 8-bit value survives the tensor conversion") {
  Image8 img{256, 1, 3, {}};
  for (int v = 0; v < 256; ++v)
    for (int c = 0; c < 3; ++c) img.pixels.push_back(static_cast<std::uint8_t>(v));
  Tensor t = image_to_tensor(img);
  CHECK(t.at(0, 0, 0, 0) == -1.0);
  CHECK(t.at(0, 0, 0, 255) == 1.0);
  CHECK(same_image(tensor_to_image(t), img));
}

TEST_CASE("gray images become three identical channels") {
  Tensor t = image_to_tensor(gradient_image(4, 4, 1));
  CHECK(t.shape() == Shape{1, 3, 4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      CHECK(t.at(0, 0, y, x) == t.at(0, 1, y, x));
      CHECK(t.at(0, 0, y, x) == t.at(0, 2, y, x));
    }
}

TEST_CASE("out-of-range values are clamped on export") {
  Tensor t(Shape{2, 3, 1, 2}, 0.0);
  t.at(1, 0, 0, 0) = 3.0;
  t.at(1, 1, 0, 1) = -7.0;
  Image8 img = tensor_to_image(t, 1);
  CHECK(img.pixels[0] == 255);
  CHECK(img.pixels[4] == 0);
  CHECK(img.pixels[2] == 128);
}

TEST_CASE("mask images") {
  MaskGrid m = center_mask(8, 8);
  Image8 img = mask_to_image(m);
  CHECK(img.channels == 1);
  CHECK(img.pixels[0] == 255);
  CHECK(img.pixels[4 * 8 + 4] == 0);
  CHECK(image_to_mask(img) == m);
  Image8 soft = img;
  soft.pixels[0] = 3;
  CHECK(image_to_mask(soft).at(0, 0) == 1);
}

TEST_CASE("malformed files name the path") {
  auto dir = dcf::test::scratch_dir("image_io_bad");
  std::ofstream(dir / "junk.png", std::ios::binary) << "not a png at all";
  std::ofstream(dir / "short.ppm", std::ios::binary) << "P6\n4 4\n255\n\x01\x02";
  std::ofstream(dir / "ascii.ppm", std::ios::binary) << "P3\n1 1\n255\n0 0 0\n";
  std::ofstream(dir / "deep.pgm", std::ios::binary) << "P5\n1 1\n65535\n\x01\x02";
  for (const char* name : {"junk.png", "short.ppm", "ascii.ppm", "deep.pgm", "missing.png"}) {
    try {
      read_image(dir / name);
      FAIL("expected DataError for " << name);
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(name) != std::string::npos);
    }
  }
}

}  // TEST_SUITE
