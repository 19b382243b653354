#pragma once

#include <filesystem>
#include <vector>

#include "dcf/masks.hpp"
#include "dcf/tensor.hpp"

namespace dcf {

// 8-bit interleaved raster, 1 (gray) or 3 (RGB) channels.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

// PNG (any bit depth / color type, reduced to 8-bit gray or RGB) and binary
// PPM/PGM. Throws DataError naming the file on failure.
Image8 read_image(const std::filesystem::path& path);
// Format chosen by extension: .png, .ppm, .pgm.
void write_image(const std::filesystem::path& path, const Image8& image);

// Pixel v maps to v / 127.5 - 1. Gray images are replicated to 3 channels.
Tensor image_to_tensor(const Image8& image);
// Inverse of image_to_tensor for one batch entry; values are clamped to [-1, 1].
Image8 tensor_to_image(const Tensor& t, int index = 0);

// 255 = known, 0 = hole. Any nonzero pixel counts as known on read.
MaskGrid image_to_mask(const Image8& image);
Image8 mask_to_image(const MaskGrid& mask);

}  // namespace dcf
