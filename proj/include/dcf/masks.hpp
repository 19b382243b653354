#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dcf/tensor.hpp"

namespace dcf {

// Binary validity map: 1 = known pixel, 0 = hole.
class MaskGrid {
 public:
  MaskGrid() = default;
  MaskGrid(int height, int width, std::uint8_t fill = 1);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint8_t at(int y, int x) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  void set(int y, int x, std::uint8_t v);
  const std::vector<std::uint8_t>& values() const { return values_; }

  std::size_t hole_count() const;
  // Fraction of hole pixels.
  double coverage() const;

  bool operator==(const MaskGrid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> values_;
};

struct CoverageRange {
  double low = 0.2;
  double high = 0.4;
};

// Centered (H/2) x (W/2) hole. H and W must be even.
MaskGrid center_mask(int height, int width);

// Union of random brush strokes, deterministic per seed, with hole coverage
// inside range. Strokes that overshoot range.high are rejected and redrawn.
MaskGrid irregular_mask(int height, int width, std::uint64_t seed, CoverageRange range = {});

// (N, 1, H, W) tensor of 0/1 values.
Tensor mask_tensor(std::span<const MaskGrid> masks);

// M * image + (1 - M) * 0 for an (N, 1, H, W) mask tensor.
Tensor apply_mask(const Tensor& image, const Tensor& mask);
Tensor apply_mask(const Tensor& image, const MaskGrid& mask);

}  // namespace dcf
