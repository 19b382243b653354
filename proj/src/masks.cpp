#include "dcf/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dcf/errors.hpp"
#include "dcf/ops.hpp"
#include "dcf/random.hpp"

namespace dcf {

MaskGrid::MaskGrid(int height, int width, std::uint8_t fill)
    : height_(height), width_(width),
      values_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {
  if (height < 1 || width < 1) {
    throw ShapeError("mask must be at least 1x1, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
}

void MaskGrid::set(int y, int x, std::uint8_t v) {
  values_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
}

std::size_t MaskGrid::hole_count() const {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), 0));
}

double MaskGrid::coverage() const {
  return static_cast<double>(hole_count()) / static_cast<double>(values_.size());
}

MaskGrid center_mask(int height, int width) {
  if (height < 2 || width < 2 || height % 2 != 0 || width % 2 != 0) {
    throw ShapeError("center mask needs even dimensions, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  }
  MaskGrid m(height, width, 1);
  for (int y = height / 4; y < height / 4 + height / 2; ++y) {
    for (int x = width / 4; x < width / 4 + width / 2; ++x) m.set(y, x, 0);
  }
  return m;
}

namespace {

// Brush geometry at 256 x 256; scaled linearly with the shorter side.
constexpr double kMinThickness = 4.0;
constexpr double kMaxThickness = 16.0;
constexpr double kMinSegment = 20.0;
constexpr double kMaxSegment = 80.0;
constexpr int kMinVertices = 4;
constexpr int kMaxVertices = 10;
constexpr double kMaxTurn = std::numbers::pi / 4.0;
constexpr int kMaxConsecutiveRejects = 32;
constexpr int kMaxStrokes = 4096;

class StrokePainter {
 public:
  StrokePainter(int height, int width, Rng& rng)
      : h_(height), w_(width), scale_(std::min(height, width) / 256.0), rng_(rng) {}

  // Stamp centers and radius for one random-walk stroke.
  struct Stroke {
    std::vector<std::pair<double, double>> centers;
    double radius = 0.5;
  };

  Stroke sample() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Stroke s;
    const double thickness =
        std::max(1.0, scale_ * (kMinThickness + (kMaxThickness - kMinThickness) * unit(rng_)));
    s.radius = thickness / 2.0;
    double y = unit(rng_) * h_;
    double x = unit(rng_) * w_;
    double angle = unit(rng_) * 2.0 * std::numbers::pi;
    const int vertices =
        std::uniform_int_distribution<int>(kMinVertices, kMaxVertices)(rng_);
    s.centers.emplace_back(y, x);
    for (int v = 0; v < vertices; ++v) {
      angle += (2.0 * unit(rng_) - 1.0) * kMaxTurn;
      const double len =
          std::max(1.0, scale_ * (kMinSegment + (kMaxSegment - kMinSegment) * unit(rng_)));
      const double ny = std::clamp(y + len * std::sin(angle), 0.0, h_ - 1.0);
      const double nx = std::clamp(x + len * std::cos(angle), 0.0, w_ - 1.0);
      const int steps = std::max(1, static_cast<int>(std::ceil(std::hypot(ny - y, nx - x))));
      for (int i = 1; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        s.centers.emplace_back(y + t * (ny - y), x + t * (nx - x));
      }
      y = ny;
      x = nx;
    }
    return s;
  }

  // Clears the disc around (cy, cx); returns newly opened hole pixels.
  std::size_t stamp(MaskGrid& m, double cy, double cx, double radius) const {
    std::size_t opened = 0;
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int y1 = std::min(h_ - 1, static_cast<int>(std::ceil(cy + radius)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int x1 = std::min(w_ - 1, static_cast<int>(std::ceil(cx + radius)));
    const double r2 = std::max(radius * radius, 0.25);
    bool any = false;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
        if (dy * dy + dx * dx <= r2) {
          any = true;
          if (m.at(y, x)) {
            m.set(y, x, 0);
            ++opened;
          }
        }
      }
    }
    if (!any) {
      // Radius below one pixel: clear the pixel containing the center.
      const int y = std::clamp(static_cast<int>(cy), 0, h_ - 1);
      const int x = std::clamp(static_cast<int>(cx), 0, w_ - 1);
      if (m.at(y, x)) {
        m.set(y, x, 0);
        ++opened;
      }
    }
    return opened;
  }

 private:
  int h_, w_;
  double scale_;
  Rng& rng_;
};

}  // namespace

MaskGrid irregular_mask(int height, int width, std::uint64_t seed, CoverageRange range) {
  const std::size_t total = static_cast<std::size_t>(height) * width;
  if (height < 1 || width < 1 || total < 25) {
    throw ShapeError("irregular mask needs at least 25 pixels, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  if (!(range.low >= 0.0 && range.low <= range.high && range.high <= 1.0)) {
    throw std::invalid_argument("invalid coverage range");
  }
  const auto max_holes = static_cast<std::size_t>(std::floor(range.high * total));
  const auto min_holes = static_cast<std::size_t>(std::ceil(range.low * total));
  if (min_holes > max_holes) {
    throw ShapeError("no hole count fits the coverage range at " + std::to_string(height) + "x" +
                     std::to_string(width));
  }

  Rng rng(seed);
  const double target_cov =
      std::uniform_real_distribution<double>(range.low, range.high)(rng);
  const std::size_t target =
      std::clamp(static_cast<std::size_t>(std::ceil(target_cov * total)), min_holes, max_holes);

  StrokePainter painter(height, width, rng);
  MaskGrid mask(height, width, 1);
  std::size_t holes = 0;
  int rejects = 0;
  for (int strokes = 0; holes < target && strokes < kMaxStrokes; ++strokes) {
    const auto stroke = painter.sample();
    if (rejects < kMaxConsecutiveRejects) {
      MaskGrid candidate = mask;
      std::size_t opened = 0;
      for (const auto& [cy, cx] : stroke.centers) {
        opened += painter.stamp(candidate, cy, cx, stroke.radius);
      }
      if (holes + opened <= max_holes) {
        mask = std::move(candidate);
        holes += opened;
        rejects = 0;
      } else {
        ++rejects;
      }
      continue;
    }
    // Persistent overshoot: lay the stroke stamp by stamp and stop at the target.
    for (const auto& [cy, cx] : stroke.centers) {
      MaskGrid candidate = mask;
      const std::size_t opened = painter.stamp(candidate, cy, cx, stroke.radius);
      if (holes + opened > max_holes) break;
      mask = std::move(candidate);
      holes += opened;
      if (holes >= target) break;
    }
  }
  // Degenerate walks: open remaining pixels in seeded random order.
  if (holes < target) {
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      if (holes >= target) break;
      const int y = static_cast<int>(i / width), x = static_cast<int>(i % width);
      if (mask.at(y, x)) {
        mask.set(y, x, 0);
        ++holes;
      }
    }
  }
  return mask;
}

Tensor mask_tensor(std::span<const MaskGrid> masks) {
  if (masks.empty()) throw ShapeError("mask_tensor needs at least one mask");
  const int h = masks.front().height(), w = masks.front().width();
  Tensor out(Shape{static_cast<int>(masks.size()), 1, h, w});
  for (std::size_t n = 0; n < masks.size(); ++n) {
    if (masks[n].height() != h || masks[n].width() != w) {
      throw ShapeError("mask_tensor: masks differ in size");
    }
    for (std::size_t i = 0; i < masks[n].values().size(); ++i) {
      out.ptr()[n * masks[n].values().size() + i] = masks[n].values()[i];
    }
  }
  return out;
}

Tensor apply_mask(const Tensor& image, const Tensor& mask) {
  return blend(image, Tensor(image.shape(), 0.0), mask);
}

Tensor apply_mask(const Tensor& image, const MaskGrid& mask) {
  const Shape& s = image.shape();
  if (mask.height() != s.h || mask.width() != s.w) {
    throw ShapeError("apply_mask: mask " + std::to_string(mask.height()) + "x" +
                     std::to_string(mask.width()) + " does not match image " + s.str());
  }
  std::vector<MaskGrid> masks(static_cast<std::size_t>(s.n), mask);
  return apply_mask(image, mask_tensor(masks));
}

}  // namespace dcf
