#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fm {

/// Grayscale raster with 0 = full ink and 255 = white background.
struct RawBitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  RawBitmap() = default;
  RawBitmap(int w, int h, std::uint8_t fill = 255);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const noexcept { return width <= 0 || height <= 0; }

  friend bool operator==(const RawBitmap&, const RawBitmap&) = default;
};

/// 28x28 training-space image with values in [0, 1], 1 = full ink.
class GlyphBitmap {
 public:
  static constexpr int kSide = 28;
  static constexpr std::size_t kPixels = kSide * kSide;

  GlyphBitmap() { pixels_.fill(0.0); }
  /// Throws Error{Errc::Dimension} unless exactly 784 values in [0, 1].
  explicit GlyphBitmap(std::span<const double> values);

  double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * kSide + x]; }
  double operator[](std::size_t i) const { return pixels_[i]; }
  std::span<const double> values() const noexcept { return pixels_; }

  friend bool operator==(const GlyphBitmap&, const GlyphBitmap&) = default;

 private:
  std::array<double, kPixels> pixels_;
};

}  // namespace fm
