#include "fontmanifold/image.hpp"

#include <algorithm>
#include <string>

#include "fontmanifold/error.hpp"

namespace fm {

RawBitmap::RawBitmap(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w < 1 || h < 1) {
    throw Error(Errc::Dimension,
                "bitmap extents must be positive: " + std::to_string(w) + "x" + std::to_string(h));
  }
  pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

GlyphBitmap::GlyphBitmap(std::span<const double> values) {
  if (values.size() != kPixels) {
    throw Error(Errc::Dimension,
                "glyph bitmap needs 784 values, got " + std::to_string(values.size()));
  }
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::Dimension, "glyph intensity outside [0, 1]");
  }
  std::copy(values.begin(), values.end(), pixels_.begin());
}

}  // namespace fm
