#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fontmanifold/image.hpp"

namespace fm::png {

using Bytes = std::vector<std::uint8_t>;

/// 8-bit grayscale PNG encoding. Output bytes depend only on the pixels.
Bytes encode_gray(const RawBitmap& bitmap);

/// 8-bit RGB PNG encoding of `rgb` (3 bytes per pixel, row-major).
Bytes encode_rgb(int width, int height, std::span<const std::uint8_t> rgb);

/// Decodes any PNG to 8-bit grayscale. Throws Error{Errc::Format}.
RawBitmap decode_gray(std::span<const std::uint8_t> bytes);

}  // namespace fm::png
