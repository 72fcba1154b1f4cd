#include "fontmanifold/png_io.hpp"

#include <png.h>

#include <cstring>

#include "fontmanifold/error.hpp"

namespace fm::png {

namespace {

Bytes encode(int width, int height, png_uint_32 format, const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
    throw Error(Errc::Format, std::string("png encode failed: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
    throw Error(Errc::Format, std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

Bytes encode_gray(const RawBitmap& bitmap) {
  if (bitmap.empty()) throw Error(Errc::Dimension, "cannot encode an empty bitmap");
  return encode(bitmap.width, bitmap.height, PNG_FORMAT_GRAY, bitmap.pixels.data());
}

Bytes encode_rgb(int width, int height, std::span<const std::uint8_t> rgb) {
  if (width < 1 || height < 1 || rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(Errc::Dimension, "rgb buffer does not match image extents");
  }
  return encode(width, height, PNG_FORMAT_RGB, rgb.data());
}

RawBitmap decode_gray(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(Errc::Format, std::string("png decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  RawBitmap out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(Errc::Format, std::string("png decode failed: ") + image.message);
  }
  return out;
}

}  // namespace fm::png
