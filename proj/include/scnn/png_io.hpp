#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <png.h>

#include "scnn/image.hpp"

namespace scnn {

/// Reads any PNG libpng understands, converted to 8-bit RGB, scaled to [0,1].
inline RawImage read_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    detail::fail(ErrorCategory::io, "imaging", "cannot read PNG '", path, "': ", img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    detail::fail(ErrorCategory::format, "imaging", "cannot decode PNG '", path, "': ", img.message);
  }
  RawImage out(img.height, img.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = static_cast<float>(buf[i]) / 255.0f;
  return out;
}

/// Writes 8-bit RGB; values are rounded to the nearest 1/255 step.
inline void write_png(const std::string& path, const RawImage& image) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(image.pixels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const float v = image.pixels[i] < 0.0f ? 0.0f : (image.pixels[i] > 1.0f ? 1.0f : image.pixels[i]);
    buf[i] = static_cast<png_byte>(std::lround(v * 255.0f));
  }
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    detail::fail(ErrorCategory::io, "imaging", "cannot write PNG '", path, "': ", img.message);
  }
}

}  // namespace scnn
