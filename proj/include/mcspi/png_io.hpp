#pragma once

// Grayscale PNG loading; requires libpng (link PNG::PNG).

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace mcspi {

/// Any PNG, converted to 8-bit gray and mapped linearly to [0, 1].
inline ImageD read_png_gray(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ConfigError("PNG '" + path + "': " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ConfigError("PNG '" + path + "': " + image.message);
  }
  ImageD out(image.width, image.height);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(buffer[i]) / 255.0;
  return out;
}

}  // namespace mcspi
