// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "mvpatch/error.hpp"
#include "mvpatch/imaging.hpp"

namespace mvpatch {

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v * 255.0), 0.0, 255.0));
}

/// Reads an 8-bit PNG as RGB in [0, 1] (v / 255).  Any alpha channel is
/// dropped without compositing.
inline ImageBuffer read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingFile, path.string());
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    fail(ErrorKind::IoError, path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    fail(ErrorKind::IoError, path.string() + ": " + msg);
  }
  ImageBuffer out(static_cast<int>(image.width), static_cast<int>(image.height));
  auto v = out.values();
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) v[3 * i + c] = buf[4 * i + c] / 255.0;
  }
  return out;
}

/// Writes an 8-bit RGB PNG; channels are round(v * 255) clamped to [0, 255].
inline void write_png(const std::filesystem::path& path, const ImageBuffer& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<std::uint8_t> buf(img.pixel_count() * 3);
  const auto v = img.values();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(v[i]);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr)) {
    fail(ErrorKind::IoError, path.string() + ": " + image.message);
  }
}

inline void write_mask_png(const std::filesystem::path& path, const AlphaMask& mask) {
  ImageBuffer img(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const double a = mask.at(x, y);
      img.set_pixel(x, y, {a, a, a});
    }
  }
  write_png(path, img);
}

/// Rounds every channel to the nearest 8-bit level, i.e. what a PNG round
/// trip produces.
inline ImageBuffer quantize8(ImageBuffer img) {
  for (double& v : img.values()) v = to_byte(v) / 255.0;
  return img;
}

}  // namespace mvpatch
