// Copyright 2026 The GM-DF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gmdf/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include <png.h>

namespace gmdf {

std::vector<std::uint8_t> to_bytes(const Image& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = std::clamp(img.pixels[i], 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
  }
  return out;
}

Image from_bytes(const std::vector<std::uint8_t>& bytes, int height, int width) {
  Image img(height, width);
  if (bytes.size() != img.pixels.size()) throw std::invalid_argument("from_bytes: size mismatch");
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i] / 255.0;
  return img;
}

void clamp01(Image& img) {
  for (double& v : img.pixels) v = std::clamp(v, 0.0, 1.0);
}

double l2_distance(const Image& a, const Image& b) {
  if (a.pixels.size() != b.pixels.size()) throw std::invalid_argument("l2_distance: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb, int height, int width) {
  if (rgb.size() != static_cast<std::size_t>(height) * width * 3) throw std::invalid_argument("write_png: size mismatch");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr) == 0) {
    throw std::runtime_error("write_png " + path.string() + ": " + image.message);
  }
}

std::vector<std::uint8_t> read_png(const std::filesystem::path& path, int& height, int& width) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw std::runtime_error("read_png " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr) == 0) {
    png_image_free(&image);
    throw std::runtime_error("read_png " + path.string() + ": " + image.message);
  }
  height = static_cast<int>(image.height);
  width = static_cast<int>(image.width);
  return buf;
}

}  // namespace gmdf
