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

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace gmdf {

/// H x W x 3 image, interleaved RGB, values nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, fill) {}

  double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

/// Quantizes to 8-bit with round-half-up after clamping to [0,1].
std::vector<std::uint8_t> to_bytes(const Image& img);
Image from_bytes(const std::vector<std::uint8_t>& bytes, int height, int width);

void clamp01(Image& img);
double l2_distance(const Image& a, const Image& b);

/// 8-bit RGB PNG via libpng.
void write_png(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb, int height, int width);
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, int& height, int& width);

}  // namespace gmdf
