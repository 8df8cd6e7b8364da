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

// Procedural multi-domain real/fake face-proxy images and the distortion
// suite used by the robustness evaluation.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gmdf/core.hpp"
#include "gmdf/image.hpp"

namespace gmdf::syndata {

enum class BackgroundStyle { kFlatTint, kGradient, kTextured };
enum class ForgeryMethod { kPatchSwap, kBlendBoundary, kFreqPerturb, kNoiseTexture };

struct DomainSpec {
  std::string domain_name;
  BackgroundStyle background_style = BackgroundStyle::kFlatTint;
  std::array<double, 3> tint_rgb{0.5, 0.5, 0.5};
  double blur_sigma = 0.0;
  double face_proxy_scale = 0.7;
  ForgeryMethod forgery_method = ForgeryMethod::kPatchSwap;
  int n_real = 1;
  int n_fake = 1;
  std::uint64_t seed = 0;
  int image_size = 32;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;
};

/// Pixel rectangle [x0, x1) x [y0, y1) enclosing the face proxy.
struct FaceBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct RenderedFace {
  Image image;
  FaceBox box;
};

/// Draws one "real" image: background, ellipse head, two eyes, mouth, then
/// the domain's tint and blur. Geometry jitters +-10% in position and scale.
RenderedFace render_real(const DomainSpec& spec, std::uint64_t seed);

/// Frequency band (radial, in cycles per image) touched by kFreqPerturb.
struct FreqBand {
  double lo = 6.0;
  double hi = 12.0;
};

Image apply_forgery(const Image& image, ForgeryMethod method, std::uint64_t seed, const FaceBox& box,
                    FreqBand band = {});

/// Per-image seed derived from the domain seed.
constexpr std::uint64_t image_seed(std::uint64_t domain_seed, std::uint64_t index) { return domain_seed ^ index; }

/// Writes `<out_dir>/images/*.png` and `<out_dir>/manifest.csv`.
DatasetManifest gen_domain(const DomainSpec& spec, int domain_id, const std::filesystem::path& out_dir);

enum class DegradationKindId { kCompress, kBlur, kContrast, kSaturate, kPixelate };

struct DegradationKind {
  DegradationKindId kind = DegradationKindId::kCompress;
  int severity = 1;  // 1..5
};

inline constexpr std::array<DegradationKindId, 5> kAllDegradations = {
    DegradationKindId::kCompress, DegradationKindId::kBlur, DegradationKindId::kContrast,
    DegradationKindId::kSaturate, DegradationKindId::kPixelate};

Image degrade(const Image& image, DegradationKind kind);

/// Severity tables.
double blur_sigma_for(int severity);
int jpeg_quality_for(int severity);
int pixel_block_for(int severity);

Image gaussian_blur(const Image& image, double sigma);
Image pixelate(const Image& image, int block);
/// 8x8 block-DCT quantization with the standard luminance table at `quality`.
Image block_dct_compress(const Image& image, int quality);

std::string to_string(ForgeryMethod m);
std::string to_string(BackgroundStyle s);
std::string to_string(DegradationKindId k);
ForgeryMethod parse_forgery(const std::string& s);
BackgroundStyle parse_background(const std::string& s);
DegradationKindId parse_degradation(const std::string& s);

}  // namespace gmdf::syndata
