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

#include <gtest/gtest.h>

#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gmdf/syndata.hpp"
#include "test_util.hpp"

namespace gmdf::syndata {
namespace {

DomainSpec small_spec(std::string name, std::uint64_t seed) {
  DomainSpec s;
  s.domain_name = std::move(name);
  s.background_style = BackgroundStyle::kGradient;
  s.tint_rgb = {0.6, 0.4, 0.5};
  s.n_real = 6;
  s.n_fake = 4;
  s.seed = seed;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool in_range(const Image& img) {
  for (double v : img.pixels)
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

// Plain O(N^4) DFT amplitude of one channel.
std::vector<double> amplitude(const Image& img, int c) {
  const int h = img.height, w = img.width;
  std::vector<double> out(static_cast<std::size_t>(h * w));
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const double ph = -2.0 * std::numbers::pi * (static_cast<double>(u * y) / h + static_cast<double>(v * x) / w);
          acc += img.at(y, x, c) * std::polar(1.0, ph);
        }
      out[static_cast<std::size_t>(u * w + v)] = std::abs(acc);
    }
  return out;
}

TEST(DomainSpec, Validate) {
  auto s = small_spec("a", 1);
  EXPECT_NO_THROW(s.validate());
  s.n_fake = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec("a", 1);
  s.tint_rgb[1] = 1.5;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec("", 1);
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec("a", 1);
  s.face_proxy_scale = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(GenDomain, CountsAndDeterminism) {
  const auto root = testing::scratch_dir("gen_domain");
  std::filesystem::remove_all(root);
  const auto spec = small_spec("a", 42);
  const auto m1 = gen_domain(spec, 0, root / "one");
  const auto m2 = gen_domain(spec, 0, root / "two");
  ASSERT_EQ(m1.entries.size(), 10u);
  EXPECT_EQ(m1.count_real(), 6u);
  EXPECT_DOUBLE_EQ(m1.prior_real, 0.6);
  EXPECT_EQ(slurp(root / "one" / "manifest.csv"), slurp(root / "two" / "manifest.csv"));
  for (const auto& e : m1.entries)
    EXPECT_EQ(slurp(root / "one" / e.relative_path), slurp(root / "two" / e.relative_path)) << e.relative_path;
  const auto loaded = load_manifest(root / "one" / "manifest.csv");
  EXPECT_EQ(loaded.entries, m1.entries);
}

TEST(GenDomain, TintShiftsChannelMeans) {
  const auto root = testing::scratch_dir("gen_tint");
  std::filesystem::remove_all(root);
  auto a = small_spec("a", 3);
  auto b = small_spec("b", 3);
  a.tint_rgb = {0.8, 0.5, 0.5};
  b.tint_rgb = {0.3, 0.5, 0.5};
  auto mean_red = [](const DatasetManifest& m) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& s : load_samples(m, 32))
      for (std::size_t i = 0; i < s.image.size(); i += 3, ++n) acc += s.image[i] / 255.0;
    return acc / static_cast<double>(n);
  };
  const double ra = mean_red(gen_domain(a, 0, root / "a"));
  const double rb = mean_red(gen_domain(b, 1, root / "b"));
  EXPECT_GE(std::abs(ra - rb), 0.1);
}

TEST(Forgery, EveryMethodChangesTheImageAndStaysInRange) {
  const auto spec = small_spec("a", 7);
  for (auto m : {ForgeryMethod::kPatchSwap, ForgeryMethod::kBlendBoundary, ForgeryMethod::kFreqPerturb,
                 ForgeryMethod::kNoiseTexture}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto real = render_real(spec, seed);
      ASSERT_TRUE(in_range(real.image));
      const auto fake = apply_forgery(real.image, m, seed, real.box);
      EXPECT_TRUE(fake.same_shape(real.image));
      EXPECT_GT(l2_distance(fake, real.image), 0.0) << to_string(m);
      EXPECT_TRUE(in_range(fake)) << to_string(m);
    }
  }
}

TEST(Forgery, LocalMethodsStayInsideFaceBox) {
  const auto spec = small_spec("a", 8);
  for (auto m : {ForgeryMethod::kPatchSwap, ForgeryMethod::kBlendBoundary, ForgeryMethod::kNoiseTexture}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto real = render_real(spec, seed);
      const auto fake = apply_forgery(real.image, m, seed, real.box);
      for (int y = 0; y < real.image.height; ++y)
        for (int x = 0; x < real.image.width; ++x)
          for (int c = 0; c < 3; ++c)
            if (fake.at(y, x, c) != real.image.at(y, x, c))
              EXPECT_TRUE(real.box.contains(x, y)) << to_string(m) << " changed (" << x << "," << y << ")";
    }
  }
}

TEST(Forgery, FreqPerturbConcentratesInBand) {
  const auto spec = small_spec("a", 9);
  const FreqBand band{};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto real = render_real(spec, seed);
    const auto fake = apply_forgery(real.image, ForgeryMethod::kFreqPerturb, seed, real.box, band);
    const int n = real.image.height;
    for (int c = 0; c < 3; ++c) {
      const auto a = amplitude(real.image, c);
      const auto b = amplitude(fake, c);
      double in = 0.0, out = 0.0;
      int n_in = 0, n_out = 0;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          const double fu = u <= n / 2 ? u : u - n;
          const double fv = v <= n / 2 ? v : v - n;
          const double r = std::hypot(fu, fv);
          const double d = std::abs(a[static_cast<std::size_t>(u * n + v)] - b[static_cast<std::size_t>(u * n + v)]);
          if (r >= band.lo && r <= band.hi) {
            in += d;
            ++n_in;
          } else if (r < band.lo - 1.0 || r > band.hi + 1.0) {
            out += d;
            ++n_out;
          }
        }
      EXPECT_GT(in / n_in, out / n_out) << "seed " << seed << " channel " << c;
    }
  }
}

TEST(Forgery, UnknownMethodThrows) {
  EXPECT_THROW(parse_forgery("deepfake"), ConfigError);
  EXPECT_THROW(parse_degradation("fog"), ConfigError);
  const auto real = render_real(small_spec("a", 1), 0);
  EXPECT_THROW(apply_forgery(real.image, static_cast<ForgeryMethod>(99), 0, real.box), std::invalid_argument);
}

TEST(Degrade, BlurIdentityLimit) {
  const auto real = render_real(small_spec("a", 2), 0);
  const auto out = gaussian_blur(real.image, 1e-9);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) EXPECT_NEAR(out.pixels[i], real.image.pixels[i], 1e-6);
}

TEST(Degrade, PixelateIsBlockConstant) {
  const auto img = render_real(small_spec("a", 3), 1).image;
  const int block = pixel_block_for(5);
  const auto out = degrade(img, {DegradationKindId::kPixelate, 5});
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        EXPECT_EQ(out.at(y, x, c), out.at(y - y % block, x - x % block, c));
}

TEST(Degrade, SeverityMonotoneOnAverage) {
  const auto spec = small_spec("a", 4);
  std::vector<Image> imgs;
  for (std::uint64_t s = 0; s < 100; ++s) imgs.push_back(render_real(spec, s).image);
  for (auto kind : kAllDegradations) {
    double l1 = 0.0, l5 = 0.0;
    for (const auto& img : imgs) {
      const auto d1 = degrade(img, {kind, 1});
      const auto d5 = degrade(img, {kind, 5});
      EXPECT_TRUE(in_range(d1) && in_range(d5)) << to_string(kind);
      l1 += l2_distance(d1, img);
      l5 += l2_distance(d5, img);
    }
    EXPECT_GE(l5, l1) << to_string(kind);
  }
}

TEST(Degrade, StatelessPerImage) {
  const auto img = render_real(small_spec("a", 5), 0).image;
  const auto other = render_real(small_spec("a", 5), 1).image;
  for (auto kind : kAllDegradations) {
    const auto first = degrade(img, {kind, 3});
    degrade(other, {kind, 3});
    EXPECT_EQ(degrade(img, {kind, 3}).pixels, first.pixels);
  }
}

TEST(Degrade, SeverityOutOfRange) {
  const auto img = render_real(small_spec("a", 5), 0).image;
  EXPECT_THROW(degrade(img, {DegradationKindId::kBlur, 0}), std::invalid_argument);
  EXPECT_THROW(degrade(img, {DegradationKindId::kBlur, 6}), std::invalid_argument);
}

}  // namespace
}  // namespace gmdf::syndata
