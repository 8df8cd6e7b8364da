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

#include "gmdf/syndata.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "gmdf/rng.hpp"

namespace gmdf::syndata {

namespace {

constexpr double kPi = std::numbers::pi;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

bool in_ellipse(double x, double y, double cx, double cy, double rx, double ry, double k = 1.0) {
  const double dx = (x - cx) / (rx * k);
  const double dy = (y - cy) / (ry * k);
  return dx * dx + dy * dy <= 1.0;
}

double ellipse_radius(double x, double y, double cx, double cy, double rx, double ry) {
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return std::sqrt(dx * dx + dy * dy);
}

void paint(Image& img, int x, int y, const std::array<double, 3>& rgb) {
  for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[static_cast<std::size_t>(c)];
}

// Forward/inverse 2-D DFT of one channel via FFTW.
std::vector<std::complex<double>> dft2(const std::vector<std::complex<double>>& in, int h, int w, int sign) {
  std::vector<std::complex<double>> out(in.size());
  std::vector<std::complex<double>> scratch = in;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(h, w, reinterpret_cast<fftw_complex*>(scratch.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

double radial_frequency(int u, int v, int h, int w) {
  const int fu = u <= h / 2 ? u : u - h;
  const int fv = v <= w / 2 ? v : v - w;
  return std::sqrt(static_cast<double>(fu * fu + fv * fv));
}

}  // namespace

void DomainSpec::validate() const {
  if (domain_name.empty()) throw ConfigError("domain spec: empty domain_name");
  if (n_real < 1 || n_fake < 1) throw ConfigError("domain spec " + domain_name + ": n_real and n_fake must be >= 1");
  for (double t : tint_rgb) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("domain spec " + domain_name + ": tint outside [0,1]");
  }
  if (!(blur_sigma >= 0.0)) throw ConfigError("domain spec " + domain_name + ": blur_sigma must be >= 0");
  if (!(face_proxy_scale > 0.0 && face_proxy_scale <= 1.0)) {
    throw ConfigError("domain spec " + domain_name + ": face_proxy_scale outside (0,1]");
  }
  if (image_size < 8) throw ConfigError("domain spec " + domain_name + ": image_size must be >= 8");
}

RenderedFace render_real(const DomainSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const int s = spec.image_size;
  const double sz = static_cast<double>(s);
  Image img(s, s);
  const auto& tint = spec.tint_rgb;

  // Background.
  const double fx = rng.uniform(1.0, 3.0), fy = rng.uniform(1.0, 3.0), phase = rng.uniform(0.0, 2.0 * kPi);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      double k = 1.0;
      switch (spec.background_style) {
        case BackgroundStyle::kFlatTint: break;
        case BackgroundStyle::kGradient: k = 0.55 + 0.45 * (y + 0.5) / sz; break;
        case BackgroundStyle::kTextured:
          k = 0.75 + 0.25 * std::sin(2.0 * kPi * (fx * x + fy * y) / sz + phase);
          break;
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = tint[static_cast<std::size_t>(c)] * k;
    }
  }

  // Face proxy with +-10% jitter in position and scale.
  const double cx = sz * 0.5 * (1.0 + rng.uniform(-0.1, 0.1));
  const double cy = sz * 0.5 * (1.0 + rng.uniform(-0.1, 0.1));
  const double rx = spec.face_proxy_scale * sz * 0.32 * (1.0 + rng.uniform(-0.1, 0.1));
  const double ry = rx * 1.25;
  const std::array<double, 3> skin{0.86 + rng.uniform(-0.04, 0.04), 0.67 + rng.uniform(-0.04, 0.04),
                                   0.52 + rng.uniform(-0.04, 0.04)};
  const std::array<double, 3> eye{0.08, 0.07, 0.1};
  const std::array<double, 3> lips{0.55, 0.12, 0.15};
  const double ex = 0.4 * rx, ey = -0.25 * ry, er = std::max(0.9, 0.14 * rx);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      if (!in_ellipse(px, py, cx, cy, rx, ry)) continue;
      paint(img, x, y, skin);
      if (in_ellipse(px, py, cx - ex, cy + ey, er, er) || in_ellipse(px, py, cx + ex, cy + ey, er, er)) paint(img, x, y, eye);
      if (in_ellipse(px, py, cx, cy + 0.45 * ry, 0.42 * rx, std::max(0.7, 0.1 * ry))) paint(img, x, y, lips);
    }
  }

  // Domain photometrics: colour cast, sensor noise, optics blur.
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      for (int c = 0; c < 3; ++c) {
        double& v = img.at(y, x, c);
        v = 0.7 * v + 0.3 * tint[static_cast<std::size_t>(c)] + 0.01 * rng.normal();
      }
    }
  }
  clamp01(img);
  if (spec.blur_sigma > 0.0) img = gaussian_blur(img, spec.blur_sigma);

  RenderedFace out;
  out.box.x0 = std::clamp(static_cast<int>(std::floor(cx - rx)), 0, s);
  out.box.x1 = std::clamp(static_cast<int>(std::ceil(cx + rx)), 0, s);
  out.box.y0 = std::clamp(static_cast<int>(std::floor(cy - ry)), 0, s);
  out.box.y1 = std::clamp(static_cast<int>(std::ceil(cy + ry)), 0, s);
  out.image = std::move(img);
  return out;
}

Image apply_forgery(const Image& image, ForgeryMethod method, std::uint64_t seed, const FaceBox& box, FreqBand band) {
  Rng rng(mix64(seed));
  Image out = image;
  const int bw = box.x1 - box.x0, bh = box.y1 - box.y0;
  if (bw < 2 || bh < 2) throw std::invalid_argument("apply_forgery: face box too small");
  const double cx = 0.5 * (box.x0 + box.x1), cy = 0.5 * (box.y0 + box.y1);
  const double rx = 0.5 * bw, ry = 0.5 * bh;

  switch (method) {
    case ForgeryMethod::kPatchSwap: {
      // Copy a patch from one spot of the face to another with a gain change.
      const int pw = std::max(2, static_cast<int>(0.4 * bw)), ph = std::max(2, static_cast<int>(0.4 * bh));
      const int sx = box.x0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(bw - pw + 1)));
      const int sy = box.y0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(bh - ph + 1)));
      const int dx = box.x0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(bw - pw + 1)));
      const int dy = box.y0 + static_cast<int>(rng.below(static_cast<std::uint64_t>(bh - ph + 1)));
      const double gain = rng.uniform(1.12, 1.25);
      for (int y = 0; y < ph; ++y) {
        for (int x = 0; x < pw; ++x) {
          for (int c = 0; c < 3; ++c) {
            const double v = image.at(sy + y, sx + x, c);
            out.at(dy + y, dx + x, c) = v * gain + (v * gain >= 1.0 ? 0.0 : 0.02);
          }
        }
      }
      break;
    }
    case ForgeryMethod::kBlendBoundary: {
      // Colour-shifted inner face blended back with a soft seam.
      std::array<double, 3> shift{};
      for (double& v : shift) v = rng.uniform(-0.18, 0.18);
      shift[0] = std::abs(shift[0]) + 0.06;
      for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) {
          const double r = ellipse_radius(x + 0.5, y + 0.5, cx, cy, rx, ry);
          if (r >= 1.0) continue;
          const double a = r < 0.7 ? 1.0 : (1.0 - r) / 0.3;
          const double seam = (r > 0.72 && r < 0.9) ? 0.12 : 0.0;
          for (int c = 0; c < 3; ++c) {
            const double v = image.at(y, x, c);
            const double forged = v + shift[static_cast<std::size_t>(c)] - seam;
            out.at(y, x, c) = (1.0 - a) * v + a * forged;
          }
        }
      }
      break;
    }
    case ForgeryMethod::kFreqPerturb: {
      // Amplify the spectrum inside an annular band, per channel.
      const double g = rng.uniform(1.2, 1.8);
      const int h = image.height, w = image.width;
      for (int c = 0; c < 3; ++c) {
        std::vector<std::complex<double>> ch(static_cast<std::size_t>(h) * w);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) ch[static_cast<std::size_t>(y) * w + x] = image.at(y, x, c);
        auto spec = dft2(ch, h, w, FFTW_FORWARD);
        for (int u = 0; u < h; ++u) {
          for (int v = 0; v < w; ++v) {
            const double r = radial_frequency(u, v, h, w);
            if (r >= band.lo && r <= band.hi) spec[static_cast<std::size_t>(u) * w + v] *= (1.0 + g);
          }
        }
        auto back = dft2(spec, h, w, FFTW_BACKWARD);
        const double norm = 1.0 / (static_cast<double>(h) * w);
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) out.at(y, x, c) = back[static_cast<std::size_t>(y) * w + x].real() * norm;
      }
      break;
    }
    case ForgeryMethod::kNoiseTexture: {
      // Band-limited (difference-of-Gaussians) noise inside the head ellipse.
      Image noise(image.height, image.width);
      for (double& v : noise.pixels) v = rng.normal();
      const Image fine = gaussian_blur(noise, 0.7);
      const Image coarse = gaussian_blur(noise, 2.0);
      const double amp = rng.uniform(0.3, 0.45);
      for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) {
          if (!in_ellipse(x + 0.5, y + 0.5, cx, cy, rx, ry)) continue;
          const double n = amp * (fine.at(y, x, 0) - coarse.at(y, x, 0));
          for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, x, c) + n;
        }
      }
      break;
    }
    default: throw std::invalid_argument("apply_forgery: unknown method");
  }
  clamp01(out);
  return out;
}

DatasetManifest gen_domain(const DomainSpec& spec, int domain_id, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw DataError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  DatasetManifest m;
  m.domain_name = spec.domain_name;
  m.domain_id = domain_id;
  m.root = out_dir;
  char name[64];
  for (int i = 0; i < spec.n_real; ++i) {
    const auto face = render_real(spec, image_seed(spec.seed, static_cast<std::uint64_t>(i)));
    std::snprintf(name, sizeof name, "images/real_%05d.png", i);
    write_png(out_dir / name, to_bytes(face.image), spec.image_size, spec.image_size);
    m.entries.push_back({name, kLabelReal});
  }
  for (int j = 0; j < spec.n_fake; ++j) {
    const std::uint64_t s = image_seed(spec.seed, static_cast<std::uint64_t>(spec.n_real + j));
    const auto face = render_real(spec, s);
    const Image forged = apply_forgery(face.image, spec.forgery_method, s, face.box);
    std::snprintf(name, sizeof name, "images/fake_%05d.png", j);
    write_png(out_dir / name, to_bytes(forged), spec.image_size, spec.image_size);
    m.entries.push_back({name, kLabelFake});
  }
  m.prior_real = m.compute_prior_real();
  write_manifest(out_dir / "manifest.csv", m);
  return m;
}

double blur_sigma_for(int severity) {
  static constexpr std::array<double, 5> kSigma{0.5, 0.9, 1.3, 1.8, 2.4};
  return kSigma[static_cast<std::size_t>(severity - 1)];
}

int jpeg_quality_for(int severity) {
  static constexpr std::array<int, 5> kQuality{80, 60, 40, 20, 8};
  return kQuality[static_cast<std::size_t>(severity - 1)];
}

int pixel_block_for(int severity) {
  static constexpr std::array<int, 5> kBlock{2, 3, 4, 6, 8};
  return kBlock[static_cast<std::size_t>(severity - 1)];
}

Image gaussian_blur(const Image& image, double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_blur: negative sigma");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  if (radius == 0) return image;
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= total;
  const int h = image.height, w = image.width;
  Image tmp(h, w), out(h, w);
  // Separable pass with edge clamping.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[static_cast<std::size_t>(i + radius)] * image.at(y, std::clamp(x + i, 0, w - 1), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += k[static_cast<std::size_t>(i + radius)] * tmp.at(std::clamp(y + i, 0, h - 1), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

Image pixelate(const Image& image, int block) {
  if (block < 1) throw std::invalid_argument("pixelate: block must be >= 1");
  Image out(image.height, image.width);
  for (int by = 0; by < image.height; by += block) {
    for (int bx = 0; bx < image.width; bx += block) {
      const int ey = std::min(by + block, image.height), ex = std::min(bx + block, image.width);
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) acc += image.at(y, x, c);
        acc /= static_cast<double>((ey - by) * (ex - bx));
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

Image block_dct_compress(const Image& image, int quality) {
  static constexpr std::array<int, 64> kLuma{16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                             14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                             18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                             49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  quality = std::clamp(quality, 1, 100);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> q{};
  for (int i = 0; i < 64; ++i) q[static_cast<std::size_t>(i)] = std::max(1, (kLuma[static_cast<std::size_t>(i)] * scale + 50) / 100);

  std::array<std::array<double, 8>, 8> basis{};
  for (int k = 0; k < 8; ++k) {
    const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int n = 0; n < 8; ++n) basis[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)] = a * std::cos(kPi * (2 * n + 1) * k / 16.0);
  }
  const int h = image.height, w = image.width;
  Image out(h, w);
  for (int by = 0; by < h; by += 8) {
    for (int bx = 0; bx < w; bx += 8) {
      for (int c = 0; c < 3; ++c) {
        double blk[8][8], coef[8][8], tmp[8][8];
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x) blk[y][x] = image.at(std::min(by + y, h - 1), std::min(bx + x, w - 1), c) * 255.0 - 128.0;
        for (int u = 0; u < 8; ++u)
          for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y) acc += basis[static_cast<std::size_t>(u)][static_cast<std::size_t>(y)] * blk[y][x];
            tmp[u][x] = acc;
          }
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int x = 0; x < 8; ++x) acc += basis[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)] * tmp[u][x];
            const double qs = q[static_cast<std::size_t>(u * 8 + v)];
            coef[u][v] = std::round(acc / qs) * qs;
          }
        for (int y = 0; y < 8; ++y)
          for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u) acc += basis[static_cast<std::size_t>(u)][static_cast<std::size_t>(y)] * coef[u][v];
            tmp[y][v] = acc;
          }
        for (int y = 0; y < 8 && by + y < h; ++y)
          for (int x = 0; x < 8 && bx + x < w; ++x) {
            double acc = 0.0;
            for (int v = 0; v < 8; ++v) acc += basis[static_cast<std::size_t>(v)][static_cast<std::size_t>(x)] * tmp[y][v];
            out.at(by + y, bx + x, c) = (acc + 128.0) / 255.0;
          }
      }
    }
  }
  clamp01(out);
  return out;
}

Image degrade(const Image& image, DegradationKind kind) {
  if (kind.severity < 1 || kind.severity > 5) throw std::invalid_argument("degrade: severity must be in 1..5");
  const int sev = kind.severity;
  Image out = image;
  switch (kind.kind) {
    case DegradationKindId::kCompress: out = block_dct_compress(image, jpeg_quality_for(sev)); break;
    case DegradationKindId::kBlur: out = gaussian_blur(image, blur_sigma_for(sev)); break;
    case DegradationKindId::kContrast: {
      // Contrast reduction around the per-channel mean.
      const double k = 1.0 - 0.15 * sev;
      for (int c = 0; c < 3; ++c) {
        double mu = 0.0;
        for (int y = 0; y < image.height; ++y)
          for (int x = 0; x < image.width; ++x) mu += image.at(y, x, c);
        mu /= static_cast<double>(image.height * image.width);
        for (int y = 0; y < image.height; ++y)
          for (int x = 0; x < image.width; ++x) out.at(y, x, c) = mu + k * (image.at(y, x, c) - mu);
      }
      break;
    }
    case DegradationKindId::kSaturate: {
      // Pull colours toward luma.
      const double k = 1.0 - 0.2 * sev;
      for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
          const double g = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
          for (int c = 0; c < 3; ++c) out.at(y, x, c) = g + k * (image.at(y, x, c) - g);
        }
      break;
    }
    case DegradationKindId::kPixelate: out = pixelate(image, pixel_block_for(sev)); break;
    default: throw std::invalid_argument("degrade: unknown kind");
  }
  clamp01(out);
  return out;
}

std::string to_string(ForgeryMethod m) {
  switch (m) {
    case ForgeryMethod::kPatchSwap: return "patch_swap";
    case ForgeryMethod::kBlendBoundary: return "blend_boundary";
    case ForgeryMethod::kFreqPerturb: return "freq_perturb";
    case ForgeryMethod::kNoiseTexture: return "noise_texture";
  }
  return "?";
}

std::string to_string(BackgroundStyle s) {
  switch (s) {
    case BackgroundStyle::kFlatTint: return "flat_tint";
    case BackgroundStyle::kGradient: return "gradient";
    case BackgroundStyle::kTextured: return "textured";
  }
  return "?";
}

std::string to_string(DegradationKindId k) {
  switch (k) {
    case DegradationKindId::kCompress: return "compress";
    case DegradationKindId::kBlur: return "blur";
    case DegradationKindId::kContrast: return "contrast";
    case DegradationKindId::kSaturate: return "saturate";
    case DegradationKindId::kPixelate: return "pixelate";
  }
  return "?";
}

ForgeryMethod parse_forgery(const std::string& s) {
  for (auto m : {ForgeryMethod::kPatchSwap, ForgeryMethod::kBlendBoundary, ForgeryMethod::kFreqPerturb,
                 ForgeryMethod::kNoiseTexture}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown forgery method: " + s);
}

BackgroundStyle parse_background(const std::string& s) {
  for (auto b : {BackgroundStyle::kFlatTint, BackgroundStyle::kGradient, BackgroundStyle::kTextured}) {
    if (to_string(b) == s) return b;
  }
  throw ConfigError("unknown background style: " + s);
}

DegradationKindId parse_degradation(const std::string& s) {
  for (auto k : kAllDegradations) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown degradation kind: " + s);
}

}  // namespace gmdf::syndata
