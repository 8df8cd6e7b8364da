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

#include "gmdf/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "gmdf/core.hpp"

namespace gmdf::backbone {

void BackboneConfig::validate() const {
  if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0) {
    throw ConfigError("backbone: image_size must be a positive multiple of patch_size");
  }
  if (embed_dim <= 0 || n_heads <= 0 || embed_dim % n_heads != 0) {
    throw ConfigError("backbone: embed_dim must be divisible by n_heads");
  }
  if (n_layers < 1) throw ConfigError("backbone: n_layers must be >= 1");
  if (!(mlp_ratio > 0.0) || mlp_hidden() < 1) throw ConfigError("backbone: mlp_ratio must be positive");
  if (!(ln_eps > 0.0)) throw ConfigError("backbone: ln_eps must be positive");
}

std::string layer_prefix(int layer) { return kPrefix + "layer" + std::to_string(layer) + "/"; }

Matrix patchify(const Matrix& images, int image_size, int patch_size) {
  const int g = image_size / patch_size;
  const int pd = patch_size * patch_size * 3;
  if (images.cols() != static_cast<Eigen::Index>(image_size) * image_size * 3) {
    throw std::invalid_argument("patchify: image size mismatch");
  }
  Matrix out(images.rows() * g * g, pd);
  for (Eigen::Index b = 0; b < images.rows(); ++b) {
    for (int gy = 0; gy < g; ++gy) {
      for (int gx = 0; gx < g; ++gx) {
        const Eigen::Index row = b * g * g + gy * g + gx;
        int k = 0;
        for (int y = 0; y < patch_size; ++y) {
          const Eigen::Index base = (static_cast<Eigen::Index>(gy * patch_size + y) * image_size + gx * patch_size) * 3;
          for (int x = 0; x < patch_size * 3; ++x) out(row, k++) = images(b, base + x);
        }
      }
    }
  }
  return out;
}

Matrix patch_variance(const Matrix& images, int image_size, int patch_size) {
  const Matrix patches = patchify(images, image_size, patch_size);
  const int np = (image_size / patch_size) * (image_size / patch_size);
  Matrix out(images.rows(), np);
  for (Eigen::Index r = 0; r < patches.rows(); ++r) {
    const double mu = patches.row(r).mean();
    out(r / np, r % np) = (patches.row(r).array() - mu).square().mean();
  }
  return out;
}

namespace {

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

}  // namespace

void init_params(ParamStore& store, const BackboneConfig& cfg, Rng& rng) {
  cfg.validate();
  const int d = cfg.embed_dim;
  store.set(kPrefix + "patch_embed/w", normal_matrix(rng, cfg.patch_dim(), d, 1.0 / std::sqrt(cfg.patch_dim())));
  store.set(kPrefix + "patch_embed/b", Matrix::Zero(1, d));
  store.set(kPrefix + "cls_token", normal_matrix(rng, 1, d, 0.02));
  store.set(kPrefix + "pos_embed", normal_matrix(rng, cfg.tokens(), d, 0.02));
  store.set(kPrefix + "mask_token", normal_matrix(rng, 1, d, 0.02));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = layer_prefix(l);
    store.set(lp + "ln_att/gamma", Matrix::Ones(1, d));
    store.set(lp + "ln_att/beta", Matrix::Zero(1, d));
    store.set(lp + "attn/wqkv", normal_matrix(rng, d, 3 * d, 1.0 / std::sqrt(d)));
    store.set(lp + "attn/bqkv", Matrix::Zero(1, 3 * d));
    store.set(lp + "attn/wo", normal_matrix(rng, d, d, 0.5 / std::sqrt(d)));
    store.set(lp + "attn/bo", Matrix::Zero(1, d));
    store.set(lp + "ln_mlp/gamma", Matrix::Ones(1, d));
    store.set(lp + "ln_mlp/beta", Matrix::Zero(1, d));
    store.set(lp + "mlp/w1", normal_matrix(rng, d, cfg.mlp_hidden(), 1.0 / std::sqrt(d)));
    store.set(lp + "mlp/b1", Matrix::Zero(1, cfg.mlp_hidden()));
    store.set(lp + "mlp/w2", normal_matrix(rng, cfg.mlp_hidden(), d, 0.5 / std::sqrt(cfg.mlp_hidden())));
    store.set(lp + "mlp/b2", Matrix::Zero(1, d));
  }
  store.set(kPrefix + "ln_final/gamma", Matrix::Ones(1, d));
  store.set(kPrefix + "ln_final/beta", Matrix::Zero(1, d));
}

TokenStream patch_embed(Binding& p, const BackboneConfig& cfg, const Matrix& images,
                        std::span<const Eigen::Index> masked_patch_rows) {
  if (images.cols() != static_cast<Eigen::Index>(cfg.image_size) * cfg.image_size * 3) {
    throw std::invalid_argument("patch_embed: image does not match configured image_size " +
                                std::to_string(cfg.image_size));
  }
  ad::Tape& t = p.tape();
  const int batch = static_cast<int>(images.rows());
  // Pixels in [0, 1] are centered and scaled to roughly unit variance.
  const Matrix centered = (patchify(images, cfg.image_size, cfg.patch_size).array() - kPixelMean) / kPixelStd;
  ad::Var patches = t.constant(centered);
  ad::Var emb = ad::add_row(ad::matmul(patches, p(kPrefix + "patch_embed/w")), p(kPrefix + "patch_embed/b"));
  if (!masked_patch_rows.empty()) emb = ad::replace_rows(emb, masked_patch_rows, p(kPrefix + "mask_token"));
  ad::Var tokens = ad::prepend_to_blocks(emb, p(kPrefix + "cls_token"), cfg.n_patches());
  tokens = ad::add_tiled(tokens, p(kPrefix + "pos_embed"));
  return {tokens, batch, cfg.tokens()};
}

ad::Var layer_norm(Binding& p, const std::string& prefix, ad::Var x, double eps) {
  return ad::add_row(ad::mul_row(ad::normalize_rows(x, eps), p(prefix + "gamma")), p(prefix + "beta"));
}

ad::Var mha(Binding& p, const BackboneConfig& cfg, int layer, ad::Var normed, int batch, Matrix* attn_weights) {
  if (normed.cols() != cfg.embed_dim) throw std::invalid_argument("mha: token dim != embed_dim");
  const std::string lp = layer_prefix(layer);
  const int d = cfg.embed_dim;
  ad::Var qkv = ad::add_row(ad::matmul(normed, p(lp + "attn/wqkv")), p(lp + "attn/bqkv"));
  ad::Var q = ad::cols(qkv, 0, d);
  ad::Var k = ad::cols(qkv, d, d);
  ad::Var v = ad::cols(qkv, 2 * d, d);
  ad::Var o = ad::attention(q, k, v, batch, cfg.n_heads, attn_weights);
  return ad::add_row(ad::matmul(o, p(lp + "attn/wo")), p(lp + "attn/bo"));
}

ad::Var feed_forward(Binding& p, const BackboneConfig& cfg, int layer, ad::Var normed) {
  (void)cfg;
  const std::string lp = layer_prefix(layer);
  ad::Var h = ad::gelu(ad::add_row(ad::matmul(normed, p(lp + "mlp/w1")), p(lp + "mlp/b1")));
  return ad::add_row(ad::matmul(h, p(lp + "mlp/w2")), p(lp + "mlp/b2"));
}

std::vector<Eigen::Index> class_rows(int batch, int tokens_per_item) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) rows[static_cast<std::size_t>(b)] = static_cast<Eigen::Index>(b) * tokens_per_item;
  return rows;
}

}  // namespace gmdf::backbone
