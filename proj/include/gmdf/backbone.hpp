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

// Tiny ViT encoder pieces: patchify, patch embedding, multi-head attention,
// and the shared transformer block halves.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "gmdf/autodiff.hpp"
#include "gmdf/params.hpp"
#include "gmdf/rng.hpp"

namespace gmdf::backbone {

struct BackboneConfig {
  int image_size = 32;
  int patch_size = 8;
  int embed_dim = 64;
  int n_layers = 4;
  int n_heads = 4;
  double mlp_ratio = 2.0;
  double ln_eps = 1e-5;

  int grid() const { return image_size / patch_size; }
  int n_patches() const { return grid() * grid(); }
  int tokens() const { return n_patches() + 1; }
  int patch_dim() const { return patch_size * patch_size * 3; }
  int mlp_hidden() const { return static_cast<int>(embed_dim * mlp_ratio); }
  int head_dim() const { return embed_dim / n_heads; }

  void validate() const;
};

/// Class token + N_p patch tokens for each batch item, stacked row-wise
/// as (batch * tokens_per_item) x embed_dim.
struct TokenStream {
  ad::Var tokens;
  int batch = 0;
  int tokens_per_item = 0;
};

inline const std::string kPrefix = "theta_O/backbone/";

/// Input standardization applied to patch pixels before the embedding.
inline constexpr double kPixelMean = 0.5;
inline constexpr double kPixelStd = 0.25;

std::string layer_prefix(int layer);

/// (B x H*W*3) interleaved images -> (B*N_p x patch_dim), patches in raster
/// order, each flattened as (row, col, channel).
Matrix patchify(const Matrix& images, int image_size, int patch_size);

/// Per-patch pixel variance, (B x N_p).
Matrix patch_variance(const Matrix& images, int image_size, int patch_size);

void init_params(ParamStore& store, const BackboneConfig& cfg, Rng& rng);

/// Linear patch projection, optional mask-token substitution for the listed
/// patch rows (indices into the B*N_p patch rows), class token, positional
/// embeddings.
TokenStream patch_embed(Binding& p, const BackboneConfig& cfg, const Matrix& images,
                        std::span<const Eigen::Index> masked_patch_rows = {});

/// Multi-head self-attention with input/output projections; no residual.
ad::Var mha(Binding& p, const BackboneConfig& cfg, int layer, ad::Var normed, int batch,
            Matrix* attn_weights = nullptr);

/// LayerNorm with the named gain/bias pair.
ad::Var layer_norm(Binding& p, const std::string& prefix, ad::Var x, double eps);

/// Shared feed-forward of `layer` (GELU MLP).
ad::Var feed_forward(Binding& p, const BackboneConfig& cfg, int layer, ad::Var normed);

/// Row indices of the class tokens in a stacked stream.
std::vector<Eigen::Index> class_rows(int batch, int tokens_per_item);

}  // namespace gmdf::backbone
