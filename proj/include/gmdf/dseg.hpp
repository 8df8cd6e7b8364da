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

// Dataset-embedding generator: per-domain experts gated by zero-initialized
// residual weights, prompt-driven Dataset Information Layers, and the
// attention aggregation of expert views.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "gmdf/autodiff.hpp"
#include "gmdf/backbone.hpp"
#include "gmdf/params.hpp"
#include "gmdf/rng.hpp"

namespace gmdf::dseg {

enum class DILStrategy { kAffine, kAffineBias, kCrossAttention };

std::string to_string(DILStrategy s);
DILStrategy parse_strategy(const std::string& s);

struct DsegConfig {
  DILStrategy strategy = DILStrategy::kAffine;
  int n_experts = 1;
  int prompt_dim = 16;
  int expert_hidden = 32;
  int cross_segments = 4;
  /// Mean of the attended expert views (true) or their plain sum.
  bool aggregate_mean = true;
  /// Experts in the last k layers only; <= 0 means every layer.
  int moe_last_k = 0;

  bool layer_has_experts(int layer, int n_layers) const {
    return moe_last_k <= 0 || layer >= n_layers - moe_last_k;
  }
  void validate() const;
};

inline const std::string kPrefix = "theta_E/";

std::string prompt_name(int expert);
std::string expert_prefix(int expert, int layer);

/// Deterministic prompt initialization from the domain name: small uniform
/// values in [-0.5, 0.5).
Matrix prompt_init(const std::string& domain_name, int prompt_dim);

void init_params(ParamStore& store, const DsegConfig& cfg, const backbone::BackboneConfig& bcfg,
                 const std::vector<std::string>& domain_names, Rng& rng);

/// alpha * sublayer_out; alpha is 1x1.
ad::Var residual_scale(ad::Var sublayer_out, ad::Var alpha);

/// Gain g = prompts * W + b, one row per batch item.
ad::Var affine_gain(ad::Var prompts, ad::Var w, ad::Var b);
/// g (B x d) broadcast over each item's tokens.
ad::Var dil_affine(ad::Var tokens, ad::Var gain, int tokens_per_item);
/// normalize(x) * (gamma * gamma_d) + beta_d; gamma is 1 x d, gamma_d and
/// beta_d are B x d.
ad::Var dil_affine_bias(ad::Var x, ad::Var gamma, ad::Var gamma_d, ad::Var beta_d, int tokens_per_item, double eps);
/// tokens + (CrossAttn(tokens, segments) * wo + bo). segments: (B*S x d).
ad::Var dil_cross_attention(ad::Var tokens, ad::Var segments, ad::Var wq, ad::Var wk, ad::Var wv, ad::Var wo,
                            ad::Var bo, int batch, int heads, Matrix* weights = nullptr);

/// Layer inputs shared by every expert of one layer.
struct ExpertInputs {
  ad::Var normed;     // LayerNorm_mlp(x)
  ad::Var xhat;       // (x - E[x]) / sqrt(Var[x] + eps), no affine
  ad::Var ln_gamma;   // shared LayerNorm_mlp gain
  int batch = 0;
  int tokens_per_item = 0;
};

/// DIL -> expert MLP -> residual_scale(alpha) -> token mean. Returns B x d.
ad::Var expert_forward(Binding& p, const DsegConfig& cfg, const backbone::BackboneConfig& bcfg, int expert,
                       int layer, const ExpertInputs& in, ad::Var prompts);

/// Attention over expert views per batch item with Q = K = V = the N x d
/// stack of views, scale 1/sqrt(d), then row mean (or sum). views: N vars
/// of B x d.
ad::Var aggregate_experts(std::span<const ad::Var> views, bool mean = true);

/// Value-level aggregation for a single item: deltas is N x d.
RowVector aggregate_experts(const Matrix& deltas, bool mean = true);

}  // namespace gmdf::dseg
