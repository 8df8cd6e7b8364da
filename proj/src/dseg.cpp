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

#include "gmdf/dseg.hpp"

#include <cmath>
#include <stdexcept>

#include "gmdf/core.hpp"

namespace gmdf::dseg {

std::string to_string(DILStrategy s) {
  switch (s) {
    case DILStrategy::kAffine: return "affine";
    case DILStrategy::kAffineBias: return "affine_bias";
    case DILStrategy::kCrossAttention: return "cross_attention";
  }
  return "?";
}

DILStrategy parse_strategy(const std::string& s) {
  for (auto k : {DILStrategy::kAffine, DILStrategy::kAffineBias, DILStrategy::kCrossAttention}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown DIL strategy: " + s);
}

void DsegConfig::validate() const {
  if (n_experts < 1) throw ConfigError("dseg: n_experts must be >= 1");
  if (prompt_dim < 1) throw ConfigError("dseg: prompt_dim must be >= 1");
  if (expert_hidden < 1) throw ConfigError("dseg: expert_hidden must be >= 1");
  if (cross_segments < 1) throw ConfigError("dseg: cross_segments must be >= 1");
}

std::string prompt_name(int expert) { return kPrefix + "prompt/" + std::to_string(expert); }

std::string expert_prefix(int expert, int layer) {
  return kPrefix + "expert" + std::to_string(expert) + "/layer" + std::to_string(layer) + "/";
}

Matrix prompt_init(const std::string& domain_name, int prompt_dim) {
  Matrix p(1, prompt_dim);
  const std::uint64_t h = fnv1a64(domain_name);
  for (int k = 0; k < prompt_dim; ++k) {
    const std::uint64_t bits = mix64(h + static_cast<std::uint64_t>(k));
    p(0, k) = static_cast<double>(bits >> 11) * 0x1.0p-53 - 0.5;
  }
  return p;
}

namespace {

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

}  // namespace

void init_params(ParamStore& store, const DsegConfig& cfg, const backbone::BackboneConfig& bcfg,
                 const std::vector<std::string>& domain_names, Rng& rng) {
  cfg.validate();
  if (static_cast<int>(domain_names.size()) != cfg.n_experts) {
    throw ConfigError("dseg: need one domain name per expert");
  }
  const int d = bcfg.embed_dim;
  const int m = cfg.prompt_dim;
  const double hw = 0.3 / std::sqrt(static_cast<double>(m));
  for (int n = 0; n < cfg.n_experts; ++n) {
    store.set(prompt_name(n), prompt_init(domain_names[static_cast<std::size_t>(n)], m));
    for (int l = 0; l < bcfg.n_layers; ++l) {
      if (!cfg.layer_has_experts(l, bcfg.n_layers)) continue;
      const std::string ep = expert_prefix(n, l);
      store.set(ep + "alpha", Matrix::Zero(1, 1));
      switch (cfg.strategy) {
        case DILStrategy::kAffine:
          store.set(ep + "h_w", normal_matrix(rng, m, d, hw));
          store.set(ep + "h_b", Matrix::Ones(1, d));
          break;
        case DILStrategy::kAffineBias:
          store.set(ep + "gamma_w", normal_matrix(rng, m, d, hw));
          store.set(ep + "gamma_b", Matrix::Ones(1, d));
          store.set(ep + "beta_w", normal_matrix(rng, m, d, hw));
          store.set(ep + "beta_b", Matrix::Zero(1, d));
          break;
        case DILStrategy::kCrossAttention:
          store.set(ep + "seg_w", normal_matrix(rng, m, cfg.cross_segments * d, 1.0 / std::sqrt(static_cast<double>(m))));
          store.set(ep + "seg_b", Matrix::Zero(1, cfg.cross_segments * d));
          store.set(ep + "wq", normal_matrix(rng, d, d, 1.0 / std::sqrt(d)));
          store.set(ep + "wk", normal_matrix(rng, d, d, 1.0 / std::sqrt(d)));
          store.set(ep + "wv", normal_matrix(rng, d, d, 1.0 / std::sqrt(d)));
          store.set(ep + "wo", Matrix::Zero(d, d));
          store.set(ep + "bo", Matrix::Zero(1, d));
          break;
      }
      store.set(ep + "mlp_w1", normal_matrix(rng, d, cfg.expert_hidden, 1.0 / std::sqrt(d)));
      store.set(ep + "mlp_b1", Matrix::Zero(1, cfg.expert_hidden));
      store.set(ep + "mlp_w2", normal_matrix(rng, cfg.expert_hidden, d, 1.0 / std::sqrt(cfg.expert_hidden)));
      store.set(ep + "mlp_b2", Matrix::Zero(1, d));
    }
  }
}

ad::Var residual_scale(ad::Var sublayer_out, ad::Var alpha) { return ad::scale_by(sublayer_out, alpha); }

ad::Var affine_gain(ad::Var prompts, ad::Var w, ad::Var b) { return ad::add_row(ad::matmul(prompts, w), b); }

ad::Var dil_affine(ad::Var tokens, ad::Var gain, int tokens_per_item) {
  if (gain.cols() != tokens.cols()) throw std::invalid_argument("dil_affine: gain dim != embed_dim");
  return ad::mul_blocks(tokens, gain, tokens_per_item);
}

ad::Var dil_affine_bias(ad::Var x, ad::Var gamma, ad::Var gamma_d, ad::Var beta_d, int tokens_per_item, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("dil_affine_bias: eps must be positive");
  ad::Var xhat = ad::normalize_rows(x, eps);
  ad::Var scaled = ad::mul_blocks(ad::mul_row(xhat, gamma), gamma_d, tokens_per_item);
  return ad::add_blocks(scaled, beta_d, tokens_per_item);
}

ad::Var dil_cross_attention(ad::Var tokens, ad::Var segments, ad::Var wq, ad::Var wk, ad::Var wv, ad::Var wo,
                            ad::Var bo, int batch, int heads, Matrix* weights) {
  if (segments.cols() != tokens.cols()) throw std::invalid_argument("dil_cross_attention: segment dim != embed_dim");
  ad::Var q = ad::matmul(tokens, wq);
  ad::Var k = ad::matmul(segments, wk);
  ad::Var v = ad::matmul(segments, wv);
  ad::Var att = ad::attention(q, k, v, batch, heads, weights);
  return ad::add(tokens, ad::add_row(ad::matmul(att, wo), bo));
}

ad::Var expert_forward(Binding& p, const DsegConfig& cfg, const backbone::BackboneConfig& bcfg, int expert,
                       int layer, const ExpertInputs& in, ad::Var prompts) {
  const std::string ep = expert_prefix(expert, layer);
  const int t = in.tokens_per_item;
  ad::Var dil;
  switch (cfg.strategy) {
    case DILStrategy::kAffine:
      dil = dil_affine(in.normed, affine_gain(prompts, p(ep + "h_w"), p(ep + "h_b")), t);
      break;
    case DILStrategy::kAffineBias: {
      ad::Var gamma_d = affine_gain(prompts, p(ep + "gamma_w"), p(ep + "gamma_b"));
      ad::Var beta_d = affine_gain(prompts, p(ep + "beta_w"), p(ep + "beta_b"));
      ad::Var scaled = ad::mul_blocks(ad::mul_row(in.xhat, in.ln_gamma), gamma_d, t);
      dil = ad::add_blocks(scaled, beta_d, t);
      break;
    }
    case DILStrategy::kCrossAttention: {
      ad::Var seg = affine_gain(prompts, p(ep + "seg_w"), p(ep + "seg_b"));
      seg = ad::reshape(seg, static_cast<Eigen::Index>(in.batch) * cfg.cross_segments, bcfg.embed_dim);
      dil = dil_cross_attention(in.normed, seg, p(ep + "wq"), p(ep + "wk"), p(ep + "wv"), p(ep + "wo"), p(ep + "bo"),
                                in.batch, bcfg.n_heads);
      break;
    }
  }
  ad::Var h = ad::gelu(ad::add_row(ad::matmul(dil, p(ep + "mlp_w1")), p(ep + "mlp_b1")));
  ad::Var out = ad::add_row(ad::matmul(h, p(ep + "mlp_w2")), p(ep + "mlp_b2"));
  return ad::mean_blocks(residual_scale(out, p(ep + "alpha")), t);
}

ad::Var aggregate_experts(std::span<const ad::Var> views, bool mean) {
  if (views.empty()) throw std::invalid_argument("aggregate_experts: no expert views");
  const Eigen::Index n = static_cast<Eigen::Index>(views.size());
  const Eigen::Index batch = views[0].rows();
  // Stack as (N*B x d) expert-major, then permute to item-major (B*N x d).
  ad::Var stacked = ad::concat_rows(views);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n * batch));
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index e = 0; e < n; ++e) order[static_cast<std::size_t>(b * n + e)] = e * batch + b;
  ad::Var deltas = ad::take_rows(stacked, order);
  ad::Var attended = ad::attention(deltas, deltas, deltas, batch, 1);
  ad::Var pooled = ad::mean_blocks(attended, n);
  return mean ? pooled : ad::scale(pooled, static_cast<double>(n));
}

RowVector aggregate_experts(const Matrix& deltas, bool mean) {
  if (deltas.rows() == 0) throw std::invalid_argument("aggregate_experts: no expert views");
  Matrix s = deltas * deltas.transpose() / std::sqrt(static_cast<double>(deltas.cols()));
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
  const Matrix out = s * deltas;
  RowVector total = out.colwise().sum();
  return mean ? RowVector(total / static_cast<double>(deltas.rows())) : total;
}

}  // namespace gmdf::dseg
