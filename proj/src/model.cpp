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

#include "gmdf/model.hpp"

#include <stdexcept>

#include "gmdf/core.hpp"
#include "gmdf/rng.hpp"

namespace gmdf {

int ModelConfig::expert_of(int domain_id) const {
  for (std::size_t i = 0; i < expert_domains.size(); ++i) {
    if (expert_domains[i] == domain_id) return static_cast<int>(i);
  }
  return -1;
}

void ModelConfig::validate() const {
  backbone.validate();
  if (codebook_size < 2) throw ConfigError("model: codebook_size must be >= 2");
  if (experts) {
    dseg.validate();
    if (static_cast<int>(expert_domains.size()) != dseg.n_experts ||
        static_cast<int>(expert_names.size()) != dseg.n_experts) {
      throw ConfigError("model: expert_domains/expert_names must list one entry per expert");
    }
  }
  align::find_template(prompt_template, templates);
}

ParamStore init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore store;
  Rng bb = Rng::substream(seed, "init/backbone");
  backbone::init_params(store, cfg.backbone, bb);
  Rng head = Rng::substream(seed, "init/mim_head");
  const int d = cfg.backbone.embed_dim;
  Matrix w(d, cfg.codebook_size);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = head.normal() / std::sqrt(static_cast<double>(d));
  store.set(kMimHead + "w", w);
  store.set(kMimHead + "b", Matrix::Zero(1, cfg.codebook_size));
  Rng text = Rng::substream(seed, "init/text");
  align::init_text_params(store, cfg.text, d, text);
  if (cfg.experts) {
    Rng ex = Rng::substream(seed, "init/experts");
    dseg::init_params(store, cfg.dseg, cfg.backbone, cfg.expert_names, ex);
  }
  return store;
}

DomainContext context_for(const ModelConfig& cfg, std::span<const int> domain_ids) {
  DomainContext ctx;
  ctx.prompt_index.reserve(domain_ids.size());
  for (int id : domain_ids) ctx.prompt_index.push_back(cfg.expert_of(id));
  return ctx;
}

namespace {

ad::Var batch_prompts(Binding& p, const ModelConfig& cfg, const DomainContext& ctx) {
  const int n = cfg.dseg.n_experts;
  std::vector<ad::Var> rows;
  for (int e = 0; e < n; ++e) rows.push_back(p(dseg::prompt_name(e)));
  ad::Var all = ad::concat_rows(rows);
  ad::Var ext = ad::concat_rows(std::vector<ad::Var>{all, ad::mean_blocks(all, n)});
  std::vector<Eigen::Index> idx;
  idx.reserve(ctx.prompt_index.size());
  for (int k : ctx.prompt_index) {
    if (k >= n) throw std::out_of_range("domain context: prompt index out of range");
    idx.push_back(k < 0 ? n : k);
  }
  return ad::take_rows(ext, idx);
}

}  // namespace

ForwardOut forward(Binding& p, const ModelConfig& cfg, const Matrix& images, const DomainContext* ctx,
                   std::span<const Eigen::Index> masked_patch_rows) {
  const auto& bc = cfg.backbone;
  backbone::TokenStream ts = backbone::patch_embed(p, bc, images, masked_patch_rows);
  const int batch = ts.batch;
  const int tpi = ts.tokens_per_item;
  const bool with_experts = ctx != nullptr && cfg.experts;
  if (ctx != nullptr && static_cast<int>(ctx->prompt_index.size()) != batch) {
    throw std::invalid_argument("domain context size != batch size");
  }
  if (ctx != nullptr && !cfg.experts) throw std::invalid_argument("domain context given to a model without experts");

  ad::Var prompts;
  std::vector<ad::Var> views;
  if (with_experts) {
    prompts = batch_prompts(p, cfg, *ctx);
    views.resize(static_cast<std::size_t>(cfg.dseg.n_experts));
  }

  ad::Var x = ts.tokens;
  for (int l = 0; l < bc.n_layers; ++l) {
    const std::string lp = backbone::layer_prefix(l);
    ad::Var a = backbone::mha(p, bc, l, backbone::layer_norm(p, lp + "ln_att/", x, bc.ln_eps), batch);
    x = ad::add(x, a);
    ad::Var normed = backbone::layer_norm(p, lp + "ln_mlp/", x, bc.ln_eps);
    if (with_experts && cfg.dseg.layer_has_experts(l, bc.n_layers)) {
      dseg::ExpertInputs in;
      in.normed = normed;
      in.batch = batch;
      in.tokens_per_item = tpi;
      if (cfg.dseg.strategy == dseg::DILStrategy::kAffineBias) {
        in.xhat = ad::normalize_rows(x, bc.ln_eps);
        in.ln_gamma = p(lp + "ln_mlp/gamma");
      }
      for (int n = 0; n < cfg.dseg.n_experts; ++n) {
        ad::Var v = dseg::expert_forward(p, cfg.dseg, bc, n, l, in, prompts);
        auto& slot = views[static_cast<std::size_t>(n)];
        slot = slot.valid() ? ad::add(slot, v) : v;
      }
    }
    x = ad::add(x, backbone::feed_forward(p, bc, l, normed));
  }
  ad::Var hidden = backbone::layer_norm(p, backbone::kPrefix + "ln_final/", x, bc.ln_eps);

  ForwardOut out;
  out.shared = ad::take_rows(hidden, backbone::class_rows(batch, tpi));
  std::vector<Eigen::Index> patch_rows;
  patch_rows.reserve(static_cast<std::size_t>(batch) * bc.n_patches());
  for (int b = 0; b < batch; ++b)
    for (int i = 0; i < bc.n_patches(); ++i) patch_rows.push_back(static_cast<Eigen::Index>(b) * tpi + 1 + i);
  out.patch_hidden = ad::take_rows(hidden, patch_rows);
  out.pooled = with_experts && views.front().valid()
                   ? ad::add(out.shared, dseg::aggregate_experts(views, cfg.dseg.aggregate_mean))
                   : out.shared;
  ad::Var cemb = align::class_embeddings(p, align::find_template(cfg.prompt_template, cfg.templates), cfg.text);
  out.logits = align::cls_logits(out.pooled, cemb, p(align::kLogTemp));
  return out;
}

ad::Var mim_logits(Binding& p, ad::Var patch_hidden) {
  return ad::add_row(ad::matmul(patch_hidden, p(kMimHead + "w")), p(kMimHead + "b"));
}

std::vector<double> predict(const ParamStore& params, const ModelConfig& cfg, const Matrix& images,
                            const DomainContext* ctx) {
  ad::Tape tape;
  Binding p(tape, params, no_params());
  ForwardOut out = forward(p, cfg, images, ctx);
  return align::prob_real(out.logits.value());
}

}  // namespace gmdf
