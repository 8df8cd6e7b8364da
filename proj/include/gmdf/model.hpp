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

// Full detector: shared encoder, per-domain expert branches, text-prompt
// classifier and masked-token head.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmdf/align.hpp"
#include "gmdf/autodiff.hpp"
#include "gmdf/backbone.hpp"
#include "gmdf/dseg.hpp"
#include "gmdf/params.hpp"

namespace gmdf {

struct ModelConfig {
  backbone::BackboneConfig backbone;
  dseg::DsegConfig dseg;
  /// False gives the plain shared encoder with no expert branches.
  bool experts = true;
  align::TextConfig text;
  std::string prompt_template = "P1";
  std::vector<align::PromptTemplate> templates;  // empty = built-in table
  int codebook_size = 64;
  /// Domain id served by each expert, in expert order.
  std::vector<int> expert_domains;
  std::vector<std::string> expert_names;

  /// Expert index of a domain id, or -1 for a domain without an expert.
  int expert_of(int domain_id) const;
  void validate() const;
};

inline const std::string kMimHead = "theta_O/mim_head/";

/// Initializes every learnable array. Experts are created when cfg.experts.
ParamStore init_model(const ModelConfig& cfg, std::uint64_t seed);

/// Expert routing for one batch: the prompt index of every sample (-1 uses
/// the mean of all trained prompts).
struct DomainContext {
  std::vector<int> prompt_index;
};

DomainContext context_for(const ModelConfig& cfg, std::span<const int> domain_ids);

struct ForwardOut {
  ad::Var pooled;        // B x d, shared class embedding plus aggregated expert view
  ad::Var shared;        // B x d, final-norm class token alone
  ad::Var logits;        // B x 2 (real, fake)
  ad::Var patch_hidden;  // (B * N_p) x d, final-norm patch tokens
};

/// `ctx` absent runs the shared path only. `masked_patch_rows` index the
/// stacked (B * N_p) patch rows replaced by the mask token.
ForwardOut forward(Binding& p, const ModelConfig& cfg, const Matrix& images, const DomainContext* ctx,
                   std::span<const Eigen::Index> masked_patch_rows = {});

/// (B * N_p) x T token logits from final patch states.
ad::Var mim_logits(Binding& p, ad::Var patch_hidden);

/// P(real) per image; evaluation mode (no masking).
std::vector<double> predict(const ParamStore& params, const ModelConfig& cfg, const Matrix& images,
                            const DomainContext* ctx);

}  // namespace gmdf
