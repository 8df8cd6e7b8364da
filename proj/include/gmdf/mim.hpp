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

// Masked image modeling: patch masks, a Gumbel-softmax patch tokenizer and
// the masked token-prediction loss.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmdf/autodiff.hpp"
#include "gmdf/params.hpp"

namespace gmdf::mim {

enum class MaskStrategy { kRandom, kMinimum };

std::string to_string(MaskStrategy s);
MaskStrategy parse_mask_strategy(const std::string& s);

struct MaskSet {
  std::vector<int> indices;  // sorted ascending
  MaskStrategy strategy = MaskStrategy::kRandom;
  double ratio = 0.0;
};

/// floor(ratio * n_patches) patches. kRandom draws uniformly without
/// replacement; kMinimum takes the lowest-variance patches (ties by index)
/// and needs `patch_variance` of length n_patches.
MaskSet sample_mask(int n_patches, double ratio, MaskStrategy strategy, std::uint64_t seed,
                    std::span<const double> patch_variance = {});

/// Row indices into a stacked (B * n_patches) patch matrix.
std::vector<Eigen::Index> masked_rows(std::span<const MaskSet> masks, int n_patches);

struct TokenizerConfig {
  int codebook_size = 64;
  int code_dim = 16;
  int epochs = 5;
  int batch_size = 256;
  double lr = 3e-3;
  double tau_start = 1.0;
  double tau_end = 0.1;
};

struct Tokenizer {
  Matrix enc_w;     // patch_dim x T
  Matrix enc_b;     // 1 x T
  Matrix codebook;  // T x code_dim
  Matrix dec_w;     // code_dim x patch_dim
  Matrix dec_b;     // 1 x patch_dim
  double tau = 1.0;

  int codebook_size() const { return static_cast<int>(codebook.rows()); }
  int patch_dim() const { return static_cast<int>(enc_w.rows()); }
  Matrix logits(const Matrix& patches) const;
  void validate() const;
};

Tokenizer init_tokenizer(int patch_dim, const TokenizerConfig& cfg, std::uint64_t seed);

/// Soft Gumbel-softmax assignments at temperature tau (N x T, rows on the
/// simplex). Without a seed no noise is added.
Matrix tokenize_soft(const Matrix& patches, const Tokenizer& tok, std::optional<std::uint64_t> gumbel_seed = {});
/// Argmax token per patch. With a seed the same Gumbel noise as
/// tokenize_soft is added before the argmax.
std::vector<int> tokenize_hard(const Matrix& patches, const Tokenizer& tok,
                               std::optional<std::uint64_t> gumbel_seed = {});

/// Mean squared reconstruction error of decode(soft assignment) vs patches,
/// noise-free, at the tokenizer's temperature.
double reconstruction_error(const Matrix& patches, const Tokenizer& tok);

struct TokenizerReport {
  std::vector<double> epoch_error;  // index 0 = at initialization
  int codes_used = 0;
  bool collapsed = false;
};

/// Trains on `patches` (N x patch_dim) with Adam, annealing tau linearly from
/// tau_start to tau_end across epochs.
Tokenizer train_tokenizer(const Matrix& patches, const TokenizerConfig& cfg, std::uint64_t seed,
                          TokenizerReport* report = nullptr);

inline const std::string kPrefix = "tokenizer/";
void store_tokenizer(ParamStore& store, const Tokenizer& tok);
Tokenizer load_tokenizer(const ParamStore& store);

/// -sum over masked patches of log softmax(logits)[target]. logits is
/// N_p x T for one image.
double mim_loss(const Matrix& token_logits, std::span<const int> target_tokens, const MaskSet& mask);

/// Batched, differentiable form: logits is (B * n_patches) x T, targets has
/// B * n_patches entries. Summed over each item's masked patches and
/// averaged over the batch.
ad::Var mim_loss(ad::Var token_logits, std::span<const int> target_tokens, std::span<const MaskSet> masks,
                 int n_patches);

}  // namespace gmdf::mim
