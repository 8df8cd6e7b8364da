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

// Text-prompt class embeddings, the cosine-logit classifier, the Gaussian
// domain-alignment distance and loss composition.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gmdf/autodiff.hpp"
#include "gmdf/params.hpp"
#include "gmdf/rng.hpp"

namespace gmdf::align {

struct PromptTemplate {
  std::string id;
  std::string real_text;
  std::string fake_text;
};

const std::vector<PromptTemplate>& builtin_templates();
/// Looks up `id` in `table` (the built-in table when empty).
PromptTemplate find_template(const std::string& id, const std::vector<PromptTemplate>& table = {});
/// Reads `id,real_text,fake_text` rows.
std::vector<PromptTemplate> load_templates(const std::filesystem::path& path);

struct TextConfig {
  int buckets = 512;
  int ngram = 3;
  int table_dim = 32;
  int hidden = 64;
};

inline const std::string kTextPrefix = "theta_O/text/";
inline const std::string kLogTemp = "theta_O/log_temp";

/// Normalized character n-gram counts hashed into `buckets` (1 x buckets).
Matrix text_features(const std::string& text, const TextConfig& cfg);

void init_text_params(ParamStore& store, const TextConfig& cfg, int embed_dim, Rng& rng);

/// 2 x embed_dim, row 0 = real, row 1 = fake, rows L2-normalized.
ad::Var class_embeddings(Binding& p, const PromptTemplate& tmpl, const TextConfig& cfg);
Matrix class_embeddings(const ParamStore& store, const PromptTemplate& tmpl, const TextConfig& cfg);

/// Class index used by the classifier head for a 0/1 label.
inline Eigen::Index class_index(int label) { return label == 1 ? 0 : 1; }

/// exp(log_temp) * cos(e, class rows); B x 2. Throws on a zero-norm row.
ad::Var cls_logits(ad::Var pooled, ad::Var class_emb, ad::Var log_temp);
/// Mean two-class cross entropy of B x 2 logits.
ad::Var cls_loss_from_logits(ad::Var logits, std::span<const int> labels);
/// Mean two-class cross entropy over the batch.
ad::Var cls_loss(ad::Var pooled, std::span<const int> labels, ad::Var class_emb, ad::Var log_temp);
/// P(real) per row of value-level logits.
std::vector<double> prob_real(const Matrix& logits);

/// Mean of -[y log p + (1-y) log(1-p)].
double binary_cross_entropy(std::span<const double> p_real, std::span<const int> labels);

struct FeatureStats {
  RowVector mu;
  Matrix sigma;
  double eps = 0.0;
};

/// Shrinkage added to the sample covariance: max(1e-4 * trace / d, 1e-8).
double shrinkage(double trace, Eigen::Index d);
FeatureStats feature_stats(const Matrix& features);

/// Eigendecomposition square root with negative eigenvalues clipped.
Matrix matrix_sqrt_psd(const Matrix& a);

/// ||mu_s - mu_t||^2 + tr(S_s + S_t - 2 (S_s^1/2 S_t S_s^1/2)^1/2), >= 0.
double da_loss(const FeatureStats& s, const FeatureStats& t);

/// Differentiable in the target features only; `source` is a constant.
ad::Var da_loss(const FeatureStats& source, ad::Var target_features);

struct LossWeights {
  double sis = 1.0;
  double cls = 1.0;
  double mim = 1.0;
};

double total_loss(double l_sis, double l_cls, double l_mim, const LossWeights& w = {});
ad::Var total_loss(ad::Var l_sis, ad::Var l_cls, ad::Var l_mim, const LossWeights& w = {});

}  // namespace gmdf::align
