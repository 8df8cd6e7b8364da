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

#include "gmdf/mim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "gmdf/core.hpp"
#include "gmdf/optim.hpp"
#include "gmdf/rng.hpp"

namespace gmdf::mim {

std::string to_string(MaskStrategy s) { return s == MaskStrategy::kMinimum ? "minimum" : "random"; }

MaskStrategy parse_mask_strategy(const std::string& s) {
  if (s == "random") return MaskStrategy::kRandom;
  if (s == "minimum") return MaskStrategy::kMinimum;
  throw ConfigError("unknown mask strategy: " + s);
}

MaskSet sample_mask(int n_patches, double ratio, MaskStrategy strategy, std::uint64_t seed,
                    std::span<const double> patch_variance) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("sample_mask: ratio must be in [0, 1]");
  if (n_patches < 0) throw std::invalid_argument("sample_mask: negative patch count");
  if (n_patches == 0 && ratio > 0.0) throw std::invalid_argument("sample_mask: no patches to mask");
  MaskSet m;
  m.strategy = strategy;
  m.ratio = ratio;
  const int k = static_cast<int>(std::floor(ratio * n_patches + 1e-9));
  if (k == 0) return m;
  std::vector<int> order(static_cast<std::size_t>(n_patches));
  std::iota(order.begin(), order.end(), 0);
  if (strategy == MaskStrategy::kRandom) {
    Rng rng(seed);
    // Partial Fisher-Yates: first k entries form a uniform k-subset.
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_patches - i)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
  } else {
    if (static_cast<int>(patch_variance.size()) != n_patches) {
      throw std::invalid_argument("sample_mask: minimum strategy needs one variance per patch");
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return patch_variance[static_cast<std::size_t>(a)] < patch_variance[static_cast<std::size_t>(b)];
    });
  }
  m.indices.assign(order.begin(), order.begin() + k);
  std::sort(m.indices.begin(), m.indices.end());
  return m;
}

std::vector<Eigen::Index> masked_rows(std::span<const MaskSet> masks, int n_patches) {
  std::vector<Eigen::Index> rows;
  for (std::size_t b = 0; b < masks.size(); ++b) {
    for (int i : masks[b].indices) {
      if (i < 0 || i >= n_patches) throw std::out_of_range("mask index out of range");
      rows.push_back(static_cast<Eigen::Index>(b) * n_patches + i);
    }
  }
  return rows;
}

Matrix Tokenizer::logits(const Matrix& patches) const {
  if (patches.cols() != enc_w.rows()) throw std::invalid_argument("tokenizer: patch dim mismatch");
  return (patches * enc_w).rowwise() + enc_b.row(0);
}

void Tokenizer::validate() const {
  if (codebook.rows() < 2) throw std::invalid_argument("tokenizer: codebook needs at least 2 entries");
  if (!codebook.allFinite()) throw std::invalid_argument("tokenizer: non-finite codebook");
  if (!(tau > 0.0)) throw std::invalid_argument("tokenizer: temperature must be positive");
}

namespace {

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

Matrix gumbel(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix g(rows, cols);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    double u;
    do {
      u = rng.uniform();
    } while (u <= 0.0);
    g.data()[i] = -std::log(-std::log(u));
  }
  return g;
}

Matrix softmax(Matrix z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - mx).exp();
    z.row(r) /= z.row(r).sum();
  }
  return z;
}

}  // namespace

Tokenizer init_tokenizer(int patch_dim, const TokenizerConfig& cfg, std::uint64_t seed) {
  if (cfg.codebook_size < 2) throw ConfigError("tokenizer: codebook_size must be >= 2");
  if (cfg.code_dim < 1) throw ConfigError("tokenizer: code_dim must be >= 1");
  Rng rng(seed);
  Tokenizer t;
  t.enc_w = normal_matrix(rng, patch_dim, cfg.codebook_size, 1.0 / std::sqrt(patch_dim));
  t.enc_b = Matrix::Zero(1, cfg.codebook_size);
  t.codebook = normal_matrix(rng, cfg.codebook_size, cfg.code_dim, 1.0);
  t.dec_w = normal_matrix(rng, cfg.code_dim, patch_dim, 0.1 / std::sqrt(cfg.code_dim));
  t.dec_b = Matrix::Constant(1, patch_dim, 0.5);
  t.tau = cfg.tau_start;
  return t;
}

Matrix tokenize_soft(const Matrix& patches, const Tokenizer& tok, std::optional<std::uint64_t> gumbel_seed) {
  tok.validate();
  Matrix z = tok.logits(patches);
  if (gumbel_seed) z += gumbel(z.rows(), z.cols(), *gumbel_seed);
  return softmax(z / tok.tau);
}

std::vector<int> tokenize_hard(const Matrix& patches, const Tokenizer& tok, std::optional<std::uint64_t> gumbel_seed) {
  tok.validate();
  Matrix z = tok.logits(patches);
  if (gumbel_seed) z += gumbel(z.rows(), z.cols(), *gumbel_seed);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    Eigen::Index arg;
    z.row(r).maxCoeff(&arg);
    out[static_cast<std::size_t>(r)] = static_cast<int>(arg);
  }
  return out;
}

double reconstruction_error(const Matrix& patches, const Tokenizer& tok) {
  const Matrix y = tokenize_soft(patches, tok);
  const Matrix recon = ((y * tok.codebook) * tok.dec_w).rowwise() + tok.dec_b.row(0);
  return (recon - patches).squaredNorm() / static_cast<double>(patches.size());
}

Tokenizer train_tokenizer(const Matrix& patches, const TokenizerConfig& cfg, std::uint64_t seed,
                          TokenizerReport* report) {
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ConfigError("tokenizer: bad epochs/batch_size");
  if (!(cfg.tau_start > 0.0 && cfg.tau_end > 0.0)) throw ConfigError("tokenizer: temperatures must be positive");
  if (patches.rows() == 0) throw DataError("tokenizer: no patches", {});
  Tokenizer tok = init_tokenizer(static_cast<int>(patches.cols()), cfg, mix64(seed) ^ 0x746f6bULL);
  ParamStore ps;
  ps.set("enc_w", tok.enc_w);
  ps.set("enc_b", tok.enc_b);
  ps.set("codebook", tok.codebook);
  ps.set("dec_w", tok.dec_w);
  ps.set("dec_b", tok.dec_b);
  auto sync = [&] {
    tok.enc_w = ps.get("enc_w");
    tok.enc_b = ps.get("enc_b");
    tok.codebook = ps.get("codebook");
    tok.dec_w = ps.get("dec_w");
    tok.dec_b = ps.get("dec_b");
  };
  Optimizer opt({OptimizerKind::kAdam, cfg.lr});
  Rng rng(seed);
  TokenizerReport rep;
  rep.epoch_error.push_back(reconstruction_error(patches, tok));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(patches.rows()));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, patches.rows());
  for (int e = 0; e < cfg.epochs; ++e) {
    tok.tau = cfg.epochs == 1 ? cfg.tau_start
                              : cfg.tau_start + (cfg.tau_end - cfg.tau_start) * e / static_cast<double>(cfg.epochs - 1);
    rng.shuffle(order.begin(), order.end());
    for (Eigen::Index start = 0; start + bs <= patches.rows(); start += bs) {
      Matrix x(bs, patches.cols());
      for (Eigen::Index i = 0; i < bs; ++i) x.row(i) = patches.row(order[static_cast<std::size_t>(start + i)]);
      ad::Tape tape;
      Binding p(tape, ps, all_params());
      ad::Var xv = tape.constant(x);
      ad::Var z = ad::add_row(ad::matmul(xv, p("enc_w")), p("enc_b"));
      z = ad::add(z, tape.constant(gumbel(bs, tok.codebook_size(), rng.next_u64())));
      ad::Var y = ad::softmax_rows(ad::scale(z, 1.0 / tok.tau));
      ad::Var recon = ad::add_row(ad::matmul(ad::matmul(y, p("codebook")), p("dec_w")), p("dec_b"));
      ad::Var loss = ad::mean(ad::hadamard(ad::sub(recon, xv), ad::sub(recon, xv)));
      tape.backward(loss);
      opt.step(ps, p.gradients());
    }
    sync();
    rep.epoch_error.push_back(reconstruction_error(patches, tok));
  }
  tok.tau = cfg.epochs == 0 ? cfg.tau_start : cfg.tau_end;
  const std::vector<int> hard = tokenize_hard(patches, tok);
  rep.codes_used = static_cast<int>(std::set<int>(hard.begin(), hard.end()).size());
  rep.collapsed = rep.codes_used <= 1;
  if (rep.collapsed) std::cerr << "warning: tokenizer codebook collapsed to a single code\n";
  if (report) *report = std::move(rep);
  return tok;
}

void store_tokenizer(ParamStore& store, const Tokenizer& tok) {
  store.set(kPrefix + "enc_w", tok.enc_w);
  store.set(kPrefix + "enc_b", tok.enc_b);
  store.set(kPrefix + "codebook", tok.codebook);
  store.set(kPrefix + "dec_w", tok.dec_w);
  store.set(kPrefix + "dec_b", tok.dec_b);
  store.set(kPrefix + "tau", Matrix::Constant(1, 1, tok.tau));
}

Tokenizer load_tokenizer(const ParamStore& store) {
  if (!store.contains(kPrefix + "codebook")) throw ConfigError("tokenizer missing from checkpoint");
  Tokenizer t;
  t.enc_w = store.get(kPrefix + "enc_w");
  t.enc_b = store.get(kPrefix + "enc_b");
  t.codebook = store.get(kPrefix + "codebook");
  t.dec_w = store.get(kPrefix + "dec_w");
  t.dec_b = store.get(kPrefix + "dec_b");
  t.tau = store.get(kPrefix + "tau")(0, 0);
  t.validate();
  return t;
}

double mim_loss(const Matrix& token_logits, std::span<const int> target_tokens, const MaskSet& mask) {
  if (static_cast<Eigen::Index>(target_tokens.size()) != token_logits.rows()) {
    throw std::invalid_argument("mim_loss: one target per logit row required");
  }
  double total = 0.0;
  for (int k : mask.indices) {
    if (k < 0 || k >= token_logits.rows()) throw std::out_of_range("mim_loss: mask index out of range");
    const auto row = token_logits.row(k);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    total += lse - row(target_tokens[static_cast<std::size_t>(k)]);
  }
  return std::max(total, 0.0);
}

ad::Var mim_loss(ad::Var token_logits, std::span<const int> target_tokens, std::span<const MaskSet> masks,
                 int n_patches) {
  if (static_cast<Eigen::Index>(target_tokens.size()) != token_logits.rows()) {
    throw std::invalid_argument("mim_loss: one target per logit row required");
  }
  const std::vector<Eigen::Index> rows = masked_rows(masks, n_patches);
  std::vector<Eigen::Index> targets;
  targets.reserve(rows.size());
  for (Eigen::Index r : rows) targets.push_back(target_tokens[static_cast<std::size_t>(r)]);
  ad::Var s = ad::cross_entropy_sum(token_logits, rows, targets);
  return ad::scale(s, 1.0 / static_cast<double>(std::max<std::size_t>(masks.size(), 1)));
}

}  // namespace gmdf::mim
