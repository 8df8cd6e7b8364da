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

#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>

#include "gmdf/core.hpp"
#include "gmdf/mim.hpp"
#include "test_util.hpp"

namespace gmdf::mim {
namespace {

TEST(Mask, CountsAreFloored) {
  EXPECT_TRUE(sample_mask(16, 0.0, MaskStrategy::kRandom, 1).indices.empty());
  EXPECT_EQ(sample_mask(16, 0.2, MaskStrategy::kRandom, 1).indices.size(), 3u);
  EXPECT_EQ(sample_mask(16, 1.0, MaskStrategy::kRandom, 1).indices.size(), 16u);
  const auto m = sample_mask(49, 0.5, MaskStrategy::kRandom, 2);
  EXPECT_EQ(m.indices.size(), 24u);
  EXPECT_TRUE(std::is_sorted(m.indices.begin(), m.indices.end()));
  EXPECT_EQ(std::adjacent_find(m.indices.begin(), m.indices.end()), m.indices.end());
}

TEST(Mask, Errors) {
  EXPECT_THROW(sample_mask(16, 1.5, MaskStrategy::kRandom, 0), std::invalid_argument);
  EXPECT_THROW(sample_mask(16, -0.1, MaskStrategy::kRandom, 0), std::invalid_argument);
  EXPECT_THROW(sample_mask(16, 0.2, MaskStrategy::kMinimum, 0), std::invalid_argument);
  EXPECT_THROW(parse_mask_strategy("blocky"), ConfigError);
}

TEST(Mask, RandomIsUniform) {
  const int n = 16, draws = 10000;
  std::vector<int> freq(n, 0);
  for (int s = 0; s < draws; ++s)
    for (int i : sample_mask(n, 0.2, MaskStrategy::kRandom, static_cast<std::uint64_t>(s)).indices) ++freq[static_cast<std::size_t>(i)];
  const double p = 3.0 / n;
  const double expect = draws * p;
  const double sd = std::sqrt(draws * p * (1.0 - p));
  for (int f : freq) EXPECT_LT(std::abs(f - expect), 3.0 * sd);
}

TEST(Mask, MinimumTakesLowestVarianceTiesByIndex) {
  const std::vector<double> var = {0.5, 0.1, 0.3, 0.1, 0.9, 0.0, 0.3, 0.2};
  const auto m = sample_mask(8, 0.5, MaskStrategy::kMinimum, 0, var);
  EXPECT_EQ(m.indices, (std::vector<int>{1, 3, 5, 7}));
  const auto tie = sample_mask(8, 0.25, MaskStrategy::kMinimum, 0, std::vector<double>(8, 1.0));
  EXPECT_EQ(tie.indices, (std::vector<int>{0, 1}));
}

TEST(Mask, RowsAreOffsetPerItem) {
  std::vector<MaskSet> masks(2);
  masks[0].indices = {1, 3};
  masks[1].indices = {0};
  EXPECT_EQ(masked_rows(masks, 4), (std::vector<Eigen::Index>{1, 3, 4}));
}

TEST(Loss, Examples) {
  MaskSet empty;
  const Matrix logits = Matrix::Zero(4, 8);
  const std::vector<int> targets = {0, 1, 2, 3};
  EXPECT_EQ(mim_loss(logits, targets, empty), 0.0);
  MaskSet one;
  one.indices = {2};
  EXPECT_NEAR(mim_loss(logits, targets, one), std::log(8.0), 1e-12);
  Matrix sharp = Matrix::Constant(4, 8, -800.0);
  sharp(2, 2) = 0.0;
  EXPECT_EQ(mim_loss(sharp, targets, one), 0.0);
}

TEST(Loss, NonNegativeAndBatchedFormAgrees) {
  Rng rng(3);
  const int np = 6, t = 5, batch = 3;
  const Matrix logits = testing::random_matrix(rng, batch * np, t, 2.0);
  std::vector<int> targets(batch * np);
  for (auto& x : targets) x = static_cast<int>(rng.below(t));
  std::vector<MaskSet> masks;
  double expect = 0.0;
  for (int b = 0; b < batch; ++b) {
    masks.push_back(sample_mask(np, 0.5, MaskStrategy::kRandom, rng.next_u64()));
    const double l = mim_loss(logits.middleRows(b * np, np),
                              std::span<const int>(targets).subspan(static_cast<std::size_t>(b * np), np), masks.back());
    EXPECT_GE(l, 0.0);
    expect += l / batch;
  }
  ad::Tape tape;
  EXPECT_NEAR(mim_loss(tape.constant(logits), targets, masks, np).scalar(), expect, 1e-12);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const int np = 4, t = 6, batch = 2;
  const Matrix logits = testing::random_matrix(rng, batch * np, t, 1.0);
  std::vector<int> targets(batch * np);
  for (auto& x : targets) x = static_cast<int>(rng.below(t));
  std::vector<MaskSet> masks = {sample_mask(np, 0.5, MaskStrategy::kRandom, 1),
                                sample_mask(np, 0.75, MaskStrategy::kRandom, 2)};
  const double err = testing::fd_check(
      [&](std::vector<ad::Var>& in) { return mim_loss(in[0], targets, masks, np); }, {logits});
  EXPECT_LT(err, 1e-4);
}

TEST(Tokenizer, SoftRowsOnSimplexAndHardMatchesArgmax) {
  Rng rng(5);
  TokenizerConfig cfg;
  cfg.codebook_size = 8;
  Tokenizer tok = init_tokenizer(12, cfg, 9);
  const Matrix patches = testing::random_matrix(rng, 200, 12, 1.0);
  const Matrix soft = tokenize_soft(patches, tok, 77);
  for (Eigen::Index r = 0; r < soft.rows(); ++r) EXPECT_NEAR(soft.row(r).sum(), 1.0, 1e-6);
  Matrix dup(2, 12);
  dup.row(0) = patches.row(0);
  dup.row(1) = patches.row(0);
  const auto h = tokenize_hard(dup, tok);
  EXPECT_EQ(h[0], h[1]);

  // At tau = 0.01 a row is sharp (max > 0.99) whenever its top-two logit gap
  // is at least tau * ln(99 (T - 1)); near-tied rows are counted separately.
  tok.tau = 0.01;
  const Matrix z = tok.logits(patches);
  const Matrix sharp = tokenize_soft(patches, tok);
  const auto hard = tokenize_hard(patches, tok);
  const double min_gap = tok.tau * std::log(99.0 * (cfg.codebook_size - 1));
  int wide = 0, peaked = 0;
  for (Eigen::Index r = 0; r < sharp.rows(); ++r) {
    Eigen::Index arg;
    const double mx = sharp.row(r).maxCoeff(&arg);
    EXPECT_EQ(arg, hard[static_cast<std::size_t>(r)]);
    std::vector<double> row(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index c = 0; c < z.cols(); ++c) row[static_cast<std::size_t>(c)] = z(r, c);
    std::sort(row.rbegin(), row.rend());
    if (row[0] - row[1] >= min_gap) {
      ++wide;
      EXPECT_GT(mx, 0.99) << "row " << r;
    }
    peaked += mx > 0.99;
  }
  EXPECT_GE(wide, 0.9 * sharp.rows());
  RecordProperty("peaked_fraction", std::to_string(peaked / static_cast<double>(sharp.rows())));
}

TEST(Tokenizer, TwoColorsSeparate) {
  Rng rng(6);
  const int n = 400, dim = 12;
  Matrix patches(n, dim);
  std::vector<int> color(n);
  for (int i = 0; i < n; ++i) {
    color[static_cast<std::size_t>(i)] = i % 2;
    for (int c = 0; c < dim; ++c) patches(i, c) = (i % 2 ? 0.85 : 0.15) + 0.02 * rng.normal();
  }
  TokenizerConfig cfg;
  cfg.codebook_size = 2;
  cfg.code_dim = 4;
  cfg.epochs = 20;
  cfg.batch_size = 32;
  cfg.lr = 1e-2;
  TokenizerReport rep;
  const Tokenizer tok = train_tokenizer(patches, cfg, 3, &rep);
  const auto hard = tokenize_hard(patches, tok);
  int same = 0;
  for (int i = 0; i < n; ++i) same += hard[static_cast<std::size_t>(i)] == color[static_cast<std::size_t>(i)];
  const double purity = std::max(same, n - same) / static_cast<double>(n);
  EXPECT_GE(purity, 0.95);
  EXPECT_LT(rep.epoch_error.back(), rep.epoch_error.front());
  EXPECT_FALSE(rep.collapsed);
  EXPECT_EQ(train_tokenizer(patches, cfg, 3).codebook, tok.codebook);
}

TEST(Tokenizer, CollapseIsFlagged) {
  TokenizerConfig cfg;
  cfg.codebook_size = 4;
  cfg.epochs = 2;
  TokenizerReport rep;
  train_tokenizer(Matrix::Constant(64, 6, 0.4), cfg, 1, &rep);
  EXPECT_TRUE(rep.collapsed);
  EXPECT_EQ(rep.codes_used, 1);
}

TEST(Tokenizer, StoreLoadRoundTrip) {
  TokenizerConfig cfg;
  cfg.codebook_size = 5;
  Tokenizer tok = init_tokenizer(9, cfg, 4);
  tok.tau = 0.3;
  ParamStore ps;
  store_tokenizer(ps, tok);
  const Tokenizer back = load_tokenizer(ps);
  EXPECT_EQ(back.codebook, tok.codebook);
  EXPECT_EQ(back.tau, 0.3);
  EXPECT_THROW(load_tokenizer(ParamStore{}), ConfigError);
}

}  // namespace
}  // namespace gmdf::mim
