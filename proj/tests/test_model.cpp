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

#include <algorithm>

#include "gmdf/model.hpp"
#include "test_util.hpp"

namespace gmdf {
namespace dseg {
void PrintTo(DILStrategy s, std::ostream* os) { *os << to_string(s); }
}  // namespace dseg

namespace {

using backbone::BackboneConfig;

BackboneConfig tiny_backbone() {
  BackboneConfig b;
  b.image_size = 16;
  b.patch_size = 4;
  b.embed_dim = 8;
  b.n_layers = 2;
  b.n_heads = 2;
  return b;
}

ModelConfig tiny_model(dseg::DILStrategy s = dseg::DILStrategy::kAffine) {
  ModelConfig m;
  m.backbone = tiny_backbone();
  m.dseg.strategy = s;
  m.dseg.n_experts = 3;
  m.dseg.prompt_dim = 5;
  m.dseg.expert_hidden = 6;
  m.dseg.cross_segments = 2;
  m.text.buckets = 32;
  m.text.table_dim = 4;
  m.text.hidden = 6;
  m.codebook_size = 8;
  m.expert_domains = {0, 1, 2};
  m.expert_names = {"a", "b", "c"};
  m.validate();
  return m;
}

Matrix random_images(Rng& rng, int n, int size) {
  Matrix m(n, size * size * 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

void set_alphas(ParamStore& ps, double v) {
  for (const auto& n : ps.names())
    if (n.ends_with("/alpha")) ps.mutable_get(n).setConstant(v);
}

TEST(Backbone, TokenCounts) {
  BackboneConfig b;
  EXPECT_EQ(b.n_patches(), 16);
  EXPECT_EQ(b.tokens(), 17);
  Rng rng(1);
  ParamStore ps;
  backbone::init_params(ps, b, rng);
  ad::Tape t;
  Binding p(t, ps, no_params());
  const auto ts = backbone::patch_embed(p, b, random_images(rng, 3, 32));
  EXPECT_EQ(ts.tokens.rows(), 3 * 17);
  EXPECT_EQ(ts.tokens.cols(), b.embed_dim);
  EXPECT_THROW(backbone::patch_embed(p, b, random_images(rng, 1, 16)), std::invalid_argument);
}

TEST(Backbone, ZeroProjectionGivesPositionalEmbeddings) {
  const auto b = tiny_backbone();
  Rng rng(2);
  ParamStore ps;
  backbone::init_params(ps, b, rng);
  ps.mutable_get(backbone::kPrefix + "patch_embed/w").setZero();
  ps.mutable_get(backbone::kPrefix + "cls_token").setZero();
  ad::Tape t;
  Binding p(t, ps, no_params());
  const auto ts = backbone::patch_embed(p, b, Matrix::Zero(2, 16 * 16 * 3));
  const Matrix& pos = ps.get(backbone::kPrefix + "pos_embed");
  EXPECT_EQ(ts.tokens.value().topRows(b.tokens()), pos);
  EXPECT_EQ(ts.tokens.value().bottomRows(b.tokens()), pos);
}

TEST(Backbone, PatchEditIsLocalBeforeAttention) {
  const auto b = tiny_backbone();
  Rng rng(3);
  ParamStore ps;
  backbone::init_params(ps, b, rng);
  Matrix img = random_images(rng, 1, 16);
  Matrix edited = img;
  // Pixel (row 5, col 9) lies in patch (1, 2), raster index 6.
  edited(0, (5 * 16 + 9) * 3 + 1) += 0.3;
  ad::Tape t;
  Binding p(t, ps, no_params());
  const Matrix a = backbone::patch_embed(p, b, img).tokens.value();
  const Matrix c = backbone::patch_embed(p, b, edited).tokens.value();
  for (int r = 0; r < b.tokens(); ++r) {
    const bool same = a.row(r) == c.row(r);
    EXPECT_EQ(same, r != 1 + 6) << "token " << r;
  }
}

TEST(Backbone, PatchifyRasterOrder) {
  Matrix img(1, 8 * 8 * 3);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int c = 0; c < 3; ++c) img(0, (y * 8 + x) * 3 + c) = y * 100 + x * 10 + c;
  const Matrix p = backbone::patchify(img, 8, 4);
  ASSERT_EQ(p.rows(), 4);
  ASSERT_EQ(p.cols(), 48);
  // Patch 1 is the top-right block; its first pixel is (0, 4).
  EXPECT_EQ(p(1, 0), 40);
  // Patch 2, row 1, col 2, channel 1 is pixel (5, 2).
  EXPECT_EQ(p(2, (1 * 4 + 2) * 3 + 1), 521);
  const Matrix var = backbone::patch_variance(Matrix::Constant(1, 8 * 8 * 3, 0.3), 8, 4);
  EXPECT_NEAR(var.maxCoeff(), 0.0, 1e-15);
}

TEST(Backbone, SingleTokenAttentionIsValueProjection) {
  const auto b = tiny_backbone();
  Rng rng(4);
  ParamStore ps;
  backbone::init_params(ps, b, rng);
  const std::string lp = backbone::layer_prefix(0);
  for (auto n : {"attn/bqkv", "attn/bo"}) ps.mutable_get(lp + n) = testing::random_matrix(rng, 1, ps.get(lp + n).cols(), 1.0);
  const Matrix x = testing::random_matrix(rng, 3, b.embed_dim, 1.0);
  ad::Tape t;
  Binding p(t, ps, no_params());
  Matrix w;
  const Matrix out = backbone::mha(p, b, 0, t.constant(x), 3, &w).value();
  const int d = b.embed_dim;
  const Matrix& wqkv = ps.get(lp + "attn/wqkv");
  const Matrix v = (x * wqkv.middleCols(2 * d, d)).rowwise() + ps.get(lp + "attn/bqkv").middleCols(2 * d, d).row(0);
  const Matrix expect = (v * ps.get(lp + "attn/wo")).rowwise() + ps.get(lp + "attn/bo").row(0);
  EXPECT_TRUE(out.isApprox(expect, 1e-12));
  EXPECT_TRUE(w.isApproxToConstant(1.0));
}

TEST(Backbone, AttentionRowsSumToOneAndPermutationEquivariant) {
  const auto b = tiny_backbone();
  Rng rng(5);
  ParamStore ps;
  backbone::init_params(ps, b, rng);
  const int n = 5;
  const Matrix x = testing::random_matrix(rng, n, b.embed_dim, 1.0);
  const std::vector<int> perm = {3, 0, 4, 1, 2};
  Matrix xp(n, b.embed_dim);
  for (int i = 0; i < n; ++i) xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  ad::Tape t;
  Binding p(t, ps, no_params());
  Matrix w;
  const Matrix out = backbone::mha(p, b, 1, t.constant(x), 1, &w).value();
  const Matrix outp = backbone::mha(p, b, 1, t.constant(xp), 1).value();
  for (Eigen::Index r = 0; r < w.rows(); ++r) EXPECT_NEAR(w.row(r).sum(), 1.0, 1e-6);
  for (int i = 0; i < n; ++i) EXPECT_TRUE(outp.row(i).isApprox(out.row(perm[static_cast<std::size_t>(i)]), 1e-12));
}

TEST(Dseg, ResidualScale) {
  Rng rng(6);
  ad::Tape t;
  const Matrix x = testing::random_matrix(rng, 4, 3, 1.0);
  auto rs = [&](double a) { return dseg::residual_scale(t.constant(x), t.constant(Matrix::Constant(1, 1, a))).value(); };
  EXPECT_TRUE(rs(0.0).isZero(0.0));
  EXPECT_EQ(rs(1.0), x);
  EXPECT_TRUE(rs(1.4).isApprox(2.0 * rs(0.7), 1e-15));
}

TEST(Dseg, AffineGainLimits) {
  Rng rng(7);
  ad::Tape t;
  const int d = 4, m = 3, tpi = 5, batch = 2;
  const Matrix tokens = testing::random_matrix(rng, batch * tpi, d, 1.0);
  const Matrix prompts = testing::random_matrix(rng, batch, m, 1.0);
  auto run = [&](const Matrix& w, const Matrix& b, const Matrix& pr) {
    return dseg::dil_affine(t.constant(tokens), dseg::affine_gain(t.constant(pr), t.constant(w), t.constant(b)), tpi)
        .value();
  };
  EXPECT_EQ(run(Matrix::Zero(m, d), Matrix::Ones(1, d), prompts), tokens);
  EXPECT_TRUE(run(Matrix::Zero(m, d), Matrix::Zero(1, d), prompts).isZero(0.0));
  const Matrix w = testing::random_matrix(rng, m, d, 1.0);
  const Matrix b = testing::random_matrix(rng, 1, d, 1.0);
  Matrix other = prompts;
  other.row(0) = testing::random_matrix(rng, 1, m, 1.0);
  EXPECT_GT((run(w, b, prompts) - run(w, b, other)).topRows(tpi).norm(), 0.0);
  // Linear h without bias: doubling the prompt doubles the gain.
  const Matrix g1 = dseg::affine_gain(t.constant(prompts), t.constant(w), t.constant(Matrix::Zero(1, d))).value();
  const Matrix g2 = dseg::affine_gain(t.constant(2.0 * prompts), t.constant(w), t.constant(Matrix::Zero(1, d))).value();
  EXPECT_TRUE(g2.isApprox(2.0 * g1, 1e-14));
}

TEST(Dseg, AffineBiasMatchesLayerNorm) {
  Rng rng(8);
  ad::Tape t;
  const int d = 6, tpi = 3, batch = 2;
  const double eps = 1e-5;
  const Matrix x = testing::random_matrix(rng, batch * tpi, d, 2.0);
  const Matrix gamma = testing::random_matrix(rng, 1, d, 1.0);
  const Matrix out = dseg::dil_affine_bias(t.constant(x), t.constant(gamma), t.constant(Matrix::Ones(batch, d)),
                                           t.constant(Matrix::Zero(batch, d)), tpi, eps)
                         .value();
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const RowVector xhat = (x.row(r).array() - mu) / std::sqrt(var + eps);
    EXPECT_NEAR(xhat.mean(), 0.0, 1e-5);
    EXPECT_NEAR(std::sqrt(xhat.array().square().mean()), 1.0, 1e-5);
    EXPECT_TRUE(out.row(r).isApprox(xhat.cwiseProduct(gamma.row(0)), 1e-12));
  }
  const Matrix beta = testing::random_matrix(rng, batch, d, 1.0);
  const Matrix flat = dseg::dil_affine_bias(t.constant(Matrix::Constant(batch * tpi, d, 0.7)), t.constant(gamma),
                                            t.constant(Matrix::Ones(batch, d)), t.constant(beta), tpi, eps)
                          .value();
  for (int r = 0; r < batch * tpi; ++r) EXPECT_TRUE(flat.row(r).isApprox(beta.row(r / tpi), 1e-12));
}

TEST(Dseg, CrossAttentionZeroProjectionAndSingleSegment) {
  Rng rng(9);
  ad::Tape t;
  const int d = 4, batch = 2, tpi = 3;
  const Matrix tokens = testing::random_matrix(rng, batch * tpi, d, 1.0);
  auto w = [&]() { return t.constant(testing::random_matrix(rng, d, d, 1.0)); };
  Matrix weights;
  const Matrix out = dseg::dil_cross_attention(t.constant(tokens), t.constant(testing::random_matrix(rng, batch, d, 1.0)),
                                               w(), w(), w(), t.constant(Matrix::Zero(d, d)),
                                               t.constant(Matrix::Zero(1, d)), batch, 1, &weights)
                         .value();
  EXPECT_EQ(out, tokens);
  EXPECT_TRUE(weights.isApproxToConstant(1.0));
}

TEST(Dseg, AggregateSingleIdenticalAndPermutation) {
  Rng rng(10);
  const Matrix one = testing::random_matrix(rng, 1, 5, 1.0);
  EXPECT_TRUE(dseg::aggregate_experts(one).isApprox(one.row(0), 1e-14));
  const Matrix same = one.replicate(3, 1);
  EXPECT_TRUE(dseg::aggregate_experts(same, true).isApprox(one.row(0), 1e-14));
  EXPECT_TRUE(dseg::aggregate_experts(same, false).isApprox(3.0 * one.row(0), 1e-14));
  const Matrix deltas = testing::random_matrix(rng, 3, 5, 1.0);
  const RowVector ref = dseg::aggregate_experts(deltas);
  std::vector<int> order = {0, 1, 2};
  do {
    Matrix p(3, 5);
    for (int i = 0; i < 3; ++i) p.row(i) = deltas.row(order[static_cast<std::size_t>(i)]);
    EXPECT_LT((dseg::aggregate_experts(p) - ref).cwiseAbs().maxCoeff(), 1e-12);
  } while (std::next_permutation(order.begin(), order.end()));
}

TEST(Dseg, TapeAggregationMatchesValueLevel) {
  Rng rng(11);
  ad::Tape t;
  const int batch = 4, d = 6, n = 3;
  std::vector<ad::Var> views;
  std::vector<Matrix> raw;
  for (int i = 0; i < n; ++i) {
    raw.push_back(testing::random_matrix(rng, batch, d, 1.0));
    views.push_back(t.constant(raw.back()));
  }
  const Matrix agg = dseg::aggregate_experts(views).value();
  for (int b = 0; b < batch; ++b) {
    Matrix deltas(n, d);
    for (int i = 0; i < n; ++i) deltas.row(i) = raw[static_cast<std::size_t>(i)].row(b);
    EXPECT_TRUE(agg.row(b).isApprox(dseg::aggregate_experts(deltas), 1e-12));
  }
}

class Strategies : public ::testing::TestWithParam<dseg::DILStrategy> {};

TEST_P(Strategies, FreshModelEqualsSharedPath) {
  const auto cfg = tiny_model(GetParam());
  const ParamStore ps = init_model(cfg, 12);
  Rng rng(12);
  const Matrix imgs = random_images(rng, 4, 16);
  const std::vector<int> domains = {0, 1, 2, -1};
  const auto ctx = context_for(cfg, domains);
  ad::Tape t1, t2;
  Binding p1(t1, ps, no_params());
  Binding p2(t2, ps, no_params());
  const auto with = forward(p1, cfg, imgs, &ctx);
  const auto without = forward(p2, cfg, imgs, nullptr);
  EXPECT_EQ(with.pooled.value(), without.pooled.value());
  EXPECT_EQ(with.logits.value(), without.logits.value());
  EXPECT_EQ(with.pooled.cols(), cfg.backbone.embed_dim);
}

TEST_P(Strategies, ExpertIsolation) {
  const auto cfg = tiny_model(GetParam());
  ParamStore ps = init_model(cfg, 13);
  set_alphas(ps, 0.5);
  Rng rng(13);
  const Matrix imgs = random_images(rng, 2, 16);
  auto deltas = [&](const ParamStore& store) {
    ad::Tape t;
    Binding p(t, store, no_params());
    const auto ts = backbone::patch_embed(p, cfg.backbone, imgs);
    ad::Var normed = backbone::layer_norm(p, backbone::layer_prefix(0) + "ln_mlp/", ts.tokens, cfg.backbone.ln_eps);
    dseg::ExpertInputs in{normed, ad::normalize_rows(ts.tokens, cfg.backbone.ln_eps),
                          p(backbone::layer_prefix(0) + "ln_mlp/gamma"), ts.batch, ts.tokens_per_item};
    std::vector<Matrix> out;
    for (int e = 0; e < 3; ++e) {
      const Matrix pr = store.get(dseg::prompt_name(e)).replicate(2, 1);
      out.push_back(dseg::expert_forward(p, cfg.dseg, cfg.backbone, e, 0, in, t.constant(pr)).value());
    }
    return out;
  };
  const auto base = deltas(ps);
  ParamStore bumped = ps;
  bumped.mutable_get(dseg::expert_prefix(1, 0) + "alpha")(0, 0) = 0.9;
  const auto after = deltas(bumped);
  EXPECT_EQ(base[0], after[0]);
  EXPECT_EQ(base[2], after[2]);
  EXPECT_NE(base[1], after[1]);
  set_alphas(bumped, 0.0);
  for (const auto& d : deltas(bumped)) EXPECT_TRUE(d.isZero(0.0));
}

INSTANTIATE_TEST_SUITE_P(All, Strategies,
                         ::testing::Values(dseg::DILStrategy::kAffine, dseg::DILStrategy::kAffineBias,
                                           dseg::DILStrategy::kCrossAttention),
                         [](const auto& info) { return dseg::to_string(info.param); });

TEST(Model, IdenticalExpertsGiveIdenticalDeltas) {
  const auto cfg = tiny_model();
  ParamStore ps = init_model(cfg, 14);
  set_alphas(ps, 0.5);
  for (const auto& n : ps.names()) {
    const std::string e0 = dseg::expert_prefix(0, 0);
    if (n.starts_with(e0)) ps.set(dseg::expert_prefix(2, 0) + n.substr(e0.size()), ps.get(n));
  }
  ps.set(dseg::prompt_name(2), ps.get(dseg::prompt_name(0)));
  Rng rng(14);
  const Matrix imgs = random_images(rng, 1, 16);
  ad::Tape t;
  Binding p(t, ps, no_params());
  const auto ts = backbone::patch_embed(p, cfg.backbone, imgs);
  ad::Var normed = backbone::layer_norm(p, backbone::layer_prefix(0) + "ln_mlp/", ts.tokens, cfg.backbone.ln_eps);
  dseg::ExpertInputs in{normed, ad::normalize_rows(ts.tokens, cfg.backbone.ln_eps),
                        p(backbone::layer_prefix(0) + "ln_mlp/gamma"), 1, ts.tokens_per_item};
  const auto a = dseg::expert_forward(p, cfg.dseg, cfg.backbone, 0, 0, in, p(dseg::prompt_name(0))).value();
  const auto b = dseg::expert_forward(p, cfg.dseg, cfg.backbone, 2, 0, in, p(dseg::prompt_name(2))).value();
  EXPECT_EQ(a, b);
}

TEST(Model, PredictIsDeterministicProbability) {
  const auto cfg = tiny_model();
  const ParamStore ps = init_model(cfg, 15);
  EXPECT_EQ(ps.digest(), init_model(cfg, 15).digest());
  EXPECT_NE(ps.digest(), init_model(cfg, 16).digest());
  Rng rng(15);
  const Matrix imgs = random_images(rng, 5, 16);
  const auto ctx = context_for(cfg, std::vector<int>{0, 1, 2, 0, 1});
  const auto a = predict(ps, cfg, imgs, &ctx);
  const auto b = predict(ps, cfg, imgs, &ctx);
  EXPECT_EQ(a, b);
  for (double v : a) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(cfg.expert_of(1), 1);
  EXPECT_EQ(cfg.expert_of(7), -1);
}

TEST(Model, MaskedEmbeddingLeavesOtherTokensBitIdentical) {
  const auto cfg = tiny_model();
  const ParamStore ps = init_model(cfg, 17);
  Rng rng(17);
  const Matrix imgs = random_images(rng, 2, 16);
  const std::vector<Eigen::Index> rows = {3, 20};
  ad::Tape t;
  Binding p(t, ps, no_params());
  const Matrix plain = backbone::patch_embed(p, cfg.backbone, imgs).tokens.value();
  const Matrix masked = backbone::patch_embed(p, cfg.backbone, imgs, rows).tokens.value();
  const int np = cfg.backbone.n_patches();
  for (Eigen::Index r = 0; r < plain.rows(); ++r) {
    const Eigen::Index item = r / (np + 1), pos = r % (np + 1);
    const bool is_masked = pos > 0 && std::find(rows.begin(), rows.end(), item * np + pos - 1) != rows.end();
    EXPECT_EQ(plain.row(r) == masked.row(r), !is_masked) << "row " << r;
  }
}

}  // namespace
}  // namespace gmdf
