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

#include <fstream>

#include "gmdf/bench.hpp"
#include "test_util.hpp"

namespace gmdf::bench {
namespace {

ScoreSet hand_case() { return {{0.9, 0.8, 0.7, 0.4, 0.3, 0.2}, {1, 1, 0, 1, 0, 0}, 0}; }

ScoreSet random_set(Rng& rng, int n, bool ties) {
  ScoreSet s;
  for (int i = 0; i < n; ++i) {
    s.labels.push_back(static_cast<int>(rng.below(2)));
    s.scores.push_back(ties ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform());
  }
  s.labels[0] = 0;
  s.labels[1] = 1;
  return s;
}

double pairwise_auc(const ScoreSet& s) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.scores.size(); ++i)
    for (std::size_t j = 0; j < s.scores.size(); ++j)
      if (s.labels[i] == 1 && s.labels[j] == 0) {
        ++pairs;
        wins += s.scores[i] > s.scores[j] ? 1.0 : s.scores[i] == s.scores[j] ? 0.5 : 0.0;
      }
  return wins / static_cast<double>(pairs);
}

TEST(Roc, HandCase) {
  const auto s = hand_case();
  const auto [far, frr] = rates_at(s, 0.5);
  EXPECT_DOUBLE_EQ(far, 1.0 / 3);
  EXPECT_DOUBLE_EQ(frr, 1.0 / 3);
  EXPECT_NEAR(eer(s).eer, 1.0 / 3, 1e-12);
}

TEST(Roc, PerfectAndDegenerate) {
  const ScoreSet perfect{{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, 0};
  bool zero = false;
  for (const auto& p : roc(perfect)) zero = zero || (p.far == 0.0 && p.frr == 0.0);
  EXPECT_TRUE(zero);
  EXPECT_DOUBLE_EQ(auc(perfect), 1.0);
  EXPECT_DOUBLE_EQ(eer(perfect).eer, 0.0);

  const ScoreSet flat{{0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}, 0};
  for (const auto& p : roc(flat))
    EXPECT_TRUE((p.far == 1.0 && p.frr == 0.0) || (p.far == 0.0 && p.frr == 1.0));
  EXPECT_DOUBLE_EQ(auc(flat), 0.5);
}

TEST(Auc, MatchesPairwiseOracle) {
  Rng rng(1);
  for (int k = 0; k < 100; ++k) {
    const auto s = random_set(rng, 2 + static_cast<int>(rng.below(199)), k % 2 == 0);
    EXPECT_NEAR(auc(s), pairwise_auc(s), 1e-9);
  }
}

TEST(Auc, ComplementAndMonotoneInvariance) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto s = random_set(rng, 60, k % 2 == 0);
    ScoreSet flipped = s, warped = s;
    for (auto& v : flipped.scores) v = 1.0 - v;
    for (auto& v : warped.scores) v = std::exp(3.0 * v);
    EXPECT_NEAR(auc(s) + auc(flipped), 1.0, 1e-12);
    EXPECT_NEAR(auc(warped), auc(s), 1e-12);
    EXPECT_NEAR(eer(warped).eer, eer(s).eer, 1e-12);
  }
}

TEST(Eer, OverlappingGaussiansNearHalf) {
  Rng rng(3);
  ScoreSet s;
  for (int i = 0; i < 10000; ++i) {
    s.labels.push_back(i % 2);
    s.scores.push_back(rng.normal());
  }
  EXPECT_NEAR(eer(s).eer, 0.5, 0.02);
}

TEST(Meer, Arithmetic) {
  EXPECT_NEAR(prior_weighted_error(0.5, 0.1, 0.2), 0.15, 1e-15);
  EXPECT_DOUBLE_EQ(prior_weighted_error(1.0, 0.3, 0.2), 0.2);
  EXPECT_THROW(prior_weighted_error(1.5, 0.1, 0.1), std::invalid_argument);
}

TEST(Meer, MaxOverDomains) {
  Rng rng(4);
  std::vector<ScoreSet> sets;
  std::vector<double> priors;
  for (int d = 0; d < 3; ++d) {
    sets.push_back(random_set(rng, 80, false));
    sets.back().domain_id = d;
    priors.push_back(0.3 + 0.2 * d);
  }
  const auto r = m_eer(sets, priors);
  ASSERT_EQ(r.per_domain.size(), 3u);
  EXPECT_EQ(r.m_eer, *std::max_element(r.per_domain.begin(), r.per_domain.end()));
  for (std::size_t d = 0; d < 3; ++d) {
    const auto e = eer(sets[d]);
    EXPECT_NEAR(r.per_domain[d], prior_weighted_error(priors[d], e.far, e.frr), 1e-12);
  }
  // Permuting domains permutes the per-domain values and keeps the max.
  std::vector<ScoreSet> rev(sets.rbegin(), sets.rend());
  std::vector<double> rp(priors.rbegin(), priors.rend());
  EXPECT_EQ(m_eer(rev, rp).m_eer, r.m_eer);
  const auto single = m_eer(std::span<const ScoreSet>(sets.data(), 1), std::span<const double>(priors.data(), 1));
  EXPECT_EQ(single.m_eer, single.per_domain[0]);
}

TEST(Meer, GlobalThresholdMode) {
  Rng rng(5);
  std::vector<ScoreSet> sets = {random_set(rng, 50, false), random_set(rng, 50, false)};
  const std::vector<double> priors = {0.5, 0.5};
  const auto g = m_eer(sets, priors, Threshold::kGlobal);
  EXPECT_EQ(g.m_eer, std::max(g.per_domain[0], g.per_domain[1]));
}

// Three tiny balanced domains.
std::vector<DatasetManifest> domains() {
  static const std::vector<DatasetManifest> ms = [] {
    const auto dir = testing::scratch_dir("bench_domains");
    std::vector<DatasetManifest> out;
    for (int i = 0; i < 3; ++i) {
      syndata::DomainSpec d;
      d.domain_name = "d" + std::to_string(i);
      d.background_style = static_cast<syndata::BackgroundStyle>(i);
      d.forgery_method = static_cast<syndata::ForgeryMethod>(i);
      d.n_real = 40;
      d.n_fake = 40;
      d.seed = 900 + static_cast<std::uint64_t>(i);
      d.image_size = 16;
      out.push_back(syndata::gen_domain(d, i, dir / d.domain_name));
    }
    return out;
  }();
  return ms;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.protocol = {{"d0", "d1", "d2"}, "d2", {}};
  c.backbone.image_size = 16;
  c.backbone.patch_size = 4;
  c.backbone.embed_dim = 16;
  c.backbone.n_layers = 2;
  c.backbone.n_heads = 2;
  c.dseg.prompt_dim = 6;
  c.dseg.expert_hidden = 12;
  c.text.buckets = 64;
  c.text.table_dim = 8;
  c.text.hidden = 12;
  c.mim.tokenizer.codebook_size = 8;
  c.mim.tokenizer.epochs = 1;
  c.mim.tokenizer_patches = 256;
  c.meta.epochs = 1;
  c.meta.batches_per_epoch = 10;
  c.meta.batch_size = 8;
  return c;
}

TEST(Evaluate, RandomWeightsAreNearChance) {
  const auto ms = domains();
  const auto exp = tiny_experiment();
  const ModelConfig m = meta::build_model_config(exp, {"d0", "d1"}, {0, 1});
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = evaluate(init_model(m, seed), m, {ms[2]});
    mean += r.domains[0].auc / 10;
    EXPECT_EQ(r.m_eer, r.domains[0].m);
  }
  EXPECT_GE(mean, 0.4);
  EXPECT_LE(mean, 0.6);
}

TEST(Evaluate, ReportJsonRoundTripAndFiles) {
  const auto ms = domains();
  const auto exp = tiny_experiment();
  const ModelConfig m = meta::build_model_config(exp, {"d0", "d1"}, {0, 1});
  auto r = evaluate(init_model(m, 3), m, ms, syndata::DegradationKind{syndata::DegradationKindId::kBlur, 2});
  r.config_digest = "abc";
  EXPECT_EQ(r.degradation, degradation_name(syndata::DegradationKind{syndata::DegradationKindId::kBlur, 2}));
  double mx = 0.0;
  for (const auto& d : r.domains) mx = std::max(mx, d.m);
  EXPECT_EQ(r.m_eer, mx);
  const auto back = report_from_json(to_json(r));
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());

  const auto dir = testing::scratch_dir("bench_report");
  write_report(dir, r);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report.csv"));
  for (const auto& d : r.domains) EXPECT_TRUE(std::filesystem::exists(dir / ("roc_" + d.name + ".csv")));
  plot_roc(dir / "roc.png", r, 64);
  EXPECT_GT(std::filesystem::file_size(dir / "roc.png"), 0u);
  EXPECT_NE(render_report(r, &back).find("d0"), std::string::npos);
}

TEST(Assertions, DottedPathsAndOperators) {
  const Json j = Json::parse(R"({"aggregate": {"m_eer": 0.2, "mean_auc": 0.9}, "domains": {"d0": {"auc": 0.95}}})");
  const auto dir = testing::scratch_dir("assertions");
  std::ofstream(dir / "ok.txt") << "aggregate.mean_auc >= 0.9\ndomains.d0.auc > 0.9\n\naggregate.m_eer < 0.25\n";
  EXPECT_TRUE(check_assertions(j, dir / "ok.txt").empty());
  std::ofstream(dir / "bad.txt") << "aggregate.m_eer <= 0.1\ndomains.d0.auc == 0.95\n";
  const auto bad = check_assertions(j, dir / "bad.txt");
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_NE(bad[0].find("m_eer"), std::string::npos);
}

TEST(Benchmark, AblationRowsAndSummary) {
  const auto rows = ablation_variants();
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows.front().label, "baseline");
  EXPECT_FALSE(rows.front().components.da || rows.front().components.mim || rows.front().components.meta_moe);
  EXPECT_TRUE(rows.back().components.da && rows.back().components.mim && rows.back().components.meta_moe);
  EXPECT_EQ(mask_sweep_variants({0.2})[0].label, "mask=0.20");

  std::vector<RunResult> runs(3);
  const double aucs[] = {0.7, 0.8, 0.9};
  for (int i = 0; i < 3; ++i) {
    runs[static_cast<std::size_t>(i)].protocol = "p";
    runs[static_cast<std::size_t>(i)].variant = "v";
    runs[static_cast<std::size_t>(i)].seed = static_cast<std::uint64_t>(i);
    runs[static_cast<std::size_t>(i)].heldout_auc = aucs[i];
  }
  const auto s = summarize(runs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].seeds, 3);
  EXPECT_NEAR(s[0].auc_mean, 0.8, 1e-12);
  EXPECT_NEAR(s[0].auc_std, 0.1, 1e-12);
}

TEST(Benchmark, SmallGridIsDeterministic) {
  BenchmarkPlan plan;
  plan.base = tiny_experiment();
  plan.protocols = {{"p", plan.base.protocol}};
  plan.variants = method_variants({Method::kGmdf, Method::kMerged});
  plan.seeds = {0};
  const auto ms = domains();
  const auto dir = testing::scratch_dir("bench_grid");
  plan.base.data_root = dir.parent_path() / "gmdf_test_bench_domains";
  const auto a = run_benchmark(plan);
  const auto b = run_benchmark(plan);
  ASSERT_EQ(a.runs.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.runs[i].param_digest, b.runs[i].param_digest);
    EXPECT_EQ(a.runs[i].heldout_auc, b.runs[i].heldout_auc);
  }
  write_benchmark(dir, a);
  EXPECT_TRUE(std::filesystem::exists(dir / "benchmark.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "benchmark.csv"));
}

}  // namespace
}  // namespace gmdf::bench
