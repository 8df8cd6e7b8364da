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

// Parameter store, archives, RNG streams and optimizers.

#include <gtest/gtest.h>

#include <fstream>

#include "gmdf/optim.hpp"
#include "gmdf/params.hpp"
#include "gmdf/rng.hpp"
#include "test_util.hpp"

namespace gmdf {
namespace {

ParamStore sample_store(std::uint64_t seed) {
  Rng rng(seed);
  ParamStore s;
  s.set("a/w", testing::random_matrix(rng, 3, 4, 1.0));
  s.set("a/b", testing::random_matrix(rng, 1, 4, 1.0));
  s.set("z", testing::random_matrix(rng, 2, 2, 1.0));
  return s;
}

TEST(Rng, SameSeedSameStream) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(Rng::substream(5, "data").next_u64(), Rng::substream(5, "init").next_u64());
}

TEST(Rng, UniformAndBelowRanges) {
  Rng r(1);
  std::vector<int> hist(7, 0);
  double mean = 0.0;
  for (int i = 0; i < 70000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
    ++hist[r.below(7)];
  }
  EXPECT_NEAR(mean / 70000, 0.5, 0.01);
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Rng, NormalMoments) {
  Rng r(2);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, KnownHashes) {
  // Published FNV-1a 64 test vectors.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(ParamStore, SubsetMergeErase) {
  auto s = sample_store(1);
  const auto sub = s.subset("a/");
  EXPECT_EQ(sub.names(), (std::vector<std::string>{"a/b", "a/w"}));
  EXPECT_EQ(s.scalar_count(), 12u + 4u + 4u);
  s.erase("z");
  EXPECT_FALSE(s.contains("z"));
  ParamStore t;
  t.merge(s);
  EXPECT_EQ(t.digest(), s.digest());
  EXPECT_THROW(s.get("missing"), std::out_of_range);
}

TEST(ParamStore, DigestSensitivity) {
  const auto a = sample_store(1);
  auto b = sample_store(1);
  EXPECT_EQ(a.digest(), b.digest());
  EXPECT_EQ(a.digest().size(), 64u);
  b.mutable_get("z")(0, 0) = std::nextafter(b.get("z")(0, 0), 10.0);
  EXPECT_NE(a.digest(), b.digest());
  // Same bytes, different shape.
  ParamStore c, d;
  c.set("x", Matrix::Zero(2, 3));
  d.set("x", Matrix::Zero(3, 2));
  EXPECT_NE(c.digest(), d.digest());
}

TEST(ParamStore, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Archive, RoundTripIsBitExact) {
  const auto dir = testing::scratch_dir("archive");
  std::filesystem::create_directories(dir);
  const auto s = sample_store(3);
  write_archive(dir / "p.bin", s);
  const auto r = read_archive(dir / "p.bin");
  EXPECT_EQ(r.digest(), s.digest());
  for (const auto& [name, m] : s.arrays()) EXPECT_EQ(r.get(name), m);
}

TEST(Archive, RejectsGarbage) {
  const auto dir = testing::scratch_dir("archive_bad");
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "bad.bin", std::ios::binary);
    os << "NOTANARCHIVE";
  }
  EXPECT_ANY_THROW(read_archive(dir / "bad.bin"));
  EXPECT_ANY_THROW(read_archive(dir / "missing.bin"));
}

TEST(Binding, GradientsOnlyForTrainable) {
  const auto s = sample_store(4);
  ad::Tape t;
  Binding bind(t, s, params_with_prefix("a/"));
  // loss = sum(w) + 2 * sum(z)
  ad::Var loss = ad::add(ad::sum(bind("a/w")), ad::scale(ad::sum(bind("z")), 2.0));
  t.backward(loss);
  const auto g = bind.gradients();
  EXPECT_EQ(g.names(), (std::vector<std::string>{"a/w"}));
  EXPECT_TRUE(g.get("a/w").isApproxToConstant(1.0));
}

TEST(Optimizer, SgdStepIsExact) {
  auto p = sample_store(5);
  const auto before = p;
  auto g = sample_store(6);
  g.erase("z");
  Optimizer opt({OptimizerKind::kSgd, 0.1});
  opt.step(p, g);
  for (const auto& name : g.names()) EXPECT_EQ(p.get(name), (before.get(name) - 0.1 * g.get(name)).eval());
  EXPECT_EQ(p.get("z"), before.get("z"));
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Optimizer, FirstAdamStepIsLrTimesSign) {
  auto p = sample_store(7);
  const auto before = p;
  const auto g = sample_store(8);
  Optimizer opt({OptimizerKind::kAdam, 0.01});
  opt.step(p, g);
  for (const auto& name : g.names()) {
    const Matrix delta = p.get(name) - before.get(name);
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
      const double gi = g.get(name).data()[i];
      EXPECT_NEAR(delta.data()[i], -0.01 * (gi > 0 ? 1.0 : -1.0), 1e-8);
    }
  }
}

TEST(Optimizer, SaveLoadContinuesIdentically) {
  auto p1 = sample_store(9);
  auto p2 = p1;
  const auto g = sample_store(10);
  Optimizer a({OptimizerKind::kAdam, 0.01});
  a.step(p1, g);
  p2 = p1;
  ParamStore state;
  a.save(state, "optim/");
  Optimizer b({OptimizerKind::kAdam, 0.01});
  b.load(state, "optim/");
  EXPECT_EQ(b.steps(), 1);
  a.step(p1, g);
  b.step(p2, g);
  EXPECT_EQ(p1.digest(), p2.digest());
}

TEST(Optimizer, GlobalNorm) {
  ParamStore g;
  g.set("a", Matrix::Constant(1, 1, 3.0));
  g.set("b", Matrix::Constant(1, 1, 4.0));
  EXPECT_DOUBLE_EQ(global_norm(g), 5.0);
  EXPECT_EQ(parse_optimizer(to_string(OptimizerKind::kAdam)), OptimizerKind::kAdam);
}

}  // namespace
}  // namespace gmdf
