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
#include <map>
#include <set>

#include "gmdf/core.hpp"
#include "test_util.hpp"

namespace gmdf {
namespace {

DatasetManifest manifest_with(const std::string& name, int id, int n_real, int n_fake) {
  DatasetManifest m;
  m.domain_name = name;
  m.domain_id = id;
  for (int i = 0; i < n_real; ++i) m.entries.push_back({"images/r" + std::to_string(i) + ".png", kLabelReal});
  for (int i = 0; i < n_fake; ++i) m.entries.push_back({"images/f" + std::to_string(i) + ".png", kLabelFake});
  m.prior_real = m.compute_prior_real();
  return m;
}

std::vector<Sample> fake_samples(int domain_id, int n, int size = 4) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.size = size;
    s.image.assign(static_cast<std::size_t>(size * size * 3), static_cast<std::uint8_t>((i * 7 + domain_id) % 256));
    s.label = i % 2;
    s.domain_id = domain_id;
    s.sample_id = std::to_string(domain_id) + "/" + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

TEST(Manifest, PriorCountsReals) {
  const auto m = parse_manifest(format_manifest(manifest_with("a", 0, 4, 6)));
  EXPECT_EQ(m.count_real(), 4u);
  EXPECT_DOUBLE_EQ(m.prior_real, 0.4);
  EXPECT_DOUBLE_EQ(m.compute_prior_real(), m.compute_prior_real());
}

TEST(Manifest, EmptyIsRejected) {
  try {
    parse_manifest("a,0\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "empty manifest");
  }
  EXPECT_THROW(parse_manifest(""), DataError);
}

TEST(Manifest, ToleratesCrlfAndBlankLines) {
  const auto m = parse_manifest("dom,3\r\n\r\n  images/x.png , 1 \r\nimages/y.png,0\r\n\n");
  EXPECT_EQ(m.domain_name, "dom");
  EXPECT_EQ(m.domain_id, 3);
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].relative_path, "images/x.png");
  EXPECT_EQ(m.entries[1].label, 0);
  EXPECT_EQ(format_manifest(m), "dom,3\nimages/x.png,1\nimages/y.png,0\n");
}

TEST(Manifest, ItemizesEveryBadRow) {
  try {
    parse_manifest("d,0\na.png,1\nb.png,2\nc.png\nd.png,0\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.problems().size(), 2u);
  }
}

TEST(Manifest, RoundTripMatchesCanonicalText) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::string text = "dom" + std::to_string(trial) + "," + std::to_string(trial) + "\r\n";
    std::string canon = "dom" + std::to_string(trial) + "," + std::to_string(trial) + "\n";
    const int n = 1 + static_cast<int>(rng.below(15));
    for (int i = 0; i < n; ++i) {
      const int label = static_cast<int>(rng.below(2));
      const std::string row = "img_" + std::to_string(rng.below(1000)) + ".png," + std::to_string(label);
      text += (rng.below(2) ? "  " : "") + row + (rng.below(2) ? "\r\n" : "\n");
      if (rng.below(3) == 0) text += "\n";
      canon += row + "\n";
    }
    EXPECT_EQ(format_manifest(parse_manifest(text)), canon);
  }
}

TEST(Manifest, LoadReportsMissingImages) {
  const auto dir = testing::scratch_dir("manifest_missing");
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir / "images");
  std::ofstream(dir / "images" / "r0.png") << "x";
  write_manifest(dir / "manifest.csv", manifest_with("a", 0, 2, 1));
  try {
    load_manifest(dir / "manifest.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.problems().size(), 2u);
  }
  EXPECT_THROW(load_manifest(dir / "nope.csv"), DataError);
}

TEST(Protocol, PartitionsDomains) {
  const std::vector<DatasetManifest> ms = {manifest_with("A", 0, 1, 1), manifest_with("B", 1, 1, 1),
                                           manifest_with("C", 2, 1, 1), manifest_with("D", 3, 1, 1)};
  const auto split = make_protocol(ms, "C", {"D"});
  ASSERT_EQ(split.meta_train.size(), 2u);
  EXPECT_EQ(split.meta_train[0].domain_name, "A");
  EXPECT_EQ(split.meta_train[1].domain_name, "B");
  EXPECT_EQ(split.meta_test.domain_name, "C");
  ASSERT_EQ(split.eval_unseen.size(), 1u);
  EXPECT_EQ(split.eval_unseen[0].domain_name, "D");
}

TEST(Protocol, FiveDomainSplitSizes) {
  std::vector<DatasetManifest> ms;
  for (int i = 0; i < 5; ++i) ms.push_back(manifest_with(std::string(1, static_cast<char>('A' + i)), i, 1, 1));
  const auto split = make_protocol(ms, "D", {"E"});
  EXPECT_EQ(split.meta_train.size(), 3u);
  EXPECT_EQ(split.eval_unseen.size(), 1u);
}

TEST(Protocol, Errors) {
  const std::vector<DatasetManifest> ms = {manifest_with("A", 0, 1, 1), manifest_with("B", 1, 1, 1),
                                           manifest_with("C", 2, 1, 1)};
  EXPECT_THROW(make_protocol(ms, "C", {"C"}), ConfigError);
  EXPECT_THROW(make_protocol(ms, "Z", {}), ConfigError);
  EXPECT_THROW(make_protocol(ms, "A", {"Q"}), ConfigError);
  EXPECT_THROW(make_protocol(ms, "A", {"B", "C"}), ConfigError);
  EXPECT_THROW(make_protocol({ms[0]}, "A", {}), ConfigError);
}

TEST(Batching, BalancedTwoDomains) {
  auto samples = fake_samples(0, 100);
  auto more = fake_samples(1, 100);
  samples.insert(samples.end(), more.begin(), more.end());
  BatchStream stream(samples, 32, 5, true);
  for (int b = 0; b < 6; ++b) {
    const Batch batch = stream.next();
    ASSERT_EQ(batch.size(), 32u);
    EXPECT_EQ(std::count(batch.domain_ids.begin(), batch.domain_ids.end(), 0), 16);
    EXPECT_EQ(batch.images.rows(), 32);
    EXPECT_GE(batch.images.minCoeff(), 0.0);
    EXPECT_LE(batch.images.maxCoeff(), 1.0);
  }
}

TEST(Batching, ThreeDomainCountsDifferByAtMostOne) {
  std::vector<Sample> samples;
  for (int d = 0; d < 3; ++d) {
    auto s = fake_samples(d, 60);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  BatchStream stream(samples, 32, 9, true);
  for (std::size_t b = 0; b < stream.batches_per_epoch(); ++b) {
    const Batch batch = stream.next();
    for (int d = 0; d < 3; ++d) {
      const auto c = std::count(batch.domain_ids.begin(), batch.domain_ids.end(), d);
      EXPECT_TRUE(c == 10 || c == 11) << "domain " << d << " count " << c;
    }
  }
}

TEST(Batching, SameSeedSameSequence) {
  auto samples = fake_samples(0, 40);
  auto more = fake_samples(1, 30);
  samples.insert(samples.end(), more.begin(), more.end());
  for (bool balanced : {true, false}) {
    BatchStream a(samples, 8, 3, balanced);
    BatchStream b(samples, 8, 3, balanced);
    BatchStream c(samples, 8, 4, balanced);
    bool any_diff = false;
    for (int i = 0; i < 20; ++i) {
      const Batch x = a.next();
      const Batch y = b.next();
      EXPECT_EQ(x.sample_ids, y.sample_ids);
      EXPECT_EQ(x.images, y.images);
      any_diff = any_diff || c.next().sample_ids != x.sample_ids;
    }
    EXPECT_TRUE(any_diff);
  }
}

TEST(Batching, NoRepeatsWithinADomainPass) {
  const auto samples = fake_samples(0, 24);
  BatchStream stream(samples, 8, 1, false);
  std::set<std::string> seen;
  for (int i = 0; i < 3; ++i)
    for (const auto& id : stream.next().sample_ids) EXPECT_TRUE(seen.insert(id).second) << id;
  EXPECT_EQ(seen.size(), 24u);
}

TEST(Batching, RejectsOversizedBatch) {
  EXPECT_THROW(BatchStream(fake_samples(0, 5), 6, 0, false), ConfigError);
  EXPECT_THROW(BatchStream(fake_samples(0, 5), 0, 0, false), ConfigError);
}

}  // namespace
}  // namespace gmdf
