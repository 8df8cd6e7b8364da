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

// Data model: manifests, protocol splits and deterministic batching.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmdf/autodiff.hpp"
#include "gmdf/image.hpp"
#include "gmdf/rng.hpp"

namespace gmdf {

inline constexpr int kLabelFake = 0;
inline constexpr int kLabelReal = 1;

/// Raised for malformed or inconsistent input data. `problems` itemizes every
/// offending entry found in one pass.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::vector<std::string> problems = {});
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Raised for invalid configuration (unknown names, bad values).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::string relative_path;
  int label = 0;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::string domain_name;
  int domain_id = 0;
  /// Directory the relative paths resolve against (the manifest's parent).
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  double prior_real = 0.0;

  std::size_t count_real() const;
  /// #real / #entries; throws on an empty manifest.
  double compute_prior_real() const;
};

/// Parses manifest text (header `name,id`, then `relative_path,label` rows).
/// Tolerates CRLF, surrounding blanks and blank lines; does not touch disk.
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root = {});
/// Canonical form: LF line endings, no padding, trailing newline.
std::string format_manifest(const DatasetManifest& m);

/// Reads and validates `path`; every referenced image must exist.
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);

struct Sample {
  std::vector<std::uint8_t> image;  // H x W x 3
  int size = 0;
  int label = 0;
  int domain_id = 0;
  std::string sample_id;
};

/// Loads every entry's PNG. Images must be `image_size` square.
std::vector<Sample> load_samples(const DatasetManifest& m, int image_size);

struct ProtocolSplit {
  std::vector<DatasetManifest> meta_train;
  DatasetManifest meta_test;
  std::vector<DatasetManifest> eval_unseen;
};

ProtocolSplit make_protocol(const std::vector<DatasetManifest>& manifests, const std::string& heldout_name,
                            const std::vector<std::string>& eval_names);

struct Batch {
  Matrix images;  // B x (H*W*3), values in [0,1]
  std::vector<int> labels;
  std::vector<int> domain_ids;
  std::vector<std::string> sample_ids;
  int image_size = 0;

  std::size_t size() const { return labels.size(); }
};

/// Packs samples (already loaded) into a normalized batch.
Batch make_batch(const std::vector<const Sample*>& samples);

/// Endless, seeded batch source. Balanced mode draws floor(B/D) per domain
/// and hands the B mod D leftovers to domains in rotating order, so counts
/// differ by at most one within a batch and even out across batches.
/// Each domain is sampled without replacement from its own shuffled order,
/// reshuffled on exhaustion.
class BatchStream {
 public:
  BatchStream(std::vector<Sample> samples, int batch_size, std::uint64_t seed, bool balanced);

  Batch next();
  /// Batches per epoch: floor(total samples / batch size).
  std::size_t batches_per_epoch() const { return samples_.size() / static_cast<std::size_t>(batch_size_); }
  const std::vector<Sample>& samples() const { return samples_; }
  std::vector<int> domain_ids() const;

 private:
  const Sample* draw(std::size_t group);

  std::vector<Sample> samples_;
  int batch_size_;
  bool balanced_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> groups_;  // per domain (or single pool)
  std::vector<std::vector<std::size_t>> orders_;
  std::vector<std::size_t> cursors_;
  std::size_t rotation_ = 0;
};

/// One epoch of batches over the given manifests.
std::vector<Batch> batch_iter(const std::vector<DatasetManifest>& split_part, int batch_size, std::uint64_t seed,
                              bool balanced, int image_size);

}  // namespace gmdf
