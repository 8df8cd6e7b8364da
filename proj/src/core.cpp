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

#include "gmdf/core.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace gmdf {

namespace {

std::string join_problems(const std::string& what, const std::vector<std::string>& problems) {
  std::string s = what;
  for (const auto& p : problems) s += "\n  - " + p;
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool split_pair(const std::string& line, std::string& a, std::string& b) {
  const auto comma = line.find(',');
  if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) return false;
  a = trim(line.substr(0, comma));
  b = trim(line.substr(comma + 1));
  return !a.empty() && !b.empty();
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoi(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size();
}

}  // namespace

DataError::DataError(const std::string& what, std::vector<std::string> problems)
    : std::runtime_error(join_problems(what, problems)), problems_(std::move(problems)) {}

std::size_t DatasetManifest::count_real() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const ManifestEntry& e) { return e.label == kLabelReal; }));
}

double DatasetManifest::compute_prior_real() const {
  if (entries.empty()) throw DataError("empty manifest");
  return static_cast<double>(count_real()) / static_cast<double>(entries.size());
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root) {
  DatasetManifest m;
  m.root = root;
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> problems;
  bool have_header = false;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::string a, b;
    if (!have_header) {
      int id = 0;
      if (!split_pair(t, a, b) || !parse_int(b, id) || id < 0) {
        throw DataError("malformed manifest header", {"line " + std::to_string(line_no) + ": '" + t + "'"});
      }
      m.domain_name = a;
      m.domain_id = id;
      have_header = true;
      continue;
    }
    int label = 0;
    if (!split_pair(t, a, b)) {
      problems.push_back("line " + std::to_string(line_no) + ": malformed row '" + t + "'");
      continue;
    }
    if (!parse_int(b, label) || (label != kLabelFake && label != kLabelReal)) {
      problems.push_back("line " + std::to_string(line_no) + ": label '" + b + "' not in {0,1}");
      continue;
    }
    m.entries.push_back({a, label});
  }
  if (!have_header) throw DataError("empty manifest");
  if (!problems.empty()) throw DataError("invalid manifest rows", problems);
  if (m.entries.empty()) throw DataError("empty manifest");
  m.prior_real = m.compute_prior_real();
  return m;
}

std::string format_manifest(const DatasetManifest& m) {
  std::string out = m.domain_name + "," + std::to_string(m.domain_id) + "\n";
  for (const auto& e : m.entries) out += e.relative_path + "," + std::to_string(e.label) + "\n";
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("missing manifest file: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  DatasetManifest m = parse_manifest(ss.str(), path.parent_path());
  std::vector<std::string> missing;
  for (const auto& e : m.entries) {
    if (!std::filesystem::is_regular_file(m.root / e.relative_path)) missing.push_back("missing image: " + e.relative_path);
  }
  if (!missing.empty()) throw DataError("manifest " + path.string() + " references missing files", missing);
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write manifest: " + path.string());
  os << format_manifest(m);
}

std::vector<Sample> load_samples(const DatasetManifest& m, int image_size) {
  std::vector<Sample> out;
  out.reserve(m.entries.size());
  std::vector<std::string> problems;
  for (const auto& e : m.entries) {
    int h = 0, w = 0;
    Sample s;
    try {
      s.image = read_png(m.root / e.relative_path, h, w);
    } catch (const std::exception& ex) {
      problems.push_back(ex.what());
      continue;
    }
    if (h != image_size || w != image_size) {
      problems.push_back(e.relative_path + ": size " + std::to_string(h) + "x" + std::to_string(w) +
                         " != " + std::to_string(image_size));
      continue;
    }
    s.size = image_size;
    s.label = e.label;
    s.domain_id = m.domain_id;
    s.sample_id = m.domain_name + "/" + e.relative_path;
    out.push_back(std::move(s));
  }
  if (!problems.empty()) throw DataError("cannot load samples of " + m.domain_name, problems);
  return out;
}

ProtocolSplit make_protocol(const std::vector<DatasetManifest>& manifests, const std::string& heldout_name,
                            const std::vector<std::string>& eval_names) {
  std::map<std::string, const DatasetManifest*> by_name;
  std::set<int> ids;
  for (const auto& m : manifests) {
    if (!by_name.emplace(m.domain_name, &m).second) throw ConfigError("duplicate domain name: " + m.domain_name);
    if (!ids.insert(m.domain_id).second) throw ConfigError("duplicate domain id: " + std::to_string(m.domain_id));
  }
  if (manifests.size() < 2) throw ConfigError("protocol needs at least 2 domains");
  if (!by_name.count(heldout_name)) throw ConfigError("unknown heldout domain: " + heldout_name);
  std::set<std::string> eval_set;
  for (const auto& n : eval_names) {
    if (!by_name.count(n)) throw ConfigError("unknown eval domain: " + n);
    if (n == heldout_name) throw ConfigError("domain '" + n + "' is both heldout and eval");
    if (!eval_set.insert(n).second) throw ConfigError("duplicate eval domain: " + n);
  }
  ProtocolSplit split;
  split.meta_test = *by_name.at(heldout_name);
  for (const auto& n : eval_names) split.eval_unseen.push_back(*by_name.at(n));
  for (const auto& m : manifests) {
    if (m.domain_name != heldout_name && !eval_set.count(m.domain_name)) split.meta_train.push_back(m);
  }
  if (split.meta_train.empty()) throw ConfigError("protocol leaves no meta-train domain");
  return split;
}

Batch make_batch(const std::vector<const Sample*>& samples) {
  if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
  Batch b;
  b.image_size = samples[0]->size;
  const auto dim = static_cast<Eigen::Index>(samples[0]->image.size());
  b.images.resize(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = *samples[i];
    if (static_cast<Eigen::Index>(s.image.size()) != dim) throw std::invalid_argument("make_batch: mixed image sizes");
    for (Eigen::Index k = 0; k < dim; ++k) b.images(static_cast<Eigen::Index>(i), k) = s.image[static_cast<std::size_t>(k)] / 255.0;
    b.labels.push_back(s.label);
    b.domain_ids.push_back(s.domain_id);
    b.sample_ids.push_back(s.sample_id);
  }
  return b;
}

BatchStream::BatchStream(std::vector<Sample> samples, int batch_size, std::uint64_t seed, bool balanced)
    : samples_(std::move(samples)), batch_size_(batch_size), balanced_(balanced), rng_(seed) {
  if (batch_size_ < 1) throw ConfigError("batch_size must be >= 1");
  if (static_cast<std::size_t>(batch_size_) > samples_.size()) {
    throw ConfigError("batch_size " + std::to_string(batch_size_) + " exceeds sample count " +
                      std::to_string(samples_.size()));
  }
  if (balanced_) {
    std::map<int, std::vector<std::size_t>> by_domain;
    for (std::size_t i = 0; i < samples_.size(); ++i) by_domain[samples_[i].domain_id].push_back(i);
    for (auto& [id, idx] : by_domain) groups_.push_back(std::move(idx));
  } else {
    groups_.emplace_back(samples_.size());
    for (std::size_t i = 0; i < samples_.size(); ++i) groups_[0][i] = i;
  }
  orders_.resize(groups_.size());
  cursors_.assign(groups_.size(), 0);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    orders_[g] = groups_[g];
    rng_.shuffle(orders_[g].begin(), orders_[g].end());
  }
}

const Sample* BatchStream::draw(std::size_t group) {
  if (cursors_[group] == orders_[group].size()) {
    orders_[group] = groups_[group];
    rng_.shuffle(orders_[group].begin(), orders_[group].end());
    cursors_[group] = 0;
  }
  return &samples_[orders_[group][cursors_[group]++]];
}

Batch BatchStream::next() {
  std::vector<const Sample*> picked;
  picked.reserve(static_cast<std::size_t>(batch_size_));
  const std::size_t n_groups = groups_.size();
  const std::size_t base = static_cast<std::size_t>(batch_size_) / n_groups;
  const std::size_t extra = static_cast<std::size_t>(batch_size_) % n_groups;
  for (std::size_t g = 0; g < n_groups; ++g) {
    // Leftover slots go to `extra` consecutive domains starting at rotation_.
    const std::size_t offset = (g + n_groups - rotation_ % n_groups) % n_groups;
    const std::size_t count = base + (offset < extra ? 1 : 0);
    for (std::size_t k = 0; k < count; ++k) picked.push_back(draw(g));
  }
  rotation_ += extra;
  return make_batch(picked);
}

std::vector<int> BatchStream::domain_ids() const {
  std::set<int> ids;
  for (const auto& s : samples_) ids.insert(s.domain_id);
  return {ids.begin(), ids.end()};
}

std::vector<Batch> batch_iter(const std::vector<DatasetManifest>& split_part, int batch_size, std::uint64_t seed,
                              bool balanced, int image_size) {
  std::vector<Sample> all;
  for (const auto& m : split_part) {
    auto s = load_samples(m, image_size);
    all.insert(all.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
  }
  BatchStream stream(std::move(all), batch_size, seed, balanced);
  std::vector<Batch> out;
  const std::size_t n = stream.batches_per_epoch();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(stream.next());
  return out;
}

}  // namespace gmdf
