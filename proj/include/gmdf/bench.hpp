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

// Detection metrics (ROC, AUC, EER, prior-weighted M_EER), checkpoint
// evaluation, benchmark orchestration and report files.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gmdf/config.hpp"
#include "gmdf/core.hpp"
#include "gmdf/meta.hpp"
#include "gmdf/model.hpp"
#include "gmdf/syndata.hpp"

namespace gmdf::bench {

struct ScoreSet {
  std::vector<double> scores;  // P(real)
  std::vector<int> labels;     // 1 real, 0 fake
  int domain_id = 0;
};

struct RocPoint {
  double threshold;
  double far;  // fakes scored >= threshold
  double frr;  // reals scored < threshold
};

/// Thresholds at -inf, every distinct score (ascending) and +inf.
std::vector<RocPoint> roc(const ScoreSet& s);
/// Trapezoidal area under (FAR, 1 - FRR); ties count one half.
double auc(const ScoreSet& s);

struct EerPoint {
  double eer;
  double far;
  double frr;
  double threshold;
};
/// Linear interpolation between the adjacent thresholds where FAR - FRR
/// changes sign.
EerPoint eer(const ScoreSet& s);

/// FAR/FRR at a fixed threshold.
std::pair<double, double> rates_at(const ScoreSet& s, double threshold);

/// P_real * FRR + (1 - P_real) * FAR.
double prior_weighted_error(double prior_real, double far, double frr);

struct MeerResult {
  double m_eer;
  std::vector<double> per_domain;
};

/// Per-domain M at each domain's own EER point (or at one shared threshold),
/// aggregated by max.
MeerResult m_eer(std::span<const ScoreSet> sets, std::span<const double> priors, Threshold mode = Threshold::kPerDomain);

struct DomainMetrics {
  std::string name;
  int domain_id = 0;
  int n = 0;
  double prior_real = 0.0;
  double acc = 0.0;  // at threshold 0.5
  double auc = 0.0;
  double eer = 0.0;
  double far_at_eer = 0.0;
  double frr_at_eer = 0.0;
  double m = 0.0;
  std::vector<RocPoint> roc;
};

struct MetricsReport {
  std::vector<DomainMetrics> domains;
  double m_eer = 0.0;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string degradation = "none";
};

/// Scores every image of `manifest`, optionally degraded first.
ScoreSet score_domain(const ParamStore& params, const ModelConfig& model, const DatasetManifest& manifest,
                      std::optional<syndata::DegradationKind> degradation = {});

MetricsReport evaluate(const ParamStore& params, const ModelConfig& model, const std::vector<DatasetManifest>& manifests,
                       std::optional<syndata::DegradationKind> degradation = {}, Threshold mode = Threshold::kPerDomain);
MetricsReport evaluate(const std::filesystem::path& checkpoint_dir, const std::vector<DatasetManifest>& manifests,
                       std::optional<syndata::DegradationKind> degradation = {});

std::string degradation_name(std::optional<syndata::DegradationKind> d);

Json to_json(const MetricsReport& r);
MetricsReport report_from_json(const Json& j);
/// report.json, report.csv and roc_<domain>.csv in `dir`.
void write_report(const std::filesystem::path& dir, const MetricsReport& r);

/// One trained configuration of the benchmark grid.
struct RunResult {
  std::string protocol;
  std::string variant;  // method name or ablation row label
  std::uint64_t seed = 0;
  double heldout_auc = 0.0;
  double m_eer = 0.0;
  std::string param_digest;
  MetricsReport report;
  std::vector<MetricsReport> robustness;  // one per degradation when requested
};

struct BenchRow {
  std::string protocol;
  std::string variant;
  int seeds = 0;
  double auc_mean = 0.0;
  double auc_std = 0.0;
  double meer_mean = 0.0;
  double meer_std = 0.0;
};

struct Variant {
  std::string label;
  Method method = Method::kGmdf;
  Components components;
  std::optional<double> mask_ratio;
};

/// Rows of the ablation table: baseline, +DA, +MIM, +Meta-MoE, DA+MIM,
/// DA+Meta-MoE, all.
std::vector<Variant> ablation_variants();
std::vector<Variant> method_variants(const std::vector<Method>& methods, const std::string& single_domain = {});
std::vector<Variant> mask_sweep_variants(const std::vector<double>& ratios);

struct BenchmarkPlan {
  ExperimentConfig base;
  std::vector<std::pair<std::string, ProtocolConfig>> protocols;
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  /// Evaluate each run under every degradation at this severity (0 = off).
  int robustness_severity = 0;
  int threads = 1;
  bool verbose = false;
};

struct BenchmarkResult {
  std::vector<RunResult> runs;  // protocol-major, then variant, then seed
  std::vector<BenchRow> rows;
  std::string config_digest;
};

/// Trains one configuration on the protocol over `manifests` and evaluates
/// it on the held-out domain followed by the extra evaluation domains.
/// `robustness_severity` > 0 adds one degraded evaluation per kind.
RunResult run_experiment(const ExperimentConfig& cfg, const std::vector<DatasetManifest>& manifests,
                         const std::string& protocol, const std::string& label, int robustness_severity = 0);

/// Trains and evaluates every (protocol, variant, seed). Runs may execute
/// on `threads` workers; results are ordered independently of scheduling.
BenchmarkResult run_benchmark(const BenchmarkPlan& plan);

std::vector<BenchRow> summarize(const std::vector<RunResult>& runs);
Json to_json(const BenchmarkResult& r);
void write_benchmark(const std::filesystem::path& dir, const BenchmarkResult& r);

/// Loads manifests for the named domains under `data_root`.
std::vector<DatasetManifest> load_domains(const std::filesystem::path& data_root, const std::vector<std::string>& names);

/// Checks `path op number` lines (op in <, <=, >, >=, ==) against a report
/// JSON with dotted paths. Returns the violated lines.
std::vector<std::string> check_assertions(const Json& report, const std::filesystem::path& assert_file);

/// Fixed-width text table of a report; with `other`, per-domain deltas.
std::string render_report(const MetricsReport& r, const MetricsReport* other = nullptr);
/// ROC curves of every domain as a PNG.
void plot_roc(const std::filesystem::path& path, const MetricsReport& r, int size = 256);

}  // namespace gmdf::bench
