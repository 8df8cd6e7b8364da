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

#include "gmdf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "gmdf/image.hpp"

namespace gmdf::bench {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_both_classes(const ScoreSet& s) {
  if (s.scores.size() != s.labels.size()) throw std::invalid_argument("score set: scores/labels size mismatch");
  bool real = false, fake = false;
  for (int l : s.labels) {
    if (l == 1) real = true;
    else if (l == 0) fake = true;
    else throw std::invalid_argument("score set: label outside {0,1}");
  }
  if (!real || !fake) throw std::invalid_argument("score set: both classes are required");
}

}  // namespace

std::vector<RocPoint> roc(const ScoreSet& s) {
  require_both_classes(s);
  std::vector<std::size_t> order(s.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] < s.scores[b]; });
  double n_real = 0, n_fake = 0;
  for (int l : s.labels) (l == 1 ? n_real : n_fake) += 1.0;
  std::vector<RocPoint> pts;
  pts.push_back({-kInf, 1.0, 0.0});
  double reals_below = 0, fakes_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = s.scores[order[i]];
    pts.push_back({t, (n_fake - fakes_below) / n_fake, reals_below / n_real});
    while (i < order.size() && s.scores[order[i]] == t) {
      (s.labels[order[i]] == 1 ? reals_below : fakes_below) += 1.0;
      ++i;
    }
  }
  pts.push_back({kInf, 0.0, 1.0});
  return pts;
}

double auc(const ScoreSet& s) {
  const auto pts = roc(s);
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double dx = pts[i].far - pts[i + 1].far;
    a += dx * ((1.0 - pts[i].frr) + (1.0 - pts[i + 1].frr)) / 2.0;
  }
  return a;
}

EerPoint eer(const ScoreSet& s) {
  const auto pts = roc(s);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double d0 = pts[i].far - pts[i].frr;
    const double d1 = pts[i + 1].far - pts[i + 1].frr;
    if (d0 == 0.0) return {pts[i].far, pts[i].far, pts[i].frr, pts[i].threshold};
    if (d0 > 0.0 && d1 <= 0.0) {
      if (d1 == 0.0) return {pts[i + 1].far, pts[i + 1].far, pts[i + 1].frr, pts[i + 1].threshold};
      const double t = d0 / (d0 - d1);
      const double far = pts[i].far + t * (pts[i + 1].far - pts[i].far);
      const double frr = pts[i].frr + t * (pts[i + 1].frr - pts[i].frr);
      double th;
      if (std::isinf(pts[i].threshold)) th = pts[i + 1].threshold;
      else if (std::isinf(pts[i + 1].threshold)) th = pts[i].threshold;
      else th = pts[i].threshold + t * (pts[i + 1].threshold - pts[i].threshold);
      return {(far + frr) / 2.0, far, frr, th};
    }
  }
  throw std::logic_error("eer: no FAR/FRR crossing");
}

std::pair<double, double> rates_at(const ScoreSet& s, double threshold) {
  require_both_classes(s);
  double n_real = 0, n_fake = 0, fa = 0, fr = 0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (s.labels[i] == 1) {
      n_real += 1;
      if (s.scores[i] < threshold) fr += 1;
    } else {
      n_fake += 1;
      if (s.scores[i] >= threshold) fa += 1;
    }
  }
  return {fa / n_fake, fr / n_real};
}

double prior_weighted_error(double prior_real, double far, double frr) {
  if (!(prior_real >= 0.0 && prior_real <= 1.0)) throw std::invalid_argument("prior_real must be in [0, 1]");
  return prior_real * frr + (1.0 - prior_real) * far;
}

MeerResult m_eer(std::span<const ScoreSet> sets, std::span<const double> priors, Threshold mode) {
  if (sets.empty()) throw std::invalid_argument("m_eer: no domains");
  if (sets.size() != priors.size()) throw std::invalid_argument("m_eer: one prior per domain required");
  for (double p : priors) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("m_eer: prior outside [0, 1]");
  }
  MeerResult r;
  double global_t = 0.0;
  if (mode == Threshold::kGlobal) {
    ScoreSet pooled;
    for (const auto& s : sets) {
      pooled.scores.insert(pooled.scores.end(), s.scores.begin(), s.scores.end());
      pooled.labels.insert(pooled.labels.end(), s.labels.begin(), s.labels.end());
    }
    global_t = eer(pooled).threshold;
  }
  for (std::size_t i = 0; i < sets.size(); ++i) {
    double far, frr;
    if (mode == Threshold::kGlobal) {
      std::tie(far, frr) = rates_at(sets[i], global_t);
    } else {
      const EerPoint e = eer(sets[i]);
      far = e.far;
      frr = e.frr;
    }
    r.per_domain.push_back(prior_weighted_error(priors[i], far, frr));
  }
  r.m_eer = *std::max_element(r.per_domain.begin(), r.per_domain.end());
  return r;
}

std::string degradation_name(std::optional<syndata::DegradationKind> d) {
  if (!d) return "none";
  return syndata::to_string(d->kind) + "@" + std::to_string(d->severity);
}

ScoreSet score_domain(const ParamStore& params, const ModelConfig& model, const DatasetManifest& manifest,
                      std::optional<syndata::DegradationKind> degradation) {
  std::vector<Sample> samples = load_samples(manifest, model.backbone.image_size);
  if (degradation) {
    for (auto& s : samples) {
      const Image img = from_bytes(s.image, s.size, s.size);
      s.image = to_bytes(syndata::degrade(img, *degradation));
    }
  }
  ScoreSet out;
  out.domain_id = manifest.domain_id;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    std::vector<const Sample*> chunk;
    for (std::size_t i = start; i < std::min(samples.size(), start + kChunk); ++i) chunk.push_back(&samples[i]);
    const Batch b = make_batch(chunk);
    std::vector<double> p;
    if (model.experts) {
      const DomainContext ctx = context_for(model, b.domain_ids);
      p = predict(params, model, b.images, &ctx);
    } else {
      p = predict(params, model, b.images, nullptr);
    }
    out.scores.insert(out.scores.end(), p.begin(), p.end());
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  }
  return out;
}

MetricsReport evaluate(const ParamStore& params, const ModelConfig& model, const std::vector<DatasetManifest>& manifests,
                       std::optional<syndata::DegradationKind> degradation, Threshold mode) {
  if (manifests.empty()) throw ConfigError("evaluate: no domains to evaluate");
  MetricsReport r;
  r.degradation = degradation_name(degradation);
  std::vector<ScoreSet> sets;
  std::vector<double> priors;
  for (const auto& m : manifests) {
    ScoreSet s = score_domain(params, model, m, degradation);
    DomainMetrics d;
    d.name = m.domain_name;
    d.domain_id = m.domain_id;
    d.n = static_cast<int>(s.scores.size());
    d.prior_real = m.prior_real;
    int correct = 0;
    for (std::size_t i = 0; i < s.scores.size(); ++i) correct += ((s.scores[i] >= 0.5) == (s.labels[i] == 1)) ? 1 : 0;
    d.acc = static_cast<double>(correct) / static_cast<double>(d.n);
    d.auc = auc(s);
    const EerPoint e = eer(s);
    d.eer = e.eer;
    d.far_at_eer = e.far;
    d.frr_at_eer = e.frr;
    d.roc = roc(s);
    r.domains.push_back(std::move(d));
    priors.push_back(m.prior_real);
    sets.push_back(std::move(s));
  }
  const MeerResult mr = m_eer(sets, priors, mode);
  for (std::size_t i = 0; i < r.domains.size(); ++i) r.domains[i].m = mr.per_domain[i];
  r.m_eer = mr.m_eer;
  return r;
}

MetricsReport evaluate(const std::filesystem::path& checkpoint_dir, const std::vector<DatasetManifest>& manifests,
                       std::optional<syndata::DegradationKind> degradation) {
  const meta::Checkpoint c = meta::load_checkpoint(checkpoint_dir);
  MetricsReport r = evaluate(c.params, c.model, manifests, degradation, c.config.threshold);
  r.config_digest = c.meta.at("config_digest").get<std::string>();
  r.seed = c.config.seed;
  return r;
}

Json to_json(const MetricsReport& r) {
  Json domains = Json::object();
  Json order = Json::array();
  double auc_sum = 0.0;
  for (const auto& d : r.domains) {
    order.push_back(d.name);
    auc_sum += d.auc;
    domains[d.name] = {{"domain_id", d.domain_id}, {"n", d.n},     {"prior_real", d.prior_real},
                       {"acc", d.acc},             {"auc", d.auc}, {"eer", d.eer},
                       {"far_at_eer", d.far_at_eer}, {"frr_at_eer", d.frr_at_eer}, {"m_i", d.m}};
  }
  return {{"config_digest", r.config_digest},
          {"seed", r.seed},
          {"degradation", r.degradation},
          {"domain_order", order},
          {"domains", domains},
          {"aggregate", {{"m_eer", r.m_eer}, {"mean_auc", r.domains.empty() ? 0.0 : auc_sum / r.domains.size()}}}};
}

MetricsReport report_from_json(const Json& j) {
  MetricsReport r;
  try {
    r.config_digest = j.at("config_digest").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.degradation = j.at("degradation").get<std::string>();
    r.m_eer = j.at("aggregate").at("m_eer").get<double>();
    for (const auto& name : j.at("domain_order")) {
      const Json& d = j.at("domains").at(name.get<std::string>());
      DomainMetrics m;
      m.name = name.get<std::string>();
      m.domain_id = d.at("domain_id").get<int>();
      m.n = d.at("n").get<int>();
      m.prior_real = d.at("prior_real").get<double>();
      m.acc = d.at("acc").get<double>();
      m.auc = d.at("auc").get<double>();
      m.eer = d.at("eer").get<double>();
      m.far_at_eer = d.at("far_at_eer").get<double>();
      m.frr_at_eer = d.at("frr_at_eer").get<double>();
      m.m = d.at("m_i").get<double>();
      r.domains.push_back(std::move(m));
    }
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_report(const std::filesystem::path& dir, const MetricsReport& r) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "report.json", to_json(r));
  std::ofstream csv(dir / "report.csv", std::ios::trunc);
  csv << "config_digest,degradation,domain,domain_id,n,prior_real,acc,auc,eer,far_at_eer,frr_at_eer,m_i,m_eer\n";
  for (const auto& d : r.domains) {
    csv << r.config_digest << "," << r.degradation << "," << d.name << "," << d.domain_id << "," << d.n << ","
        << num(d.prior_real) << "," << num(d.acc) << "," << num(d.auc) << "," << num(d.eer) << "," << num(d.far_at_eer)
        << "," << num(d.frr_at_eer) << "," << num(d.m) << "," << num(r.m_eer) << "\n";
  }
  for (const auto& d : r.domains) {
    std::ofstream roc_csv(dir / ("roc_" + d.name + ".csv"), std::ios::trunc);
    roc_csv << "config_digest,threshold,far,frr\n";
    for (const auto& p : d.roc) roc_csv << r.config_digest << "," << num(p.threshold) << "," << num(p.far) << "," << num(p.frr) << "\n";
  }
}

std::vector<Variant> ablation_variants() {
  auto v = [](std::string label, bool meta_moe, bool da, bool mim) {
    Variant x;
    x.label = std::move(label);
    x.components = {meta_moe, da, mim};
    return x;
  };
  return {v("baseline", false, false, false), v("+DA", false, true, false),       v("+MIM", false, false, true),
          v("+Meta-MoE", true, false, false), v("DA+MIM", false, true, true),      v("DA+Meta-MoE", true, true, false),
          v("GM-DF (all)", true, true, true)};
}

std::vector<Variant> method_variants(const std::vector<Method>& methods, const std::string& single_domain) {
  std::vector<Variant> out;
  for (Method m : methods) {
    Variant v;
    v.label = to_string(m);
    v.method = m;
    (void)single_domain;
    out.push_back(v);
  }
  return out;
}

std::vector<Variant> mask_sweep_variants(const std::vector<double>& ratios) {
  std::vector<Variant> out;
  for (double r : ratios) {
    Variant v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "mask=%.2f", r);
    v.label = buf;
    v.mask_ratio = r;
    out.push_back(v);
  }
  return out;
}

std::vector<DatasetManifest> load_domains(const std::filesystem::path& data_root, const std::vector<std::string>& names) {
  std::vector<DatasetManifest> out;
  for (const auto& n : names) out.push_back(load_manifest(data_root / n / "manifest.csv"));
  return out;
}

namespace {

struct Job {
  std::size_t protocol;
  std::size_t variant;
  std::uint64_t seed;
};

RunResult run_job(const BenchmarkPlan& plan, const Job& job, const std::vector<DatasetManifest>& manifests) {
  const auto& [pname, pcfg] = plan.protocols[job.protocol];
  const Variant& v = plan.variants[job.variant];
  ExperimentConfig cfg = plan.base;
  cfg.seed = job.seed;
  cfg.protocol = pcfg;
  cfg.method = v.method;
  cfg.components = v.components;
  if (v.mask_ratio) cfg.mim.mask_ratio = *v.mask_ratio;
  return run_experiment(cfg, manifests, pname, v.label, plan.robustness_severity);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const std::vector<DatasetManifest>& manifests,
                         const std::string& protocol, const std::string& label, int robustness_severity) {
  ExperimentConfig cfg = config;
  const ProtocolSplit split = make_protocol(manifests, cfg.protocol.heldout, cfg.protocol.eval);
  if (cfg.method == Method::kSingleDomain && cfg.single_domain.empty()) cfg.single_domain = split.meta_train.front().domain_name;
  cfg.validate();
  const meta::Trainer t = meta::train(cfg, split);
  std::vector<DatasetManifest> eval_set{split.meta_test};
  eval_set.insert(eval_set.end(), split.eval_unseen.begin(), split.eval_unseen.end());
  RunResult r;
  r.protocol = protocol;
  r.variant = label;
  r.seed = cfg.seed;
  r.report = evaluate(t.params(), t.model_config(), eval_set, std::nullopt, cfg.threshold);
  r.report.config_digest = config_digest(cfg);
  r.report.seed = cfg.seed;
  r.heldout_auc = r.report.domains.front().auc;
  r.m_eer = r.report.m_eer;
  r.param_digest = t.params().digest();
  if (robustness_severity > 0) {
    for (auto kind : syndata::kAllDegradations) {
      MetricsReport rr = evaluate(t.params(), t.model_config(), eval_set,
                                  syndata::DegradationKind{kind, robustness_severity}, cfg.threshold);
      rr.config_digest = r.report.config_digest;
      rr.seed = cfg.seed;
      r.robustness.push_back(std::move(rr));
    }
  }
  return r;
}

BenchmarkResult run_benchmark(const BenchmarkPlan& plan) {
  if (plan.protocols.empty() || plan.variants.empty() || plan.seeds.empty()) {
    throw ConfigError("benchmark: protocols, variants and seeds must be non-empty");
  }
  std::vector<std::string> all_names;
  for (const auto& [name, p] : plan.protocols) {
    for (const auto& d : p.domains) {
      if (std::find(all_names.begin(), all_names.end(), d) == all_names.end()) all_names.push_back(d);
    }
  }
  const std::vector<DatasetManifest> loaded = load_domains(plan.base.data_root, all_names);
  std::vector<std::vector<DatasetManifest>> per_protocol;
  for (const auto& [name, p] : plan.protocols) {
    std::vector<DatasetManifest> ms;
    for (const auto& d : p.domains) ms.push_back(loaded[static_cast<std::size_t>(
        std::find(all_names.begin(), all_names.end(), d) - all_names.begin())]);
    per_protocol.push_back(std::move(ms));
  }

  std::vector<Job> jobs;
  for (std::size_t p = 0; p < plan.protocols.size(); ++p)
    for (std::size_t v = 0; v < plan.variants.size(); ++v)
      for (std::uint64_t s : plan.seeds) jobs.push_back({p, v, s});

  BenchmarkResult out;
  out.runs.resize(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        out.runs[i] = run_job(plan, jobs[i], per_protocol[jobs[i].protocol]);
        if (plan.verbose) {
          std::lock_guard<std::mutex> lock(log_mu);
          std::cerr << "[" << (i + 1) << "/" << jobs.size() << "] " << out.runs[i].protocol << " "
                    << out.runs[i].variant << " seed=" << out.runs[i].seed << " heldout_auc=" << out.runs[i].heldout_auc
                    << " m_eer=" << out.runs[i].m_eer << "\n";
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(plan.threads, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  out.rows = summarize(out.runs);
  Json digest_src = to_json(plan.base);
  Json seeds = Json::array();
  for (auto s : plan.seeds) seeds.push_back(s);
  digest_src["benchmark_seeds"] = seeds;
  out.config_digest = config_digest(digest_src);
  return out;
}

std::vector<BenchRow> summarize(const std::vector<RunResult>& runs) {
  std::vector<BenchRow> rows;
  std::vector<std::vector<const RunResult*>> groups;
  for (const auto& r : runs) {
    std::size_t g = 0;
    while (g < rows.size() && !(rows[g].protocol == r.protocol && rows[g].variant == r.variant)) ++g;
    if (g == rows.size()) {
      rows.push_back({r.protocol, r.variant});
      groups.emplace_back();
    }
    groups[g].push_back(&r);
  }
  auto stats = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
  };
  for (std::size_t g = 0; g < rows.size(); ++g) {
    std::vector<double> a, m;
    for (const auto* r : groups[g]) {
      a.push_back(r->heldout_auc);
      m.push_back(r->m_eer);
    }
    rows[g].seeds = static_cast<int>(a.size());
    std::tie(rows[g].auc_mean, rows[g].auc_std) = stats(a);
    std::tie(rows[g].meer_mean, rows[g].meer_std) = stats(m);
  }
  return rows;
}

Json to_json(const BenchmarkResult& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"protocol", row.protocol},   {"variant", row.variant},   {"seeds", row.seeds},
                    {"auc_mean", row.auc_mean},   {"auc_std", row.auc_std},   {"m_eer_mean", row.meer_mean},
                    {"m_eer_std", row.meer_std}});
  }
  Json runs = Json::array();
  for (const auto& run : r.runs) {
    Json rob = Json::array();
    for (const auto& rr : run.robustness) rob.push_back(to_json(rr));
    runs.push_back({{"protocol", run.protocol},
                    {"variant", run.variant},
                    {"seed", run.seed},
                    {"heldout_auc", run.heldout_auc},
                    {"m_eer", run.m_eer},
                    {"param_digest", run.param_digest},
                    {"report", to_json(run.report)},
                    {"robustness", rob}});
  }
  return {{"config_digest", r.config_digest}, {"rows", rows}, {"runs", runs}};
}

void write_benchmark(const std::filesystem::path& dir, const BenchmarkResult& r) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "benchmark.json", to_json(r));
  std::ofstream csv(dir / "benchmark.csv", std::ios::trunc);
  csv << "config_digest,protocol,variant,seeds,auc_mean,auc_std,m_eer_mean,m_eer_std\n";
  for (const auto& row : r.rows) {
    csv << r.config_digest << "," << row.protocol << "," << row.variant << "," << row.seeds << "," << num(row.auc_mean)
        << "," << num(row.auc_std) << "," << num(row.meer_mean) << "," << num(row.meer_std) << "\n";
  }
  bool any_rob = false;
  for (const auto& run : r.runs) any_rob = any_rob || !run.robustness.empty();
  if (any_rob) {
    std::ofstream rob(dir / "robustness.csv", std::ios::trunc);
    rob << "config_digest,protocol,variant,seed";
    for (auto k : syndata::kAllDegradations) rob << "," << syndata::to_string(k);
    rob << "\n";
    for (const auto& run : r.runs) {
      if (run.robustness.empty()) continue;
      rob << r.config_digest << "," << run.protocol << "," << run.variant << "," << run.seed;
      for (const auto& rr : run.robustness) rob << "," << num(rr.domains.front().auc);
      rob << "\n";
    }
  }
}

std::vector<std::string> check_assertions(const Json& report, const std::filesystem::path& assert_file) {
  std::ifstream is(assert_file);
  if (!is) throw ConfigError("cannot read assertion file: " + assert_file.string());
  std::vector<std::string> failed;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string path, op;
    double want = 0.0;
    if (!(ls >> path >> op >> want)) throw ConfigError("malformed assertion: " + line);
    std::string ptr;
    std::istringstream ps(path);
    std::string part;
    while (std::getline(ps, part, '.')) ptr += "/" + part;
    const Json::json_pointer jp(ptr);
    if (!report.contains(jp) || !report.at(jp).is_number()) {
      failed.push_back(line + " (no numeric value at " + path + ")");
      continue;
    }
    const double got = report.at(jp).get<double>();
    bool ok;
    if (op == "<") ok = got < want;
    else if (op == "<=") ok = got <= want;
    else if (op == ">") ok = got > want;
    else if (op == ">=") ok = got >= want;
    else if (op == "==") ok = got == want;
    else throw ConfigError("unknown assertion operator: " + op);
    if (!ok) failed.push_back(line + " (got " + num(got) + ")");
  }
  return failed;
}

std::string render_report(const MetricsReport& r, const MetricsReport* other) {
  std::ostringstream os;
  char buf[256];
  if (!other) {
    std::snprintf(buf, sizeof buf, "%-16s %6s %8s %8s %8s %8s %8s %8s\n", "domain", "n", "acc", "auc", "eer", "far", "frr",
                  "m_i");
    os << buf;
    for (const auto& d : r.domains) {
      std::snprintf(buf, sizeof buf, "%-16s %6d %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f\n", d.name.c_str(), d.n, d.acc, d.auc,
                    d.eer, d.far_at_eer, d.frr_at_eer, d.m);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "M_EER %.4f  (degradation: %s, config %s)\n", r.m_eer, r.degradation.c_str(),
                  r.config_digest.substr(0, 12).c_str());
    os << buf;
    return os.str();
  }
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s %8s %8s %8s\n", "domain", "auc_a", "auc_b", "d_auc", "m_a", "m_b", "d_m");
  os << buf;
  for (const auto& d : r.domains) {
    const DomainMetrics* o = nullptr;
    for (const auto& x : other->domains) {
      if (x.name == d.name) o = &x;
    }
    if (!o) {
      std::snprintf(buf, sizeof buf, "%-16s %8.4f %8s %8s %8.4f %8s %8s\n", d.name.c_str(), d.auc, "-", "-", d.m, "-", "-");
    } else {
      std::snprintf(buf, sizeof buf, "%-16s %8.4f %8.4f %+8.4f %8.4f %8.4f %+8.4f\n", d.name.c_str(), d.auc, o->auc,
                    o->auc - d.auc, d.m, o->m, o->m - d.m);
    }
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "M_EER %.4f -> %.4f (%+.4f)\n", r.m_eer, other->m_eer, other->m_eer - r.m_eer);
  os << buf;
  return os.str();
}

void plot_roc(const std::filesystem::path& path, const MetricsReport& r, int size) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(size) * size * 3, 255);
  auto put = [&](int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    const std::size_t k = (static_cast<std::size_t>(size - 1 - y) * size + x) * 3;
    for (int i = 0; i < 3; ++i) px[k + static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)];
  };
  auto line = [&](double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> c) {
    const int steps = size * 2;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      put(static_cast<int>(std::lround((x0 + t * (x1 - x0)) * (size - 1))),
          static_cast<int>(std::lround((y0 + t * (y1 - y0)) * (size - 1))), c);
    }
  };
  line(0, 0, 1, 1, {200, 200, 200});
  line(0, 0, 1, 0, {0, 0, 0});
  line(0, 0, 0, 1, {0, 0, 0});
  const std::array<std::array<std::uint8_t, 3>, 6> palette{{{214, 39, 40}, {31, 119, 180}, {44, 160, 44},
                                                             {255, 127, 14}, {148, 103, 189}, {140, 86, 75}}};
  for (std::size_t i = 0; i < r.domains.size(); ++i) {
    const auto& pts = r.domains[i].roc;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      line(pts[k].far, 1.0 - pts[k].frr, pts[k + 1].far, 1.0 - pts[k + 1].frr, palette[i % palette.size()]);
    }
  }
  write_png(path, px, size, size);
}

}  // namespace gmdf::bench
