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

// gmdf: data generation, training, evaluation, benchmarking and reports.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "gmdf/bench.hpp"
#include "gmdf/config.hpp"
#include "gmdf/core.hpp"
#include "gmdf/meta.hpp"
#include "gmdf/params.hpp"
#include "gmdf/selftest.hpp"
#include "gmdf/syndata.hpp"

namespace fs = std::filesystem;
using namespace gmdf;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitAssert = 4;

struct AssertionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int thread_cap() {
  const int hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("GMDF_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("GMDF_THREADS must be a positive integer, got '") + env + "'");
  }
  return hw;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::optional<syndata::DegradationKind> parse_degradation_arg(const std::string& s) {
  if (s.empty() || s == "none") return std::nullopt;
  syndata::DegradationKind d;
  const auto at = s.find(':');
  d.kind = syndata::parse_degradation(s.substr(0, at));
  if (at != std::string::npos) d.severity = std::stoi(s.substr(at + 1));
  if (d.severity < 1 || d.severity > 5) throw ConfigError("degradation severity must be in 1..5");
  return d;
}

std::string data_digest(const std::vector<DatasetManifest>& ms) {
  std::string bytes;
  for (const auto& m : ms) {
    bytes += format_manifest(m);
    for (const auto& e : m.entries) {
      std::ifstream is(m.root / e.relative_path, std::ios::binary);
      bytes.append(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }
  }
  return sha256_hex(bytes);
}

void enforce_assertions(const Json& report, const std::string& assert_file) {
  if (assert_file.empty()) return;
  const auto failed = bench::check_assertions(report, assert_file);
  for (const auto& f : failed) std::cerr << "assertion violated: " << f << "\n";
  if (!failed.empty()) throw AssertionFailure(std::to_string(failed.size()) + " assertion(s) violated");
}

int cmd_gen_data(const std::string& spec_path, const std::string& out, bool force, std::optional<std::uint64_t> seed) {
  Json j = read_json_file(spec_path);
  if (seed) j["seed"] = *seed;
  const DataSpec spec = parse_data_spec(j);
  const fs::path root(out);
  for (const auto& d : spec.domains) {
    if (fs::exists(root / d.domain_name) && !force) {
      throw ConfigError("output " + (root / d.domain_name).string() + " exists; pass --force to overwrite");
    }
  }
  std::vector<DatasetManifest> written;
  for (std::size_t i = 0; i < spec.domains.size(); ++i) {
    const auto& d = spec.domains[i];
    if (force) fs::remove_all(root / d.domain_name);
    written.push_back(syndata::gen_domain(d, static_cast<int>(i), root / d.domain_name));
    const auto& m = written.back();
    std::cout << m.domain_name << ": " << m.count_real() << " real, " << m.entries.size() - m.count_real()
              << " fake -> " << (root / d.domain_name / "manifest.csv").string() << "\n";
  }
  Json meta = to_json(spec);
  meta["data_digest"] = data_digest(written);
  meta["config_digest"] = config_digest(to_json(spec));
  write_json_file(root / "spec.json", meta);
  std::cout << "data digest " << meta["data_digest"].get<std::string>() << "\n";
  return 0;
}

ExperimentConfig load_experiment(const std::string& path, const std::string& strategy, std::optional<std::uint64_t> seed,
                                 const std::string& data_root) {
  Json j = read_json_file(path);
  ExperimentConfig cfg = parse_experiment(j);
  if (!strategy.empty()) cfg.dseg.strategy = dseg::parse_strategy(strategy);
  if (seed) cfg.seed = *seed;
  if (!data_root.empty()) cfg.data_root = data_root;
  cfg.validate();
  return cfg;
}

int cmd_train(const std::string& config, const std::string& out, const std::string& strategy,
              std::optional<std::uint64_t> seed, const std::string& data_root, bool resume, bool quiet) {
  const fs::path dir(out);
  if (resume) {
    const Json meta = read_json_file(dir / "checkpoint.json");
    const ExperimentConfig cfg = parse_experiment(meta.at("config"));
    const auto ms = bench::load_domains(cfg.data_root, cfg.protocol.domains);
    const ProtocolSplit split = make_protocol(ms, cfg.protocol.heldout, cfg.protocol.eval);
    meta::Trainer t = meta::Trainer::resume(dir, meta::load_train_data(meta::training_domains(cfg, split),
                                                                       cfg.backbone.image_size));
    t.set_verbose(!quiet);
    std::cerr << "resuming at iteration " << t.iteration() << " of " << t.total_iterations() << "\n";
    t.run();
    t.save(dir);
    std::cout << "checkpoint " << dir.string() << " iteration " << t.iteration() << " params "
              << t.params().digest() << "\n";
    return 0;
  }
  const ExperimentConfig cfg = load_experiment(config, strategy, seed, data_root);
  const auto ms = bench::load_domains(cfg.data_root, cfg.protocol.domains);
  const ProtocolSplit split = make_protocol(ms, cfg.protocol.heldout, cfg.protocol.eval);
  meta::Trainer t(cfg, meta::load_train_data(meta::training_domains(cfg, split), cfg.backbone.image_size));
  t.set_verbose(!quiet);
  t.set_checkpoint_dir(dir);
  if (t.tokenizer_report().collapsed) std::cerr << "warning: visual tokenizer collapsed to a single code\n";
  t.run();
  t.save(dir);
  std::cout << "checkpoint " << dir.string() << " iteration " << t.iteration() << " params " << t.params().digest()
            << " config " << config_digest(cfg) << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& out, const std::vector<std::string>& domains,
             const std::string& data_root, const std::string& degrade, const std::string& assert_file) {
  const meta::Checkpoint c = meta::load_checkpoint(checkpoint);
  std::vector<std::string> names = domains;
  if (names.empty()) {
    names.push_back(c.config.protocol.heldout);
    names.insert(names.end(), c.config.protocol.eval.begin(), c.config.protocol.eval.end());
  }
  const fs::path root = data_root.empty() ? c.config.data_root : fs::path(data_root);
  const auto ms = bench::load_domains(root, names);
  bench::MetricsReport r = bench::evaluate(c.params, c.model, ms, parse_degradation_arg(degrade), c.config.threshold);
  r.config_digest = c.meta.at("config_digest").get<std::string>();
  r.seed = c.config.seed;
  const fs::path dir = out.empty() ? fs::path(checkpoint) / "eval" : fs::path(out);
  bench::write_report(dir, r);
  std::cout << bench::render_report(r);
  std::cout << "report " << (dir / "report.json").string() << "\n";
  enforce_assertions(bench::to_json(r), assert_file);
  return 0;
}

std::vector<std::pair<std::string, ProtocolConfig>> load_protocols(const std::string& path, const ExperimentConfig& base) {
  std::vector<std::pair<std::string, ProtocolConfig>> out;
  if (path.empty()) {
    out.emplace_back("default", base.protocol);
    return out;
  }
  const Json j = read_json_file(path);
  if (!j.is_array()) throw ConfigError("protocols file: expected an array");
  for (const auto& p : j) {
    for (const auto& [k, v] : p.items()) {
      if (k != "name" && k != "domains" && k != "heldout" && k != "eval") throw ConfigError("protocols: unknown key " + k);
    }
    ProtocolConfig pc;
    try {
      pc.domains = p.at("domains").get<std::vector<std::string>>();
      pc.heldout = p.at("heldout").get<std::string>();
      if (p.contains("eval")) pc.eval = p.at("eval").get<std::vector<std::string>>();
      out.emplace_back(p.at("name").get<std::string>(), pc);
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("protocols: ") + e.what());
    }
  }
  return out;
}

int cmd_benchmark(const std::string& config, const std::string& out, const std::string& protocols,
                  const std::vector<std::string>& methods, bool ablate, bool mask_sweep, const std::string& seeds_arg,
                  int robustness, const std::string& data_root, const std::string& assert_file, bool quiet) {
  bench::BenchmarkPlan plan;
  plan.base = load_experiment(config, "", std::nullopt, data_root);
  plan.protocols = load_protocols(protocols, plan.base);
  if (ablate) {
    plan.variants = bench::ablation_variants();
  } else if (mask_sweep) {
    plan.variants = bench::mask_sweep_variants({0.2, 0.4, 0.6, 0.8});
  } else {
    std::vector<Method> ms;
    for (const auto& m : methods) ms.push_back(parse_method(m));
    plan.variants = bench::method_variants(ms, plan.base.single_domain);
  }
  for (const auto& s : split_list(seeds_arg)) plan.seeds.push_back(std::stoull(s));
  plan.robustness_severity = robustness;
  plan.threads = thread_cap();
  plan.verbose = !quiet;
  const bench::BenchmarkResult r = bench::run_benchmark(plan);
  bench::write_benchmark(out, r);
  std::printf("%-12s %-24s %5s %16s %16s\n", "protocol", "variant", "seeds", "auc", "m_eer");
  for (const auto& row : r.rows) {
    std::printf("%-12s %-24s %5d %7.4f +- %.4f %7.4f +- %.4f\n", row.protocol.c_str(), row.variant.c_str(), row.seeds,
                row.auc_mean, row.auc_std, row.meer_mean, row.meer_std);
  }
  std::cout << "benchmark " << (fs::path(out) / "benchmark.json").string() << "\n";
  enforce_assertions(bench::to_json(r), assert_file);
  return 0;
}

int cmd_report(const std::string& path, const std::string& compare, const std::string& plot, const std::string& assert_file) {
  const Json j = read_json_file(path);
  const bench::MetricsReport r = bench::report_from_json(j);
  if (compare.empty()) {
    std::cout << bench::render_report(r);
  } else {
    const bench::MetricsReport other = bench::report_from_json(read_json_file(compare));
    std::cout << bench::render_report(r, &other);
  }
  if (!plot.empty()) {
    // ROC points live next to the report in roc_<domain>.csv.
    bench::MetricsReport with_roc = r;
    const fs::path dir = fs::path(path).parent_path();
    for (auto& d : with_roc.domains) {
      std::ifstream is(dir / ("roc_" + d.name + ".csv"));
      if (!is) throw DataError("missing ROC points for domain " + d.name);
      std::string line;
      std::getline(is, line);
      while (std::getline(is, line)) {
        const auto f = split_list(line);
        if (f.size() != 4) throw DataError("malformed ROC row: " + line);
        d.roc.push_back({std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
      }
    }
    bench::plot_roc(plot, with_roc);
    std::cout << "plot " << plot << "\n";
  }
  enforce_assertions(j, assert_file);
  return 0;
}

int cmd_selftest(const std::string& work, const std::vector<int>& only, bool all) {
  selftest::Options opt;
  opt.work_dir = work;
  opt.only = only.empty() && !all ? selftest::fast_checks() : only;
  opt.threads = thread_cap();
  opt.log = &std::cerr;
  bool ok = true;
  for (const auto& r : selftest::run(opt)) {
    std::cout << selftest::format(r) << std::endl;
    ok = ok && r.pass;
  }
  return ok ? 0 : kExitAssert;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gmdf: multi-domain deepfake detection toolkit"};
  app.require_subcommand(1);

  std::string spec, out;
  bool force = false;
  std::optional<std::uint64_t> seed;
  auto* gen = app.add_subcommand("gen-data", "Generate synthetic multi-domain data from a spec");
  gen->add_option("--spec", spec, "data spec JSON")->required();
  gen->add_option("--out", out, "output directory")->required();
  gen->add_flag("--force", force, "overwrite existing domain directories");
  gen->add_option("--seed", seed, "override the spec root seed");

  std::string config, strategy, data_root, ckpt_out;
  bool resume = false, quiet = false;
  auto* train = app.add_subcommand("train", "Train one experiment");
  train->add_option("--config", config, "experiment config JSON");
  train->add_option("--out", ckpt_out, "checkpoint directory")->required();
  train->add_option("--strategy", strategy, "DIL strategy: affine|affine_bias|cross_attention");
  train->add_option("--seed", seed, "override the root seed");
  train->add_option("--data-root", data_root, "override the data root");
  train->add_flag("--resume", resume, "continue from the checkpoint in --out");
  train->add_flag("--quiet", quiet, "no progress output");

  std::string checkpoint, domains, degrade, assert_file, eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
  eval->add_option("--out", eval_out, "report directory (default <checkpoint>/eval)");
  eval->add_option("--domains", domains, "comma-separated domains (default: held-out and eval domains)");
  eval->add_option("--data-root", data_root, "override the data root");
  eval->add_option("--degrade", degrade, "kind[:severity], kind in compress|blur|contrast|saturate|pixelate");
  eval->add_option("--assert", assert_file, "assertion file; exit 4 when violated");

  std::string protocols, methods = "gmdf,merged_baseline", seeds = "0", bench_out;
  bool ablate = false, mask_sweep = false;
  int robustness = 0;
  auto* benchmark = app.add_subcommand("benchmark", "Train and evaluate methods over protocols and seeds");
  benchmark->add_option("--config", config, "base experiment config JSON")->required();
  benchmark->add_option("--out", bench_out, "output directory")->required();
  benchmark->add_option("--protocols", protocols, "protocol list JSON (default: the config's protocol)");
  benchmark->add_option("--methods", methods, "comma-separated methods")->capture_default_str();
  benchmark->add_flag("--ablate", ablate, "run the component ablation grid");
  benchmark->add_flag("--mask-sweep", mask_sweep, "sweep the mask ratio over 0.2, 0.4, 0.6, 0.8");
  benchmark->add_option("--seeds", seeds, "comma-separated seeds")->capture_default_str();
  benchmark->add_option("--robustness", robustness, "also evaluate every degradation at this severity (1..5)");
  benchmark->add_option("--data-root", data_root, "override the data root");
  benchmark->add_option("--assert", assert_file, "assertion file; exit 4 when violated");
  benchmark->add_flag("--quiet", quiet, "no progress output");

  std::string report_path, compare, plot;
  auto* report = app.add_subcommand("report", "Render a report JSON as a table");
  report->add_option("report", report_path, "report.json")->required();
  report->add_option("--compare", compare, "second report.json for a delta table");
  report->add_option("--plot", plot, "write ROC curves to this PNG");
  report->add_option("--assert", assert_file, "assertion file; exit 4 when violated");

  std::string work = "selftest_work";
  std::vector<int> only;
  bool all = false;
  auto* self = app.add_subcommand("selftest", "Run the oracle and invariant suite");
  self->add_option("--work", work, "scratch directory")->capture_default_str();
  self->add_option("--only", only, "check ids to run");
  self->add_flag("--all", all, "include the training-based checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(spec, out, force, seed);
    if (*train) {
      if (!resume && config.empty()) throw ConfigError("train: --config is required unless --resume is given");
      return cmd_train(config, ckpt_out, strategy, seed, data_root, resume, quiet);
    }
    if (*eval) return cmd_eval(checkpoint, eval_out, split_list(domains), data_root, degrade, assert_file);
    if (*benchmark) {
      if (robustness < 0 || robustness > 5) throw ConfigError("--robustness must be in 0..5");
      return cmd_benchmark(config, bench_out, protocols, split_list(methods), ablate, mask_sweep, seeds, robustness,
                           data_root, assert_file, quiet);
    }
    if (*report) return cmd_report(report_path, compare, plot, assert_file);
    if (*self) return cmd_selftest(work, only, all);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const AssertionFailure& e) {
    std::cerr << e.what() << "\n";
    return kExitAssert;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
