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

#include "gmdf/selftest.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "gmdf/align.hpp"
#include "gmdf/bench.hpp"
#include "gmdf/config.hpp"
#include "gmdf/meta.hpp"
#include "gmdf/mim.hpp"
#include "gmdf/model.hpp"
#include "gmdf/rng.hpp"
#include "gmdf/syndata.hpp"

namespace gmdf::selftest {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Four synthetic domains; the last one is held out.
const char* kDataSpec = R"({
  "seed": 2026,
  "domains": [
    {"domain_name": "alpha", "background_style": "flat_tint", "tint_rgb": [0.62, 0.48, 0.44],
     "blur_sigma": 0.0, "face_proxy_scale": 0.70, "forgery_method": "patch_swap",
     "n_real": 200, "n_fake": 200, "image_size": 32},
    {"domain_name": "bravo", "background_style": "gradient", "tint_rgb": [0.45, 0.55, 0.62],
     "blur_sigma": 0.6, "face_proxy_scale": 0.62, "forgery_method": "blend_boundary",
     "n_real": 200, "n_fake": 200, "image_size": 32},
    {"domain_name": "charlie", "background_style": "textured", "tint_rgb": [0.52, 0.60, 0.46],
     "blur_sigma": 0.3, "face_proxy_scale": 0.78, "forgery_method": "noise_texture",
     "n_real": 200, "n_fake": 200, "image_size": 32},
    {"domain_name": "delta", "background_style": "gradient", "tint_rgb": [0.58, 0.52, 0.56],
     "blur_sigma": 0.4, "face_proxy_scale": 0.68, "forgery_method": "freq_perturb",
     "n_real": 200, "n_fake": 200, "image_size": 32}
  ]
})";

const char* kExperiment = R"({
  "seed": 0,
  "method": "gmdf",
  "protocol": {"domains": ["alpha", "bravo", "charlie", "delta"], "heldout": "delta", "eval": []},
  "components": {"meta_moe": true, "da": true, "mim": true},
  "backbone": {"image_size": 32, "patch_size": 8, "embed_dim": 64, "n_layers": 4, "n_heads": 4, "mlp_ratio": 2.0},
  "dseg": {"strategy": "affine", "prompt_dim": 16, "expert_hidden": 32},
  "prompt_template": "P1",
  "mim": {"codebook_size": 64, "mask_ratio": 0.2, "mask_strategy": "random"},
  "meta": {"beta": 0.01, "delta": 0.001, "outer_optimizer": "adam", "epochs": 10, "batch_size": 32,
           "weights": {"sis": 1.0, "cls": 1.0, "mim": 1.0}}
})";

constexpr std::uint64_t kSeeds[] = {0, 1, 2, 3, 4};

Matrix random_psd(Rng& rng, int d, double ridge) {
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  Matrix s = a * a.transpose() / d;
  s.diagonal().array() += ridge;
  return 0.5 * (s + s.transpose());
}

// ---------------------------------------------------------------- check 1

CheckResult check_closed_form(Rng rng) {
  CheckResult r{1, "DA loss closed forms", true, "", 0.0, 10.0};
  double worst_diag = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int d = c < 20 ? 1 : 1 + static_cast<int>(rng.below(12));
    align::FeatureStats s, t;
    s.mu = RowVector(d);
    t.mu = RowVector(d);
    s.sigma = Matrix::Zero(d, d);
    t.sigma = Matrix::Zero(d, d);
    double oracle = 0.0;
    for (int i = 0; i < d; ++i) {
      s.mu(i) = rng.normal();
      t.mu(i) = rng.normal();
      const double a = 0.05 + 2.0 * rng.uniform();
      const double b = 0.05 + 2.0 * rng.uniform();
      s.sigma(i, i) = a;
      t.sigma(i, i) = b;
      oracle += (s.mu(i) - t.mu(i)) * (s.mu(i) - t.mu(i)) + (std::sqrt(a) - std::sqrt(b)) * (std::sqrt(a) - std::sqrt(b));
    }
    worst_diag = std::max(worst_diag, std::abs(align::da_loss(s, t) - oracle));
  }
  double worst_self = 0.0, worst_sqrt = 0.0;
  for (int c = 0; c < 30; ++c) {
    const int d = 2 + static_cast<int>(rng.below(30));
    align::FeatureStats s;
    s.mu = RowVector(d);
    for (int i = 0; i < d; ++i) s.mu(i) = rng.normal();
    s.sigma = random_psd(rng, d, 1e-3);
    worst_self = std::max(worst_self, align::da_loss(s, s));
    const Matrix a = random_psd(rng, d, c % 2 == 0 ? 1e-6 : 0.5);
    const Matrix root = align::matrix_sqrt_psd(a);
    worst_sqrt = std::max(worst_sqrt, (root * root - a).norm() / a.norm());
  }
  r.pass = worst_diag < 1e-6 && worst_self < 1e-8 && worst_sqrt < 1e-8;
  r.detail = "diag max err " + fmt("%.2e", worst_diag) + ", self " + fmt("%.2e", worst_self) + ", sqrt rel err " +
             fmt("%.2e", worst_sqrt);
  return r;
}

// ---------------------------------------------------------------- check 2

ModelConfig small_model(dseg::DILStrategy strategy) {
  ModelConfig m;
  m.backbone.image_size = 16;
  m.backbone.patch_size = 4;
  m.backbone.embed_dim = 16;
  m.backbone.n_layers = 2;
  m.backbone.n_heads = 2;
  m.dseg.strategy = strategy;
  m.dseg.n_experts = 3;
  m.dseg.prompt_dim = 6;
  m.dseg.expert_hidden = 12;
  m.dseg.cross_segments = 3;
  m.text.buckets = 64;
  m.text.table_dim = 8;
  m.text.hidden = 12;
  m.codebook_size = 10;
  m.expert_domains = {0, 1, 2};
  m.expert_names = {"a", "b", "c"};
  m.validate();
  return m;
}

// Gates and zero-initialized projections get random values so every expert
// path carries gradient.
void activate_experts(ParamStore& ps, Rng& rng) {
  for (const auto& name : ps.names()) {
    const bool gate = name.ends_with("/alpha");
    const bool proj = name.starts_with(dseg::kPrefix) && (name.ends_with("/wo") || name.ends_with("/bo"));
    if (!gate && !proj) continue;
    Matrix& m = ps.mutable_get(name);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gate ? 0.3 + 0.4 * rng.uniform() : 0.2 * rng.normal();
  }
}

struct GradCase {
  std::string loss;
  dseg::DILStrategy strategy;
};

double grad_case(const GradCase& gc, Rng& rng, int probes, int* probed) {
  const ModelConfig cfg = small_model(gc.strategy);
  ParamStore ps = init_model(cfg, rng.next_u64());
  activate_experts(ps, rng);
  const int batch = 24;
  const int np = cfg.backbone.n_patches();
  Matrix images(batch, cfg.backbone.image_size * cfg.backbone.image_size * 3);
  for (Eigen::Index i = 0; i < images.size(); ++i) images.data()[i] = rng.uniform();
  std::vector<int> labels(batch), domains(batch), targets(static_cast<std::size_t>(batch) * np);
  for (int i = 0; i < batch; ++i) {
    labels[static_cast<std::size_t>(i)] = i % 2;
    domains[static_cast<std::size_t>(i)] = i % 4 == 3 ? -1 : i % 3;
  }
  for (auto& t : targets) t = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.codebook_size)));
  std::vector<mim::MaskSet> masks;
  for (int i = 0; i < batch; ++i) masks.push_back(mim::sample_mask(np, 0.25, mim::MaskStrategy::kRandom, rng.next_u64()));
  const auto rows = mim::masked_rows(masks, np);
  Matrix src(40, cfg.backbone.embed_dim);
  for (Eigen::Index i = 0; i < src.size(); ++i) src.data()[i] = rng.normal();
  src.rowwise().normalize();
  const align::FeatureStats source = align::feature_stats(src);
  const DomainContext ctx = context_for(cfg, domains);

  auto loss = [&](const ParamStore& store, ParamStore* grads) {
    ad::Tape tape;
    Binding p(tape, store, all_params());
    const bool masked = gc.loss == "mim" || gc.loss == "total";
    const ForwardOut out = forward(p, cfg, images, &ctx, masked ? std::span<const Eigen::Index>(rows)
                                                                : std::span<const Eigen::Index>());
    ad::Var l_cls = align::cls_loss_from_logits(out.logits, labels);
    ad::Var l;
    if (gc.loss == "cls") {
      l = l_cls;
    } else if (gc.loss == "mim") {
      l = mim::mim_loss(mim_logits(p, out.patch_hidden), targets, masks, np);
    } else if (gc.loss == "sis") {
      l = align::da_loss(source, ad::l2_normalize_rows(out.pooled));
    } else {
      ad::Var l_sis = align::da_loss(source, ad::l2_normalize_rows(out.pooled));
      ad::Var l_mim = mim::mim_loss(mim_logits(p, out.patch_hidden), targets, masks, np);
      l = align::total_loss(l_sis, l_cls, l_mim);
    }
    if (grads) {
      tape.backward(l);
      *grads = p.gradients();
    }
    return l.scalar();
  };

  ParamStore grads;
  loss(ps, &grads);
  std::vector<std::pair<std::string, Eigen::Index>> coords;
  for (const auto& [name, g] : grads.arrays()) {
    for (Eigen::Index i = 0; i < g.size(); ++i) coords.emplace_back(name, i);
  }
  rng.shuffle(coords.begin(), coords.end());
  double worst = 0.0;
  // Five-point central stencil: O(h^4) truncation with a step large enough
  // to keep cancellation error small.
  const double h = 1e-4;
  for (int k = 0; k < probes && k < static_cast<int>(coords.size()); ++k) {
    const auto& [name, i] = coords[static_cast<std::size_t>(k)];
    auto at = [&](double offset) {
      ParamStore moved = ps;
      moved.mutable_get(name).data()[i] += offset;
      return loss(moved, nullptr);
    };
    const double fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
    const double an = grads.get(name).data()[i];
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
    if (rel > worst && std::getenv("GMDF_SELFTEST_DEBUG")) {
      std::cerr << name << "[" << i << "] analytic " << an << " fd " << fd << "\n";
    }
    worst = std::max(worst, rel);
    ++*probed;
  }
  return worst;
}

CheckResult check_gradients(Rng rng) {
  CheckResult r{2, "analytic vs finite-difference gradients", true, "", 0.0, 120.0};
  const std::vector<GradCase> cases = {{"cls", dseg::DILStrategy::kAffine},
                                       {"mim", dseg::DILStrategy::kAffine},
                                       {"sis", dseg::DILStrategy::kAffine},
                                       {"total", dseg::DILStrategy::kAffine},
                                       {"total", dseg::DILStrategy::kAffineBias},
                                       {"total", dseg::DILStrategy::kCrossAttention}};
  std::ostringstream os;
  for (const auto& gc : cases) {
    int probed = 0;
    const double worst = grad_case(gc, rng, 60, &probed);
    if (!(worst < 1e-4) || probed < 50) r.pass = false;
    os << "L_" << gc.loss << "/" << dseg::to_string(gc.strategy) << " " << fmt("%.1e", worst) << " (" << probed
       << ") ";
  }
  r.detail = "max rel err " + os.str();
  return r;
}

// ---------------------------------------------------------------- check 3

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

CheckResult check_zero_init(Rng rng) {
  CheckResult r{3, "zero-initialized experts reduce to the shared encoder", true, "", 0.0, 5.0};
  std::ostringstream os;
  for (auto strategy : {dseg::DILStrategy::kAffine, dseg::DILStrategy::kAffineBias, dseg::DILStrategy::kCrossAttention}) {
    ModelConfig cfg;
    cfg.dseg.strategy = strategy;
    cfg.dseg.n_experts = 3;
    cfg.expert_domains = {0, 1, 2};
    cfg.expert_names = {"a", "b", "c"};
    const ParamStore ps = init_model(cfg, rng.next_u64());
    ModelConfig shared_cfg = cfg;
    shared_cfg.experts = false;
    shared_cfg.expert_domains.clear();
    shared_cfg.expert_names.clear();
    const ParamStore shared_ps = ps.subset(meta::kThetaO);

    Matrix images(8, cfg.backbone.image_size * cfg.backbone.image_size * 3);
    for (Eigen::Index i = 0; i < images.size(); ++i) images.data()[i] = rng.uniform();
    const std::vector<int> domains = {0, 1, 2, -1, 2, 1, 0, -1};
    const DomainContext ctx = context_for(cfg, domains);

    ad::Tape t1, t2;
    Binding p1(t1, ps, no_params());
    Binding p2(t2, shared_ps, no_params());
    const ForwardOut with = forward(p1, cfg, images, &ctx);
    const ForwardOut alone = forward(p2, shared_cfg, images, nullptr);
    const bool ok = bit_equal(with.logits.value(), alone.logits.value()) &&
                    bit_equal(with.pooled.value(), alone.pooled.value()) &&
                    bit_equal(with.patch_hidden.value(), alone.patch_hidden.value());
    r.pass = r.pass && ok;
    os << dseg::to_string(strategy) << (ok ? " exact " : " DIFFERS ");
  }
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------- check 4

std::vector<DatasetManifest> small_domains(const std::filesystem::path& dir, int per_class) {
  std::vector<DatasetManifest> out;
  const char* names[] = {"d0", "d1", "d2"};
  const syndata::ForgeryMethod methods[] = {syndata::ForgeryMethod::kPatchSwap, syndata::ForgeryMethod::kBlendBoundary,
                                            syndata::ForgeryMethod::kNoiseTexture};
  for (int i = 0; i < 3; ++i) {
    syndata::DomainSpec d;
    d.domain_name = names[i];
    d.background_style = static_cast<syndata::BackgroundStyle>(i);
    d.tint_rgb = {0.45 + 0.08 * i, 0.5, 0.55 - 0.05 * i};
    d.forgery_method = methods[i];
    d.n_real = per_class;
    d.n_fake = per_class;
    d.seed = mix64(77 + static_cast<std::uint64_t>(i));
    std::filesystem::remove_all(dir / names[i]);
    out.push_back(syndata::gen_domain(d, i, dir / names[i]));
  }
  return out;
}

CheckResult check_meta_contracts(const Options& opt) {
  CheckResult r{4, "inner step touches only theta_E, outer step only theta_O", true, "", 0.0, 60.0};
  const auto ms = small_domains(opt.work_dir / "contracts", 24);
  ExperimentConfig cfg = parse_experiment(Json::parse(kExperiment));
  cfg.protocol = {{"d0", "d1", "d2"}, "d2", {}};
  cfg.backbone.embed_dim = 32;
  cfg.backbone.n_layers = 2;
  cfg.meta.epochs = 1;
  cfg.meta.batches_per_epoch = 50;
  cfg.meta.batch_size = 8;
  cfg.mim.tokenizer.epochs = 2;
  cfg.mim.tokenizer_patches = 512;
  const ProtocolSplit split = make_protocol(ms, "d2", {});
  // Two training domains would leave a single inner step; train on all three.
  std::vector<DatasetManifest> train = split.meta_train;
  train.push_back(split.meta_test);
  meta::Trainer t(cfg, meta::load_train_data(train, cfg.backbone.image_size));

  std::string e0, o0, e1, o1, prev_e, prev_o;
  long violations = 0, e_moved = 0, o_moved = 0, events = 0;
  t.set_hook([&](const meta::StepEvent& ev) {
    const std::string e = ev.params.subset(meta::kThetaE).digest();
    const std::string o = ev.params.subset(meta::kThetaO).digest();
    ++events;
    switch (ev.phase) {
      case meta::StepEvent::Phase::kBeforeInner:
        if (!prev_e.empty() && (e != prev_e || o != prev_o)) ++violations;
        e0 = e;
        o0 = o;
        break;
      case meta::StepEvent::Phase::kAfterInner:
        if (o != o0) ++violations;
        if (e != e0) ++e_moved;
        e1 = e;
        o1 = o;
        break;
      case meta::StepEvent::Phase::kAfterOuter:
        if (e != e1) ++violations;
        if (o != o1) ++o_moved;
        prev_e = e;
        prev_o = o;
        break;
    }
  });
  t.run();
  const long iters = t.iteration();
  r.pass = violations == 0 && iters == 50 && e_moved == iters && o_moved == iters && events == 3 * iters;
  r.detail = std::to_string(iters) + " iterations, " + std::to_string(violations) + " violations, theta_E moved " +
             std::to_string(e_moved) + "x, theta_O moved " + std::to_string(o_moved) + "x";
  return r;
}

// ---------------------------------------------------------------- check 5

double pairwise_auc(const bench::ScoreSet& s) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.scores.size(); ++j) {
      if (s.labels[j] != 0) continue;
      den += 1.0;
      if (s.scores[i] > s.scores[j]) num += 1.0;
      else if (s.scores[i] == s.scores[j]) num += 0.5;
    }
  }
  return num / den;
}

bench::ScoreSet random_scores(Rng& rng, bool ties) {
  bench::ScoreSet s;
  const int n = 2 + static_cast<int>(rng.below(199));
  for (int i = 0; i < n; ++i) {
    const int label = i == 0 ? 1 : i == 1 ? 0 : static_cast<int>(rng.below(2));
    double v = std::clamp(0.5 + 0.2 * (label == 1 ? 1.0 : -1.0) * rng.uniform() + 0.25 * rng.normal(), 0.0, 1.0);
    if (ties) v = std::round(v * 20.0) / 20.0;
    s.scores.push_back(v);
    s.labels.push_back(label);
  }
  return s;
}

CheckResult check_metrics(Rng rng) {
  CheckResult r{5, "metric oracles", true, "", 0.0, 30.0};
  double worst_auc = 0.0;
  for (int c = 0; c < 200; ++c) {
    const bench::ScoreSet s = random_scores(rng, c % 2 == 0);
    worst_auc = std::max(worst_auc, std::abs(bench::auc(s) - pairwise_auc(s)));
  }

  bench::ScoreSet hand{{0.9, 0.8, 0.7, 0.4, 0.3, 0.2}, {1, 1, 0, 1, 0, 0}, 0};
  const auto [far, frr] = bench::rates_at(hand, 0.5);
  const double hand_eer = bench::eer(hand).eer;
  const bool hand_ok = std::abs(far - 1.0 / 3.0) < 1e-12 && std::abs(frr - 1.0 / 3.0) < 1e-12 &&
                       std::abs(hand_eer - 1.0 / 3.0) < 1e-12;

  // Prior-weighted error: P*FRR + (1-P)*FAR.
  const double m1 = bench::prior_weighted_error(0.5, 0.1, 0.2);
  const bool arith_ok = m1 == 0.5 * 0.2 + 0.5 * 0.1 && std::abs(m1 - 0.15) <= 2.0 * std::numeric_limits<double>::epsilon() &&
                        bench::prior_weighted_error(1.0, 0.37, 0.21) == 0.21 &&
                        bench::prior_weighted_error(0.0, 0.37, 0.21) == 0.37;

  // Aggregation by max, permutation invariance and the N = 1 case.
  std::vector<bench::ScoreSet> sets;
  for (int i = 0; i < 3; ++i) sets.push_back(random_scores(rng, false));
  const std::vector<double> priors = {0.5, 0.3, 0.8};
  const auto agg = bench::m_eer(sets, priors);
  const std::vector<bench::ScoreSet> rev(sets.rbegin(), sets.rend());
  const std::vector<double> rev_p(priors.rbegin(), priors.rend());
  bool agg_ok = agg.m_eer == *std::max_element(agg.per_domain.begin(), agg.per_domain.end()) &&
                bench::m_eer(rev, rev_p).m_eer == agg.m_eer;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto one = bench::m_eer(std::span<const bench::ScoreSet>(&sets[i], 1), std::span<const double>(&priors[i], 1));
    agg_ok = agg_ok && one.m_eer == agg.per_domain[i];
    const double half = bench::m_eer(std::span<const bench::ScoreSet>(&sets[i], 1), std::vector<double>{0.5}).m_eer;
    agg_ok = agg_ok && std::abs(half - bench::eer(sets[i]).eer) < 1e-9;
  }

  // Strictly increasing score maps leave AUC and EER unchanged.
  const std::vector<std::function<double(double)>> maps = {
      [](double x) { return x * x * x; }, [](double x) { return std::exp(5.0 * x); },
      [](double x) { return 1.0 / (1.0 + std::exp(-10.0 * (x - 0.5))); }, [](double x) { return x / (1.0 + x); }};
  double worst_mono = 0.0;
  for (int c = 0; c < 50; ++c) {
    const bench::ScoreSet s = random_scores(rng, c % 2 == 0);
    const double a = bench::auc(s);
    const double e = bench::eer(s).eer;
    for (const auto& f : maps) {
      bench::ScoreSet t = s;
      for (auto& v : t.scores) v = f(v);
      worst_mono = std::max({worst_mono, std::abs(bench::auc(t) - a), std::abs(bench::eer(t).eer - e)});
    }
  }
  r.pass = worst_auc < 1e-9 && hand_ok && arith_ok && agg_ok && worst_mono < 1e-9;
  r.detail = "pairwise AUC err " + fmt("%.1e", worst_auc) + ", hand EER " + fmt("%.6f", hand_eer) +
             (arith_ok ? ", M arithmetic ok" : ", M arithmetic FAILED") + (agg_ok ? ", max aggregate ok" : ", max aggregate FAILED") +
             ", monotone err " + fmt("%.1e", worst_mono);
  return r;
}

// ------------------------------------------------------- training checks

struct RunKey {
  std::string digest;
  bool operator<(const RunKey& o) const { return digest < o.digest; }
};

class Runner {
 public:
  Runner(const Options& opt) : opt_(opt) {}

  const std::vector<DatasetManifest>& data() {
    if (manifests_.empty()) {
      const DataSpec spec = parse_data_spec(Json::parse(kDataSpec));
      const auto root = opt_.work_dir / "data";
      for (std::size_t i = 0; i < spec.domains.size(); ++i) {
        std::filesystem::remove_all(root / spec.domains[i].domain_name);
        manifests_.push_back(syndata::gen_domain(spec.domains[i], static_cast<int>(i), root / spec.domains[i].domain_name));
      }
    }
    return manifests_;
  }

  ExperimentConfig base() const {
    ExperimentConfig cfg = parse_experiment(Json::parse(kExperiment));
    cfg.data_root = opt_.work_dir / "data";
    return cfg;
  }

  /// Runs every config not yet cached (or all of them with `fresh`), on up
  /// to opt.threads workers. Returns results in input order.
  std::vector<bench::RunResult> run(const std::vector<std::pair<std::string, ExperimentConfig>>& jobs, bool fresh,
                                    double* train_seconds) {
    data();
    std::vector<bench::RunResult> out(jobs.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      auto it = cache_.find(key(jobs[i].second));
      if (!fresh && it != cache_.end()) {
        out[i] = it->second;
        out[i].variant = jobs[i].first;
        out[i].report.config_digest = config_digest(jobs[i].second);
      } else {
        todo.push_back(i);
      }
    }
    const auto t0 = Clock::now();
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::vector<std::exception_ptr> errors(jobs.size());
    auto worker = [&] {
      for (std::size_t k = next++; k < todo.size(); k = next++) {
        const std::size_t i = todo[k];
        try {
          const auto rt = Clock::now();
          out[i] = bench::run_experiment(jobs[i].second, manifests_, "acceptance", jobs[i].first);
          std::lock_guard<std::mutex> lock(mu);
          if (opt_.log) {
            *opt_.log << "  trained " << jobs[i].first << " seed " << jobs[i].second.seed << ": held-out AUC "
                      << fmt("%.4f", out[i].heldout_auc) << " (" << fmt("%.0f", seconds_since(rt)) << " s)"
                      << std::endl;
          }
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int threads = std::max(1, std::min<int>(opt_.threads, static_cast<int>(todo.size())));
    for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    if (!fresh) {
      for (std::size_t i : todo) cache_[key(jobs[i].second)] = out[i];
    }
    if (train_seconds) *train_seconds = seconds_since(t0);
    return out;
  }

  std::vector<bench::RunResult> last_c6;

 private:
  static RunKey key(const ExperimentConfig& cfg) { return {config_digest(meta::training_equivalent(cfg))}; }

  const Options& opt_;
  std::vector<DatasetManifest> manifests_;
  std::map<RunKey, bench::RunResult> cache_;
};

double mean_auc(const std::vector<bench::RunResult>& runs, std::size_t begin, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = begin; i < begin + n; ++i) s += runs[i].heldout_auc;
  return s / static_cast<double>(n);
}

std::vector<std::pair<std::string, ExperimentConfig>> c6_jobs(const Runner& runner) {
  std::vector<std::pair<std::string, ExperimentConfig>> jobs;
  for (Method m : {Method::kGmdf, Method::kMerged}) {
    for (std::uint64_t seed : kSeeds) {
      ExperimentConfig cfg = runner.base();
      cfg.method = m;
      cfg.seed = seed;
      jobs.emplace_back(to_string(m), cfg);
    }
  }
  return jobs;
}

CheckResult check_merge_gap(Runner& runner, double* seconds) {
  CheckResult r{6, "GM-DF beats the merged baseline on the held-out domain", true, "", 0.0, 1800.0};
  const auto runs = runner.run(c6_jobs(runner), false, seconds);
  runner.last_c6 = runs;
  const std::size_t n = std::size(kSeeds);
  const double g = mean_auc(runs, 0, n), m = mean_auc(runs, n, n);
  int worse = 0;
  std::ostringstream per;
  for (std::size_t i = 0; i < n; ++i) {
    if (runs[i].heldout_auc < runs[n + i].heldout_auc) ++worse;
    per << " " << fmt("%.3f", runs[i].heldout_auc) << "/" << fmt("%.3f", runs[n + i].heldout_auc);
  }
  r.pass = g - m >= 0.03 && worse <= 1;
  r.detail = "AUC gmdf " + fmt("%.4f", g) + " vs merged " + fmt("%.4f", m) + " (gap " + fmt("%+.2f", 100.0 * (g - m)) +
             " pts), gmdf lower on " + std::to_string(worse) + "/5 seeds; per seed" + per.str();
  return r;
}

CheckResult check_ablation(Runner& runner, double* seconds) {
  CheckResult r{7, "full model vs single-component ablations", true, "", 0.0, 1800.0};
  const auto variants = bench::ablation_variants();
  std::vector<std::pair<std::string, ExperimentConfig>> jobs;
  for (const auto& v : variants) {
    for (std::uint64_t seed : kSeeds) {
      ExperimentConfig cfg = runner.base();
      cfg.components = v.components;
      cfg.seed = seed;
      jobs.emplace_back(v.label, cfg);
    }
  }
  const auto runs = runner.run(jobs, false, seconds);
  const std::size_t n = std::size(kSeeds);
  std::map<std::string, double> mean;
  for (std::size_t v = 0; v < variants.size(); ++v) mean[variants[v].label] = mean_auc(runs, v * n, n);
  const double full = mean.at("GM-DF (all)");
  std::ostringstream os;
  for (const auto& v : variants) os << v.label << " " << fmt("%.4f", mean.at(v.label)) << "; ";
  for (const char* single : {"+DA", "+MIM", "+Meta-MoE"}) {
    if (full < mean.at(single) - 0.01) r.pass = false;
  }
  r.detail = os.str();
  return r;
}

CheckResult check_mask_ratio(Runner& runner, double* seconds) {
  CheckResult r{8, "mask ratio 0.2 vs 0.8", true, "", 0.0, 1200.0};
  std::vector<std::pair<std::string, ExperimentConfig>> jobs;
  for (double ratio : {0.2, 0.8}) {
    for (std::uint64_t seed : {0, 1, 2}) {
      ExperimentConfig cfg = runner.base();
      cfg.mim.mask_ratio = ratio;
      cfg.seed = seed;
      jobs.emplace_back(fmt("mask=%.1f", ratio), cfg);
    }
  }
  const auto runs = runner.run(jobs, false, seconds);
  const double lo = mean_auc(runs, 0, 3), hi = mean_auc(runs, 3, 3);
  r.pass = lo >= hi;
  r.detail = "AUC at 0.2 " + fmt("%.4f", lo) + ", at 0.8 " + fmt("%.4f", hi);
  return r;
}

CheckResult check_determinism(Runner& runner) {
  CheckResult r{9, "repeat runs are bit-identical", true, "", 0.0, 0.0};
  const auto jobs = c6_jobs(runner);
  std::vector<bench::RunResult> first = runner.last_c6;
  if (first.empty()) first = runner.run(jobs, true, nullptr);
  const auto second = runner.run(jobs, true, nullptr);
  int same_params = 0, same_reports = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (first[i].param_digest == second[i].param_digest) ++same_params;
    if (bench::to_json(first[i].report).dump() == bench::to_json(second[i].report).dump()) ++same_reports;
  }
  const int n = static_cast<int>(jobs.size());
  r.pass = same_params == n && same_reports == n;
  r.detail = std::to_string(same_params) + "/" + std::to_string(n) + " identical checkpoints, " +
             std::to_string(same_reports) + "/" + std::to_string(n) + " identical reports";
  return r;
}

CheckResult check_robustness(Runner& runner, const Options& opt) {
  CheckResult r{10, "robustness harness", true, "", 0.0, 600.0};
  const auto& ms = runner.data();
  // Severity monotonicity over generated images.
  std::vector<Sample> imgs;
  for (const auto& m : ms) {
    auto s = load_samples(m, 32);
    imgs.insert(imgs.end(), s.begin(), s.begin() + 30);
  }
  std::ostringstream os;
  bool mono = true;
  for (auto kind : syndata::kAllDegradations) {
    double l2[2] = {0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
      const int severity = k == 0 ? 1 : 5;
      for (const auto& s : imgs) {
        const Image in = from_bytes(s.image, s.size, s.size);
        const Image out = syndata::degrade(in, {kind, severity});
        double acc = 0.0;
        for (std::size_t i = 0; i < in.pixels.size(); ++i) {
          const double d = static_cast<double>(in.pixels[i]) - out.pixels[i];
          acc += d * d;
        }
        l2[k] += std::sqrt(acc) / static_cast<double>(imgs.size());
      }
    }
    mono = mono && l2[1] >= l2[0];
    os << syndata::to_string(kind) << " " << fmt("%.0f", l2[0]) << "->" << fmt("%.0f", l2[1]) << " ";
  }

  // End-to-end: a short training run evaluated under every degradation.
  ExperimentConfig cfg = runner.base();
  cfg.meta.epochs = 1;
  bench::BenchmarkResult b;
  b.runs.push_back(bench::run_experiment(cfg, ms, "acceptance", "gmdf", 3));
  b.rows = bench::summarize(b.runs);
  b.config_digest = config_digest(cfg);
  const auto dir = opt.work_dir / "robustness";
  bench::write_benchmark(dir, b);
  std::ifstream is(dir / "robustness.csv");
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  const std::string want = "config_digest,protocol,variant,seed,compress,blur,contrast,saturate,pixelate";
  bool table = header == want && std::count(row.begin(), row.end(), ',') == 8 && b.runs[0].robustness.size() == 5;
  for (const auto& rr : b.runs[0].robustness) {
    const double a = rr.domains.front().auc;
    table = table && a >= 0.0 && a <= 1.0;
  }
  r.pass = mono && table;
  r.detail = std::string(table ? "5-column table written" : "table MALFORMED") + "; mean L2 sev1->sev5: " + os.str();
  return r;
}

}  // namespace

std::vector<int> fast_checks() { return {1, 2, 3, 4, 5}; }

std::vector<CheckResult> run(const Options& opt) {
  auto wanted = [&](int id) { return opt.only.empty() || std::find(opt.only.begin(), opt.only.end(), id) != opt.only.end(); };
  std::filesystem::create_directories(opt.work_dir);
  std::vector<CheckResult> out;
  Runner runner(opt);
  double c6_train = 0.0;
  for (int id = 1; id <= 10; ++id) {
    if (!wanted(id)) continue;
    if (opt.log) *opt.log << "running check " << id << std::endl;
    const auto t0 = Clock::now();
    CheckResult r;
    double train_seconds = -1.0;
    try {
      const Rng rng = Rng::substream(20260101, "selftest/" + std::to_string(id));
      switch (id) {
        case 1: r = check_closed_form(rng); break;
        case 2: r = check_gradients(rng); break;
        case 3: r = check_zero_init(rng); break;
        case 4: r = check_meta_contracts(opt); break;
        case 5: r = check_metrics(rng); break;
        case 6: r = check_merge_gap(runner, &train_seconds); c6_train = seconds_since(t0); break;
        case 7: r = check_ablation(runner, &train_seconds); break;
        case 8: r = check_mask_ratio(runner, &train_seconds); break;
        case 9: r = check_determinism(runner); break;
        case 10: r = check_robustness(runner, opt); break;
      }
    } catch (const std::exception& e) {
      r.id = id;
      r.name = "check " + std::to_string(id);
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = seconds_since(t0);
    // Check 7 shares its budget with check 6.
    const double charged = id == 7 ? r.seconds + c6_train : r.seconds;
    if (r.budget_seconds > 0.0 && charged > r.budget_seconds) {
      r.pass = false;
      r.detail += " [over time budget]";
    }
    if (opt.log) *opt.log << format(r) << std::endl;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format(const CheckResult& r) {
  std::ostringstream os;
  os << (r.pass ? "[PASS] " : "[FAIL] ") << "criterion " << r.id << ": " << r.name << " (" << fmt("%.1f", r.seconds)
     << " s";
  if (r.budget_seconds > 0.0) os << " / budget " << fmt("%.0f", r.budget_seconds) << " s";
  os << ") " << r.detail;
  return os.str();
}

}  // namespace gmdf::selftest
