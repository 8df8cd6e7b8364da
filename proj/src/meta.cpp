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

#include "gmdf/meta.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gmdf/backbone.hpp"
#include "gmdf/rng.hpp"

namespace gmdf::meta {

namespace {

const std::string kTokenizerPrefix = "tokenizer/";
const std::string kOptimPrefix = "optim/";
const std::string kOuterOptim = "optim/outer/";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_state(std::string_view name) { return starts_with(name, kTokenizerPrefix) || starts_with(name, kOptimPrefix); }

Matrix l2_rows(const Matrix& x) {
  Matrix out = x;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double n = out.row(r).norm();
    if (n == 0.0) throw std::domain_error("zero-norm embedding");
    out.row(r) /= n;
  }
  return out;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::domain_error(std::string("non-finite ") + what);
}

}  // namespace

ParamPartition partition_params(const ParamStore& params) {
  ParamPartition p;
  for (const auto& [name, value] : params.arrays()) {
    if (starts_with(name, kThetaE)) {
      p.theta_E.push_back(name);
    } else if (starts_with(name, kThetaO)) {
      p.theta_O.push_back(name);
    } else if (!is_state(name)) {
      throw ConfigError("learnable array without theta_E/ or theta_O/ prefix: " + name);
    }
  }
  return p;
}

InnerResult inner_update(ParamStore& params, const ModelConfig& cfg, const Batch& batch, double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("inner_update: beta must be >= 0");
  ad::Tape tape;
  Binding p(tape, params, params_with_prefix(kThetaE));
  const DomainContext ctx = context_for(cfg, batch.domain_ids);
  ForwardOut out = forward(p, cfg, batch.images, &ctx);
  ad::Var loss = align::cls_loss_from_logits(out.logits, batch.labels);
  require_finite(loss.scalar(), "inner L_cls");
  tape.backward(loss);
  const ParamStore grads = p.gradients();
  InnerResult r;
  r.l_cls = loss.scalar();
  r.grad_norm = global_norm(grads);
  r.features = l2_rows(out.pooled.value());
  for (const auto& [name, g] : grads.arrays()) params.mutable_get(name) -= beta * g;
  return r;
}

namespace {

/// theta_O gradient of the inner classification loss at the given theta_E.
ParamStore inner_grad_O(const ParamStore& params, const ModelConfig& cfg, const Batch& batch) {
  ad::Tape tape;
  Binding p(tape, params, params_with_prefix(kThetaO));
  const DomainContext ctx = context_for(cfg, batch.domain_ids);
  ForwardOut out = forward(p, cfg, batch.images, &ctx);
  ad::Var loss = align::cls_loss_from_logits(out.logits, batch.labels);
  tape.backward(loss);
  return p.gradients();
}

}  // namespace

OuterResult outer_gradients(const ParamStore& params, const ModelConfig& cfg, const OuterInputs& in) {
  if (in.batch == nullptr) throw std::invalid_argument("outer_update: no meta-test batch");
  const Batch& batch = *in.batch;
  const std::set<int> train_ids(in.meta_train_domains.begin(), in.meta_train_domains.end());
  for (int id : batch.domain_ids) {
    if (train_ids.count(id)) {
      throw DataError("domain leakage: meta-test batch contains meta-train domain " + std::to_string(id));
    }
  }
  const bool second = in.inner != nullptr && !in.inner->empty() && in.beta > 0.0;
  ad::Tape tape;
  Binding p(tape, params, second ? all_params() : params_with_prefix(kThetaO));
  const int np = cfg.backbone.n_patches();
  const std::vector<Eigen::Index> rows = mim::masked_rows(in.masks, np);
  const DomainContext ctx = context_for(cfg, batch.domain_ids);
  ForwardOut out = forward(p, cfg, batch.images, cfg.experts ? &ctx : nullptr, rows);
  ad::Var zero = tape.constant(Matrix::Zero(1, 1));
  ad::Var l_cls = in.outer_cls ? align::cls_loss_from_logits(out.logits, batch.labels) : zero;
  ad::Var l_sis = in.source ? align::da_loss(*in.source, ad::l2_normalize_rows(out.pooled)) : zero;
  ad::Var l_mim = zero;
  if (!in.masks.empty()) {
    if (in.mim_targets.size() != batch.size() * static_cast<std::size_t>(np)) {
      throw std::invalid_argument("outer_update: one MIM target per patch required");
    }
    l_mim = mim::mim_loss(mim_logits(p, out.patch_hidden), in.mim_targets, in.masks, np);
  }
  ad::Var total = align::total_loss(l_sis, l_cls, l_mim, in.weights);
  tape.backward(total);
  ParamStore all = p.gradients();

  OuterResult r;
  r.l_cls = l_cls.scalar();
  r.l_sis = l_sis.scalar();
  r.l_mim = l_mim.scalar();
  r.l_total = total.scalar();
  r.grads = all.subset(kThetaO);
  if (second) {
    // d theta'_E / d theta_O = -beta * d/dtheta_O grad_E L_inner; the mixed
    // product with v = dL/dtheta'_E is taken by central differences along v.
    const ParamStore v = all.subset(kThetaE);
    const double vn = global_norm(v);
    if (vn > 0.0) {
      const double eps = 1e-4 / vn;
      for (const InnerRecord& rec : *in.inner) {
        ParamStore plus = params;
        ParamStore minus = params;
        for (const auto& [name, val] : rec.theta_E.arrays()) {
          plus.set(name, val);
          minus.set(name, val);
        }
        for (const auto& [name, g] : v.arrays()) {
          plus.mutable_get(name) += eps * g;
          minus.mutable_get(name) -= eps * g;
        }
        const ParamStore gp = inner_grad_O(plus, cfg, rec.batch);
        const ParamStore gm = inner_grad_O(minus, cfg, rec.batch);
        for (const auto& [name, g] : gp.arrays()) {
          if (!r.grads.contains(name)) r.grads.set(name, Matrix::Zero(g.rows(), g.cols()));
          r.grads.mutable_get(name) -= in.beta * (g - gm.get(name)) / (2.0 * eps);
        }
      }
    }
  }
  r.grad_norm = global_norm(r.grads);
  return r;
}

OuterResult outer_update(ParamStore& params, const ModelConfig& cfg, const OuterInputs& in, Optimizer& opt) {
  OuterResult r = outer_gradients(params, cfg, in);
  require_finite(r.l_total, "outer L_total");
  opt.step(params, r.grads);
  return r;
}

std::string format_log_row(const LogRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%ld,%d,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", r.iter, r.epoch,
                r.meta_test_domain.c_str(), r.l_cls_inner, r.l_cls_outer, r.l_sis, r.l_mim, r.l_total, r.grad_norm_E,
                r.grad_norm_O);
  return buf;
}

namespace {

LogRow parse_log_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (f.size() != 10) throw DataError("malformed training log row: " + line);
  LogRow r;
  r.iter = std::stol(f[0]);
  r.epoch = std::stoi(f[1]);
  r.meta_test_domain = f[2];
  double* vals[] = {&r.l_cls_inner, &r.l_cls_outer, &r.l_sis, &r.l_mim, &r.l_total, &r.grad_norm_E, &r.grad_norm_O};
  for (int i = 0; i < 7; ++i) *vals[i] = std::strtod(f[static_cast<std::size_t>(3 + i)].c_str(), nullptr);
  return r;
}

}  // namespace

std::size_t TrainData::total() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.size();
  return n;
}

std::string TrainData::digest() const {
  std::string buf;
  for (std::size_t i = 0; i < names.size(); ++i) {
    buf += names[i] + ":" + std::to_string(ids[i]) + "\n";
    for (const auto& s : samples[i]) buf += s.sample_id + "," + std::to_string(s.label) + "\n";
  }
  return sha256_hex(buf);
}

TrainData load_train_data(const std::vector<DatasetManifest>& manifests, int image_size) {
  TrainData d;
  for (const auto& m : manifests) {
    d.names.push_back(m.domain_name);
    d.ids.push_back(m.domain_id);
    d.samples.push_back(load_samples(m, image_size));
  }
  return d;
}

ExperimentConfig training_equivalent(ExperimentConfig cfg) {
  if (cfg.mim.mask_ratio <= 0.0) cfg.components.mim = false;
  const bool any = cfg.components.meta_moe || cfg.components.da || cfg.components.mim;
  if (cfg.method == Method::kGmdf && !any) cfg.method = Method::kMerged;
  if (cfg.method != Method::kGmdf) cfg.components = {false, false, false};
  return cfg;
}

ModelConfig build_model_config(const ExperimentConfig& exp, const std::vector<std::string>& names,
                               const std::vector<int>& ids) {
  ModelConfig m;
  m.backbone = exp.backbone;
  m.dseg = exp.dseg;
  m.text = exp.text;
  m.prompt_template = exp.prompt_template;
  if (!exp.prompt_file.empty()) m.templates = align::load_templates(exp.prompt_file);
  m.codebook_size = exp.mim.tokenizer.codebook_size;
  m.experts = exp.method == Method::kGmdf && exp.components.meta_moe;
  if (m.experts) {
    m.dseg.n_experts = static_cast<int>(names.size());
    m.expert_names = names;
    m.expert_domains = ids;
  }
  m.validate();
  return m;
}

Trainer::Trainer(ExperimentConfig cfg, TrainData data) : Trainer(std::move(cfg), std::move(data), true) {}

Trainer::Trainer(ExperimentConfig cfg, TrainData data, bool fresh) : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  if (data_.names.empty()) throw ConfigError("training needs at least one domain");
  const bool gmdf = cfg_.method == Method::kGmdf;
  meta_ = gmdf && cfg_.components.meta_moe;
  use_da_ = gmdf && cfg_.components.da && data_.names.size() >= 2;
  use_mim_ = gmdf && cfg_.components.mim && cfg_.mim.mask_ratio > 0.0;
  if (meta_ && data_.names.size() < 2) throw ConfigError("meta-learning needs at least 2 training domains");
  model_ = build_model_config(cfg_, data_.names, data_.ids);
  outer_opt_ = Optimizer({cfg_.meta.outer_optimizer, cfg_.meta.delta});
  per_epoch_ = cfg_.meta.batches_per_epoch > 0
                   ? cfg_.meta.batches_per_epoch
                   : std::max<long>(1, static_cast<long>(data_.total() / static_cast<std::size_t>(cfg_.meta.batch_size)));
  init_streams();
  if (!fresh) return;

  params_ = init_model(model_, mix64(cfg_.seed) ^ fnv1a64("init"));
  if (use_mim_) {
    // Tokenizer is fitted once on patches of the training images, then frozen.
    Rng rng = Rng::substream(cfg_.seed, "mim/tokenizer");
    const auto& bc = cfg_.backbone;
    const std::size_t want = static_cast<std::size_t>(std::max(cfg_.mim.tokenizer_patches, 1));
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t d = 0; d < data_.samples.size(); ++d)
      for (std::size_t i = 0; i < data_.samples[d].size(); ++i) all.emplace_back(d, i);
    rng.shuffle(all.begin(), all.end());
    const std::size_t per_image = static_cast<std::size_t>(bc.n_patches());
    const std::size_t images = std::min(all.size(), (want + per_image - 1) / per_image);
    std::vector<const Sample*> picked;
    for (std::size_t k = 0; k < images; ++k) picked.push_back(&data_.samples[all[k].first][all[k].second]);
    const Batch b = make_batch(picked);
    const Matrix patches = backbone::patchify(b.images, bc.image_size, bc.patch_size);
    tokenizer_ = mim::train_tokenizer(patches, cfg_.mim.tokenizer, mix64(cfg_.seed) ^ fnv1a64("mim/train"),
                                      &tok_report_);
    mim::store_tokenizer(params_, *tokenizer_);
  }
}

void Trainer::init_streams() {
  streams_.clear();
  const int bs = cfg_.meta.batch_size;
  if (meta_) {
    for (std::size_t i = 0; i < data_.names.size(); ++i) {
      streams_.emplace_back(data_.samples[i], bs, mix64(cfg_.seed) ^ fnv1a64("meta/batches/" + data_.names[i]), false);
    }
  } else {
    std::vector<Sample> pooled;
    for (const auto& s : data_.samples) pooled.insert(pooled.end(), s.begin(), s.end());
    streams_.emplace_back(std::move(pooled), bs, mix64(cfg_.seed) ^ fnv1a64("meta/batches/pooled"), true);
  }
}

int Trainer::rotation(long iter) const {
  const auto n = static_cast<std::uint64_t>(data_.names.size());
  if (!cfg_.meta.random_rotation) return static_cast<int>(static_cast<std::uint64_t>(iter) % n);
  Rng r(mix64(cfg_.seed ^ fnv1a64("meta/rotation")) + static_cast<std::uint64_t>(iter));
  return static_cast<int>(r.below(n));
}

Trainer::Draw Trainer::draw(long iter) {
  Draw d;
  d.meta_test = rotation(iter);
  if (meta_) {
    for (std::size_t i = 0; i < streams_.size(); ++i) {
      if (static_cast<int>(i) != d.meta_test) d.inner.push_back(streams_[i].next());
    }
    d.outer = streams_[static_cast<std::size_t>(d.meta_test)].next();
  } else {
    d.outer = streams_[0].next();
  }
  return d;
}

std::vector<mim::MaskSet> Trainer::masks_for(const Batch& b, long iter) const {
  const auto& bc = cfg_.backbone;
  const int np = bc.n_patches();
  const std::uint64_t base = mix64(cfg_.seed ^ fnv1a64("meta/mask")) + static_cast<std::uint64_t>(iter) * 1000003ULL;
  Matrix var;
  if (cfg_.mim.mask_strategy == mim::MaskStrategy::kMinimum) var = backbone::patch_variance(b.images, bc.image_size, bc.patch_size);
  std::vector<mim::MaskSet> masks;
  for (std::size_t i = 0; i < b.size(); ++i) {
    std::vector<double> v;
    if (var.size() > 0) v.assign(var.row(static_cast<Eigen::Index>(i)).data(), var.row(static_cast<Eigen::Index>(i)).data() + np);
    masks.push_back(mim::sample_mask(np, cfg_.mim.mask_ratio, cfg_.mim.mask_strategy, mix64(base + i), v));
  }
  return masks;
}

void Trainer::emit(StepEvent::Phase phase) const {
  if (hook_) hook_(StepEvent{phase, iter_, params_});
}

void Trainer::meta_step(Draw& d) {
  emit(StepEvent::Phase::kBeforeInner);
  LogRow row;
  row.iter = iter_;
  row.epoch = static_cast<int>(iter_ / per_epoch_);
  row.meta_test_domain = data_.names[static_cast<std::size_t>(d.meta_test)];

  std::vector<InnerRecord> records;
  std::vector<int> train_ids;
  Matrix features;
  double l_inner = 0.0, g_inner = 0.0;
  for (const Batch& b : d.inner) {
    if (cfg_.meta.second_order) records.push_back({params_.subset(kThetaE), b});
    const InnerResult r = inner_update(params_, model_, b, cfg_.meta.beta);
    l_inner += r.l_cls;
    g_inner += r.grad_norm;
    Matrix joined(features.rows() + r.features.rows(), r.features.cols());
    if (features.rows() > 0) joined.topRows(features.rows()) = features;
    joined.bottomRows(r.features.rows()) = r.features;
    features = std::move(joined);
    for (int id : b.domain_ids) train_ids.push_back(id);
  }
  row.l_cls_inner = l_inner / static_cast<double>(d.inner.size());
  row.grad_norm_E = g_inner / static_cast<double>(d.inner.size());
  emit(StepEvent::Phase::kAfterInner);

  std::optional<align::FeatureStats> source;
  if (use_da_) source = align::feature_stats(features);
  OuterInputs in;
  in.batch = &d.outer;
  std::sort(train_ids.begin(), train_ids.end());
  train_ids.erase(std::unique(train_ids.begin(), train_ids.end()), train_ids.end());
  in.meta_train_domains = train_ids;
  in.source = source ? &*source : nullptr;
  if (use_mim_) {
    in.masks = masks_for(d.outer, iter_);
    in.mim_targets = mim::tokenize_hard(
        backbone::patchify(d.outer.images, cfg_.backbone.image_size, cfg_.backbone.patch_size), *tokenizer_);
  }
  in.weights = cfg_.meta.weights;
  in.outer_cls = cfg_.meta.outer_cls;
  if (cfg_.meta.second_order) {
    in.inner = &records;
    in.beta = cfg_.meta.beta;
  }
  const OuterResult o = outer_update(params_, model_, in, outer_opt_);
  row.l_cls_outer = o.l_cls;
  row.l_sis = o.l_sis;
  row.l_mim = o.l_mim;
  row.l_total = o.l_total;
  row.grad_norm_O = o.grad_norm;
  log_.push_back(row);
  emit(StepEvent::Phase::kAfterOuter);
}

void Trainer::joint_step(Draw& d) {
  emit(StepEvent::Phase::kBeforeInner);
  const Batch& b = d.outer;
  LogRow row;
  row.iter = iter_;
  row.epoch = static_cast<int>(iter_ / per_epoch_);
  row.meta_test_domain = use_da_ ? data_.names[static_cast<std::size_t>(d.meta_test)] : "pooled";
  row.l_cls_inner = kNaN;
  row.grad_norm_E = kNaN;
  emit(StepEvent::Phase::kAfterInner);

  const int np = cfg_.backbone.n_patches();
  std::vector<mim::MaskSet> masks;
  if (use_mim_) masks = masks_for(b, iter_);
  const std::vector<Eigen::Index> rows = mim::masked_rows(masks, np);
  ad::Tape tape;
  Binding p(tape, params_, all_params());
  ForwardOut out = forward(p, model_, b.images, nullptr, rows);
  ad::Var zero = tape.constant(Matrix::Zero(1, 1));
  ad::Var l_cls = align::cls_loss_from_logits(out.logits, b.labels);
  ad::Var l_sis = zero;
  if (use_da_) {
    const int target_id = data_.ids[static_cast<std::size_t>(d.meta_test)];
    std::vector<Eigen::Index> src, tgt;
    for (std::size_t i = 0; i < b.size(); ++i) (b.domain_ids[i] == target_id ? tgt : src).push_back(static_cast<Eigen::Index>(i));
    if (src.size() >= 2 && tgt.size() >= 2) {
      ad::Var normed = ad::l2_normalize_rows(out.pooled);
      Matrix sv(static_cast<Eigen::Index>(src.size()), normed.cols());
      for (std::size_t i = 0; i < src.size(); ++i) sv.row(static_cast<Eigen::Index>(i)) = normed.value().row(src[i]);
      const align::FeatureStats source = align::feature_stats(sv);
      l_sis = align::da_loss(source, ad::take_rows(normed, tgt));
    }
  }
  ad::Var l_mim = zero;
  if (use_mim_) {
    const std::vector<int> targets = mim::tokenize_hard(
        backbone::patchify(b.images, cfg_.backbone.image_size, cfg_.backbone.patch_size), *tokenizer_);
    l_mim = mim::mim_loss(mim_logits(p, out.patch_hidden), targets, masks, np);
  }
  ad::Var total = align::total_loss(l_sis, l_cls, l_mim, cfg_.meta.weights);
  tape.backward(total);
  const ParamStore grads = p.gradients();
  outer_opt_.step(params_, grads);
  row.l_cls_outer = l_cls.scalar();
  row.l_sis = l_sis.scalar();
  row.l_mim = l_mim.scalar();
  row.l_total = total.scalar();
  row.grad_norm_O = global_norm(grads);
  log_.push_back(row);
  emit(StepEvent::Phase::kAfterOuter);
}

void Trainer::step() {
  Draw d = draw(iter_);
  if (meta_) {
    meta_step(d);
  } else {
    joint_step(d);
  }
  ++iter_;
}

void Trainer::run() {
  while (iter_ < total_iterations()) {
    step();
    if (iter_ % per_epoch_ == 0) {
      if (verbose_) {
        const LogRow& r = log_.back();
        std::cerr << "epoch " << iter_ / per_epoch_ << "/" << cfg_.meta.epochs << " iter " << iter_
                  << " l_total=" << r.l_total << " l_cls=" << r.l_cls_outer << "\n";
      }
      if (!checkpoint_dir_.empty()) save(checkpoint_dir_);
    }
  }
}

void Trainer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  ParamStore all = params_;
  outer_opt_.save(all, kOuterOptim);
  write_archive(dir / "checkpoint.gmdf", all);
  Json j;
  j["config"] = to_json(cfg_);
  j["config_digest"] = config_digest(cfg_);
  j["iteration"] = iter_;
  j["epoch"] = iter_ / per_epoch_;
  j["seed"] = cfg_.seed;
  j["protocol_digest"] = data_.digest();
  j["param_digest"] = params_.digest();
  j["domains"] = data_.names;
  j["domain_ids"] = data_.ids;
  write_json_file(dir / "checkpoint.json", j);
  std::ofstream os(dir / "log.csv", std::ios::trunc);
  os << kLogHeader << "\n";
  for (const auto& r : log_) os << format_log_row(r) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint c;
  c.meta = read_json_file(dir / "checkpoint.json");
  c.config = parse_experiment(c.meta.at("config"));
  ParamStore all = read_archive(dir / "checkpoint.gmdf");
  for (const auto& [name, v] : all.arrays()) {
    if (!starts_with(name, kOptimPrefix)) c.params.set(name, v);
  }
  c.model = build_model_config(c.config, c.meta.at("domains").get<std::vector<std::string>>(),
                               c.meta.at("domain_ids").get<std::vector<int>>());
  partition_params(c.params);
  return c;
}

Trainer Trainer::resume(const std::filesystem::path& dir, TrainData data) {
  const Json meta = read_json_file(dir / "checkpoint.json");
  ExperimentConfig cfg = parse_experiment(meta.at("config"));
  if (meta.at("protocol_digest").get<std::string>() != data.digest()) {
    throw ConfigError("resume: training data differs from the checkpoint's protocol");
  }
  Trainer t(std::move(cfg), std::move(data), false);
  const ParamStore all = read_archive(dir / "checkpoint.gmdf");
  for (const auto& [name, v] : all.arrays()) {
    if (!starts_with(name, kOptimPrefix)) t.params_.set(name, v);
  }
  t.outer_opt_.load(all, kOuterOptim);
  if (t.use_mim_) t.tokenizer_ = mim::load_tokenizer(t.params_);
  t.iter_ = meta.at("iteration").get<long>();
  for (long i = 0; i < t.iter_; ++i) t.draw(i);
  std::ifstream is(dir / "log.csv");
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (!line.empty()) t.log_.push_back(parse_log_row(line));
  }
  t.checkpoint_dir_ = dir;
  return t;
}

std::vector<DatasetManifest> training_domains(const ExperimentConfig& cfg, const ProtocolSplit& split) {
  if (cfg.method != Method::kSingleDomain) return split.meta_train;
  std::vector<DatasetManifest> one;
  for (const auto& m : split.meta_train) {
    if (m.domain_name == cfg.single_domain) one.push_back(m);
  }
  if (one.empty()) throw ConfigError("single_domain '" + cfg.single_domain + "' is not a training domain");
  return one;
}

Trainer train(const ExperimentConfig& cfg, const ProtocolSplit& split, const std::filesystem::path& checkpoint_dir) {
  Trainer t(cfg, load_train_data(training_domains(cfg, split), cfg.backbone.image_size));
  if (!checkpoint_dir.empty()) t.set_checkpoint_dir(checkpoint_dir);
  t.run();
  return t;
}

}  // namespace gmdf::meta
