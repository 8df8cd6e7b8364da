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

// Bi-level training: expert/prompt parameters (theta_E) take inner steps on
// meta-train domains, shared parameters (theta_O) take the outer step on the
// rotating meta-test domain.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gmdf/align.hpp"
#include "gmdf/config.hpp"
#include "gmdf/core.hpp"
#include "gmdf/mim.hpp"
#include "gmdf/model.hpp"
#include "gmdf/optim.hpp"
#include "gmdf/params.hpp"

namespace gmdf::meta {

inline const std::string kThetaE = "theta_E/";
inline const std::string kThetaO = "theta_O/";

struct ParamPartition {
  std::vector<std::string> theta_E;
  std::vector<std::string> theta_O;
};

/// Splits learnable arrays by name prefix. Tokenizer and optimizer state are
/// not learnable and are skipped; any other unprefixed array is an error.
ParamPartition partition_params(const ParamStore& params);

struct InnerResult {
  double l_cls = 0.0;
  double grad_norm = 0.0;
  Matrix features;  // L2-normalized pooled embeddings before the step
};

/// theta_E <- theta_E - beta * dL_cls/dtheta_E on one meta-train batch.
InnerResult inner_update(ParamStore& params, const ModelConfig& cfg, const Batch& batch, double beta);

/// An inner step recorded for the second-order correction.
struct InnerRecord {
  ParamStore theta_E;  // values the step was taken from
  Batch batch;
};

struct OuterInputs {
  const Batch* batch = nullptr;
  std::vector<int> meta_train_domains;       // for the leakage check
  const align::FeatureStats* source = nullptr;  // null disables L_sis
  std::vector<mim::MaskSet> masks;           // empty disables L_mim and masking
  std::vector<int> mim_targets;              // one token per stacked patch row
  align::LossWeights weights;
  bool outer_cls = true;
  /// Non-empty with beta > 0 enables the second-order correction.
  const std::vector<InnerRecord>* inner = nullptr;
  double beta = 0.0;
};

struct OuterResult {
  double l_cls = 0.0;
  double l_sis = 0.0;
  double l_mim = 0.0;
  double l_total = 0.0;
  double grad_norm = 0.0;
  ParamStore grads;  // theta_O gradients actually applied
};

/// Gradients of L_total w.r.t. theta_O at the current parameters (includes
/// the second-order correction when requested). Does not modify params.
OuterResult outer_gradients(const ParamStore& params, const ModelConfig& cfg, const OuterInputs& in);

/// theta_O <- optimizer step on L_total of the meta-test batch.
OuterResult outer_update(ParamStore& params, const ModelConfig& cfg, const OuterInputs& in, Optimizer& opt);

struct LogRow {
  long iter = 0;
  int epoch = 0;
  std::string meta_test_domain;
  double l_cls_inner = 0.0;
  double l_cls_outer = 0.0;
  double l_sis = 0.0;
  double l_mim = 0.0;
  double l_total = 0.0;
  double grad_norm_E = 0.0;
  double grad_norm_O = 0.0;
};

inline const char* kLogHeader = "iter,epoch,meta_test_domain,l_cls_inner,l_cls_outer,l_sis,l_mim,l_total,grad_norm_E,grad_norm_O";
std::string format_log_row(const LogRow& r);

/// Training domains with their loaded samples.
struct TrainData {
  std::vector<std::string> names;
  std::vector<int> ids;
  std::vector<std::vector<Sample>> samples;

  std::size_t total() const;
  std::string digest() const;
};

TrainData load_train_data(const std::vector<DatasetManifest>& manifests, int image_size);

/// `cfg` with the switches the trainer ignores cleared. GM-DF with every
/// component off trains exactly like the merged baseline and maps to it.
ExperimentConfig training_equivalent(ExperimentConfig cfg);

/// Model layout implied by an experiment and its training domains.
ModelConfig build_model_config(const ExperimentConfig& exp, const std::vector<std::string>& names,
                               const std::vector<int>& ids);

struct StepEvent {
  enum class Phase { kBeforeInner, kAfterInner, kAfterOuter };
  Phase phase;
  long iter;
  const ParamStore& params;
};

class Trainer {
 public:
  Trainer(ExperimentConfig cfg, TrainData data);

  /// Runs one meta iteration (or one joint step for variants without
  /// meta-learning).
  void step();
  /// Runs the remaining iterations; checkpoints at every epoch boundary when
  /// a directory is set.
  void run();

  void set_hook(std::function<void(const StepEvent&)> hook) { hook_ = std::move(hook); }
  void set_checkpoint_dir(std::filesystem::path dir) { checkpoint_dir_ = std::move(dir); }
  void set_verbose(bool v) { verbose_ = v; }

  long iteration() const { return iter_; }
  long iterations_per_epoch() const { return per_epoch_; }
  long total_iterations() const { return per_epoch_ * cfg_.meta.epochs; }
  bool uses_meta() const { return meta_; }
  const ParamStore& params() const { return params_; }
  const ModelConfig& model_config() const { return model_; }
  const ExperimentConfig& config() const { return cfg_; }
  const std::vector<LogRow>& log() const { return log_; }
  const mim::TokenizerReport& tokenizer_report() const { return tok_report_; }

  void save(const std::filesystem::path& dir) const;
  static Trainer resume(const std::filesystem::path& dir, TrainData data);

 private:
  struct Draw {
    int meta_test = 0;            // index into data_
    std::vector<Batch> inner;     // meta path: one per meta-train domain
    Batch outer;                  // meta path: meta-test batch; joint path: pooled batch
  };

  Trainer(ExperimentConfig cfg, TrainData data, bool fresh);
  void init_streams();
  Draw draw(long iter);
  int rotation(long iter) const;
  std::vector<mim::MaskSet> masks_for(const Batch& b, long iter) const;
  void meta_step(Draw& d);
  void joint_step(Draw& d);
  void emit(StepEvent::Phase phase) const;

  ExperimentConfig cfg_;
  TrainData data_;
  ModelConfig model_;
  ParamStore params_;
  std::optional<mim::Tokenizer> tokenizer_;
  mim::TokenizerReport tok_report_;
  Optimizer outer_opt_;
  bool meta_ = true;
  bool use_da_ = true;
  bool use_mim_ = true;
  long iter_ = 0;
  long per_epoch_ = 1;
  std::vector<BatchStream> streams_;
  std::vector<LogRow> log_;
  std::function<void(const StepEvent&)> hook_;
  std::filesystem::path checkpoint_dir_;
  bool verbose_ = false;
};

/// Domains a method trains on: the meta-train part of the split, or the
/// single configured domain for the single-domain baseline.
std::vector<DatasetManifest> training_domains(const ExperimentConfig& cfg, const ProtocolSplit& split);

/// Loads training data for the split and trains to completion.
Trainer train(const ExperimentConfig& cfg, const ProtocolSplit& split,
              const std::filesystem::path& checkpoint_dir = {});

/// Reads a saved checkpoint: parameters plus the sidecar metadata.
struct Checkpoint {
  ParamStore params;
  Json meta;
  ExperimentConfig config;
  ModelConfig model;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace gmdf::meta
