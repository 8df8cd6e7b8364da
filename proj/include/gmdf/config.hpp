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

// Experiment and data-spec configuration: strict JSON (unknown keys are
// errors) with a content digest that ignores key order.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmdf/align.hpp"
#include "gmdf/backbone.hpp"
#include "gmdf/dseg.hpp"
#include "gmdf/mim.hpp"
#include "gmdf/optim.hpp"
#include "gmdf/syndata.hpp"

namespace gmdf {

using Json = nlohmann::json;

struct DataSpec {
  std::uint64_t seed = 0;
  std::vector<syndata::DomainSpec> domains;
};

DataSpec parse_data_spec(const Json& j);
Json to_json(const DataSpec& s);

enum class Method { kGmdf, kMerged, kSingleDomain };
std::string to_string(Method m);
Method parse_method(const std::string& s);

/// Which GM-DF components are active. Without meta_moe the model has no
/// experts and all parameters take one joint step per iteration.
struct Components {
  bool meta_moe = true;
  bool da = true;
  bool mim = true;
};

enum class Threshold { kPerDomain, kGlobal };

struct MetaConfig {
  double beta = 1e-2;   // inner learning rate
  double delta = 1e-3;  // outer learning rate
  OptimizerKind outer_optimizer = OptimizerKind::kSgd;
  int epochs = 10;
  int batches_per_epoch = 0;  // 0 = floor(training samples / batch_size)
  int batch_size = 32;
  bool second_order = false;
  bool outer_cls = true;
  bool random_rotation = false;
  align::LossWeights weights;

  void validate() const;
};

struct MimConfig {
  mim::TokenizerConfig tokenizer;
  int tokenizer_patches = 4096;  // patches sampled for tokenizer training
  double mask_ratio = 0.2;
  mim::MaskStrategy mask_strategy = mim::MaskStrategy::kRandom;
};

struct ProtocolConfig {
  std::vector<std::string> domains;  // every domain to load
  std::string heldout;
  std::vector<std::string> eval;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path data_root = "data";
  ProtocolConfig protocol;
  Method method = Method::kGmdf;
  Components components;
  std::string single_domain;  // training domain for Method::kSingleDomain
  backbone::BackboneConfig backbone;
  dseg::DsegConfig dseg;
  align::TextConfig text;
  std::string prompt_template = "P1";
  std::filesystem::path prompt_file;  // optional template override
  MimConfig mim;
  MetaConfig meta;
  Threshold threshold = Threshold::kPerDomain;

  void validate() const;
};

ExperimentConfig parse_experiment(const Json& j);
Json to_json(const ExperimentConfig& c);

/// SHA-256 of the canonical (sorted-key) serialization.
std::string config_digest(const Json& j);
std::string config_digest(const ExperimentConfig& c);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace gmdf
