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

// Plain SGD and Adam over named arrays.

#pragma once

#include <string>

#include "gmdf/params.hpp"

namespace gmdf {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update to every array named in `grads`. Arrays absent from
  /// `grads` are left bit-identical.
  void step(ParamStore& params, const ParamStore& grads);

  const OptimizerConfig& config() const { return cfg_; }
  long steps() const { return t_; }

  /// Moment buffers and step count under `prefix` (e.g. "optim/outer/").
  void save(ParamStore& out, const std::string& prefix) const;
  void load(const ParamStore& in, const std::string& prefix);

 private:
  OptimizerConfig cfg_;
  long t_ = 0;
  ParamStore m_;
  ParamStore v_;
};

/// sqrt(sum of squares) over every array.
double global_norm(const ParamStore& grads);

}  // namespace gmdf
