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

#include "gmdf/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "gmdf/core.hpp"

namespace gmdf {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer: " + s);
}

void Optimizer::step(ParamStore& params, const ParamStore& grads) {
  ++t_;
  for (const auto& [name, g] : grads.arrays()) {
    Matrix& p = params.mutable_get(name);
    if (p.rows() != g.rows() || p.cols() != g.cols()) throw std::invalid_argument("optimizer: shape mismatch for " + name);
    if (cfg_.kind == OptimizerKind::kSgd) {
      p -= cfg_.lr * g;
      continue;
    }
    if (!m_.contains(name)) {
      m_.set(name, Matrix::Zero(g.rows(), g.cols()));
      v_.set(name, Matrix::Zero(g.rows(), g.cols()));
    }
    Matrix& m = m_.mutable_get(name);
    Matrix& v = v_.mutable_get(name);
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    p.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  }
}

void Optimizer::save(ParamStore& out, const std::string& prefix) const {
  out.set(prefix + "t", Matrix::Constant(1, 1, static_cast<double>(t_)));
  for (const auto& [name, m] : m_.arrays()) out.set(prefix + "m/" + name, m);
  for (const auto& [name, v] : v_.arrays()) out.set(prefix + "v/" + name, v);
}

void Optimizer::load(const ParamStore& in, const std::string& prefix) {
  m_ = ParamStore();
  v_ = ParamStore();
  t_ = in.contains(prefix + "t") ? static_cast<long>(in.get(prefix + "t")(0, 0)) : 0;
  for (const auto& [name, a] : in.arrays()) {
    if (starts_with(name, prefix + "m/")) m_.set(name.substr(prefix.size() + 2), a);
    if (starts_with(name, prefix + "v/")) v_.set(name.substr(prefix.size() + 2), a);
  }
}

double global_norm(const ParamStore& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads.arrays()) s += g.squaredNorm();
  return std::sqrt(s);
}

}  // namespace gmdf
