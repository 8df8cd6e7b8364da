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

#include "gmdf/autodiff.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gmdf::ad {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || p.needs_grad();
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.grad.size() == 0 ? empty_ : n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::backward(Var out) {
  if (out.tape() != this) throw std::invalid_argument("backward: foreign variable");
  if (out.rows() != 1 || out.cols() != 1) throw std::invalid_argument("backward: output must be 1x1");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[out.id()].needs_grad) return;
  nodes_[out.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, i);
  }
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("autodiff shape error: ") + what);
}

Tape& tape_of(Var a) { return *a.tape(); }

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul");
  Var parents[] = {a, b};
  return tape_of(a).record(a.value() * b.value(), parents, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (a.needs_grad()) t.accumulate_expr(a.id(), g * b.value().transpose());
    if (b.needs_grad()) t.accumulate_expr(b.id(), a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  require(a.cols() == b.cols(), "matmul_nt");
  Var parents[] = {a, b};
  return tape_of(a).record(a.value() * b.value().transpose(), parents, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (a.needs_grad()) t.accumulate_expr(a.id(), g * b.value());
    if (b.needs_grad()) t.accumulate_expr(b.id(), g.transpose() * a.value());
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Var parents[] = {a, b};
  return tape_of(a).record(a.value() + b.value(), parents, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (a.needs_grad()) t.accumulate(a.id(), g);
    if (b.needs_grad()) t.accumulate(b.id(), g);
  });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Var parents[] = {a, b};
  return tape_of(a).record(a.value() - b.value(), parents, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (a.needs_grad()) t.accumulate(a.id(), g);
    if (b.needs_grad()) t.accumulate_expr(b.id(), -g);
  });
}

Var hadamard(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard");
  Var parents[] = {a, b};
  return tape_of(a).record(a.value().cwiseProduct(b.value()), parents, [a, b](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (a.needs_grad()) t.accumulate_expr(a.id(), g.cwiseProduct(b.value()));
    if (b.needs_grad()) t.accumulate_expr(b.id(), g.cwiseProduct(a.value()));
  });
}

Var scale(Var x, double c) {
  Var parents[] = {x};
  return tape_of(x).record(x.value() * c, parents, [x, c](Tape& t, std::size_t self) {
    t.accumulate_expr(x.id(), t.grad(self) * c);
  });
}

Var scale_by(Var x, Var s) {
  require(s.rows() == 1 && s.cols() == 1, "scale_by");
  Var parents[] = {x, s};
  return tape_of(x).record(s.scalar() * x.value(), parents, [x, s](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (x.needs_grad()) t.accumulate_expr(x.id(), s.scalar() * g);
    if (s.needs_grad()) t.accumulate_expr(s.id(), Matrix::Constant(1, 1, g.cwiseProduct(x.value()).sum()));
  });
}

Var add_row(Var x, Var row) {
  require(row.rows() == 1 && row.cols() == x.cols(), "add_row");
  Matrix out = x.value().rowwise() + row.value().row(0);
  Var parents[] = {x, row};
  return tape_of(x).record(std::move(out), parents, [x, row](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (x.needs_grad()) t.accumulate(x.id(), g);
    if (row.needs_grad()) t.accumulate_expr(row.id(), g.colwise().sum());
  });
}

Var mul_row(Var x, Var row) {
  require(row.rows() == 1 && row.cols() == x.cols(), "mul_row");
  Matrix out = x.value().array().rowwise() * row.value().row(0).array();
  Var parents[] = {x, row};
  return tape_of(x).record(std::move(out), parents, [x, row](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (x.needs_grad()) t.accumulate_expr(x.id(), (g.array().rowwise() * row.value().row(0).array()).matrix());
    if (row.needs_grad()) t.accumulate_expr(row.id(), g.cwiseProduct(x.value()).colwise().sum());
  });
}

Var mul_blocks(Var x, Var g, Eigen::Index block_rows) {
  require(g.cols() == x.cols() && g.rows() * block_rows == x.rows(), "mul_blocks");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index b = 0; b < g.rows(); ++b) {
    out.middleRows(b * block_rows, block_rows) =
        x.value().middleRows(b * block_rows, block_rows).array().rowwise() * g.value().row(b).array();
  }
  Var parents[] = {x, g};
  return tape_of(x).record(std::move(out), parents, [x, g, block_rows](Tape& t, std::size_t self) {
    const Matrix& up = t.grad(self);
    if (x.needs_grad()) {
      Matrix dx(x.rows(), x.cols());
      for (Eigen::Index b = 0; b < g.rows(); ++b) {
        dx.middleRows(b * block_rows, block_rows) =
            up.middleRows(b * block_rows, block_rows).array().rowwise() * g.value().row(b).array();
      }
      t.accumulate(x.id(), dx);
    }
    if (g.needs_grad()) {
      Matrix dg(g.rows(), g.cols());
      for (Eigen::Index b = 0; b < g.rows(); ++b) {
        dg.row(b) = up.middleRows(b * block_rows, block_rows)
                        .cwiseProduct(x.value().middleRows(b * block_rows, block_rows))
                        .colwise()
                        .sum();
      }
      t.accumulate(g.id(), dg);
    }
  });
}

Var add_blocks(Var x, Var g, Eigen::Index block_rows) {
  require(g.cols() == x.cols() && g.rows() * block_rows == x.rows(), "add_blocks");
  Matrix out = x.value();
  for (Eigen::Index b = 0; b < g.rows(); ++b) {
    out.middleRows(b * block_rows, block_rows).rowwise() += g.value().row(b);
  }
  Var parents[] = {x, g};
  return tape_of(x).record(std::move(out), parents, [x, g, block_rows](Tape& t, std::size_t self) {
    const Matrix& up = t.grad(self);
    if (x.needs_grad()) t.accumulate(x.id(), up);
    if (g.needs_grad()) {
      Matrix dg(g.rows(), g.cols());
      for (Eigen::Index b = 0; b < g.rows(); ++b) dg.row(b) = up.middleRows(b * block_rows, block_rows).colwise().sum();
      t.accumulate(g.id(), dg);
    }
  });
}

Var add_tiled(Var x, Var p) {
  require(p.cols() == x.cols() && p.rows() > 0 && x.rows() % p.rows() == 0, "add_tiled");
  const Eigen::Index block = p.rows();
  const Eigen::Index n = x.rows() / block;
  Matrix out = x.value();
  for (Eigen::Index b = 0; b < n; ++b) out.middleRows(b * block, block) += p.value();
  Var parents[] = {x, p};
  return tape_of(x).record(std::move(out), parents, [x, p, block, n](Tape& t, std::size_t self) {
    const Matrix& up = t.grad(self);
    if (x.needs_grad()) t.accumulate(x.id(), up);
    if (p.needs_grad()) {
      Matrix dp = Matrix::Zero(block, p.cols());
      for (Eigen::Index b = 0; b < n; ++b) dp += up.middleRows(b * block, block);
      t.accumulate(p.id(), dp);
    }
  });
}

Var exp(Var x) {
  Matrix out = x.value().array().exp().matrix();
  Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x](Tape& t, std::size_t self) {
    t.accumulate_expr(x.id(), t.grad(self).cwiseProduct(t.value(self)));
  });
}

Var gelu(Var x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  Matrix out = x.value().unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
  Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x](Tape& t, std::size_t self) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = x.value().unaryExpr([inv_sqrt_2pi](double v) {
      return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
    });
    t.accumulate_expr(x.id(), t.grad(self).cwiseProduct(d));
  });
}

Var cols(Var x, Eigen::Index start, Eigen::Index n) {
  require(start >= 0 && n >= 0 && start + n <= x.cols(), "cols");
  Var parents[] = {x};
  return tape_of(x).record(x.value().middleCols(start, n), parents, [x, start, n](Tape& t, std::size_t self) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    dx.middleCols(start, n) = t.grad(self);
    t.accumulate(x.id(), dx);
  });
}

Var take_rows(Var x, std::span<const Eigen::Index> rows) {
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < x.rows(), "take_rows index");
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(idx[i]);
  }
  Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) dx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(x.id(), dx);
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows empty");
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    require(p.cols() == parts[0].cols(), "concat_rows cols");
    total += p.rows();
  }
  Matrix out(total, parts[0].cols());
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return tape_of(parts[0]).record(std::move(out), parts, [ps = std::move(ps)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Eigen::Index r0 = 0;
    for (const Var& p : ps) {
      if (p.needs_grad()) t.accumulate(p.id(), g.middleRows(r0, p.rows()));
      r0 += p.rows();
    }
  });
}

Var reshape(Var x, Eigen::Index rows, Eigen::Index cols_) {
  require(rows * cols_ == x.rows() * x.cols(), "reshape");
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols_);
  Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    t.accumulate(x.id(), Eigen::Map<const Matrix>(g.data(), x.rows(), x.cols()));
  });
}

Var replace_rows(Var x, std::span<const Eigen::Index> rows, Var token) {
  require(token.rows() == 1 && token.cols() == x.cols(), "replace_rows");
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  Matrix out = x.value();
  for (Eigen::Index r : idx) {
    require(r >= 0 && r < x.rows(), "replace_rows index");
    out.row(r) = token.value().row(0);
  }
  Var parents[] = {x, token};
  return tape_of(x).record(std::move(out), parents, [x, token, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (x.needs_grad()) {
      Matrix dx = g;
      for (Eigen::Index r : idx) dx.row(r).setZero();
      t.accumulate(x.id(), dx);
    }
    if (token.needs_grad()) {
      Matrix dt = Matrix::Zero(1, x.cols());
      for (Eigen::Index r : idx) dt += g.row(r);
      t.accumulate(token.id(), dt);
    }
  });
}

Var prepend_to_blocks(Var x, Var row, Eigen::Index block_rows) {
  require(row.rows() == 1 && row.cols() == x.cols() && block_rows > 0 && x.rows() % block_rows == 0,
          "prepend_to_blocks");
  const Eigen::Index n = x.rows() / block_rows;
  const Eigen::Index out_block = block_rows + 1;
  Matrix out(n * out_block, x.cols());
  for (Eigen::Index b = 0; b < n; ++b) {
    out.row(b * out_block) = row.value().row(0);
    out.middleRows(b * out_block + 1, block_rows) = x.value().middleRows(b * block_rows, block_rows);
  }
  Var parents[] = {x, row};
  return tape_of(x).record(std::move(out), parents, [x, row, block_rows, n, out_block](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (x.needs_grad()) {
      Matrix dx(x.rows(), x.cols());
      for (Eigen::Index b = 0; b < n; ++b) dx.middleRows(b * block_rows, block_rows) = g.middleRows(b * out_block + 1, block_rows);
      t.accumulate(x.id(), dx);
    }
    if (row.needs_grad()) {
      Matrix dr = Matrix::Zero(1, x.cols());
      for (Eigen::Index b = 0; b < n; ++b) dr += g.row(b * out_block);
      t.accumulate(row.id(), dr);
    }
  });
}

Var sum(Var x) {
  Var parents[] = {x};
  return tape_of(x).record(Matrix::Constant(1, 1, x.value().sum()), parents, [x](Tape& t, std::size_t self) {
    t.accumulate_expr(x.id(), Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Var mean(Var x) {
  const double inv = 1.0 / static_cast<double>(x.value().size());
  Var parents[] = {x};
  return tape_of(x).record(Matrix::Constant(1, 1, x.value().sum() * inv), parents, [x, inv](Tape& t, std::size_t self) {
    t.accumulate_expr(x.id(), Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0) * inv));
  });
}

Var squared_norm(Var x) {
  Var parents[] = {x};
  return tape_of(x).record(Matrix::Constant(1, 1, x.value().squaredNorm()), parents, [x](Tape& t, std::size_t self) {
    t.accumulate_expr(x.id(), 2.0 * t.grad(self)(0, 0) * x.value());
  });
}

Var mean_blocks(Var x, Eigen::Index block_rows) {
  require(block_rows > 0 && x.rows() % block_rows == 0, "mean_blocks");
  const Eigen::Index n = x.rows() / block_rows;
  const double inv = 1.0 / static_cast<double>(block_rows);
  Matrix out(n, x.cols());
  for (Eigen::Index b = 0; b < n; ++b) out.row(b) = x.value().middleRows(b * block_rows, block_rows).colwise().sum() * inv;
  Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, block_rows, n, inv](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix dx(x.rows(), x.cols());
    for (Eigen::Index b = 0; b < n; ++b) dx.middleRows(b * block_rows, block_rows).rowwise() = g.row(b) * inv;
    t.accumulate(x.id(), dx);
  });
}

Var normalize_rows(Var x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("normalize_rows: eps must be positive");
  const Eigen::Index d = x.cols();
  Matrix out(x.rows(), d);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto row = x.value().row(r);
    const double mu = row.mean();
    const double var = (row.array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    out.row(r) = (row.array() - mu) * inv_std(r);
  }
  Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, inv_std](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double mg = g.row(r).mean();
      const double mgy = g.row(r).dot(y.row(r)) / static_cast<double>(g.cols());
      dx.row(r) = inv_std(r) * (g.row(r).array() - mg - y.row(r).array() * mgy);
    }
    t.accumulate(x.id(), dx);
  });
}

Var l2_normalize_rows(Var x) {
  Matrix out(x.rows(), x.cols());
  Eigen::VectorXd norms(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    norms(r) = x.value().row(r).norm();
    if (!(norms(r) > 0.0)) throw std::domain_error("l2_normalize_rows: zero-norm row " + std::to_string(r));
    out.row(r) = x.value().row(r) / norms(r);
  }
  Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, norms](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      dx.row(r) = (g.row(r) - y.row(r) * g.row(r).dot(y.row(r))) / norms(r);
    }
    t.accumulate(x.id(), dx);
  });
}

namespace {

void softmax_inplace(Eigen::Ref<Matrix> m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

}  // namespace

Var softmax_rows(Var x) {
  Matrix out = x.value();
  softmax_inplace(out);
  Var parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      dx.row(r) = y.row(r).array() * (g.row(r).array() - g.row(r).dot(y.row(r)));
    }
    t.accumulate(x.id(), dx);
  });
}

Var attention(Var q, Var k, Var v, Eigen::Index batch, Eigen::Index heads, Matrix* weights_out) {
  require(batch > 0 && heads > 0, "attention batch/heads");
  require(q.rows() % batch == 0 && k.rows() % batch == 0 && k.rows() == v.rows(), "attention rows");
  require(q.cols() == k.cols() && k.cols() == v.cols() && q.cols() % heads == 0, "attention cols");
  const Eigen::Index tq = q.rows() / batch;
  const Eigen::Index tk = k.rows() / batch;
  const Eigen::Index dk = q.cols() / heads;
  const double s = 1.0 / std::sqrt(static_cast<double>(dk));

  auto maps = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(batch * heads));
  Matrix out(q.rows(), q.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      const auto qb = q.value().block(b * tq, h * dk, tq, dk);
      const auto kb = k.value().block(b * tk, h * dk, tk, dk);
      const auto vb = v.value().block(b * tk, h * dk, tk, dk);
      Matrix a = (qb * kb.transpose()) * s;
      softmax_inplace(a);
      out.block(b * tq, h * dk, tq, dk) = a * vb;
      (*maps)[static_cast<std::size_t>(b * heads + h)] = std::move(a);
    }
  }
  if (weights_out != nullptr) {
    weights_out->resize(batch * heads * tq, tk);
    for (Eigen::Index i = 0; i < batch * heads; ++i) weights_out->middleRows(i * tq, tq) = (*maps)[static_cast<std::size_t>(i)];
  }
  Var parents[] = {q, k, v};
  return tape_of(q).record(std::move(out), parents, [q, k, v, batch, heads, tq, tk, dk, s, maps](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix dq = Matrix::Zero(q.rows(), q.cols());
    Matrix dkm = Matrix::Zero(k.rows(), k.cols());
    Matrix dv = Matrix::Zero(v.rows(), v.cols());
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index h = 0; h < heads; ++h) {
        const Matrix& a = (*maps)[static_cast<std::size_t>(b * heads + h)];
        const auto qb = q.value().block(b * tq, h * dk, tq, dk);
        const auto kb = k.value().block(b * tk, h * dk, tk, dk);
        const auto vb = v.value().block(b * tk, h * dk, tk, dk);
        const auto gb = g.block(b * tq, h * dk, tq, dk);
        dv.block(b * tk, h * dk, tk, dk) = a.transpose() * gb;
        Matrix da = gb * vb.transpose();
        Matrix ds(tq, tk);
        for (Eigen::Index r = 0; r < tq; ++r) {
          ds.row(r) = a.row(r).array() * (da.row(r).array() - da.row(r).dot(a.row(r)));
        }
        dq.block(b * tq, h * dk, tq, dk) = ds * kb * s;
        dkm.block(b * tk, h * dk, tk, dk) = ds.transpose() * qb * s;
      }
    }
    if (q.needs_grad()) t.accumulate(q.id(), dq);
    if (k.needs_grad()) t.accumulate(k.id(), dkm);
    if (v.needs_grad()) t.accumulate(v.id(), dv);
  });
}

Var cross_entropy_sum(Var logits, std::span<const Eigen::Index> rows, std::span<const Eigen::Index> targets) {
  require(rows.size() == targets.size(), "cross_entropy_sum sizes");
  std::vector<Eigen::Index> ridx(rows.begin(), rows.end());
  std::vector<Eigen::Index> tidx(targets.begin(), targets.end());
  double total = 0.0;
  auto probs = std::make_shared<Matrix>(static_cast<Eigen::Index>(ridx.size()), logits.cols());
  for (std::size_t i = 0; i < ridx.size(); ++i) {
    require(ridx[i] >= 0 && ridx[i] < logits.rows(), "cross_entropy_sum row");
    require(tidx[i] >= 0 && tidx[i] < logits.cols(), "cross_entropy_sum target");
    const auto row = logits.value().row(ridx[i]);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    total += lse - row(tidx[i]);
    probs->row(static_cast<Eigen::Index>(i)) = (row.array() - lse).exp();
  }
  Var parents[] = {logits};
  return tape_of(logits).record(Matrix::Constant(1, 1, total), parents,
                                [logits, ridx = std::move(ridx), tidx = std::move(tidx), probs](Tape& t, std::size_t self) {
                                  const double g = t.grad(self)(0, 0);
                                  Matrix dx = Matrix::Zero(logits.rows(), logits.cols());
                                  for (std::size_t i = 0; i < ridx.size(); ++i) {
                                    dx.row(ridx[i]) += g * probs->row(static_cast<Eigen::Index>(i));
                                    dx(ridx[i], tidx[i]) -= g;
                                  }
                                  t.accumulate(logits.id(), dx);
                                });
}

}  // namespace gmdf::ad
