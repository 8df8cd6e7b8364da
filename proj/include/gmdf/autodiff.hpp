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

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace gmdf {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

namespace ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  bool needs_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in topological order,
/// so backward() simply walks the node list in reverse.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Var constant(Matrix value);
  Var leaf(Matrix value);

  /// Appends a derived node. `backward` is only kept when some parent needs
  /// a gradient.
  Var record(Matrix value, std::span<const Var> parents, Backward backward);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
  void backward(Var out);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  void accumulate(std::size_t id, const Matrix& g);

  template <typename Expr>
  void accumulate_expr(std::size_t id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
  Matrix empty_;
};

// ---- elementwise / linear algebra -----------------------------------------

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var x, double c);
/// s is 1x1; returns s * x.
Var scale_by(Var x, Var s);
/// x + row (row is 1 x cols, broadcast down the rows).
Var add_row(Var x, Var row);
/// x .* row (row is 1 x cols, broadcast down the rows).
Var mul_row(Var x, Var row);
/// x (blocks*T x d) .* g (blocks x d), row b of g applied to block b.
Var mul_blocks(Var x, Var g, Eigen::Index block_rows);
/// x (blocks*T x d) + g (blocks x d).
Var add_blocks(Var x, Var g, Eigen::Index block_rows);
/// x (blocks*T x d) + p (T x d), p repeated for every block.
Var add_tiled(Var x, Var p);
Var exp(Var x);
Var gelu(Var x);

// ---- shape ------------------------------------------------------------------

Var cols(Var x, Eigen::Index start, Eigen::Index n);
Var take_rows(Var x, std::span<const Eigen::Index> rows);
Var concat_rows(std::span<const Var> parts);
/// Row-major reinterpretation; rows*cols must be preserved.
Var reshape(Var x, Eigen::Index rows, Eigen::Index cols);
/// Replaces the listed rows of x by the single row `token`.
Var replace_rows(Var x, std::span<const Eigen::Index> rows, Var token);
/// Prepends `row` to each block of `block_rows` rows of x.
Var prepend_to_blocks(Var x, Var row, Eigen::Index block_rows);

// ---- reductions -----------------------------------------------------------

Var sum(Var x);
Var mean(Var x);
Var squared_norm(Var x);
/// Mean over each block of `block_rows` consecutive rows: (B*T x d) -> (B x d).
Var mean_blocks(Var x, Eigen::Index block_rows);

// ---- normalization / attention ----------------------------------------------

/// Per-row (x - mean) / sqrt(var + eps), population variance.
Var normalize_rows(Var x, double eps);
/// Per-row x / ||x||. Throws on a zero row.
Var l2_normalize_rows(Var x);
Var softmax_rows(Var x);

/// Multi-head scaled dot-product attention, independently per batch item.
/// q: (B*Tq x d), k,v: (B*Tk x d). Scale 1/sqrt(d/heads).
/// If `weights_out` is given it receives the attention maps, row-stacked as
/// (B*heads*Tq x Tk).
Var attention(Var q, Var k, Var v, Eigen::Index batch, Eigen::Index heads,
              Matrix* weights_out = nullptr);

// ---- losses -----------------------------------------------------------------

/// Sum over the listed rows of -log softmax(logits)[target]; `rows` and
/// `targets` have equal length.
Var cross_entropy_sum(Var logits, std::span<const Eigen::Index> rows,
                      std::span<const Eigen::Index> targets);

}  // namespace ad
}  // namespace gmdf
