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

#include "gmdf/align.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "gmdf/core.hpp"

namespace gmdf::align {

const std::vector<PromptTemplate>& builtin_templates() {
  static const std::vector<PromptTemplate> table = {
      {"P1", "A photo of real face", "A photo of fake face"},
      {"P2", "This is a photo of real", "This is a photo of fake"},
      {"P4", "Real", "Fake"},
      {"P5", "This is how a real face looks like", "This is how a fake face looks like"},
      {"P6", "This photo contains real face", "This photo contains fake face"},
      {"P7", "Real face is in this photo", "Fake face is in this photo"},
  };
  return table;
}

PromptTemplate find_template(const std::string& id, const std::vector<PromptTemplate>& table) {
  const auto& t = table.empty() ? builtin_templates() : table;
  for (const auto& p : t) {
    if (p.id == id) return p;
  }
  throw ConfigError("unknown prompt template: " + id);
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read prompt templates: " + path.string());
  std::vector<PromptTemplate> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto a = line.find(',');
    const auto b = a == std::string::npos ? a : line.find(',', a + 1);
    if (b == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected id,real_text,fake_text");
    }
    out.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
  }
  return out;
}

Matrix text_features(const std::string& text, const TextConfig& cfg) {
  std::string s = " ";
  for (char c : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  s.push_back(' ');
  Matrix f = Matrix::Zero(1, cfg.buckets);
  const std::size_t n = static_cast<std::size_t>(cfg.ngram);
  const std::size_t count = s.size() >= n ? s.size() - n + 1 : 1;
  for (std::size_t i = 0; i < count; ++i) {
    const auto h = fnv1a64(std::string_view(s).substr(i, n));
    f(0, static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(cfg.buckets))) += 1.0;
  }
  return f / static_cast<double>(count);
}

namespace {

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

Matrix template_features(const PromptTemplate& tmpl, const TextConfig& cfg) {
  Matrix f(2, cfg.buckets);
  f.row(0) = text_features(tmpl.real_text, cfg);
  f.row(1) = text_features(tmpl.fake_text, cfg);
  return f;
}

}  // namespace

void init_text_params(ParamStore& store, const TextConfig& cfg, int embed_dim, Rng& rng) {
  store.set(kTextPrefix + "table", normal_matrix(rng, cfg.buckets, cfg.table_dim, 1.0));
  store.set(kTextPrefix + "w1", normal_matrix(rng, cfg.table_dim, cfg.hidden, 1.0 / std::sqrt(cfg.table_dim)));
  store.set(kTextPrefix + "b1", Matrix::Zero(1, cfg.hidden));
  store.set(kTextPrefix + "w2", normal_matrix(rng, cfg.hidden, embed_dim, 1.0 / std::sqrt(cfg.hidden)));
  store.set(kTextPrefix + "b2", Matrix::Zero(1, embed_dim));
  store.set(kLogTemp, Matrix::Constant(1, 1, std::log(10.0)));
}

ad::Var class_embeddings(Binding& p, const PromptTemplate& tmpl, const TextConfig& cfg) {
  ad::Var f = p.tape().constant(template_features(tmpl, cfg));
  ad::Var h = ad::matmul(f, p(kTextPrefix + "table"));
  h = ad::gelu(ad::add_row(ad::matmul(h, p(kTextPrefix + "w1")), p(kTextPrefix + "b1")));
  ad::Var out = ad::add_row(ad::matmul(h, p(kTextPrefix + "w2")), p(kTextPrefix + "b2"));
  return ad::l2_normalize_rows(out);
}

Matrix class_embeddings(const ParamStore& store, const PromptTemplate& tmpl, const TextConfig& cfg) {
  ad::Tape tape;
  Binding p(tape, store, no_params());
  return class_embeddings(p, tmpl, cfg).value();
}

ad::Var cls_logits(ad::Var pooled, ad::Var class_emb, ad::Var log_temp) {
  ad::Var e = ad::l2_normalize_rows(pooled);
  return ad::scale_by(ad::matmul_nt(e, class_emb), ad::exp(log_temp));
}

ad::Var cls_loss(ad::Var pooled, std::span<const int> labels, ad::Var class_emb, ad::Var log_temp) {
  return cls_loss_from_logits(cls_logits(pooled, class_emb, log_temp), labels);
}

ad::Var cls_loss_from_logits(ad::Var logits, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows() || labels.empty()) {
    throw std::invalid_argument("cls_loss: label count");
  }
  std::vector<Eigen::Index> rows(labels.size());
  std::vector<Eigen::Index> targets(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    rows[i] = static_cast<Eigen::Index>(i);
    targets[i] = class_index(labels[i]);
  }
  return ad::scale(ad::cross_entropy_sum(logits, rows, targets), 1.0 / static_cast<double>(labels.size()));
}

std::vector<double> prob_real(const Matrix& logits) {
  std::vector<double> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    // Two-class softmax written as a logistic of the margin.
    out[static_cast<std::size_t>(r)] = 1.0 / (1.0 + std::exp(logits(r, 1) - logits(r, 0)));
  }
  return out;
}

double binary_cross_entropy(std::span<const double> p_real, std::span<const int> labels) {
  if (p_real.size() != labels.size() || p_real.empty()) throw std::invalid_argument("binary_cross_entropy: sizes");
  double s = 0.0;
  for (std::size_t i = 0; i < p_real.size(); ++i) {
    s -= labels[i] == 1 ? std::log(p_real[i]) : std::log(1.0 - p_real[i]);
  }
  return s / static_cast<double>(p_real.size());
}

double shrinkage(double trace, Eigen::Index d) { return std::max(1e-4 * trace / static_cast<double>(d), 1e-8); }

FeatureStats feature_stats(const Matrix& features) {
  const Eigen::Index b = features.rows();
  if (b < 2) throw std::invalid_argument("feature_stats: need at least 2 samples");
  FeatureStats s;
  s.mu = features.colwise().mean();
  const Matrix xc = features.rowwise() - s.mu;
  s.sigma = (xc.transpose() * xc) / static_cast<double>(b - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  s.eps = shrinkage(s.sigma.trace(), s.sigma.rows());
  s.sigma.diagonal().array() += s.eps;
  return s;
}

namespace {

void require_symmetric(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) throw std::invalid_argument(std::string(what) + ": matrix not square");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
    throw std::invalid_argument(std::string(what) + ": matrix not symmetric");
  }
}

Matrix eig_fn(const Matrix& a, double (*fn)(double)) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(0.5 * (a + a.transpose())));
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = fn(ev(i));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double sqrt_clip(double x) { return std::sqrt(std::max(x, 0.0)); }

double inv_sqrt_clip(double x) { return 1.0 / std::sqrt(std::max(x, 1e-300)); }

void require_psd(const Matrix& a, const char* what) {
  require_symmetric(a, what);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), Eigen::EigenvaluesOnly);
  const double tol = 1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -tol) throw std::invalid_argument(std::string(what) + ": covariance not PSD");
}

}  // namespace

Matrix matrix_sqrt_psd(const Matrix& a) {
  require_symmetric(a, "matrix_sqrt_psd");
  return eig_fn(a, sqrt_clip);
}

double da_loss(const FeatureStats& s, const FeatureStats& t) {
  if (s.mu.size() != t.mu.size()) throw std::invalid_argument("da_loss: dimension mismatch");
  require_psd(s.sigma, "da_loss");
  require_psd(t.sigma, "da_loss");
  const Matrix rs = matrix_sqrt_psd(s.sigma);
  Matrix inner = rs * t.sigma * rs;
  inner = 0.5 * (inner + inner.transpose());
  const double cross = matrix_sqrt_psd(inner).trace();
  const double v = (s.mu - t.mu).squaredNorm() + s.sigma.trace() + t.sigma.trace() - 2.0 * cross;
  return std::max(v, 0.0);
}

ad::Var da_loss(const FeatureStats& source, ad::Var target_features) {
  const Matrix& x = target_features.value();
  const Eigen::Index b = x.rows();
  const Eigen::Index d = x.cols();
  if (source.mu.size() != d) throw std::invalid_argument("da_loss: dimension mismatch");
  const FeatureStats t = feature_stats(x);
  require_psd(source.sigma, "da_loss");
  const Matrix rs = matrix_sqrt_psd(source.sigma);
  Matrix a = rs * t.sigma * rs;
  a = 0.5 * (a + a.transpose());
  const double cross = matrix_sqrt_psd(a).trace();
  const double raw = (source.mu - t.mu).squaredNorm() + source.sigma.trace() + t.sigma.trace() - 2.0 * cross;
  const double value = std::max(raw, 0.0);

  auto grad = std::make_shared<Matrix>();
  if (target_features.needs_grad() && raw > 0.0) {
    // d/dSigma_t = I - S A^{-1/2} S with S = Sigma_s^{1/2}; the shrinkage
    // term adds (1e-4/d) tr(G) I unless the floor is active.
    Matrix g = Matrix::Identity(d, d) - rs * eig_fn(a, inv_sqrt_clip) * rs;
    g = 0.5 * (g + g.transpose());
    const double raw_trace = t.sigma.trace() - static_cast<double>(d) * t.eps;
    if (1e-4 * raw_trace / static_cast<double>(d) > 1e-8) g.diagonal().array() += 1e-4 / static_cast<double>(d) * g.trace();
    const Matrix xc = x.rowwise() - t.mu;
    *grad = (2.0 / static_cast<double>(b - 1)) * xc * g;
    const RowVector dmu = 2.0 * (t.mu - source.mu) / static_cast<double>(b);
    grad->rowwise() += dmu;
  } else {
    *grad = Matrix::Zero(b, d);
  }
  ad::Var parents[] = {target_features};
  return target_features.tape()->record(Matrix::Constant(1, 1, value), parents,
                                        [target_features, grad](ad::Tape& tape, std::size_t self) {
                                          tape.accumulate_expr(target_features.id(), tape.grad(self)(0, 0) * *grad);
                                        });
}

namespace {

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw std::domain_error(std::string("non-finite loss component ") + name);
}

}  // namespace

double total_loss(double l_sis, double l_cls, double l_mim, const LossWeights& w) {
  require_finite(l_sis, "L_sis");
  require_finite(l_cls, "L_cls");
  require_finite(l_mim, "L_mim");
  return w.sis * l_sis + w.cls * l_cls + w.mim * l_mim;
}

ad::Var total_loss(ad::Var l_sis, ad::Var l_cls, ad::Var l_mim, const LossWeights& w) {
  require_finite(l_sis.scalar(), "L_sis");
  require_finite(l_cls.scalar(), "L_cls");
  require_finite(l_mim.scalar(), "L_mim");
  return ad::add(ad::add(ad::scale(l_sis, w.sis), ad::scale(l_cls, w.cls)), ad::scale(l_mim, w.mim));
}

}  // namespace gmdf::align
