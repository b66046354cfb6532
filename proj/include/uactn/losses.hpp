#ifndef UACTN_LOSSES_HPP
#define UACTN_LOSSES_HPP

// Training objectives: large-margin cosine loss over class centres, the
// Gaussian KL regulariser, their weighted sum, and the shape transfer loss
// against frozen sketch centres.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "uactn/numeric.hpp"

namespace uactn {

/// Class-centre matrix (C × D); rows are unnormalised trainable vectors.
struct Classifier {
  Matrix weight;
  bool frozen = false;

  std::size_t classes() const { return weight.rows(); }
  std::size_t dim() const { return weight.cols(); }

  Classifier frozen_copy() const { return Classifier{weight, true}; }
};

struct MarginParams {
  double s = 30.0;
  double m = 0.5;
};

inline constexpr MarginParams kSketchMargin{30.0, 0.5};
inline constexpr MarginParams kShapeMargin{15.0, 0.8};
inline constexpr double kDefaultLambda = 0.005;

using Labels = std::span<const std::size_t>;

struct MarginLossResult {
  double loss = 0.0;
  Matrix grad_x;  // w.r.t. the (unnormalised) embeddings
  Matrix grad_w;  // w.r.t. the (unnormalised) class centres
};

namespace detail {

inline void check_margin_inputs(const Matrix& x, const Classifier& c, Labels labels,
                                const MarginParams& p, const char* op) {
  if (x.rows() == 0) throw std::invalid_argument(std::string(op) + ": empty batch");
  if (c.classes() < 2) throw std::invalid_argument(std::string(op) + ": need at least 2 classes");
  if (x.cols() != c.dim()) {
    throw std::invalid_argument(std::string(op) + ": embedding " + x.shape() +
                                " vs class centres " + c.weight.shape());
  }
  if (labels.size() != x.rows()) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(x.rows()) + " rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= c.classes()) {
      throw std::out_of_range(std::string(op) + ": label " + std::to_string(labels[i]) +
                              " at row " + std::to_string(i) + " outside [0, " +
                              std::to_string(c.classes()) + ")");
    }
  }
  if (!(p.s > 0.0)) throw std::invalid_argument(std::string(op) + ": scale must be > 0");
  if (!(p.m >= 0.0 && p.m < 1.0)) throw std::invalid_argument(std::string(op) + ": margin must be in [0, 1)");
}

/// Margin softmax over scaled cosines. Gradients are w.r.t. the raw inputs.
inline MarginLossResult margin_cosine(const Matrix& x, const Matrix& w, Labels labels,
                                      const MarginParams& p, bool want_grad_w) {
  const std::size_t n = x.rows();
  const std::size_t c = w.rows();
  const Matrix xn = l2_normalize_rows(x);
  const Matrix wn = l2_normalize_rows(w);
  const Matrix cos = matmul_transposed(xn, wn);

  // dL/dcos, filled row by row alongside the loss.
  Matrix gcos(n, c);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  std::vector<double> logits(c);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = labels[i];
    for (std::size_t j = 0; j < c; ++j) {
      logits[j] = p.s * (cos(i, j) - (j == y ? p.m : 0.0));
    }
    const std::size_t top = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    const double mx = logits[top];
    double rest = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j != top) rest += std::exp(logits[j] - mx);
    }
    // Written without lse − logit_y, which cancels when the loss is tiny.
    total += (mx - logits[y]) + std::log1p(rest);
    const double denom = 1.0 + rest;
    for (std::size_t j = 0; j < c; ++j) {
      double g = 0.0;
      if (j != y) g = std::exp(logits[j] - mx) / denom;
      else if (j == top) g = -rest / denom;
      else g = std::exp(logits[j] - mx) / denom - 1.0;
      gcos(i, j) = p.s * inv_n * g;
    }
  }

  MarginLossResult r;
  r.loss = total * inv_n;
  r.grad_x = l2_normalize_rows_backward(x, matmul(gcos, wn));
  r.grad_w = want_grad_w ? l2_normalize_rows_backward(w, matmul(transpose(gcos), xn))
                         : Matrix(w.rows(), w.cols());
  return r;
}

}  // namespace detail

/// Large-margin cosine loss, mean over the batch.
inline MarginLossResult lmcl(const Matrix& z, const Classifier& w, Labels labels,
                             const MarginParams& p) {
  detail::check_margin_inputs(z, w, labels, p, "lmcl");
  return detail::margin_cosine(z, w.weight, labels, p, true);
}

struct KlResult {
  double loss = 0.0;
  Matrix grad_mu;
  Matrix grad_logvar;
};

/// KL(N(μ, σ²I) ‖ N(0, I)) per dimension, −½(1 + log σ² − μ² − σ²),
/// averaged over dimensions then over samples.
inline KlResult kl_gaussian(const Matrix& mu, const Matrix& logvar) {
  detail::require_same_shape(mu, logvar, "kl_gaussian");
  const std::size_t n = mu.rows();
  const std::size_t d = mu.cols();
  KlResult r{0.0, Matrix(n, d), Matrix(n, d)};
  if (n == 0 || d == 0) return r;
  const double inv_d = 1.0 / static_cast<double>(d);
  const double inv_nd = inv_d / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double m = mu(i, k);
      const double lv = logvar(i, k);
      const double var = std::exp(lv);
      row += -0.5 * (1.0 + lv - m * m - var);
      r.grad_mu(i, k) = m * inv_nd;
      r.grad_logvar(i, k) = 0.5 * (var - 1.0) * inv_nd;
    }
    total += row * inv_d;
  }
  r.loss = total / static_cast<double>(n);
  if (!std::isfinite(r.loss)) throw std::domain_error("kl_gaussian: non-finite loss");
  return r;
}

struct UncertaintyLossResult {
  double loss = 0.0;
  double lmcl = 0.0;
  double kl = 0.0;
  Matrix grad_z;       // margin-loss gradient at z alone
  Matrix grad_mu;      // total, through z and the KL term
  Matrix grad_logvar;  // total, through z and the KL term
  Matrix grad_w;
};

/// L_lmc(z) + λ·KL(μ, log σ²) where z = μ + ε σ was sampled from (μ, log σ²).
/// Since ∂z/∂log σ² = ½ ε σ = ½ (z − μ), ε itself is not needed.
inline UncertaintyLossResult uncertainty_loss(const Matrix& z, const Matrix& mu,
                                              const Matrix& logvar, const Classifier& w,
                                              Labels labels, const MarginParams& p,
                                              double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("uncertainty_loss: lambda must be >= 0");
  detail::require_same_shape(z, mu, "uncertainty_loss");
  detail::require_same_shape(z, logvar, "uncertainty_loss");
  MarginLossResult margin = lmcl(z, w, labels, p);
  KlResult kl = kl_gaussian(mu, logvar);

  UncertaintyLossResult r;
  r.lmcl = margin.loss;
  r.kl = kl.loss;
  r.loss = margin.loss + lambda * kl.loss;
  r.grad_mu = Matrix(z.rows(), z.cols());
  r.grad_logvar = Matrix(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double gz = margin.grad_x.values()[i];
    const double noise = z.values()[i] - mu.values()[i];
    r.grad_mu.values()[i] = gz + lambda * kl.grad_mu.values()[i];
    r.grad_logvar.values()[i] = 0.5 * gz * noise + lambda * kl.grad_logvar.values()[i];
  }
  r.grad_z = std::move(margin.grad_x);
  r.grad_w = std::move(margin.grad_w);
  return r;
}

/// Margin cosine loss of shape embeddings against frozen sketch centres.
/// The class-centre gradient is identically zero.
inline MarginLossResult transfer_loss(const Matrix& f, const Classifier& frozen,
                                      Labels labels, const MarginParams& p) {
  if (!frozen.frozen) {
    throw std::logic_error("transfer_loss: class centres must be frozen");
  }
  detail::check_margin_inputs(f, frozen, labels, p, "transfer_loss");
  return detail::margin_cosine(f, frozen.weight, labels, p, false);
}

}  // namespace uactn

#endif  // UACTN_LOSSES_HPP
