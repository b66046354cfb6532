#ifndef UACTN_GRADCHECK_HPP
#define UACTN_GRADCHECK_HPP

// Objectives wrapping each loss for grad_check, and a seeded driver that
// checks all of them on one random instance.

#include <algorithm>
#include <vector>

#include "uactn/losses.hpp"
#include "uactn/model.hpp"
#include "uactn/numeric.hpp"
#include "uactn/rng.hpp"

namespace uactn {

/// Parameters {Z, W}.
inline Objective lmcl_objective(std::vector<std::size_t> labels, MarginParams p) {
  return [labels = std::move(labels), p](const std::vector<Matrix>& x) {
    auto r = lmcl(x[0], Classifier{x[1]}, labels, p);
    return Evaluation{r.loss, {std::move(r.grad_x), std::move(r.grad_w)}};
  };
}

/// Parameters {μ, log σ²}.
inline Objective kl_objective() {
  return [](const std::vector<Matrix>& x) {
    auto r = kl_gaussian(x[0], x[1]);
    return Evaluation{r.loss, {std::move(r.grad_mu), std::move(r.grad_logvar)}};
  };
}

/// Parameters {μ, log σ², W}; z is rebuilt from the fixed ε at every call.
inline Objective uncertainty_objective(Matrix eps, std::vector<std::size_t> labels,
                                       MarginParams p, double lambda) {
  return [eps = std::move(eps), labels = std::move(labels), p,
          lambda](const std::vector<Matrix>& x) {
    const Matrix z = reparameterize(GaussianEmbedding{x[0], x[1]}, eps);
    auto r = uncertainty_loss(z, x[0], x[1], Classifier{x[2]}, labels, p, lambda);
    return Evaluation{r.loss,
                      {std::move(r.grad_mu), std::move(r.grad_logvar), std::move(r.grad_w)}};
  };
}

/// Parameters {F}; the centres stay fixed.
inline Objective transfer_objective(Classifier frozen, std::vector<std::size_t> labels,
                                    MarginParams p) {
  return [frozen = std::move(frozen), labels = std::move(labels),
          p](const std::vector<Matrix>& x) {
    auto r = transfer_loss(x[0], frozen, labels, p);
    return Evaluation{r.loss, {std::move(r.grad_x)}};
  };
}

struct GradcheckSizes {
  std::size_t batch = 8;
  std::size_t dim = 16;
  std::size_t classes = 4;
};

struct GradcheckReport {
  double lmcl = 0.0;
  double kl = 0.0;
  double uncertainty = 0.0;
  double transfer = 0.0;

  double worst() const { return std::max({lmcl, kl, uncertainty, transfer}); }
};

/// Inputs uniform in [−2, 2], labels uniform, default margins and λ.
inline GradcheckReport run_gradchecks(std::uint64_t seed, const GradcheckSizes& n = {},
                                      double step = 1e-5) {
  Rng rng(seed);
  std::vector<std::size_t> labels(n.batch);
  for (auto& y : labels) y = rng.index(n.classes);
  const Matrix z = rng.uniform_matrix(n.batch, n.dim, -2.0, 2.0);
  const Matrix w = rng.uniform_matrix(n.classes, n.dim, -2.0, 2.0);
  const Matrix mu = rng.uniform_matrix(n.batch, n.dim, -2.0, 2.0);
  const Matrix logvar = rng.uniform_matrix(n.batch, n.dim, -2.0, 2.0);
  Matrix eps = rng.normal_matrix(n.batch, n.dim);
  const Matrix f = rng.uniform_matrix(n.batch, n.dim, -2.0, 2.0);

  GradcheckReport r;
  r.lmcl = grad_check(lmcl_objective(labels, kSketchMargin), {z, w}, step);
  r.kl = grad_check(kl_objective(), {mu, logvar}, step);
  r.uncertainty = grad_check(uncertainty_objective(std::move(eps), labels, kSketchMargin,
                                                   kDefaultLambda),
                             {mu, logvar, w}, step);
  r.transfer = grad_check(transfer_objective(Classifier{w, true}, labels, kShapeMargin), {f},
                          step);
  return r;
}

}  // namespace uactn

#endif  // UACTN_GRADCHECK_HPP
