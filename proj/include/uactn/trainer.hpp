#ifndef UACTN_TRAINER_HPP
#define UACTN_TRAINER_HPP

// Two decoupled training stages:
//   1. sketch encoder + class centres under the uncertainty loss;
//   2. shape encoder under the transfer loss against the frozen centres.
// Both use mini-batch SGD with an epoch-level cosine-annealed rate.

#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "uactn/config.hpp"
#include "uactn/data.hpp"
#include "uactn/losses.hpp"
#include "uactn/model.hpp"
#include "uactn/rng.hpp"

namespace uactn {

/// lr0 · ½(1 + cos(π t / T)).
inline double cosine_lr(std::size_t t, std::size_t total, double lr0) {
  if (total == 0) throw std::invalid_argument("cosine_lr: total epochs must be positive");
  if (t > total) {
    throw std::out_of_range("cosine_lr: epoch " + std::to_string(t) + " beyond schedule of " +
                            std::to_string(total));
  }
  if (t == total) return 0.0;
  const double frac = static_cast<double>(t) / static_cast<double>(total);
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

/// v ← momentum·v + g;  p ← p − lr·v.
inline void sgd_step(Matrix& param, const Matrix& grad, double lr, double momentum,
                     Matrix& velocity) {
  if (!param.same_shape(grad) || !param.same_shape(velocity)) {
    throw std::invalid_argument("sgd_step: shape mismatch param " + param.shape() + ", grad " +
                                grad.shape() + ", velocity " + velocity.shape());
  }
  if (!(lr >= 0.0)) throw std::invalid_argument("sgd_step: lr must be >= 0");
  auto p = param.values();
  auto g = grad.values();
  auto v = velocity.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

/// Applies sgd_step across matching parameter lists.
inline void sgd_step(const std::vector<Matrix*>& params, const std::vector<Matrix*>& grads,
                     double lr, double momentum, const std::vector<Matrix*>& velocity) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_step: parameter list lengths differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    sgd_step(*params[i], *grads[i], lr, momentum, *velocity[i]);
  }
}

struct EpochStat {
  std::size_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  bool operator==(const EpochStat&) const = default;
};

struct TrainReport {
  std::vector<EpochStat> epochs;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;  // informational; excluded from equality and files

  bool operator==(const TrainReport& o) const {
    return epochs == o.epochs && seed == o.seed;
  }
};

/// `seed=<s>` then one `<epoch> <loss> <lr>` line per epoch.
inline void write_report(std::ostream& out, const TrainReport& r) {
  out << "seed=" << r.seed << '\n' << "# epoch loss lr\n";
  for (const auto& e : r.epochs) {
    out << e.epoch << ' ' << format_double(e.loss) << ' ' << format_double(e.lr) << '\n';
  }
}

struct Stage1Result {
  SketchModel model;
  Classifier classifier;  // frozen on return
  TrainReport report;
};

struct Stage2Result {
  ShapeEncoder encoder;
  TrainReport report;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch,
                                                           Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t end = std::min(n, start + batch);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

[[noreturn]] inline void diverged(const char* stage, std::size_t epoch, std::size_t batch,
                                  const std::exception& cause) {
  throw std::runtime_error(std::string(stage) + ": training diverged at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch) + " (" +
                           cause.what() + "); lower lr0 or check the input features");
}

inline void require_finite_loss(double loss) {
  if (!std::isfinite(loss)) throw std::domain_error("non-finite loss");
}

}  // namespace detail

/// Stage 1. Draw order from `rng`: model init, class-centre init, then per
/// epoch a shuffle followed by one ε matrix per batch.
inline Stage1Result train_stage1(const std::vector<const SampleRecord*>& data,
                                 const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_stage1: empty dataset");
  std::vector<std::size_t> per_class(cfg.classes, 0);
  for (const auto* r : data) {
    if (r->modality != Modality::sketch) {
      throw std::invalid_argument("train_stage1: record " + r->id + " is not a sketch");
    }
    if (r->label >= cfg.classes) {
      throw std::invalid_argument("train_stage1: record " + r->id + " label " +
                                  std::to_string(r->label) + " >= classes");
    }
    if (r->payload.rows() != 1 || r->payload.cols() != cfg.input_dim) {
      throw std::invalid_argument("train_stage1: record " + r->id + " has width " +
                                  std::to_string(r->payload.cols()) + ", config input_dim " +
                                  std::to_string(cfg.input_dim));
    }
    ++per_class[r->label];
  }
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    if (per_class[c] == 0) {
      throw std::invalid_argument("train_stage1: class " + std::to_string(c) +
                                  " has no training sketch");
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  Stage1Result res;
  res.model = init_sketch_model(cfg, rng);
  res.classifier.weight = init_linear(cfg.embed_dim, cfg.classes, rng).weight;
  res.report.seed = rng.seed();

  SketchModel vel_model = zeros_like(res.model);
  Matrix vel_w(res.classifier.weight.rows(), res.classifier.weight.cols());
  const MarginParams margin{cfg.s_sketch, cfg.m_s};

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.max_epochs, cfg.lr0);
    double epoch_loss = 0.0;
    const auto batches = detail::epoch_batches(data.size(), cfg.batch_size, rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      Matrix x(idx.size(), cfg.input_dim);
      std::vector<std::size_t> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto* r = data[idx[i]];
        std::copy(r->payload.row(0).begin(), r->payload.row(0).end(), x.row(i).begin());
        labels[i] = r->label;
      }
      SketchCache cache;
      SketchModel grads = zeros_like(res.model);
      UncertaintyLossResult loss;
      try {
        const GaussianEmbedding e = encode_sketch(res.model, x, &cache);
        const Matrix eps = rng.normal_matrix(idx.size(), cfg.embed_dim);
        const Matrix z = reparameterize(e, eps);
        loss = uncertainty_loss(z, e.mu, e.logvar, res.classifier, labels, margin, cfg.lambda);
        detail::require_finite_loss(loss.loss);
        encode_sketch_backward(res.model, cache, loss.grad_mu, loss.grad_logvar, grads);
      } catch (const std::domain_error& err) {
        detail::diverged("train_stage1", epoch, b, err);
      }
      sgd_step(parameters(res.model), parameters(grads), lr, cfg.momentum,
               parameters(vel_model));
      sgd_step(res.classifier.weight, loss.grad_w, lr, cfg.momentum, vel_w);
      epoch_loss += loss.loss * static_cast<double>(idx.size());
    }
    res.report.epochs.push_back({epoch, epoch_loss / static_cast<double>(data.size()), lr});
  }
  res.classifier.frozen = true;
  res.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Stage 2. `centres` is only read; its weights are never modified.
inline Stage2Result train_stage2(const std::vector<const SampleRecord*>& data,
                                 const Classifier& centres, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (!centres.frozen) throw std::logic_error("train_stage2: class centres must be frozen");
  if (data.empty()) throw std::invalid_argument("train_stage2: empty dataset");
  if (centres.dim() != cfg.embed_dim) {
    throw std::invalid_argument("train_stage2: class centres have dim " +
                                std::to_string(centres.dim()) + ", config embed_dim " +
                                std::to_string(cfg.embed_dim));
  }
  for (const auto* r : data) {
    if (r->modality != Modality::shape) {
      throw std::invalid_argument("train_stage2: record " + r->id + " is not a shape");
    }
    if (r->label >= centres.classes()) {
      throw std::invalid_argument("train_stage2: shape " + r->id + " has class " +
                                  std::to_string(r->label) + " unknown to the sketch centres");
    }
    if (r->payload.cols() != cfg.view_dim || r->payload.rows() == 0) {
      throw std::invalid_argument("train_stage2: shape " + r->id + " has views " +
                                  r->payload.shape() + ", config view_dim " +
                                  std::to_string(cfg.view_dim));
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  Stage2Result res;
  res.encoder = init_shape_encoder(cfg, rng);
  res.report.seed = rng.seed();
  ShapeEncoder vel = zeros_like(res.encoder);
  const MarginParams margin{cfg.s_shape, cfg.m_v};

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.max_epochs, cfg.lr0);
    double epoch_loss = 0.0;
    const auto batches = detail::epoch_batches(data.size(), cfg.batch_size, rng);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      std::vector<Matrix> shapes;
      std::vector<std::size_t> labels;
      shapes.reserve(idx.size());
      for (std::size_t i : idx) {
        shapes.push_back(data[i]->payload);
        labels.push_back(data[i]->label);
      }
      ShapeCache cache;
      ShapeEncoder grads = zeros_like(res.encoder);
      MarginLossResult loss;
      try {
        const Matrix f = encode_shapes(res.encoder, shapes, &cache);
        loss = transfer_loss(f, centres, labels, margin);
        detail::require_finite_loss(loss.loss);
        encode_shapes_backward(res.encoder, cache, loss.grad_x, grads);
      } catch (const std::domain_error& err) {
        detail::diverged("train_stage2", epoch, b, err);
      }
      sgd_step(parameters(res.encoder), parameters(grads), lr, cfg.momentum, parameters(vel));
      epoch_loss += loss.loss * static_cast<double>(idx.size());
    }
    res.report.epochs.push_back({epoch, epoch_loss / static_cast<double>(data.size()), lr});
  }
  res.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Index of the class centre with the highest cosine to each row.
inline std::vector<std::size_t> nearest_centre(const Matrix& embeddings, const Classifier& c) {
  const Matrix cos = cosine_matrix(embeddings, c.weight);
  std::vector<std::size_t> out(cos.rows());
  for (std::size_t i = 0; i < cos.rows(); ++i) {
    auto r = cos.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch helpers shared by the CLI and experiments

inline Matrix stack_sketches(const std::vector<const SampleRecord*>& recs) {
  if (recs.empty()) return Matrix();
  Matrix x(recs.size(), recs.front()->payload.cols());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i]->payload.rows() != 1 || recs[i]->payload.cols() != x.cols()) {
      throw std::invalid_argument("stack_sketches: record " + recs[i]->id + " has payload " +
                                  recs[i]->payload.shape());
    }
    std::copy(recs[i]->payload.row(0).begin(), recs[i]->payload.row(0).end(), x.row(i).begin());
  }
  return x;
}

inline Matrix embed_shapes(const ShapeEncoder& enc, const std::vector<const SampleRecord*>& recs) {
  std::vector<Matrix> views;
  views.reserve(recs.size());
  for (const auto* r : recs) views.push_back(r->payload);
  return encode_shapes(enc, views);
}

inline std::vector<std::size_t> labels_of(const std::vector<const SampleRecord*>& recs) {
  std::vector<std::size_t> out;
  out.reserve(recs.size());
  for (const auto* r : recs) out.push_back(r->label);
  return out;
}

}  // namespace uactn

#endif  // UACTN_TRAINER_HPP
