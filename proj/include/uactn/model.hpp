#ifndef UACTN_MODEL_HPP
#define UACTN_MODEL_HPP

// Sketch encoder with a Gaussian (mean, log-variance) head, and the
// multi-view shape encoder whose view features are mean-pooled before a
// projection into the sketch embedding space.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uactn/config.hpp"
#include "uactn/numeric.hpp"
#include "uactn/rng.hpp"

namespace uactn {

struct Linear {
  Matrix weight;  // out × in
  Matrix bias;    // 1 × out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  bool operator==(const Linear&) const = default;
};

/// Fully connected stack; relu after every layer except the last.
struct Mlp {
  std::vector<Linear> layers;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  bool operator==(const Mlp&) const = default;
};

/// Per-layer activations kept for the backward pass.
struct MlpCache {
  std::vector<Matrix> inputs;  // input to layer l
  std::vector<Matrix> pre;     // pre-activation output of layer l
};

inline Matrix linear_forward(const Linear& l, const Matrix& x) {
  if (x.cols() != l.in_dim()) {
    throw std::invalid_argument("linear: input width " + std::to_string(x.cols()) +
                                " does not match layer input " +
                                std::to_string(l.in_dim()));
  }
  return add_row(matmul_transposed(x, l.weight), l.bias);
}

inline Matrix forward(const Mlp& net, const Matrix& x, MlpCache* cache = nullptr) {
  if (net.layers.empty()) throw std::invalid_argument("mlp: no layers");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Matrix pre = linear_forward(net.layers[l], h);
    const bool last = l + 1 == net.layers.size();
    Matrix next = last ? pre : relu(pre);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  return h;
}

/// Accumulates parameter gradients into `grads` (same shape as `net`) and
/// returns the gradient w.r.t. the network input.
inline Matrix backward(const Mlp& net, const MlpCache& cache, Matrix grad_out,
                       Mlp& grads) {
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    if (l + 1 != net.layers.size()) grad_out = relu_backward(cache.pre[l], grad_out);
    const Matrix& x = cache.inputs[l];
    Linear& g = grads.layers[l];
    // pre = x·Wᵀ + b  ⇒  dW = gradᵀ·x, db = Σ rows(grad), dx = grad·W
    g.weight = add(g.weight, matmul(transpose(grad_out), x));
    g.bias = add(g.bias, sum_rows(grad_out));
    grad_out = matmul(grad_out, net.layers[l].weight);
  }
  return grad_out;
}

struct GaussianHead {
  Mlp mu;
  Mlp logvar;
  bool operator==(const GaussianHead&) const = default;
};

/// Row i holds sample i: mean μ_i and log σ_i².
struct GaussianEmbedding {
  Matrix mu;
  Matrix logvar;

  Matrix sigma() const { return exp(scale(logvar, 0.5)); }
  Matrix variance() const { return exp(logvar); }
};

struct SketchModel {
  Mlp backbone;
  GaussianHead head;

  std::size_t in_dim() const { return backbone.in_dim(); }
  std::size_t embed_dim() const { return head.mu.out_dim(); }
  bool operator==(const SketchModel&) const = default;
};

struct ShapeEncoder {
  Mlp view_backbone;
  Mlp proj;

  std::size_t in_dim() const { return view_backbone.in_dim(); }
  std::size_t embed_dim() const { return proj.out_dim(); }
  bool operator==(const ShapeEncoder&) const = default;
};

// ---------------------------------------------------------------------------
// Parameter traversal (fixed order; used by SGD and checkpoints)

inline void collect(Mlp& m, std::vector<Matrix*>& out) {
  for (auto& l : m.layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
}
inline void collect(SketchModel& m, std::vector<Matrix*>& out) {
  collect(m.backbone, out);
  collect(m.head.mu, out);
  collect(m.head.logvar, out);
}
inline void collect(ShapeEncoder& m, std::vector<Matrix*>& out) {
  collect(m.view_backbone, out);
  collect(m.proj, out);
}

template <class Model>
std::vector<Matrix*> parameters(Model& m) {
  std::vector<Matrix*> out;
  collect(m, out);
  return out;
}

/// Same structure as `m`, every entry zero.
template <class Model>
Model zeros_like(const Model& m) {
  Model z = m;
  for (Matrix* p : parameters(z)) *p = Matrix(p->rows(), p->cols());
  return z;
}

// ---------------------------------------------------------------------------
// Initialisation

/// Glorot-uniform weights in ±sqrt(6 / (in + out)), zero bias.
inline Linear init_linear(std::size_t in, std::size_t out, Rng& rng,
                          double weight_scale = 1.0) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Linear l{rng.uniform_matrix(out, in, -bound, bound), Matrix(1, out)};
  if (weight_scale != 1.0) l.weight = scale(l.weight, weight_scale);
  return l;
}

inline Mlp init_mlp(std::size_t in, const std::vector<std::size_t>& hidden,
                    std::size_t out, Rng& rng, double last_scale = 1.0) {
  Mlp m;
  std::size_t prev = in;
  for (auto h : hidden) {
    m.layers.push_back(init_linear(prev, h, rng));
    prev = h;
  }
  m.layers.push_back(init_linear(prev, out, rng, last_scale));
  return m;
}

/// Splits a dims list "in → hidden... → out" where the last hidden entry
/// is the backbone output width.
inline Mlp init_backbone(std::size_t in, const std::vector<std::size_t>& dims,
                         Rng& rng) {
  if (dims.empty()) throw std::invalid_argument("backbone needs at least one layer width");
  std::vector<std::size_t> hidden(dims.begin(), dims.end() - 1);
  return init_mlp(in, hidden, dims.back(), rng);
}

/// The log-variance head's output layer is scaled by 0.1 so initial σ ≈ 1.
inline SketchModel init_sketch_model(const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  SketchModel m;
  m.backbone = init_backbone(cfg.input_dim, cfg.hidden, rng);
  const std::size_t feat = m.backbone.out_dim();
  m.head.mu = init_mlp(feat, cfg.head_hidden, cfg.embed_dim, rng);
  m.head.logvar = init_mlp(feat, cfg.head_hidden, cfg.embed_dim, rng, 0.1);
  return m;
}

inline ShapeEncoder init_shape_encoder(const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  ShapeEncoder e;
  e.view_backbone = init_backbone(cfg.view_dim, cfg.hidden, rng);
  e.proj = init_mlp(e.view_backbone.out_dim(), {}, cfg.embed_dim, rng);
  return e;
}

// ---------------------------------------------------------------------------
// Sketch branch

struct SketchCache {
  MlpCache backbone;
  MlpCache mu;
  MlpCache logvar;
};

/// Rows of `x` are sketch feature vectors. Each row is L2-normalised before
/// the backbone, so the input magnitude carries no information.
inline GaussianEmbedding encode_sketch(const SketchModel& m, const Matrix& x,
                                       SketchCache* cache = nullptr) {
  if (x.cols() != m.in_dim()) {
    throw std::invalid_argument("encode_sketch: feature width " +
                                std::to_string(x.cols()) + " but model expects " +
                                std::to_string(m.in_dim()));
  }
  Matrix feat = forward(m.backbone, l2_normalize_rows(x), cache ? &cache->backbone : nullptr);
  GaussianEmbedding e;
  e.mu = forward(m.head.mu, feat, cache ? &cache->mu : nullptr);
  e.logvar = forward(m.head.logvar, feat, cache ? &cache->logvar : nullptr);
  return e;
}

/// Backward of encode_sketch; accumulates into `grads`.
inline void encode_sketch_backward(const SketchModel& m, const SketchCache& cache,
                                   const Matrix& grad_mu, const Matrix& grad_logvar,
                                   SketchModel& grads) {
  Matrix gfeat = backward(m.head.mu, cache.mu, grad_mu, grads.head.mu);
  gfeat = add(gfeat, backward(m.head.logvar, cache.logvar, grad_logvar, grads.head.logvar));
  backward(m.backbone, cache.backbone, std::move(gfeat), grads.backbone);
}

/// z = μ + ε ⊙ exp(½ log σ²), row by row.
inline Matrix reparameterize(const GaussianEmbedding& e, const Matrix& eps) {
  detail::require_same_shape(e.mu, e.logvar, "reparameterize");
  detail::require_same_shape(e.mu, eps, "reparameterize");
  Matrix z(e.mu.rows(), e.mu.cols());
  auto mu = e.mu.values();
  auto lv = e.logvar.values();
  auto ep = eps.values();
  auto out = z.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mu[i] + ep[i] * std::exp(0.5 * lv[i]);
  }
  return detail::checked(std::move(z), "reparameterize");
}

// ---------------------------------------------------------------------------
// Shape branch

/// Lexicographic order of the view rows. Pooling sums in this order, so the
/// fused feature does not depend on the order views are supplied in.
inline std::vector<std::size_t> canonical_view_order(const Matrix& views) {
  std::vector<std::size_t> idx(views.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    auto ra = views.row(a);
    auto rb = views.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return idx;
}

struct ShapeCache {
  MlpCache backbone;
  MlpCache proj;
  std::vector<std::size_t> views_per_shape;
};

/// Each element of `shapes` is a V×view_dim matrix of one shape's views.
/// Returns one embedding row per shape.
inline Matrix encode_shapes(const ShapeEncoder& enc, std::span<const Matrix> shapes,
                            ShapeCache* cache = nullptr) {
  if (shapes.empty()) throw std::invalid_argument("encode_shape: no shapes");
  std::size_t total = 0;
  for (const auto& s : shapes) {
    if (s.rows() == 0) throw std::invalid_argument("encode_shape: shape with no views");
    if (s.cols() != enc.in_dim()) {
      throw std::invalid_argument("encode_shape: view width " + std::to_string(s.cols()) +
                                  " but encoder expects " + std::to_string(enc.in_dim()));
    }
    total += s.rows();
  }
  // Views are stacked in canonical order so the pooled sum below runs over
  // consecutive rows. Each view is L2-normalised, as in encode_sketch.
  Matrix stacked(total, enc.in_dim());
  std::size_t r = 0;
  for (const auto& s : shapes) {
    for (std::size_t v : canonical_view_order(s)) {
      std::copy(s.row(v).begin(), s.row(v).end(), stacked.row(r++).begin());
    }
  }
  Matrix feats = forward(enc.view_backbone, l2_normalize_rows(stacked), cache ? &cache->backbone : nullptr);
  Matrix pooled(shapes.size(), feats.cols());
  r = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto dst = pooled.row(i);
    const std::size_t n = shapes[i].rows();
    for (std::size_t v = 0; v < n; ++v, ++r) {
      auto src = feats.row(r);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (double& x : dst) x *= inv;
  }
  if (cache) {
    cache->views_per_shape.clear();
    for (const auto& s : shapes) cache->views_per_shape.push_back(s.rows());
  }
  return forward(enc.proj, pooled, cache ? &cache->proj : nullptr);
}

inline Matrix encode_shape(const ShapeEncoder& enc, const Matrix& views) {
  return encode_shapes(enc, std::span<const Matrix>(&views, 1));
}

inline void encode_shapes_backward(const ShapeEncoder& enc, const ShapeCache& cache,
                                   const Matrix& grad_out, ShapeEncoder& grads) {
  Matrix gpooled = backward(enc.proj, cache.proj, grad_out, grads.proj);
  std::size_t total = 0;
  for (auto n : cache.views_per_shape) total += n;
  Matrix gfeats(total, gpooled.cols());
  std::size_t r = 0;
  for (std::size_t i = 0; i < cache.views_per_shape.size(); ++i) {
    const std::size_t n = cache.views_per_shape[i];
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t v = 0; v < n; ++v, ++r) {
      auto dst = gfeats.row(r);
      auto src = gpooled.row(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = src[j] * inv;
    }
  }
  backward(enc.view_backbone, cache.backbone, std::move(gfeats), grads.view_backbone);
}

}  // namespace uactn

#endif  // UACTN_MODEL_HPP
