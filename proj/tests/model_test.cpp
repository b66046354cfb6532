#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "uactn/losses.hpp"
#include "uactn/model.hpp"

namespace uactn {
namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.input_dim = 5;
  cfg.view_dim = 5;
  cfg.embed_dim = 4;
  cfg.hidden = {6, 3};
  cfg.classes = 3;
  return cfg;
}

// Straight-line forward pass over nested vectors.
using Vec = std::vector<double>;

Vec dense(const Linear& l, const Vec& x, bool activate) {
  Vec y(l.out_dim());
  for (std::size_t o = 0; o < l.out_dim(); ++o) {
    double s = l.bias(0, o);
    for (std::size_t i = 0; i < l.in_dim(); ++i) s += l.weight(o, i) * x[i];
    y[o] = activate ? std::max(0.0, s) : s;
  }
  return y;
}

Vec mlp_ref(const Mlp& m, Vec x) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    x = dense(m.layers[l], x, l + 1 < m.layers.size());
  }
  return x;
}

Vec unit(Vec x) {
  double n = 0;
  for (double v : x) n += v * v;
  n = std::sqrt(n);
  for (double& v : x) v /= n;
  return x;
}

std::vector<Matrix> copy_params(const std::vector<Matrix*>& ps) {
  std::vector<Matrix> out;
  for (auto* p : ps) out.push_back(*p);
  return out;
}

void assign_params(const std::vector<Matrix*>& ps, const std::vector<Matrix>& values) {
  for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] = values[i];
}

TEST(EncodeSketch, ZeroParametersGiveStandardNormal) {
  Rng rng(1);
  SketchModel m = zeros_like(init_sketch_model(tiny_config(), rng));
  const GaussianEmbedding e = encode_sketch(m, rng.uniform_matrix(3, 5, -2, 2));
  EXPECT_TRUE(bitwise_equal(e.mu, Matrix(3, 4)));
  EXPECT_TRUE(bitwise_equal(e.logvar, Matrix(3, 4)));
  EXPECT_TRUE(bitwise_equal(e.sigma(), Matrix(3, 4, 1.0)));
}

TEST(EncodeSketch, Deterministic) {
  Rng rng(2);
  const SketchModel m = init_sketch_model(tiny_config(), rng);
  const Matrix x = rng.uniform_matrix(4, 5, -2, 2);
  const GaussianEmbedding a = encode_sketch(m, x);
  const GaussianEmbedding b = encode_sketch(m, x);
  EXPECT_TRUE(bitwise_equal(a.mu, b.mu));
  EXPECT_TRUE(bitwise_equal(a.logvar, b.logvar));
}

TEST(EncodeSketch, MatchesStraightLineReference) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    TrainConfig cfg = tiny_config();
    cfg.head_hidden = {5};
    SketchModel m = init_sketch_model(cfg, rng);
    // Nonzero biases so the reference exercises them.
    for (auto* p : parameters(m)) {
      if (p->rows() == 1) *p = rng.uniform_matrix(1, p->cols(), -0.5, 0.5);
    }
    const Matrix x = rng.uniform_matrix(3, 5, -2, 2);
    const GaussianEmbedding e = encode_sketch(m, x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const Vec feat = mlp_ref(m.backbone, unit(Vec(x.row(i).begin(), x.row(i).end())));
      const Vec mu = mlp_ref(m.head.mu, feat);
      const Vec lv = mlp_ref(m.head.logvar, feat);
      for (std::size_t k = 0; k < mu.size(); ++k) {
        EXPECT_NEAR(e.mu(i, k), mu[k], 1e-12);
        EXPECT_NEAR(e.logvar(i, k), lv[k], 1e-12);
      }
    }
  }
}

TEST(EncodeSketch, WidthMismatchThrows) {
  Rng rng(3);
  const SketchModel m = init_sketch_model(tiny_config(), rng);
  EXPECT_THROW(encode_sketch(m, Matrix(2, 6)), std::invalid_argument);
}

TEST(EncodeSketch, InputMagnitudeIsIgnored) {
  Rng rng(4);
  const SketchModel m = init_sketch_model(tiny_config(), rng);
  const Matrix x{{1, 2, 0, 0, 2}};
  EXPECT_TRUE(bitwise_equal(encode_sketch(m, x).mu, encode_sketch(m, scale(x, 4.0)).mu));
}

TEST(Reparameterize, Examples) {
  Rng rng(5);
  const Matrix mu = rng.uniform_matrix(2, 3, -2, 2);
  const Matrix lv = rng.uniform_matrix(2, 3, -2, 2);
  EXPECT_TRUE(bitwise_equal(reparameterize({mu, lv}, Matrix(2, 3)), mu));
  const Matrix eps = rng.normal_matrix(2, 3);
  EXPECT_TRUE(bitwise_equal(reparameterize({Matrix(2, 3), Matrix(2, 3)}, eps), eps));

  const double ln4 = std::log(4.0);
  const Matrix z = reparameterize({Matrix{{1, 1}}, Matrix{{ln4, ln4}}}, Matrix{{1, -1}});
  EXPECT_NEAR(z(0, 0), 3.0, 1e-15);
  EXPECT_NEAR(z(0, 1), -1.0, 1e-15);
  EXPECT_THROW(reparameterize({mu, lv}, Matrix(2, 2)), std::invalid_argument);
}

TEST(Reparameterize, EmpiricalVarianceMatchesSigmaSquared) {
  Rng rng(6);
  const Matrix mu{{0.5, -1.0, 2.0}};
  const Matrix lv{{std::log(0.25), 0.0, std::log(3.0)}};
  const GaussianEmbedding e{mu, lv};
  const int n = 100000;
  Vec s(3, 0.0), s2(3, 0.0);
  for (int t = 0; t < n; ++t) {
    const Matrix z = reparameterize(e, rng.normal_matrix(1, 3));
    for (std::size_t k = 0; k < 3; ++k) {
      s[k] += z(0, k);
      s2[k] += z(0, k) * z(0, k);
    }
  }
  const Matrix var = e.variance();
  for (std::size_t k = 0; k < 3; ++k) {
    const double m = s[k] / n;
    const double v = s2[k] / n - m * m;
    EXPECT_NEAR(v / var(0, k), 1.0, 0.05) << "dim " << k;
  }
}

TEST(EncodeShape, IdenticalViewsEqualSingleView) {
  Rng rng(7);
  const ShapeEncoder enc = init_shape_encoder(tiny_config(), rng);
  const Matrix view = rng.uniform_matrix(1, 5, -2, 2);
  Matrix views(12, 5);
  for (std::size_t v = 0; v < 12; ++v) std::copy(view.row(0).begin(), view.row(0).end(), views.row(v).begin());
  const Matrix one = encode_shape(enc, view);
  const Matrix many = encode_shape(enc, views);
  for (std::size_t k = 0; k < one.cols(); ++k) EXPECT_NEAR(one(0, k), many(0, k), 1e-12);
}

TEST(EncodeShape, ViewPermutationIsExact) {
  Rng rng(8);
  const ShapeEncoder enc = init_shape_encoder(tiny_config(), rng);
  const Matrix views = rng.uniform_matrix(12, 5, -2, 2);
  const Matrix base = encode_shape(enc, views);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    Matrix shuffled(12, 5);
    for (std::size_t v = 0; v < 12; ++v) {
      std::copy(views.row(perm[v]).begin(), views.row(perm[v]).end(), shuffled.row(v).begin());
    }
    EXPECT_TRUE(bitwise_equal(encode_shape(enc, shuffled), base));
  }
}

TEST(EncodeShape, TwelveViewsMatchReference) {
  Rng rng(9);
  const ShapeEncoder enc = init_shape_encoder(tiny_config(), rng);
  const Matrix views = rng.uniform_matrix(12, 5, -2, 2);
  Vec pooled(enc.view_backbone.out_dim(), 0.0);
  for (std::size_t v = 0; v < 12; ++v) {
    const Vec f = mlp_ref(enc.view_backbone, unit(Vec(views.row(v).begin(), views.row(v).end())));
    for (std::size_t k = 0; k < f.size(); ++k) pooled[k] += f[k] / 12.0;
  }
  const Vec expected = mlp_ref(enc.proj, pooled);
  const Matrix got = encode_shape(enc, views);
  ASSERT_EQ(got.cols(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(got(0, k), expected[k], 1e-12);
}

TEST(EncodeShape, Errors) {
  Rng rng(10);
  const ShapeEncoder enc = init_shape_encoder(tiny_config(), rng);
  EXPECT_THROW(encode_shape(enc, Matrix(0, 5)), std::invalid_argument);
  EXPECT_THROW(encode_shape(enc, Matrix(3, 4)), std::invalid_argument);
  EXPECT_THROW(encode_shapes(enc, std::span<const Matrix>{}), std::invalid_argument);
}

TEST(Init, SameSeedSameParameters) {
  Rng a(11), b(11);
  EXPECT_EQ(init_sketch_model(tiny_config(), a), init_sketch_model(tiny_config(), b));
  EXPECT_EQ(init_shape_encoder(tiny_config(), a), init_shape_encoder(tiny_config(), b));
}

TEST(Init, BoundsAndZeroBiases) {
  Rng rng(12);
  TrainConfig cfg = tiny_config();
  cfg.head_hidden = {7};
  SketchModel m = init_sketch_model(cfg, rng);
  auto check = [](const Mlp& net, double last_scale) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const Linear& layer = net.layers[l];
      double bound = std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
      if (l + 1 == net.layers.size()) bound *= last_scale;
      for (double w : layer.weight.values()) {
        EXPECT_LE(std::abs(w), bound);
      }
      for (double b : layer.bias.values()) EXPECT_EQ(b, 0.0);
    }
  };
  check(m.backbone, 1.0);
  check(m.head.mu, 1.0);
  check(m.head.logvar, 0.1);
  EXPECT_EQ(m.backbone.layers.size(), 2u);
  EXPECT_EQ(m.head.mu.out_dim(), 4u);
  EXPECT_EQ(m.head.logvar.out_dim(), 4u);

  const GaussianEmbedding e = encode_sketch(m, rng.uniform_matrix(16, 5, -2, 2));
  const Matrix sigma = e.sigma();
  for (double s : sigma.values()) EXPECT_NEAR(s, 1.0, 0.5);
}

TEST(Backward, SketchEncoderGradients) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    TrainConfig cfg = tiny_config();
    cfg.head_hidden = {3};
    SketchModel m = init_sketch_model(cfg, rng);
    // Zero biases put rows whose first layer is fully inactive exactly on a
    // relu kink, where central differences are meaningless.
    for (Mlp* net : {&m.backbone, &m.head.mu, &m.head.logvar}) {
      for (Linear& layer : net->layers) layer.bias = rng.uniform_matrix(1, layer.out_dim(), -0.5, 0.5);
    }
    const Matrix x = rng.uniform_matrix(4, 5, -2, 2);
    const Matrix r_mu = rng.uniform_matrix(4, 4, -1, 1);
    const Matrix r_lv = rng.uniform_matrix(4, 4, -1, 1);
    const auto ptrs = parameters(m);
    const Objective f = [&](const std::vector<Matrix>& p) {
      assign_params(ptrs, p);
      SketchCache cache;
      const GaussianEmbedding e = encode_sketch(m, x, &cache);
      SketchModel g = zeros_like(m);
      encode_sketch_backward(m, cache, r_mu, r_lv, g);
      return Evaluation{sum(mul(e.mu, r_mu)) + sum(mul(e.logvar, r_lv)), copy_params(parameters(g))};
    };
    EXPECT_LT(grad_check(f, copy_params(ptrs)), 1e-4) << "seed " << seed;
  }
}

TEST(Backward, ShapeEncoderGradients) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    ShapeEncoder enc = init_shape_encoder(tiny_config(), rng);
    const std::vector<Matrix> shapes = {rng.uniform_matrix(3, 5, -2, 2),
                                        rng.uniform_matrix(3, 5, -2, 2)};
    const Matrix r = rng.uniform_matrix(2, 4, -1, 1);
    const auto ptrs = parameters(enc);
    const Objective f = [&](const std::vector<Matrix>& p) {
      assign_params(ptrs, p);
      ShapeCache cache;
      const Matrix out = encode_shapes(enc, shapes, &cache);
      ShapeEncoder g = zeros_like(enc);
      encode_shapes_backward(enc, cache, r, g);
      return Evaluation{sum(mul(out, r)), copy_params(parameters(g))};
    };
    EXPECT_LT(grad_check(f, copy_params(ptrs)), 1e-4) << "seed " << seed;
  }
}

// Full stage-1 objective on a tiny model: parameters are every model
// matrix plus the class centres, with ε held fixed.
TEST(Backward, UncertaintyLossThroughTinyModel) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    SketchModel m = init_sketch_model(tiny_config(), rng);
    const Matrix x = rng.uniform_matrix(6, 5, -2, 2);
    const Matrix eps = rng.normal_matrix(6, 4);
    const std::vector<std::size_t> labels = {0, 1, 2, 0, 1, 2};
    auto ptrs = parameters(m);
    std::vector<Matrix> start = copy_params(ptrs);
    start.push_back(rng.uniform_matrix(3, 4, -1, 1));
    const Objective f = [&](const std::vector<Matrix>& p) {
      assign_params(ptrs, p);
      SketchCache cache;
      const GaussianEmbedding e = encode_sketch(m, x, &cache);
      const Matrix z = reparameterize(e, eps);
      const auto loss = uncertainty_loss(z, e.mu, e.logvar, Classifier{p.back()}, labels,
                                         MarginParams{30, 0.5}, 0.005);
      SketchModel g = zeros_like(m);
      encode_sketch_backward(m, cache, loss.grad_mu, loss.grad_logvar, g);
      auto grads = copy_params(parameters(g));
      grads.push_back(loss.grad_w);
      return Evaluation{loss.loss, grads};
    };
    EXPECT_LT(grad_check(f, start), 1e-4) << "seed " << seed;
  }
}

}  // namespace
}  // namespace uactn
