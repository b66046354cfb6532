#ifndef UACTN_NUMERIC_HPP
#define UACTN_NUMERIC_HPP

// Dense row-major matrices of doubles, the elementwise and linear-algebra
// operations the models need, their closed-form backward passes, and a
// central-difference gradient verifier.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace uactn {

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: buffer of " +
                                  std::to_string(data_.size()) +
                                  " values does not fit shape " +
                                  std::to_string(rows) + "x" +
                                  std::to_string(cols));
    }
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) {
        throw std::invalid_argument("Matrix: ragged initializer list");
      }
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix row_vector(std::span<const double> values) {
    return Matrix(1, values.size(),
                  std::vector<double>(values.begin(), values.end()));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  // Views into storage; deleted on temporaries so a view cannot outlive
  // its matrix.
  std::span<double> row(std::size_t r) & {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const& {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) && = delete;

  std::span<double> values() & noexcept { return data_; }
  std::span<const double> values() const& noexcept { return data_; }
  std::span<const double> values() && = delete;

  std::string shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool same_shape(const Matrix& o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  // Numeric equality (0.0 == -0.0). Use bitwise_equal for bit patterns.
  bool operator==(const Matrix& o) const {
    return same_shape(o) && data_ == o.data_;
  }

  bool is_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.same_shape(b) &&
         (a.size() == 0 ||
          std::memcmp(a.values().data(), b.values().data(),
                      a.size() * sizeof(double)) == 0);
}

namespace detail {

inline void require_same_shape(const Matrix& a, const Matrix& b,
                               const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.shape() + " vs " + b.shape());
  }
}

inline Matrix checked(Matrix m, const char* op) {
  if (!m.is_finite()) {
    throw std::domain_error(std::string(op) + ": produced non-finite value");
  }
  return m;
}

template <class F>
Matrix map(const Matrix& a, F&& f) {
  Matrix out(a.rows(), a.cols());
  auto src = a.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <class F>
Matrix zip(const Matrix& a, const Matrix& b, const char* op, F&& f) {
  require_same_shape(a, b, op);
  Matrix out(a.rows(), a.cols());
  auto x = a.values();
  auto y = b.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: cannot multiply " + a.shape() +
                                " by " + b.shape());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * brow[j];
    }
  }
  return detail::checked(std::move(out), "matmul");
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

/// a · bᵀ without materialising the transpose (rows of both are dotted).
inline Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_transposed: cannot multiply " +
                                a.shape() + " by transpose of " + b.shape());
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto br = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < ar.size(); ++k) acc += ar[k] * br[k];
      out(i, j) = acc;
    }
  }
  return detail::checked(std::move(out), "matmul_transposed");
}

/// Gradients of matmul(a, b) given the upstream gradient of the product.
inline std::pair<Matrix, Matrix> matmul_backward(const Matrix& a,
                                                 const Matrix& b,
                                                 const Matrix& grad_out) {
  return {matmul_transposed(grad_out, b), matmul(transpose(a), grad_out)};
}

// ---------------------------------------------------------------------------
// Elementwise

inline Matrix add(const Matrix& a, const Matrix& b) {
  return detail::checked(
      detail::zip(a, b, "add", [](double x, double y) { return x + y; }),
      "add");
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  return detail::checked(
      detail::zip(a, b, "sub", [](double x, double y) { return x - y; }),
      "sub");
}

/// Hadamard product.
inline Matrix mul(const Matrix& a, const Matrix& b) {
  return detail::checked(
      detail::zip(a, b, "mul", [](double x, double y) { return x * y; }),
      "mul");
}

inline Matrix scale(const Matrix& a, double c) {
  return detail::checked(detail::map(a, [c](double x) { return c * x; }),
                         "scale");
}

inline Matrix exp(const Matrix& a) {
  return detail::checked(detail::map(a, [](double x) { return std::exp(x); }),
                         "exp");
}

inline Matrix log(const Matrix& a) {
  return detail::checked(detail::map(a, [](double x) { return std::log(x); }),
                         "log");
}

inline Matrix relu(const Matrix& a) {
  return detail::map(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

// Backward rules. Each takes the forward input (or output, where cheaper)
// and the upstream gradient, and returns the gradient w.r.t. the input(s).

inline std::pair<Matrix, Matrix> add_backward(const Matrix& grad_out) {
  return {grad_out, grad_out};
}

inline std::pair<Matrix, Matrix> sub_backward(const Matrix& grad_out) {
  return {grad_out, scale(grad_out, -1.0)};
}

inline std::pair<Matrix, Matrix> mul_backward(const Matrix& a, const Matrix& b,
                                              const Matrix& grad_out) {
  return {mul(grad_out, b), mul(grad_out, a)};
}

/// Takes the forward *output* y = exp(x).
inline Matrix exp_backward(const Matrix& y, const Matrix& grad_out) {
  return mul(grad_out, y);
}

inline Matrix log_backward(const Matrix& x, const Matrix& grad_out) {
  return detail::checked(
      detail::zip(grad_out, x, "log_backward",
                  [](double g, double v) { return g / v; }),
      "log_backward");
}

/// Subgradient 0 at the kink.
inline Matrix relu_backward(const Matrix& x, const Matrix& grad_out) {
  return detail::zip(grad_out, x, "relu_backward",
                     [](double g, double v) { return v > 0.0 ? g : 0.0; });
}

// ---------------------------------------------------------------------------
// Row-wise helpers

/// Adds a 1×cols row vector to every row.
inline Matrix add_row(const Matrix& a, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("add_row: cannot broadcast " + row.shape() +
                                " onto " + a.shape());
  }
  Matrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += row(0, j);
  }
  return detail::checked(std::move(out), "add_row");
}

/// Column sums as a 1×cols matrix, accumulated in row order.
inline Matrix sum_rows(const Matrix& a) {
  Matrix out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out(0, j) += r[j];
  }
  return out;
}

inline double sum(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return acc;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline constexpr double kNormEps = 1e-12;

/// Each row divided by max(‖row‖₂, eps). Zero rows stay zero.
inline Matrix l2_normalize_rows(const Matrix& m, double eps = kNormEps) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto src = m.row(i);
    auto dst = out.row(i);
    const double n = std::max(norm2(src), eps);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / n;
  }
  return out;
}

/// Backward of l2_normalize_rows. For ‖x‖ ≥ eps with y = x/‖x‖:
/// dx = (dy − y·(y·dy)) / ‖x‖; below eps the map is linear, dx = dy/eps.
inline Matrix l2_normalize_rows_backward(const Matrix& x,
                                         const Matrix& grad_out,
                                         double eps = kNormEps) {
  detail::require_same_shape(x, grad_out, "l2_normalize_rows_backward");
  Matrix dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    auto gr = grad_out.row(i);
    auto dr = dx.row(i);
    const double n = norm2(xr);
    if (n < eps) {
      for (std::size_t j = 0; j < xr.size(); ++j) dr[j] = gr[j] / eps;
      continue;
    }
    double yg = 0.0;
    for (std::size_t j = 0; j < xr.size(); ++j) yg += (xr[j] / n) * gr[j];
    for (std::size_t j = 0; j < xr.size(); ++j)
      dr[j] = (gr[j] - (xr[j] / n) * yg) / n;
  }
  return dx;
}

/// Entry (i, j) = cos(a_i, b_j).
inline Matrix cosine_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("cosine_matrix: column mismatch " + a.shape() +
                                " vs " + b.shape());
  }
  return matmul_transposed(l2_normalize_rows(a), l2_normalize_rows(b));
}

/// Mean over rows as a 1×cols matrix, summed in row-index order.
inline Matrix mean_rows(const Matrix& a) {
  if (a.rows() == 0) throw std::invalid_argument("mean_rows: no rows");
  Matrix s = sum_rows(a);
  const double inv = 1.0 / static_cast<double>(a.rows());
  for (double& v : s.values()) v *= inv;
  return s;
}

// ---------------------------------------------------------------------------
// Gradient verification

/// A scalar objective evaluated at a parameter list, with its analytic
/// gradient (one matrix per parameter, same shapes).
struct Evaluation {
  double value = 0.0;
  std::vector<Matrix> grads;
};

using Objective = std::function<Evaluation(const std::vector<Matrix>&)>;

/// Central-difference check of `f`'s analytic gradient at `params`.
/// Returns max over entries of |Δ| / (|g| + |Δ| + 1e-12) where g is the
/// analytic entry and Δ its difference from the numeric estimate.
inline double grad_check(const Objective& f, std::vector<Matrix> params,
                         double step = 1e-5) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be > 0");
  const Evaluation base = f(params);
  if (!std::isfinite(base.value)) {
    throw std::domain_error("grad_check: objective is not finite at params");
  }
  if (base.grads.size() != params.size()) {
    throw std::invalid_argument("grad_check: objective returned " +
                                std::to_string(base.grads.size()) +
                                " gradients for " +
                                std::to_string(params.size()) + " parameters");
  }
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    detail::require_same_shape(params[p], base.grads[p], "grad_check");
    auto vals = params[p].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + step;
      const double fp = f(params).value;
      vals[i] = orig - step;
      const double fm = f(params).value;
      vals[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw std::domain_error("grad_check: objective is not finite near "
                                "parameter " + std::to_string(p) + "[" +
                                std::to_string(i) + "]");
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double g = base.grads[p].values()[i];
      const double delta = std::abs(g - numeric);
      worst = std::max(worst, delta / (std::abs(g) + delta + 1e-12));
    }
  }
  return worst;
}

}  // namespace uactn

#endif  // UACTN_NUMERIC_HPP
