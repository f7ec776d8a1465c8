#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "shellkoop/common.hpp"

namespace shellkoop::nn {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// Nested-list literal, mainly for tests: Matrix{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix row(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row_span(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  Matrix transpose() const;
  void fill(double value);
  bool all_finite() const noexcept;
  double frobenius_norm() const noexcept;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

double max_abs_diff(const Matrix& a, const Matrix& b);

// Products. Zero entries of the left operand are skipped, so dense storage of
// sparse operators such as the normalized adjacency stays cheap.

/// A * B
Matrix matmul(const Matrix& a, const Matrix& b);
/// A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Backward of C = A * B.
struct MatmulGrads {
  Matrix grad_a;
  Matrix grad_b;
};
MatmulGrads matmul_backward(const Matrix& a, const Matrix& b, const Matrix& grad_out);

/// Adds the 1 x cols row vector b to every row.
void add_row_broadcast(Matrix& m, const Matrix& b);
/// 1 x cols column sums.
Matrix column_sums(const Matrix& m);
void tanh_inplace(Matrix& m);

/// Trainable (or frozen) named tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()), trainable(train) {}

  void zero_grad() { grad.fill(0.0); }
};

/// Xavier-uniform: U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

enum class Activation { linear, tanh };

// Layers. Each forward returns its output; each backward takes the cached
// forward quantities it needs, accumulates parameter gradients into the
// supplied matrices, and returns the gradient with respect to the input.

/// out = act(adj * h * w + b)
Matrix gcn_forward(const Matrix& adj, const Matrix& h, const Matrix& w, const Matrix& b,
                   Activation act);
/// `out` is the forward output (post-activation).
Matrix gcn_backward(const Matrix& adj, const Matrix& h, const Matrix& w, const Matrix& out,
                    const Matrix& grad_out, Activation act, Matrix& grad_w, Matrix& grad_b);

/// out = act(h * w + b)
Matrix dense_forward(const Matrix& h, const Matrix& w, const Matrix& b, Activation act);
Matrix dense_backward(const Matrix& h, const Matrix& w, const Matrix& out,
                      const Matrix& grad_out, Activation act, Matrix& grad_w, Matrix& grad_b);

/// 1 x d column means.
Matrix mean_pool(const Matrix& h);
Matrix mean_pool_backward(const Matrix& grad_out, std::size_t rows);

struct MseResult {
  double mse = 0.0;
  double sse = 0.0;
  std::size_t count = 0;  // number of scalar terms
};

/// Mean squared error over the rows selected by `row_mask` (all rows when
/// empty). Throws std::invalid_argument when the selection is empty.
MseResult mse(const Matrix& pred, const Matrix& target, const std::vector<bool>& row_mask = {});
/// d(scale * mse)/d(pred).
Matrix mse_backward(const Matrix& pred, const Matrix& target, const std::vector<bool>& row_mask = {},
                    double scale = 1.0);

/// Adam with bias correction. Moments are keyed by parameter position, so
/// every call must pass the same parameter list in the same order.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Updates every trainable parameter and zeroes all gradients.
  void step(std::span<Parameter* const> params);

  long steps() const noexcept { return step_; }
  double lr() const noexcept { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Loss closure for gradient checking. When called with `true` it must
/// zero and then populate the gradients of the parameters under test.
using LossClosure = std::function<double(bool compute_grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t coords_checked = 0;
};

/// Central differences on up to `coords_per_param` random coordinates of each
/// trainable parameter. rel = |g_an - g_fd| / max(1e-8, |g_an| + |g_fd|).
GradCheckResult finite_difference_check(const LossClosure& loss, std::span<Parameter* const> params,
                                        double h = 1e-5, std::size_t coords_per_param = 32,
                                        std::uint64_t seed = 7);

}  // namespace shellkoop::nn
