#include "shellkoop/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace shellkoop::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, "Matrix: data length != rows * cols");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, "Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::frobenius_norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require(rows_ == other.rows_ && cols_ == other.cols_, "Matrix +=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require(rows_ == other.rows_ && cols_ == other.cols_, "Matrix -=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.data().data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.data().data() + k * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* bk = b.data().data() + k * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* ci = c.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.data().data() + i * inner;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.data().data() + j * inner;
      double s = 0.0;
      for (std::size_t k = 0; k < inner; ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  }
  return c;
}

MatmulGrads matmul_backward(const Matrix& a, const Matrix& b, const Matrix& grad_out) {
  require(grad_out.rows() == a.rows() && grad_out.cols() == b.cols(), "matmul_backward: shape mismatch");
  return {matmul_nt(grad_out, b), matmul_tn(a, grad_out)};
}

void add_row_broadcast(Matrix& m, const Matrix& b) {
  require(b.rows() == 1 && b.cols() == m.cols(), "add_row_broadcast: bias shape mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row_span(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += b(0, c);
  }
}

Matrix column_sums(const Matrix& m) {
  Matrix s(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row_span(r);
    for (std::size_t c = 0; c < m.cols(); ++c) s(0, c) += row[c];
  }
  return s;
}

void tanh_inplace(Matrix& m) {
  for (double& v : m.data()) v = std::tanh(v);
}

Matrix xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix w(fan_in, fan_out);
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  return w;
}

namespace {

/// dL/d(pre-activation) given dL/d(out).
Matrix activation_backward(const Matrix& out, const Matrix& grad_out, Activation act) {
  require(out.rows() == grad_out.rows() && out.cols() == grad_out.cols(), "backward: gradient shape mismatch");
  if (act == Activation::linear) return grad_out;
  Matrix g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double y = out.data()[i];
    g.data()[i] *= 1.0 - y * y;
  }
  return g;
}

}  // namespace

Matrix gcn_forward(const Matrix& adj, const Matrix& h, const Matrix& w, const Matrix& b, Activation act) {
  require(adj.rows() == adj.cols() && adj.cols() == h.rows(), "gcn: adjacency/feature shape mismatch");
  require(h.cols() == w.rows(), "gcn: feature/weight shape mismatch");
  // (A H) W and A (H W) agree; the latter keeps the N x N product narrow.
  Matrix out = matmul(adj, matmul(h, w));
  add_row_broadcast(out, b);
  if (act == Activation::tanh) tanh_inplace(out);
  return out;
}

Matrix gcn_backward(const Matrix& adj, const Matrix& h, const Matrix& w, const Matrix& out,
                    const Matrix& grad_out, Activation act, Matrix& grad_w, Matrix& grad_b) {
  const Matrix g_pre = activation_backward(out, grad_out, act);
  grad_b += column_sums(g_pre);
  const Matrix g_hw = matmul_tn(adj, g_pre);  // A^T dPre
  grad_w += matmul_tn(h, g_hw);               // (A H)^T dPre = H^T A^T dPre
  return matmul_nt(g_hw, w);                  // A^T dPre W^T
}

Matrix dense_forward(const Matrix& h, const Matrix& w, const Matrix& b, Activation act) {
  require(h.cols() == w.rows(), "dense: input/weight shape mismatch");
  Matrix out = matmul(h, w);
  add_row_broadcast(out, b);
  if (act == Activation::tanh) tanh_inplace(out);
  return out;
}

Matrix dense_backward(const Matrix& h, const Matrix& w, const Matrix& out, const Matrix& grad_out,
                      Activation act, Matrix& grad_w, Matrix& grad_b) {
  const Matrix g_pre = activation_backward(out, grad_out, act);
  grad_b += column_sums(g_pre);
  grad_w += matmul_tn(h, g_pre);
  return matmul_nt(g_pre, w);
}

Matrix mean_pool(const Matrix& h) {
  require(h.rows() >= 1, "mean_pool: empty input");
  Matrix s = column_sums(h);
  s *= 1.0 / static_cast<double>(h.rows());
  return s;
}

Matrix mean_pool_backward(const Matrix& grad_out, std::size_t rows) {
  require(grad_out.rows() == 1 && rows >= 1, "mean_pool_backward: bad shape");
  Matrix g(rows, grad_out.cols());
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) = grad_out(0, c) * inv;
  return g;
}

namespace {

std::size_t selected_rows(const Matrix& pred, const std::vector<bool>& row_mask) {
  if (row_mask.empty()) return pred.rows();
  require(row_mask.size() == pred.rows(), "mse: row mask length != rows");
  return static_cast<std::size_t>(std::count(row_mask.begin(), row_mask.end(), true));
}

}  // namespace

MseResult mse(const Matrix& pred, const Matrix& target, const std::vector<bool>& row_mask) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse: shape mismatch");
  const std::size_t rows = selected_rows(pred, row_mask);
  require(rows > 0 && pred.cols() > 0, "mse: empty selection");
  MseResult r;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    if (!row_mask.empty() && !row_mask[i]) continue;
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double d = pred(i, c) - target(i, c);
      r.sse += d * d;
    }
  }
  r.count = rows * pred.cols();
  r.mse = r.sse / static_cast<double>(r.count);
  return r;
}

Matrix mse_backward(const Matrix& pred, const Matrix& target, const std::vector<bool>& row_mask, double scale) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse: shape mismatch");
  const std::size_t rows = selected_rows(pred, row_mask);
  require(rows > 0 && pred.cols() > 0, "mse: empty selection");
  const double k = 2.0 * scale / static_cast<double>(rows * pred.cols());
  Matrix g(pred.rows(), pred.cols());
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    if (!row_mask.empty() && !row_mask[i]) continue;
    for (std::size_t c = 0; c < pred.cols(); ++c) g(i, c) = k * (pred(i, c) - target(i, c));
  }
  return g;
}

void Adam::step(std::span<Parameter* const> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  require(m_.size() == params.size(), "Adam: parameter list changed between steps");
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (p.trainable) {
      auto& m = m_[i].data();
      auto& v = v_[i].data();
      auto& w = p.value.data();
      const auto& g = p.grad.data();
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
        v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
        const double m_hat = m[k] / bc1;
        const double v_hat = v[k] / bc2;
        w[k] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
      }
    }
    p.zero_grad();
  }
}

GradCheckResult finite_difference_check(const LossClosure& loss, std::span<Parameter* const> params, double h,
                                        std::size_t coords_per_param, std::uint64_t seed) {
  loss(true);
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  Rng rng(seed);
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    const std::size_t n = p.value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    const std::size_t take = std::min(n, coords_per_param);
    for (std::size_t k = 0; k < take; ++k) {
      std::swap(coords[k], coords[k + static_cast<std::size_t>(rng.below(n - k))]);
    }
    for (std::size_t k = 0; k < take; ++k) {
      double& w = p.value.data()[coords[k]];
      const double saved = w;
      w = saved + h;
      const double up = loss(false);
      w = saved - h;
      const double down = loss(false);
      w = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[i].data()[coords[k]];
      const double rel = std::abs(an - fd) / std::max(1e-8, std::abs(an) + std::abs(fd));
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_parameter = p.name;
      }
      ++result.coords_checked;
    }
  }
  return result;
}

}  // namespace shellkoop::nn
