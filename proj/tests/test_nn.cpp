#include <cmath>

#include "doctest.h"
#include "shellkoop/nn.hpp"
#include "support.hpp"

using namespace shellkoop;
using namespace shellkoop::nn;
using doctest::Approx;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix symmetric_adjacency(std::size_t n, Rng& rng) {
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = rng.uniform(0.0, 1.0);
  }
  return a;
}

/// Sum of elementwise products with a fixed random projection: a generic scalar loss.
double project(const Matrix& m, const Matrix& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.data().size(); ++i) s += m.data()[i] * r.data()[i];
  return s;
}

}  // namespace

TEST_CASE("matrix basics") {
  Matrix m{{1, 2, 3}, {4, 5, 6}};
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m(1, 2) == 6);
  CHECK(m.transpose()(2, 1) == 6);
  CHECK((m + m)(0, 1) == 4);
  CHECK((m - m).frobenius_norm() == 0.0);
  CHECK((m * 2.0)(1, 0) == 8);
  CHECK(Matrix::identity(3)(1, 1) == 1.0);
  CHECK(Matrix::identity(3)(1, 2) == 0.0);
  CHECK(m.all_finite());
  m(0, 0) = std::nan("");
  CHECK_FALSE(m.all_finite());
  CHECK_THROWS(Matrix(2, 2) + Matrix(2, 3));
}

TEST_CASE("matmul against a triple loop") {
  Rng rng(3);
  const Matrix a = testing::random_matrix(3, 4, rng);
  const Matrix b = testing::random_matrix(4, 2, rng);
  CHECK(matmul(a, b) == naive_matmul(a, b));
  CHECK(matmul(a, Matrix::identity(4)) == a);
  CHECK(max_abs_diff(matmul_tn(a, a), naive_matmul(a.transpose(), a)) < 1e-15);
  CHECK(max_abs_diff(matmul_nt(a, a), naive_matmul(a, a.transpose())) < 1e-15);
  CHECK_THROWS(matmul(a, a));
}

TEST_CASE("matmul backward") {
  const auto g = matmul_backward(Matrix{{3.0}}, Matrix{{5.0}}, Matrix{{1.0}});
  CHECK(g.grad_a(0, 0) == 5.0);
  CHECK(g.grad_b(0, 0) == 3.0);

  Rng rng(4);
  const Matrix a = testing::random_matrix(3, 4, rng);
  const Matrix b = testing::random_matrix(4, 2, rng);
  const Matrix go = testing::random_matrix(3, 2, rng);
  const auto gr = matmul_backward(a, b, go);
  CHECK(max_abs_diff(gr.grad_a, naive_matmul(go, b.transpose())) < 1e-14);
  CHECK(max_abs_diff(gr.grad_b, naive_matmul(a.transpose(), go)) < 1e-14);
}

TEST_CASE("gcn layer forward identities and equivariance") {
  Rng rng(5);
  const Matrix h = testing::random_matrix(5, 3, rng);
  Matrix expected = h;
  tanh_inplace(expected);
  CHECK(max_abs_diff(gcn_forward(Matrix::identity(5), h, Matrix::identity(3), Matrix(1, 3), Activation::tanh),
                     expected) < 1e-15);

  const Matrix adj = symmetric_adjacency(6, rng);
  const Matrix x = testing::random_matrix(6, 3, rng);
  const Matrix w = testing::random_matrix(3, 4, rng);
  const Matrix b = testing::random_matrix(1, 4, rng);
  const auto perm = testing::random_permutation(6, rng);
  const Matrix out = gcn_forward(adj, x, w, b, Activation::tanh);
  const Matrix out_perm =
      gcn_forward(testing::permute_both(adj, perm), testing::permute_rows(x, perm), w, b, Activation::tanh);
  CHECK(max_abs_diff(out_perm, testing::permute_rows(out, perm)) < 1e-14);
  CHECK(max_abs_diff(mean_pool(out_perm), mean_pool(out)) < 1e-15);
}

TEST_CASE("dense layer identities and bounds") {
  Rng rng(6);
  const Matrix h = testing::random_matrix(4, 3, rng, 10.0);
  CHECK(dense_forward(h, Matrix::identity(3), Matrix(1, 3), Activation::linear) == h);
  const Matrix t = dense_forward(h, testing::random_matrix(3, 5, rng, 10.0), Matrix(1, 5), Activation::tanh);
  for (double v : t.data()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("mean pool") {
  Matrix same{{1, 2}, {1, 2}, {1, 2}};
  CHECK(mean_pool(same) == Matrix{{1, 2}});
  const Matrix g = mean_pool_backward(Matrix{{3, 6}}, 3);
  CHECK(g == Matrix{{1, 2}, {1, 2}, {1, 2}});
}

TEST_CASE("mse") {
  CHECK(mse(Matrix{{3.0}}, Matrix{{1.0}}).mse == 4.0);
  Matrix p{{1, 2}, {3, 4}};
  CHECK(mse(p, p).mse == 0.0);
  Matrix t{{1, 2}, {5, 8}};
  const auto all = mse(p, t);
  CHECK(all.sse == 20.0);
  CHECK(all.count == 4);
  CHECK(all.mse == 5.0);
  const auto masked = mse(p, t, {false, true});
  CHECK(masked.mse == 10.0);
  CHECK(masked.count == 2);
  CHECK(mse(p, t, {true, false}).mse == 0.0);
  CHECK_THROWS(mse(p, t, {false, false}));
  const Matrix g = mse_backward(p, t, {false, true});
  CHECK(g == Matrix{{0, 0}, {-2, -4}});  // 2 (p - t) / 2 on the selected row
}

TEST_CASE("adam") {
  Parameter w("w", Matrix{{1.0, -2.0}});
  std::vector<Parameter*> ps{&w};
  Adam opt(0.1);
  opt.step(ps);  // zero gradient
  CHECK(w.value == Matrix{{1.0, -2.0}});

  Parameter s("s", Matrix{{0.0}});
  std::vector<Parameter*> ss{&s};
  Adam one(0.01);
  s.grad(0, 0) = 1.0;
  one.step(ss);
  CHECK(s.value(0, 0) == Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(s.grad(0, 0) == 0.0);

  Parameter q("q", Matrix{{1.0}});
  std::vector<Parameter*> qs{&q};
  Adam bowl(0.05);
  for (int i = 0; i < 500; ++i) {
    q.grad(0, 0) = 2.0 * q.value(0, 0);
    bowl.step(qs);
  }
  CHECK(std::abs(q.value(0, 0)) < 1e-3);

  Parameter frozen("f", Matrix{{1.0}}, false);
  std::vector<Parameter*> fs{&frozen};
  frozen.grad(0, 0) = 5.0;
  Adam(0.1).step(fs);
  CHECK(frozen.value(0, 0) == 1.0);
}

TEST_CASE("finite-difference check of every layer on small random shapes") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const std::size_t d = 1 + rng.below(5);
    const std::size_t d2 = 1 + rng.below(5);
    const Matrix adj = symmetric_adjacency(n, rng);
    Parameter x("x", testing::random_matrix(n, d, rng));
    Parameter w1("w1", testing::random_matrix(d, d2, rng));
    Parameter b1("b1", testing::random_matrix(1, d2, rng));
    Parameter w2("w2", testing::random_matrix(d2, d, rng));
    Parameter b2("b2", testing::random_matrix(1, d, rng));
    const Matrix target = testing::random_matrix(1, d, rng);
    const Matrix proj = testing::random_matrix(n, d, rng);
    std::vector<Parameter*> ps{&x, &w1, &b1, &w2, &b2};
    std::vector<bool> rows(n, false);
    rows[0] = true;

    const auto loss = [&](bool grad) {
      const Matrix h1 = gcn_forward(adj, x.value, w1.value, b1.value, Activation::tanh);
      const Matrix h2 = dense_forward(h1, w2.value, b2.value, Activation::tanh);
      const Matrix h3 = dense_forward(h2, Matrix::identity(d), Matrix(1, d), Activation::linear);
      const Matrix pooled = mean_pool(h3);
      const double value = mse(pooled, target).mse + 0.5 * mse(h3, proj, rows).mse + project(h1, h1) * 0.1;
      if (grad) {
        for (auto* p : ps) p->zero_grad();
        Matrix g3 = mean_pool_backward(mse_backward(pooled, target), n);
        g3 += mse_backward(h3, proj, rows, 0.5);
        Matrix dummy_w(d, d), dummy_b(1, d);
        const Matrix g2 = dense_backward(h2, Matrix::identity(d), h3, g3, Activation::linear, dummy_w, dummy_b);
        Matrix g1 = dense_backward(h1, w2.value, h2, g2, Activation::tanh, w2.grad, b2.grad);
        g1 += h1 * 0.2;
        x.grad += gcn_backward(adj, x.value, w1.value, h1, g1, Activation::tanh, w1.grad, b1.grad);
      }
      return value;
    };
    const auto res = finite_difference_check(loss, ps, 1e-5, 32, 100 + static_cast<std::uint64_t>(trial));
    CHECK(res.max_rel_error < 1e-4);
    CHECK(res.coords_checked > 0);
  }
}

TEST_CASE("gradient checker: exact on a linear loss, flags a corrupted backward") {
  Rng rng(9);
  Parameter w("w", testing::random_matrix(3, 3, rng));
  std::vector<Parameter*> ps{&w};
  const auto linear = [&](bool grad) {
    double s = 0.0;
    for (double v : w.value.data()) s += v;
    if (grad) w.grad.fill(1.0);
    return s;
  };
  CHECK(finite_difference_check(linear, ps).max_rel_error < 1e-8);

  const auto wrong = [&](bool grad) {
    double s = 0.0;
    for (double v : w.value.data()) s += v * v;
    if (grad) {
      w.grad = w.value * 1.5;  // should be 2 w
    }
    return s;
  };
  CHECK(finite_difference_check(wrong, ps).max_rel_error > 1e-2);
}

TEST_CASE("xavier init bound and determinism") {
  Rng a(1), b(1);
  const Matrix m = xavier_uniform(10, 6, a);
  CHECK(m == xavier_uniform(10, 6, b));
  const double bound = std::sqrt(6.0 / 16.0);
  for (double v : m.data()) CHECK(std::abs(v) <= bound);
}
