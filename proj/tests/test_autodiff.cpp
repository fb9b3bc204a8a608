// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "wig/autodiff.hpp"
#include "wig/types.hpp"

using namespace wig;

namespace {

Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

/// Central finite difference of `f` w.r.t. entry (i,j) of one input.
double fd_entry(const std::function<double(const std::vector<Matrix>&)>& f,
                std::vector<Matrix> inputs, int which, int i, int j, double eps = 1e-6) {
  inputs[which](i, j) += eps;
  const double up = f(inputs);
  inputs[which](i, j) -= 2 * eps;
  const double down = f(inputs);
  return (up - down) / (2 * eps);
}

/// Builds the graph with `build`, backprops, and compares every entry of every
/// differentiable input's gradient against finite differences.
void check_gradients(const std::vector<Matrix>& inputs,
                     const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& build) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix& m : inputs) vars.push_back(tape.leaf(m, true));
  const ad::Var loss = build(tape, vars);
  tape.backward(loss);

  const auto eval = [&](const std::vector<Matrix>& xs) {
    ad::Tape t;
    std::vector<ad::Var> vs;
    for (const Matrix& m : xs) vs.push_back(t.leaf(m, false));
    return t.value(build(t, vs))(0, 0);
  };

  for (std::size_t w = 0; w < inputs.size(); ++w) {
    const Matrix& g = tape.grad(vars[w]);
    REQUIRE(g.rows() == inputs[w].rows());
    REQUIRE(g.cols() == inputs[w].cols());
    for (int i = 0; i < g.rows(); ++i)
      for (int j = 0; j < g.cols(); ++j) {
        const double fd = fd_entry(eval, inputs, static_cast<int>(w), i, j);
        CHECK(g(i, j) == doctest::Approx(fd).epsilon(1e-5));
      }
  }
}

}  // namespace

TEST_CASE("forward values match Eigen for every op") {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(4, 2, rng);
  const Matrix c = random_matrix(3, 4, rng);

  ad::Tape tape;
  const ad::Var va = tape.leaf(a);
  const ad::Var vb = tape.leaf(b);
  const ad::Var vc = tape.leaf(c);

  CHECK((tape.value(tape.matmul(va, vb)) - a * b).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((tape.value(tape.add(va, vc)) - (a + c)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((tape.value(tape.sub(va, vc)) - (a - c)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((tape.value(tape.cwise_mul(va, vc)) - a.cwiseProduct(c)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((tape.value(tape.relu(va)) - a.cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((tape.value(tape.scale(va, -2.5)) - (-2.5 * a)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(tape.value(tape.sum(va))(0, 0) == doctest::Approx(a.sum()).epsilon(1e-14));

  const Matrix sig = tape.value(tape.sigmoid(va));
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      CHECK(sig(i, j) == doctest::Approx(1.0 / (1.0 + std::exp(-a(i, j)))).epsilon(1e-14));

  const Matrix gathered = tape.value(tape.gather_rows(va, {2, 0, 0}));
  CHECK((gathered.row(0) - a.row(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((gathered.row(1) - a.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((gathered.row(2) - a.row(0)).cwiseAbs().maxCoeff() == 0.0);

  const Matrix seg = tape.value(tape.segment_sum(va, {1, 0, 1}, 2));
  CHECK((seg.row(0) - a.row(1)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((seg.row(1) - (a.row(0) + a.row(2))).cwiseAbs().maxCoeff() < 1e-14);

  Matrix row(1, 3);
  row << 1.0, -2.0, 3.0;
  const Matrix bc = tape.value(tape.broadcast_rows(tape.leaf(row), 4));
  REQUIRE(bc.rows() == 4);
  for (int i = 0; i < 4; ++i) CHECK((bc.row(i) - row).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dense layer gradient matches the hand-derived closed form") {
  // loss = sum(relu(X W + 1 b)); for positive pre-activations
  // dW = X^T * 1,  db = column sums of an all-ones matrix = n per entry.
  Matrix x(2, 3);
  x << 1.0, 2.0, 0.5, 0.25, 1.5, 1.0;
  Matrix w = Matrix::Constant(3, 2, 0.3);
  Matrix bias = Matrix::Constant(1, 2, 0.1);

  ad::Tape tape;
  const ad::Var vx = tape.leaf(x);
  const ad::Var vw = tape.leaf(w, true);
  const ad::Var vbias = tape.leaf(bias, true);
  const ad::Var z = tape.add(tape.matmul(vx, vw), tape.broadcast_rows(vbias, 2));
  const ad::Var loss = tape.sum(tape.relu(z));
  tape.backward(loss);

  const Matrix dw_expected = x.transpose() * Matrix::Ones(2, 2);
  CHECK((tape.grad(vw) - dw_expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((tape.grad(vbias) - Matrix::Constant(1, 2, 2.0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(tape.grad(vx).cwiseAbs().maxCoeff() == 0.0);  // constant leaf: zero gradient
}

TEST_CASE("composite graph gradients agree with finite differences") {
  std::mt19937_64 rng(7);

  SUBCASE("two-layer network with sigmoid head") {
    const Matrix x = random_matrix(3, 4, rng);
    const Matrix w1 = random_matrix(4, 5, rng);
    const Matrix b1 = random_matrix(1, 5, rng);
    const Matrix w2 = random_matrix(5, 1, rng);
    check_gradients({w1, b1, w2}, [&](ad::Tape& t, const std::vector<ad::Var>& v) {
      const ad::Var h =
          t.relu(t.add(t.matmul(t.leaf(x), v[0]), t.broadcast_rows(v[1], 3)));
      return t.sum(t.sigmoid(t.matmul(h, v[2])));
    });
  }

  SUBCASE("elementwise product and scale") {
    const Matrix a = random_matrix(2, 3, rng);
    const Matrix b = random_matrix(2, 3, rng);
    check_gradients({a, b}, [](ad::Tape& t, const std::vector<ad::Var>& v) {
      return t.sum(t.scale(t.cwise_mul(v[0], v[1]), 0.7));
    });
  }

  SUBCASE("gather and segment-sum round trip") {
    const Matrix a = random_matrix(3, 2, rng);
    check_gradients({a}, [](ad::Tape& t, const std::vector<ad::Var>& v) {
      const ad::Var g = t.gather_rows(v[0], {0, 2, 1, 0, 2});
      const ad::Var s = t.segment_sum(g, {1, 0, 0, 1, 1}, 2);
      return t.sum(t.cwise_mul(s, s));
    });
  }

  SUBCASE("same leaf used twice accumulates both paths") {
    const Matrix a = random_matrix(2, 2, rng);
    check_gradients({a}, [](ad::Tape& t, const std::vector<ad::Var>& v) {
      return t.sum(t.add(t.cwise_mul(v[0], v[0]), t.scale(v[0], 3.0)));
    });
  }
}

TEST_CASE("gather and segment_sum are adjoint: gradient of one is the other") {
  // For y = gather_rows(a, idx), dL/da = segment_sum(dL/dy, idx); duplicated
  // source rows must accumulate.
  Matrix a(3, 2);
  a << 1, 2, 3, 4, 5, 6;
  ad::Tape tape;
  const ad::Var va = tape.leaf(a, true);
  const ad::Var g = tape.gather_rows(va, {1, 1, 0});
  tape.backward(tape.sum(g));
  Matrix expected(3, 2);
  expected << 1, 1, 2, 2, 0, 0;  // row 1 gathered twice, row 2 never
  CHECK((tape.grad(va) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant subtrees receive no gradients") {
  Matrix a = Matrix::Ones(2, 2);
  ad::Tape tape;
  const ad::Var c = tape.leaf(a, false);
  const ad::Var d = tape.leaf(a, true);
  const ad::Var loss = tape.sum(tape.cwise_mul(c, d));
  tape.backward(loss);
  CHECK(tape.grad(c).cwiseAbs().maxCoeff() == 0.0);
  CHECK(tape.grad(c).rows() == 2);
  CHECK((tape.grad(d) - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward validates its target and is single-shot") {
  ad::Tape tape;
  const ad::Var a = tape.leaf(Matrix::Ones(2, 2), true);
  const ad::Var notscalar = tape.scale(a, 2.0);
  CHECK_THROWS_AS(tape.backward(notscalar), std::invalid_argument);

  const ad::Var loss = tape.sum(a);
  tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("operand shape and tape-membership errors are rejected") {
  ad::Tape tape;
  const ad::Var a = tape.leaf(Matrix::Ones(2, 3));
  const ad::Var b = tape.leaf(Matrix::Ones(3, 2));
  CHECK_THROWS_AS(tape.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(tape.cwise_mul(a, b), std::invalid_argument);
  CHECK_THROWS_AS(tape.matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(tape.gather_rows(a, {0, 5}), std::invalid_argument);
  CHECK_THROWS_AS(tape.segment_sum(a, {0}, 2), std::invalid_argument);  // one id per row
  CHECK_THROWS_AS(tape.broadcast_rows(a, 3), std::invalid_argument);       // not a row
  CHECK_THROWS_AS(tape.value(ad::Var{}), std::invalid_argument);
  CHECK_THROWS_AS(tape.value(ad::Var{999}), std::invalid_argument);
}
