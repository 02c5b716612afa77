#include <doctest.h>

#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "atp/errors.hpp"
#include "atp/trajectory.hpp"

using namespace atp;

namespace {

MatrixXd random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

TEST_CASE("tridiagonal solve and multiply agree with dense algebra") {
  std::mt19937_64 rng(1);
  for (int n : {1, 2, 5, 40}) {
    const SpdTridiagonal A = SpdTridiagonal::second_difference(n);
    const MatrixXd B = random_matrix(n, 3, rng);
    const MatrixXd dense = A.dense();
    CHECK((A.multiply(B) - dense * B).norm() < 1e-12);
    CHECK((A.solve(B) - dense.ldlt().solve(B)).norm() < 1e-9);
  }
}

TEST_CASE("tridiagonal rejects indefinite input") {
  Eigen::VectorXd d(2), o(1);
  d << 1, 1;
  o << 2;
  CHECK_THROWS_AS(SpdTridiagonal(d, o), NumericError);
}

TEST_CASE("start-clamped block pattern") {
  MatrixXd e3(3, 3);
  e3 << 2, -1, 0, -1, 2, -1, 0, -1, 2;
  CHECK(SmoothnessOperator(3).start_clamped_block().dense() == e3);
  MatrixXd e2(2, 2);
  e2 << 2, -1, -1, 2;
  CHECK(SmoothnessOperator(2).start_clamped_block().dense() == e2);
}

TEST_CASE("smoothness blocks are symmetric positive definite") {
  for (int T : {2, 3, 10, 49}) {
    const SmoothnessOperator op(T);
    for (const MatrixXd& B : {op.start_clamped_block().dense(), op.interior_block().dense()}) {
      CHECK((B - B.transpose()).norm() == 0.0);
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(B);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
    const MatrixXd M = op.dense();
    CHECK(M.rows() == T + 1);
    CHECK(M.row(0).norm() == 0.0);
    CHECK(M.col(0).norm() == 0.0);
  }
  CHECK_THROWS_AS(SmoothnessOperator(1), ContractError);
}

TEST_CASE("goal shift propagation: T=3 ramp") {
  const SmoothnessOperator op(3);
  VectorXd dq(1);
  dq << 1.0;
  const MatrixXd d = propagate_goal_shift(op, dq);
  VectorXd expected(4);
  expected << 0, 0.25, 0.5, 0.75;
  CHECK((d.col(0) - expected).norm() < 1e-15);
}

TEST_CASE("goal shift propagation matches a dense solve") {
  std::mt19937_64 rng(2);
  for (int T : {2, 7, 49}) {
    const SmoothnessOperator op(T);
    const VectorXd dq = random_matrix(3, 1, rng);
    MatrixXd rhs = MatrixXd::Zero(T, 3);
    rhs.row(T - 1) = dq.transpose();
    const MatrixXd ref = op.start_clamped_block().dense().fullPivLu().solve(rhs);
    const MatrixXd got = propagate_goal_shift(op, dq);
    CHECK(got.row(0).norm() == 0.0);
    CHECK((got.bottomRows(T) - ref).cwiseAbs().maxCoeff() < 1e-9);
    // the ramp has the closed form t/(T+1) dq
    for (int t = 0; t <= T; ++t) CHECK((got.row(t).transpose() - dq * t / (T + 1.0)).norm() < 1e-12);
  }
}

TEST_CASE("goal shift propagation is linear") {
  const SmoothnessOperator op(10);
  VectorXd a(2), b(2);
  a << 0.3, -0.7;
  b = 2 * a;
  CHECK(propagate_goal_shift(op, VectorXd::Zero(2)).norm() == 0.0);
  CHECK(propagate_goal_shift(op, b) == 2 * propagate_goal_shift(op, a));
}

TEST_CASE("smoothness norm") {
  const SmoothnessOperator op(3);
  const MatrixXd ones = MatrixXd::Ones(4, 1);
  const MatrixXd M = op.dense();
  CHECK(smoothness_norm(op, ones) == doctest::Approx((ones.transpose() * M * ones)(0, 0)).epsilon(1e-15));
  CHECK(smoothness_norm(op, MatrixXd::Zero(4, 2)) == 0.0);

  std::mt19937_64 rng(4);
  const SmoothnessOperator big(20);
  const MatrixXd xi = random_matrix(21, 3, rng);
  const double base = smoothness_norm(big, xi);
  CHECK(smoothness_norm(big, 2 * xi) == doctest::Approx(4 * base).epsilon(1e-13));
  double ref = 0;
  for (int j = 0; j < 3; ++j) ref += xi.col(j).dot(big.dense() * xi.col(j));
  CHECK(base == doctest::Approx(ref).epsilon(1e-13));
  CHECK((big.apply(xi) - big.dense() * xi).norm() < 1e-12);
}

TEST_CASE("perturbation noise coloring") {
  const SmoothnessOperator op(6);
  const MatrixXd K = op.interior_block().dense();
  const MatrixXd cov = (K.transpose() * K).inverse();
  CHECK((op.interior_precision_inverse() - cov).norm() < 1e-10);
  CHECK(op.perturbation_normalizer() == doctest::Approx(cov.diagonal().maxCoeff()).epsilon(1e-12));
  // colored noise of the identity is K^{-1} / sqrt(normalizer)
  const MatrixXd I = MatrixXd::Identity(5, 5);
  const MatrixXd colored = op.color_interior_noise(I);
  CHECK((colored * colored.transpose() - cov / op.perturbation_normalizer()).norm() < 1e-10);
}

TEST_CASE("trajectory validation and layout") {
  MatrixXd pts(3, 2);
  pts << 0, 1, 2, 3, -1, -2;
  const Trajectory xi(pts);
  CHECK(xi.steps() == 2);
  CHECK(xi.dof() == 2);
  VectorXd flat(6);
  flat << 0, 1, 2, 3, -1, -2;
  CHECK(xi.flatten() == flat);
  CHECK(Trajectory::unflatten(flat, 2) == xi);
  CHECK(xi.goal() == pts.row(2).transpose());

  MatrixXd bad = pts;
  bad(1, 1) = 4.0;
  CHECK_THROWS_AS(Trajectory{bad}, ContractError);
  CHECK(count_out_of_range(bad) == 1);
  CHECK(Trajectory::clamped(bad).points()(1, 1) == doctest::Approx(std::numbers::pi));
  CHECK_THROWS_AS(Trajectory(MatrixXd::Zero(2, 3)), ContractError);
  MatrixXd nan = pts;
  nan(0, 0) = std::nan("");
  CHECK_THROWS(Trajectory{nan});
}
