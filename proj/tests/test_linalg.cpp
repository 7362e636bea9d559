#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "nested_is/linalg.hpp"

namespace nis {
namespace {

MatrixXd random_spd(Rng& rng, Index n) {
  MatrixXd a(n, n);
  fill_standard_normal(rng, a);
  return symmetrized(MatrixXd(a * a.transpose() + 0.5 * MatrixXd::Identity(n, n)));
}

double cofactor_det(const MatrixXd& m) {
  if (m.rows() == 1) return m(0, 0);
  if (m.rows() == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

TEST(CholSpd, ScalarAndIdentity) {
  const auto f = chol_spd(MatrixXd::Constant(1, 1, 4.0));
  EXPECT_DOUBLE_EQ(f.lower_factor()(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(f.log_det(), std::log(4.0));

  const auto id = chol_spd(MatrixXd::Identity(3, 3));
  EXPECT_TRUE(id.lower_factor().isIdentity(0.0));
  EXPECT_EQ(id.log_det(), 0.0);
}

TEST(CholSpd, TwoByTwo) {
  MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  const auto f = chol_spd(m);
  EXPECT_NEAR(f.lower_factor()(0, 0), 1.41421356, 1e-8);
  EXPECT_EQ(f.lower_factor()(0, 1), 0.0);
  EXPECT_NEAR(f.lower_factor()(1, 0), 0.70710678, 1e-8);
  EXPECT_NEAR(f.lower_factor()(1, 1), 1.22474487, 1e-8);
  EXPECT_NEAR(f.log_det(), std::log(3.0), 1e-14);
  EXPECT_TRUE(f.reconstruct().isApprox(m, 1e-14));
}

TEST(CholSpd, Errors) {
  MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  try {
    chol_spd(indefinite);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSpd);
  }
  MatrixXd asym(2, 2);
  asym << 2, 1, 0, 2;
  try {
    chol_spd(asym);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSymmetric);
  }
  try {
    chol_spd(MatrixXd::Ones(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSquare);
  }
}

TEST(CholSpd, RandomMatricesAgainstEigenLlt) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + trial % 6;
    const MatrixXd m = random_spd(rng, n);
    const auto f = chol_spd(m);
    EXPECT_TRUE((f.lower_factor().diagonal().array() > 0).all());
    const MatrixXd ref = m.llt().matrixL();
    EXPECT_TRUE(f.lower_factor().isApprox(ref, 1e-12));
    const double scale = m.cwiseAbs().maxCoeff();
    EXPECT_LE((f.reconstruct() - m).cwiseAbs().maxCoeff(), 1e-10 * scale);
    EXPECT_DOUBLE_EQ(f.log_det(), 2.0 * f.lower_factor().diagonal().array().log().sum());
    if (n <= 3) EXPECT_NEAR(std::exp(f.log_det()) / cofactor_det(m), 1.0, 1e-9);
  }
}

TEST(SymEigvals, Examples) {
  const VectorXd d = sym_eigvals(VectorXd((VectorXd(3) << 3, 1, 2).finished()).asDiagonal().toDenseMatrix());
  EXPECT_EQ(d, (VectorXd(3) << 3, 2, 1).finished());

  MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  const VectorXd e = sym_eigvals(m);
  EXPECT_NEAR(e(0), 3.0, 1e-14);
  EXPECT_NEAR(e(1), 1.0, 1e-14);

  EXPECT_EQ(sym_eigvals(MatrixXd::Identity(5, 5)), VectorXd::Ones(5));
}

TEST(SymEigvals, RandomAgainstEigenSolverAndPermutation) {
  Rng rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = 2 + trial % 30;
    MatrixXd a(n, n);
    fill_standard_normal(rng, a);
    const MatrixXd m = symmetrized(a);
    const VectorXd ours = sym_eigvals(m);
    VectorXd ref = Eigen::SelfAdjointEigenSolver<MatrixXd>(m).eigenvalues().reverse();
    EXPECT_LE((ours - ref).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    EXPECT_TRUE(std::is_sorted(ours.data(), ours.data() + n, std::greater<double>()));

    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
    for (Index i = 0; i < n; ++i) p.indices()(i) = perm[static_cast<std::size_t>(i)];
    const MatrixXd permuted = p.transpose() * m * p;
    EXPECT_LE((sym_eigvals(symmetrized(permuted)) - ours).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(MaxSingularValue, Examples) {
  EXPECT_EQ(max_singular_value(MatrixXd::Zero(2, 3)), 0.0);
  EXPECT_NEAR(max_singular_value(MatrixXd::Identity(4, 4)), 1.0, 1e-15);
  MatrixXd m(2, 2);
  m << 3, 0, 4, 0;
  EXPECT_NEAR(max_singular_value(m), 5.0, 1e-14);
}

TEST(MaxSingularValue, HomogeneousAndMatchesSvdOracle) {
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    MatrixXd m(1 + trial % 3, 1 + (7 * trial) % 50);
    fill_standard_normal(rng, m);
    const double s = max_singular_value(m);
    const double c = -3.7 + 0.25 * trial;
    EXPECT_NEAR(max_singular_value(MatrixXd(c * m)), std::abs(c) * s, 1e-10 * std::abs(c) * s);
    const double ref =
        std::sqrt(Eigen::SelfAdjointEigenSolver<MatrixXd>(m.transpose() * m).eigenvalues().maxCoeff());
    EXPECT_NEAR(s, ref, 1e-10 * ref);
  }
}

TEST(MvnLogpdf, Examples) {
  const auto one = chol_spd(MatrixXd::Identity(1, 1));
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(mvn_logpdf(VectorXd::Zero(1), VectorXd::Zero(1), one), -0.91893853, 1e-8);
  EXPECT_NEAR(mvn_logpdf(VectorXd::Ones(1), VectorXd::Zero(1), one), -half_log_2pi - 0.5, 1e-14);
  MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  EXPECT_NEAR(mvn_logpdf(VectorXd::Ones(2), VectorXd::Zero(2), chol_spd(m)), -2.7205165440767337,
              1e-13);
  EXPECT_THROW(mvn_logpdf(VectorXd::Ones(3), VectorXd::Zero(2), chol_spd(m)), Error);
}

TEST(MvnLogpdf, IntegratesToOne) {
  const double sigma = 1.7;
  const auto f = chol_spd(MatrixXd::Constant(1, 1, sigma * sigma));
  const int n = 4001;
  const double lo = 0.3 - 8 * sigma;
  const double h = 16 * sigma / (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    sum += w * std::exp(mvn_logpdf(VectorXd::Constant(1, lo + i * h), VectorXd::Constant(1, 0.3), f));
  }
  EXPECT_NEAR(sum * h, 1.0, 1e-6);
}

TEST(MvnSample, VanishingVariance) {
  Rng rng(1);
  const MatrixXd draws = mvn_sample(rng, VectorXd::Zero(1), chol_spd(MatrixXd::Constant(1, 1, 1e-16)), 100);
  EXPECT_LE(draws.cwiseAbs().maxCoeff(), 1e-7);
}

TEST(MvnSample, Moments) {
  Rng rng(2);
  const Index n = 100000;
  const MatrixXd std_draws = mvn_sample(rng, VectorXd::Zero(1), chol_spd(MatrixXd::Identity(1, 1)), n);
  EXPECT_LE(std::abs(std_draws.mean()), 4.0 / std::sqrt(static_cast<double>(n)));

  const VectorXd mean = (VectorXd(2) << 1, 2).finished();
  const MatrixXd cov = VectorXd((VectorXd(2) << 4, 9).finished()).asDiagonal();
  const MatrixXd draws = mvn_sample(rng, mean, chol_spd(cov), n);
  const VectorXd m = draws.rowwise().mean();
  const MatrixXd centred = draws.colwise() - m;
  const MatrixXd s = centred * centred.transpose() / static_cast<double>(n - 1);
  EXPECT_NEAR(s(0, 0) / 4.0, 1.0, 0.05);
  EXPECT_NEAR(s(1, 1) / 9.0, 1.0, 0.05);
}

TEST(MvnSample, DeterministicGivenSeed) {
  MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  Rng a(99);
  Rng b(99);
  EXPECT_EQ(mvn_sample(a, VectorXd::Zero(2), chol_spd(m), 10), mvn_sample(b, VectorXd::Zero(2), chol_spd(m), 10));
  EXPECT_THROW(mvn_sample(a, VectorXd::Zero(2), chol_spd(m), 0), Error);
  EXPECT_THROW(mvn_sample(a, VectorXd::Zero(3), chol_spd(m), 1), Error);
}

TEST(LogSumExp, Stable) {
  EXPECT_NEAR(log_sum_exp(VectorXd::Constant(4, -1000.0)), -1000.0 + std::log(4.0), 1e-12);
  EXPECT_EQ(log_sum_exp(VectorXd::Constant(2, -std::numeric_limits<double>::infinity())),
            -std::numeric_limits<double>::infinity());
}

TEST(DeriveSeed, DistinctStreamsAndMasters) {
  Rng rng(5);
  std::vector<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t s = rng();
    EXPECT_NE(derive_seed(s, 0, 0, 0), derive_seed(s, 0, 0, 1));
    EXPECT_EQ(derive_seed(s, 3, 4, 5), derive_seed(s, 3, 4, 5));
    seen.push_back(derive_seed(s, 0, 0, 0));
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
}

TEST(DeriveSeed, NoCollisionsOnAcceptanceGrid) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t cell = 0; cell < 64; ++cell)
    for (std::uint64_t rep = 0; rep < 10000; rep += 7)
      for (std::uint64_t stream = 0; stream < 5; ++stream) seeds.push_back(derive_seed(42, cell, rep, stream));
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::adjacent_find(seeds.begin(), seeds.end()), seeds.end());
}

}  // namespace
}  // namespace nis
