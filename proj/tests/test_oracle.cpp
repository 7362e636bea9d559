#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nested_is/oracle.hpp"

namespace nis {
namespace {

LinearGaussianModel s1() { return make_lg_family(s1_family(), 1); }

VectorXd vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

MatrixXd mat1(double v) { return MatrixXd::Constant(1, 1, v); }

LinearGaussianModel random_model(Rng& rng, Index d_x, Index d_z, Index d_y) {
  auto spd = [&](Index n) {
    MatrixXd a(n, n);
    fill_standard_normal(rng, a);
    return symmetrized(MatrixXd(a * a.transpose() / static_cast<double>(n) + 0.3 * MatrixXd::Identity(n, n)));
  };
  auto gauss = [&](Index r, Index c, double scale) {
    MatrixXd m(r, c);
    fill_standard_normal(rng, m);
    return MatrixXd(scale * m);
  };
  VectorXd mu(d_x);
  fill_standard_normal(rng, mu);
  return LinearGaussianModel(mu, spd(d_x), gauss(d_z, d_x, 1.0), spd(d_z), gauss(d_y, d_x, 0.8),
                             gauss(d_y, d_z, 0.8), spd(d_y));
}

LinearGaussianModel random_scalar(Rng& rng) {
  auto pos = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  return LinearGaussianModel(vec({pos(-1, 1)}), mat1(pos(0.5, 2)), mat1(pos(-1.5, 1.5)), mat1(pos(0.3, 2)),
                             mat1(pos(-1, 1)), mat1(pos(-1.5, 1.5)), mat1(pos(0.4, 2)));
}

TEST(ObsMoments, Examples) {
  const auto m = lg_obs_moments(s1());
  EXPECT_DOUBLE_EQ(m.T(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.mu_y(0), 0.0);
  EXPECT_DOUBLE_EQ(m.sigma_y(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(m.s2(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(m.noise_cov(0, 0), 2.0);

  const LinearGaussianModel two(vec({0.0}), mat1(1.5), MatrixXd::Ones(2, 1), MatrixXd::Identity(2, 2),
                                mat1(0.0), MatrixXd::Ones(1, 2), mat1(0.7));
  const auto t = lg_obs_moments(two);
  EXPECT_DOUBLE_EQ(t.T(0, 0), 2.0);
  EXPECT_NEAR(t.sigma_y(0, 0), 4 * 1.5 + 2 + 0.7, 1e-14);

  const LinearGaussianModel silent(vec({0.4}), mat1(1.0), mat1(0.0), mat1(1.0), mat1(0.0), mat1(0.0), mat1(0.9));
  const auto s = lg_obs_moments(silent);
  EXPECT_DOUBLE_EQ(s.sigma_y(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(s.mu_y(0), 0.0);
}

TEST(ObsMoments, RandomInvariants) {
  Rng rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto model = random_model(rng, 1 + trial % 2, 1 + trial % 7, 1 + trial % 3);
    const auto m = lg_obs_moments(model);
    EXPECT_TRUE(m.T.isApprox(model.A() + model.B() * model.H(), 1e-14));
    const MatrixXd sy = m.T * model.sigma_x() * m.T.transpose() + model.B() * model.Q() * model.B().transpose() + model.R();
    EXPECT_LE((m.sigma_y - sy).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NO_THROW(chol_spd(m.s2));
  }
}

TEST(MarginalLikelihood, FrozenValues) {
  const auto model = s1();
  EXPECT_NEAR(lg_marginal_likelihood(model, vec({0.0})), 0.577350269189625765, 1e-15);
  EXPECT_NEAR(lg_marginal_likelihood(model, vec({1.0})), 0.488716451729694775, 1e-15);
  EXPECT_NEAR(lg_marginal_likelihood(model, vec({3.0})), 0.128824258026020269, 1e-15);
  EXPECT_NEAR(lg_log_marginal_likelihood(model, vec({3.0})), std::log(0.128824258026020269), 1e-14);
}

TEST(MarginalLikelihood, ModeValue) {
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const auto model = random_model(rng, 2, 3, 2);
    const auto m = lg_obs_moments(model);
    EXPECT_NEAR(lg_marginal_likelihood(model, m.mu_y),
                std::sqrt(std::exp(model.R_factor().log_det() - m.sigma_y_factor.log_det())), 1e-13);
  }
}

TEST(MarginalLikelihood, DensityIntegratesToOne) {
  Rng rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const auto model = random_scalar(rng).with_convention(LikelihoodConvention::Density);
    const auto m = lg_obs_moments(model);
    const double sd = std::sqrt(m.sigma_y(0, 0));
    const int n = 4001;
    const double lo = m.mu_y(0) - 10 * sd, h = 20 * sd / (n - 1);
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      sum += ((i == 0 || i == n - 1) ? 0.5 : 1.0) * lg_marginal_likelihood(model, vec({lo + i * h}));
    EXPECT_NEAR(sum * h, 1.0, 1e-6);
  }
}

TEST(MarginalLikelihood, AgreesWithGrid) {
  const auto model = s1();
  for (double y : {0.0, 1.0, 3.0}) {
    const auto grid = grid_posterior_oracle(model, vec({y}), default_grid_spec(model));
    EXPECT_NEAR(grid.marginal_likelihood, lg_marginal_likelihood(model, vec({y})), 1e-6) << y;
  }
}

TEST(PosteriorExact, Examples) {
  const auto model = s1();
  const auto p3 = lg_posterior_exact(model, vec({3.0}));
  EXPECT_NEAR(p3.mean(0), 1.0, 1e-14);
  EXPECT_NEAR(p3.cov(0, 0), 2.0 / 3.0, 1e-14);
  const auto p0 = lg_posterior_exact(model, vec({0.0}));
  EXPECT_NEAR(p0.mean(0), 0.0, 1e-15);
  EXPECT_NEAR(p0.cov(0, 0), 2.0 / 3.0, 1e-14);

  const LinearGaussianModel silent(vec({0.4}), mat1(1.3), mat1(0.0), mat1(1.0), mat1(0.0), mat1(0.0), mat1(0.9));
  const auto prior = lg_posterior_exact(silent, vec({5.0}));
  EXPECT_DOUBLE_EQ(prior.mean(0), 0.4);
  EXPECT_DOUBLE_EQ(prior.cov(0, 0), 1.3);
}

TEST(PosteriorExact, PrecisionFormMatchesGainForm) {
  Rng rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = random_model(rng, 1 + trial % 3, 1 + trial % 5, 1 + trial % 2);
    VectorXd y(model.dims().y);
    fill_standard_normal(rng, y);
    const auto m = lg_obs_moments(model);
    const MatrixXd gain = model.sigma_x() * m.T.transpose() * m.sigma_y_factor.inverse();
    const VectorXd mean = model.mu_x() + gain * (y - m.T * model.mu_x());
    const MatrixXd cov = model.sigma_x() - gain * m.T * model.sigma_x();
    const auto post = lg_posterior_exact(model, y);
    EXPECT_LE((post.mean - mean).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((post.cov - cov).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(GridOracle, S1Examples) {
  const auto model = s1();
  const TestFunction one(TestFunctionKind::Constant, vec({1.0}));
  const TestFunction tanh(TestFunctionKind::Tanh, vec({1.0}));
  const auto grid = grid_posterior_oracle(model, vec({3.0}), default_grid_spec(model), {one, tanh});
  EXPECT_NEAR(grid.mean(0), 1.0, 1e-6);
  EXPECT_NEAR(grid.cov(0, 0), 2.0 / 3.0, 1e-6);
  EXPECT_NEAR(grid.expectations[0], 1.0, 1e-10);
  EXPECT_NEAR(grid.expectations[1], 0.600985129806661535, 1e-8);
}

TEST(GridOracle, TwentyRandomScalarModels) {
  Rng rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const auto model = random_scalar(rng);
    const VectorXd y = vec({-2.0 + 4.0 * rng.uniform()});
    const auto exact = lg_posterior_exact(model, y);
    const auto grid = grid_posterior_oracle(model, y, default_grid_spec(model));
    EXPECT_NEAR(grid.mean(0), exact.mean(0), 1e-6) << trial;
    EXPECT_NEAR(grid.cov(0, 0), exact.cov(0, 0), 1e-6) << trial;
  }
}

TEST(GridOracle, Errors) {
  FamilySpec spec = s1_family();
  const auto wide = make_lg_family(spec, 3);
  try {
    grid_posterior_oracle(wide, vec({0.0}), default_grid_spec(wide));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedDims);
  }
  const auto model = s1();
  GridSpec coarse = default_grid_spec(model);
  coarse.points = 5;
  try {
    grid_posterior_oracle(model, vec({3.0}), coarse);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridTooCoarse);
  }
}

TEST(GaussianExpectation, FrozenValues) {
  const TestFunction tanh(TestFunctionKind::Tanh, vec({1.0}));
  EXPECT_NEAR(gaussian_expectation(tanh, vec({1.0}), mat1(2.0 / 3.0)), 0.600985129806661535, 1e-12);
  EXPECT_NEAR(gaussian_expectation(tanh, vec({0.3}), mat1(0.5)), 0.215013321873744707, 1e-12);
  const TestFunction rational(TestFunctionKind::Rational, vec({1.0}));
  EXPECT_NEAR(gaussian_expectation(rational, vec({0.5}), mat1(2.0)), 0.526160770083555469, 1e-10);
  MatrixXd cov(2, 2);
  cov << 1.0, 0.3, 0.3, 0.5;
  const TestFunction rational2(TestFunctionKind::Rational, vec({1.0, 0.0}));
  EXPECT_NEAR(gaussian_expectation(rational2, vec({0.5, -1.0}), cov), 0.357046811032781233, 1e-10);
  const TestFunction cosine(TestFunctionKind::Cos, vec({1.0}));
  EXPECT_NEAR(gaussian_expectation(cosine, vec({0.4}), mat1(0.8)), std::cos(0.4) * std::exp(-0.4), 1e-15);
}

TEST(LinkNorm, FrozenValuesAndConventionInvariance) {
  const auto model = s1();
  EXPECT_NEAR(lg_link_norm_sq(model, vec({0.0})), 1.341640786499873818, 1e-13);
  EXPECT_NEAR(lg_link_norm_sq(model, vec({2.0})), 2.286967412183130295, 1e-13);
  Rng rng(46);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sup = random_model(rng, 1 + trial % 2, 1 + trial % 4, 1 + trial % 3);
    const auto density = sup.with_convention(LikelihoodConvention::Density);
    VectorXd y(sup.dims().y);
    fill_standard_normal(rng, y);
    const double a = lg_link_norm_sq(sup, y);
    const double b = lg_link_norm_sq(density, y);
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(b / a, 1.0, 1e-12);
  }
}

TEST(LinkNorm, AgreesWithGridRatio) {
  // Under SupNormalized, g^2 is g of the same model with R halved, so both
  // moments come from the grid oracle.
  Rng rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    const auto model = random_scalar(rng);
    const LinearGaussianModel half(model.mu_x(), model.sigma_x(), model.H(), model.Q(), model.A(),
                                   model.B(), MatrixXd(model.R() / 2.0));
    const VectorXd y = vec({rng.uniform() * 2.0 - 1.0});
    const double m1 = grid_posterior_oracle(model, y, default_grid_spec(model)).marginal_likelihood;
    const double m2 = grid_posterior_oracle(half, y, default_grid_spec(half)).marginal_likelihood;
    EXPECT_NEAR(m2 / (m1 * m1) / lg_link_norm_sq(model, y), 1.0, 1e-7) << trial;
  }
}

TEST(LinkNorm, MonteCarloRatio) {
  const auto model = s1();
  Rng rng(48);
  const auto pool = sample_joint(model, rng, 1000000);
  VectorXd logg(pool.x.cols());
  for (Index i = 0; i < pool.x.cols(); ++i) logg(i) = lg_log_g(model, vec({0.0}), pool.x.col(i), pool.z.col(i));
  const double m1 = logg.array().exp().mean();
  const double m2 = (2.0 * logg.array()).exp().mean();
  EXPECT_NEAR(m2 / (m1 * m1) / 1.341640786499873818, 1.0, 0.01);
}

TEST(K2, FrozenS1Values) {
  const auto k = lg_K2(s1());
  EXPECT_NEAR(k.k2_exact, 0.0179587122125166562, 1e-16);
  EXPECT_NEAR(k.k2_uniform_bound, 0.0897935610625832808, 1e-16);
  EXPECT_NEAR(k.link_moment, 3.0, 1e-14);
}

TEST(K2, UniformBoundDominatesOnRandomModels) {
  Rng rng(49);
  for (int trial = 0; trial < 200; ++trial) {
    const Index d_z = 1 + static_cast<Index>(rng() % 64);
    const auto model = random_model(rng, 1 + trial % 2, d_z, 1 + trial % 3);
    const auto k = lg_K2(model);
    EXPECT_LE(k.k2_exact, k.k2_uniform_bound) << trial;
  }
}

TEST(K2, UniformBoundBitConstantOnBoundedSpectra) {
  FamilySpec spec;
  spec.d_y = 2;
  spec.r = 0.6;
  const double first = lg_K2(make_lg_family(spec, 1)).k2_uniform_bound;
  for (Index d_z : {2, 4, 8, 16, 32, 64}) EXPECT_EQ(lg_K2(make_lg_family(spec, d_z)).k2_uniform_bound, first);
}

TEST(K2, ExactGrowsAsS2Shrinks) {
  // S_2 = Sigma_y - R/2 = T^2 + B^2 q + R/2 here; shrinking q shrinks |S_2|
  double previous = 0.0;
  for (double q : {2.0, 1.0, 0.5, 0.1}) {
    FamilySpec spec = s1_family();
    spec.q = q;
    const double k = lg_K2(make_lg_family(spec, 1)).k2_exact;
    EXPECT_GT(k, previous);
    previous = k;
  }
}

TEST(K2, LinkMomentMatchesQuadrature) {
  FamilySpec spec = s1_family();
  spec.b = 0.5;
  spec.r = 2.0;
  const auto model = make_lg_family(spec, 1);
  EXPECT_NEAR(lg_link_moment_quadrature(model), lg_K2(model).link_moment, 1e-8);
  EXPECT_NEAR(lg_link_moment_quadrature(s1()), 3.0, 1e-8);
}

}  // namespace
}  // namespace nis
