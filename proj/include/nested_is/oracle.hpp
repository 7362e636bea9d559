#ifndef NESTED_IS_ORACLE_HPP
#define NESTED_IS_ORACLE_HPP

#include <vector>

#include <Eigen/Core>

#include "nested_is/linalg.hpp"
#include "nested_is/models.hpp"
#include "nested_is/test_functions.hpp"

namespace nis {

/// Law of Y = T X + D in the linear-Gaussian model, D ~ N(0, B Q B' + R).
struct ObsMoments {
  MatrixXd T;
  VectorXd mu_y;
  MatrixXd sigma_y;
  MatrixXd s2;         ///< Sigma_y - R / 2
  MatrixXd noise_cov;  ///< B Q B' + R
  SpdFactor<double> sigma_y_factor;
  SpdFactor<double> s2_factor;
  SpdFactor<double> noise_factor;
};

ObsMoments lg_obs_moments(const LinearGaussianModel& model);

/// pi_0(l_y) = m(g_y) in the model's likelihood convention: the
/// marginal-likelihood ratio under SupNormalized, the density of Y under Density.
double lg_marginal_likelihood(const LinearGaussianModel& model, const Eigen::Ref<const VectorXd>& y);
double lg_log_marginal_likelihood(const LinearGaussianModel& model,
                                  const Eigen::Ref<const VectorXd>& y);

struct GaussianLaw {
  VectorXd mean;
  MatrixXd cov;
};

/// Exact posterior of X given Y = y (precision form).
GaussianLaw lg_posterior_exact(const LinearGaussianModel& model, const Eigen::Ref<const VectorXd>& y);

/// |l_y|^2 in L2(m) = m(g_y^2) / m(g_y)^2. Independent of the likelihood convention.
double lg_link_norm_sq(const LinearGaussianModel& model, const Eigen::Ref<const VectorXd>& y);

struct K2Constants {
  /// 1 / (sqrt2 (2pi)^{3d_y/2} |R|^{1/2} |S_2|), the closed form printed for K_2.
  double k2_exact;
  /// 2^{d_y - 1/2} / ((2pi)^{d_y} |R|)^{3/2}, its d_z-free upper bound.
  double k2_uniform_bound;
  /// E |l_Y|^2 = |Sigma_y| / |R|, the actual second moment of the link norm.
  double link_moment;
};

K2Constants lg_K2(const LinearGaussianModel& model);

/// Integral of lg_link_norm_sq(model, y) against the law of Y, by adaptive
/// Gauss-Kronrod quadrature. d_y = 1 only.
double lg_link_moment_quadrature(const LinearGaussianModel& model);

/// E f(X) for X ~ N(mean, cov), by closed form or 1-D quadrature.
double gaussian_expectation(const TestFunction& f, const Eigen::Ref<const VectorXd>& mean,
                            const Eigen::Ref<const MatrixXd>& cov);

struct GridAxis {
  double lo;
  double hi;
};

/// Tensor-product trapezoid grid over (x, z). `points` per axis.
struct GridSpec {
  std::vector<GridAxis> x_axes;
  std::vector<GridAxis> z_axes;
  Index points = 201;
  /// Maximum allowed change between the `points` grid and the halved-step grid.
  double tolerance = 1e-9;
};

/// Prior-centred box of +/- `half_width` standard deviations on every axis.
GridSpec default_grid_spec(const GaussianLatentModel& model, double half_width = 10.0);

struct GridPosterior {
  double marginal_likelihood;  ///< m(g_y) in the model's likelihood scale
  VectorXd mean;
  MatrixXd cov;
  std::vector<double> expectations;  ///< posterior mean of each requested test function
};

/// Brute-force posterior by quadrature of g_y(x, z) kappa(x, z) pi_0(x).
/// Requires d_x <= 2 and d_z <= 2. The result on the halved-step grid is
/// returned; GridTooCoarse if it moved by more than spec.tolerance.
GridPosterior grid_posterior_oracle(const GenerativeModel& model,
                                    const Eigen::Ref<const VectorXd>& y, const GridSpec& spec,
                                    const std::vector<TestFunction>& functions = {});

}  // namespace nis

#endif  // NESTED_IS_ORACLE_HPP
