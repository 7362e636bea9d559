#include "nested_is/oracle.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace nis {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kQuadTolerance = 1e-13;

template <typename F>
double kronrod(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20,
                                                                        kQuadTolerance);
}

// log m(g_y^2) under SupNormalized: g^2 is g with R replaced by R/2, and the
// matching Sigma_y becomes S_2.
double log_mixture_of_g_squared(const LinearGaussianModel& model, const ObsMoments& mom,
                                const Eigen::Ref<const VectorXd>& y) {
  const double dy = static_cast<double>(mom.mu_y.size());
  const double log_det_half_r = model.R_factor().log_det() - dy * std::numbers::ln2;
  const double q = mom.s2_factor.quad_form(y - mom.mu_y);
  return 0.5 * (log_det_half_r - mom.s2_factor.log_det()) - 0.5 * q;
}

}  // namespace

ObsMoments lg_obs_moments(const LinearGaussianModel& model) {
  ObsMoments m;
  m.T = model.A() + model.B() * model.H();
  m.mu_y = m.T * model.mu_x();
  m.noise_cov = symmetrized(MatrixXd(model.B() * model.Q() * model.B().transpose() + model.R()));
  m.sigma_y = symmetrized(MatrixXd(m.T * model.sigma_x() * m.T.transpose() + m.noise_cov));
  m.s2 = symmetrized(MatrixXd(m.sigma_y - 0.5 * model.R()));
  m.sigma_y_factor = chol_spd(m.sigma_y);
  m.s2_factor = chol_spd(m.s2);
  m.noise_factor = chol_spd(m.noise_cov);
  return m;
}

double lg_log_marginal_likelihood(const LinearGaussianModel& model,
                                  const Eigen::Ref<const VectorXd>& y) {
  const ObsMoments mom = lg_obs_moments(model);
  if (y.size() != mom.mu_y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "marginal likelihood: y has length " +
                                                  std::to_string(y.size()) + ", d_y is " +
                                                  std::to_string(mom.mu_y.size()));
  }
  const double q = mom.sigma_y_factor.quad_form(y - mom.mu_y);
  const double sup = 0.5 * (model.R_factor().log_det() - mom.sigma_y_factor.log_det()) - 0.5 * q;
  return sup + model.log_g_offset();
}

double lg_marginal_likelihood(const LinearGaussianModel& model, const Eigen::Ref<const VectorXd>& y) {
  return std::exp(lg_log_marginal_likelihood(model, y));
}

GaussianLaw lg_posterior_exact(const LinearGaussianModel& model, const Eigen::Ref<const VectorXd>& y) {
  const ObsMoments mom = lg_obs_moments(model);
  if (y.size() != mom.mu_y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "posterior: y has wrong length");
  }
  const MatrixXd ct = mom.noise_factor.solve(mom.T);  // C^{-1} T
  const MatrixXd precision =
      symmetrized(MatrixXd(model.sigma_x_factor().inverse() + mom.T.transpose() * ct));
  const SpdFactor<double> pf = chol_spd(precision);
  GaussianLaw law;
  law.cov = symmetrized(pf.inverse());
  const VectorXd innovation = mom.noise_factor.solve(y - mom.T * model.mu_x());
  law.mean = model.mu_x() + law.cov * (mom.T.transpose() * innovation);
  return law;
}

namespace {

double log_link_norm_sq(const LinearGaussianModel& model, const ObsMoments& mom,
                        const Eigen::Ref<const VectorXd>& y) {
  const double log_m1 = lg_log_marginal_likelihood(model, y);
  const double log_m2 = log_mixture_of_g_squared(model, mom, y) + 2.0 * model.log_g_offset();
  return log_m2 - 2.0 * log_m1;
}

}  // namespace

double lg_link_norm_sq(const LinearGaussianModel& model, const Eigen::Ref<const VectorXd>& y) {
  return std::exp(log_link_norm_sq(model, lg_obs_moments(model), y));
}

K2Constants lg_K2(const LinearGaussianModel& model) {
  const ObsMoments mom = lg_obs_moments(model);
  const double dy = static_cast<double>(mom.mu_y.size());
  const double log_det_r = model.R_factor().log_det();
  K2Constants k;
  k.k2_exact = std::exp(-(0.5 * std::numbers::ln2 + 1.5 * dy * kLogTwoPi + 0.5 * log_det_r +
                          mom.s2_factor.log_det()));
  k.k2_uniform_bound =
      std::exp((dy - 0.5) * std::numbers::ln2 - 1.5 * (dy * kLogTwoPi + log_det_r));
  k.link_moment = std::exp(mom.sigma_y_factor.log_det() - log_det_r);
  return k;
}

double lg_link_moment_quadrature(const LinearGaussianModel& model) {
  const ObsMoments mom = lg_obs_moments(model);
  if (mom.mu_y.size() != 1) {
    throw Error(ErrorKind::UnsupportedDims, "link-moment quadrature is implemented for d_y = 1");
  }
  const double mu = mom.mu_y(0);
  const double sigma_y = mom.sigma_y(0, 0);
  const double s2 = mom.s2(0, 0);
  // The integrand is Gaussian in y with precision 1/S_2 - 1/Sigma_y.
  const double width = 1.0 / std::sqrt(1.0 / s2 - 1.0 / sigma_y);
  VectorXd y(1);
  auto integrand = [&](double t) {
    y(0) = mu + width * t;
    // log domain: far out the norm overflows while the density underflows
    const double log_density =
        -0.5 * (kLogTwoPi + std::log(sigma_y)) - 0.5 * (y(0) - mu) * (y(0) - mu) / sigma_y;
    return std::exp(log_link_norm_sq(model, mom, y) + log_density) * width;
  };
  return kronrod(integrand, -40.0, 40.0);
}

double gaussian_expectation(const TestFunction& f, const Eigen::Ref<const VectorXd>& mean,
                            const Eigen::Ref<const MatrixXd>& cov) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw Error(ErrorKind::DimensionMismatch, "gaussian_expectation: mean/cov sizes differ");
  }
  const VectorXd& v = f.direction();
  switch (f.kind()) {
    case TestFunctionKind::Constant:
      return f.constant();
    case TestFunctionKind::Cos: {
      const double m = v.dot(mean);
      const double s2 = v.dot(cov * v);
      return std::cos(m) * std::exp(-0.5 * s2);
    }
    case TestFunctionKind::Tanh: {
      const double m = v.dot(mean);
      const double s = std::sqrt(std::max(0.0, v.dot(cov * v)));
      if (s == 0.0) return std::tanh(m);
      auto integrand = [&](double t) {
        return std::tanh(m + s * t) * std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
      };
      return kronrod(integrand, -14.0, 14.0);
    }
    case TestFunctionKind::Rational: {
      // 1/(1+u) = int_0^inf exp(-t(1+u)) dt, and E exp(-t|X|^2) is Gaussian.
      const Index d = mean.size();
      auto integrand = [&](double t) {
        const MatrixXd m = MatrixXd::Identity(d, d) + 2.0 * t * cov;
        const SpdFactor<double> fm = chol_spd(symmetrized(m));
        const double quad = mean.dot(fm.solve(mean).col(0));
        return std::exp(-t - 0.5 * fm.log_det() - t * quad);
      };
      boost::math::quadrature::exp_sinh<double> integrator;
      return integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity(),
                                  kQuadTolerance);
    }
  }
  throw Error(ErrorKind::NoOracle, "no Gaussian expectation for " + f.name());
}

GridSpec default_grid_spec(const GaussianLatentModel& model, double half_width) {
  GridSpec spec;
  const VectorXd sd_x = model.sigma_x().diagonal().cwiseSqrt();
  for (Index i = 0; i < sd_x.size(); ++i) {
    spec.x_axes.push_back({model.mu_x()(i) - half_width * sd_x(i),
                           model.mu_x()(i) + half_width * sd_x(i)});
  }
  const VectorXd centre = model.H() * model.mu_x();
  const VectorXd spread = model.H().cwiseAbs() * sd_x + model.Q().diagonal().cwiseSqrt();
  for (Index k = 0; k < centre.size(); ++k) {
    spec.z_axes.push_back({centre(k) - half_width * spread(k), centre(k) + half_width * spread(k)});
  }
  const std::size_t dims = spec.x_axes.size() + spec.z_axes.size();
  spec.points = dims <= 2 ? 201 : dims == 3 ? 81 : 41;
  return spec;
}

namespace {

// All nodes of a tensor trapezoid grid (one per column) and their weights.
void tensor_grid(const std::vector<GridAxis>& axes, Index points, MatrixXd& nodes,
                 VectorXd& weights) {
  const Index d = static_cast<Index>(axes.size());
  Index total = 1;
  for (Index k = 0; k < d; ++k) total *= points;
  nodes.resize(d, total);
  weights.resize(total);
  for (Index c = 0; c < total; ++c) {
    Index rest = c;
    double w = 1.0;
    for (Index k = 0; k < d; ++k) {
      const Index i = rest % points;
      rest /= points;
      const double h = (axes[k].hi - axes[k].lo) / static_cast<double>(points - 1);
      nodes(k, c) = axes[k].lo + h * static_cast<double>(i);
      w *= (i == 0 || i == points - 1) ? 0.5 * h : h;
    }
    weights(c) = w;
  }
}

GridPosterior grid_pass(const GenerativeModel& model, const Eigen::Ref<const VectorXd>& y,
                        const GridSpec& spec, Index points,
                        const std::vector<TestFunction>& functions) {
  MatrixXd xs;
  MatrixXd zs;
  VectorXd wx;
  VectorXd wz;
  tensor_grid(spec.x_axes, points, xs, wx);
  tensor_grid(spec.z_axes, points, zs, wz);

  // log of integrand weight over z nodes for each x node.
  MatrixXd log_terms(zs.cols(), xs.cols());
  VectorXd log_g(zs.cols());
  for (Index i = 0; i < xs.cols(); ++i) {
    model.log_likelihood(y, xs.col(i), zs, log_g);
    const double lp = model.log_prior_density(xs.col(i)) + std::log(wx(i));
    for (Index j = 0; j < zs.cols(); ++j) {
      log_terms(j, i) = log_g(j) + model.log_kernel_density(xs.col(i), zs.col(j)) +
                        std::log(wz(j)) + lp;
    }
  }
  const double peak = log_terms.maxCoeff();
  if (!std::isfinite(peak)) throw Error(ErrorKind::IntegrationFailure, "grid integrand vanishes");
  const VectorXd mass_x = (log_terms.array() - peak).exp().colwise().sum().transpose();
  const double total = mass_x.sum();

  GridPosterior out;
  out.marginal_likelihood = std::exp(peak) * total;
  const VectorXd w = mass_x / total;
  out.mean = xs * w;
  const MatrixXd centred = xs.colwise() - out.mean;
  out.cov = centred * w.asDiagonal() * centred.transpose();
  for (const auto& f : functions) {
    double s = 0.0;
    for (Index i = 0; i < xs.cols(); ++i) s += w(i) * f(xs.col(i));
    out.expectations.push_back(s);
  }
  return out;
}

double scaled_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

GridPosterior grid_posterior_oracle(const GenerativeModel& model,
                                    const Eigen::Ref<const VectorXd>& y, const GridSpec& spec,
                                    const std::vector<TestFunction>& functions) {
  const ModelDims d = model.dims();
  if (d.x > 2 || d.z > 2) {
    throw Error(ErrorKind::UnsupportedDims, "grid oracle needs d_x <= 2 and d_z <= 2, got d_x = " +
                                                std::to_string(d.x) + ", d_z = " +
                                                std::to_string(d.z));
  }
  if (static_cast<Index>(spec.x_axes.size()) != d.x ||
      static_cast<Index>(spec.z_axes.size()) != d.z) {
    throw Error(ErrorKind::DimensionMismatch, "grid spec axes do not match model dimensions");
  }
  if (spec.points < 3) throw Error(ErrorKind::GridTooCoarse, "grid needs at least 3 points per axis");

  const GridPosterior coarse = grid_pass(model, y, spec, spec.points, functions);
  const GridPosterior fine = grid_pass(model, y, spec, 2 * spec.points - 1, functions);

  double gap = std::abs(fine.marginal_likelihood - coarse.marginal_likelihood) /
               fine.marginal_likelihood;
  for (Index i = 0; i < fine.mean.size(); ++i) gap = std::max(gap, scaled_gap(coarse.mean(i), fine.mean(i)));
  for (Index i = 0; i < fine.cov.size(); ++i) {
    gap = std::max(gap, scaled_gap(coarse.cov.data()[i], fine.cov.data()[i]));
  }
  for (std::size_t k = 0; k < functions.size(); ++k) {
    gap = std::max(gap, scaled_gap(coarse.expectations[k], fine.expectations[k]));
  }
  if (!(gap <= spec.tolerance)) {
    throw Error(ErrorKind::GridTooCoarse, "step-halving changed the result by " +
                                              std::to_string(gap) + " > " +
                                              std::to_string(spec.tolerance));
  }
  return fine;
}

}  // namespace nis
