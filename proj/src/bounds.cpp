#include "nested_is/bounds.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nested_is/oracle.hpp"

namespace nis {

namespace {

constexpr double kEnvelopeTolerance = 1e-8;

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

double determinant_base(const SpectralDigest& d) {
  const double signal = d.sigma1_A + d.sigma1_B * d.sigma1_H;
  return signal * signal * d.lambda1_sigma_x + d.sigma1_B * d.sigma1_B * d.lambda1_Q + d.lambda1_R;
}

void require_radius(double r) {
  if (!std::isfinite(r) || !(r > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "ball radius r must be positive, got " + std::to_string(r));
  }
}

double quad_exponent(const SpectralDigest& d, double r) {
  const double dy = static_cast<double>(d.d_y);
  return 0.5 * dy * dy * dy * r * r / d.lambda_min_R;
}

}  // namespace

SpectralDigest spectral_digest(const LinearGaussianModel& model, double r) {
  SpectralDigest d;
  d.sigma1_A = max_singular_value(model.A());
  d.sigma1_B = max_singular_value(model.B());
  d.sigma1_H = max_singular_value(model.H());
  d.lambda1_sigma_x = max_eigval(model.sigma_x());
  d.lambda1_Q = max_eigval(model.Q());
  const VectorXd r_eig = sym_eigvals(model.R());
  d.lambda1_R = r_eig(0);
  d.lambda_min_R = r_eig(r_eig.size() - 1);
  d.d_x = model.dims().x;
  d.d_z = model.dims().z;
  d.d_y = model.dims().y;
  d.r = r;
  d.mu_y = (model.A() + model.B() * model.H()) * model.mu_x();
  return d;
}

BoundCertificate det_sigma_y_bound(const LinearGaussianModel& model) {
  BoundCertificate c;
  c.name = "det_sigma_y";
  c.digest = spectral_digest(model);
  c.value = std::pow(determinant_base(c.digest), static_cast<double>(c.digest.d_y));
  c.hypotheses_hold = true;
  return c;
}

BoundCertificate quad_form_bound(const LinearGaussianModel& model, double r) {
  require_radius(r);
  BoundCertificate c;
  c.name = "quad_form";
  c.digest = spectral_digest(model, r);
  c.value = quad_exponent(c.digest, r);
  c.hypotheses_hold = true;
  return c;
}

BoundCertificate inv_marginal_bound(const LinearGaussianModel& model, double r) {
  require_radius(r);
  BoundCertificate c;
  c.name = "inv_marginal";
  c.digest = spectral_digest(model, r);
  const double log_d = static_cast<double>(c.digest.d_y) * std::log(determinant_base(c.digest));
  c.value = std::exp(0.5 * (log_d - model.R_factor().log_det()) + quad_exponent(c.digest, r));
  c.hypotheses_hold = true;
  c.note = "sqrt(D/|R|) * exp(quadratic-form bound)";
  return c;
}

BoundCertificate inv_marginal_bound_as_displayed(const LinearGaussianModel& model, double r) {
  require_radius(r);
  BoundCertificate c;
  c.name = "inv_marginal_as_displayed";
  c.digest = spectral_digest(model, r);
  const double log_d = static_cast<double>(c.digest.d_y) * std::log(determinant_base(c.digest));
  c.value = std::exp(log_d + quad_exponent(c.digest, r));
  c.hypotheses_hold = log_d + model.R_factor().log_det() >= 0.0;
  c.note = "D * exp(quadratic-form bound); implied by inv_marginal when D|R| >= 1";
  return c;
}

BoundCertificate error_constant_bound(const LinearGaussianModel& model,
                                      const Eigen::Ref<const VectorXd>& y) {
  BoundCertificate c;
  c.name = "error_constant";
  c.digest = spectral_digest(model);
  const LinearGaussianModel sup = model.with_convention(LikelihoodConvention::SupNormalized);
  c.value = std::exp(-lg_log_marginal_likelihood(sup, y));
  c.hypotheses_hold = true;
  c.note = "up to a universal p-dependent factor";
  return c;
}

PolyConditionFit poly_condition_fit(const FamilySpec& spec, const std::vector<Index>& d_z_list) {
  if (d_z_list.size() < 4) {
    throw Error(ErrorKind::InvalidSpec, "poly_condition_fit needs at least 4 d_z values");
  }
  for (std::size_t i = 1; i < d_z_list.size(); ++i) {
    if (d_z_list[i] <= d_z_list[i - 1]) {
      throw Error(ErrorKind::InvalidSpec, "d_z list must be strictly increasing");
    }
  }
  PolyConditionFit fit;
  std::vector<double> log_dz;
  std::vector<double> log_g;
  const double dy = static_cast<double>(spec.d_y);
  for (Index dz : d_z_list) {
    const LinearGaussianModel m = make_lg_family(spec, dz);
    const double g = std::max({std::pow(max_singular_value(m.B()), 2.0 * dy),
                               std::pow(max_singular_value(m.H()), 2.0 * dy),
                               std::pow(max_eigval(m.Q()), dy)});
    fit.growth.push_back(g);
    log_dz.push_back(std::log(static_cast<double>(dz)));
    log_g.push_back(std::log(g));
  }
  fit.degree_estimate = ols_slope(log_dz, log_g);
  const auto [lo, hi] = std::minmax_element(fit.growth.begin(), fit.growth.end());
  fit.premise_m0 = *hi / *lo <= 1.0 + 1e-6;
  return fit;
}

BoundCertificate bounded_obs_K2(const BoundedObsModel& model) {
  BoundCertificate c;
  c.name = "bounded_obs_K2";
  const VectorXd r_eig = sym_eigvals(model.R());
  c.digest.lambda1_R = r_eig(0);
  c.digest.lambda_min_R = r_eig(r_eig.size() - 1);
  c.digest.d_x = model.dims().x;
  c.digest.d_z = model.dims().z;
  c.digest.d_y = model.dims().y;
  c.digest.sigma1_A = max_singular_value(model.A());
  c.digest.sigma1_B = max_singular_value(model.B());
  c.digest.sigma1_H = max_singular_value(model.H());
  c.digest.lambda1_sigma_x = max_eigval(model.sigma_x());
  c.digest.lambda1_Q = max_eigval(model.Q());

  const double dy = static_cast<double>(c.digest.d_y);
  const double f_r = std::sqrt(c.digest.lambda1_R) * model.bound();
  const double power = c.digest.d_y == 1 ? 1.0 : std::pow(3.0 * f_r, dy - 1.0);  // 0^0 := 1
  const double bracket = std::pow(2.0, 0.5 * dy - 1.0) +
                         std::pow(2.0, 1.0 - 0.5 * dy) * std::sqrt(std::numbers::pi) * power /
                             std::tgamma(0.5 * dy);
  c.value = std::exp(2.75 * f_r * f_r - 1.5 * model.R_factor().log_det()) * bracket;
  c.hypotheses_hold = true;
  c.note = "F_R = " + std::to_string(f_r);
  return c;
}

EnvelopeIntegral heavy_tail_envelope_integral(const HeavyTailModel& model) {
  const double f = model.bound();
  const double t0 = std::exp(student_t_logpdf(0.0, model.dof()));
  EnvelopeIntegral out;
  out.closed_form = 1.0 + 2.0 * f * t0;

  auto k = [&model](double y) { return model.envelope_k(y); };
  double inner = 0.0;
  if (f > 0.0) {
    inner = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(k, -f, f, 15, 1e-14);
  }
  boost::math::quadrature::exp_sinh<double> tail;
  const double upper = tail.integrate(k, f, std::numeric_limits<double>::infinity(), 1e-14);
  out.quadrature = inner + 2.0 * upper;
  return out;
}

BoundCertificate heavy_tail_K2_bound(const HeavyTailModel& model) {
  const EnvelopeIntegral k = heavy_tail_envelope_integral(model);
  if (!(std::abs(k.closed_form - k.quadrature) <= kEnvelopeTolerance)) {
    throw Error(ErrorKind::IntegrationFailure,
                "envelope integral: closed form " + std::to_string(k.closed_form) +
                    " vs quadrature " + std::to_string(k.quadrature));
  }
  BoundCertificate c;
  c.name = "heavy_tail_K2";
  c.digest.d_x = model.dims().x;
  c.digest.d_z = model.dims().z;
  c.digest.d_y = 1;
  c.value = model.envelope_h() * k.closed_form;
  c.hypotheses_hold = true;
  c.note = "H = 1, K = 1 + 2 F t_nu(0)";
  return c;
}

}  // namespace nis
