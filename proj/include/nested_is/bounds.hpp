#ifndef NESTED_IS_BOUNDS_HPP
#define NESTED_IS_BOUNDS_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "nested_is/linalg.hpp"
#include "nested_is/models.hpp"

namespace nis {

/// Spectral summary of the model a certificate was evaluated on. Entries that
/// do not apply to a model are NaN.
struct SpectralDigest {
  double sigma1_A = std::numeric_limits<double>::quiet_NaN();
  double sigma1_B = std::numeric_limits<double>::quiet_NaN();
  double sigma1_H = std::numeric_limits<double>::quiet_NaN();
  double lambda1_sigma_x = std::numeric_limits<double>::quiet_NaN();
  double lambda1_Q = std::numeric_limits<double>::quiet_NaN();
  double lambda1_R = std::numeric_limits<double>::quiet_NaN();
  double lambda_min_R = std::numeric_limits<double>::quiet_NaN();
  Index d_x = 0;
  Index d_z = 0;
  Index d_y = 0;
  double r = std::numeric_limits<double>::quiet_NaN();
  VectorXd mu_y;  ///< centre of the observation ball
};

struct BoundCertificate {
  std::string name;
  double value = 0.0;
  bool hypotheses_hold = false;
  SpectralDigest digest;
  std::string note;
};

SpectralDigest spectral_digest(const LinearGaussianModel& model, double r = std::numeric_limits<double>::quiet_NaN());

/// |Sigma_y| <= [(s1(A) + s1(B) s1(H))^2 l1(Sigma_x) + s1(B)^2 l1(Q) + l1(R)]^{d_y}.
BoundCertificate det_sigma_y_bound(const LinearGaussianModel& model);

/// (y - mu_y)' Sigma_y^{-1} (y - mu_y) / 2 <= d_y^3 r^2 / (2 lmin(R)) on B_r(mu_y).
BoundCertificate quad_form_bound(const LinearGaussianModel& model, double r);

/// Upper bound on 1 / pi_0(l_y) over B_r(mu_y), SupNormalized likelihood:
/// sqrt(D / |R|) exp(d_y^3 r^2 / (2 lmin(R))) with D the determinant bound.
/// This is the determinant bound and the quadratic-form bound substituted
/// into the closed-form marginal likelihood, so it holds for every model.
BoundCertificate inv_marginal_bound(const LinearGaussianModel& model, double r);

/// D exp(d_y^3 r^2 / (2 lmin(R))), the determinant factor without the square
/// root and without |R|. It dominates inv_marginal_bound whenever D |R| >= 1,
/// which is what hypotheses_hold reports; below that it can fail.
BoundCertificate inv_marginal_bound_as_displayed(const LinearGaussianModel& model, double r);

/// |g_y|_inf / pi_0(l_y): the error constant of the nested sampler at a fixed
/// y, with the p-dependent Marcinkiewicz-Zygmund factor set to 1.
BoundCertificate error_constant_bound(const LinearGaussianModel& model,
                                      const Eigen::Ref<const VectorXd>& y);

struct PolyConditionFit {
  double degree_estimate = 0.0;
  bool premise_m0 = false;
  std::vector<double> growth;  ///< G(d_z) per list entry
};

/// G(d_z) = max{s1(B)^{2 d_y}, s1(H)^{2 d_y}, l1(Q)^{d_y}} along the family and
/// the least-squares slope of log G against log d_z.
PolyConditionFit poly_condition_fit(const FamilySpec& spec, const std::vector<Index>& d_z_list);

/// Bound on E |l_Y|^2 for the bounded-observation model, with F_R = sqrt(l1(R)) F:
/// exp(11 F_R^2 / 4) / |R|^{3/2} [2^{d_y/2 - 1} + 2^{1 - d_y/2} sqrt(pi) (3 F_R)^{d_y - 1} / Gamma(d_y/2)].
BoundCertificate bounded_obs_K2(const BoundedObsModel& model);

struct EnvelopeIntegral {
  double closed_form;  ///< 1 + 2 F t_nu(0)
  double quadrature;
};

/// Integral of the heavy-tail envelope k over the real line.
EnvelopeIntegral heavy_tail_envelope_integral(const HeavyTailModel& model);

/// H K with H = sup h = 1 and K the envelope integral. IntegrationFailure if
/// closed form and quadrature differ by more than 1e-8.
BoundCertificate heavy_tail_K2_bound(const HeavyTailModel& model);

}  // namespace nis

#endif  // NESTED_IS_BOUNDS_HPP
