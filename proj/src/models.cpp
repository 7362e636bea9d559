#include "nested_is/models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace nis {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void require_positive_finite(double value, const char* name) {
  if (!std::isfinite(value) || !(value > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, std::string(name) + " must be positive and finite, got " +
                                            std::to_string(value));
  }
}

// Marsaglia-Tsang gamma(shape, 1) sampler; shape < 1 via the u^{1/shape} boost.
double sample_gamma(Rng& rng, double shape) {
  if (shape < 1.0) {
    const double boost = std::pow(rng.uniform(), 1.0 / shape);
    return sample_gamma(rng, shape + 1.0) * boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace

double GenerativeModel::log_likelihood(const Eigen::Ref<const VectorXd>& y,
                                       const Eigen::Ref<const VectorXd>& x,
                                       const Eigen::Ref<const VectorXd>& z) const {
  VectorXd out(1);
  log_likelihood(y, x, MatrixXd(z), out);
  return out(0);
}

MatrixXd sample_prior(const GenerativeModel& model, Rng& rng, Index count) {
  if (count < 1) throw Error(ErrorKind::InvalidSpec, "sample_prior: count must be >= 1");
  MatrixXd xs(model.dims().x, count);
  for (Index i = 0; i < count; ++i) model.sample_prior(rng, xs.col(i));
  return xs;
}

MatrixXd sample_kernel(const GenerativeModel& model, Rng& rng, const VectorXd& x, Index count) {
  if (count < 1) throw Error(ErrorKind::InvalidSpec, "sample_kernel: count must be >= 1");
  MatrixXd zs(model.dims().z, count);
  model.sample_kernel(rng, x, zs);
  return zs;
}

JointSample sample_joint(const GenerativeModel& model, Rng& rng, Index count) {
  if (count < 1) throw Error(ErrorKind::InvalidSpec, "sample_joint: count must be >= 1");
  const ModelDims d = model.dims();
  JointSample out{MatrixXd(d.x, count), MatrixXd(d.z, count), MatrixXd(d.y, count)};
  for (Index i = 0; i < count; ++i) {
    model.sample_prior(rng, out.x.col(i));
    model.sample_kernel(rng, out.x.col(i), out.z.col(i));
    model.sample_observation(rng, out.x.col(i), out.z.col(i), out.y.col(i));
  }
  return out;
}

// ---------------------------------------------------------------------------

GaussianLatentModel::GaussianLatentModel(VectorXd mu_x, MatrixXd sigma_x, MatrixXd H, MatrixXd Q)
    : mu_x_(std::move(mu_x)), sigma_x_(std::move(sigma_x)), H_(std::move(H)), Q_(std::move(Q)) {
  const Index dx = mu_x_.size();
  if (dx < 1) throw Error(ErrorKind::DimensionMismatch, "mu_x must be non-empty");
  require_dims(sigma_x_, dx, dx, "Sigma_x");
  if (H_.rows() < 1) throw Error(ErrorKind::DimensionMismatch, "H must have at least one row");
  require_dims(H_, H_.rows(), dx, "H");
  require_dims(Q_, H_.rows(), H_.rows(), "Q");
  sigma_x_factor_ = chol_spd(sigma_x_);
  Q_factor_ = chol_spd(Q_);
}

void GaussianLatentModel::sample_prior(Rng& rng, Eigen::Ref<VectorXd> x) const {
  VectorXd eps(dim_x());
  fill_standard_normal(rng, eps);
  x = mu_x_ + sigma_x_factor_.apply(eps);
}

void GaussianLatentModel::sample_kernel(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                                        Eigen::Ref<MatrixXd> z) const {
  require_dims(z, dim_z(), z.cols(), "kernel output");
  fill_standard_normal(rng, z);
  const VectorXd hx = H_ * x;
  if (Q_factor_.is_diagonal()) {
    z = Q_factor_.lower_factor().diagonal().asDiagonal() * z;
  } else {
    z = Q_factor_.lower_factor().triangularView<Eigen::Lower>() * z;
  }
  z.colwise() += hx;
}

double GaussianLatentModel::log_prior_density(const Eigen::Ref<const VectorXd>& x) const {
  return mvn_logpdf(x, mu_x_, sigma_x_factor_);
}

double GaussianLatentModel::log_kernel_density(const Eigen::Ref<const VectorXd>& x,
                                               const Eigen::Ref<const VectorXd>& z) const {
  return mvn_logpdf(z, VectorXd(H_ * x), Q_factor_);
}

// ---------------------------------------------------------------------------

LinearGaussianModel::LinearGaussianModel(VectorXd mu_x, MatrixXd sigma_x, MatrixXd H, MatrixXd Q,
                                         MatrixXd A, MatrixXd B, MatrixXd R,
                                         LikelihoodConvention convention)
    : GaussianLatentModel(std::move(mu_x), std::move(sigma_x), std::move(H), std::move(Q)),
      A_(std::move(A)),
      B_(std::move(B)),
      R_(std::move(R)),
      convention_(convention) {
  const Index dy = A_.rows();
  if (dy < 1) throw Error(ErrorKind::DimensionMismatch, "A must have at least one row");
  require_dims(A_, dy, dim_x(), "A");
  require_dims(B_, dy, dim_z(), "B");
  require_dims(R_, dy, dy, "R");
  R_factor_ = chol_spd(R_);
}

LinearGaussianModel LinearGaussianModel::with_convention(LikelihoodConvention convention) const {
  return LinearGaussianModel(mu_x(), sigma_x(), H(), Q(), A_, B_, R_, convention);
}

double LinearGaussianModel::log_g_offset() const noexcept {
  if (convention_ == LikelihoodConvention::SupNormalized) return 0.0;
  return -0.5 * (static_cast<double>(A_.rows()) * kLogTwoPi + R_factor_.log_det());
}

void LinearGaussianModel::log_likelihood(const Eigen::Ref<const VectorXd>& y,
                                         const Eigen::Ref<const VectorXd>& x,
                                         const Eigen::Ref<const MatrixXd>& z,
                                         Eigen::Ref<VectorXd> out) const {
  const Index dy = A_.rows();
  if (y.size() != dy || x.size() != dim_x() || z.rows() != dim_z() || out.size() != z.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "lg log-likelihood: inconsistent argument sizes");
  }
  MatrixXd residual = -(B_ * z);
  residual.colwise() += y - A_ * x;
  if (R_factor_.is_diagonal()) {
    residual = R_factor_.lower_factor().diagonal().cwiseInverse().asDiagonal() * residual;
  } else {
    R_factor_.lower_factor().triangularView<Eigen::Lower>().solveInPlace(residual);
  }
  out = (-0.5 * residual.colwise().squaredNorm().transpose()).array() + log_g_offset();
}

void LinearGaussianModel::sample_observation(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                                             const Eigen::Ref<const VectorXd>& z,
                                             Eigen::Ref<VectorXd> y) const {
  VectorXd eps(A_.rows());
  fill_standard_normal(rng, eps);
  y = A_ * x + B_ * z + R_factor_.apply(eps);
}

double lg_log_g(const LinearGaussianModel& model, const Eigen::Ref<const VectorXd>& y,
                const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& z) {
  return model.log_likelihood(y, x, z);
}

JointSample lg_sample_joint(const LinearGaussianModel& model, Rng& rng, Index count) {
  return sample_joint(model, rng, count);
}

// ---------------------------------------------------------------------------

VectorXd radial_squash(const Eigen::Ref<const VectorXd>& s, double bound) {
  const double norm = s.norm();
  if (norm <= bound) return s;
  return (bound / norm) * s;
}

BoundedObsModel::BoundedObsModel(const LinearGaussianModel& base, double bound)
    : GaussianLatentModel(base.mu_x(), base.sigma_x(), base.H(), base.Q()),
      A_(base.A()),
      B_(base.B()),
      R_(base.R()),
      R_factor_(base.R_factor()),
      bound_(bound) {
  if (!std::isfinite(bound) || bound < 0.0) {
    throw Error(ErrorKind::InvalidSpec, "bounded observation model needs F >= 0");
  }
}

VectorXd BoundedObsModel::observation_function(const Eigen::Ref<const VectorXd>& x,
                                               const Eigen::Ref<const VectorXd>& z) const {
  return radial_squash(A_ * x + B_ * z, bound_);
}

void BoundedObsModel::log_likelihood(const Eigen::Ref<const VectorXd>& y,
                                     const Eigen::Ref<const VectorXd>& x,
                                     const Eigen::Ref<const MatrixXd>& z,
                                     Eigen::Ref<VectorXd> out) const {
  if (y.size() != A_.rows() || x.size() != dim_x() || z.rows() != dim_z() ||
      out.size() != z.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "bounded-obs log-likelihood: inconsistent sizes");
  }
  const VectorXd ax = A_ * x;
  for (Index j = 0; j < z.cols(); ++j) {
    const VectorXd f = radial_squash(ax + B_ * z.col(j), bound_);
    out(j) = mvn_logpdf(y, f, R_factor_);
  }
}

void BoundedObsModel::sample_observation(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                                         const Eigen::Ref<const VectorXd>& z,
                                         Eigen::Ref<VectorXd> y) const {
  VectorXd eps(A_.rows());
  fill_standard_normal(rng, eps);
  y = observation_function(x, z) + R_factor_.apply(eps);
}

double bounded_obs_log_g(const BoundedObsModel& model, const Eigen::Ref<const VectorXd>& y,
                         const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& z) {
  return model.log_likelihood(y, x, z);
}

// ---------------------------------------------------------------------------

double student_t_logpdf(double u, double dof) {
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi) - 0.5 * (dof + 1.0) * std::log1p(u * u / dof);
}

HeavyTailModel::HeavyTailModel(const LinearGaussianModel& base, double bound, double dof)
    : GaussianLatentModel(base.mu_x(), base.sigma_x(), base.H(), base.Q()),
      bound_(bound),
      dof_(dof) {
  if (base.A().rows() != 1) {
    throw Error(ErrorKind::UnsupportedDims, "heavy-tail model is scalar; got d_y = " +
                                                std::to_string(base.A().rows()));
  }
  if (!std::isfinite(bound) || bound < 0.0) {
    throw Error(ErrorKind::InvalidSpec, "heavy-tail model needs F >= 0");
  }
  if (!std::isfinite(dof) || !(dof > 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "heavy-tail model needs dof > 1");
  }
  a_ = base.A().row(0);
  b_ = base.B().row(0);
}

double HeavyTailModel::location(const Eigen::Ref<const VectorXd>& x,
                                const Eigen::Ref<const VectorXd>& z) const {
  const double s = a_.dot(x) + b_.dot(z);
  return std::clamp(s, -bound_, bound_);
}

double HeavyTailModel::envelope_k(double y) const {
  return std::exp(student_t_logpdf(std::max(0.0, std::abs(y) - bound_), dof_));
}

void HeavyTailModel::log_likelihood(const Eigen::Ref<const VectorXd>& y,
                                    const Eigen::Ref<const VectorXd>& x,
                                    const Eigen::Ref<const MatrixXd>& z,
                                    Eigen::Ref<VectorXd> out) const {
  if (y.size() != 1 || x.size() != dim_x() || z.rows() != dim_z() || out.size() != z.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "heavy-tail log-likelihood: inconsistent sizes");
  }
  const double ax = a_.dot(x);
  for (Index j = 0; j < z.cols(); ++j) {
    const double f = std::clamp(ax + b_.dot(z.col(j)), -bound_, bound_);
    out(j) = student_t_logpdf(y(0) - f, dof_);
  }
}

void HeavyTailModel::sample_observation(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                                        const Eigen::Ref<const VectorXd>& z,
                                        Eigen::Ref<VectorXd> y) const {
  const double normal = rng.normal();
  const double chi2 = 2.0 * sample_gamma(rng, 0.5 * dof_);
  y(0) = location(x, z) + normal / std::sqrt(chi2 / dof_);
}

double heavy_tail_log_g(const HeavyTailModel& model, const Eigen::Ref<const VectorXd>& y,
                        const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& z) {
  if (y.size() != 1) {
    throw Error(ErrorKind::UnsupportedDims, "heavy-tail likelihood is defined for d_y = 1");
  }
  return model.log_likelihood(y, x, z);
}

// ---------------------------------------------------------------------------

FlatLikelihoodModel::FlatLikelihoodModel(const LinearGaussianModel& base)
    : GaussianLatentModel(base.mu_x(), base.sigma_x(), base.H(), base.Q()), dim_y_(base.A().rows()) {}

void FlatLikelihoodModel::log_likelihood(const Eigen::Ref<const VectorXd>& y,
                                         const Eigen::Ref<const VectorXd>& x,
                                         const Eigen::Ref<const MatrixXd>& z,
                                         Eigen::Ref<VectorXd> out) const {
  if (y.size() != dim_y_ || x.size() != dim_x() || z.rows() != dim_z() || out.size() != z.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "flat log-likelihood: inconsistent sizes");
  }
  out.setZero();
}

void FlatLikelihoodModel::sample_observation(Rng&, const Eigen::Ref<const VectorXd>&,
                                             const Eigen::Ref<const VectorXd>&,
                                             Eigen::Ref<VectorXd>) const {
  throw Error(ErrorKind::InvalidSpec, "flat likelihood has no observation law");
}

// ---------------------------------------------------------------------------

FamilySpec s1_family() {
  FamilySpec spec;
  spec.kind = SpectraKind::BoundedSpectra;
  spec.d_x = 1;
  spec.d_y = 1;
  spec.a = 0.0;
  spec.b = spec.h = spec.q = spec.r = spec.sigma_x = 1.0;
  spec.mu_x = 0.0;
  return spec;
}

LinearGaussianModel make_lg_family(const FamilySpec& spec, Index d_z) {
  if (d_z < 1) throw Error(ErrorKind::InvalidSpec, "d_z must be >= 1");
  if (spec.d_x < 1 || spec.d_y < 1) throw Error(ErrorKind::InvalidSpec, "d_x, d_y must be >= 1");
  require_positive_finite(spec.q, "q");
  require_positive_finite(spec.r, "r");
  require_positive_finite(spec.sigma_x, "sigma_x");
  for (double v : {spec.a, spec.b, spec.h, spec.mu_x}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidSpec, "family scalars must be finite");
  }

  const double w_entry = spec.kind == SpectraKind::BoundedSpectra
                             ? 1.0 / std::sqrt(static_cast<double>(d_z))
                             : 1.0;
  const VectorXd w = VectorXd::Constant(d_z, w_entry);
  const VectorXd u = VectorXd::Constant(spec.d_y, 1.0 / std::sqrt(static_cast<double>(spec.d_y)));
  const VectorXd e1 = VectorXd::Unit(spec.d_x, 0);

  return LinearGaussianModel(VectorXd::Constant(spec.d_x, spec.mu_x),
                             spec.sigma_x * MatrixXd::Identity(spec.d_x, spec.d_x),
                             spec.h * w * e1.transpose(),
                             spec.q * MatrixXd::Identity(d_z, d_z),
                             spec.a * u * e1.transpose(),
                             spec.b * u * w.transpose(),
                             spec.r * MatrixXd::Identity(spec.d_y, spec.d_y),
                             spec.convention);
}

}  // namespace nis
