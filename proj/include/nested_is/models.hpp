#ifndef NESTED_IS_MODELS_HPP
#define NESTED_IS_MODELS_HPP

#include <Eigen/Core>

#include "nested_is/linalg.hpp"
#include "nested_is/random.hpp"

namespace nis {

/// How the Gaussian likelihood is scaled. SupNormalized has sup g_y = 1;
/// Density is the conditional density of y given (x, z).
enum class LikelihoodConvention { SupNormalized, Density };

struct ModelDims {
  Index x = 1;
  Index z = 1;
  Index y = 1;
};

/// Prior on X, Markov kernel from X to the nuisance variable Z, and a
/// strictly positive likelihood g_y(x, z).
///
/// Batch methods work on one column per nuisance draw. All randomness comes
/// from the caller's Rng, so a model object can be shared between threads.
class GenerativeModel {
 public:
  virtual ~GenerativeModel() = default;

  virtual ModelDims dims() const = 0;

  virtual void sample_prior(Rng& rng, Eigen::Ref<VectorXd> x) const = 0;

  /// Fills every column of `z` with an independent draw from kappa(x, .).
  virtual void sample_kernel(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                             Eigen::Ref<MatrixXd> z) const = 0;

  /// out(j) = log g_y(x, z.col(j)).
  virtual void log_likelihood(const Eigen::Ref<const VectorXd>& y,
                              const Eigen::Ref<const VectorXd>& x,
                              const Eigen::Ref<const MatrixXd>& z,
                              Eigen::Ref<VectorXd> out) const = 0;

  virtual double log_prior_density(const Eigen::Ref<const VectorXd>& x) const = 0;
  virtual double log_kernel_density(const Eigen::Ref<const VectorXd>& x,
                                    const Eigen::Ref<const VectorXd>& z) const = 0;

  /// Draws Y given (x, z) from the observation law whose density is g.
  virtual void sample_observation(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                                  const Eigen::Ref<const VectorXd>& z,
                                  Eigen::Ref<VectorXd> y) const = 0;

  double log_likelihood(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const VectorXd>& x,
                        const Eigen::Ref<const VectorXd>& z) const;
};

MatrixXd sample_prior(const GenerativeModel& model, Rng& rng, Index count);
MatrixXd sample_kernel(const GenerativeModel& model, Rng& rng, const VectorXd& x, Index count);

/// Columns of a joint draw (X, Z, Y).
struct JointSample {
  MatrixXd x;
  MatrixXd z;
  MatrixXd y;
};

JointSample sample_joint(const GenerativeModel& model, Rng& rng, Index count);

/// Gaussian prior N(mu_x, Sigma_x) and kernel Z = H x + U, U ~ N(0, Q),
/// shared by every builtin family.
class GaussianLatentModel : public GenerativeModel {
 public:
  GaussianLatentModel(VectorXd mu_x, MatrixXd sigma_x, MatrixXd H, MatrixXd Q);

  const VectorXd& mu_x() const noexcept { return mu_x_; }
  const MatrixXd& sigma_x() const noexcept { return sigma_x_; }
  const MatrixXd& H() const noexcept { return H_; }
  const MatrixXd& Q() const noexcept { return Q_; }
  const SpdFactor<double>& sigma_x_factor() const noexcept { return sigma_x_factor_; }
  const SpdFactor<double>& Q_factor() const noexcept { return Q_factor_; }

  void sample_prior(Rng& rng, Eigen::Ref<VectorXd> x) const override;
  void sample_kernel(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                     Eigen::Ref<MatrixXd> z) const override;
  double log_prior_density(const Eigen::Ref<const VectorXd>& x) const override;
  double log_kernel_density(const Eigen::Ref<const VectorXd>& x,
                            const Eigen::Ref<const VectorXd>& z) const override;

 protected:
  Index dim_x() const noexcept { return mu_x_.size(); }
  Index dim_z() const noexcept { return H_.rows(); }

 private:
  VectorXd mu_x_;
  MatrixXd sigma_x_;
  MatrixXd H_;
  MatrixXd Q_;
  SpdFactor<double> sigma_x_factor_;
  SpdFactor<double> Q_factor_;
};

/// Y = A X + B Z + V, V ~ N(0, R).
class LinearGaussianModel : public GaussianLatentModel {
 public:
  LinearGaussianModel(VectorXd mu_x, MatrixXd sigma_x, MatrixXd H, MatrixXd Q, MatrixXd A,
                      MatrixXd B, MatrixXd R,
                      LikelihoodConvention convention = LikelihoodConvention::SupNormalized);

  const MatrixXd& A() const noexcept { return A_; }
  const MatrixXd& B() const noexcept { return B_; }
  const MatrixXd& R() const noexcept { return R_; }
  const SpdFactor<double>& R_factor() const noexcept { return R_factor_; }
  LikelihoodConvention convention() const noexcept { return convention_; }

  /// Same matrices, other likelihood scaling.
  LinearGaussianModel with_convention(LikelihoodConvention convention) const;

  /// -(d_y log 2pi + log|R|) / 2 under Density, 0 under SupNormalized.
  double log_g_offset() const noexcept;

  ModelDims dims() const override { return {dim_x(), dim_z(), A_.rows()}; }
  void log_likelihood(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const VectorXd>& x,
                      const Eigen::Ref<const MatrixXd>& z, Eigen::Ref<VectorXd> out) const override;
  void sample_observation(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                          const Eigen::Ref<const VectorXd>& z, Eigen::Ref<VectorXd> y) const override;
  using GenerativeModel::log_likelihood;

 private:
  MatrixXd A_;
  MatrixXd B_;
  MatrixXd R_;
  SpdFactor<double> R_factor_;
  LikelihoodConvention convention_;
};

double lg_log_g(const LinearGaussianModel& model, const Eigen::Ref<const VectorXd>& y,
                const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& z);

/// `count` joint draws x ~ N(mu_x, Sigma_x), z = Hx + u, y = Ax + Bz + v.
JointSample lg_sample_joint(const LinearGaussianModel& model, Rng& rng, Index count);

/// F s / max(F, |s|_2): the identity inside the closed F-ball, radial
/// projection onto its surface outside.
VectorXd radial_squash(const Eigen::Ref<const VectorXd>& s, double bound);

/// Y = f(X, Z) + V with f = radial_squash(A x + B z, F) and V ~ N(0, R);
/// likelihood in the Density convention.
class BoundedObsModel : public GaussianLatentModel {
 public:
  BoundedObsModel(const LinearGaussianModel& base, double bound);

  double bound() const noexcept { return bound_; }
  const MatrixXd& A() const noexcept { return A_; }
  const MatrixXd& B() const noexcept { return B_; }
  const MatrixXd& R() const noexcept { return R_; }
  const SpdFactor<double>& R_factor() const noexcept { return R_factor_; }

  VectorXd observation_function(const Eigen::Ref<const VectorXd>& x,
                                const Eigen::Ref<const VectorXd>& z) const;

  ModelDims dims() const override { return {dim_x(), dim_z(), A_.rows()}; }
  void log_likelihood(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const VectorXd>& x,
                      const Eigen::Ref<const MatrixXd>& z, Eigen::Ref<VectorXd> out) const override;
  void sample_observation(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                          const Eigen::Ref<const VectorXd>& z, Eigen::Ref<VectorXd> y) const override;
  using GenerativeModel::log_likelihood;

 private:
  MatrixXd A_;
  MatrixXd B_;
  MatrixXd R_;
  SpdFactor<double> R_factor_;
  double bound_;
};

double bounded_obs_log_g(const BoundedObsModel& model, const Eigen::Ref<const VectorXd>& y,
                         const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& z);

/// log density of the standard Student-t law with `dof` degrees of freedom.
double student_t_logpdf(double u, double dof);

/// Scalar Y = f(X, Z) + T, T standard Student-t(dof), f = clamp(A x + B z, F).
///
/// Envelope: g_y(x, z) <= h * k(y) with h = 1 and k(y) = t(max(0, |y| - F)),
/// because |y - f| >= |y| - F and the t density decreases in |u|.
class HeavyTailModel : public GaussianLatentModel {
 public:
  HeavyTailModel(const LinearGaussianModel& base, double bound, double dof);

  double bound() const noexcept { return bound_; }
  double dof() const noexcept { return dof_; }
  double location(const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& z) const;

  /// sup of h; the envelope uses h = 1.
  double envelope_h() const noexcept { return 1.0; }
  double envelope_k(double y) const;

  ModelDims dims() const override { return {dim_x(), dim_z(), 1}; }
  void log_likelihood(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const VectorXd>& x,
                      const Eigen::Ref<const MatrixXd>& z, Eigen::Ref<VectorXd> out) const override;
  void sample_observation(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                          const Eigen::Ref<const VectorXd>& z, Eigen::Ref<VectorXd> y) const override;
  using GenerativeModel::log_likelihood;

 private:
  Eigen::RowVectorXd a_;
  Eigen::RowVectorXd b_;
  double bound_;
  double dof_;
};

double heavy_tail_log_g(const HeavyTailModel& model, const Eigen::Ref<const VectorXd>& y,
                        const Eigen::Ref<const VectorXd>& x, const Eigen::Ref<const VectorXd>& z);

/// g_y == 1. Nested IS then reduces to plain Monte Carlo under the prior;
/// used as a control in rate experiments. Has no observation law.
class FlatLikelihoodModel : public GaussianLatentModel {
 public:
  FlatLikelihoodModel(const LinearGaussianModel& base);

  ModelDims dims() const override { return {dim_x(), dim_z(), dim_y_}; }
  void log_likelihood(const Eigen::Ref<const VectorXd>& y, const Eigen::Ref<const VectorXd>& x,
                      const Eigen::Ref<const MatrixXd>& z, Eigen::Ref<VectorXd> out) const override;
  void sample_observation(Rng& rng, const Eigen::Ref<const VectorXd>& x,
                          const Eigen::Ref<const VectorXd>& z, Eigen::Ref<VectorXd> y) const override;
  using GenerativeModel::log_likelihood;

 private:
  Index dim_y_;
};

enum class SpectraKind { BoundedSpectra, GrowingSpectra };

/// Base scalars of a d_z-indexed linear-Gaussian family.
///
/// With w = 1_{d_z} / sqrt(d_z) (Bounded) or w = 1_{d_z} (Growing),
/// u = 1_{d_y} / sqrt(d_y) and e1 the first canonical basis vector of R^{d_x}:
///   B = b u w^T, H = h w e1^T, Q = q I, A = a u e1^T,
///   Sigma_x = sigma_x I, mu_x = mu_x 1, R = r I.
/// sigma_1(B) = b |w|, sigma_1(H) = h |w|, lambda_1(Q) = q.
struct FamilySpec {
  SpectraKind kind = SpectraKind::BoundedSpectra;
  Index d_x = 1;
  Index d_y = 1;
  double a = 0.0;
  double b = 1.0;
  double h = 1.0;
  double q = 1.0;
  double r = 1.0;
  double sigma_x = 1.0;
  double mu_x = 0.0;
  LikelihoodConvention convention = LikelihoodConvention::SupNormalized;
};

/// Scalar model S1: mu_x = 0, Sigma_x = H = Q = B = R = 1, A = 0 (at d_z = 1).
FamilySpec s1_family();

LinearGaussianModel make_lg_family(const FamilySpec& spec, Index d_z);

}  // namespace nis

#endif  // NESTED_IS_MODELS_HPP
