#ifndef NESTED_IS_SAMPLER_HPP
#define NESTED_IS_SAMPLER_HPP

#include <functional>

#include <Eigen/Core>

#include "nested_is/linalg.hpp"
#include "nested_is/models.hpp"
#include "nested_is/random.hpp"

namespace nis {

/// Weighted particle cloud returned by the nested samplers.
struct ParticleApproximation {
  MatrixXd states;           ///< d_x x N, one particle per column
  VectorXd log_inner;        ///< log of the inner likelihood estimate per particle
  VectorXd log_weights;      ///< unnormalized; equals log_inner for the standard sampler
  VectorXd norm_weights;
  Index inner_count = 0;
  double log_norm_estimate = 0.0;  ///< log of (1/N) sum exp(log_weights)

  Index size() const noexcept { return states.cols(); }
};

/// log[(1/M) sum_j g_y(x, z_j)] with z_j drawn from the model kernel at x.
double inner_likelihood_log(const GenerativeModel& model, const Eigen::Ref<const VectorXd>& y,
                            const Eigen::Ref<const VectorXd>& x, Rng& rng, Index M);

/// Standard nested importance sampler: states from the prior, M kernel draws
/// per state.
///
/// One value is taken from `rng`; particle i then runs on its own substream
/// seeded with derive_seed(that value, i, 0, 0), so the output does not depend
/// on the order in which particles are processed.
ParticleApproximation nested_is(const GenerativeModel& model, const Eigen::Ref<const VectorXd>& y,
                                Rng& rng, Index N, Index M);

/// Proposals for the general sampler, with the relative densities of the
/// prior w.r.t. nu and of the kernel w.r.t. tau, both in log form.
struct ProposalPair {
  std::function<void(Rng&, Eigen::Ref<VectorXd>)> sample_state;
  std::function<void(Rng&, const Eigen::Ref<const VectorXd>&, Eigen::Ref<MatrixXd>)> sample_nuisance;
  std::function<double(const Eigen::Ref<const VectorXd>&)> log_dpi0_dnu;
  std::function<double(const Eigen::Ref<const VectorXd>&, const Eigen::Ref<const VectorXd>&)>
      log_dkappa_dtau;
};

/// nu = prior, tau = kernel. The model must outlive the returned pair.
ProposalPair identity_proposals(const GenerativeModel& model);

/// nu = N(mu_x, factor * Sigma_x), tau = kernel.
ProposalPair widened_prior_proposals(const GaussianLatentModel& model, double factor = 2.0);

ParticleApproximation general_nested_is(const GenerativeModel& model,
                                        const ProposalPair& proposals,
                                        const Eigen::Ref<const VectorXd>& y, Rng& rng, Index N,
                                        Index M);

VectorXd normalize_log_weights(const Eigen::Ref<const VectorXd>& log_w);

double estimate(const ParticleApproximation& pa,
                const std::function<double(const Eigen::Ref<const VectorXd>&)>& f);

double effective_sample_size(const ParticleApproximation& pa);

}  // namespace nis

#endif  // NESTED_IS_SAMPLER_HPP
