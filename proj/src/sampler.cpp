#include "nested_is/sampler.hpp"

#include <cmath>
#include <string>

namespace nis {

namespace {

void require_counts(Index N, Index M) {
  if (N < 1 || M < 1) {
    throw Error(ErrorKind::InvalidSpec, "nested sampler needs N >= 1 and M >= 1, got N = " +
                                            std::to_string(N) + ", M = " + std::to_string(M));
  }
}

void finalize(ParticleApproximation& pa) {
  pa.norm_weights = normalize_log_weights(pa.log_weights);
  pa.log_norm_estimate = log_sum_exp(pa.log_weights) - std::log(static_cast<double>(pa.size()));
}

}  // namespace

double inner_likelihood_log(const GenerativeModel& model, const Eigen::Ref<const VectorXd>& y,
                            const Eigen::Ref<const VectorXd>& x, Rng& rng, Index M) {
  require_counts(1, M);
  MatrixXd z(model.dims().z, M);
  VectorXd log_g(M);
  model.sample_kernel(rng, x, z);
  model.log_likelihood(y, x, z, log_g);
  return log_sum_exp(log_g) - std::log(static_cast<double>(M));
}

ParticleApproximation nested_is(const GenerativeModel& model, const Eigen::Ref<const VectorXd>& y,
                                Rng& rng, Index N, Index M) {
  require_counts(N, M);
  const ModelDims d = model.dims();
  if (y.size() != d.y) throw Error(ErrorKind::DimensionMismatch, "nested_is: y has wrong length");

  ParticleApproximation pa;
  pa.states.resize(d.x, N);
  pa.log_inner.resize(N);
  pa.inner_count = M;

  const std::uint64_t base = rng();
  const double log_m = std::log(static_cast<double>(M));
  MatrixXd z(d.z, M);
  VectorXd log_g(M);
  for (Index i = 0; i < N; ++i) {
    Rng sub(derive_seed(base, static_cast<std::uint64_t>(i), 0, 0));
    model.sample_prior(sub, pa.states.col(i));
    model.sample_kernel(sub, pa.states.col(i), z);
    model.log_likelihood(y, pa.states.col(i), z, log_g);
    pa.log_inner(i) = log_sum_exp(log_g) - log_m;
  }
  pa.log_weights = pa.log_inner;
  finalize(pa);
  return pa;
}

ProposalPair identity_proposals(const GenerativeModel& model) {
  ProposalPair p;
  p.sample_state = [&model](Rng& rng, Eigen::Ref<VectorXd> x) { model.sample_prior(rng, x); };
  p.sample_nuisance = [&model](Rng& rng, const Eigen::Ref<const VectorXd>& x,
                               Eigen::Ref<MatrixXd> z) { model.sample_kernel(rng, x, z); };
  p.log_dpi0_dnu = [](const Eigen::Ref<const VectorXd>&) { return 0.0; };
  p.log_dkappa_dtau = [](const Eigen::Ref<const VectorXd>&, const Eigen::Ref<const VectorXd>&) {
    return 0.0;
  };
  return p;
}

ProposalPair widened_prior_proposals(const GaussianLatentModel& model, double factor) {
  if (!std::isfinite(factor) || !(factor > 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "widening factor must be positive");
  }
  const SpdFactor<double> wide = chol_spd(MatrixXd(factor * model.sigma_x()));
  ProposalPair p = identity_proposals(model);
  p.sample_state = [&model, wide](Rng& rng, Eigen::Ref<VectorXd> x) {
    VectorXd eps(x.size());
    fill_standard_normal(rng, eps);
    x = model.mu_x() + wide.apply(eps);
  };
  p.log_dpi0_dnu = [&model, wide](const Eigen::Ref<const VectorXd>& x) {
    return model.log_prior_density(x) - mvn_logpdf(x, model.mu_x(), wide);
  };
  return p;
}

ParticleApproximation general_nested_is(const GenerativeModel& model,
                                        const ProposalPair& proposals,
                                        const Eigen::Ref<const VectorXd>& y, Rng& rng, Index N,
                                        Index M) {
  require_counts(N, M);
  const ModelDims d = model.dims();
  if (y.size() != d.y) {
    throw Error(ErrorKind::DimensionMismatch, "general_nested_is: y has wrong length");
  }

  ParticleApproximation pa;
  pa.states.resize(d.x, N);
  pa.log_inner.resize(N);
  pa.log_weights.resize(N);
  pa.inner_count = M;

  const std::uint64_t base = rng();
  const double log_m = std::log(static_cast<double>(M));
  MatrixXd z(d.z, M);
  VectorXd log_g(M);
  for (Index i = 0; i < N; ++i) {
    Rng sub(derive_seed(base, static_cast<std::uint64_t>(i), 0, 0));
    auto x = pa.states.col(i);
    proposals.sample_state(sub, x);
    proposals.sample_nuisance(sub, x, z);
    model.log_likelihood(y, x, z, log_g);
    for (Index j = 0; j < M; ++j) {
      const double rel = proposals.log_dkappa_dtau(x, z.col(j));
      if (!std::isfinite(rel)) {
        throw Error(ErrorKind::NonFiniteRelativeDensity,
                    "log dkappa/dtau at particle " + std::to_string(i) + ", draw " +
                        std::to_string(j));
      }
      log_g(j) += rel;
    }
    const double rel_prior = proposals.log_dpi0_dnu(x);
    if (!std::isfinite(rel_prior)) {
      throw Error(ErrorKind::NonFiniteRelativeDensity,
                  "log dpi0/dnu at particle " + std::to_string(i));
    }
    pa.log_inner(i) = log_sum_exp(log_g) - log_m;
    pa.log_weights(i) = pa.log_inner(i) + rel_prior;
  }
  finalize(pa);
  return pa;
}

VectorXd normalize_log_weights(const Eigen::Ref<const VectorXd>& log_w) {
  const double total = log_sum_exp(log_w);
  if (!std::isfinite(total)) {
    throw Error(ErrorKind::DegenerateWeights,
                total > 0 ? "log weights sum to +inf" : "all log weights are -inf");
  }
  return (log_w.array() - total).exp().matrix();
}

double estimate(const ParticleApproximation& pa,
                const std::function<double(const Eigen::Ref<const VectorXd>&)>& f) {
  // Centred at the first value so that a constant f is reproduced exactly even
  // though the weights only sum to one up to rounding.
  const double anchor = f(pa.states.col(0));
  double sum = 0.0;
  for (Index i = 1; i < pa.size(); ++i) sum += pa.norm_weights(i) * (f(pa.states.col(i)) - anchor);
  return anchor + sum;
}

double effective_sample_size(const ParticleApproximation& pa) {
  return 1.0 / pa.norm_weights.squaredNorm();
}

}  // namespace nis
