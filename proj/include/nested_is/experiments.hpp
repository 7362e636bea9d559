#ifndef NESTED_IS_EXPERIMENTS_HPP
#define NESTED_IS_EXPERIMENTS_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "nested_is/bounds.hpp"
#include "nested_is/models.hpp"
#include "nested_is/oracle.hpp"
#include "nested_is/sampler.hpp"
#include "nested_is/test_functions.hpp"

namespace nis {

enum class ModelKind { LinearGaussian, BoundedObs, HeavyTail, Flat };

/// A d_z-indexed model family: a linear-Gaussian family, optionally wrapped
/// into one of the non-Gaussian observation models.
struct ModelConfig {
  ModelKind kind = ModelKind::LinearGaussian;
  FamilySpec family = s1_family();
  double bound = 1.0;  ///< F, for BoundedObs and HeavyTail
  double dof = 2.0;    ///< Student-t degrees of freedom, HeavyTail only
};

/// One concrete member of a ModelConfig family.
class ModelInstance {
 public:
  ModelInstance(const ModelConfig& config, Index d_z);

  const GaussianLatentModel& generative() const;
  const LinearGaussianModel& base() const noexcept { return base_; }
  /// Null unless the instance is linear-Gaussian.
  const LinearGaussianModel* linear_gaussian() const noexcept;
  const BoundedObsModel* bounded_obs() const noexcept;
  const HeavyTailModel* heavy_tail() const noexcept;
  ModelKind kind() const noexcept { return kind_; }

 private:
  ModelKind kind_;
  LinearGaussianModel base_;
  std::variant<std::monostate, BoundedObsModel, HeavyTailModel, FlatLikelihoodModel> wrapped_;
};

enum class YMode { Fixed, RandomFromModel };

struct ExperimentConfig {
  ModelConfig model;
  YMode y_mode = YMode::Fixed;
  VectorXd y;  ///< fixed observation; empty means the zero vector
  std::vector<Index> n_list{1024};
  std::vector<Index> m_list{16};
  std::vector<Index> d_z_list{1};
  Index replications = 200;
  int p = 2;
  std::string test_function = "tanh";
  VectorXd direction;  ///< empty means 1/sqrt(d_x) in every coordinate
  std::uint64_t master_seed = 1;
  double radius = 1.0;
  Index chi_square_draws = 2000;
  Index link_y_draws = 100000;
  Index link_pool = 10000;
  unsigned threads = 0;  ///< 0 means hardware concurrency
};

struct Cell {
  Index n = 1;
  Index m = 1;
  Index d_z = 1;
  std::uint64_t index = 0;  ///< seed coordinate of the cell
};

struct CellResult {
  Cell cell;
  int p = 2;
  Index replications = 0;
  double error = 0.0;
  double std_error = 0.0;
  double ess_mean = 0.0;
  double slope = std::numeric_limits<double>::quiet_NaN();  ///< of the cell's fit group
  double slope_halfwidth = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;  ///< wall clock
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double halfwidth = 0.0;  ///< 95% confidence half-width
  Index points = 0;
};

/// Ordinary least squares of log y on log x with a Student-t interval.
SlopeFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ChiSquareReport {
  Index d_y = 1;
  Index d_z = 1;
  Index draws = 0;
  double ks_statistic = 0.0;
  double p_value = 0.0;
};

struct ErrorReport {
  std::vector<CellResult> cells;
  /// log error vs log N per (d_z, M) group, or one fit vs log d_z for sweep_dz.
  std::vector<SlopeFit> slopes;
  std::vector<std::vector<BoundCertificate>> certificates;  ///< per d_z, sweep_dz only
  std::optional<PolyConditionFit> poly_fit;
  std::optional<double> error_ratio;  ///< max/min error across d_z
  std::vector<ChiSquareReport> chi_square;
  std::vector<Check> checks;

  bool passed() const;
};

/// Runs fn(0..count-1) on a pool of `threads` workers. Results land by index,
/// so callers can reduce them in a fixed order.
void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& fn);

/// Reference value pi(f) for a fixed observation. LinearGaussian and Flat use
/// closed forms; the other families fall back to the grid oracle (d_x, d_z <= 2).
double oracle_posterior_expectation(const ModelInstance& model, const TestFunction& f,
                                    const Eigen::Ref<const VectorXd>& y);

TestFunction make_test_function(const ExperimentConfig& config);
VectorXd fixed_observation(const ExperimentConfig& config);

/// K replications of the nested sampler at one cell; error is the
/// power mean (mean |pi(f) - estimate|^p)^{1/p}, std_error by the delta method.
CellResult empirical_lp_error(const ExperimentConfig& config, const Cell& cell);

/// Error per N for every (d_z, M) pair, slope of log error vs log N.
ErrorReport sweep_N(const ExperimentConfig& config);

/// Error per d_z at N = n_list[0], M = m_list[0]; certificates per d_z,
/// max/min error ratio and slope of log error vs log d_z.
ErrorReport sweep_dz(const ExperimentConfig& config);

/// As sweep_N, but every replication draws its own observation from the model.
/// Adds a chi-square KS sub-report per d_z for linear-Gaussian families.
ErrorReport random_obs_error(const ExperimentConfig& config);

/// Kolmogorov-Smirnov test of the Mahalanobis statistic of simulated Y
/// against chi-square(d_y).
ChiSquareReport chi_square_ks(const LinearGaussianModel& model, Index draws, std::uint64_t seed);

/// Asymptotic Kolmogorov survival function with the small-sample correction
/// of the argument, (sqrt n + 0.12 + 0.11 / sqrt n) D.
double kolmogorov_p_value(double statistic, Index n);

struct LinkMomentResult {
  double estimate = 0.0;  ///< mean of |l_Y|^p, pool estimate per Y
  double std_error = 0.0;
  std::optional<double> closed_form_mean;  ///< linear-Gaussian only: mean of the exact |l_Y|^p
  std::optional<double> closed_form_std_error;
};

/// E |l_Y|^p with |l_y|^2 estimated by m(g_y^2) / m(g_y)^2 over one shared pool
/// of `pool` draws from the mixture measure, for `y_draws` simulated Y.
LinkMomentResult empirical_link_moment(const ModelInstance& model, int p, Index y_draws,
                                       Index pool, std::uint64_t seed, unsigned threads = 0);

/// Mean of the closed-form |l_Y|^2 over simulated Y (no pool).
LinkMomentResult closed_form_link_moment(const LinearGaussianModel& model, Index y_draws,
                                         std::uint64_t seed);

struct EquivalenceResult {
  bool bit_identical = false;
  double shift_weight_gap = 0.0;  ///< max |w| difference under a constant log 2 shift
  double mean_standard = 0.0;
  double se_standard = 0.0;
  double mean_widened = 0.0;
  double se_widened = 0.0;
  double z_score = 0.0;
  bool passed() const { return bit_identical && shift_weight_gap <= 1e-12 && std::abs(z_score) <= 4.0; }
};

EquivalenceResult equivalence_check(const GaussianLatentModel& model,
                                    const Eigen::Ref<const VectorXd>& y, std::uint64_t seed,
                                    Index N, Index M, const TestFunction& f,
                                    Index replications = 200, unsigned threads = 0);

/// Oracle cross-checks on the configured model at d_z_list[0]: exact vs grid
/// posterior, marginal likelihood vs grid, link norm convention invariance.
std::vector<Check> validate_oracles(const ExperimentConfig& config);

/// Certificates across d_z_list and the checks that make sense for the family.
ErrorReport bounds_report(const ExperimentConfig& config);

/// Algorithm equivalence at d_z_list[0], N = n_list[0], M = m_list[0].
ErrorReport equivalence_report(const ExperimentConfig& config);

}  // namespace nis

#endif  // NESTED_IS_EXPERIMENTS_HPP
