// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nested_is/bounds.hpp"
#include "nested_is/cli_io.hpp"
#include "nested_is/experiments.hpp"
#include "nested_is/oracle.hpp"
#include "nested_is/sampler.hpp"

namespace fs = std::filesystem;
using namespace nis;

namespace {

// Tolerances and sizes, fixed here.
constexpr double kSlopeLow = -0.65;
constexpr double kSlopeHigh = -0.35;
constexpr double kRateSeconds = 60.0;
constexpr double kRatioLimit = 2.0;
constexpr double kCertificateSpread = 1e-9;
constexpr double kDegreeTolerance = 0.05;
constexpr double kOracleTolerance = 1e-6;
constexpr int kOracleModels = 20;
constexpr int kUnbiasedReps = 10000;
constexpr double kUnbiasedSe = 4.0;
constexpr int kDetInstances = 500;
constexpr int kQuadInstances = 1000;
constexpr int kInvMarginalInstances = 1000;
constexpr int kK2Models = 200;
constexpr Index kLinkYDraws = 100000;
constexpr Index kLinkPool = 10000;
constexpr double kLinkRelative = 0.05;
constexpr double kEnvelopeTolerance = 1e-8;
constexpr Index kChiSquareDraws = 2000;
constexpr double kKsLevel = 0.01;
constexpr double kEquivalenceSe = 4.0;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

ExperimentConfig load(const std::string& name) {
  std::ifstream in(fs::path(NESTED_IS_CONFIG_DIR) / name);
  std::stringstream s;
  s << in.rdbuf();
  return parse_config(s.str());
}

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

LinearGaussianModel random_scalar_model(Rng& rng) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  auto m = [](double v) { return MatrixXd::Constant(1, 1, v); };
  return LinearGaussianModel(scalar(u(-1, 1)), m(u(0.5, 2)), m(u(-1.5, 1.5)), m(u(0.3, 2)), m(u(-1, 1)),
                             m(u(-1.5, 1.5)), m(u(0.4, 2)));
}

/// d_x in {1,2}, d_y in {1,2,3}, d_z in {1..32}; entries scaled so spectra stay O(1).
LinearGaussianModel random_model(Rng& rng, Index max_dz = 32) {
  const Index d_x = 1 + static_cast<Index>(rng() % 2);
  const Index d_y = 1 + static_cast<Index>(rng() % 3);
  const Index d_z = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(max_dz));
  auto spd = [&](Index n) {
    MatrixXd a(n, n);
    fill_standard_normal(rng, a);
    return symmetrized(MatrixXd(a * a.transpose() / static_cast<double>(n) + 0.2 * MatrixXd::Identity(n, n)));
  };
  auto gauss = [&](Index r, Index c) {
    MatrixXd m(r, c);
    fill_standard_normal(rng, m);
    return MatrixXd(m / std::sqrt(static_cast<double>(c)));
  };
  VectorXd mu(d_x);
  fill_standard_normal(rng, mu);
  return LinearGaussianModel(mu, spd(d_x), gauss(d_z, d_x), spd(d_z), gauss(d_y, d_x), gauss(d_y, d_z), spd(d_y));
}

VectorXd ball_point(Rng& rng, const VectorXd& centre, double r) {
  VectorXd dir(centre.size());
  fill_standard_normal(rng, dir);
  dir.normalize();
  return centre + r * std::pow(rng.uniform(), 1.0 / static_cast<double>(centre.size())) * dir;
}

const Check* find_check(const ErrorReport& report, std::string_view prefix) {
  for (const Check& c : report.checks)
    if (c.name.rfind(prefix, 0) == 0) return &c;
  return nullptr;
}

bool all_checks_with_prefix(const ErrorReport& report, std::string_view prefix) {
  bool any = false;
  for (const Check& c : report.checks) {
    if (c.name.rfind(prefix, 0) != 0) continue;
    any = true;
    if (!c.passed) return false;
  }
  return any;
}

double slope_of(const ErrorReport& report) { return report.slopes.at(0).slope; }

// ---------------------------------------------------------------------------

Outcome rate_fixed() {
  const auto start = std::chrono::steady_clock::now();
  const ErrorReport report = sweep_N(load("s1_sweep_n.json"));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double s = slope_of(report);
  return {s >= kSlopeLow && s <= kSlopeHigh && seconds < kRateSeconds,
          "slope " + fmt(s, 4) + " +/- " + fmt(report.slopes[0].halfwidth, 2) + ", " + fmt(seconds, 3) + " s"};
}

Outcome rate_random() {
  const ErrorReport report = random_obs_error(load("s1_random_obs.json"));
  const double s = slope_of(report);
  return {s >= kSlopeLow && s <= kSlopeHigh,
          "slope " + fmt(s, 4) + " +/- " + fmt(report.slopes[0].halfwidth, 2)};
}

Outcome uniform_in_dz() {
  const ErrorReport report = sweep_dz(load("bounded_sweep_dz.json"));
  double worst = 0.0;
  for (std::size_t k = 0; k < report.certificates.front().size(); ++k) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& per_dz : report.certificates) {
      lo = std::min(lo, per_dz[k].value);
      hi = std::max(hi, per_dz[k].value);
    }
    worst = std::max(worst, (hi - lo) / std::abs(lo));
  }
  const double ratio = *report.error_ratio;
  return {ratio <= kRatioLimit && worst <= kCertificateSpread,
          "error ratio " + fmt(ratio, 4) + ", certificate spread " + fmt(worst, 3)};
}

Outcome growth_contrast() {
  const ErrorReport report = sweep_dz(load("growing_sweep_dz.json"));
  const SlopeFit& fit = report.slopes.at(0);
  const double degree = report.poly_fit->degree_estimate;
  return {fit.slope - fit.halfwidth > 0.0 && std::abs(degree - 1.0) <= kDegreeTolerance,
          "growth slope " + fmt(fit.slope, 4) + " +/- " + fmt(fit.halfwidth, 3) + ", degree " + fmt(degree, 6)};
}

Outcome oracle_agreement() {
  Rng rng(derive_seed(5, 0, 0, 0));
  double worst_posterior = 0.0;
  for (int i = 0; i < kOracleModels; ++i) {
    const auto model = random_scalar_model(rng);
    const VectorXd y = scalar(-2.0 + 4.0 * rng.uniform());
    const auto exact = lg_posterior_exact(model, y);
    const auto grid = grid_posterior_oracle(model, y, default_grid_spec(model));
    worst_posterior = std::max({worst_posterior, std::abs(grid.mean(0) - exact.mean(0)),
                                std::abs(grid.cov(0, 0) - exact.cov(0, 0))});
  }
  const auto s1 = make_lg_family(s1_family(), 1);
  double worst_ml = 0.0;
  for (double y : {0.0, 1.0, 3.0}) {
    const double grid = grid_posterior_oracle(s1, scalar(y), default_grid_spec(s1)).marginal_likelihood;
    worst_ml = std::max(worst_ml, std::abs(grid - lg_marginal_likelihood(s1, scalar(y))));
  }
  return {worst_posterior <= kOracleTolerance && worst_ml <= kOracleTolerance,
          "posterior gap " + fmt(worst_posterior, 3) + ", marginal gap " + fmt(worst_ml, 3)};
}

Outcome unbiasedness() {
  const auto model = make_lg_family(s1_family(), 1);
  const VectorXd y = scalar(1.0);
  const double truth = lg_marginal_likelihood(model, y);
  bool ok = true;
  std::string detail;
  std::uint64_t cell = 0;
  for (auto [n, m] : {std::pair<Index, Index>{8, 1}, {8, 8}, {64, 4}}) {
    std::vector<double> z(kUnbiasedReps);
    parallel_for(kUnbiasedReps, 0, [&](Index r) {
      Rng rng(derive_seed(6, cell, static_cast<std::uint64_t>(r), 0));
      z[static_cast<std::size_t>(r)] = std::exp(nested_is(model, y, rng, n, m).log_norm_estimate);
    });
    double sum = 0.0, sum2 = 0.0;
    for (double v : z) {
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / kUnbiasedReps;
    const double se = std::sqrt((sum2 / kUnbiasedReps - mean * mean) / (kUnbiasedReps - 1));
    const double zscore = (mean - truth) / se;
    ok = ok && std::abs(zscore) <= kUnbiasedSe;
    detail += "(" + std::to_string(n) + "," + std::to_string(m) + ") z=" + fmt(zscore, 3) + " ";
    ++cell;
  }
  return {ok, detail};
}

Outcome spectral_bounds() {
  Rng rng(derive_seed(7, 0, 0, 0));
  int det_violations = 0, quad_violations = 0, inv_violations = 0, displayed_violations = 0;
  for (int i = 0; i < kDetInstances; ++i) {
    const auto model = random_model(rng);
    if (lg_obs_moments(model).sigma_y_factor.det() > det_sigma_y_bound(model).value * (1 + 1e-12)) ++det_violations;
  }
  for (int i = 0; i < kQuadInstances; ++i) {
    const auto model = random_model(rng);
    const double r = 0.1 + 3.0 * rng.uniform();
    const auto m = lg_obs_moments(model);
    const VectorXd y = ball_point(rng, m.mu_y, r);
    if (0.5 * m.sigma_y_factor.quad_form(y - m.mu_y) > quad_form_bound(model, r).value) ++quad_violations;
  }
  for (int i = 0; i < kInvMarginalInstances; ++i) {
    const auto model = random_model(rng);
    const double r = 0.1 + 2.0 * rng.uniform();
    const VectorXd y = ball_point(rng, lg_obs_moments(model).mu_y, r);
    const double lhs = 1.0 / lg_marginal_likelihood(model, y);
    if (lhs > inv_marginal_bound(model, r).value * (1 + 1e-12)) ++inv_violations;
    if (lhs > inv_marginal_bound_as_displayed(model, r).value) ++displayed_violations;
  }
  return {det_violations == 0 && quad_violations == 0 && inv_violations == 0,
          "violations " + std::to_string(det_violations) + "/" + std::to_string(quad_violations) + "/" +
              std::to_string(inv_violations) + " (determinant-only reading: " +
              std::to_string(displayed_violations) + " of " + std::to_string(kInvMarginalInstances) + ")"};
}

Outcome gaussian_bochner() {
  Rng rng(derive_seed(8, 0, 0, 0));
  int k2_violations = 0;
  for (int i = 0; i < kK2Models; ++i) {
    const auto k = lg_K2(random_model(rng, 64));
    if (k.k2_exact > k.k2_uniform_bound) ++k2_violations;
  }

  FamilySpec spec = s1_family();
  spec.b = 0.5;
  spec.r = 2.0;
  const auto model = make_lg_family(spec, 1);
  const LinkMomentResult mc = closed_form_link_moment(model, kLinkYDraws, derive_seed(8, 1, 0, 0));
  const double integral = lg_link_moment_quadrature(model);
  const double rel = std::abs(*mc.closed_form_mean / integral - 1.0);

  FamilySpec bounded;
  bounded.d_y = 2;
  bounded.r = 0.7;
  const double first = lg_K2(make_lg_family(bounded, 1)).k2_uniform_bound;
  bool constant = true;
  for (Index d_z : {2, 4, 8, 16, 32, 64}) constant = constant && lg_K2(make_lg_family(bounded, d_z)).k2_uniform_bound == first;

  const auto s1 = make_lg_family(s1_family(), 1);
  const double s1_mc = *closed_form_link_moment(s1, kLinkYDraws, derive_seed(8, 2, 0, 0)).closed_form_mean;
  return {k2_violations == 0 && rel <= kLinkRelative && constant,
          "k2 violations " + std::to_string(k2_violations) + ", E|l|^2 " + fmt(*mc.closed_form_mean, 5) +
              " vs integral " + fmt(integral, 6) + ", uniform bound bit-constant " + (constant ? "yes" : "no") +
              "; S1 E|l|^2 " + fmt(s1_mc, 4) + " vs k2_exact " + fmt(lg_K2(s1).k2_exact, 4)};
}

Outcome nongaussian_certificates() {
  bool ok = true;
  std::string detail;
  for (Index d_y : {1, 2}) {
    ModelConfig config;
    config.kind = ModelKind::BoundedObs;
    config.family.d_y = d_y;
    config.bound = 1.0;
    const ModelInstance instance(config, 1);
    const double cert = bounded_obs_K2(*instance.bounded_obs()).value;
    const double est = empirical_link_moment(instance, 2, kLinkYDraws, kLinkPool, derive_seed(9, static_cast<std::uint64_t>(d_y), 0, 0)).estimate;
    ok = ok && est <= cert;
    detail += "bounded d_y=" + std::to_string(d_y) + " " + fmt(est, 4) + " <= " + fmt(cert, 4) + "; ";
  }
  ModelConfig heavy;
  heavy.kind = ModelKind::HeavyTail;
  heavy.bound = 1.0;
  heavy.dof = 2.0;
  const ModelInstance instance(heavy, 1);
  const double cert = heavy_tail_K2_bound(*instance.heavy_tail()).value;
  const double est = empirical_link_moment(instance, 2, kLinkYDraws, kLinkPool, derive_seed(9, 3, 0, 0)).estimate;
  const auto k = heavy_tail_envelope_integral(*instance.heavy_tail());
  const double gap = std::abs(k.closed_form - k.quadrature);
  ok = ok && est <= cert && gap <= kEnvelopeTolerance;
  detail += "heavy tail " + fmt(est, 4) + " <= " + fmt(cert, 6) + "; K gap " + fmt(gap, 3);
  return {ok, detail};
}

Outcome chi_square() {
  const std::vector<Index> grid{1, 2, 4, 8, 16, 32, 64};
  double worst = 1.0;
  for (Index d_y : {1, 2, 3}) {
    FamilySpec spec;
    spec.d_y = d_y;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto r = chi_square_ks(make_lg_family(spec, grid[i]), kChiSquareDraws,
                                   derive_seed(10, static_cast<std::uint64_t>(d_y), i, 2));
      worst = std::min(worst, r.p_value);
    }
  }
  return {worst >= kKsLevel, "smallest p-value " + fmt(worst, 4) + " over 21 cells"};
}

Outcome equivalence() {
  const ExperimentConfig config = load("s1_equivalence.json");
  const ModelInstance instance(config.model, config.d_z_list.at(0));
  const auto r = equivalence_check(instance.generative(), fixed_observation(config), config.master_seed,
                                   config.n_list.at(0), config.m_list.at(0), make_test_function(config),
                                   config.replications, config.threads);
  return {r.bit_identical && r.shift_weight_gap <= 1e-12 && std::abs(r.z_score) <= kEquivalenceSe,
          std::string("bit-identical ") + (r.bit_identical ? "yes" : "no") + ", shift gap " +
              fmt(r.shift_weight_gap, 3) + ", z " + fmt(r.z_score, 3)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "nested_is_acceptance";
  fs::remove_all(root);
  const std::vector<std::pair<Subcommand, std::string>> jobs{
      {Subcommand::SweepN, "s1_sweep_n.json"},       {Subcommand::RandomObs, "s1_random_obs.json"},
      {Subcommand::SweepDz, "bounded_sweep_dz.json"}, {Subcommand::SweepDz, "growing_sweep_dz.json"},
      {Subcommand::Bounds, "bounded_bounds.json"},    {Subcommand::Equivalence, "s1_equivalence.json"},
      {Subcommand::Validate, "s1_validate.json"}};
  int identical = 0;
  std::string detail;
  std::ostringstream sink;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const fs::path dir = root / std::to_string(i);
    RunOptions first;
    first.subcommand = jobs[i].first;
    first.config_path = fs::path(NESTED_IS_CONFIG_DIR) / jobs[i].second;
    first.out_dir = dir / "first";
    const int status_first = run(first, sink, sink);
    RunOptions replay = first;
    replay.config_path = first.out_dir / "manifest.json";
    replay.out_dir = dir / "replay";
    const int status_replay = run(replay, sink, sink);
    const std::string csv = to_string(jobs[i].first) + ".csv";
    const std::string a = slurp(first.out_dir / csv);
    const bool same = status_first != 2 && status_first == status_replay && !a.empty() && a == slurp(replay.out_dir / csv);
    if (same) ++identical;
    else detail += " differs: " + jobs[i].second;
  }
  fs::remove_all(root);
  return {identical == static_cast<int>(jobs.size()),
          std::to_string(identical) + "/" + std::to_string(jobs.size()) + " CSVs byte-identical" + detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"rate, fixed observation", rate_fixed},
      {"rate, random observation", rate_random},
      {"uniformity in d_z", uniform_in_dz},
      {"growth contrast", growth_contrast},
      {"oracle agreement", oracle_agreement},
      {"unbiasedness", unbiasedness},
      {"spectral bounds", spectral_bounds},
      {"Gaussian Bochner constant", gaussian_bochner},
      {"bounded-observation and heavy-tail certificates", nongaussian_certificates},
      {"chi-square statistic", chi_square},
      {"algorithm equivalence", equivalence},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.passed) ++failures;
    std::cout << (outcome.passed ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": "
              << outcome.detail << " [" << fmt(seconds, 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
