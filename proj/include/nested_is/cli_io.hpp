#ifndef NESTED_IS_CLI_IO_HPP
#define NESTED_IS_CLI_IO_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "nested_is/experiments.hpp"
#include "nested_is/random.hpp"

namespace nis {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kCsvHeader =
    "N,M,d_z,p,error,stderr,ess_mean,slope,slope_halfwidth,seed";

/// Parses and validates a JSON experiment config. Unknown keys are rejected.
/// ParseError carries the line (malformed JSON) or the offending field;
/// ValidationError reports a well-formed but inadmissible value.
ExperimentConfig parse_config(std::string_view text);

/// Every field written out explicitly, so parse(serialize(c)) == c.
nlohmann::json config_to_json(const ExperimentConfig& config);
std::string serialize_config(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Shortest decimal that reads back to the same double; empty for NaN.
std::string format_double(double value);

std::string csv_table(const ErrorReport& report, std::uint64_t master_seed);

/// Report with a fixed key set; fields that do not apply are null or empty.
nlohmann::json report_json(std::string_view subcommand, const ErrorReport& report);

/// "x y y_err" rows: x is N, or d_z for the d_z sweep and the bounds run.
std::string plot_data(std::string_view subcommand, const ErrorReport& report);

enum class Subcommand { SweepN, SweepDz, RandomObs, Bounds, Validate, Equivalence };

std::optional<Subcommand> parse_subcommand(std::string_view name);
std::string to_string(Subcommand sub);

struct RunOptions {
  Subcommand subcommand = Subcommand::Validate;
  std::filesystem::path config_path;
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

/// Executes one subcommand against the config (or a manifest written by an
/// earlier run) and writes <sub>.csv, <sub>_report.json, <sub>_plot.dat and
/// manifest.json into out_dir.
/// Returns 0 when every check passes, 1 when some check fails, 2 on any
/// error. A one-line summary per check goes to `out`, diagnostics to `err`.
int run(const RunOptions& options, std::ostream& out, std::ostream& err);

/// The experiment behind a subcommand, without file output.
ErrorReport execute(Subcommand sub, const ExperimentConfig& config);

}  // namespace nis

#endif  // NESTED_IS_CLI_IO_HPP
