#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nested_is/cli_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Nested importance sampling experiments"};
  app.set_version_flag("--version", std::string(nis::kToolVersion));

  std::string subcommand;
  std::string config;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  app.add_option("subcommand", subcommand, "sweep-n | sweep-dz | random-obs | bounds | validate | equivalence")
      ->required();
  app.add_option("--config", config, "experiment config or manifest (JSON)");
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "override the master seed");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto sub = nis::parse_subcommand(subcommand);
  if (!sub) {
    std::cerr << "nested-is: unknown subcommand '" << subcommand << "'\n";
    return 2;
  }
  nis::RunOptions options;
  options.subcommand = *sub;
  options.config_path = config;
  options.out_dir = out_dir;
  if (*seed_opt) options.seed = seed;
  if (*threads_opt) options.threads = threads;
  return nis::run(options, std::cout, std::cerr);
}
