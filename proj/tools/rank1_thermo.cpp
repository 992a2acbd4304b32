// rank1_thermo: run, compare and list the experiments.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rank1/cli/experiments.hpp"
#include "rank1/core/parallel.hpp"

namespace cli = rank1::cli;

int main(int argc, char** argv) {
  CLI::App app{"Entropy spectra and pressure curves for rank-one surfaces"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides the config)");
  auto* seed_opt = run->add_option("--seed", seed, "Seed (overrides the config)");
  run->add_option("--threads", threads, "Worker threads (default: RANK1_THERMO_THREADS or hardware)");

  std::string dir_a, dir_b;
  double tol = 1e-12;
  bool as_json = false;
  auto* diff = app.add_subcommand("diff", "Compare two run directories");
  diff->add_option("a", dir_a, "First run")->required();
  diff->add_option("b", dir_b, "Second run")->required();
  diff->add_option("--tol", tol, "Relative tolerance");
  diff->add_flag("--json", as_json, "Print the full report as JSON");

  auto* list = app.add_subcommand("list-experiments", "List known experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  if (*list) {
    for (const auto& n : cli::experiment_names()) std::cout << n << '\n';
    return 0;
  }

  if (*diff) {
    try {
      auto r = cli::diff_runs(dir_a, dir_b, {tol});
      if (as_json) {
        std::cout << r.to_json().dump(2) << '\n';
      } else {
        for (const auto& d : r.differences) std::cout << d.dump() << '\n';
        for (const auto& c : r.convergence)
          std::cout << "convergence " << c["field"].get<std::string>() << ": ratio " << c["error_ratio"]
                    << ", order " << c["observed_order"] << '\n';
        std::cout << (r.identical() ? "identical" : "different") << '\n';
      }
      return r.identical() ? 0 : cli::kAssertionFailure;
    } catch (const rank1::Error& e) {
      std::cerr << e.what() << '\n';
      return cli::exit_code_for(e.code());
    }
  }

  cli::ExperimentConfig config;
  try {
    config = cli::load_config(config_path);
  } catch (const rank1::Error& e) {
    std::cerr << cli::error_report(e).dump(2) << '\n';
    return cli::exit_code_for(e.code());
  }
  if (*out_opt) config.output = out_dir;
  if (*seed_opt) config.seed = seed;
  config.threads = threads > 0 ? threads : rank1::default_thread_count();

  auto r = cli::run_experiment(config);
  if (!r.error.is_null()) {
    std::cerr << r.error.dump(2) << '\n';
    return r.exit_code;
  }
  for (const auto& c : r.summary["checks"])
    std::cout << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << " (measured "
              << c["measured"] << ", tolerance " << c["tolerance"] << ")\n";
  std::cout << config.experiment << ": " << (r.exit_code == 0 ? "passed" : "failed") << " -> " << config.output
            << '\n';
  return r.exit_code;
}
