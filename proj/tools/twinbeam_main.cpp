#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "twinbeam/harness.hpp"

// Exit codes: 0 success, 1 configuration error (including a failed
// --verify pre-flight), 2 estimator failure in every row.

int main(int argc, char** argv) {
  CLI::App app{"twin-beam photodetection Monte Carlo and absolute QE calibration"};

  std::string scenario_path;
  std::string out_path = "results.csv";
  std::int64_t pulses_override = 0;
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  bool verify = false;
  int threads = 1;

  app.add_option("--scenario", scenario_path, "scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_path, "output CSV path");
  app.add_option("--pulses", pulses_override, "override the scenario pulse count");
  app.add_option("--seed", seed_override, "override the scenario seed")
      ->each([&has_seed](const std::string&) { has_seed = true; });
  app.add_flag("--verify", verify,
               "cross-check the simulator against the exact oracle before running");
  app.add_option("--threads", threads, "worker threads (never affects output bytes)")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    const twinbeam::Scenario scenario = twinbeam::load_scenario(scenario_path);

    if (verify) {
      std::cout << "running oracle cross-checks...\n";
      if (!twinbeam::verify_against_oracle(std::cout, threads)) {
        std::cerr << "oracle verification failed; aborting\n";
        return 1;
      }
    }

    twinbeam::RunOverrides overrides;
    if (pulses_override > 0) overrides.n_pulses = pulses_override;
    if (has_seed) overrides.seed = seed_override;
    overrides.threads = threads;

    const auto rows = twinbeam::run_scenario(scenario, overrides);
    twinbeam::emit_csv(rows, out_path);

    std::size_t failed = 0;
    for (const auto& row : rows)
      if (!row.eta) ++failed;
    std::cout << "scenario '" << scenario.name << "': " << rows.size() << " rows ("
              << failed << " failed) -> " << out_path << "\n";
    if (failed == rows.size()) return 2;
    return 0;
  } catch (const twinbeam::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
