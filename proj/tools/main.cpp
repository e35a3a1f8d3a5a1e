#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "ecosel/commands.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string positional_config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<int> threads;
};

void add_common_options(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "run configuration file");
  cmd->add_option("config_file", ov.positional_config, "run configuration file (positional form)");
  cmd->add_option("--out", [&ov](const CLI::results_t& r) { ov.out = r[0]; return true; },
                  "output directory override");
  cmd->add_option("--seed", [&ov](const CLI::results_t& r) { ov.seed = std::stoull(r[0]); return true; },
                  "fold seed override");
  cmd->add_option("--folds", [&ov](const CLI::results_t& r) { ov.folds = std::stoi(r[0]); return true; },
                  "fold count override");
  cmd->add_option("--threads", [&ov](const CLI::results_t& r) { ov.threads = std::stoi(r[0]); return true; },
                  "worker thread count override (0 = all cores)");
}

ecosel::RunConfig load_config(const Overrides& ov) {
  std::string path = ov.config_path;
  if (path.empty()) path = ov.positional_config;
  if (path.empty()) ecosel::throw_config("a config file is required (--config <path> or positional)");
  ecosel::RunConfig cfg = ecosel::RunConfig::from_file(path);
  if (ov.out) cfg.out_dir = *ov.out;
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.folds) cfg.folds = *ov.folds;
  if (ov.threads) cfg.threads = *ov.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecosel: cost-aware Bayesian variable selection for linear regression"};
  app.require_subcommand(1);

  Overrides ov_analyze, ov_sweep, ov_timed, ov_check;
  CLI::App* analyze = app.add_subcommand("analyze", "rank purchased sets and pick the optimum");
  CLI::App* sweep = app.add_subcommand("sweep", "trace the optimum along a price grid");
  CLI::App* timed = app.add_subcommand("timed", "solve the discounted when-to-purchase problem");
  CLI::App* check = app.add_subcommand("check", "run the numerical verification suite");
  add_common_options(analyze, ov_analyze);
  add_common_options(sweep, ov_sweep);
  add_common_options(timed, ov_timed);
  add_common_options(check, ov_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*analyze) return ecosel::cmd_analyze(load_config(ov_analyze));
    if (*sweep) return ecosel::cmd_sweep(load_config(ov_sweep));
    if (*timed) return ecosel::cmd_timed(load_config(ov_timed));
    if (*check) return ecosel::cmd_check(load_config(ov_check));
  } catch (const ecosel::Error& e) {
    std::cerr << e.code() << ": " << e.what() << "\n";
    return ecosel::exit_code(e.cls());
  } catch (const std::exception& e) {
    std::cerr << "E_NUMERIC: unexpected failure: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
