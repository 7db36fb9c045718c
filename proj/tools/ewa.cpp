#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "ewa/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"EWA aggregation of linear smoothers: Monte Carlo checks"};
  app.require_subcommand(1);

  std::string config_path;
  ewa::CommandOptions opts;
  std::string out_dir;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  struct Sub {
    ewa::Command cmd;
    CLI::App* app;
  };
  std::vector<Sub> subs;
  for (ewa::Command cmd :
       {ewa::Command::simulate, ewa::Command::sweep_beta, ewa::Command::sweep_delta,
        ewa::Command::check_moments, ewa::Command::check_mgf}) {
    CLI::App* sub = app.add_subcommand(std::string(ewa::to_string(cmd)));
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--trials", trials, "number of trials (overrides run.trials)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "master seed (overrides run.seed)");
    sub->add_option("--threads", threads, "worker threads, 0 for all cores");
    if (cmd == ewa::Command::sweep_beta) {
      sub->add_option("--grid", opts.grid, "temperatures in units of sigma^2 V")
          ->delimiter(',')
          ->required();
    } else if (cmd == ewa::Command::sweep_delta) {
      sub->add_option("--grid", opts.grid, "values of delta")->delimiter(',')->required();
    }
    subs.push_back({cmd, sub});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (const Sub& s : subs) {
    if (!s.app->parsed()) continue;
    opts.out_dir = out_dir;
    opts.threads = threads;
    if (s.app->count("--trials")) opts.trials = trials;
    if (s.app->count("--seed")) opts.seed = seed;
    try {
      const ewa::RunConfig cfg = ewa::load_config(config_path);
      return ewa::execute_noexcept(s.cmd, cfg, opts, std::cerr);
    } catch (const std::exception& e) {
      std::cerr << "ewa " << ewa::to_string(s.cmd) << ": " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
