#include "ewa/commands.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "ewa/errors.hpp"
#include "ewa/random.hpp"

namespace ewa {

std::string_view to_string(Command cmd) {
  switch (cmd) {
    case Command::simulate:
      return "simulate";
    case Command::sweep_beta:
      return "sweep-beta";
    case Command::sweep_delta:
      return "sweep-delta";
    case Command::check_moments:
      return "check-moments";
    case Command::check_mgf:
      return "check-mgf";
  }
  return "unknown";
}

Command parse_command(std::string_view name) {
  for (Command c : {Command::simulate, Command::sweep_beta, Command::sweep_delta,
                    Command::check_moments, Command::check_mgf}) {
    if (name == to_string(c)) return c;
  }
  throw ValidationError("unknown command '" + std::string(name) + "'");
}

const std::vector<std::string_view>& csv_columns(Command cmd) {
  static const std::vector<std::string_view> trials = {
      "trial", "seed", "lhs", "rhs", "holds", "best_t", "nu_star", "gamma",
      "pen_total", "price_total", "kl_term"};
  static const std::vector<std::string_view> sweep = {
      "point", "beta", "delta", "n_trials", "coverage", "target", "coverage_ok",
      "mean_lhs", "stderr_lhs", "mean_rhs", "expectation_rhs", "expectation_ok"};
  static const std::vector<std::string_view> moments = {
      "t", "u", "form", "empirical", "stderr", "bound", "ok"};
  static const std::vector<std::string_view> mgf = {
      "direction", "empirical_mgf", "stderr", "bound", "ok"};
  switch (cmd) {
    case Command::simulate:
      return trials;
    case Command::sweep_beta:
    case Command::sweep_delta:
      return sweep;
    case Command::check_moments:
      return moments;
    case Command::check_mgf:
      return mgf;
  }
  return trials;
}

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

class Csv {
 public:
  explicit Csv(Command cmd) {
    const auto& cols = csv_columns(cmd);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      out_ << (i ? "," : "") << cols[i];
    }
    out_ << '\n';
  }

  Csv& operator<<(double x) { return cell(format_double(x)); }
  Csv& operator<<(bool b) { return cell(b ? "true" : "false"); }
  Csv& operator<<(std::size_t k) { return cell(std::to_string(k)); }
  Csv& operator<<(std::string_view s) { return cell(std::string(s)); }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }
  [[nodiscard]] std::string str() const { return out_.str(); }

 private:
  Csv& cell(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }

  std::ostringstream out_;
  bool first_ = true;
};

// Writes all files or none.
void write_all(const fs::path& dir,
               const std::vector<std::pair<std::string, std::string>>& files) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  try {
    for (const auto& [name, content] : files) {
      const fs::path path = dir / name;
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error(path.string() + ": cannot open for writing");
      written.push_back(path);
      f << content;
      f.close();
      if (!f) throw std::runtime_error(path.string() + ": write failed");
    }
  } catch (...) {
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

json config_echo(const RunConfig& cfg) {
  json echo = json::object();
  std::istringstream in(render(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    echo[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return echo;
}

RunConfig with_overrides(RunConfig cfg, const CommandOptions& opts) {
  if (opts.trials) cfg.trials = *opts.trials;
  if (opts.seed) cfg.seed = *opts.seed;
  validate(cfg);
  return cfg;
}

int simulate(const RunConfig& cfg, const CommandOptions& opts) {
  const Scenario sc = build_scenario(cfg);
  const ExperimentReport rep = run_experiment(sc, cfg.trials, cfg.seed, opts.threads);

  Csv csv(Command::simulate);
  for (std::size_t i = 0; i < rep.trials.size(); ++i) {
    const TrialResult& t = rep.trials[i];
    csv << i << t.seed << t.lhs << t.rhs << t.holds << t.best_t
        << (t.nu_star ? format_double(*t.nu_star) : std::string()) << t.gamma
        << t.pen_total << t.price_total << t.kl_term;
    csv.end_row();
  }

  json summary;
  summary["command"] = "simulate";
  summary["code_version"] = kCodeVersion;
  summary["n_trials"] = rep.n_trials;
  summary["coverage"] = rep.empirical_coverage;
  summary["target"] = rep.target;
  summary["coverage_ok"] = rep.coverage_ok();
  summary["mean_lhs"] = rep.mean_lhs;
  summary["stderr_lhs"] = rep.stderr_lhs;
  summary["mean_rhs"] = rep.mean_rhs;
  summary["expectation_rhs"] = rep.expectation_rhs;
  summary["expectation_best_t"] = rep.expectation_best_t;
  summary["expectation_ok"] = rep.expectation_ok();
  summary["c_tilde"] = rep.c_tilde;
  summary["config"] = config_echo(cfg);

  write_all(opts.out_dir, {{"trials.csv", csv.str()},
                           {"summary.json", summary.dump(2) + "\n"}});
  return rep.coverage_ok() && rep.expectation_ok() ? 0 : 2;
}

int sweep(Command cmd, const RunConfig& base, const CommandOptions& opts) {
  if (opts.grid.empty()) throw ValidationError("--grid: required for " + std::string(to_string(cmd)));
  Csv csv(cmd);
  bool all_ok = true;
  for (std::size_t i = 0; i < opts.grid.size(); ++i) {
    RunConfig cfg = base;
    if (cmd == Command::sweep_beta) {
      cfg.agg.beta = opts.grid[i] * cfg.agg.sigma_sq * cfg.agg.v_bound;
    } else {
      cfg.agg.delta = opts.grid[i];
    }
    try {
      validate(cfg);
    } catch (const std::exception& ex) {
      throw ValidationError("--grid point " + format_double(opts.grid[i]) + ": " +
                            ex.what());
    }
    const ExperimentReport rep =
        run_experiment(build_scenario(cfg), cfg.trials, cfg.seed, opts.threads);
    all_ok = all_ok && rep.coverage_ok() && rep.expectation_ok();
    csv << opts.grid[i] << cfg.agg.beta << cfg.agg.delta << rep.n_trials
        << rep.empirical_coverage << rep.target << rep.coverage_ok() << rep.mean_lhs
        << rep.stderr_lhs << rep.mean_rhs << rep.expectation_rhs << rep.expectation_ok();
    csv.end_row();
  }
  write_all(opts.out_dir, {{"sweep.csv", csv.str()}});
  return all_ok ? 0 : 2;
}

int check_moments(const RunConfig& cfg, const CommandOptions& opts) {
  const Collection coll = build_collection(cfg);
  std::vector<MomentForm> forms;
  if (cfg.moment_forms != MomentForms::general) forms.push_back(MomentForm::projection_gaussian);
  if (cfg.moment_forms != MomentForms::projection_gaussian) forms.push_back(MomentForm::general);

  Csv csv(Command::check_moments);
  bool all_ok = true;
  const auto pairs = moment_pairs(cfg, coll.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [t, u] = pairs[k];
    for (MomentForm form : forms) {
      const MomentCheck m = exp_moment_check(t, u, cfg.signal, coll, cfg.noise, cfg.agg,
                                             cfg.moment_samples,
                                             derive_seed(cfg.seed, k), form);
      all_ok = all_ok && m.ok;
      csv << m.t << m.u << to_string(m.form) << m.empirical << m.stderr_mc << m.bound
          << m.ok;
      csv.end_row();
    }
  }
  write_all(opts.out_dir, {{"moments.csv", csv.str()}});
  return all_ok ? 0 : 2;
}

int check_mgf(const RunConfig& cfg, const CommandOptions& opts) {
  const auto dirs = random_unit_directions(cfg.n, cfg.mgf_directions,
                                           derive_seed(cfg.seed, 0));
  const auto checks = mgf_check(cfg.noise, cfg.n, dirs, cfg.mgf_samples,
                                derive_seed(cfg.seed, 1));
  Csv csv(Command::check_mgf);
  bool all_ok = true;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    all_ok = all_ok && checks[i].ok;
    csv << i << checks[i].empirical_mgf << checks[i].stderr_mgf << checks[i].bound
        << checks[i].ok;
    csv.end_row();
  }
  write_all(opts.out_dir, {{"mgf.csv", csv.str()}});
  return all_ok ? 0 : 2;
}

}  // namespace

int execute(Command cmd, const RunConfig& base, const CommandOptions& opts) {
  if (opts.out_dir.empty()) throw ValidationError("--out: output directory required");
  const RunConfig cfg = with_overrides(base, opts);
  switch (cmd) {
    case Command::simulate:
      return simulate(cfg, opts);
    case Command::sweep_beta:
    case Command::sweep_delta:
      return sweep(cmd, cfg, opts);
    case Command::check_moments:
      return check_moments(cfg, opts);
    case Command::check_mgf:
      return check_mgf(cfg, opts);
  }
  return 1;
}

int execute_noexcept(Command cmd, const RunConfig& cfg, const CommandOptions& opts,
                     std::ostream& err) {
  try {
    return execute(cmd, cfg, opts);
  } catch (const std::exception& ex) {
    err << "ewa " << to_string(cmd) << ": " << ex.what() << '\n';
    return 1;
  }
}

}  // namespace ewa
