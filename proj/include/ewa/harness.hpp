#pragma once

// Monte Carlo verification of the EWA oracle inequalities: single trials,
// experiments over derived seeds, the deviation inequality for a fixed draw,
// and exponential-moment checks for the risk-estimation error Delta_{t,u}.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ewa/aggregation.hpp"
#include "ewa/estimators.hpp"
#include "ewa/noise.hpp"
#include "ewa/risk.hpp"

namespace ewa {

using Estimator = LinearEstimator<double>;
using Collection = EstimatorCollection<double>;
using Config = AggregationConfig<double>;

// ---------------------------------------------------------------------------
// Signals on the grid x_i = i/n, i = 1..n

enum class SignalKind { zero, sinusoid, mix, step, custom };

std::string_view to_string(SignalKind kind);
SignalKind parse_signal_kind(std::string_view name);

struct SinusoidComponent {
  double amplitude = 1.0;
  double frequency = 1.0;  // cycles over [0, 1]
  double phase = 0.0;

  bool operator==(const SinusoidComponent&) const = default;
};

struct SignalSpec {
  SignalKind kind = SignalKind::zero;
  std::vector<SinusoidComponent> components;  // sinusoid uses the first only
  double level = 1.0;     // step height on x >= location
  double location = 0.5;
  std::vector<double> values;  // custom

  static SignalSpec zero() { return {}; }
  static SignalSpec sinusoid(double amplitude, double frequency,
                             double phase = 0.0);
  static SignalSpec mix(std::vector<SinusoidComponent> components);
  static SignalSpec step(double level, double location);
  static SignalSpec custom(std::vector<double> values);

  [[nodiscard]] Eigen::VectorXd evaluate(Eigen::Index n) const;

  bool operator==(const SignalSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Trials

struct EstimatorBreakdown {
  double risk = 0.0;     // |f0 - P_t Y|^2
  double sure = 0.0;     // r_t
  double pen = 0.0;
  double price = 0.0;
  double kl_term = 0.0;  // beta (2 ln 1/pi_t + ln 1/eta)
  double weight = 0.0;   // Gibbs weight rho_t

  bool operator==(const EstimatorBreakdown&) const = default;
};

struct TrialResult {
  double lhs = 0.0;  // |f0 - f_EWA|^2
  double rhs = 0.0;  // best bound over Dirac masses and nu
  bool holds = false;
  std::size_t best_t = 0;
  std::optional<double> nu_star;  // empty when the bound does not depend on nu
  double gamma = 0.0;
  double eps = 0.0;
  double eps_prime = 0.0;
  // rhs = risk_term + pen_total + price_total + kl_term
  double risk_term = 0.0;
  double pen_total = 0.0;
  double price_total = 0.0;
  double kl_term = 0.0;
  std::vector<EstimatorBreakdown> per_t;
  std::uint64_t seed = 0;

  bool operator==(const TrialResult&) const = default;
};

struct ExperimentReport {
  std::size_t n_trials = 0;
  std::size_t n_holds = 0;
  double empirical_coverage = 0.0;
  double mean_lhs = 0.0;
  double stderr_lhs = 0.0;
  double mean_rhs = 0.0;
  double expectation_rhs = 0.0;
  std::size_t expectation_best_t = 0;
  double target = 0.0;  // 1 - eta
  double c_tilde = 0.0;
  std::vector<TrialResult> trials;

  [[nodiscard]] bool coverage_ok() const { return empirical_coverage >= target; }
  [[nodiscard]] bool expectation_ok() const { return mean_lhs <= expectation_rhs; }

  bool operator==(const ExperimentReport&) const = default;
};

// A validated (signal, collection, noise, config) bundle with the
// trial-invariant quantities precomputed: f0, C, penalties and prices.
class Scenario {
 public:
  Scenario(const SignalSpec& signal, Collection coll, NoiseModel noise,
           Config cfg);

  [[nodiscard]] const Eigen::VectorXd& f0() const { return f0_; }
  [[nodiscard]] const Collection& collection() const { return coll_; }
  [[nodiscard]] const NoiseModel& noise() const { return noise_; }
  [[nodiscard]] const Config& config() const { return cfg_; }
  [[nodiscard]] double c_tilde() const { return c_tilde_; }
  [[nodiscard]] const PenaltyTable<double>& penalties() const { return table_; }

  [[nodiscard]] TrialResult run_trial(std::uint64_t seed) const;

  // E|f0 - P_t Y|^2 = |(I - P_t) f0|^2 + Var(W_i) tr(P_t^2).
  [[nodiscard]] Eigen::VectorXd expected_risks() const;
  [[nodiscard]] DiracBound<double> expectation_bound() const;

 private:
  Eigen::VectorXd f0_;
  Collection coll_;
  NoiseModel noise_;
  Config cfg_;
  double c_tilde_ = 0.0;
  PenaltyTable<double> table_;
};

TrialResult run_trial(const SignalSpec& signal, const Collection& coll,
                      const NoiseModel& noise, const Config& cfg,
                      std::uint64_t seed);

// Trial i uses seed derive_seed(master_seed, i). Trials run on `threads`
// workers (0 = hardware concurrency); the report does not depend on it.
ExperimentReport run_experiment(const Scenario& scenario, std::size_t n_trials,
                                std::uint64_t master_seed,
                                unsigned threads = 0);

ExperimentReport run_experiment(const SignalSpec& signal, const Collection& coll,
                                const NoiseModel& noise, const Config& cfg,
                                std::size_t n_trials, std::uint64_t master_seed);

// ---------------------------------------------------------------------------
// Deviation inequality

struct DeviationResult {
  double lhs = 0.0;  // int int Delta_{t,u} drho(t) dmu(u)
  double rhs = 0.0;
  [[nodiscard]] double margin() const { return rhs - lhs; }
};

// One draw of the deviation inequality for fixed rho and mu. The projection
// rule uses the projection/Gaussian constants; every other rule the general
// sub-Gaussian display with free parameter nu.
DeviationResult deviation(const Scenario& scenario, const Eigen::VectorXd& rho,
                          const Eigen::VectorXd& mu, std::uint64_t seed,
                          double nu = 1.0);

// Same, with rho the Gibbs posterior of the draw itself.
DeviationResult posterior_deviation(const Scenario& scenario,
                                    const Eigen::VectorXd& mu,
                                    std::uint64_t seed, double nu = 1.0);

double deviation_margin(const SignalSpec& signal, const Collection& coll,
                        const NoiseModel& noise, const Config& cfg,
                        const Eigen::VectorXd& rho, const Eigen::VectorXd& mu,
                        std::uint64_t seed);

// Delta_{t,u} = |f0 - f_t|^2 - r_t - |f0 - f_u|^2 + r_u for one noise vector.
double risk_gap(const Collection& coll, const Eigen::VectorXd& f0,
                const Eigen::VectorXd& w, std::size_t t, std::size_t u,
                double sigma_sq);

// ---------------------------------------------------------------------------
// Exponential moments of Delta_{t,u}

enum class MomentForm {
  projection_gaussian,  // E exp(Delta/beta), projections and Gaussian noise
  general,              // E exp(Delta/beta + gamma/beta (|D f0|^2 - |D Y|^2))
};

std::string_view to_string(MomentForm form);

struct MomentCheck {
  std::size_t t = 0;
  std::size_t u = 0;
  MomentForm form = MomentForm::general;
  double empirical = 0.0;
  double stderr_mc = 0.0;
  double bound = 0.0;
  bool ok = false;
};

inline constexpr std::size_t kMinMomentSamples = 100000;

MomentCheck exp_moment_check(std::size_t t, std::size_t u,
                             const SignalSpec& signal, const Collection& coll,
                             const NoiseModel& noise, const Config& cfg,
                             std::size_t samples, std::uint64_t seed,
                             MomentForm form);

// ---------------------------------------------------------------------------
// Built-in scenario pieces

// Nested projections of ranks 1, 2, 4, ..., n in the cosine basis, uniform
// prior, V = 1.
Collection dyadic_cosine_projections(Eigen::Index n);

}  // namespace ewa
