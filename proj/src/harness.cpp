#include "ewa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include "ewa/errors.hpp"
#include "ewa/random.hpp"

namespace ewa {

std::string_view to_string(SignalKind kind) {
  switch (kind) {
    case SignalKind::zero:
      return "zero";
    case SignalKind::sinusoid:
      return "sinusoid";
    case SignalKind::mix:
      return "mix";
    case SignalKind::step:
      return "step";
    case SignalKind::custom:
      return "custom";
  }
  return "unknown";
}

SignalKind parse_signal_kind(std::string_view name) {
  if (name == "zero") return SignalKind::zero;
  if (name == "sinusoid") return SignalKind::sinusoid;
  if (name == "mix") return SignalKind::mix;
  if (name == "step") return SignalKind::step;
  if (name == "custom") return SignalKind::custom;
  throw ValidationError("unknown signal kind '" + std::string(name) +
                        "' (expected zero, sinusoid, mix, step or custom)");
}

std::string_view to_string(MomentForm form) {
  return form == MomentForm::projection_gaussian ? "projection_gaussian"
                                                 : "general";
}

SignalSpec SignalSpec::sinusoid(double amplitude, double frequency,
                                double phase) {
  SignalSpec s;
  s.kind = SignalKind::sinusoid;
  s.components = {{amplitude, frequency, phase}};
  return s;
}

SignalSpec SignalSpec::mix(std::vector<SinusoidComponent> components) {
  SignalSpec s;
  s.kind = SignalKind::mix;
  s.components = std::move(components);
  return s;
}

SignalSpec SignalSpec::step(double level, double location) {
  SignalSpec s;
  s.kind = SignalKind::step;
  s.level = level;
  s.location = location;
  return s;
}

SignalSpec SignalSpec::custom(std::vector<double> values) {
  SignalSpec s;
  s.kind = SignalKind::custom;
  s.values = std::move(values);
  return s;
}

Eigen::VectorXd SignalSpec::evaluate(Eigen::Index n) const {
  if (n < 1) throw ValidationError("signal length must be at least 1");
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  auto x = [n](Eigen::Index i) {
    return static_cast<double>(i + 1) / static_cast<double>(n);
  };
  auto add_wave = [&](const SinusoidComponent& c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      f[i] += c.amplitude *
              std::sin(2.0 * std::numbers::pi * c.frequency * x(i) + c.phase);
    }
  };
  switch (kind) {
    case SignalKind::zero:
      break;
    case SignalKind::sinusoid:
      if (components.empty()) throw ValidationError("sinusoid needs a component");
      add_wave(components.front());
      break;
    case SignalKind::mix:
      if (components.empty()) throw ValidationError("mix needs components");
      for (const auto& c : components) add_wave(c);
      break;
    case SignalKind::step:
      for (Eigen::Index i = 0; i < n; ++i) f[i] = x(i) >= location ? level : 0.0;
      break;
    case SignalKind::custom:
      if (static_cast<Eigen::Index>(values.size()) != n) {
        throw ValidationError("custom signal has " +
                              std::to_string(values.size()) +
                              " values, grid has " + std::to_string(n));
      }
      for (Eigen::Index i = 0; i < n; ++i)
        f[i] = values[static_cast<std::size_t>(i)];
      break;
  }
  if (!f.allFinite()) throw ValidationError("signal is not finite");
  return f;
}

// ---------------------------------------------------------------------------

namespace {

void check_compatible(const Collection& coll, const NoiseModel& noise,
                      const Config& cfg) {
  cfg.validate();
  if (cfg.sigma_sq < noise.sigma_sq() * (1.0 - 1e-12)) {
    throw DomainError("configured σ² = " + std::to_string(cfg.sigma_sq) +
                      " is below the noise model's certified σ² = " +
                      std::to_string(noise.sigma_sq()));
  }
  if (cfg.v_bound < coll.max_spec_norm()) {
    throw DomainError("configured V = " + std::to_string(cfg.v_bound) +
                      " is below the largest spectral norm " +
                      std::to_string(coll.max_spec_norm()));
  }
  if (cfg.penalty_rule == PenaltyRule::gaussian_projection) {
    if (noise.kind() != NoiseKind::gaussian) {
      throw DomainError("the projection rule requires Gaussian noise");
    }
    if (!coll.all_projections()) {
      throw DomainError("the projection rule requires orthogonal projections");
    }
  }
}

struct Draw {
  Eigen::VectorXd y;
  Eigen::MatrixXd fits;  // column t = P_t Y
  Eigen::VectorXd risk;
  Eigen::VectorXd sure;
};

Draw draw(const Collection& coll, const Eigen::VectorXd& f0,
          const NoiseModel& noise, double sigma_sq, std::uint64_t seed) {
  const Eigen::Index n = coll.n();
  const auto m = static_cast<Eigen::Index>(coll.size());
  Draw d;
  d.y = f0 + sample_noise(noise, n, seed);
  d.fits.resize(n, m);
  d.risk.resize(m);
  d.sure.resize(m);
  for (Eigen::Index t = 0; t < m; ++t) {
    const Estimator& est = coll[static_cast<std::size_t>(t)];
    d.fits.col(t) = est(d.y);
    d.risk[t] = (f0 - d.fits.col(t)).squaredNorm();
    d.sure[t] = (d.y - d.fits.col(t)).squaredNorm() +
                2.0 * sigma_sq * est.stats().tr -
                static_cast<double>(n) * sigma_sq;
  }
  return d;
}

}  // namespace

Scenario::Scenario(const SignalSpec& signal, Collection coll, NoiseModel noise,
                   Config cfg)
    : coll_(std::move(coll)), noise_(noise), cfg_(cfg) {
  check_compatible(coll_, noise_, cfg_);
  f0_ = signal.evaluate(coll_.n());
  c_tilde_ = tilde_sup_norm(f0_, coll_);
  table_ = penalty_table(coll_, cfg_, c_tilde_);
}

TrialResult Scenario::run_trial(std::uint64_t seed) const {
  const Draw d = draw(coll_, f0_, noise_, cfg_.sigma_sq, seed);
  const Eigen::VectorXd penalized = d.sure + table_.pen;
  const WeightVector<double> w =
      gibbs_weights<double>(penalized, cfg_.beta, coll_.prior());
  const Eigen::VectorXd f_ewa = d.fits * w.weights;

  TrialResult r;
  r.seed = seed;
  r.lhs = (f0_ - f_ewa).squaredNorm();
  const DiracBound<double> best =
      bound_rhs(coll_, cfg_, c_tilde_, d.risk, table_.pen);
  r.rhs = best.rhs;
  r.holds = r.lhs <= r.rhs;
  r.best_t = best.t;
  r.nu_star = best.nu;
  r.gamma = best.gamma;
  r.eps = best.eps.eps;
  r.eps_prime = best.eps.eps_prime;
  r.risk_term = best.risk_term;
  r.pen_total = best.pen_term;
  r.price_total = best.price_term;
  r.kl_term = best.kl_term;

  const double log_inv_eta = -std::log(cfg_.eta);
  r.per_t.resize(coll_.size());
  for (std::size_t t = 0; t < coll_.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    const double prior = coll_.prior()[ti];
    r.per_t[t] = {d.risk[ti],
                  d.sure[ti],
                  table_.pen[ti],
                  table_.price[ti],
                  prior > 0.0 ? cfg_.beta * (-2.0 * std::log(prior) + log_inv_eta)
                              : std::numeric_limits<double>::infinity(),
                  w.weights[ti]};
  }
  return r;
}

Eigen::VectorXd Scenario::expected_risks() const {
  const auto m = static_cast<Eigen::Index>(coll_.size());
  Eigen::VectorXd out(m);
  for (Eigen::Index t = 0; t < m; ++t) {
    const Estimator& est = coll_[static_cast<std::size_t>(t)];
    out[t] = (f0_ - est(f0_)).squaredNorm() +
             noise_.variance() * est.stats().tr_sq;
  }
  return out;
}

DiracBound<double> Scenario::expectation_bound() const {
  return bound_rhs(coll_, cfg_, c_tilde_, expected_risks(), table_.pen,
                   BoundKind::in_expectation);
}

TrialResult run_trial(const SignalSpec& signal, const Collection& coll,
                      const NoiseModel& noise, const Config& cfg,
                      std::uint64_t seed) {
  return Scenario(signal, coll, noise, cfg).run_trial(seed);
}

ExperimentReport run_experiment(const Scenario& scenario, std::size_t n_trials,
                                std::uint64_t master_seed, unsigned threads) {
  if (n_trials < 1) throw ValidationError("n_trials must be at least 1");
  ExperimentReport rep;
  rep.n_trials = n_trials;
  rep.trials.resize(n_trials);

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, n_trials));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_trials; i = next++) {
      rep.trials[i] = scenario.run_trial(derive_seed(master_seed, i));
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  double sum = 0.0, sum_sq = 0.0, sum_rhs = 0.0;
  for (const TrialResult& t : rep.trials) {
    rep.n_holds += t.holds ? 1 : 0;
    sum += t.lhs;
    sum_sq += t.lhs * t.lhs;
    sum_rhs += t.rhs;
  }
  const double count = static_cast<double>(n_trials);
  rep.empirical_coverage = static_cast<double>(rep.n_holds) / count;
  rep.mean_lhs = sum / count;
  rep.mean_rhs = sum_rhs / count;
  if (n_trials > 1) {
    const double var =
        std::max(0.0, (sum_sq - count * rep.mean_lhs * rep.mean_lhs) / (count - 1.0));
    rep.stderr_lhs = std::sqrt(var / count);
  }
  const DiracBound<double> eb = scenario.expectation_bound();
  rep.expectation_rhs = eb.rhs;
  rep.expectation_best_t = eb.t;
  rep.target = 1.0 - scenario.config().eta;
  rep.c_tilde = scenario.c_tilde();
  return rep;
}

ExperimentReport run_experiment(const SignalSpec& signal, const Collection& coll,
                                const NoiseModel& noise, const Config& cfg,
                                std::size_t n_trials, std::uint64_t master_seed) {
  return run_experiment(Scenario(signal, coll, noise, cfg), n_trials,
                        master_seed);
}

// ---------------------------------------------------------------------------

namespace {

DeviationResult deviation_for(const Scenario& sc, const Draw& d,
                              const Eigen::VectorXd& rho,
                              const Eigen::VectorXd& mu, double nu) {
  const Collection& coll = sc.collection();
  const Config& cfg = sc.config();
  const auto m = static_cast<Eigen::Index>(coll.size());
  if (rho.size() != m || mu.size() != m) {
    throw ValidationError("deviation: rho/mu not aligned with the collection");
  }
  if (!(nu > 0.0)) throw DomainError("ν must be positive");
  Eigen::VectorXd tr(m), tr_sq(m);
  for (Eigen::Index t = 0; t < m; ++t) {
    tr[t] = coll.stats(static_cast<std::size_t>(t)).tr;
    tr_sq[t] = coll.stats(static_cast<std::size_t>(t)).tr_sq;
  }
  const Eigen::VectorXd gap = d.risk - d.sure;

  DeviationResult out;
  out.lhs = rho.dot(gap) - mu.dot(gap);

  const double s = cfg.sigma_sq;
  const double c2 = sc.c_tilde() * sc.c_tilde();
  const double entropy =
      cfg.beta * (kl_divergence<double>(rho, coll.prior()) +
                  kl_divergence<double>(mu, coll.prior()) - std::log(cfg.eta));
  if (cfg.penalty_rule == PenaltyRule::gaussian_projection) {
    const double denom = cfg.beta - 4.0 * s;
    out.rhs = 4.0 * cfg.delta * s / denom * (rho.dot(d.risk) + mu.dot(d.risk)) +
              4.0 * s / denom * (s + (1.0 - cfg.delta) * c2) * rho.dot(tr) +
              2.0 * s * (1.0 + 2.0 * (1.0 - cfg.delta) * c2 / denom) * mu.dot(tr) +
              entropy;
  } else {
    const double v = cfg.v_bound;
    const double g = gamma(cfg.beta, cfg.delta, s, v);
    const double lift = (1.0 + 2.0 * g * v) * (1.0 + 2.0 * g * v);
    const double denom = cfg.beta - 4.0 * s * v;
    out.rhs = (1.0 + nu) * g * rho.dot(d.risk) +
              4.0 * s / denom * (s + (1.0 - cfg.delta) * lift * c2) * rho.dot(tr_sq) +
              2.0 * s * (mu.dot(tr) +
                         2.0 * (1.0 - cfg.delta) * lift / denom * c2 * mu.dot(tr_sq)) +
              (1.0 + 1.0 / nu) * g * mu.dot(d.risk) + entropy;
  }
  return out;
}

}  // namespace

DeviationResult deviation(const Scenario& scenario, const Eigen::VectorXd& rho,
                          const Eigen::VectorXd& mu, std::uint64_t seed,
                          double nu) {
  const Draw d = draw(scenario.collection(), scenario.f0(), scenario.noise(),
                      scenario.config().sigma_sq, seed);
  return deviation_for(scenario, d, rho, mu, nu);
}

DeviationResult posterior_deviation(const Scenario& scenario,
                                    const Eigen::VectorXd& mu,
                                    std::uint64_t seed, double nu) {
  const Draw d = draw(scenario.collection(), scenario.f0(), scenario.noise(),
                      scenario.config().sigma_sq, seed);
  const WeightVector<double> w =
      gibbs_weights<double>(d.sure + scenario.penalties().pen,
                            scenario.config().beta,
                            scenario.collection().prior());
  return deviation_for(scenario, d, w.weights, mu, nu);
}

double deviation_margin(const SignalSpec& signal, const Collection& coll,
                        const NoiseModel& noise, const Config& cfg,
                        const Eigen::VectorXd& rho, const Eigen::VectorXd& mu,
                        std::uint64_t seed) {
  return deviation(Scenario(signal, coll, noise, cfg), rho, mu, seed).margin();
}

double risk_gap(const Collection& coll, const Eigen::VectorXd& f0,
                const Eigen::VectorXd& w, std::size_t t, std::size_t u,
                double sigma_sq) {
  const Eigen::VectorXd y = f0 + w;
  auto gap = [&](std::size_t k) {
    const Eigen::VectorXd fit = coll[k](y);
    return (f0 - fit).squaredNorm() - sure(y, coll[k], sigma_sq);
  };
  return gap(t) - gap(u);
}

// ---------------------------------------------------------------------------

MomentCheck exp_moment_check(std::size_t t, std::size_t u,
                             const SignalSpec& signal, const Collection& coll,
                             const NoiseModel& noise, const Config& cfg,
                             std::size_t samples, std::uint64_t seed,
                             MomentForm form) {
  if (t >= coll.size() || u >= coll.size()) {
    throw ValidationError("estimator index out of range");
  }
  if (samples < kMinMomentSamples) {
    throw ValidationError("exp_moment_check needs at least 100000 samples");
  }
  const double s = cfg.sigma_sq;
  if (s < noise.sigma_sq() * (1.0 - 1e-12)) {
    throw DomainError("configured σ² is below the noise model's σ²");
  }
  const Eigen::Index n = coll.n();
  const Eigen::VectorXd f0 = signal.evaluate(n);
  const Estimator& pt = coll[t];
  const Estimator& pu = coll[u];
  const TraceStats<double> st = pt.stats();
  const TraceStats<double> su = pu.stats();
  const Eigen::VectorXd diff_f0 = pt(f0) - pu(f0);

  double g = 0.0;
  double log_bound = 0.0;
  if (form == MomentForm::projection_gaussian) {
    if (noise.kind() != NoiseKind::gaussian) {
      throw DomainError("projection form requires Gaussian noise");
    }
    if (!pt.is_projection() || !pu.is_projection()) {
      throw DomainError("projection form requires orthogonal projections");
    }
    if (!(cfg.beta > 4.0 * s)) throw DomainError("temperature must exceed 4σ²");
    log_bound = 2.0 * s / cfg.beta *
                (su.tr + (2.0 * s * st.tr + diff_f0.squaredNorm()) /
                             (cfg.beta - 4.0 * s));
  } else {
    const double v = cfg.v_bound;
    if (v < coll.max_spec_norm()) throw DomainError("V below spectral norms");
    g = gamma(cfg.beta, cfg.delta, s, v);
    const double denom = cfg.beta - 4.0 * s * v;
    const double lift = (1.0 + 2.0 * g * v) * (1.0 + 2.0 * g * v);
    log_bound = 2.0 * s / cfg.beta *
                (su.tr + 2.0 * s / denom * st.tr_sq +
                 lift / denom * diff_f0.squaredNorm());
  }

  // Delta_{t,u} = 2 (W^T D W + W^T D f0 - sigma^2 tr D), D = P_t - P_u, is
  // evaluated from its definition via the two fitted values.
  CounterRng rng(seed);
  Eigen::VectorXd w(n);
  double sum = 0.0, sum_sq = 0.0;
  const double trace_shift = 2.0 * s * (st.tr - su.tr);
  for (std::size_t k = 0; k < samples; ++k) {
    fill_noise(noise, rng, w);
    const Eigen::VectorXd y = f0 + w;
    const Eigen::VectorXd fit_t = pt(y);
    const Eigen::VectorXd fit_u = pu(y);
    const double delta_tu = (f0 - fit_t).squaredNorm() - (y - fit_t).squaredNorm() -
                            (f0 - fit_u).squaredNorm() + (y - fit_u).squaredNorm() -
                            trace_shift;
    double exponent = delta_tu / cfg.beta;
    if (g > 0.0) {
      exponent += g / cfg.beta *
                  (diff_f0.squaredNorm() - (fit_t - fit_u).squaredNorm());
    }
    const double e = std::exp(exponent);
    sum += e;
    sum_sq += e * e;
  }
  const double count = static_cast<double>(samples);
  MomentCheck out;
  out.t = t;
  out.u = u;
  out.form = form;
  out.empirical = sum / count;
  const double var =
      std::max(0.0, (sum_sq - count * out.empirical * out.empirical) / (count - 1.0));
  out.stderr_mc = std::sqrt(var / count);
  out.bound = std::exp(log_bound);
  out.ok = out.empirical <= out.bound + 3.0 * out.stderr_mc;
  return out;
}

Collection dyadic_cosine_projections(Eigen::Index n) {
  const OrthonormalBasis<double> basis(cosine_basis<double>(n));
  return Collection(nested_projections(basis, dyadic_ranks(n)),
                    Collection::uniform_prior(dyadic_ranks(n).size()), 1.0);
}

}  // namespace ewa
