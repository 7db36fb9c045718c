#pragma once

// Risk estimation and the constant calculus of the EWA oracle inequalities:
// Stein's unbiased risk estimate, the peak-signal proxy C, the coupling
// constant gamma, minimal penalties, prices, the (eps, eps') pair and the
// oracle-bound right-hand side evaluated at Dirac masses.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "ewa/errors.hpp"
#include "ewa/estimators.hpp"

namespace ewa {

enum class PenaltyRule {
  theorem1,             // general smoothed projections, sub-Gaussian noise
  gaussian_projection,  // orthogonal projections, Gaussian noise
  custom,               // pen(t) = kappa tr(P_t^2) sigma^2, checked against theorem1
};

inline std::string_view to_string(PenaltyRule rule) {
  switch (rule) {
    case PenaltyRule::theorem1:
      return "theorem1";
    case PenaltyRule::gaussian_projection:
      return "gaussian_projection";
    case PenaltyRule::custom:
      return "custom";
  }
  return "unknown";
}

inline PenaltyRule parse_penalty_rule(std::string_view name) {
  if (name == "theorem1") return PenaltyRule::theorem1;
  if (name == "gaussian_projection") return PenaltyRule::gaussian_projection;
  if (name == "custom") return PenaltyRule::custom;
  throw ValidationError("unknown penalty rule '" + std::string(name) +
                        "' (expected theorem1, gaussian_projection or custom)");
}

namespace detail {

template <typename Scalar>
std::string num(Scalar x) {
  std::ostringstream os;
  os.precision(10);
  os << double(x);
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Risk estimates

// r_t = |Y - P_t Y|^2 + 2 sigma^2 tr(P_t) - n sigma^2.
template <typename Scalar, typename Derived>
Scalar sure(const Eigen::MatrixBase<Derived>& y,
            const LinearEstimator<Scalar>& est, Scalar sigma_sq) {
  if (!(sigma_sq > Scalar(0))) throw DomainError("sigma^2 must be positive");
  const Vec<Scalar> residual = y - est(y);
  return residual.squaredNorm() + Scalar(2) * sigma_sq * est.stats().tr -
         Scalar(est.dim()) * sigma_sq;
}

// Smallest C >= 0 with |P_t f0|^2 <= C^2 tr(P_t^2) for every t.
template <typename Scalar, typename Derived>
Scalar tilde_sup_norm(const Eigen::MatrixBase<Derived>& f0,
                      const EstimatorCollection<Scalar>& coll) {
  Scalar c(0);
  for (std::size_t t = 0; t < coll.size(); ++t) {
    const Scalar tr_sq = coll.stats(t).tr_sq;
    if (tr_sq <= Scalar(0)) continue;
    c = std::max(c, coll[t](f0).norm() / std::sqrt(tr_sq));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Configuration

template <typename Scalar>
struct AggregationConfig {
  Scalar beta{20};
  Scalar delta{1};
  Scalar eta{0.05};
  PenaltyRule penalty_rule = PenaltyRule::theorem1;
  Scalar kappa{0};  // custom rule only
  Scalar sigma_sq{1};
  Scalar v_bound{1};

  bool operator==(const AggregationConfig&) const = default;

  // Throws DomainError naming the first violated inequality.
  void validate() const;
};

// gamma = (beta - 4 s V (1+2d) - sqrt(beta - 4 s V) sqrt(beta - 4 s V (1+4d)))
//         / (16 s d V^2)          for d > 0, and 0 for d = 0  (s = sigma^2).
// Evaluated in the rationalized form 4 s d / (a - 2c + sqrt(a (a - 4c))),
// a = beta - 4 s V, c = 4 s V d, which has no cancellation for large beta.
template <typename Scalar>
Scalar gamma(Scalar beta, Scalar delta, Scalar sigma_sq, Scalar v) {
  if (!(sigma_sq > Scalar(0)) || !(v > Scalar(0))) {
    throw DomainError("sigma^2 and V must be positive");
  }
  if (!(delta >= Scalar(0) && delta <= Scalar(1))) {
    throw DomainError("delta must lie in [0, 1], got " + detail::num(delta));
  }
  const Scalar floor = Scalar(4) * sigma_sq * v;
  if (!(beta > floor)) {
    throw DomainError("temperature must exceed 4σ²V: β = " + detail::num(beta) +
                      ", 4σ²V = " + detail::num(floor));
  }
  if (delta == Scalar(0)) return Scalar(0);
  const Scalar strict = floor * (Scalar(1) + Scalar(4) * delta);
  if (!(beta >= strict)) {
    throw DomainError("temperature must satisfy β ≥ 4σ²V(1+4δ) = " +
                      detail::num(strict) + " (β ≥ 20σ²V when δ = 1), got β = " +
                      detail::num(beta));
  }
  const Scalar a = beta - floor;
  const Scalar c = floor * delta;
  return Scalar(4) * sigma_sq * delta /
         (a - Scalar(2) * c + std::sqrt(a * (beta - strict)));
}

template <typename Scalar>
void AggregationConfig<Scalar>::validate() const {
  if (!(sigma_sq > Scalar(0)) || !std::isfinite(double(sigma_sq))) {
    throw DomainError("noise parameter σ² must be positive");
  }
  if (!(v_bound >= Scalar(0.5)) || !std::isfinite(double(v_bound))) {
    throw DomainError("V must be at least 0.5");
  }
  if (!(delta >= Scalar(0) && delta <= Scalar(1))) {
    throw DomainError("δ must lie in [0, 1], got " + detail::num(delta));
  }
  if (!(eta > Scalar(0) && eta <= Scalar(1))) {
    throw DomainError("η must lie in (0, 1], got " + detail::num(eta));
  }
  if (!std::isfinite(double(beta))) throw DomainError("β must be finite");
  switch (penalty_rule) {
    case PenaltyRule::gaussian_projection: {
      const Scalar floor = Scalar(4) * sigma_sq * (Scalar(1) + delta);
      if (!(beta > floor)) {
        throw DomainError("temperature must exceed 4σ²(1+δ) = " +
                          detail::num(floor) +
                          " for the projection rule, got β = " +
                          detail::num(beta));
      }
      return;
    }
    case PenaltyRule::custom:
      if (!(kappa > Scalar(0)) || !std::isfinite(double(kappa))) {
        throw DomainError("custom penalty multiplier κ must be positive");
      }
      [[fallthrough]];
    case PenaltyRule::theorem1: {
      const Scalar g = gamma(beta, delta, sigma_sq, v_bound);
      if (!(g < Scalar(1))) {
        // Only reachable at V = 0.5: the admissible set for nu is empty.
        throw DomainError("no admissible ν: (1+ν)γ < 1 fails for every ν > 0 "
                          "(γ = " + detail::num(g) + ")");
      }
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Penalties and prices

// 4 sigma^2 / (beta - 4 sigma^2 V) (1 + (1-delta)(1+2 gamma V)^2 C^2/sigma^2)
//   tr(P^2) sigma^2
template <typename Scalar>
Scalar min_penalty(const TraceStats<Scalar>& st,
                   const AggregationConfig<Scalar>& cfg, Scalar c_tilde) {
  const Scalar s = cfg.sigma_sq;
  const Scalar v = cfg.v_bound;
  const Scalar g = gamma(cfg.beta, cfg.delta, s, v);
  const Scalar lift = (Scalar(1) + Scalar(2) * g * v);
  return Scalar(4) * s / (cfg.beta - Scalar(4) * s * v) *
         (Scalar(1) + (Scalar(1) - cfg.delta) * lift * lift * c_tilde * c_tilde / s) *
         st.tr_sq * s;
}

template <typename Scalar>
Scalar min_penalty(const LinearEstimator<Scalar>& est,
                   const AggregationConfig<Scalar>& cfg, Scalar c_tilde) {
  return min_penalty(est.stats(), cfg, c_tilde);
}

// 2 sigma^4 / (beta - 4 sigma^2) (1 + 2 (1-delta) C^2/sigma^2) tr(P),
// for orthogonal projections only.
template <typename Scalar>
Scalar min_penalty_gaussian_projection(const LinearEstimator<Scalar>& est,
                                       Scalar beta, Scalar delta,
                                       Scalar sigma_sq, Scalar c_tilde) {
  if (!est.is_projection()) {
    throw ValidationError("estimator '" + est.label() +
                          "' is not an orthogonal projection");
  }
  if (!(beta > Scalar(4) * sigma_sq * (delta + Scalar(1)))) {
    throw DomainError("temperature must exceed 4σ²(1+δ) for the projection rule");
  }
  const Scalar s = sigma_sq;
  return Scalar(2) * s * s / (beta - Scalar(4) * s) *
         (Scalar(1) + Scalar(2) * (Scalar(1) - delta) * c_tilde * c_tilde / s) *
         est.stats().tr;
}

// Penalty prescribed by the configured rule. For the custom rule the value
// kappa tr(P^2) sigma^2 must dominate the theorem1 minimum.
template <typename Scalar>
Scalar penalty(const LinearEstimator<Scalar>& est,
               const AggregationConfig<Scalar>& cfg, Scalar c_tilde) {
  switch (cfg.penalty_rule) {
    case PenaltyRule::theorem1:
      return min_penalty(est, cfg, c_tilde);
    case PenaltyRule::gaussian_projection:
      return min_penalty_gaussian_projection(est, cfg.beta, cfg.delta,
                                             cfg.sigma_sq, c_tilde);
    case PenaltyRule::custom: {
      const Scalar pen = cfg.kappa * est.stats().tr_sq * cfg.sigma_sq;
      const Scalar floor = min_penalty(est, cfg, c_tilde);
      if (pen < floor * (Scalar(1) - Scalar(1e-12))) {
        throw ValidationError("κ-penalty for '" + est.label() + "' (" +
                              detail::num(pen) + ") is below the minimum " +
                              detail::num(floor));
      }
      return pen;
    }
  }
  return Scalar(0);
}

// Minimal penalty under the active rule.
template <typename Scalar>
Scalar rule_min_penalty(const LinearEstimator<Scalar>& est,
                        const AggregationConfig<Scalar>& cfg, Scalar c_tilde) {
  if (cfg.penalty_rule == PenaltyRule::gaussian_projection) {
    return min_penalty_gaussian_projection(est, cfg.beta, cfg.delta,
                                           cfg.sigma_sq, c_tilde);
  }
  return min_penalty(est, cfg, c_tilde);
}

template <typename Scalar>
Scalar price(const LinearEstimator<Scalar>& est,
             const AggregationConfig<Scalar>& cfg, Scalar c_tilde) {
  const Scalar s = cfg.sigma_sq;
  const TraceStats<Scalar> st = est.stats();
  const Scalar c2 = c_tilde * c_tilde;
  if (cfg.penalty_rule == PenaltyRule::gaussian_projection) {
    // 2 (1 + 2 (1-delta) sigma^2 / (beta - 4 sigma^2) C^2/sigma^2) tr(P) sigma^2
    return Scalar(2) *
           (Scalar(1) + Scalar(2) * (Scalar(1) - cfg.delta) * s /
                            (cfg.beta - Scalar(4) * s) * c2 / s) *
           st.tr * s;
  }
  // 2 sigma^2 (tr P + 2 sigma^2 (1-delta)(1+2 gamma V)^2 / (beta - 4 sigma^2 V)
  //   C^2/sigma^2 tr P^2)
  const Scalar v = cfg.v_bound;
  const Scalar g = gamma(cfg.beta, cfg.delta, s, v);
  const Scalar lift = Scalar(1) + Scalar(2) * g * v;
  return Scalar(2) * s *
         (st.tr + Scalar(2) * s * (Scalar(1) - cfg.delta) * lift * lift /
                      (cfg.beta - Scalar(4) * s * v) * c2 / s * st.tr_sq);
}

// ---------------------------------------------------------------------------
// Leading-constant calculus

template <typename Scalar>
struct Epsilons {
  Scalar eps_prime{0};
  Scalar eps{0};
};

// eps'(nu) = 1/(1 - (1+nu) gamma) - 1,  eps(nu) = (1+nu)^2 gamma / (nu (1 - (1+nu) gamma)).
template <typename Scalar>
Epsilons<Scalar> epsilons(Scalar nu, Scalar g) {
  if (!(nu > Scalar(0))) throw DomainError("ν must be positive");
  if (!(g >= Scalar(0))) throw DomainError("γ must be nonnegative");
  const Scalar load = (Scalar(1) + nu) * g;
  if (!(load < Scalar(1))) {
    throw DomainError("ν outside its admissible set: (1+ν)γ = " +
                      detail::num(load) + " ≥ 1");
  }
  const Scalar slack = Scalar(1) - load;
  return {load / slack, (Scalar(1) + nu) * (Scalar(1) + nu) * g / (nu * slack)};
}

// Leading constant of the projection/Gaussian bound: 4 sigma^2 delta /
// (beta - 4 sigma^2 (delta + 1)).
template <typename Scalar>
Scalar gaussian_epsilon(Scalar beta, Scalar delta, Scalar sigma_sq) {
  const Scalar denom = beta - Scalar(4) * sigma_sq * (delta + Scalar(1));
  if (!(denom > Scalar(0))) {
    throw DomainError("temperature must exceed 4σ²(1+δ)");
  }
  return Scalar(4) * sigma_sq * delta / denom;
}

// Terms of the nu-dependent objective (1+eps) A + (1+eps') (B + K).
template <typename Scalar>
struct BoundComponents {
  Scalar risk{0};      // A: integrated loss of the oracle measure
  Scalar cost{0};      // B: integrated pen + price
  Scalar entropy{0};   // K: beta (2 KL + ln 1/eta), or 2 beta KL in expectation
};

template <typename Scalar>
Scalar nu_objective(const BoundComponents<Scalar>& b, const Epsilons<Scalar>& e) {
  return (Scalar(1) + e.eps) * b.risk +
         (Scalar(1) + e.eps_prime) * (b.cost + b.entropy);
}

template <typename Scalar>
struct NuChoice {
  std::optional<Scalar> nu;  // empty: the objective does not depend on nu
  Epsilons<Scalar> eps;
  Scalar objective{0};
};

// Admissible nu interval (margin, 1/gamma - 1 - margin) with a relative
// interior margin of 1e-9.
template <typename Scalar>
std::pair<Scalar, Scalar> nu_search_interval(Scalar g) {
  const Scalar nu_max = Scalar(1) / g - Scalar(1);
  if (!(nu_max > Scalar(0))) {
    throw DomainError("admissible set for ν is empty (γ = " + detail::num(g) +
                      ")");
  }
  const Scalar margin = Scalar(1e-9) * std::min(Scalar(1), nu_max);
  return {margin, nu_max - margin};
}

// Golden-section search over log(nu) on the admissible interval.
template <typename Scalar>
NuChoice<Scalar> optimize_nu(Scalar g, const BoundComponents<Scalar>& b) {
  if (!(g >= Scalar(0))) throw DomainError("γ must be nonnegative");
  if (g == Scalar(0)) {
    return {std::nullopt, {}, b.risk + b.cost + b.entropy};
  }
  const auto [lo_nu, hi_nu] = nu_search_interval(g);
  auto f = [&](Scalar log_nu) {
    return nu_objective(b, epsilons(std::exp(log_nu), g));
  };
  const Scalar inv_phi = (std::sqrt(Scalar(5)) - Scalar(1)) / Scalar(2);
  Scalar lo = std::log(lo_nu);
  Scalar hi = std::log(hi_nu);
  Scalar x1 = hi - inv_phi * (hi - lo);
  Scalar x2 = lo + inv_phi * (hi - lo);
  Scalar f1 = f(x1);
  Scalar f2 = f(x2);
  for (int iter = 0; iter < 300 && hi - lo > Scalar(1e-12); ++iter) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    }
  }
  Scalar best_x = f1 <= f2 ? x1 : x2;
  Scalar best_f = std::min(f1, f2);
  for (Scalar edge : {std::log(lo_nu), std::log(hi_nu)}) {
    const Scalar fe = f(edge);
    if (fe < best_f) {
      best_f = fe;
      best_x = edge;
    }
  }
  const Scalar nu = std::exp(best_x);
  return {nu, epsilons(nu, g), best_f};
}

// ---------------------------------------------------------------------------
// Oracle bound at Dirac masses

enum class BoundKind {
  in_probability,  // beta (1+eps') (2 KL + ln 1/eta)
  in_expectation,  // 2 beta (1+eps') KL, no confidence term
};

template <typename Scalar>
struct DiracBound {
  std::size_t t = 0;
  Scalar rhs = std::numeric_limits<Scalar>::infinity();
  std::optional<Scalar> nu;
  Scalar gamma{0};
  Epsilons<Scalar> eps;
  // Summands of rhs, each already multiplied by its leading constant.
  Scalar risk_term{0};
  Scalar pen_term{0};
  Scalar price_term{0};
  Scalar kl_term{0};
};

template <typename Scalar>
struct PenaltyTable {
  Vec<Scalar> pen;
  Vec<Scalar> price;
  Vec<Scalar> min_pen;
};

// Rule penalties, prices and minimal penalties for every collection member.
template <typename Scalar>
PenaltyTable<Scalar> penalty_table(const EstimatorCollection<Scalar>& coll,
                                   const AggregationConfig<Scalar>& cfg,
                                   Scalar c_tilde) {
  const auto m = static_cast<Eigen::Index>(coll.size());
  PenaltyTable<Scalar> tab{Vec<Scalar>(m), Vec<Scalar>(m), Vec<Scalar>(m)};
  for (Eigen::Index t = 0; t < m; ++t) {
    const auto& est = coll[static_cast<std::size_t>(t)];
    tab.pen[t] = penalty(est, cfg, c_tilde);
    tab.price[t] = price(est, cfg, c_tilde);
    tab.min_pen[t] = rule_min_penalty(est, cfg, c_tilde);
  }
  return tab;
}

// Bound at mu = Dirac(t_star): KL(mu, pi) = ln(1/pi(t_star)).
template <typename Scalar>
DiracBound<Scalar> dirac_bound(const AggregationConfig<Scalar>& cfg,
                               std::size_t t_star, Scalar risk, Scalar pen,
                               Scalar price_t, Scalar prior_t,
                               BoundKind kind = BoundKind::in_probability) {
  DiracBound<Scalar> out;
  out.t = t_star;
  if (!(prior_t > Scalar(0))) return out;  // KL infinite
  const Scalar kl = -std::log(prior_t);
  const Scalar entropy = kind == BoundKind::in_probability
                             ? cfg.beta * (Scalar(2) * kl - std::log(cfg.eta))
                             : Scalar(2) * cfg.beta * kl;
  if (cfg.penalty_rule == PenaltyRule::gaussian_projection) {
    const Scalar e = gaussian_epsilon(cfg.beta, cfg.delta, cfg.sigma_sq);
    out.eps = {e, Scalar(2) * e};
  } else {
    out.gamma = gamma(cfg.beta, cfg.delta, cfg.sigma_sq, cfg.v_bound);
    const NuChoice<Scalar> choice =
        optimize_nu(out.gamma, BoundComponents<Scalar>{risk, pen + price_t, entropy});
    out.nu = choice.nu;
    out.eps = choice.eps;
  }
  const Scalar lead = Scalar(1) + out.eps.eps;
  const Scalar side = Scalar(1) + out.eps.eps_prime;
  out.risk_term = lead * risk;
  out.pen_term = side * pen;
  out.price_term = side * price_t;
  out.kl_term = side * entropy;
  out.rhs = out.risk_term + out.pen_term + out.price_term + out.kl_term;
  return out;
}

// Infimum of the oracle bound over Dirac masses (and nu). `risks` holds the
// losses |f0 - P_t Y|^2 (or their expectations for BoundKind::in_expectation),
// `pens` the penalties actually used in the weights.
template <typename Scalar>
DiracBound<Scalar> bound_rhs(const EstimatorCollection<Scalar>& coll,
                             const AggregationConfig<Scalar>& cfg,
                             Scalar c_tilde, const Vec<Scalar>& risks,
                             const Vec<Scalar>& pens,
                             BoundKind kind = BoundKind::in_probability) {
  const auto m = static_cast<Eigen::Index>(coll.size());
  if (risks.size() != m || pens.size() != m) {
    throw ValidationError("bound_rhs: risk/penalty vectors not aligned");
  }
  DiracBound<Scalar> best;
  for (Eigen::Index t = 0; t < m; ++t) {
    const auto& est = coll[static_cast<std::size_t>(t)];
    const Scalar floor = rule_min_penalty(est, cfg, c_tilde);
    if (pens[t] < floor * (Scalar(1) - Scalar(1e-12))) {
      throw ValidationError("penalty for estimator " + std::to_string(t) +
                            " ('" + est.label() + "') is below the minimum " +
                            detail::num(floor));
    }
    const DiracBound<Scalar> b =
        dirac_bound(cfg, static_cast<std::size_t>(t), risks[t], pens[t],
                    price(est, cfg, c_tilde), coll.prior()[t], kind);
    if (b.rhs < best.rhs) best = b;
  }
  return best;
}

// ---------------------------------------------------------------------------
// kappa thresholds for pen(t) = kappa tr(P_t^2) sigma^2

// Weak inequality: beta >= 20 sigma^2 V and kappa >= 4 sigma^2 / (beta - 4 sigma^2 V).
template <typename Scalar>
bool kappa_weak_ok(Scalar kappa, Scalar beta, Scalar sigma_sq, Scalar v) {
  const Scalar floor = Scalar(4) * sigma_sq * v;
  if (!(beta >= Scalar(5) * floor)) return false;
  return kappa >= Scalar(4) * sigma_sq / (beta - floor);
}

// Interpolated condition for a given delta:
//   beta >= 4 sigma^2 V (1+4 delta)  and
//   (beta - 4 sigma^2 V) kappa / (4 sigma^2) - 1 >= (1-delta)(1+2 gamma V)^2 C^2/sigma^2.
template <typename Scalar>
bool kappa_condition(Scalar kappa, Scalar beta, Scalar delta, Scalar sigma_sq,
                     Scalar v, Scalar c_tilde) {
  const Scalar floor = Scalar(4) * sigma_sq * v;
  if (!(beta > floor) || !(beta >= floor * (Scalar(1) + Scalar(4) * delta))) {
    return false;
  }
  const Scalar g = gamma(beta, delta, sigma_sq, v);
  const Scalar lift = Scalar(1) + Scalar(2) * g * v;
  return (beta - floor) * kappa / (Scalar(4) * sigma_sq) - Scalar(1) >=
         (Scalar(1) - delta) * lift * lift * c_tilde * c_tilde / sigma_sq;
}

// Exact (sharp) inequality: the delta = 0 case of kappa_condition.
template <typename Scalar>
bool kappa_exact_ok(Scalar kappa, Scalar beta, Scalar sigma_sq, Scalar v,
                    Scalar c_tilde) {
  return kappa_condition(kappa, beta, Scalar(0), sigma_sq, v, c_tilde);
}

}  // namespace ewa
