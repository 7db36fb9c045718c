#pragma once

// Gibbs (exponential) weights over a finite collection, the aggregate they
// induce, and the discrete KL calculus behind the Gibbs variational identity
//   log E_pi[e^h] = E_rho[h] - KL(rho, pi) + KL(rho, pi_exp(h)).
// Everything is done in the log domain with max-shift normalization.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "ewa/errors.hpp"
#include "ewa/estimators.hpp"

namespace ewa {

template <typename Scalar>
struct WeightVector {
  Vec<Scalar> weights;
  Vec<Scalar> log_weights;  // -inf where the prior vanishes
};

// log sum_i exp(x_i); -inf entries contribute nothing.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = x.maxCoeff();
  if (top == -std::numeric_limits<Scalar>::infinity()) return top;
  // scalar exp: Eigen's packet exp maps -inf to a denormal, not 0
  return top + std::log((x.array() - top)
                            .unaryExpr([](Scalar v) { return std::exp(v); })
                            .sum());
}

namespace detail {

template <typename Scalar>
void check_probability(const Vec<Scalar>& p, const char* what) {
  if ((p.array() < Scalar(0)).any() || !p.allFinite()) {
    throw ValidationError(std::string(what) +
                          " must have finite nonnegative entries");
  }
  if (std::abs(double(p.sum()) - 1.0) > 1e-12) {
    throw ValidationError(std::string(what) + " must sum to 1");
  }
}

template <typename Scalar>
Vec<Scalar> log_of(const Vec<Scalar>& p) {
  Vec<Scalar> out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out[i] = p[i] > Scalar(0) ? std::log(p[i])
                              : -std::numeric_limits<Scalar>::infinity();
  }
  return out;
}

}  // namespace detail

// Normalized prior-tilted weights  w_t  proportional to  prior_t * exp(log_tilt_t).
template <typename Scalar>
WeightVector<Scalar> tilt(const Vec<Scalar>& log_tilt, const Vec<Scalar>& prior) {
  if (log_tilt.size() != prior.size()) {
    throw ValidationError("tilt and prior lengths differ");
  }
  detail::check_probability(prior, "prior");
  if (!log_tilt.allFinite()) throw ValidationError("tilt must be finite");
  const Vec<Scalar> log_prior = detail::log_of(prior);
  Vec<Scalar> unnormalized(prior.size());
  for (Eigen::Index i = 0; i < prior.size(); ++i) {
    unnormalized[i] = prior[i] > Scalar(0)
                          ? log_prior[i] + log_tilt[i]
                          : -std::numeric_limits<Scalar>::infinity();
  }
  const Scalar log_norm = log_sum_exp(unnormalized);
  WeightVector<Scalar> w;
  w.log_weights = unnormalized.array() - log_norm;
  w.weights = w.log_weights.unaryExpr([](Scalar v) { return std::exp(v); });
  return w;
}

// rho_t proportional to pi_t exp(-(r_t + pen_t) / beta).
template <typename Scalar>
WeightVector<Scalar> gibbs_weights(const Vec<Scalar>& penalized_risks,
                                   Scalar beta, const Vec<Scalar>& prior) {
  if (!(beta > Scalar(0)) || !std::isfinite(double(beta))) {
    throw DomainError("temperature must be positive and finite");
  }
  return tilt<Scalar>(-penalized_risks / beta, prior);
}

template <typename Scalar, typename Derived>
Vec<Scalar> aggregate(const WeightVector<Scalar>& w,
                      const EstimatorCollection<Scalar>& coll,
                      const Eigen::MatrixBase<Derived>& y) {
  if (w.weights.size() != static_cast<Eigen::Index>(coll.size())) {
    throw ValidationError("weight vector is not aligned with the collection");
  }
  Vec<Scalar> out = Vec<Scalar>::Zero(coll.n());
  for (std::size_t t = 0; t < coll.size(); ++t) {
    const Scalar wt = w.weights[static_cast<Eigen::Index>(t)];
    if (wt != Scalar(0)) out += wt * coll[t](y);
  }
  return out;
}

// sum_t mu_t log(mu_t / pi_t), with 0 log 0 = 0.
template <typename Scalar>
Scalar kl_divergence(const Vec<Scalar>& mu, const Vec<Scalar>& pi) {
  if (mu.size() != pi.size()) throw ValidationError("KL: lengths differ");
  Scalar kl(0);
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (mu[i] < Scalar(0) || pi[i] < Scalar(0)) {
      throw ValidationError("KL: negative probability");
    }
    if (mu[i] == Scalar(0)) continue;
    if (pi[i] == Scalar(0)) {
      throw DomainError("KL: mu is not absolutely continuous w.r.t. pi at " +
                        std::to_string(i));
    }
    kl += mu[i] * (std::log(mu[i]) - std::log(pi[i]));
  }
  return std::max(kl, Scalar(0));
}

// log E_pi[e^h] - (E_candidate[h] - KL(candidate, pi)), which equals
// KL(candidate, pi_exp(h)) and vanishes at the Gibbs measure.
template <typename Scalar>
Scalar variational_gap(const Vec<Scalar>& h, const Vec<Scalar>& pi,
                       const Vec<Scalar>& candidate) {
  if (h.size() != pi.size() || candidate.size() != pi.size()) {
    throw ValidationError("variational_gap: lengths differ");
  }
  const Scalar kl = kl_divergence(candidate, pi);
  Vec<Scalar> shifted = detail::log_of(pi);
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (pi[i] > Scalar(0)) shifted[i] += h[i];
  }
  Scalar expected_h(0);
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (candidate[i] > Scalar(0)) expected_h += candidate[i] * h[i];
  }
  return log_sum_exp(shifted) - (expected_h - kl);
}

}  // namespace ewa
