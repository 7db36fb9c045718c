#include "doctest.h"

#include <cmath>
#include <numbers>

#include "ewa/harness.hpp"
#include "ewa/random.hpp"
#include "test_util.hpp"

using namespace ewa;
using Basis = OrthonormalBasis<double>;

namespace {

Config reference_config() {
  Config c;
  c.beta = 20.0;
  c.delta = 1.0;
  c.eta = 0.05;
  c.sigma_sq = 1.0;
  c.v_bound = 1.0;
  return c;
}

SignalSpec reference_signal() { return SignalSpec::sinusoid(2.0, 3.0); }

}  // namespace

TEST_CASE("signals") {
  CHECK(SignalSpec::zero().evaluate(5).isZero(0.0));
  const auto s = SignalSpec::sinusoid(2.0, 1.0).evaluate(4);
  // x = 1/4, 1/2, 3/4, 1
  CHECK(s[0] == doctest::Approx(2.0));
  CHECK(std::abs(s[1]) <= 1e-15);
  CHECK(s[2] == doctest::Approx(-2.0));
  CHECK(std::abs(s[3]) <= 1e-15);

  const auto ph = SignalSpec::sinusoid(1.0, 1.0, std::numbers::pi / 2).evaluate(4);
  CHECK(ph[3] == doctest::Approx(1.0));

  const auto m = SignalSpec::mix({{1.0, 1.0, 0.0}, {0.5, 2.0, 0.0}}).evaluate(8);
  for (Eigen::Index i = 0; i < 8; ++i) {
    const double x = (i + 1) / 8.0;
    CHECK(m[i] == doctest::Approx(std::sin(2 * std::numbers::pi * x) +
                                  0.5 * std::sin(4 * std::numbers::pi * x)));
  }

  const auto st = SignalSpec::step(3.0, 0.5).evaluate(4);
  CHECK(st == Eigen::Vector4d(0.0, 3.0, 3.0, 3.0));

  CHECK(SignalSpec::custom({1, 2, 3}).evaluate(3) == Eigen::Vector3d(1, 2, 3));
  CHECK_THROWS_AS((void)SignalSpec::custom({1, 2}).evaluate(3), ValidationError);
  CHECK_THROWS_AS((void)SignalSpec::zero().evaluate(0), ValidationError);
  CHECK(parse_signal_kind(to_string(SignalKind::mix)) == SignalKind::mix);
  CHECK_THROWS_AS(parse_signal_kind("square"), ValidationError);
}

TEST_CASE("a single estimator always satisfies the bound") {
  const Basis b(cosine_basis<double>(16));
  auto coll = Collection::uniform({make_rank_projection<double>(b, 4, "p4")});
  const Scenario sc(reference_signal(), coll, NoiseModel::gaussian(1.0),
                    reference_config());
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const TrialResult r = sc.run_trial(seed);
    CHECK(r.per_t[0].weight == 1.0);
    CHECK(r.lhs == doctest::Approx(r.per_t[0].risk).epsilon(1e-14));
    CHECK(r.holds);
    CHECK(r.rhs == doctest::Approx(r.risk_term + r.pen_total + r.price_total +
                                   r.kl_term)
                       .epsilon(1e-12));
  }
}

TEST_CASE("zero signal and zero estimator give zero loss") {
  const Basis b(standard_basis<double>(8));
  auto coll = Collection::uniform({make_rank_projection<double>(b, 0, "zero"),
                                   make_rank_projection<double>(b, 8, "id")});
  Config cfg = reference_config();
  const Scenario sc(SignalSpec::zero(), coll, NoiseModel::gaussian(1.0), cfg);
  CHECK(sc.c_tilde() == 0.0);
  const TrialResult r = sc.run_trial(3);
  CHECK(r.per_t[0].risk == 0.0);
  CHECK(r.holds);
  CHECK(r.rhs >= 0.0);
}

TEST_CASE("trials are deterministic in the seed") {
  const Scenario sc(reference_signal(), dyadic_cosine_projections(64),
                    NoiseModel::gaussian(1.0), reference_config());
  const TrialResult a = sc.run_trial(42);
  const TrialResult b = run_trial(reference_signal(), dyadic_cosine_projections(64),
                                  NoiseModel::gaussian(1.0), reference_config(), 42);
  CHECK(a == b);
  CHECK_FALSE(a == sc.run_trial(43));
  CHECK(a.per_t.size() == 7);
  double wsum = 0.0;
  for (const auto& e : a.per_t) wsum += e.weight;
  CHECK(wsum == doctest::Approx(1.0));
  REQUIRE(a.nu_star.has_value());
  CHECK(a.gamma == doctest::Approx(0.5));
}

TEST_CASE("run_experiment") {
  const Scenario sc(reference_signal(), dyadic_cosine_projections(64),
                    NoiseModel::gaussian(1.0), reference_config());
  const ExperimentReport one = run_experiment(sc, 1, 9, 1);
  REQUIRE(one.trials.size() == 1);
  CHECK(one.trials[0] == sc.run_trial(derive_seed(9, 0)));
  CHECK(one.mean_lhs == one.trials[0].lhs);
  CHECK(one.stderr_lhs == 0.0);

  const ExperimentReport serial = run_experiment(sc, 64, 11, 1);
  const ExperimentReport parallel = run_experiment(sc, 64, 11, 4);
  CHECK(serial == parallel);
  CHECK(serial.target == doctest::Approx(0.95));
  CHECK(serial.empirical_coverage >= serial.target);
  CHECK(serial.expectation_ok());
  CHECK_THROWS_AS(run_experiment(sc, 0, 1), ValidationError);
}

TEST_CASE("coverage is monotone in eta over fixed seeds") {
  std::size_t last = 0;
  const Collection coll = dyadic_cosine_projections(32);
  for (double eta : {0.9, 0.5, 0.2, 0.05, 0.01}) {
    Config cfg = reference_config();
    cfg.eta = eta;
    cfg.beta = 20.0;
    const Scenario sc(SignalSpec::step(2.0, 0.3), coll, NoiseModel::gaussian(1.0), cfg);
    const auto rep = run_experiment(sc, 100, 5);
    CHECK(rep.n_holds >= last);
    last = rep.n_holds;
  }
}

TEST_CASE("deviation inequality degenerate cases") {
  const Collection coll = dyadic_cosine_projections(32);
  const Scenario sc(reference_signal(), coll, NoiseModel::gaussian(1.0),
                    reference_config());
  test::Gen gen(31);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Eigen::VectorXd rho = gen.probability(6);
    const auto d = deviation(sc, rho, rho, seed);
    CHECK(d.lhs == doctest::Approx(0.0).scale(1.0));
    CHECK(d.margin() >= 0.0);
    Eigen::VectorXd dirac = Eigen::VectorXd::Zero(6);
    dirac[static_cast<Eigen::Index>(seed % 6)] = 1.0;
    CHECK(deviation(sc, dirac, dirac, seed).lhs == 0.0);
  }
  CHECK_THROWS_AS(deviation(sc, gen.probability(5), gen.probability(6), 0),
                  ValidationError);
  CHECK_THROWS_AS(deviation(sc, gen.probability(6), gen.probability(6), 0, 0.0),
                  DomainError);
}

TEST_CASE("deviation inequality holds for the Gibbs posterior on most draws") {
  const Collection coll = dyadic_cosine_projections(32);
  for (double delta : {0.0, 1.0}) {
    Config cfg = reference_config();
    cfg.delta = delta;
    cfg.beta = delta == 0.0 ? 8.0 : 20.0;
    const Scenario sc(reference_signal(), coll, NoiseModel::gaussian(1.0), cfg);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(6);
    mu[3] = 1.0;
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      ok += posterior_deviation(sc, mu, derive_seed(77, seed)).margin() >= 0.0;
    }
    CHECK(ok >= 990);
  }
}

TEST_CASE("risk gap: antisymmetry and closed form") {
  test::Gen gen(32);
  const Basis rb(gen.orthonormal(10));
  const Collection coll = Collection::uniform(taper_family(rb, {1, 3, 6, 10}));
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd f0 = gen.gauss(10) * 2.0;
    const Eigen::VectorXd w = gen.gauss(10);
    const double s = gen.uniform(0.5, 2.0);
    const std::size_t t = k % 4, u = (k / 4) % 4;
    const double g = risk_gap(coll, f0, w, t, u, s);
    CHECK(g == doctest::Approx(-risk_gap(coll, f0, w, u, t, s)).epsilon(1e-12));
    const Eigen::MatrixXd d = coll[t].dense() - coll[u].dense();
    const double closed = 2.0 * (w.dot(d * w) + w.dot(d * f0) - s * d.trace());
    CHECK(g == doctest::Approx(closed).epsilon(1e-10).scale(1.0));
  }
  CHECK(risk_gap(coll, gen.gauss(10), gen.gauss(10), 2, 2, 1.0) == 0.0);
}

TEST_CASE("exponential moment checks") {
  const Basis b(cosine_basis<double>(16));
  const Collection coll = Collection::uniform(
      {make_rank_projection<double>(b, 2, "p2"), make_rank_projection<double>(b, 4, "p4"),
       make_rank_projection<double>(b, 0, "zero")});
  Config cfg = reference_config();
  cfg.beta = 8.0;
  cfg.delta = 0.0;
  const NoiseModel g1 = NoiseModel::gaussian(1.0);
  const SignalSpec sig = SignalSpec::sinusoid(1.0, 2.0);

  SUBCASE("t = u gives exactly one") {
    const auto m = exp_moment_check(1, 1, sig, coll, g1, cfg, kMinMomentSamples, 1,
                                    MomentForm::projection_gaussian);
    CHECK(m.empirical == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(m.stderr_mc <= 1e-12);
    CHECK(m.bound >= 1.0);
    CHECK(m.ok);
  }
  SUBCASE("rank 2 against rank 4") {
    for (auto [t, u] : {std::pair{0, 1}, std::pair{1, 0}, std::pair{0, 2}}) {
      const auto m = exp_moment_check(t, u, sig, coll, g1, cfg, 200000, 2,
                                      MomentForm::projection_gaussian);
      CHECK(m.ok);
      CHECK(m.empirical > 0.0);
      const auto gen = exp_moment_check(t, u, sig, coll, g1, cfg, 200000, 2,
                                        MomentForm::general);
      CHECK(gen.ok);
    }
  }
  SUBCASE("general form with delta = 1 and bounded noise") {
    Config c1 = reference_config();
    for (const auto& noise : {NoiseModel::rademacher(1.0), NoiseModel::uniform(1.0)}) {
      const auto m = exp_moment_check(0, 1, sig, coll, noise, c1, 100000, 3,
                                      MomentForm::general);
      CHECK(m.ok);
    }
  }
  CHECK_THROWS_AS(exp_moment_check(0, 1, sig, coll, g1, cfg, 1000, 1,
                                   MomentForm::general),
                  ValidationError);
  CHECK_THROWS_AS(exp_moment_check(0, 5, sig, coll, g1, cfg, kMinMomentSamples, 1,
                                   MomentForm::general),
                  ValidationError);
  CHECK_THROWS_AS(exp_moment_check(0, 1, sig, coll, NoiseModel::rademacher(1.0), cfg,
                                   kMinMomentSamples, 1, MomentForm::projection_gaussian),
                  DomainError);
}

TEST_CASE("scenario validation") {
  const Collection coll = dyadic_cosine_projections(16);
  Config cfg = reference_config();
  CHECK_NOTHROW(Scenario(reference_signal(), coll, NoiseModel::gaussian(1.0), cfg));
  // configured sigma^2 may over-state the noise, never under-state it
  CHECK_NOTHROW(Scenario(reference_signal(), coll, NoiseModel::gaussian(0.5), cfg));
  CHECK_THROWS_AS(Scenario(reference_signal(), coll, NoiseModel::gaussian(1.5), cfg),
                  DomainError);

  Config small_v = cfg;
  small_v.v_bound = 0.5;
  small_v.beta = 40.0;
  const Basis b(standard_basis<double>(4));
  const Collection wide = Collection::uniform(
      {make_smoothed_projection<double>(b, Eigen::Vector4d(2.0, 1.0, 0.0, 0.0), "x")});
  CHECK_THROWS_AS(Scenario(SignalSpec::zero(), wide, NoiseModel::gaussian(1.0), small_v),
                  DomainError);

  Config proj = cfg;
  proj.penalty_rule = PenaltyRule::gaussian_projection;
  proj.beta = 9.0;
  CHECK_NOTHROW(Scenario(reference_signal(), coll, NoiseModel::gaussian(1.0), proj));
  CHECK_THROWS_AS(Scenario(reference_signal(), coll, NoiseModel::rademacher(1.0), proj),
                  DomainError);
  const Collection taper = Collection::uniform(
      taper_family(Basis(cosine_basis<double>(16)), {2, 4}));
  CHECK_THROWS_AS(Scenario(reference_signal(), taper, NoiseModel::gaussian(1.0), proj),
                  DomainError);

  Config cold = cfg;
  cold.beta = 19.0;
  CHECK_THROWS_AS(Scenario(reference_signal(), coll, NoiseModel::gaussian(1.0), cold),
                  DomainError);
}

TEST_CASE("expected risks") {
  const Basis b(standard_basis<double>(4));
  const Collection coll = Collection::uniform(
      {make_rank_projection<double>(b, 2, "p2"), make_rank_projection<double>(b, 4, "id")});
  const Scenario sc(SignalSpec::custom({1, 1, 3, 0}), coll, NoiseModel::uniform(1.0),
                    reference_config());
  const Eigen::VectorXd r = sc.expected_risks();
  CHECK(r[0] == doctest::Approx(9.0 + 2.0 / 3.0));
  CHECK(r[1] == doctest::Approx(4.0 / 3.0));
}
