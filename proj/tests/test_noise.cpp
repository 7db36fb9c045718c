#include "doctest.h"

#include <cmath>

#include "ewa/errors.hpp"
#include "ewa/noise.hpp"

using namespace ewa;

TEST_CASE("certified sub-Gaussian parameters") {
  CHECK(subgaussian_param(NoiseModel::gaussian(1.0)) == 1.0);
  CHECK(subgaussian_param(NoiseModel::rademacher(2.0)) == 4.0);
  CHECK(subgaussian_param(NoiseModel::uniform(3.0)) == 9.0);
  CHECK(NoiseModel::uniform(3.0).variance() == doctest::Approx(3.0));
  CHECK_THROWS_AS(NoiseModel::gaussian(0.0), ValidationError);
  CHECK_THROWS_AS(NoiseModel::rademacher(-1.0), ValidationError);
  CHECK(parse_noise_kind("uniform") == NoiseKind::uniform_bounded);
  CHECK_THROWS_AS(parse_noise_kind("cauchy"), ValidationError);
}

TEST_CASE("sampling is deterministic given the seed") {
  const auto g = NoiseModel::gaussian(1.0);
  const Eigen::VectorXd a = sample_noise(g, 4, 77);
  const Eigen::VectorXd b = sample_noise(g, 4, 77);
  CHECK(a == b);  // bit-for-bit
  CHECK(a != sample_noise(g, 4, 78));
  CHECK_THROWS_AS(sample_noise(g, 0, 1), ValidationError);
}

TEST_CASE("supports of bounded models") {
  const Eigen::VectorXd r = sample_noise(NoiseModel::rademacher(1.0), 1000, 3);
  CHECK((r.array().abs() == 1.0).all());
  const Eigen::VectorXd u = sample_noise(NoiseModel::uniform(2.0), 1000, 3);
  CHECK((u.array().abs() <= 2.0).all());
}

TEST_CASE("uniform variance a^2/3 over 1e6 draws") {
  const Eigen::VectorXd u = sample_noise(NoiseModel::uniform(2.0), 1000000, 11);
  const double mean = u.mean();
  const double var = (u.array() - mean).square().sum() / (u.size() - 1.0);
  CHECK(std::abs(var - 4.0 / 3.0) <= 0.01 * 4.0 / 3.0);
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("mgf_check closed forms") {
  const Eigen::Index n = 3;
  std::vector<Eigen::VectorXd> dirs{Eigen::VectorXd::Zero(n),
                                    Eigen::VectorXd::Unit(n, 0)};

  SUBCASE("zero direction") {
    const auto rep = mgf_check(NoiseModel::rademacher(1.0), n, dirs, 1000, 1);
    CHECK(rep[0].empirical_mgf == 1.0);
    CHECK(rep[0].bound == 1.0);
    CHECK(rep[0].ok);
  }
  SUBCASE("gaussian e1 sits on the bound") {
    const auto rep = mgf_check(NoiseModel::gaussian(1.0), n, dirs, 1000000, 2);
    CHECK(rep[1].bound == doctest::Approx(std::exp(0.5)));
    CHECK(std::abs(rep[1].empirical_mgf - std::exp(0.5)) <= 4.0 * rep[1].stderr_mgf);
    CHECK(rep[1].ok);
  }
  SUBCASE("rademacher e1 has cosh(1) < exp(1/2) slack") {
    const auto rep = mgf_check(NoiseModel::rademacher(1.0), n, dirs, 1000000, 3);
    // exp(+-1) average: exactly cosh(1) up to sampling of the sign frequency
    CHECK(rep[1].empirical_mgf == doctest::Approx(std::cosh(1.0)).epsilon(2e-3));
    CHECK(rep[1].empirical_mgf < rep[1].bound - 0.1);
    CHECK(rep[1].ok);
  }
}

TEST_CASE("mgf_check rejects long directions") {
  std::vector<Eigen::VectorXd> dirs{Eigen::VectorXd::Constant(2, 1.5)};
  CHECK_THROWS_AS(mgf_check(NoiseModel::gaussian(1.0), 2, dirs, 10, 1),
                  ValidationError);
}

TEST_CASE("random unit directions pass for every model") {
  const auto dirs = random_unit_directions(6, 20, 8);
  for (const auto& d : dirs) CHECK(d.norm() == doctest::Approx(1.0));
  for (const auto& model : {NoiseModel::gaussian(1.5), NoiseModel::rademacher(1.0),
                            NoiseModel::uniform(2.0)}) {
    for (const auto& c : mgf_check(model, 6, dirs, 200000, 21)) CHECK(c.ok);
  }
}
