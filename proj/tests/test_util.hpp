#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace ewa::test {

// Test-side generator; independent of the library's counter RNG.
struct Gen {
  explicit Gen(std::uint64_t seed) : engine(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine);
  }
  Eigen::VectorXd gauss(Eigen::Index n) {
    std::normal_distribution<double> nd;
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(engine);
    return v;
  }
  Eigen::VectorXd probability(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(0.01, 1.0);
    return v / v.sum();
  }
  Eigen::MatrixXd orthonormal(Eigen::Index n) {
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) g.col(j) = gauss(n);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  }

  std::mt19937_64 engine;
};

}  // namespace ewa::test
