#pragma once

// Centered sub-Gaussian noise with i.i.d. coordinates and a certified
// parameter sigma^2 such that  E exp(a^T W) <= exp(sigma^2 |a|^2 / 2).

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ewa/random.hpp"

namespace ewa {

enum class NoiseKind { gaussian, rademacher, uniform_bounded };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

class NoiseModel {
 public:
  // scale: standard deviation (gaussian), magnitude a (rademacher, values
  // +-a) or half-width a (uniform on [-a, a]). Must be positive.
  NoiseModel(NoiseKind kind, double scale);

  static NoiseModel gaussian(double sd) { return {NoiseKind::gaussian, sd}; }
  static NoiseModel rademacher(double a) { return {NoiseKind::rademacher, a}; }
  static NoiseModel uniform(double a) { return {NoiseKind::uniform_bounded, a}; }

  [[nodiscard]] NoiseKind kind() const { return kind_; }
  [[nodiscard]] double scale() const { return scale_; }

  // Certified sub-Gaussian parameter. Equals the variance only for the
  // Gaussian model; the bounded models use Hoeffding's a^2.
  [[nodiscard]] double sigma_sq() const { return scale_ * scale_; }

  // Per-coordinate variance of the law.
  [[nodiscard]] double variance() const;

  bool operator==(const NoiseModel&) const = default;

 private:
  NoiseKind kind_;
  double scale_;
};

Eigen::VectorXd sample_noise(const NoiseModel& model, Eigen::Index n,
                             std::uint64_t seed);

// Same as sample_noise but writes into an existing buffer and draws from an
// explicit stream; used by Monte Carlo loops that reuse storage.
void fill_noise(const NoiseModel& model, CounterRng& rng, Eigen::VectorXd& out);

inline double subgaussian_param(const NoiseModel& model) {
  return model.sigma_sq();
}

struct MgfCheck {
  double empirical_mgf = 0.0;
  double stderr_mgf = 0.0;
  double bound = 0.0;
  bool ok = false;
};

inline constexpr double kMaxMgfDirectionNorm = 2.0;

// Empirical E exp(a^T W) per direction against exp(sigma^2 |a|^2 / 2). A
// direction passes unless the estimate exceeds the bound by more than three
// standard errors. All directions share the same noise draws.
std::vector<MgfCheck> mgf_check(const NoiseModel& model, Eigen::Index n,
                                const std::vector<Eigen::VectorXd>& directions,
                                std::size_t samples, std::uint64_t seed);

// Directions drawn uniformly from the unit sphere of R^n.
std::vector<Eigen::VectorXd> random_unit_directions(Eigen::Index n,
                                                    std::size_t count,
                                                    std::uint64_t seed);

}  // namespace ewa
