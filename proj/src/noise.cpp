#include "ewa/noise.hpp"

#include <cmath>

#include "ewa/errors.hpp"
#include "ewa/random.hpp"

namespace ewa {

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian:
      return "gaussian";
    case NoiseKind::rademacher:
      return "rademacher";
    case NoiseKind::uniform_bounded:
      return "uniform";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "rademacher") return NoiseKind::rademacher;
  if (name == "uniform" || name == "uniform_bounded")
    return NoiseKind::uniform_bounded;
  throw ValidationError("unknown noise kind '" + std::string(name) +
                        "' (expected gaussian, rademacher or uniform)");
}

NoiseModel::NoiseModel(NoiseKind kind, double scale)
    : kind_(kind), scale_(scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ValidationError("noise scale must be a positive finite number");
  }
}

double NoiseModel::variance() const {
  switch (kind_) {
    case NoiseKind::gaussian:
    case NoiseKind::rademacher:
      return scale_ * scale_;
    case NoiseKind::uniform_bounded:
      return scale_ * scale_ / 3.0;
  }
  return 0.0;
}

void fill_noise(const NoiseModel& model, CounterRng& rng, Eigen::VectorXd& out) {
  const double a = model.scale();
  switch (model.kind()) {
    case NoiseKind::gaussian:
      for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = a * rng.normal();
      break;
    case NoiseKind::rademacher:
      for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = a * rng.sign();
      break;
    case NoiseKind::uniform_bounded:
      for (Eigen::Index i = 0; i < out.size(); ++i)
        out[i] = a * (2.0 * rng.uniform() - 1.0);
      break;
  }
}

Eigen::VectorXd sample_noise(const NoiseModel& model, Eigen::Index n,
                             std::uint64_t seed) {
  if (n < 1) throw ValidationError("noise length must be at least 1");
  CounterRng rng(seed);
  Eigen::VectorXd w(n);
  fill_noise(model, rng, w);
  return w;
}

std::vector<MgfCheck> mgf_check(const NoiseModel& model, Eigen::Index n,
                                const std::vector<Eigen::VectorXd>& directions,
                                std::size_t samples, std::uint64_t seed) {
  if (samples < 2) throw ValidationError("mgf_check needs at least 2 samples");
  const std::size_t m = directions.size();
  Eigen::MatrixXd alpha(n, static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    if (directions[j].size() != n) {
      throw ValidationError("direction " + std::to_string(j) +
                            " has wrong dimension");
    }
    if (directions[j].norm() > kMaxMgfDirectionNorm) {
      throw ValidationError("direction " + std::to_string(j) +
                            " has norm above 2");
    }
    alpha.col(static_cast<Eigen::Index>(j)) = directions[j];
  }

  CounterRng rng(seed);
  Eigen::VectorXd w(n);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  Eigen::VectorXd sum_sq = sum;
  for (std::size_t s = 0; s < samples; ++s) {
    fill_noise(model, rng, w);
    const Eigen::ArrayXd e = (alpha.transpose() * w).array().exp();
    sum.array() += e;
    sum_sq.array() += e.square();
  }

  const double count = static_cast<double>(samples);
  std::vector<MgfCheck> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double mean = sum[jj] / count;
    const double var =
        std::max(0.0, (sum_sq[jj] - count * mean * mean) / (count - 1.0));
    MgfCheck& c = out[j];
    c.empirical_mgf = mean;
    c.stderr_mgf = std::sqrt(var / count);
    c.bound = std::exp(0.5 * model.sigma_sq() * directions[j].squaredNorm());
    c.ok = c.empirical_mgf <= c.bound + 3.0 * c.stderr_mgf;
  }
  return out;
}

std::vector<Eigen::VectorXd> random_unit_directions(Eigen::Index n,
                                                    std::size_t count,
                                                    std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  while (out.size() < count) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    const double norm = v.norm();
    if (norm > 0.0) out.push_back(v / norm);
  }
  return out;
}

}  // namespace ewa
