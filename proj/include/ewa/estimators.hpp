#pragma once

// Smoothed-projection linear estimators  f_t(Y) = B diag(rho) B^T Y  and finite
// collections of them with a prior.
//
// An estimator is stored as an orthonormal basis plus its nonnegative
// shrinkage coefficients, never as the dense matrix: trace, squared trace and
// spectral norm are then exact sums/maxima of the coefficients, and applying
// the estimator costs two matrix-vector products.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ewa/errors.hpp"
#include "ewa/random.hpp"

namespace ewa {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kOrthonormalityTol = 1e-10;
inline constexpr std::size_t kDefaultMaxGridSize = 2048;

template <typename Scalar>
struct TraceStats {
  Scalar tr{0};       // tr(P)
  Scalar tr_sq{0};    // tr(P^2)
  Scalar spec_norm{0};  // ||P||_2
};

// An n x n matrix with orthonormal columns, checked once on construction and
// shared (immutably) between all estimators built on it.
template <typename Scalar>
class OrthonormalBasis {
 public:
  explicit OrthonormalBasis(Mat<Scalar> columns)
      : columns_(std::make_shared<const Mat<Scalar>>(std::move(columns))) {
    const Mat<Scalar>& b = *columns_;
    if (b.rows() != b.cols()) {
      throw ValidationError("basis must be square, got " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
    }
    if (b.rows() == 0) throw ValidationError("basis is empty");
    const Mat<Scalar> gram = b.transpose() * b;
    const Scalar deviation =
        (gram - Mat<Scalar>::Identity(gram.rows(), gram.cols()))
            .cwiseAbs()
            .maxCoeff();
    if (!(deviation <= Scalar(kOrthonormalityTol))) {
      throw ValidationError("basis is not orthonormal: max |B^T B - I| = " +
                            std::to_string(double(deviation)));
    }
  }

  [[nodiscard]] Eigen::Index dim() const { return columns_->rows(); }
  [[nodiscard]] const Mat<Scalar>& matrix() const { return *columns_; }

 private:
  std::shared_ptr<const Mat<Scalar>> columns_;
};

template <typename Scalar>
class LinearEstimator {
 public:
  LinearEstimator(OrthonormalBasis<Scalar> basis, Vec<Scalar> shrink,
                  std::string label)
      : basis_(std::move(basis)),
        shrink_(std::move(shrink)),
        label_(std::move(label)) {
    if (shrink_.size() != basis_.dim()) {
      throw ValidationError("shrink has length " +
                            std::to_string(shrink_.size()) + ", basis has " +
                            std::to_string(basis_.dim()) + " columns");
    }
    for (Eigen::Index i = 0; i < shrink_.size(); ++i) {
      if (!(shrink_[i] >= Scalar(0)) || !std::isfinite(double(shrink_[i]))) {
        throw ValidationError("shrink[" + std::to_string(i) +
                              "] must be a finite nonnegative number");
      }
    }
  }

  [[nodiscard]] Eigen::Index dim() const { return basis_.dim(); }
  [[nodiscard]] const Mat<Scalar>& basis() const { return basis_.matrix(); }
  [[nodiscard]] const Vec<Scalar>& shrink() const { return shrink_; }
  [[nodiscard]] const std::string& label() const { return label_; }

  [[nodiscard]] TraceStats<Scalar> stats() const {
    return {shrink_.sum(), shrink_.squaredNorm(), shrink_.maxCoeff()};
  }

  // True when every coefficient is 0 or 1, i.e. P is an orthogonal projection.
  [[nodiscard]] bool is_projection(Scalar tol = Scalar(1e-12)) const {
    return (shrink_.array().abs() <= tol ||
            (shrink_.array() - Scalar(1)).abs() <= tol)
        .all();
  }

  template <typename Derived>
  [[nodiscard]] Vec<Scalar> operator()(const Eigen::MatrixBase<Derived>& y) const {
    if (y.size() != dim()) {
      throw ValidationError("dimension mismatch: estimator has n=" +
                            std::to_string(dim()) + ", vector has " +
                            std::to_string(y.size()));
    }
    const Mat<Scalar>& b = basis();
    return b * shrink_.cwiseProduct(b.transpose() * y);
  }

  // Dense B diag(rho) B^T; for cross-checks only.
  [[nodiscard]] Mat<Scalar> dense() const {
    const Mat<Scalar>& b = basis();
    return b * shrink_.asDiagonal() * b.transpose();
  }

 private:
  OrthonormalBasis<Scalar> basis_;
  Vec<Scalar> shrink_;
  std::string label_;
};

template <typename Scalar>
LinearEstimator<Scalar> make_smoothed_projection(OrthonormalBasis<Scalar> basis,
                                                 Vec<Scalar> shrink,
                                                 std::string label) {
  return LinearEstimator<Scalar>(std::move(basis), std::move(shrink),
                                 std::move(label));
}

// Projection onto the span of the first k basis columns.
template <typename Scalar>
LinearEstimator<Scalar> make_rank_projection(OrthonormalBasis<Scalar> basis,
                                             Eigen::Index k, std::string label) {
  const Eigen::Index n = basis.dim();
  if (k < 0 || k > n) {
    throw ValidationError("projection rank " + std::to_string(k) +
                          " outside [0, " + std::to_string(n) + "]");
  }
  Vec<Scalar> shrink = Vec<Scalar>::Zero(n);
  shrink.head(k).setOnes();
  return LinearEstimator<Scalar>(std::move(basis), std::move(shrink),
                                 std::move(label));
}

template <typename Scalar>
TraceStats<Scalar> trace_stats(const LinearEstimator<Scalar>& est) {
  return est.stats();
}

template <typename Scalar, typename Derived>
Vec<Scalar> apply(const LinearEstimator<Scalar>& est,
                  const Eigen::MatrixBase<Derived>& y) {
  return est(y);
}

// ---------------------------------------------------------------------------
// Basis generators

template <typename Scalar>
Mat<Scalar> standard_basis(Eigen::Index n) {
  return Mat<Scalar>::Identity(n, n);
}

// Orthonormal DCT-II basis; column k oscillates with frequency k/2 over the
// grid, so column order runs from smooth to rough.
template <typename Scalar>
Mat<Scalar> cosine_basis(Eigen::Index n) {
  Mat<Scalar> basis(n, n);
  const double nd = static_cast<double>(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd);
    for (Eigen::Index i = 0; i < n; ++i) {
      basis(i, k) = Scalar(
          scale * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                           static_cast<double>(k) / nd));
    }
  }
  return basis;
}

// Q factor of a seeded Gaussian matrix, with signs fixed so that R has a
// positive diagonal (the Haar-distributed choice).
template <typename Scalar>
Mat<Scalar> random_orthonormal_basis(Eigen::Index n, std::uint64_t seed) {
  CounterRng rng(seed);
  Mat<Scalar> gauss(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) gauss(i, j) = Scalar(rng.normal());
  Eigen::HouseholderQR<Mat<Scalar>> qr(gauss);
  Mat<Scalar> q = qr.householderQ() * Mat<Scalar>::Identity(n, n);
  const Mat<Scalar>& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < Scalar(0)) q.col(j) = -q.col(j);
  }
  return q;
}

// ---------------------------------------------------------------------------
// Collections

template <typename Scalar>
class EstimatorCollection {
 public:
  EstimatorCollection(std::vector<LinearEstimator<Scalar>> items,
                      Vec<Scalar> prior, Scalar v_bound,
                      std::size_t max_grid_size = kDefaultMaxGridSize)
      : items_(std::move(items)), prior_(std::move(prior)), v_bound_(v_bound) {
    if (items_.empty()) throw ValidationError("collection is empty");
    n_ = items_.front().dim();
    if (static_cast<std::size_t>(n_) > max_grid_size) {
      throw ValidationError("grid size " + std::to_string(n_) +
                            " exceeds the configured maximum " +
                            std::to_string(max_grid_size));
    }
    for (std::size_t t = 0; t < items_.size(); ++t) {
      if (items_[t].dim() != n_) {
        throw ValidationError("estimator " + std::to_string(t) +
                              " has dimension " +
                              std::to_string(items_[t].dim()) + ", expected " +
                              std::to_string(n_));
      }
      stats_.push_back(items_[t].stats());
    }
    if (prior_.size() != static_cast<Eigen::Index>(items_.size())) {
      throw ValidationError("prior has length " + std::to_string(prior_.size()) +
                            ", collection has " +
                            std::to_string(items_.size()) + " items");
    }
    if ((prior_.array() < Scalar(0)).any() || !prior_.allFinite()) {
      throw ValidationError("prior entries must be finite and nonnegative");
    }
    if (std::abs(double(prior_.sum()) - 1.0) > 1e-12) {
      throw ValidationError("prior must sum to 1, sums to " +
                            std::to_string(double(prior_.sum())));
    }
    if (!(v_bound_ >= Scalar(0.5))) {
      throw ValidationError("V must be at least 0.5");
    }
    if (max_spec_norm() > v_bound_) {
      throw ValidationError("V = " + std::to_string(double(v_bound_)) +
                            " is below the largest spectral norm " +
                            std::to_string(double(max_spec_norm())));
    }
  }

  // Uniform prior, V = max(0.5, largest spectral norm).
  static EstimatorCollection uniform(std::vector<LinearEstimator<Scalar>> items) {
    Scalar v(0.5);
    for (const auto& e : items) v = std::max(v, e.stats().spec_norm);
    Vec<Scalar> prior = uniform_prior(items.size());
    return EstimatorCollection(std::move(items), std::move(prior), v);
  }

  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] Eigen::Index n() const { return n_; }
  [[nodiscard]] const LinearEstimator<Scalar>& operator[](std::size_t t) const {
    return items_[t];
  }
  [[nodiscard]] const std::vector<LinearEstimator<Scalar>>& items() const {
    return items_;
  }
  [[nodiscard]] const Vec<Scalar>& prior() const { return prior_; }
  [[nodiscard]] Scalar v_bound() const { return v_bound_; }
  [[nodiscard]] const TraceStats<Scalar>& stats(std::size_t t) const {
    return stats_[t];
  }

  [[nodiscard]] Scalar max_spec_norm() const {
    Scalar m(0);
    for (const auto& s : stats_) m = std::max(m, s.spec_norm);
    return m;
  }

  [[nodiscard]] bool all_projections() const {
    return std::all_of(items_.begin(), items_.end(),
                       [](const auto& e) { return e.is_projection(); });
  }

  static Vec<Scalar> uniform_prior(std::size_t m) {
    if (m == 0) throw ValidationError("collection is empty");
    return Vec<Scalar>::Constant(static_cast<Eigen::Index>(m),
                                 Scalar(1) / Scalar(m));
  }

 private:
  std::vector<LinearEstimator<Scalar>> items_;
  Vec<Scalar> prior_;
  Scalar v_bound_;
  Eigen::Index n_ = 0;
  std::vector<TraceStats<Scalar>> stats_;
};

// Projections of the given ranks, all in the same basis (nested when ranks
// are increasing).
template <typename Scalar>
std::vector<LinearEstimator<Scalar>> nested_projections(
    const OrthonormalBasis<Scalar>& basis,
    const std::vector<Eigen::Index>& ranks) {
  std::vector<LinearEstimator<Scalar>> out;
  out.reserve(ranks.size());
  for (Eigen::Index k : ranks) {
    out.push_back(make_rank_projection<Scalar>(basis, k, "proj" + std::to_string(k)));
  }
  return out;
}

// Linear taper rho_i = (1 - i/k)_+ over the basis order, one estimator per k.
template <typename Scalar>
std::vector<LinearEstimator<Scalar>> taper_family(
    const OrthonormalBasis<Scalar>& basis,
    const std::vector<Eigen::Index>& widths) {
  std::vector<LinearEstimator<Scalar>> out;
  const Eigen::Index n = basis.dim();
  for (Eigen::Index k : widths) {
    if (k <= 0) throw ValidationError("taper width must be positive");
    Vec<Scalar> shrink(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      shrink[i] = std::max(Scalar(0), Scalar(1) - Scalar(i) / Scalar(k));
    }
    out.push_back(make_smoothed_projection<Scalar>(basis, std::move(shrink),
                                                   "taper" + std::to_string(k)));
  }
  return out;
}

// 1, 2, 4, ..., up to and including n (n itself appended if not a power of 2).
inline std::vector<Eigen::Index> dyadic_ranks(Eigen::Index n) {
  std::vector<Eigen::Index> ranks;
  for (Eigen::Index k = 1; k < n; k *= 2) ranks.push_back(k);
  ranks.push_back(n);
  return ranks;
}

}  // namespace ewa
