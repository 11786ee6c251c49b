#pragma once

// Synthetic linear-Gaussian inverse problems: random priors, the masked noisy
// measurement model y = Mx + w, its exact posterior, and the closed-form
// Wasserstein-2 distance between Gaussians.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pcagan/errors.hpp"
#include "pcagan/rng.hpp"

namespace pcagan {

using Index = Eigen::Index;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Eigenvalues below -kPsdTolerance * max|eigenvalue| are modeling errors, not roundoff.
inline constexpr double kPsdTolerance = 1e-8;

template <typename Scalar>
Scalar symmetry_error(const Mat<Scalar>& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
template <typename Scalar>
struct SymmetricEigen {
  Vec<Scalar> values;
  Mat<Scalar> vectors;

  explicit SymmetricEigen(const Mat<Scalar>& m) {
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(m);
    if (solver.info() != Eigen::Success) throw NumericalFailure("symmetric eigendecomposition failed");
    values = solver.eigenvalues().reverse();
    vectors = solver.eigenvectors().rowwise().reverse();
  }
};

/// Principal square root of a PSD matrix; negative eigenvalues are clamped to zero.
template <typename Scalar>
Mat<Scalar> sqrtm_psd(const SymmetricEigen<Scalar>& eig) {
  const Vec<Scalar> root = eig.values.cwiseMax(Scalar(0)).cwiseSqrt();
  return eig.vectors * root.asDiagonal() * eig.vectors.transpose();
}

template <typename Scalar>
Mat<Scalar> sqrtm_psd(const Mat<Scalar>& m) {
  return sqrtm_psd(SymmetricEigen<Scalar>(m));
}

// ---------------------------------------------------------------------------

template <typename Scalar>
struct GaussianPrior {
  Vec<Scalar> mean;
  Vec<Scalar> eigvals;  // descending, >= 0
  Mat<Scalar> eigvecs;  // orthonormal columns, paired with eigvals

  Index dim() const { return mean.size(); }

  Mat<Scalar> covariance() const { return eigvecs * eigvals.asDiagonal() * eigvecs.transpose(); }

  /// Σ^{1/2} = V diag(√λ) Vᵀ.
  Mat<Scalar> covariance_sqrt() const {
    return eigvecs * eigvals.cwiseSqrt().asDiagonal() * eigvecs.transpose();
  }

  /// Throws InvalidArgument if any structural invariant is violated.
  void validate(Scalar tol = Scalar(1e-10)) const {
    const Index d = dim();
    require(d > 0, "prior dimension must be positive");
    require(eigvals.size() == d && eigvecs.rows() == d && eigvecs.cols() == d, "prior shape mismatch");
    for (Index k = 0; k < d; ++k) {
      require(eigvals(k) >= Scalar(0), "prior eigenvalues must be nonnegative");
      if (k > 0) require(eigvals(k) <= eigvals(k - 1), "prior eigenvalues must be sorted descending");
    }
    const Scalar ortho = (eigvecs.transpose() * eigvecs - Mat<Scalar>::Identity(d, d)).norm();
    require(ortho < tol, "prior eigenvectors are not orthonormal");
  }
};

/// Reorders (λ, v) pairs so eigenvalues are descending. Ties keep generation order.
template <typename Scalar>
void sort_descending(Vec<Scalar>& eigvals, Mat<Scalar>& eigvecs) {
  std::vector<Index> order(static_cast<std::size_t>(eigvals.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return eigvals(a) > eigvals(b); });
  Vec<Scalar> values(eigvals.size());
  Mat<Scalar> vectors(eigvecs.rows(), eigvecs.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    values(static_cast<Index>(i)) = eigvals(order[i]);
    vectors.col(static_cast<Index>(i)) = eigvecs.col(order[i]);
  }
  eigvals = std::move(values);
  eigvecs = std::move(vectors);
}

/// Orthonormal Q factor of a square matrix (Householder QR).
template <typename Scalar>
Mat<Scalar> qr_orthonormal(const Mat<Scalar>& m) {
  Eigen::HouseholderQR<Mat<Scalar>> qr(m);
  return qr.householderQ() * Mat<Scalar>::Identity(m.rows(), m.cols());
}

/// Priors for d = 10, 20, ..., d_max. The d_max prior draws mean ~ N(0, I),
/// half-normal eigenvalues and QR eigenvectors; each smaller prior truncates
/// the mean, the leading eigenvalues and the leading block of the d_max
/// eigenvectors, then re-orthonormalizes by QR. Entry i has dimension 10(i+1).
template <typename Scalar = double>
std::vector<GaussianPrior<Scalar>> make_prior_chain(Index d_max, std::uint64_t seed) {
  if (d_max <= 0 || d_max % 10 != 0)
    throw InvalidArgument("d_max must be a positive multiple of 10, got " + std::to_string(d_max));

  RngStream rng(seed, StreamTag::kPrior);
  const Vec<Scalar> mean = rng.normal_vector<Scalar>(d_max);
  const Vec<Scalar> eigvals = rng.normal_vector<Scalar>(d_max).cwiseAbs();
  const Mat<Scalar> top_vecs = qr_orthonormal<Scalar>(rng.normal_matrix<Scalar>(d_max, d_max));

  std::vector<GaussianPrior<Scalar>> chain(static_cast<std::size_t>(d_max / 10));
  for (Index d = d_max; d >= 10; d -= 10) {
    GaussianPrior<Scalar> prior;
    prior.mean = mean.head(d);
    prior.eigvals = eigvals.head(d);
    prior.eigvecs = d == d_max ? top_vecs : qr_orthonormal<Scalar>(top_vecs.topLeftCorner(d, d));
    sort_descending(prior.eigvals, prior.eigvecs);
    chain[static_cast<std::size_t>(d / 10 - 1)] = std::move(prior);
  }
  return chain;
}

/// A single prior at any d, drawn like the top of a chain.
template <typename Scalar = double>
GaussianPrior<Scalar> make_prior(Index d, std::uint64_t seed) {
  require(d > 0, "prior dimension must be positive");
  RngStream rng(seed, StreamTag::kPrior);
  GaussianPrior<Scalar> prior;
  prior.mean = rng.normal_vector<Scalar>(d);
  prior.eigvals = rng.normal_vector<Scalar>(d).cwiseAbs();
  prior.eigvecs = qr_orthonormal<Scalar>(rng.normal_matrix<Scalar>(d, d));
  sort_descending(prior.eigvals, prior.eigvecs);
  return prior;
}

// ---------------------------------------------------------------------------

/// Which indices "even" refers to when masking.
enum class MaskConvention { kZeroBasedEven, kOneBasedEven };

template <typename Scalar>
struct MeasurementModel {
  Eigen::Array<bool, Eigen::Dynamic, 1> mask;  // true = observed
  Scalar noise_var = Scalar(1e-3);

  Index dim() const { return mask.size(); }

  Vec<Scalar> mask_diagonal() const { return mask.template cast<Scalar>().matrix(); }

  void validate() const {
    require(dim() > 0, "measurement dimension must be positive");
    require(noise_var > Scalar(0) && std::isfinite(static_cast<double>(noise_var)), "noise variance must be positive");
  }

  /// Zeros the even entries of x; the index base is selectable.
  static MeasurementModel masked_even(Index d, Scalar noise_var,
                                      MaskConvention convention = MaskConvention::kZeroBasedEven) {
    MeasurementModel mm;
    mm.mask.resize(d);
    const Index first_masked = convention == MaskConvention::kZeroBasedEven ? 0 : 1;
    for (Index i = 0; i < d; ++i) mm.mask(i) = (i % 2) != first_masked;
    mm.noise_var = noise_var;
    mm.validate();
    return mm;
  }

  static MeasurementModel identity(Index d, Scalar noise_var) {
    MeasurementModel mm;
    mm.mask = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(d, true);
    mm.noise_var = noise_var;
    mm.validate();
    return mm;
  }
};

/// Draws x from the prior, then y = Mx + w, w ~ N(0, σ²I). Consumes 2d normals.
template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> sample_pair(const GaussianPrior<Scalar>& prior,
                                                const MeasurementModel<Scalar>& mm, RngStream& rng) {
  require(prior.dim() == mm.dim(), "prior and measurement model dimensions differ");
  const Index d = prior.dim();
  const Vec<Scalar> xi = rng.normal_vector<Scalar>(d);
  Vec<Scalar> x = prior.mean + prior.eigvecs * (prior.eigvals.cwiseSqrt().cwiseProduct(xi));
  const Vec<Scalar> w = rng.normal_vector<Scalar>(d) * std::sqrt(mm.noise_var);
  Vec<Scalar> y = mm.mask_diagonal().cwiseProduct(x) + w;
  return {std::move(x), std::move(y)};
}

// ---------------------------------------------------------------------------

/// Gaussian with validated symmetric PSD covariance and its cached eigendecomposition.
template <typename Scalar>
class GaussianDist {
 public:
  GaussianDist(Vec<Scalar> mean, Mat<Scalar> cov) : mean_(std::move(mean)), cov_(std::move(cov)), eig_(init()) {}

  const Vec<Scalar>& mean() const { return mean_; }
  const Mat<Scalar>& cov() const { return cov_; }
  const SymmetricEigen<Scalar>& eigen() const { return eig_; }
  Index dim() const { return mean_.size(); }

  const Mat<Scalar>& cov_sqrt() const { return sqrt_; }

 private:
  SymmetricEigen<Scalar> init() {
    require(cov_.rows() == mean_.size() && cov_.cols() == mean_.size(), "covariance shape does not match mean");
    require(mean_.allFinite() && cov_.allFinite(), "Gaussian parameters must be finite");
    const Scalar scale = std::max(Scalar(1), cov_.cwiseAbs().maxCoeff());
    require(symmetry_error(cov_) <= Scalar(1e-10) * scale, "covariance is not symmetric");
    cov_ = Scalar(0.5) * (cov_ + cov_.transpose()).eval();
    SymmetricEigen<Scalar> eig(cov_);
    const Scalar top = eig.values.size() ? eig.values.cwiseAbs().maxCoeff() : Scalar(0);
    if (eig.values.size() && eig.values.minCoeff() < Scalar(0)) {
      if (eig.values.minCoeff() < -Scalar(kPsdTolerance) * top) {
        std::ostringstream msg;
        msg << "covariance is not PSD: smallest eigenvalue " << eig.values.minCoeff() << " vs largest " << top;
        throw InvalidArgument(msg.str());
      }
      eig.values = eig.values.cwiseMax(Scalar(0));
      cov_ = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
    }
    sqrt_ = sqrtm_psd(eig);
    return eig;
  }

  Vec<Scalar> mean_;
  Mat<Scalar> cov_;
  Mat<Scalar> sqrt_;
  SymmetricEigen<Scalar> eig_;
};

/// Exact posterior of the linear-Gaussian model. The covariance does not
/// depend on y, so it and the gain Σ_xy Σ_y⁻¹ are computed once.
template <typename Scalar>
class LinearGaussianPosterior {
 public:
  LinearGaussianPosterior(const GaussianPrior<Scalar>& prior, const MeasurementModel<Scalar>& mm)
      : prior_mean_(prior.mean), mask_(mm.mask_diagonal()) {
    require(prior.dim() == mm.dim(), "prior and measurement model dimensions differ");
    mm.validate();
    const Index d = prior.dim();
    const Mat<Scalar> sigma_x = prior.covariance();
    const Mat<Scalar> sigma_xy = sigma_x * mask_.asDiagonal();  // Σ_x Mᵀ
    Mat<Scalar> sigma_y = mask_.asDiagonal() * sigma_xy;
    sigma_y.diagonal().array() += mm.noise_var;

    Eigen::LLT<Mat<Scalar>> llt(sigma_y);
    const Scalar rcond = llt.info() == Eigen::Success ? llt.rcond() : Scalar(0);
    if (llt.info() != Eigen::Success || !(rcond > std::numeric_limits<Scalar>::epsilon())) {
      const SymmetricEigen<Scalar> eig(sigma_y);
      std::ostringstream msg;
      msg << "measurement covariance is numerically singular (condition number ~ "
          << eig.values(0) / std::max(eig.values(d - 1), std::numeric_limits<Scalar>::min()) << ")";
      throw NumericalFailure(msg.str());
    }
    // gain = Σ_xy Σ_y⁻¹ = (Σ_y⁻¹ Σ_yx)ᵀ
    gain_ = llt.solve(sigma_xy.transpose()).transpose();
    Mat<Scalar> cov = sigma_x - gain_ * sigma_xy.transpose();
    cov = Scalar(0.5) * (cov + cov.transpose()).eval();
    cov_ = std::move(cov);
    offset_ = prior_mean_ - gain_ * mask_.cwiseProduct(prior_mean_);
  }

  /// μ_{x|y} = μ_x + G (y − Mμ_x).
  Vec<Scalar> mean(const Vec<Scalar>& y) const {
    require(y.size() == prior_mean_.size(), "measurement has wrong dimension");
    return offset_ + gain_ * y;
  }

  const Mat<Scalar>& covariance() const { return cov_; }
  const Mat<Scalar>& gain() const { return gain_; }
  /// μ_{x|y} = gain·y + offset.
  const Vec<Scalar>& offset() const { return offset_; }

  GaussianDist<Scalar> at(const Vec<Scalar>& y) const { return GaussianDist<Scalar>(mean(y), cov_); }

 private:
  Vec<Scalar> prior_mean_;
  Vec<Scalar> mask_;
  Mat<Scalar> gain_;
  Mat<Scalar> cov_;
  Vec<Scalar> offset_;
};

template <typename Scalar>
GaussianDist<Scalar> analytic_posterior(const GaussianPrior<Scalar>& prior, const MeasurementModel<Scalar>& mm,
                                        const Vec<Scalar>& y) {
  return LinearGaussianPosterior<Scalar>(prior, mm).at(y);
}

// ---------------------------------------------------------------------------

/// tr[(A^{1/2} B A^{1/2})^{1/2}] given A^{1/2}.
template <typename Scalar>
Scalar trace_sqrt_product(const Mat<Scalar>& sqrt_a, const Mat<Scalar>& cov_b) {
  Mat<Scalar> inner = sqrt_a * cov_b * sqrt_a;
  inner = Scalar(0.5) * (inner + inner.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> solver(inner, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalFailure("eigendecomposition failed in W2");
  return solver.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().sum();
}

/// Squared Wasserstein-2 distance between two Gaussians:
/// ‖μa − μb‖² + tr[Σa + Σb − 2(Σa^{1/2} Σb Σa^{1/2})^{1/2}], clamped at 0.
template <typename Scalar>
Scalar w2_gaussian(const GaussianDist<Scalar>& a, const GaussianDist<Scalar>& b) {
  require(a.dim() == b.dim(), "W2 between Gaussians of different dimension");
  const Scalar mean_term = (a.mean() - b.mean()).squaredNorm();
  const Scalar cross = trace_sqrt_product(a.cov_sqrt(), b.cov());
  return std::max(Scalar(0), mean_term + a.cov().trace() + b.cov().trace() - Scalar(2) * cross);
}

}  // namespace pcagan
