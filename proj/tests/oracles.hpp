#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Central differences with step h_i = 1e-5·(1 + |p_i|).
inline VectorXd central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& p) {
  VectorXd g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(p(i)));
    VectorXd plus = p, minus = p;
    plus(i) += h;
    minus(i) -= h;
    g(i) = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

/// Worst per-coordinate relative error, |g − fd| / max(|g|, |fd|, floor).
/// The floor keeps coordinates whose true derivative is zero from dividing
/// roundoff by roundoff.
inline double max_relative_error(const VectorXd& analytic, const VectorXd& numeric, double floor = 1e-3) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / denom);
  }
  return worst;
}

/// Conditions the joint Gaussian of (x, y) on y with a generic LU solve of
/// the Schur complement: joint = [[Σx, Σx Mᵀ], [MΣx, MΣxMᵀ + σ²I]].
inline std::pair<VectorXd, MatrixXd> schur_posterior(const VectorXd& mu_x, const MatrixXd& sigma_x,
                                                     const MatrixXd& m, double noise_var, const VectorXd& y) {
  const Eigen::Index d = mu_x.size();
  MatrixXd joint(2 * d, 2 * d);
  joint.topLeftCorner(d, d) = sigma_x;
  joint.topRightCorner(d, d) = sigma_x * m.transpose();
  joint.bottomLeftCorner(d, d) = m * sigma_x;
  joint.bottomRightCorner(d, d) = m * sigma_x * m.transpose() + noise_var * MatrixXd::Identity(d, d);
  VectorXd joint_mean(2 * d);
  joint_mean << mu_x, m * mu_x;

  Eigen::FullPivLU<MatrixXd> lu(joint.bottomRightCorner(d, d));
  const MatrixXd k = joint.topRightCorner(d, d) * lu.inverse();
  VectorXd mean = joint_mean.head(d) + k * (y - joint_mean.tail(d));
  MatrixXd cov = joint.topLeftCorner(d, d) - k * joint.bottomLeftCorner(d, d);
  return {mean, cov};
}

/// W2² between Gaussians using tr[(Σa^{1/2}ΣbΣa^{1/2})^{1/2}] = Σ √eig(Σa Σb),
/// with the eigenvalues of the (non-symmetric) product from a general solver.
inline double w2_product_eigen(const VectorXd& mu_a, const MatrixXd& sa, const VectorXd& mu_b, const MatrixXd& sb) {
  Eigen::EigenSolver<MatrixXd> es(sa * sb, false);
  double cross = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) cross += std::sqrt(std::max(0.0, es.eigenvalues()(i).real()));
  return (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross;
}

/// Random symmetric PSD matrix G Gᵀ / d (full rank with probability 1).
template <typename Rng>
MatrixXd random_psd(Eigen::Index d, Rng& rng) {
  const MatrixXd g = rng.template normal_matrix<double>(d, d);
  return g * g.transpose() / static_cast<double>(d);
}

}  // namespace oracle
