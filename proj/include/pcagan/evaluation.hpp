#pragma once

// Metrics of a conditional sampler against the exact posterior: empirical
// conditional moments, mean W2, trace ratio, eigen-alignment, REM_K, rMSE and
// conditional FID on raw vectors.

#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcagan/errors.hpp"
#include "pcagan/gaussian_world.hpp"
#include "pcagan/netcore.hpp"
#include "pcagan/regularizers.hpp"
#include "pcagan/rng.hpp"

namespace pcagan {

/// Anything that draws n samples of x given y, as the columns of a d×n matrix.
template <typename S, typename Scalar>
concept ConditionalSampler = requires(const S& s, const Vec<Scalar>& y, Index n, RngStream& rng) {
  { s.draw(y, n, rng) } -> std::convertible_to<Mat<Scalar>>;
};

template <typename Scalar>
struct GeneratorSampler {
  const AffineGenerator<Scalar>& gen;

  Mat<Scalar> draw(const Vec<Scalar>& y, Index n, RngStream& rng) const {
    return gen.sample(y, rng.normal_matrix<Scalar>(gen.code_dim(), n));
  }
};

/// μ_{x|y} + Σ_{x|y}^{1/2} ξ.
template <typename Scalar>
struct ExactPosteriorSampler {
  const LinearGaussianPosterior<Scalar>& posterior;
  Mat<Scalar> root = sqrtm_psd<Scalar>(posterior.covariance());

  Mat<Scalar> draw(const Vec<Scalar>& y, Index n, RngStream& rng) const {
    Mat<Scalar> out = root * rng.normal_matrix<Scalar>(root.rows(), n);
    out.colwise() += posterior.mean(y);
    return out;
  }
};

/// Ignores y and samples the prior.
template <typename Scalar>
struct PriorSampler {
  const GaussianPrior<Scalar>& prior;

  Mat<Scalar> draw(const Vec<Scalar>& /*y*/, Index n, RngStream& rng) const {
    Mat<Scalar> out = prior.covariance_sqrt() * rng.normal_matrix<Scalar>(prior.dim(), n);
    out.colwise() += prior.mean;
    return out;
  }
};

/// Sample mean and unbiased (1/(n−1)) sample covariance.
template <typename Scalar>
GaussianDist<Scalar> sample_moments(const Mat<Scalar>& samples) {
  require(samples.cols() >= 2, "need at least two samples for a covariance");
  const Vec<Scalar> mean = samples.rowwise().mean();
  const Mat<Scalar> centered = samples.colwise() - mean;
  Mat<Scalar> cov = centered * centered.transpose() / static_cast<Scalar>(samples.cols() - 1);
  cov = Scalar(0.5) * (cov + cov.transpose()).eval();
  return GaussianDist<Scalar>(mean, cov);
}

template <typename Scalar, typename S>
  requires ConditionalSampler<S, Scalar>
GaussianDist<Scalar> empirical_stats(const S& sampler, const Vec<Scalar>& y, Index n_samples, RngStream& rng) {
  require(n_samples >= 2, "empirical_stats needs n_samples >= 2");
  return sample_moments<Scalar>(sampler.draw(y, n_samples, rng));
}

template <typename Scalar>
GaussianDist<Scalar> empirical_stats(const AffineGenerator<Scalar>& gen, const Vec<Scalar>& y, Index n_samples,
                                     RngStream& rng) {
  return empirical_stats<Scalar>(GeneratorSampler<Scalar>{gen}, y, n_samples, rng);
}

/// The noise stream used for measurement j of an evaluation set.
inline RngStream eval_stream(std::uint64_t seed, Index j, StreamTag tag = StreamTag::kEvalNoise) {
  return RngStream(seed, tag, {static_cast<std::uint64_t>(j)});
}

template <typename Scalar>
struct W2Result {
  Scalar mean = Scalar(0);
  Vec<Scalar> per_y;  // NaN where the measurement was excluded
  Index failures = 0;
};

/// Fraction of per-y failures above which an evaluation is rejected.
inline constexpr double kMaxFailureFraction = 0.01;

/// W2 between the exact posterior and an empirical Gaussian, reusing the
/// posterior's covariance square root (Σ_{x|y} does not depend on y).
template <typename Scalar>
struct PosteriorW2 {
  const LinearGaussianPosterior<Scalar>& posterior;
  Mat<Scalar> root = sqrtm_psd<Scalar>(posterior.covariance());
  Scalar trace = posterior.covariance().trace();

  Scalar operator()(const Vec<Scalar>& y, const GaussianDist<Scalar>& est) const {
    const Scalar mean_term = (posterior.mean(y) - est.mean()).squaredNorm();
    const Scalar cross = trace_sqrt_product(root, est.cov());
    return std::max(Scalar(0), mean_term + trace + est.cov().trace() - Scalar(2) * cross);
  }
};

template <typename Scalar>
Scalar finish_mean(const Vec<Scalar>& per_y, Index failures, const char* what) {
  const Index n = per_y.size();
  if (static_cast<double>(failures) > kMaxFailureFraction * static_cast<double>(n))
    throw NumericalFailure(std::string(what) + ": " + std::to_string(failures) + " of " + std::to_string(n) +
                           " measurements failed");
  Scalar sum = Scalar(0);
  for (Index j = 0; j < n; ++j)
    if (!std::isnan(static_cast<double>(per_y(j)))) sum += per_y(j);
  return sum / static_cast<Scalar>(n - failures);
}

/// Mean over the columns of ys of W2(posterior at y, empirical moments of n samples).
template <typename Scalar, typename S>
  requires ConditionalSampler<S, Scalar>
W2Result<Scalar> eval_w2(const S& sampler, const LinearGaussianPosterior<Scalar>& posterior, const Mat<Scalar>& ys,
                         Index n_samples, std::uint64_t seed) {
  require(ys.cols() > 0, "eval_w2 needs a non-empty measurement set");
  const PosteriorW2<Scalar> w2{posterior};
  W2Result<Scalar> out;
  out.per_y = Vec<Scalar>(ys.cols());
  for (Index j = 0; j < ys.cols(); ++j) {
    RngStream rng = eval_stream(seed, j);
    try {
      const Vec<Scalar> y = ys.col(j);
      out.per_y(j) = w2(y, empirical_stats<Scalar>(sampler, y, n_samples, rng));
    } catch (const std::exception&) {
      out.per_y(j) = std::numeric_limits<Scalar>::quiet_NaN();
      ++out.failures;
    }
  }
  out.mean = finish_mean(out.per_y, out.failures, "eval_w2");
  return out;
}

template <typename Scalar>
W2Result<Scalar> eval_w2(const AffineGenerator<Scalar>& gen, const LinearGaussianPosterior<Scalar>& posterior,
                         const Mat<Scalar>& ys, Index n_samples, std::uint64_t seed) {
  return eval_w2<Scalar>(GeneratorSampler<Scalar>{gen}, posterior, ys, n_samples, seed);
}

/// Conditional FID on raw vectors against a sample-based reference: both
/// sides are replaced by Gaussians with their empirical moments.
template <typename Scalar, typename S, typename R>
  requires ConditionalSampler<S, Scalar> && ConditionalSampler<R, Scalar>
Scalar cfid_raw(const S& sampler, const R& reference, const Mat<Scalar>& ys, Index n_samples, std::uint64_t seed) {
  require(ys.cols() > 0, "cfid_raw needs a non-empty measurement set");
  Vec<Scalar> per_y(ys.cols());
  Index failures = 0;
  for (Index j = 0; j < ys.cols(); ++j) {
    RngStream gen_rng = eval_stream(seed, j);
    RngStream ref_rng = eval_stream(seed, j, StreamTag::kTestNoise);
    try {
      const Vec<Scalar> y = ys.col(j);
      per_y(j) = w2_gaussian(empirical_stats<Scalar>(reference, y, n_samples, ref_rng),
                             empirical_stats<Scalar>(sampler, y, n_samples, gen_rng));
    } catch (const std::exception&) {
      per_y(j) = std::numeric_limits<Scalar>::quiet_NaN();
      ++failures;
    }
  }
  return finish_mean(per_y, failures, "cfid_raw");
}

/// With the analytic posterior as reference, conditional FID is eval_w2.
template <typename Scalar, typename S>
  requires ConditionalSampler<S, Scalar>
Scalar cfid_raw(const S& sampler, const LinearGaussianPosterior<Scalar>& posterior, const Mat<Scalar>& ys,
                Index n_samples, std::uint64_t seed) {
  return eval_w2<Scalar>(sampler, posterior, ys, n_samples, seed).mean;
}

/// REM_K for K = 0..max_k from one SVD per pair: entry K is
/// E‖(I − V̂_K V̂_Kᵀ) e‖₂ with e = x − μ̂ and V̂_K the top-K right singular vectors
/// of the centered samples. Entry 0 is E‖e‖₂.
template <typename Scalar, typename S>
  requires ConditionalSampler<S, Scalar>
Vec<Scalar> rem_profile(const S& sampler, const Mat<Scalar>& xs, const Mat<Scalar>& ys, Index max_k,
                        Index n_samples, std::uint64_t seed) {
  require(xs.cols() == ys.cols() && xs.cols() > 0, "rem needs a non-empty paired set");
  require(max_k >= 0 && max_k <= xs.rows(), "rem: K must lie in [0, d]");
  require(n_samples >= std::max<Index>(max_k + 1, 2), "rem: need at least K+1 samples");
  Vec<Scalar> total = Vec<Scalar>::Zero(max_k + 1);
  for (Index j = 0; j < xs.cols(); ++j) {
    RngStream rng = eval_stream(seed, j, StreamTag::kTestNoise);
    const Mat<Scalar> samples = sampler.draw(ys.col(j), n_samples, rng);
    const Vec<Scalar> mean = samples.rowwise().mean();
    const Vec<Scalar> e = xs.col(j) - mean;
    total(0) += e.norm();
    if (max_k == 0) continue;
    const PcaEstimate<Scalar> pca = pca_extract(samples, max_k, Frozen<Vec<Scalar>>{mean});
    // Coefficients along the nested basis; directions past the numerical rank are never used.
    const Vec<Scalar> coef = pca.components.transpose() * e;
    Vec<Scalar> residual = e;
    for (Index k = 1; k <= max_k; ++k) {
      if (k <= pca.k()) residual -= coef(k - 1) * pca.components.col(k - 1);
      total(k) += residual.norm();
    }
  }
  return total / static_cast<Scalar>(xs.cols());
}

template <typename Scalar, typename S>
  requires ConditionalSampler<S, Scalar>
Scalar rem_k(const S& sampler, const Mat<Scalar>& xs, const Mat<Scalar>& ys, Index k, Index n_samples,
             std::uint64_t seed) {
  return rem_profile<Scalar>(sampler, xs, ys, k, n_samples, seed)(k);
}

/// |v̂ₖᵀvₖ| for the top-K eigenvectors of two covariances; sign-free.
template <typename Scalar>
Vec<Scalar> eigen_alignment(const SymmetricEigen<Scalar>& est, const SymmetricEigen<Scalar>& truth, Index k) {
  return (est.vectors.leftCols(k).transpose() * truth.vectors.leftCols(k)).diagonal().cwiseAbs().cwiseMin(Scalar(1));
}

/// |λ̂ₖ − λₖ| / λₖ for the top K.
template <typename Scalar>
Vec<Scalar> eigval_relative_error(const SymmetricEigen<Scalar>& est, const SymmetricEigen<Scalar>& truth, Index k) {
  const Vec<Scalar> floor = Vec<Scalar>::Constant(k, std::numeric_limits<Scalar>::min());
  return (est.values.head(k) - truth.values.head(k)).cwiseAbs().cwiseQuotient(truth.values.head(k).cwiseMax(floor));
}

struct EvalOptions {
  Index k = 1;              // eigen-components for alignment and REM
  Index n_samples = 0;      // per y for W2; 0 means 10·d
  Index rem_samples = 100;  // per pair for REM and rMSE
  bool with_rem = true;
  bool with_cfid = true;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double mean_w2 = 0.0;
  Vec<double> w2_per_y;
  double trace_ratio = 0.0;  // mean over y of tr Σ̂ / tr Σ
  Vec<double> alignment;
  Vec<double> eigval_relerr;
  double rem_k = 0.0;
  double rmse = 0.0;
  double cfid_raw = 0.0;
  Index failures = 0;
  Index k = 0;
  Index n_samples = 0;
};

/// Every metric for a generator on a paired set (columns of xs, ys).
EvalReport evaluate(const AffineGenerator<double>& gen, const LinearGaussianPosterior<double>& posterior,
                    const Mat<double>& xs, const Mat<double>& ys, const EvalOptions& opt);

nlohmann::json to_json(const EvalReport& r);
/// "index,w2" rows.
std::string per_y_csv(const EvalReport& r);

}  // namespace pcagan
