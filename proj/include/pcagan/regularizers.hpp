#pragma once

// Loss terms of the regularized conditional GAN objective and their
// sample-based estimators: adversarial terms with gradient penalty, the
// supervised-ℓ1 loss and standard-deviation reward, principal-component
// extraction from generated samples, the eigenvector/eigenvalue losses, and
// the β_SD controller.
//
// Per-measurement terms return their value together with the gradient with
// respect to the generated samples (columns of a d×P matrix); the generator
// turns that into a parameter gradient with AffineGenerator::backprop.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcagan/errors.hpp"
#include "pcagan/gaussian_world.hpp"
#include "pcagan/netcore.hpp"

namespace pcagan {

template <typename Scalar>
struct SampleLoss {
  Scalar value = Scalar(0);
  Mat<Scalar> grad;  // ∂value/∂samples, d×P
};

/// ℓ1 subgradient with sign(0) = 0.
template <typename Derived>
auto sign_of(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return m.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0)); });
}

/// −β_adv Σᵢ D(x̂ᵢ, y) for one measurement.
template <typename Scalar>
SampleLoss<Scalar> adv_gen_term(const LinearDiscriminator<Scalar>& dsc, const Vec<Scalar>& y,
                                const Mat<Scalar>& samples, Scalar beta_adv) {
  SampleLoss<Scalar> out;
  Scalar total = Scalar(0);
  for (Index i = 0; i < samples.cols(); ++i) total += dsc.forward(samples.col(i), y);
  out.value = -beta_adv * total;
  out.grad = (-beta_adv * dsc.w_x()).replicate(1, samples.cols());
  return out;
}

/// ‖x − x̄‖₁ with x̄ the average of the P samples.
template <typename Scalar>
SampleLoss<Scalar> l1_reg(const Vec<Scalar>& x, const Mat<Scalar>& samples) {
  require(samples.cols() >= 1, "l1_reg needs at least one sample");
  require(samples.rows() == x.size(), "l1_reg dimension mismatch");
  const auto p = static_cast<Scalar>(samples.cols());
  const Vec<Scalar> residual = x - samples.rowwise().mean();
  SampleLoss<Scalar> out;
  out.value = residual.template lpNorm<1>();
  out.grad = (-sign_of(residual) / p).eval().replicate(1, samples.cols());
  return out;
}

/// Σᵢ ‖x̂ᵢ − x̄‖₁.
template <typename Scalar>
SampleLoss<Scalar> sd_reward(const Mat<Scalar>& samples) {
  require(samples.cols() >= 2, "sd_reward needs at least two samples");
  const auto p = static_cast<Scalar>(samples.cols());
  const Mat<Scalar> dev = samples.colwise() - samples.rowwise().mean();
  const Mat<Scalar> signs = sign_of(dev);
  SampleLoss<Scalar> out;
  out.value = dev.cwiseAbs().sum();
  out.grad = signs.colwise() - signs.rowwise().sum() / p;
  return out;
}

// ---------------------------------------------------------------------------

/// Top-K principal directions of a generated sample cloud.
template <typename Scalar>
struct PcaEstimate {
  Vec<Scalar> mean;        // sample average, treated as a constant
  Mat<Scalar> components;  // d×K_eff right singular vectors, first nonzero coordinate positive
  Vec<Scalar> eigvals;     // s_k², descending
  Index requested_k = 0;
  Index sample_count = 0;

  // Needed to differentiate through the decomposition.
  Mat<Scalar> centered;  // d×P, columns x̂ⱼ − μ̂
  Mat<Scalar> basis;     // d×d orthonormal, leading columns are `components`
  Vec<Scalar> spectrum;  // length d, s² padded with zeros

  Index k() const { return components.cols(); }
  bool rank_deficient() const { return k() < requested_k; }
};

template <typename Scalar>
void canonicalize_signs(Mat<Scalar>& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    const Scalar scale = vectors.col(j).cwiseAbs().maxCoeff();
    for (Index i = 0; i < vectors.rows(); ++i) {
      if (std::abs(vectors(i, j)) > Scalar(1e-12) * scale) {
        if (vectors(i, j) < Scalar(0)) vectors.col(j) *= Scalar(-1);
        break;
      }
    }
  }
}

/// SVD of the centered samples [x̂₁ − μ̂, …, x̂_P − μ̂]ᵀ around a given constant mean.
template <typename Scalar>
PcaEstimate<Scalar> pca_extract(const Mat<Scalar>& samples, Index k, const Frozen<Vec<Scalar>>& mean) {
  const Index d = samples.rows();
  const Index p = samples.cols();
  require(k >= 1 && k <= d, "pca_extract: K must lie in [1, d]");
  require(p >= k + 1, "pca_extract: need at least K+1 samples");
  require(mean.value.size() == d, "pca_extract: mean dimension mismatch");

  PcaEstimate<Scalar> est;
  est.mean = mean.value;
  est.requested_k = k;
  est.sample_count = p;
  est.centered = samples.colwise() - mean.value;

  Eigen::JacobiSVD<Mat<Scalar>> svd(est.centered.transpose(), Eigen::ComputeFullV);
  const Vec<Scalar>& s = svd.singularValues();
  est.basis = svd.matrixV();
  canonicalize_signs(est.basis);
  est.spectrum = Vec<Scalar>::Zero(d);
  est.spectrum.head(s.size()) = s.cwiseAbs2();

  const Scalar tol = (s.size() ? s(0) : Scalar(0)) * static_cast<Scalar>(std::max(p, d)) *
                     std::numeric_limits<Scalar>::epsilon();
  Index rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;
  const Index k_eff = std::min(k, rank);
  est.components = est.basis.leftCols(k_eff);
  est.eigvals = est.spectrum.head(k_eff);
  return est;
}

/// As above, with μ̂ the sample average.
template <typename Scalar>
PcaEstimate<Scalar> pca_extract(const Mat<Scalar>& samples, Index k) {
  return pca_extract(samples, k, Frozen<Vec<Scalar>>{samples.rowwise().mean()});
}

/// ∂L/∂(samples) given ∂L/∂C for C = X̃X̃ᵀ, X̃ the centered samples.
template <typename Scalar>
Mat<Scalar> gram_backprop(const PcaEstimate<Scalar>& pca, const Mat<Scalar>& grad_c) {
  return (grad_c + grad_c.transpose()) * pca.centered;
}

template <typename Scalar>
struct EvecLoss : SampleLoss<Scalar> {
  Index skipped_pairs = 0;  // eigen-gap too small to differentiate
};

/// −Σₖ [v̂ₖᵀ(x − μ̂)]². μ̂ is a constant; the gradient flows through v̂ₖ only.
template <typename Scalar>
EvecLoss<Scalar> evec_loss(const PcaEstimate<Scalar>& pca, const Vec<Scalar>& x) {
  require(x.size() == pca.mean.size(), "evec_loss dimension mismatch");
  const Index d = pca.basis.rows();
  const Index k = pca.k();
  const Vec<Scalar> residual = x - pca.mean;
  const Vec<Scalar> proj = pca.basis.transpose() * residual;  // a_l = v_lᵀ r for every basis direction

  EvecLoss<Scalar> out;
  out.value = -proj.head(k).squaredNorm();

  // dv_k = Σ_{l≠k} v_l v_lᵀ dC v_k / (λ_k − λ_l). Pairs inside the top-K span cancel,
  // so only l ≥ K contributes: ∂L/∂C = Σ_{k<K, l≥K} −2 a_k a_l/(λ_k − λ_l) · v_l v_kᵀ.
  const Scalar gap_floor = Scalar(1e-12) * std::max(pca.spectrum.size() ? pca.spectrum(0) : Scalar(0),
                                                    std::numeric_limits<Scalar>::min());
  Mat<Scalar> coef = Mat<Scalar>::Zero(d - k, k);
  for (Index kk = 0; kk < k; ++kk) {
    for (Index l = k; l < d; ++l) {
      const Scalar gap = pca.spectrum(kk) - pca.spectrum(l);
      if (gap <= gap_floor) {
        ++out.skipped_pairs;
        continue;
      }
      coef(l - k, kk) = Scalar(-2) * proj(kk) * proj(l) / gap;
    }
  }
  const Mat<Scalar> grad_c = pca.basis.rightCols(d - k) * coef * pca.basis.leftCols(k).transpose();
  out.grad = gram_backprop(pca, grad_c);
  return out;
}

/// How λ̂ₖ = s_k² is put on the same scale as the (1+P)-sample average λ̃ₖ.
enum class EigenScale {
  kPerSample,  // λ̂ₖ = s_k² / P
  kLiteral,    // λ̂ₖ = s_k²
};

template <typename Scalar>
Vec<Scalar> scaled_eigvals(const PcaEstimate<Scalar>& pca, EigenScale scale) {
  return scale == EigenScale::kPerSample ? Vec<Scalar>(pca.eigvals / static_cast<Scalar>(pca.sample_count))
                                         : pca.eigvals;
}

/// λ̃ₖ = ‖v̂ₖᵀ[x − μ̂, x̂₁ − μ̂, …, x̂_P − μ̂]‖² / (P + 1), as a constant.
template <typename Scalar>
Frozen<Vec<Scalar>> eigenvalue_targets(const PcaEstimate<Scalar>& pca, const Vec<Scalar>& x) {
  require(x.size() == pca.mean.size(), "eigenvalue_targets dimension mismatch");
  const Vec<Scalar> truth_proj = pca.components.transpose() * (x - pca.mean);
  const Vec<Scalar> sample_energy = (pca.components.transpose() * pca.centered).rowwise().squaredNorm();
  return {(sample_energy + truth_proj.cwiseAbs2()) / static_cast<Scalar>(pca.sample_count + 1)};
}

template <typename Scalar>
struct EvalLoss : SampleLoss<Scalar> {
  Index skipped_terms = 0;  // λ̂ₖ at or below the floor
};

/// Σₖ (1 − λ̃ₖ/λ̂ₖ)² with λ̃ₖ constant; the gradient flows through λ̂ₖ only.
/// Terms with λ̂ₖ ≤ floor_ratio·λ̂₁ are skipped.
template <typename Scalar>
EvalLoss<Scalar> eval_loss(const PcaEstimate<Scalar>& pca, const Frozen<Vec<Scalar>>& targets, EigenScale scale,
                           Scalar floor_ratio = Scalar(1e-10)) {
  const Index k = pca.k();
  require(targets.value.size() == k, "eval_loss: one target per component required");
  const Vec<Scalar> lambda = scaled_eigvals(pca, scale);
  const Scalar norm = scale == EigenScale::kPerSample ? static_cast<Scalar>(pca.sample_count) : Scalar(1);
  const Scalar floor = k ? floor_ratio * lambda(0) : Scalar(0);

  EvalLoss<Scalar> out;
  Vec<Scalar> weight = Vec<Scalar>::Zero(k);  // ∂L/∂λ̂ₖ
  for (Index j = 0; j < k; ++j) {
    if (!(lambda(j) > floor) || lambda(j) <= Scalar(0)) {
      ++out.skipped_terms;
      continue;
    }
    const Scalar ratio = targets.value(j) / lambda(j);
    out.value += (Scalar(1) - ratio) * (Scalar(1) - ratio);
    weight(j) = Scalar(2) * (Scalar(1) - ratio) * ratio / lambda(j);
  }
  // dλ̂ₖ = v̂ₖᵀ dC v̂ₖ / norm
  const Mat<Scalar> grad_c = pca.components * (weight / norm).asDiagonal() * pca.components.transpose();
  out.grad = gram_backprop(pca, grad_c);
  return out;
}

template <typename Scalar>
EvalLoss<Scalar> eval_loss(const PcaEstimate<Scalar>& pca, const Vec<Scalar>& x, EigenScale scale,
                           Scalar floor_ratio = Scalar(1e-10)) {
  return eval_loss(pca, eigenvalue_targets(pca, x), scale, floor_ratio);
}

// ---------------------------------------------------------------------------
// Batch-level losses over network parameters.

/// Σ_b f(b, samples_b) over a batch, reduced by `scale` (1/B for a mean),
/// differentiated with respect to the generator parameters.
template <typename Scalar, typename PerMeasurement>
LossEval<Scalar> generator_batch_loss(const AffineGenerator<Scalar>& gen, const Mat<Scalar>& ys,
                                      const std::vector<Mat<Scalar>>& codes, Scalar scale, PerMeasurement&& f) {
  require(static_cast<std::size_t>(ys.cols()) == codes.size(), "one code matrix per measurement required");
  LossEval<Scalar> out{Scalar(0), Vec<Scalar>::Zero(gen.params().size())};
  for (Index b = 0; b < ys.cols(); ++b) {
    const Vec<Scalar> y = ys.col(b);
    const Mat<Scalar>& z = codes[static_cast<std::size_t>(b)];
    const Mat<Scalar> samples = gen.sample(y, z);
    SampleLoss<Scalar> term = f(b, samples);
    out.value += scale * term.value;
    gen.backprop(y, z, scale * term.grad, out.grad);
  }
  return out;
}

/// Generator adversarial loss, −β_adv Σᵢ D(G(zᵢ, y), y), averaged over the batch.
template <typename Scalar>
LossEval<Scalar> adv_loss_gen(const LinearDiscriminator<Scalar>& dsc, const AffineGenerator<Scalar>& gen,
                              const Mat<Scalar>& ys, const std::vector<Mat<Scalar>>& codes, Scalar beta_adv) {
  require(ys.cols() > 0, "empty batch");
  return generator_batch_loss(gen, ys, codes, Scalar(1) / static_cast<Scalar>(ys.cols()),
                              [&](Index b, const Mat<Scalar>& s) { return adv_gen_term(dsc, ys.col(b).eval(), s, beta_adv); });
}

template <typename Scalar>
struct DiscLossEval : LossEval<Scalar> {
  Scalar wasserstein = Scalar(0);
  Scalar penalty = Scalar(0);
};

/// Critic loss −[D(x,y) − meanᵢ D(x̂ᵢ,y)] + λ_gp (‖∇ᵤD(u,y)|_{u=x̃}‖ − 1)², x̃ = εx + (1−ε)x̂₁,
/// averaged over the batch and differentiated with respect to the critic parameters.
template <typename Scalar>
DiscLossEval<Scalar> adv_loss_disc(const LinearDiscriminator<Scalar>& dsc, const AffineGenerator<Scalar>& gen,
                                   const Mat<Scalar>& xs, const Mat<Scalar>& ys,
                                   const std::vector<Mat<Scalar>>& codes, const Vec<Scalar>& mix,
                                   Scalar gp_weight) {
  const Index n = xs.cols();
  require(n > 0 && ys.cols() == n && mix.size() == n && static_cast<Index>(codes.size()) == n,
          "adv_loss_disc: batch shapes disagree");
  require(gp_weight >= Scalar(0), "gradient-penalty weight must be nonnegative");
  const Index d = dsc.dim();
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);

  DiscLossEval<Scalar> out;
  out.grad = Vec<Scalar>::Zero(dsc.params().size());
  auto grad_w = ParamVector<Scalar>::view(out.grad, dsc.w_slice()).col(0);

  for (Index b = 0; b < n; ++b) {
    const Vec<Scalar> x = xs.col(b);
    const Vec<Scalar> y = ys.col(b);
    const Mat<Scalar> fake = gen.sample(y, codes[static_cast<std::size_t>(b)]);
    const Vec<Scalar> fake_mean = fake.rowwise().mean();

    Scalar fake_score = Scalar(0);
    for (Index i = 0; i < fake.cols(); ++i) fake_score += dsc.forward(fake.col(i), y);
    fake_score /= static_cast<Scalar>(fake.cols());
    out.wasserstein += inv_n * -(dsc.forward(x, y) - fake_score);
    // c cancels between the real and fake scores.
    grad_w.head(d) -= inv_n * (x - fake_mean);

    const Vec<Scalar> interp = mix(b) * x + (Scalar(1) - mix(b)) * fake.col(0);
    const Vec<Scalar> input_grad = dsc.input_gradient(interp, y);
    const Scalar norm = input_grad.norm();
    out.penalty += inv_n * gp_weight * (norm - Scalar(1)) * (norm - Scalar(1));
    if (norm > Scalar(0))  // ∇_{w_x}‖w_x‖ = w_x/‖w_x‖; subgradient 0 at the origin
      grad_w.head(d) += inv_n * gp_weight * Scalar(2) * (norm - Scalar(1)) * input_grad / norm;
  }
  out.value = out.wasserstein + out.penalty;
  return out;
}

// ---------------------------------------------------------------------------

/// Second-moment statistics from which the trace ratio is estimated:
/// E‖x − x̄_(P)‖² and meanᵢ E‖x̂ᵢ − x̄_(P)‖².
template <typename Scalar>
struct SdStats {
  Scalar error_of_average = Scalar(0);
  Scalar spread = Scalar(0);
  Index count = 0;

  void add(const Vec<Scalar>& x, const Mat<Scalar>& samples) {
    const Vec<Scalar> avg = samples.rowwise().mean();
    const Scalar err = (x - avg).squaredNorm();
    const Scalar spr = (samples.colwise() - avg).colwise().squaredNorm().mean();
    count += 1;
    error_of_average += (err - error_of_average) / static_cast<Scalar>(count);
    spread += (spr - spread) / static_cast<Scalar>(count);
  }
};

/// ρ = ((P−1)/(P+1)) · E‖x − x̄‖² / meanᵢE‖x̂ᵢ − x̄‖²; ρ = 1 iff the generated
/// trace matches the true posterior trace (given a correct mean).
template <typename Scalar>
std::optional<Scalar> sd_ratio(const SdStats<Scalar>& stats, Index p) {
  require(p >= 2, "trace-ratio monitor needs P >= 2");
  if (!(stats.spread > Scalar(0))) return std::nullopt;
  const auto pp = static_cast<Scalar>(p);
  return (pp - Scalar(1)) / (pp + Scalar(1)) * stats.error_of_average / stats.spread;
}

template <typename Scalar>
struct SdController {
  Scalar beta_sd = Scalar(1);
  Scalar gain = Scalar(0.5);
  Scalar band = Scalar(0.2);
  Index monitor_p = 2;

  /// β_SD at which a Gaussian generator with the correct mean has stationary
  /// per-coordinate spread equal to the true spread, for the ℓ1 forms: 1/(P√(P²−1)).
  static Scalar gaussian_balance(Index p) {
    const auto pp = static_cast<Scalar>(p);
    return Scalar(1) / (pp * std::sqrt(pp * pp - Scalar(1)));
  }
};

template <typename Scalar>
struct SdUpdate {
  SdController<Scalar> controller;
  std::optional<Scalar> ratio;
  std::string diagnostic;  // non-empty when β_SD was held
};

/// β_SD ← β_SD · clip(ρ^κ, 1 − band, 1 + band).
template <typename Scalar>
SdUpdate<Scalar> update_beta_sd(const SdController<Scalar>& ctrl, const SdStats<Scalar>& stats) {
  require(ctrl.beta_sd > Scalar(0), "beta_sd must stay positive");
  require(ctrl.band >= Scalar(0) && ctrl.band < Scalar(1), "controller band must lie in [0, 1)");
  SdUpdate<Scalar> out{ctrl, sd_ratio(stats, ctrl.monitor_p), {}};
  if (!out.ratio || !std::isfinite(static_cast<double>(*out.ratio)) || *out.ratio <= Scalar(0)) {
    out.diagnostic = "trace-ratio monitor has a zero or invalid denominator; beta_sd held";
    return out;
  }
  const Scalar factor = std::clamp(std::pow(*out.ratio, ctrl.gain), Scalar(1) - ctrl.band, Scalar(1) + ctrl.band);
  out.controller.beta_sd = ctrl.beta_sd * factor;
  return out;
}

}  // namespace pcagan
