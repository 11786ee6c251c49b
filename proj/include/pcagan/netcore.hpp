#pragma once

// Flat parameter containers, the affine generator / linear critic pair, the
// value-and-gradient contract shared by every loss, and Adam.

#include <cmath>
#include <concepts>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pcagan/errors.hpp"
#include "pcagan/gaussian_world.hpp"
#include "pcagan/rng.hpp"

namespace pcagan {

/// A named contiguous block of a ParamVector, viewed as a column-major rows×cols matrix.
struct Slice {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 1;

  Index size() const { return rows * cols; }
  bool operator==(const Slice&) const = default;
};

struct SliceShape {
  std::string name;
  Index rows;
  Index cols = 1;
};

template <typename Scalar>
class ParamVector {
 public:
  ParamVector() = default;

  explicit ParamVector(const std::vector<SliceShape>& shapes) {
    Index offset = 0;
    for (const auto& s : shapes) {
      require(s.rows > 0 && s.cols > 0, "parameter slice '" + s.name + "' must be non-empty");
      for (const auto& existing : layout_)
        require(existing.name != s.name, "duplicate parameter slice '" + s.name + "'");
      layout_.push_back({s.name, offset, s.rows, s.cols});
      offset += s.rows * s.cols;
    }
    require(offset > 0, "parameter vector must be non-empty");
    values_ = Vec<Scalar>::Zero(offset);
  }

  Index size() const { return values_.size(); }
  Vec<Scalar>& values() { return values_; }
  const Vec<Scalar>& values() const { return values_; }
  const std::vector<Slice>& layout() const { return layout_; }

  const Slice& slice(const std::string& name) const {
    for (const auto& s : layout_)
      if (s.name == name) return s;
    throw InvalidArgument("no parameter slice named '" + name + "'");
  }

  Eigen::Map<Mat<Scalar>> matrix(const std::string& name) { return view(values_, slice(name)); }
  Eigen::Map<const Mat<Scalar>> matrix(const std::string& name) const { return view(values_, slice(name)); }

  static Eigen::Map<Mat<Scalar>> view(Vec<Scalar>& flat, const Slice& s) {
    return Eigen::Map<Mat<Scalar>>(flat.data() + s.offset, s.rows, s.cols);
  }
  static Eigen::Map<const Mat<Scalar>> view(const Vec<Scalar>& flat, const Slice& s) {
    return Eigen::Map<const Mat<Scalar>>(flat.data() + s.offset, s.rows, s.cols);
  }

  /// Replaces the values, keeping the layout.
  void assign(const Vec<Scalar>& values) {
    require(values.size() == values_.size(), "parameter length mismatch");
    values_ = values;
  }

 private:
  std::vector<Slice> layout_;
  Vec<Scalar> values_;
};

// ---------------------------------------------------------------------------

/// x̂ = A·y + B·z + b: one dense layer on y plus one on z, summed.
template <typename Scalar>
class AffineGenerator {
 public:
  AffineGenerator() = default;
  AffineGenerator(Index dim, Index code_dim)
      : dim_(dim), code_dim_(code_dim), params_({{"A", dim, dim}, {"B", dim, code_dim}, {"b", dim, 1}}) {
    require(dim > 0 && code_dim > 0, "generator dimensions must be positive");
    a_ = params_.slice("A");
    b_mat_ = params_.slice("B");
    bias_ = params_.slice("b");
  }

  Index dim() const { return dim_; }
  Index code_dim() const { return code_dim_; }
  ParamVector<Scalar>& params() { return params_; }
  const ParamVector<Scalar>& params() const { return params_; }

  auto A() { return ParamVector<Scalar>::view(params_.values(), a_); }
  auto B() { return ParamVector<Scalar>::view(params_.values(), b_mat_); }
  auto b() { return ParamVector<Scalar>::view(params_.values(), bias_).col(0); }
  auto A() const { return ParamVector<Scalar>::view(params_.values(), a_); }
  auto B() const { return ParamVector<Scalar>::view(params_.values(), b_mat_); }
  auto b() const { return ParamVector<Scalar>::view(params_.values(), bias_).col(0); }

  /// A, B entries ~ N(0, 1/d); bias zero.
  void initialize(RngStream& rng) {
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim_));
    A() = rng.normal_matrix<Scalar>(dim_, dim_) * scale;
    B() = rng.normal_matrix<Scalar>(dim_, code_dim_) * scale;
    b().setZero();
  }

  Vec<Scalar> forward(const Vec<Scalar>& z, const Vec<Scalar>& y) const {
    check(y, z.size());
    return A() * y + B() * z + b();
  }

  /// Samples for one measurement; column i of the result is G(codes.col(i), y).
  Mat<Scalar> sample(const Vec<Scalar>& y, const Mat<Scalar>& codes) const {
    check(y, codes.rows());
    Mat<Scalar> out = B() * codes;
    out.colwise() += A() * y + b();
    return out;
  }

  /// Chain rule from ∂L/∂(samples) to ∂L/∂θ, accumulated into `grad`.
  void backprop(const Vec<Scalar>& y, const Mat<Scalar>& codes, const Mat<Scalar>& sample_grad,
                Vec<Scalar>& grad) const {
    require(grad.size() == params_.size(), "gradient length mismatch");
    const Vec<Scalar> summed = sample_grad.rowwise().sum();
    ParamVector<Scalar>::view(grad, a_).noalias() += summed * y.transpose();
    ParamVector<Scalar>::view(grad, b_mat_).noalias() += sample_grad * codes.transpose();
    ParamVector<Scalar>::view(grad, bias_).col(0) += summed;
  }

 private:
  void check(const Vec<Scalar>& y, Index code_rows) const {
    if (y.size() != dim_ || code_rows != code_dim_)
      throw InvalidArgument("generator input dimension mismatch (y: " + std::to_string(y.size()) +
                            ", z: " + std::to_string(code_rows) + ")");
  }

  Index dim_ = 0;
  Index code_dim_ = 0;
  ParamVector<Scalar> params_;
  Slice a_, b_mat_, bias_;
};

/// D(x, y) = wᵀ[x; y] + c.
template <typename Scalar>
class LinearDiscriminator {
 public:
  LinearDiscriminator() = default;
  explicit LinearDiscriminator(Index dim) : dim_(dim), params_({{"w", 2 * dim, 1}, {"c", 1, 1}}) {
    require(dim > 0, "discriminator dimension must be positive");
    w_ = params_.slice("w");
    c_ = params_.slice("c");
  }

  Index dim() const { return dim_; }
  ParamVector<Scalar>& params() { return params_; }
  const ParamVector<Scalar>& params() const { return params_; }

  auto w() { return ParamVector<Scalar>::view(params_.values(), w_).col(0); }
  auto w() const { return ParamVector<Scalar>::view(params_.values(), w_).col(0); }
  Scalar& c() { return params_.values()(c_.offset); }
  Scalar c() const { return params_.values()(c_.offset); }
  auto w_x() const { return w().head(dim_); }
  auto w_y() const { return w().tail(dim_); }

  const Slice& w_slice() const { return w_; }
  const Slice& c_slice() const { return c_; }

  /// w ~ N(0, 1/(2d)), c = 0.
  void initialize(RngStream& rng) {
    w() = rng.normal_vector<Scalar>(2 * dim_) / std::sqrt(static_cast<Scalar>(2 * dim_));
    c() = Scalar(0);
  }

  Scalar forward(const Vec<Scalar>& x, const Vec<Scalar>& y) const {
    if (x.size() != dim_ || y.size() != dim_) throw InvalidArgument("discriminator input dimension mismatch");
    return w_x().dot(x) + w_y().dot(y) + c();
  }

  /// ∇_u D(u, y); constant for a linear critic.
  Vec<Scalar> input_gradient(const Vec<Scalar>& /*u*/, const Vec<Scalar>& /*y*/) const { return w_x(); }

 private:
  Index dim_ = 0;
  ParamVector<Scalar> params_;
  Slice w_, c_;
};

template <typename Scalar>
Vec<Scalar> gen_forward(const AffineGenerator<Scalar>& g, const Vec<Scalar>& z, const Vec<Scalar>& y) {
  return g.forward(z, y);
}

template <typename Scalar>
Scalar disc_forward(const LinearDiscriminator<Scalar>& dsc, const Vec<Scalar>& x, const Vec<Scalar>& y) {
  return dsc.forward(x, y);
}

// ---------------------------------------------------------------------------

template <typename Scalar>
struct LossEval {
  Scalar value = Scalar(0);
  Vec<Scalar> grad;
};

/// Marks a quantity that enters a loss as a constant: no gradient flows through it.
template <typename T>
struct Frozen {
  T value;
};

template <typename F, typename Scalar>
concept DifferentiableLoss = requires(const F& f, const Vec<Scalar>& p) {
  { f(p) } -> std::convertible_to<LossEval<Scalar>>;
};

/// Evaluates a loss and its gradient at p, rejecting non-finite results.
template <typename Scalar, typename F>
  requires DifferentiableLoss<F, Scalar>
LossEval<Scalar> grad_of(const F& loss, const Vec<Scalar>& p) {
  LossEval<Scalar> out = loss(p);
  if (!std::isfinite(static_cast<double>(out.value)))
    throw NumericalFailure("loss value is not finite");
  if (out.grad.size() != p.size()) throw InvalidArgument("loss returned a gradient of the wrong length");
  if (!out.grad.allFinite()) throw NumericalFailure("loss gradient is not finite");
  return out;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
struct AdamState {
  Vec<Scalar> first_moment;
  Vec<Scalar> second_moment;
  long step_count = 0;
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0);
  Scalar beta2 = Scalar(0.99);
  Scalar eps = Scalar(1e-8);

  static AdamState zeros(Index n, Scalar lr = Scalar(1e-3), Scalar beta1 = Scalar(0), Scalar beta2 = Scalar(0.99),
                         Scalar eps = Scalar(1e-8)) {
    return {Vec<Scalar>::Zero(n), Vec<Scalar>::Zero(n), 0, lr, beta1, beta2, eps};
  }
};

template <typename Scalar>
struct AdamUpdate {
  Vec<Scalar> params;
  AdamState<Scalar> state;
};

/// One bias-corrected Adam step. Pure: the inputs are not modified.
template <typename Scalar>
AdamUpdate<Scalar> adam_step(const Vec<Scalar>& params, const Vec<Scalar>& grad, const AdamState<Scalar>& s) {
  require(params.size() == grad.size() && s.first_moment.size() == params.size() &&
              s.second_moment.size() == params.size(),
          "Adam: parameter, gradient and moment lengths differ");
  if (!grad.allFinite()) throw NumericalFailure("Adam: gradient is not finite");

  AdamUpdate<Scalar> out{params, s};
  AdamState<Scalar>& st = out.state;
  st.step_count += 1;
  st.first_moment = s.beta1 * s.first_moment + (Scalar(1) - s.beta1) * grad;
  st.second_moment = s.beta2 * s.second_moment + (Scalar(1) - s.beta2) * grad.cwiseAbs2();
  const auto t = static_cast<Scalar>(st.step_count);
  const Scalar correction1 = Scalar(1) - std::pow(s.beta1, t);
  const Scalar correction2 = Scalar(1) - std::pow(s.beta2, t);
  out.params.array() -= s.lr * (st.first_moment.array() / correction1) /
                        ((st.second_moment.array() / correction2).sqrt() + s.eps);
  return out;
}

/// In-place convenience wrapper around adam_step.
template <typename Scalar>
void apply_adam(ParamVector<Scalar>& p, const Vec<Scalar>& grad, AdamState<Scalar>& s) {
  AdamUpdate<Scalar> up = adam_step(p.values(), grad, s);
  p.assign(up.params);
  s = std::move(up.state);
}

}  // namespace pcagan
