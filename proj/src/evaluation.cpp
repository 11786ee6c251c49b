#include "pcagan/evaluation.hpp"

#include <cstdio>
#include <sstream>

namespace pcagan {

using nlohmann::json;

EvalReport evaluate(const AffineGenerator<double>& gen, const LinearGaussianPosterior<double>& posterior,
                    const Mat<double>& xs, const Mat<double>& ys, const EvalOptions& opt) {
  const Index d = gen.dim();
  require(ys.cols() > 0 && xs.cols() == ys.cols(), "evaluate needs a non-empty paired set");
  require(opt.k >= 1 && opt.k <= d, "evaluate: K must lie in [1, d]");
  const GeneratorSampler<double> sampler{gen};
  const PosteriorW2<double> w2{posterior};
  const SymmetricEigen<double> truth(posterior.covariance());

  EvalReport r;
  r.k = opt.k;
  r.n_samples = opt.n_samples > 0 ? opt.n_samples : 10 * d;
  r.w2_per_y = Vec<double>(ys.cols());
  r.alignment = Vec<double>::Zero(opt.k);
  r.eigval_relerr = Vec<double>::Zero(opt.k);
  for (Index j = 0; j < ys.cols(); ++j) {
    RngStream rng = eval_stream(opt.seed, j);
    try {
      const Vec<double> y = ys.col(j);
      const GaussianDist<double> est = empirical_stats<double>(sampler, y, r.n_samples, rng);
      r.w2_per_y(j) = w2(y, est);
      r.trace_ratio += est.cov().trace() / w2.trace;
      r.alignment += eigen_alignment(est.eigen(), truth, opt.k);
      r.eigval_relerr += eigval_relative_error(est.eigen(), truth, opt.k);
    } catch (const std::exception&) {
      r.w2_per_y(j) = std::numeric_limits<double>::quiet_NaN();
      ++r.failures;
    }
  }
  r.mean_w2 = finish_mean(r.w2_per_y, r.failures, "evaluate");
  const double ok = static_cast<double>(ys.cols() - r.failures);
  r.trace_ratio /= ok;
  r.alignment /= ok;
  r.eigval_relerr /= ok;

  if (opt.with_rem) {
    const Vec<double> rem = rem_profile<double>(sampler, xs, ys, opt.k, std::max(opt.rem_samples, opt.k + 1), opt.seed);
    r.rmse = rem(0);
    r.rem_k = rem(opt.k);
  }
  if (opt.with_cfid) {
    const ExactPosteriorSampler<double> reference{posterior};
    r.cfid_raw = cfid_raw<double>(sampler, reference, ys, r.n_samples, opt.seed);
  }
  return r;
}

json to_json(const EvalReport& r) {
  const auto vec = [](const Vec<double>& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"mean_w2", r.mean_w2},
          {"trace_ratio", r.trace_ratio},
          {"alignment", vec(r.alignment)},
          {"eigval_relerr", vec(r.eigval_relerr)},
          {"rem_k", r.rem_k},
          {"rmse", r.rmse},
          {"cfid_raw", r.cfid_raw},
          {"failures", r.failures},
          {"K", r.k},
          {"n_samples", r.n_samples},
          {"n_measurements", r.w2_per_y.size()}};
}

std::string per_y_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "index,w2\n";
  char buf[64];
  for (Index j = 0; j < r.w2_per_y.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", r.w2_per_y(j));
    out << j << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace pcagan
