#include "pcagan/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "pcagan/evaluation.hpp"

namespace pcagan {

using nlohmann::json;

namespace {

std::vector<Index> shuffled_indices(Index n, std::uint64_t seed, Index epoch) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  RngStream rng(seed, StreamTag::kShuffle, {static_cast<std::uint64_t>(epoch)});
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

Batch gather(const Split& split, const std::vector<Index>& order, Index first, Index size) {
  Batch b{Mat<double>(split.xs.rows(), size), Mat<double>(split.ys.rows(), size)};
  for (Index i = 0; i < size; ++i) {
    const Index src = order[static_cast<std::size_t>(first + i)];
    b.xs.col(i) = split.xs.col(src);
    b.ys.col(i) = split.ys.col(src);
  }
  return b;
}

Checkpoint snapshot(const TrainConfig& c, const TrainState& s, Index epochs_done) {
  return {config_hash(c), epochs_done, s.sd.beta_sd, s.gen, s.dsc, s.gen_opt, s.disc_opt};
}

// Second-moment statistics of P-sample averages on validation pairs.
SdStats<double> monitor_stats(const TrainConfig& c, const AffineGenerator<double>& gen, const Split& val,
                              Index epoch) {
  SdStats<double> stats;
  const Index n = std::min(c.sd_monitor_pairs, val.size());
  for (Index j = 0; j < n; ++j) {
    RngStream rng(c.seed, StreamTag::kMonitorNoise, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(j)});
    const Vec<double> y = val.ys.col(j);
    stats.add(val.xs.col(j), gen.sample(y, rng.normal_matrix(gen.code_dim(), c.monitor_p())));
  }
  return stats;
}

}  // namespace

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TrainState init_state(const TrainConfig& c) {
  TrainState s;
  s.gen = AffineGenerator<double>(c.d, c.z_dim());
  s.dsc = LinearDiscriminator<double>(c.d);
  RngStream gen_rng(c.seed, StreamTag::kGenInit);
  RngStream disc_rng(c.seed, StreamTag::kDiscInit);
  s.gen.initialize(gen_rng);
  s.dsc.initialize(disc_rng);
  s.gen_opt = AdamState<double>::zeros(s.gen.params().size(), c.lr, c.adam_beta1, c.adam_beta2, c.adam_eps);
  s.disc_opt = AdamState<double>::zeros(s.dsc.params().size(), c.lr, c.adam_beta1, c.adam_beta2, c.adam_eps);
  s.sd = SdController<double>{c.initial_beta_sd(), c.sd_gain, c.sd_band, c.monitor_p()};
  return s;
}

PcaGate pca_gate(const TrainConfig& c, Index epoch, long step) {
  if (c.mode == Mode::kRcGan) return {};
  const bool lazy = step % c.M == 0;
  return {lazy && epoch >= c.e_evec, lazy && epoch >= c.eval_epoch()};
}

GeneratorNoise generator_noise(const TrainConfig& c, long step, Index batch, bool with_pca) {
  GeneratorNoise noise;
  const auto s = static_cast<std::uint64_t>(step);
  for (Index b = 0; b < batch; ++b) {
    RngStream rc(c.seed, StreamTag::kGenNoise, {s, static_cast<std::uint64_t>(b)});
    noise.rc.push_back(rc.normal_matrix(c.z_dim(), c.p_rc));
    if (with_pca) {
      RngStream pca(c.seed, StreamTag::kPcaNoise, {s, static_cast<std::uint64_t>(b)});
      noise.pca.push_back(pca.normal_matrix(c.z_dim(), c.pca_samples()));
    }
  }
  return noise;
}

DiscriminatorNoise discriminator_noise(const TrainConfig& c, long step, Index iteration, Index batch) {
  DiscriminatorNoise noise;
  noise.mix = Vec<double>(batch);
  for (Index b = 0; b < batch; ++b) {
    RngStream rng(c.seed, StreamTag::kDiscNoise,
                  {static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(b)});
    noise.codes.push_back(rng.normal_matrix(c.z_dim(), c.p_rc));
    noise.mix(b) = rng.uniform();
  }
  return noise;
}

GeneratorObjective generator_objective(const TrainConfig& c, const TrainState& s, const Batch& batch,
                                       const GeneratorNoise& noise, const PcaGate& gate) {
  const Index n = batch.size();
  require(n > 0 && static_cast<Index>(noise.rc.size()) == n, "generator step: noise does not match the batch");
  require(!gate.evec || static_cast<Index>(noise.pca.size()) == n, "generator step: missing PCA codes");
  require(!gate.eval || gate.evec, "eigenvalue term needs the eigenvector term's samples");
  const double inv_b = 1.0 / static_cast<double>(n);
  const double beta_sd = s.sd.beta_sd;
  const double beta_pca = c.effective_beta_pca();

  GeneratorObjective out;
  out.gate = gate;
  out.grad = Vec<double>::Zero(s.gen.params().size());
  for (Index b = 0; b < n; ++b) {
    const Vec<double> x = batch.xs.col(b);
    const Vec<double> y = batch.ys.col(b);
    const Mat<double>& z = noise.rc[static_cast<std::size_t>(b)];
    const Mat<double> samples = s.gen.sample(y, z);

    const SampleLoss<double> adv = adv_gen_term(s.dsc, y, samples, c.beta_adv);
    const SampleLoss<double> l1 = l1_reg(x, samples);
    const SampleLoss<double> sd = sd_reward(samples);
    out.adv += inv_b * adv.value;
    out.l1 += inv_b * l1.value;
    out.sd += inv_b * -beta_sd * sd.value;
    s.gen.backprop(y, z, inv_b * (adv.grad + l1.grad - beta_sd * sd.grad), out.grad);

    if (!gate.evec) continue;
    const Mat<double>& zp = noise.pca[static_cast<std::size_t>(b)];
    const PcaEstimate<double> pca = pca_extract(s.gen.sample(y, zp), c.k());
    if (pca.rank_deficient()) ++out.rank_deficient;
    const EvecLoss<double> evec = evec_loss(pca, x);
    out.evec += inv_b * beta_pca * evec.value;
    out.skipped_pairs += evec.skipped_pairs;
    Mat<double> pca_grad = beta_pca * evec.grad;
    if (gate.eval) {
      const EvalLoss<double> eval = eval_loss(pca, x, c.eigen_scale);
      out.eval += inv_b * beta_pca * eval.value;
      out.skipped_terms += eval.skipped_terms;
      pca_grad += beta_pca * eval.grad;
    }
    s.gen.backprop(y, zp, inv_b * pca_grad, out.grad);
  }
  out.total = out.adv + out.l1 + out.sd + out.evec + out.eval;
  if (!std::isfinite(out.total)) throw NumericalFailure("generator loss is not finite at step " + std::to_string(s.step));
  if (!out.grad.allFinite()) throw NumericalFailure("generator gradient is not finite at step " + std::to_string(s.step));
  return out;
}

GeneratorObjective generator_step(const TrainConfig& c, TrainState& s, const Batch& batch) {
  const PcaGate gate = pca_gate(c, s.epoch, s.step);
  const GeneratorNoise noise = generator_noise(c, s.step, batch.size(), gate.evec);
  GeneratorObjective obj = generator_objective(c, s, batch, noise, gate);
  apply_adam(s.gen.params(), obj.grad, s.gen_opt);
  ++s.step;
  return obj;
}

DiscLossEval<double> discriminator_step(const TrainConfig& c, TrainState& s, const Batch& batch, Index iteration) {
  const DiscriminatorNoise noise = discriminator_noise(c, s.step, iteration, batch.size());
  DiscLossEval<double> loss = adv_loss_disc(s.dsc, s.gen, batch.xs, batch.ys, noise.codes, noise.mix, c.gp_weight);
  if (!std::isfinite(loss.value) || !loss.grad.allFinite())
    throw NumericalFailure("critic loss is not finite at step " + std::to_string(s.step));
  apply_adam(s.dsc.params(), loss.grad, s.disc_opt);
  return loss;
}

double validation_w2(const TrainConfig& c, const AffineGenerator<double>& gen, const DatasetHandle& data) {
  const LinearGaussianPosterior<double> posterior(data.prior, data.mm);
  return eval_w2(gen, posterior, Mat<double>(data.val.ys.leftCols(c.val_ys)), c.eval_samples(), c.seed).mean;
}

RunRecord train(const TrainConfig& c, const DatasetHandle& data, const TrainOptions& opt) {
  c.validate();
  require(data.dim() == c.d, "dataset dimension " + std::to_string(data.dim()) + " does not match config d=" +
                                 std::to_string(c.d));
  require(data.train.size() >= c.batch_size, "training split smaller than one batch");
  require(data.val.size() >= c.val_ys && data.test.size() >= c.test_ys, "evaluation splits smaller than configured");

  const LinearGaussianPosterior<double> posterior(data.prior, data.mm);
  const Mat<double> val_xs = data.val.xs.leftCols(c.val_ys);
  const Mat<double> val_ys = data.val.ys.leftCols(c.val_ys);
  EvalOptions eval_opt;
  eval_opt.k = c.k();
  eval_opt.n_samples = c.eval_samples();
  eval_opt.with_rem = false;
  eval_opt.with_cfid = false;
  eval_opt.seed = c.seed;

  TrainState st = init_state(c);
  RunRecord r;
  r.config = c;
  const auto validate_into = [&](EpochRow& row) {
    const EvalReport rep = evaluate(st.gen, posterior, val_xs, val_ys, eval_opt);
    row.val_w2 = rep.mean_w2;
    row.trace_ratio = rep.trace_ratio;
    row.alignment = rep.alignment.mean();
  };

  EpochRow initial;
  try {
    validate_into(initial);
  } catch (const NumericalFailure& e) {
    r.status = "numerical_failure";
    r.diagnostics.push_back(e.what());
    r.best = r.last = snapshot(c, st, 0);
    r.best_val_w2 = r.test_w2 = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  initial.beta_sd = st.sd.beta_sd;
  initial.sd_ratio = sd_ratio(monitor_stats(c, st.gen, data.val, 0), c.monitor_p()).value_or(0.0);
  r.rows.push_back(initial);
  if (opt.on_epoch) opt.on_epoch(initial);
  r.best = snapshot(c, st, 0);
  r.best_val_w2 = initial.val_w2;
  const double divergence_level = c.divergence_factor * initial.val_w2;
  Index over_limit = 0;

  const Index steps_per_epoch = data.train.size() / c.batch_size;  // a trailing partial batch is dropped
  for (Index e = 0; e < c.epochs; ++e) {
    const auto started = std::chrono::steady_clock::now();
    st.epoch = e;
    const std::vector<Index> order = shuffled_indices(data.train.size(), c.seed, e);
    EpochRow row;
    row.epoch = e + 1;
    Index evec_here = 0, eval_here = 0, disc_here = 0;
    try {
      for (Index i = 0; i < steps_per_epoch; ++i) {
        const Batch batch = gather(data.train, order, i * c.batch_size, c.batch_size);
        for (Index j = 0; j < c.n_disc; ++j) {
          const DiscLossEval<double> dl = discriminator_step(c, st, batch, j);
          row.disc_wasserstein += dl.wasserstein;
          row.disc_penalty += dl.penalty;
          ++disc_here;
        }
        const long step = st.step;
        const GeneratorObjective obj = generator_step(c, st, batch);
        row.adv += obj.adv;
        row.l1 += obj.l1;
        row.sd += obj.sd;
        if (obj.gate.evec) {
          row.evec += obj.evec;
          ++evec_here;
        }
        if (obj.gate.eval) {
          row.eval += obj.eval;
          ++eval_here;
        }
        if (obj.rank_deficient > 0)
          r.diagnostics.push_back("step " + std::to_string(step) + ": " + std::to_string(obj.rank_deficient) +
                                  " rank-deficient PCA estimates");
        if (opt.record_schedule) r.schedule.push_back({step, e, obj.gate});
      }
      const double steps = static_cast<double>(std::max<Index>(steps_per_epoch, 1));
      row.adv /= steps;
      row.l1 /= steps;
      row.sd /= steps;
      if (evec_here) row.evec /= static_cast<double>(evec_here);
      if (eval_here) row.eval /= static_cast<double>(eval_here);
      if (disc_here) {
        row.disc_wasserstein /= static_cast<double>(disc_here);
        row.disc_penalty /= static_cast<double>(disc_here);
      }
      r.evec_steps += evec_here;
      r.eval_steps += eval_here;

      validate_into(row);
      const SdUpdate<double> up = update_beta_sd(st.sd, monitor_stats(c, st.gen, data.val, e + 1));
      st.sd = up.controller;
      row.sd_ratio = up.ratio.value_or(0.0);
      if (!up.diagnostic.empty()) r.diagnostics.push_back("epoch " + std::to_string(e + 1) + ": " + up.diagnostic);
      row.beta_sd = st.sd.beta_sd;
    } catch (const NumericalFailure& ex) {
      r.status = "numerical_failure";
      r.diagnostics.push_back(std::string("epoch ") + std::to_string(e + 1) + ": " + ex.what());
      break;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    r.rows.push_back(row);
    if (opt.on_epoch) opt.on_epoch(row);

    if (row.val_w2 < r.best_val_w2) {
      r.best_val_w2 = row.val_w2;
      r.best_epoch = row.epoch;
      r.best = snapshot(c, st, row.epoch);
    }
    over_limit = (!std::isfinite(row.val_w2) || row.val_w2 > divergence_level) ? over_limit + 1 : 0;
    if (over_limit >= c.divergence_patience) {
      r.status = "diverged";
      r.diagnostics.push_back("validation W2 above " + fmt(c.divergence_factor) + "x its initial value for " +
                              std::to_string(over_limit) + " consecutive epochs");
      break;
    }
  }
  r.total_steps = st.step;
  r.last = snapshot(c, st, static_cast<Index>(r.rows.size()) - 1);

  if (opt.evaluate_test) {
    try {
      r.test_w2 = eval_w2(r.best.gen, posterior, Mat<double>(data.test.ys.leftCols(c.test_ys)), c.eval_samples(),
                          c.seed)
                      .mean;
    } catch (const NumericalFailure& ex) {
      r.test_w2 = std::numeric_limits<double>::quiet_NaN();
      r.diagnostics.push_back(std::string("test evaluation: ") + ex.what());
    }
  }
  return r;
}

std::string record_csv(const RunRecord& r) {
  std::ostringstream out;
  out << "epoch,val_w2,trace_ratio,alignment,adv,l1,sd,evec,eval,disc_wasserstein,disc_penalty,beta_sd,sd_ratio\n";
  for (const auto& row : r.rows) {
    out << row.epoch;
    for (double v : {row.val_w2, row.trace_ratio, row.alignment, row.adv, row.l1, row.sd, row.evec, row.eval,
                     row.disc_wasserstein, row.disc_penalty, row.beta_sd, row.sd_ratio})
      out << ',' << fmt(v);
    out << '\n';
  }
  return out.str();
}

json record_manifest(const RunRecord& r, const std::string& checkpoint_path) {
  return {{"config", to_json(r.config)},
          {"config_hash", hex64(config_hash(r.config))},
          {"seed", r.config.seed},
          {"rng", kRngAlgorithm},
          {"status", r.status},
          {"diagnostics", r.diagnostics},
          {"best_epoch", r.best_epoch},
          {"best_val_w2", r.best_val_w2},
          {"test_w2", r.test_w2},
          {"total_steps", r.total_steps},
          {"evec_steps", r.evec_steps},
          {"eval_steps", r.eval_steps},
          {"epochs_completed", static_cast<Index>(r.rows.size()) - 1},
          {"checkpoint", checkpoint_path}};
}

}  // namespace pcagan
