#pragma once

// Every knob of a training run, with JSON round-tripping, dotted-key
// overrides, validation and a stable content hash.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcagan/gaussian_world.hpp"
#include "pcagan/regularizers.hpp"

namespace pcagan {

enum class Mode { kPcaGan, kRcGan };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
  // Problem: prior chain up to d_max, evaluated at dimension d.
  Index d = 10;
  Index d_max = 100;
  std::uint64_t prior_seed = 0;
  double noise_var = 1e-3;
  MaskConvention mask = MaskConvention::kZeroBasedEven;
  Index code_dim = 0;  // 0 means d

  // Data splits.
  Index n_train = 70000;
  Index n_val = 20000;
  Index n_test = 10000;
  std::uint64_t data_seed = 0;

  // Objective.
  Mode mode = Mode::kPcaGan;
  Index p_rc = 2;
  double beta_adv = 1e-5;
  double gp_weight = 10.0;
  Index n_disc = 1;
  Index K = 0;      // 0 means d
  Index p_pca = 0;  // 0 means 10K
  Index M = 100;
  Index e_evec = 10;
  Index e_eval = -1;  // -1 means e_evec + 25
  double beta_pca = 1e-2;
  EigenScale eigen_scale = EigenScale::kPerSample;

  // β_SD controller. beta_sd_init = 0 means the Gaussian balance point for p_rc.
  double beta_sd_init = 0.0;
  double sd_gain = 0.5;
  double sd_band = 0.2;
  Index sd_monitor_p = 0;  // 0 means p_rc
  Index sd_monitor_pairs = 2000;

  // Optimizer and loop.
  double lr = 1e-3;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  Index epochs = 100;
  Index batch_size = 64;
  std::uint64_t seed = 0;

  // Validation and evaluation.
  Index val_ys = 200;
  Index samples_per_dim = 10;
  Index test_ys = 200;
  double divergence_factor = 1e3;
  Index divergence_patience = 3;

  // Resolved values.
  Index k() const { return K > 0 ? K : d; }
  Index pca_samples() const { return p_pca > 0 ? p_pca : 10 * k(); }
  Index eval_epoch() const { return e_eval >= 0 ? e_eval : e_evec + 25; }
  Index z_dim() const { return code_dim > 0 ? code_dim : d; }
  Index monitor_p() const { return sd_monitor_p > 0 ? sd_monitor_p : p_rc; }
  double effective_beta_pca() const { return mode == Mode::kRcGan ? 0.0 : beta_pca; }
  double initial_beta_sd() const;
  Index eval_samples() const { return samples_per_dim * d; }

  /// Throws InvalidArgument naming the first violated constraint.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(const nlohmann::json& j, const TrainConfig& base = {});

/// Applies "section.key=value"; the value is parsed as JSON when possible, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);
TrainConfig apply_overrides(const TrainConfig& base, const std::vector<std::string>& assignments);

/// FNV-1a over the canonical JSON text.
std::uint64_t config_hash(const TrainConfig& c);
std::string hex64(std::uint64_t v);

/// "desk": d = 10, 40 epochs, 10000/2000/1000 pairs, schedule scaled to the epoch budget.
/// "full": d = 100 with the default 70000/20000/10000 pairs and 100 epochs.
TrainConfig profile(const std::string& name);

TrainConfig load_config_file(const std::string& path, const TrainConfig& base);

}  // namespace pcagan
