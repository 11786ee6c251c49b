#pragma once

// The training loop: alternating critic and generator updates, the lazy
// PCA regularization schedule, per-epoch validation, β_SD control, best
// checkpoint selection and the divergence guard.

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcagan/config.hpp"
#include "pcagan/datakit.hpp"
#include "pcagan/netcore.hpp"
#include "pcagan/regularizers.hpp"
#include "pcagan/serialization.hpp"

namespace pcagan {

struct Batch {
  Mat<double> xs;
  Mat<double> ys;

  Index size() const { return xs.cols(); }
};

struct TrainState {
  AffineGenerator<double> gen;
  LinearDiscriminator<double> dsc;
  AdamState<double> gen_opt;
  AdamState<double> disc_opt;
  SdController<double> sd;
  Index epoch = 0;  // zero-based epoch currently running
  long step = 0;    // global generator step, never reset
};

/// Networks from the generator/critic init streams, zeroed optimizers, initial β_SD.
TrainState init_state(const TrainConfig& c);

/// Whether the eigenvector / eigenvalue terms run at (epoch, step).
struct PcaGate {
  bool evec = false;
  bool eval = false;
};
PcaGate pca_gate(const TrainConfig& c, Index epoch, long step);

/// Codes for one generator step: rc[b] is d_z×P_rc, pca[b] is d_z×P_pca (empty when unused).
struct GeneratorNoise {
  std::vector<Mat<double>> rc;
  std::vector<Mat<double>> pca;
};
GeneratorNoise generator_noise(const TrainConfig& c, long step, Index batch, bool with_pca);

/// Codes and interpolation weights for critic iteration `iteration` of a step.
struct DiscriminatorNoise {
  std::vector<Mat<double>> codes;
  Vec<double> mix;
};
DiscriminatorNoise discriminator_noise(const TrainConfig& c, long step, Index iteration, Index batch);

/// The generator loss of one step, split into weighted batch-mean contributions.
struct GeneratorObjective {
  double adv = 0.0;
  double l1 = 0.0;
  double sd = 0.0;
  double evec = 0.0;
  double eval = 0.0;
  double total = 0.0;
  PcaGate gate;
  Index skipped_pairs = 0;
  Index skipped_terms = 0;
  Index rank_deficient = 0;
  Vec<double> grad;
};

/// Pure: the loss and θ-gradient at the current state for given noise and gate.
GeneratorObjective generator_objective(const TrainConfig& c, const TrainState& s, const Batch& batch,
                                       const GeneratorNoise& noise, const PcaGate& gate);

/// Draws the step's noise, evaluates the objective, applies one Adam step and advances s.step.
GeneratorObjective generator_step(const TrainConfig& c, TrainState& s, const Batch& batch);

/// One Adam step on the critic. Does not advance the step counter.
DiscLossEval<double> discriminator_step(const TrainConfig& c, TrainState& s, const Batch& batch, Index iteration);

struct EpochRow {
  Index epoch = 0;  // epochs completed; 0 is the untrained model
  double val_w2 = 0.0;
  double trace_ratio = 0.0;
  double alignment = 0.0;  // mean over the top K of |v̂ₖᵀvₖ|
  double adv = 0.0;
  double l1 = 0.0;
  double sd = 0.0;
  double evec = 0.0;  // averaged over the steps where the term ran
  double eval = 0.0;
  double disc_wasserstein = 0.0;
  double disc_penalty = 0.0;
  double beta_sd = 0.0;  // after this epoch's controller update
  double sd_ratio = 0.0;
  double seconds = 0.0;
};

struct ScheduleEvent {
  long step = 0;
  Index epoch = 0;
  PcaGate gate;
};

struct RunRecord {
  TrainConfig config;
  std::vector<EpochRow> rows;
  std::string status = "completed";  // completed | diverged | numerical_failure
  std::vector<std::string> diagnostics;
  Index best_epoch = 0;
  double best_val_w2 = 0.0;
  double test_w2 = 0.0;
  long total_steps = 0;
  Index evec_steps = 0;
  Index eval_steps = 0;
  Checkpoint best;
  Checkpoint last;
  std::vector<ScheduleEvent> schedule;  // every generator step, when requested
};

struct TrainOptions {
  bool record_schedule = false;
  bool evaluate_test = true;
  std::function<void(const EpochRow&)> on_epoch;
};

/// Trains for `c.epochs` epochs of shuffled mini-batches.
RunRecord train(const TrainConfig& c, const DatasetHandle& data, const TrainOptions& opt = {});

/// Mean validation W2 of a generator, as computed each epoch.
double validation_w2(const TrainConfig& c, const AffineGenerator<double>& gen, const DatasetHandle& data);

std::string record_csv(const RunRecord& r);
nlohmann::json record_manifest(const RunRecord& r, const std::string& checkpoint_path);

/// "%.17g", the formatting used for every floating-point field written to CSV.
std::string fmt(double v);

}  // namespace pcagan
