#pragma once

// Sweeps over the lazy period M, the component count K or the dimension d,
// for a list of modes and seeds. Each point is an independent training run;
// results.csv holds one row per (axis_value, mode, seed) in a fixed order.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcagan/config.hpp"

namespace pcagan {

enum class SweepAxis { kM, kK, kD };

std::string to_string(SweepAxis a);
SweepAxis axis_from_string(const std::string& s);

struct SweepSpec {
  TrainConfig base;
  SweepAxis axis = SweepAxis::kD;
  std::vector<Index> values;
  std::vector<Mode> modes{Mode::kPcaGan, Mode::kRcGan};
  std::vector<std::uint64_t> seeds{0};
  std::string out_dir;
  std::string profile;  // recorded in the manifest only
  Index jobs = 1;
  bool resume = false;
  bool write_runs = true;  // per-run record.csv, manifest.json and checkpoint.json
  std::function<void(const std::string&)> log;
};

struct SweepRow {
  std::string axis;
  Index axis_value = 0;
  std::string mode;
  std::uint64_t seed = 0;
  double mean_w2 = 0.0;  // validation W2 of the selected checkpoint
  double w2_per_d = 0.0;
  double trace_ratio = 0.0;
  double test_w2 = 0.0;
  Index best_epoch = 0;
  std::string status;
  double wall_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // file order
  Index ran = 0;
  Index skipped = 0;  // already present when resuming
  bool any_diverged = false;
  bool any_failed = false;
};

/// The training config of one sweep point.
TrainConfig sweep_point(const SweepSpec& spec, Index value, Mode mode, std::uint64_t seed);

SweepResult run_sweep(const SweepSpec& spec);

inline constexpr const char* kResultsHeader =
    "axis,axis_value,mode,seed,mean_w2,w2_per_d,trace_ratio,test_w2,best_epoch,status,wall_seconds";
std::string results_line(const SweepRow& row);
/// Rows of an existing results.csv; throws DataError on a schema mismatch.
std::vector<SweepRow> read_results(const std::string& path);

}  // namespace pcagan
