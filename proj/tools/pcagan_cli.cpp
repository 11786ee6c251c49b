// pcagan: generate data, train, evaluate and sweep the Gaussian experiments.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage or bad config,
// 3 training diverged (partial outputs are still written).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pcagan/config.hpp"
#include "pcagan/datakit.hpp"
#include "pcagan/errors.hpp"
#include "pcagan/evaluation.hpp"
#include "pcagan/serialization.hpp"
#include "pcagan/sweep.hpp"
#include "pcagan/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pcagan;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr const char* kOutRootEnv = "PCAGAN_OUT_ROOT";

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string profile = "desk";
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file (partial documents allowed)");
  cmd->add_option("--set", c.overrides, "Override a config entry, e.g. --set pca.M=50")->take_all();
  cmd->add_option("--profile", c.profile, "Base profile")->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--out", c.out, std::string("Output directory (default: $") + kOutRootEnv + "/<command>)");
}

TrainConfig resolve_config(const Common& c) {
  TrainConfig cfg = profile(c.profile);
  if (!c.config_path.empty()) cfg = load_config_file(c.config_path, cfg);
  cfg = apply_overrides(cfg, c.overrides);
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Common& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  const char* root = std::getenv(kOutRootEnv);
  return fs::path(root && *root ? root : "pcagan_out") / command;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

DatasetHandle dataset_for(const TrainConfig& cfg, const std::string& data_path) {
  if (data_path.empty()) return generate_dataset(cfg);
  DatasetHandle data = load_dataset(data_path, prior_hash(prior_for(cfg), measurement_for(cfg)));
  if (data.dim() != cfg.d) throw InvalidArgument("dataset dimension does not match config");
  return data;
}

int report(const char* kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
  return code;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument("");
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("bad entry '") + item + "' in " + what);
    }
  }
  if (out.empty()) throw InvalidArgument(std::string(what) + " must not be empty");
  return out;
}

int cmd_gen_data(const Common& common) {
  const TrainConfig cfg = resolve_config(common);
  const fs::path dir = out_dir(common, "gen-data");
  const DatasetHandle data = generate_dataset(cfg);
  save_dataset(data, (dir / "data.bin").string());
  write_json_file((dir / "prior.json").string(), prior_to_json(data.prior));
  write_json_file((dir / "measurement.json").string(), measurement_to_json(data.mm));
  write_json_file((dir / "config.json").string(), to_json(cfg));
  std::cout << json{{"data", (dir / "data.bin").string()},
                    {"prior_hash", hex64(prior_hash(data.prior, data.mm))},
                    {"counts", {{"train", data.counts.train}, {"val", data.counts.val}, {"test", data.counts.test}}}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_train(const Common& common, const std::string& data_path, bool quiet) {
  const TrainConfig cfg = resolve_config(common);
  const fs::path dir = out_dir(common, "train");
  const DatasetHandle data = dataset_for(cfg, data_path);
  TrainOptions opt;
  if (!quiet)
    opt.on_epoch = [](const EpochRow& row) {
      std::cerr << "epoch " << row.epoch << "  val W2 " << fmt(row.val_w2) << "  trace ratio " << fmt(row.trace_ratio)
                << "  beta_sd " << fmt(row.beta_sd) << '\n';
    };
  const RunRecord rec = train(cfg, data, opt);
  write_text(dir / "record.csv", record_csv(rec));
  save_checkpoint(rec.best, (dir / "checkpoint.json").string());
  save_checkpoint(rec.last, (dir / "last_checkpoint.json").string());
  write_json_file((dir / "config.json").string(), to_json(cfg));
  const json manifest = record_manifest(rec, "checkpoint.json");
  write_json_file((dir / "manifest.json").string(), manifest);
  std::cout << json{{"status", rec.status},
                    {"best_epoch", rec.best_epoch},
                    {"best_val_w2", rec.best_val_w2},
                    {"test_w2", rec.test_w2},
                    {"out", dir.string()}}
                   .dump()
            << '\n';
  if (rec.status == "diverged") return report("divergence", "training diverged; partial record written", kExitDiverged);
  if (rec.status != "completed") return report("numerical_failure", rec.diagnostics.back(), kExitRuntime);
  return 0;
}

int cmd_eval(const Common& common, const std::string& checkpoint_path, const std::string& data_path,
             const std::string& split, Index rem_samples) {
  const TrainConfig cfg = resolve_config(common);
  const fs::path dir = out_dir(common, "eval");
  const DatasetHandle data = dataset_for(cfg, data_path);
  AffineGenerator<double> gen;
  Index epoch = 0;
  if (checkpoint_path.empty()) {
    gen = init_state(cfg).gen;
  } else {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    if (ck.gen.dim() != cfg.d) throw InvalidArgument("checkpoint dimension does not match config");
    gen = ck.gen;
    epoch = ck.epoch;
  }
  const Split& s = split == "test" ? data.test : data.val;
  const Index n = split == "test" ? cfg.test_ys : cfg.val_ys;
  EvalOptions opt;
  opt.k = cfg.k();
  opt.n_samples = cfg.eval_samples();
  opt.rem_samples = rem_samples;
  opt.seed = cfg.seed;
  const LinearGaussianPosterior<double> posterior(data.prior, data.mm);
  const EvalReport rep = evaluate(gen, posterior, Mat<double>(s.xs.leftCols(n)), Mat<double>(s.ys.leftCols(n)), opt);
  json out = to_json(rep);
  out["split"] = split;
  out["checkpoint"] = checkpoint_path.empty() ? "untrained" : checkpoint_path;
  out["checkpoint_epoch"] = epoch;
  write_json_file((dir / "eval_report.json").string(), out);
  write_text(dir / "per_y.csv", per_y_csv(rep));
  std::cout << out.dump() << '\n';
  return 0;
}

int cmd_sweep(const Common& common, const std::string& axis, const std::string& values, const std::string& seeds,
              const std::string& modes, Index jobs, bool resume, bool quiet) {
  SweepSpec spec;
  spec.base = resolve_config(common);
  spec.axis = axis_from_string(axis);
  spec.values = parse_list<Index>(values, "--values");
  spec.seeds = parse_list<std::uint64_t>(seeds, "--seeds");
  spec.modes.clear();
  if (modes.empty()) {
    spec.modes.push_back(Mode::kPcaGan);
    if (spec.axis == SweepAxis::kD) spec.modes.push_back(Mode::kRcGan);
  } else {
    std::stringstream ss(modes);
    for (std::string m; std::getline(ss, m, ',');)
      if (!m.empty()) spec.modes.push_back(mode_from_string(m));
  }
  spec.out_dir = out_dir(common, "sweep").string();
  spec.profile = common.profile;
  spec.jobs = jobs;
  spec.resume = resume;
  if (!quiet) spec.log = [](const std::string& line) { std::cerr << line << '\n'; };
  const SweepResult res = run_sweep(spec);
  std::cout << json{{"results", (fs::path(spec.out_dir) / "results.csv").string()},
                    {"rows", res.rows.size()},
                    {"ran", res.ran},
                    {"skipped", res.skipped}}
                   .dump()
            << '\n';
  if (res.any_diverged) return report("divergence", "at least one run diverged; results.csv is partial", kExitDiverged);
  if (res.any_failed) return report("numerical_failure", "at least one run hit a numerical failure", kExitRuntime);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train and evaluate PCA-regularized conditional GAN posterior samplers on Gaussian inverse problems"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  Common gen_common, train_common, eval_common, sweep_common;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate and save a dataset");
  add_common(gen, gen_common);

  CLI::App* tr = app.add_subcommand("train", "Train one model");
  add_common(tr, train_common);
  std::string train_data;
  tr->add_option("--data", train_data, "Dataset written by gen-data (default: generate from the config)");

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev, eval_common);
  std::string checkpoint, eval_data, split = "test";
  Index rem_samples = 100;
  ev->add_option("--checkpoint", checkpoint, "Checkpoint JSON (default: the untrained initialization)");
  ev->add_option("--data", eval_data, "Dataset written by gen-data");
  ev->add_option("--split", split, "Evaluation split")->check(CLI::IsMember({"val", "test"}));
  ev->add_option("--rem-samples", rem_samples, "Samples per pair for REM_K and rMSE")->check(CLI::PositiveNumber);

  CLI::App* sw = app.add_subcommand("sweep", "Sweep M, K or d over modes and seeds");
  add_common(sw, sweep_common);
  std::string axis, values, seeds = "0", modes;
  Index jobs = 1;
  bool resume = false;
  sw->add_option("--sweep", axis, "Sweep axis")->required()->check(CLI::IsMember({"M", "K", "d"}));
  sw->add_option("--values", values, "Comma-separated axis values")->required();
  sw->add_option("--seeds", seeds, "Comma-separated training seeds");
  sw->add_option("--modes", modes, "Comma-separated modes (default: pcaGAN,rcGAN for d, pcaGAN otherwise)");
  sw->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sw->add_flag("--resume", resume, "Skip (axis_value, mode, seed) rows already in results.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return report("usage", e.what(), kExitUsage);
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_common);
    if (tr->parsed()) return cmd_train(train_common, train_data, quiet);
    if (ev->parsed()) return cmd_eval(eval_common, checkpoint, eval_data, split, rem_samples);
    if (sw->parsed()) return cmd_sweep(sweep_common, axis, values, seeds, modes, jobs, resume, quiet);
  } catch (const InvalidArgument& e) {
    return report("bad_config", e.what(), kExitUsage);
  } catch (const DataError& e) {
    return report("data", e.what(), kExitRuntime);
  } catch (const NumericalFailure& e) {
    return report("numerical_failure", e.what(), kExitRuntime);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), kExitRuntime);
  }
  return kExitUsage;
}
