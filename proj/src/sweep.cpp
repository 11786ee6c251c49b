#include "pcagan/sweep.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "pcagan/datakit.hpp"
#include "pcagan/errors.hpp"
#include "pcagan/serialization.hpp"
#include "pcagan/trainer.hpp"

namespace pcagan {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kM:
      return "M";
    case SweepAxis::kK:
      return "K";
    case SweepAxis::kD:
      return "d";
  }
  return "?";
}

SweepAxis axis_from_string(const std::string& s) {
  if (s == "M") return SweepAxis::kM;
  if (s == "K") return SweepAxis::kK;
  if (s == "d") return SweepAxis::kD;
  throw InvalidArgument("unknown sweep axis '" + s + "' (expected M, K or d)");
}

TrainConfig sweep_point(const SweepSpec& spec, Index value, Mode mode, std::uint64_t seed) {
  TrainConfig c = spec.base;
  switch (spec.axis) {
    case SweepAxis::kM:
      c.M = value;
      break;
    case SweepAxis::kK:
      c.K = value;
      break;
    case SweepAxis::kD:
      c.d = value;
      break;
  }
  c.mode = mode;
  c.seed = seed;
  c.validate();
  return c;
}

std::string results_line(const SweepRow& r) {
  std::ostringstream out;
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.wall_seconds);
  out << r.axis << ',' << r.axis_value << ',' << r.mode << ',' << r.seed << ',' << fmt(r.mean_w2) << ','
      << fmt(r.w2_per_d) << ',' << fmt(r.trace_ratio) << ',' << fmt(r.test_w2) << ',' << r.best_epoch << ','
      << r.status << ',' << wall;
  return out.str();
}

std::vector<SweepRow> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  std::getline(in, line);
  if (line != kResultsHeader) throw DataError(path + ": unexpected results header '" + line + "'");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw DataError(path + ": malformed row '" + line + "'");
    try {
      rows.push_back({f[0], std::stol(f[1]), f[2], std::stoull(f[3]), std::stod(f[4]), std::stod(f[5]),
                      std::stod(f[6]), std::stod(f[7]), std::stol(f[8]), f[9], std::stod(f[10])});
    } catch (const std::exception&) {
      throw DataError(path + ": malformed row '" + line + "'");
    }
  }
  return rows;
}

namespace {

using Key = std::tuple<Index, std::string, std::uint64_t>;

struct Job {
  Index value;
  Mode mode;
  std::uint64_t seed;
};

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

// Datasets shared by every run with the same problem and split settings.
class DataCache {
 public:
  std::shared_ptr<const DatasetHandle> get(const TrainConfig& c) {
    const std::string key = to_json(c)["problem"].dump() + to_json(c)["data"].dump();
    std::shared_ptr<Entry> entry;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto& slot = entries_[key];
      if (!slot) slot = std::make_shared<Entry>();
      entry = slot;
    }
    std::call_once(entry->once, [&] { entry->data = std::make_shared<const DatasetHandle>(generate_dataset(c)); });
    return entry->data;
  }

 private:
  struct Entry {
    std::once_flag once;
    std::shared_ptr<const DatasetHandle> data;
  };
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
};

}  // namespace

SweepResult run_sweep(const SweepSpec& spec) {
  require(!spec.values.empty() && !spec.modes.empty() && !spec.seeds.empty(), "sweep needs values, modes and seeds");
  require(!spec.out_dir.empty(), "sweep needs an output directory");
  require(spec.jobs >= 1, "--jobs must be positive");

  std::vector<Job> jobs;
  for (Index v : spec.values)
    for (Mode m : spec.modes)
      for (std::uint64_t s : spec.seeds) jobs.push_back({v, m, s});
  // Validate every point before any work starts.
  for (const Job& j : jobs) sweep_point(spec, j.value, j.mode, j.seed);

  const fs::path out(spec.out_dir);
  fs::create_directories(out);
  const fs::path csv_path = out / "results.csv";
  const std::string axis = to_string(spec.axis);

  std::vector<SweepRow> previous;
  if (spec.resume && fs::exists(csv_path)) previous = read_results(csv_path.string());
  std::map<Key, SweepRow> done;
  for (const auto& row : previous) {
    if (row.axis != axis) throw DataError(csv_path.string() + " holds a sweep over " + row.axis + ", not " + axis);
    done.emplace(Key{row.axis_value, row.mode, row.seed}, row);
  }

  SweepResult result;
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (done.count(Key{jobs[i].value, to_string(jobs[i].mode), jobs[i].seed}))
      ++result.skipped;
    else
      todo.push_back(i);
  }

  std::mutex mutex;
  // Rows in job order, then any resumed rows outside this job list.
  const auto flush = [&] {
    std::string text = std::string(kResultsHeader) + "\n";
    std::map<Key, bool> written;
    for (const Job& j : jobs) {
      const Key k{j.value, to_string(j.mode), j.seed};
      const auto it = done.find(k);
      if (it == done.end()) continue;
      text += results_line(it->second) + "\n";
      written[k] = true;
    }
    for (const auto& row : previous)
      if (!written.count(Key{row.axis_value, row.mode, row.seed})) text += results_line(row) + "\n";
    write_text(csv_path, text);
  };

  json manifest = {{"axis", axis},
                   {"values", spec.values},
                   {"modes", json::array()},
                   {"seeds", spec.seeds},
                   {"profile", spec.profile},
                   {"base_config", to_json(spec.base)},
                   {"base_config_hash", hex64(config_hash(spec.base))},
                   {"rng", kRngAlgorithm},
                   {"results", "results.csv"},
                   {"columns", kResultsHeader},
                   {"column_notes",
                    {{"mean_w2", "validation W2 (mean over eval.val_ys measurements) of the checkpoint with the lowest "
                                 "validation W2"},
                     {"w2_per_d", "mean_w2 / d"},
                     {"trace_ratio", "mean over validation measurements of tr(generated cov) / tr(posterior cov) at "
                                     "the selected checkpoint"},
                     {"test_w2", "mean W2 over eval.test_ys test measurements at the selected checkpoint"},
                     {"best_epoch", "epochs completed at the selected checkpoint (0 = untrained)"},
                     {"status", "completed | diverged | numerical_failure"},
                     {"wall_seconds", "training and evaluation time of the run"}}}};
  for (Mode m : spec.modes) manifest["modes"].push_back(to_string(m));
  write_json_file((out / "manifest.json").string(), manifest);
  {
    std::lock_guard<std::mutex> lock(mutex);
    flush();
  }

  DataCache cache;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  const auto worker = [&] {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size()) return;
      {
        std::lock_guard<std::mutex> lock(mutex);
        if (failure) return;
      }
      const Job& job = jobs[todo[slot]];
      try {
        const TrainConfig c = sweep_point(spec, job.value, job.mode, job.seed);
        const auto started = std::chrono::steady_clock::now();
        const auto data = cache.get(c);
        const RunRecord rec = train(c, *data);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        SweepRow row{axis,
                     job.value,
                     to_string(job.mode),
                     job.seed,
                     rec.best_val_w2,
                     rec.best_val_w2 / static_cast<double>(c.d),
                     rec.rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : rec.rows[static_cast<std::size_t>(rec.best_epoch)].trace_ratio,
                     rec.test_w2,
                     rec.best_epoch,
                     rec.status,
                     wall};
        if (spec.write_runs) {
          const fs::path run_dir =
              out / "runs" / (axis + "=" + std::to_string(job.value) + "_" + row.mode + "_seed" + std::to_string(job.seed));
          write_text(run_dir / "record.csv", record_csv(rec));
          save_checkpoint(rec.best, (run_dir / "checkpoint.json").string());
          write_json_file((run_dir / "manifest.json").string(), record_manifest(rec, "checkpoint.json"));
        }
        std::lock_guard<std::mutex> lock(mutex);
        done[Key{job.value, row.mode, job.seed}] = row;
        ++result.ran;
        if (rec.status == "diverged") result.any_diverged = true;
        if (rec.status == "numerical_failure") result.any_failed = true;
        flush();
        if (spec.log)
          spec.log(axis + "=" + std::to_string(job.value) + " " + row.mode + " seed " + std::to_string(job.seed) +
                   ": W2/d " + fmt(row.w2_per_d) + " (" + rec.status + ", " + std::to_string(wall) + " s)");
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const Index n_threads = std::min<Index>(spec.jobs, static_cast<Index>(std::max<std::size_t>(todo.size(), 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (Index t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const Job& j : jobs) result.rows.push_back(done.at(Key{j.value, to_string(j.mode), j.seed}));
  for (const auto& row : previous) {
    bool in_jobs = false;
    for (const Job& j : jobs)
      in_jobs = in_jobs || (row.axis_value == j.value && row.mode == to_string(j.mode) && row.seed == j.seed);
    if (!in_jobs) result.rows.push_back(row);
  }
  return result;
}

}  // namespace pcagan
