#pragma once

// Deterministic (x, y) datasets for the Gaussian experiments and their
// on-disk container: magic, version, a JSON header, then little-endian
// float64 payload.

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "pcagan/config.hpp"
#include "pcagan/gaussian_world.hpp"
#include "pcagan/serialization.hpp"

namespace pcagan {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

struct SplitCounts {
  Index train = 0;
  Index val = 0;
  Index test = 0;

  Index total() const { return train + val + test; }
  bool operator==(const SplitCounts&) const = default;
};

/// Pairs stored column-wise: xs.col(i), ys.col(i).
struct Split {
  Mat<double> xs;
  Mat<double> ys;

  Index size() const { return xs.cols(); }
};

struct DatasetHandle {
  GaussianPrior<double> prior;
  MeasurementModel<double> mm;
  std::uint64_t seed = 0;
  SplitCounts counts;
  Split train, val, test;

  Index dim() const { return prior.dim(); }
};

bool operator==(const DatasetHandle& a, const DatasetHandle& b);

/// The prior a config refers to: entry d of the chain up to d_max when d is a
/// multiple of 10 not above d_max, otherwise a standalone draw at d.
GaussianPrior<double> prior_for(const TrainConfig& c);
MeasurementModel<double> measurement_for(const TrainConfig& c);

/// Pairs [first, first + count) of the global pair sequence. Pair i always
/// comes from its own stream, so any sub-range can be generated independently.
Split generate_pairs(const GaussianPrior<double>& prior, const MeasurementModel<double>& mm, std::uint64_t seed,
                     Index first, Index count);

/// Train pairs are 0..train-1, then val, then test.
DatasetHandle generate_dataset(const GaussianPrior<double>& prior, const MeasurementModel<double>& mm,
                               const SplitCounts& counts, std::uint64_t seed);
DatasetHandle generate_dataset(const TrainConfig& c);

/// FNV-1a over the little-endian bytes of (mean, eigvals, eigvecs, mask, noise_var).
std::uint64_t prior_hash(const GaussianPrior<double>& prior, const MeasurementModel<double>& mm);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ull);

void save_dataset(const DatasetHandle& h, const std::string& path);
/// Throws VersionMismatch, HashMismatch, ChecksumMismatch or TruncatedFile.
DatasetHandle load_dataset(const std::string& path, std::optional<std::uint64_t> expected_prior_hash = std::nullopt);

}  // namespace pcagan
