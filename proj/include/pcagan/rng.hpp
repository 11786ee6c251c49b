#pragma once

// Counter-based random streams (Philox4x32-10).
//
// A stream is addressed by (seed, stream id). Every draw is a pure function of
// (seed, stream id, position), so shards and parallel workers can regenerate
// any slice of a sequence without replaying what precedes it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

#include <Eigen/Core>

namespace pcagan {

inline constexpr const char* kRngAlgorithm = "philox4x32-10/box-muller";

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

constexpr PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Folds a path of identifiers (purpose tag, epoch, step, ...) into one stream id.
constexpr std::uint64_t stream_id(std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = 0x6A09E667F3BCC908ull;
  for (std::uint64_t part : path) h = splitmix64(h ^ splitmix64(part));
  return h;
}

/// Purpose tags for stream ids. Values are part of the reproducibility contract.
enum class StreamTag : std::uint64_t {
  kPrior = 1,
  kPair = 2,
  kGenInit = 3,
  kDiscInit = 4,
  kShuffle = 5,
  kDiscNoise = 6,
  kGenNoise = 7,
  kPcaNoise = 8,
  kEvalNoise = 9,
  kMonitorNoise = 10,
  kTestNoise = 11,
  kUser = 100,
};

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  RngStream(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> path = {})
      : RngStream(seed, derive(tag, path)) {}

  static std::uint64_t derive(StreamTag tag, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = stream_id({static_cast<std::uint64_t>(tag)});
    for (std::uint64_t part : path) h = splitmix64(h ^ splitmix64(part));
    return h;
  }

  /// Raw 128-bit block at an absolute position of this stream.
  PhiloxBlock block(std::uint64_t index) const {
    return philox4x32_10({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                          static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                         key_);
  }

  /// Uniform in the open interval (0, 1), 53-bit resolution.
  double uniform() {
    if (half_ == 0) fill();
    const double u = uniform_pair_[2 - half_];
    --half_;
    return u;
  }

  /// Standard normal; normal #j is a function of block j/2 only.
  double normal() {
    if (normal_cached_) {
      normal_cached_ = false;
      return cached_normal_;
    }
    const PhiloxBlock b = block(position_++);
    const double u1 = to_unit(b[0], b[1]);
    const double u2 = to_unit(b[2], b[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    normal_cached_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::min<std::uint64_t>(static_cast<std::uint64_t>(uniform() * static_cast<double>(n)), n - 1);
  }

  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = static_cast<Scalar>(normal());
    return out;
  }

  template <typename Scalar = double>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> normal_vector(Eigen::Index n) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
    for (Eigen::Index i = 0; i < n; ++i) out(i) = static_cast<Scalar>(normal());
    return out;
  }

  /// Moves to an absolute block position (drops any cached half-block).
  void seek(std::uint64_t block_index) {
    position_ = block_index;
    half_ = 0;
    normal_cached_ = false;
  }

  std::uint64_t position() const { return position_; }

 private:
  static double to_unit(std::uint32_t lo, std::uint32_t hi) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  void fill() {
    const PhiloxBlock b = block(position_++);
    uniform_pair_[0] = to_unit(b[0], b[1]);
    uniform_pair_[1] = to_unit(b[2], b[3]);
    half_ = 2;
  }

  PhiloxKey key_;
  std::uint64_t stream_;
  std::uint64_t position_ = 0;
  std::array<double, 2> uniform_pair_{};
  int half_ = 0;
  double cached_normal_ = 0.0;
  bool normal_cached_ = false;
};

}  // namespace pcagan
