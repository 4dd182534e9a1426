#pragma once

#include <cstdint>
#include <random>

namespace glab {

/// SplitMix64 finalizer; used to derive independent engine seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// A standard-normal stream owned by exactly one chain (or one training run).
///
/// Substreams are derived from (seed, stream index) only, so the sequence a
/// chain sees does not depend on which thread runs it or in what order.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace glab
