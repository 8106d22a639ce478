#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace pupillo {

/// Mixes a base seed with stream identifiers (epoch, sample index, ...) so
/// every consumer gets an independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> streams);

/// Thin wrapper over mt19937_64. Distributions are computed here rather than
/// with <random> distributions so outputs are identical across standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [lo, hi]. Returns lo when lo == hi.
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

  /// Standard normal (Box-Muller).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pupillo
