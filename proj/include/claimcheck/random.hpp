// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace claimcheck {

// Seeded generator with portable draw helpers. The standard distributions are
// implementation-defined, so draws are derived directly from the mt19937_64
// output stream to keep runs byte-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream derived from a root seed and a stage-specific name.
  static Rng substream(std::uint64_t root_seed, std::string_view name);

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  // Uniform real in [0, 1).
  double uniform01();

  // Uniform real in [lo, hi].
  double uniform(double lo, double hi);

  bool coin() { return (next() >> 63) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace claimcheck
