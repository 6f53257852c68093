// SPDX-License-Identifier: Apache-2.0
#include "claimcheck/random.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "claimcheck/digest.hpp"

namespace claimcheck {

Rng Rng::substream(std::uint64_t root_seed, std::string_view name) {
  const std::string key = std::to_string(root_seed) + "/" + std::string(name);
  const Digest128 d = content_hash128(key);
  return Rng(d.hi ^ d.lo);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  // Rejection sampling avoids modulo bias.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % n;
}

double Rng::uniform01() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  const double v = lo + (hi - lo) * uniform01();
  return std::clamp(v, lo, hi);
}

}  // namespace claimcheck
