#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace rasr::rng {

// Uniform draw in [0, bound) by rejection. Depends only on the standardized
// mt19937_64 output sequence, unlike std::uniform_int_distribution, so
// results are identical across standard libraries.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % bound;
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

// Uniform in [0,1) using the top 53 bits; same portability rationale.
inline double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform in [-scale, scale).
inline double symmetric_uniform(std::mt19937_64& gen, double scale) {
  return (2.0 * unit_uniform(gen) - 1.0) * scale;
}

// In-place Fisher-Yates with the portable bounded draw.
template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(gen, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace rasr::rng
