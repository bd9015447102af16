#pragma once

#include <cstdint>
#include <random>

namespace advnet {

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derive an independent seed from a master seed and up to two keys.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return mix64(mix64(mix64(master) ^ a) + 0x632be59bd9b4e019ULL * (b + 1));
}

/// Top 53 bits mapped to [0, 1).
constexpr double unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Counter-based uniform stream: value depends only on (stream key, counter),
/// never on call order, so parallel schedules reproduce serial results.
class KeyedStream {
 public:
  constexpr explicit KeyedStream(std::uint64_t key) noexcept : key_(mix64(key)) {}
  constexpr double uniform(std::uint64_t counter) const noexcept {
    return unit_interval(mix64(key_ ^ mix64(counter + 0x2545f4914f6cdd1dULL)));
  }
  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
};

using Engine = std::mt19937_64;

/// Uniform double in [0,1), portable across standard libraries.
inline double uniform01(Engine& rng) { return unit_interval(rng()); }

/// Uniform index in [0, n) by rejection, portable across standard libraries.
std::uint64_t uniform_index(Engine& rng, std::uint64_t n);

/// Fisher-Yates with `uniform_index`.
template <class It>
void portable_shuffle(It first, It last, Engine& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace advnet
