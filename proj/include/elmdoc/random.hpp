#pragma once

#include <cstdint>
#include <initializer_list>

namespace elmdoc {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a list of words into one key; order matters.
constexpr std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (std::uint64_t w : words) h = mix64(h ^ mix64(w));
  return h;
}

/// Counter-based random stream: the value at position i depends only on
/// (key, i), so any subset of positions can be generated in any order or
/// on any thread with identical results.
class CounterStream {
 public:
  constexpr explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t bits(std::uint64_t i) const noexcept { return mix64(key_ ^ mix64(i)); }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double unit(std::uint64_t i) const noexcept {
    return static_cast<double>(bits(i) >> 11) * 0x1.0p-53;
  }

  /// Uniform on [lo, hi).
  constexpr double uniform(std::uint64_t i, double lo, double hi) const noexcept {
    return lo + (hi - lo) * unit(i);
  }

  /// Integer in [0, bound) by multiply-shift; bound must be > 0.
  std::uint64_t below(std::uint64_t i, std::uint64_t bound) const noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(i)) * bound) >> 64);
  }

 private:
  std::uint64_t key_;
};

}  // namespace elmdoc
