#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace circlaw {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
}

// FNV-1a over bytes, used to fold string tags into seeds.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based generator: the k-th output is a pure function of (key, k).
///
/// A stream is fully described by its key, so any sub-stream (one matrix
/// entry, one replicate) can be regenerated without replaying the others.
/// The uniform and normal transforms are written out here instead of using
/// <random> distributions, whose output is implementation-defined.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

  constexpr std::uint64_t next_u64() noexcept { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  // Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  constexpr double uniform_open0() noexcept { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Unbiased integer in [0, bound) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; one pair per call, second value discarded
  // so each call consumes a fixed number of counter steps.
  double normal() noexcept {
    const double u = uniform_open0();
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
  }

  // Two independent standard normals from one Box-Muller pair.
  void normal_pair(double& a, double& b) noexcept {
    const double u = uniform_open0();
    const double v = uniform();
    const double r = std::sqrt(-2.0 * std::log(u));
    a = r * std::cos(2.0 * std::numbers::pi * v);
    b = r * std::sin(2.0 * std::numbers::pi * v);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Seed for one logical random stream of an experiment.
///
/// Streams differ in at least one of (kind, n, replicate, tag); the tag keeps
/// e.g. the matrix entries and the removed index set on unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view kind, std::uint64_t n,
                                 std::uint64_t replicate, std::string_view tag) noexcept {
  std::uint64_t h = mix64(base_seed);
  h = hash_combine(h, fnv1a(kind));
  h = hash_combine(h, n);
  h = hash_combine(h, replicate);
  h = hash_combine(h, fnv1a(tag));
  return h;
}

}  // namespace circlaw
