#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace circlaw {

// Largest r with r*r <= v.
inline std::uint64_t isqrt(std::uint64_t v) noexcept {
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r;
}

// Smallest r with r*r >= v.
inline std::uint64_t ceil_sqrt(std::uint64_t v) noexcept {
  const std::uint64_t r = isqrt(v);
  return r * r == v ? r : r + 1;
}

/// Structural parameters of the predicted-location lattice for size n.
///
/// N satisfies (N-1)^2 <= n <= N^2, and the first n - m = (N-2)^2 points lie
/// on the spiral rings; the remaining m points are parked at 1.
struct LatticeParams {
  std::uint64_t n = 0;
  std::uint64_t N = 0;
  std::uint64_t m = 0;

  std::uint64_t ring_points() const noexcept { return n - m; }
};

inline constexpr std::uint64_t kMinLatticeN = 9;

inline LatticeParams lattice_params(std::uint64_t n) {
  if (n < kMinLatticeN)
    throw std::domain_error("lattice_params: n must be at least 9, got " + std::to_string(n));
  const std::uint64_t N = ceil_sqrt(n);
  return {n, N, n - (N - 2) * (N - 2)};
}

// ell_i = ceil(sqrt(i)) and q_i = i - (ell_i - 1)^2, for 1-based i.
inline std::uint64_t lattice_ring(std::uint64_t i) noexcept { return ceil_sqrt(i); }
inline std::uint64_t lattice_slot(std::uint64_t i) noexcept {
  const std::uint64_t l = ceil_sqrt(i);
  return i - (l - 1) * (l - 1);
}

namespace detail {
inline std::complex<double> ring_point(std::uint64_t i, std::uint64_t n) {
  const std::uint64_t l = lattice_ring(i);
  const std::uint64_t q = lattice_slot(i);
  const double radius = static_cast<double>(l - 1) / std::sqrt(static_cast<double>(n));
  // q = 2l - 1 is a full turn; reducing it to angle 0 keeps the point exactly
  // on the positive real axis instead of a rounding residue off it.
  const std::uint64_t slots = 2 * l - 1;
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(q % slots) / static_cast<double>(slots);
  return std::polar(radius, angle);
}
}  // namespace detail

/// Predicted location of the i-th eigenvalue (1-based i).
inline std::complex<double> predicted_location(std::uint64_t i, std::uint64_t n) {
  const LatticeParams p = lattice_params(n);
  if (i < 1 || i > n)
    throw std::out_of_range("predicted_location: index " + std::to_string(i) + " outside [1, " +
                            std::to_string(n) + "]");
  if (i > p.ring_points()) return 1.0;
  return detail::ring_point(i, n);
}

struct PredictedLattice {
  LatticeParams params;
  std::vector<std::complex<double>> points;  // points[i-1] is the i-th location
};

inline PredictedLattice lattice(std::uint64_t n) {
  PredictedLattice out{lattice_params(n), {}};
  out.points.reserve(n);
  for (std::uint64_t i = 1; i <= n; ++i)
    out.points.push_back(i > out.params.ring_points() ? std::complex<double>(1.0) : detail::ring_point(i, n));
  return out;
}

}  // namespace circlaw
