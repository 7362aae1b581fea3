#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "circlaw/lattice.hpp"
#include "circlaw/rng.hpp"

namespace circlaw {

using cplx = std::complex<double>;

/// A coupling of two equal-size point sets and its average cost.
///
/// permutation[k] is the index in b paired with a[k]; value is
/// (1/n) * sum_k |a[k] - b[permutation[k]]|.
struct TransportResult {
  std::vector<std::size_t> permutation;
  double value = 0;
  std::size_t bad_count = 0;
  // (N(R_l), N_hat(R_l)) per grid cell, grid method only.
  std::optional<std::vector<std::pair<std::size_t, std::size_t>>> per_cell_counts;
};

inline constexpr std::size_t kDefaultExactCap = 4096;

inline double coupling_cost(std::span<const cplx> a, std::span<const cplx> b, std::span<const std::size_t> perm) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[perm[k]]);
  return s / static_cast<double>(a.size());
}

/// Exact W1 between the uniform empirical measures on a and b.
///
/// Min-cost perfect matching by the O(n^3) shortest augmenting path method
/// with dual potentials (Hungarian / Jonker-Volgenant style).
inline TransportResult w1_exact(std::span<const cplx> a, std::span<const cplx> b,
                                std::size_t cap = kDefaultExactCap) {
  if (a.size() != b.size())
    throw std::invalid_argument("w1_exact: size mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  const std::size_t n = a.size();
  if (n == 0) throw std::invalid_argument("w1_exact: empty point sets");
  if (n > cap)
    throw std::length_error("w1_exact: n = " + std::to_string(n) + " exceeds exact-solver cap " + std::to_string(cap));

  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost[i * n + j] = std::abs(a[i] - b[j]);

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based rows/columns; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      const double* row = &cost[(i0 - 1) * n];
      const double ui0 = u[i0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - ui0 - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  TransportResult r;
  r.permutation.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) r.permutation[match[j] - 1] = j - 1;
  r.value = coupling_cost(a, b, r.permutation);
  return r;
}

/// Partition of the square [-C, C)^2 into M x M equal cells.
struct GridSpec {
  double C = 1.25;
  std::size_t cells_per_axis = 1;
  double cell_side = 2.5;

  std::size_t cell_count() const noexcept { return cells_per_axis * cells_per_axis; }
};

inline constexpr double kDefaultBoundingC = 1.25;

/// M = ceil(2C n^{1/4}), so the side 2C/M is at most n^{-1/4} and
/// L = M^2 = Theta(sqrt(n)).
inline GridSpec default_grid(std::size_t n, double C = kDefaultBoundingC) {
  if (n == 0) throw std::invalid_argument("default_grid: n must be positive");
  if (!(C > 1)) throw std::invalid_argument("default_grid: C must exceed 1");
  const double quarter = std::sqrt(std::sqrt(static_cast<double>(n)));
  const auto M = static_cast<std::size_t>(std::ceil(2.0 * C * quarter));
  return {C, M, 2.0 * C / static_cast<double>(M)};
}

/// Cell index of z in row-major order, or grid.cell_count() when z is
/// outside [-C, C)^2.
inline std::size_t grid_cell(const GridSpec& g, cplx z) noexcept {
  const double x = std::floor((z.real() + g.C) / g.cell_side);
  const double y = std::floor((z.imag() + g.C) / g.cell_side);
  const auto M = static_cast<double>(g.cells_per_axis);
  if (!(x >= 0 && x < M && y >= 0 && y < M)) return g.cell_count();
  return static_cast<std::size_t>(y) * g.cells_per_axis + static_cast<std::size_t>(x);
}

/// Per-cell counts of a point set; the last slot is the overflow cell.
inline std::vector<std::size_t> cell_counts(const GridSpec& g, std::span<const cplx> pts) {
  std::vector<std::size_t> counts(g.cell_count() + 1, 0);
  for (const cplx& z : pts) ++counts[grid_cell(g, z)];
  return counts;
}

/// Grid coupling: pair co-cell points cell by cell, then pair the leftovers.
///
/// Within a cell and among leftovers, points are paired in ascending index
/// order. An index is bad when its partner lies in a different cell; points
/// outside the grid are always bad.
inline TransportResult grid_pairing(std::span<const cplx> a, std::span<const cplx> b, const GridSpec& grid) {
  if (a.size() != b.size())
    throw std::invalid_argument("grid_pairing: size mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  const std::size_t n = a.size();
  const std::size_t L = grid.cell_count();
  std::vector<std::vector<std::size_t>> in_a(L + 1), in_b(L + 1);
  for (std::size_t k = 0; k < n; ++k) in_a[grid_cell(grid, a[k])].push_back(k);
  for (std::size_t k = 0; k < n; ++k) in_b[grid_cell(grid, b[k])].push_back(k);

  TransportResult r;
  r.permutation.assign(n, 0);
  r.per_cell_counts.emplace();
  r.per_cell_counts->reserve(L);
  std::vector<std::size_t> left_a, left_b;
  for (std::size_t cell = 0; cell < L; ++cell) {
    const auto& ca = in_a[cell];
    const auto& cb = in_b[cell];
    r.per_cell_counts->emplace_back(ca.size(), cb.size());
    const std::size_t paired = std::min(ca.size(), cb.size());
    for (std::size_t t = 0; t < paired; ++t) r.permutation[ca[t]] = cb[t];
    left_a.insert(left_a.end(), ca.begin() + static_cast<std::ptrdiff_t>(paired), ca.end());
    left_b.insert(left_b.end(), cb.begin() + static_cast<std::ptrdiff_t>(paired), cb.end());
  }
  left_a.insert(left_a.end(), in_a[L].begin(), in_a[L].end());
  left_b.insert(left_b.end(), in_b[L].begin(), in_b[L].end());
  std::sort(left_a.begin(), left_a.end());
  std::sort(left_b.begin(), left_b.end());
  for (std::size_t t = 0; t < left_a.size(); ++t) r.permutation[left_a[t]] = left_b[t];
  r.bad_count = left_a.size();
  r.value = n == 0 ? 0.0 : coupling_cost(a, b, r.permutation);
  return r;
}

/// count iid points, uniform on the closed unit disk.
inline std::vector<cplx> uniform_disk_sample(std::size_t count, std::uint64_t seed) {
  std::vector<cplx> out(count);
  const std::uint64_t base = mix64(seed);
  for (std::size_t k = 0; k < count; ++k) {
    CounterRng rng(hash_combine(base, k));
    const double r = std::sqrt(rng.uniform());
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    out[k] = std::polar(r, theta);
  }
  return out;
}

enum class W1Method { lattice, sample };

struct W1Estimate {
  double value = 0;   // mean over reps
  double stddev = 0;  // across reps; 0 for the lattice method or one rep
  std::size_t reps = 0;
};

/// Estimate of W1(empirical measure of points, uniform disk measure).
///
/// lattice: exact W1 to the predicted-location lattice of size n.
/// sample: mean of exact W1 to fresh uniform disk samples of size n, one per
/// rep, with per-rep seeds derived from seed.
inline W1Estimate w1_to_disk(std::span<const cplx> points, W1Method method, std::size_t reps, std::uint64_t seed,
                             std::size_t cap = kDefaultExactCap) {
  const std::size_t n = points.size();
  if (n > cap) throw std::length_error("w1_to_disk: n exceeds exact-solver cap");
  if (method == W1Method::lattice) {
    const auto lat = lattice(n);
    return {w1_exact(points, lat.points, cap).value, 0.0, 1};
  }
  if (reps == 0) throw std::invalid_argument("w1_to_disk: sample method needs reps >= 1");
  std::vector<double> vals(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto ref = uniform_disk_sample(n, hash_combine(mix64(seed), r));
    vals[r] = w1_exact(points, ref, cap).value;
  }
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(reps);
  double var = 0;
  for (double v : vals) var += (v - mean) * (v - mean);
  const double sd = reps > 1 ? std::sqrt(var / static_cast<double>(reps - 1)) : 0.0;
  return {mean, sd, reps};
}

}  // namespace circlaw
