#pragma once

// Independent reference implementations used only by the tests. None of
// these share code paths with the library routines they check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

/// Minimum over all n! permutations of the mean pairing distance.
inline double brute_force_w1(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  std::vector<std::size_t> p(a.size());
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[p[k]]);
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best / static_cast<double>(a.size());
}

/// Binomial coefficient by the multiplicative formula in 128-bit integers;
/// exact for the n <= 60 range used here.
inline unsigned __int128 choose(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// P(|I \ J| = j) as a ratio of exact integer counts.
inline long double hypergeom_pmf(std::uint64_t n, std::uint64_t K, std::uint64_t J, std::uint64_t j) {
  if (j > n - J || K < j || K - j > J) return 0.0L;
  const auto num = choose(n - J, j) * choose(J, K - j);
  return static_cast<long double>(num) / static_cast<long double>(choose(n, K));
}

/// Smallest N with N^2 >= n, by integer search.
inline std::uint64_t ceil_sqrt_search(std::uint64_t n) {
  std::uint64_t N = 0;
  while (N * N < n) ++N;
  return N;
}

/// Characteristic polynomial coefficients (monic, highest degree first) by
/// the Faddeev-LeVerrier recursion, for a row-major n x n matrix.
inline std::vector<cplx> char_poly(const std::vector<cplx>& A, std::size_t n) {
  std::vector<cplx> c(n + 1);
  c[0] = 1.0;
  std::vector<cplx> M(n * n, 0.0), AM(n * n);
  for (std::size_t k = 1; k <= n; ++k) {
    // M_k = A M_{k-1} + c_{k-1} I
    std::vector<cplx> Mk(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        cplx s = 0;
        for (std::size_t t = 0; t < n; ++t) s += A[i * n + t] * M[t * n + j];
        Mk[i * n + j] = s + (i == j ? c[k - 1] : cplx{});
      }
    M = Mk;
    cplx tr = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 0; t < n; ++t) tr += A[i * n + t] * M[t * n + i];
    c[k] = -tr / static_cast<double>(k);
  }
  return c;
}

/// All roots of a monic polynomial by Durand-Kerner iteration.
inline std::vector<cplx> poly_roots(const std::vector<cplx>& c) {
  const std::size_t n = c.size() - 1;
  std::vector<cplx> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = std::pow(cplx(0.4, 0.9), static_cast<double>(i));
  auto eval = [&](cplx x) {
    cplx v = 0;
    for (const cplx& ck : c) v = v * x + ck;
    return v;
  };
  for (int it = 0; it < 2000; ++it) {
    double change = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cplx den = 1;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) den *= z[i] - z[j];
      const cplx step = eval(z[i]) / den;
      z[i] -= step;
      change = std::max(change, std::abs(step));
    }
    if (change < 1e-15) break;
  }
  return z;
}

/// Kolmogorov distribution survival function, plain alternating series.
inline double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0;
  for (int k = 1; k <= 200; ++k) s += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace oracle
