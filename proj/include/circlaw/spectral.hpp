#pragma once

#include <complex>

// Use std::complex as LAPACKE's complex types (a documented lapacke.h hook).
#ifndef lapack_complex_double
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <compare>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "circlaw/ensembles.hpp"

// OpenBLAS exposes this; declared weak so other LAPACK providers still link.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace circlaw {

/// Pin the BLAS backend to one internal thread. Parallelism lives at the
/// replicate level; a threaded BLAS would make results depend on scheduling.
inline void pin_blas_single_thread() noexcept {
  if (openblas_set_num_threads) openblas_set_num_threads(1);
}

/// Eigenvalues of one matrix. scaled means they belong to X / sqrt(n).
struct ComplexSpectrum {
  std::vector<cplx> values;
  bool scaled = false;

  std::size_t n() const noexcept { return values.size(); }
};

class EigenSolverError : public std::runtime_error {
 public:
  EigenSolverError(const std::string& what, std::optional<std::uint64_t> seed)
      : std::runtime_error(what + (seed ? " (matrix seed " + std::to_string(*seed) + ")" : std::string{})),
        seed_(seed) {}
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

 private:
  std::optional<std::uint64_t> seed_;
};

// arg z in (0, 2*pi]; the positive real axis maps to 2*pi.
inline double arg_0_2pi(cplx z) noexcept {
  const double a = std::atan2(z.imag(), z.real());
  return a <= 0 ? a + 2.0 * std::numbers::pi : a;
}

// Base ordering: modulus, then argument in (0, 2*pi].
inline bool magnitude_then_arg_less(cplx a, cplx b) noexcept {
  const double ma = std::abs(a), mb = std::abs(b);
  if (ma != mb) return ma < mb;
  return arg_0_2pi(a) < arg_0_2pi(b);
}

namespace detail {

inline double frobenius_norm(const ComplexMatrix& m) {
  double s = 0;
  for (const cplx& e : m.entries()) s += std::norm(e);
  return std::sqrt(s);
}

}  // namespace detail

/// Relative residual ||X v - lambda v|| / ||X||_F for an approximate
/// eigenvector v of lambda obtained by a few steps of inverse iteration.
inline double eigen_residual(const ComplexMatrix& m, cplx lambda) {
  const auto n = static_cast<lapack_int>(m.n());
  const double norm = detail::frobenius_norm(m);
  if (norm == 0) return std::abs(lambda);
  // Row-major shifted matrix, X - (lambda + delta) I.
  std::vector<cplx> a(m.entries().begin(), m.entries().end());
  const cplx shift = lambda + cplx(norm * 1e-10, norm * 1e-10);
  for (lapack_int i = 0; i < n; ++i) a[i * n + i] -= shift;
  std::vector<lapack_int> piv(n);
  if (LAPACKE_zgetrf(LAPACK_ROW_MAJOR, n, n, a.data(), n, piv.data()) < 0)
    throw std::runtime_error("eigen_residual: zgetrf argument error");
  std::vector<cplx> v(n, 1.0);
  for (int it = 0; it < 3; ++it) {
    LAPACKE_zgetrs(LAPACK_ROW_MAJOR, 'N', n, 1, a.data(), n, piv.data(), v.data(), 1);
    double s = 0;
    for (const cplx& x : v) s += std::norm(x);
    s = std::sqrt(s);
    if (!(s > 0) || !std::isfinite(s)) return std::numeric_limits<double>::infinity();
    for (cplx& x : v) x /= s;
  }
  double r = 0;
  for (lapack_int i = 0; i < n; ++i) {
    cplx acc = 0;
    for (lapack_int j = 0; j < n; ++j) acc += m(i, j) * v[j];
    acc -= lambda * v[i];
    r += std::norm(acc);
  }
  return std::sqrt(r) / norm;
}

/// All n eigenvalues, via LAPACK's dense Schur-based zgeev.
///
/// If scale is set the eigenvalues are divided by sqrt(n). Output is sorted
/// by modulus, then by argument.
inline ComplexSpectrum eigenvalues(const ComplexMatrix& m, bool scale) {
  for (const cplx& e : m.entries())
    if (!std::isfinite(e.real()) || !std::isfinite(e.imag()))
      throw EigenSolverError("eigenvalues: matrix has non-finite entries", m.seed);
  const auto n = static_cast<lapack_int>(m.n());
  // LAPACK's column-major view of the row-major entries is the transpose,
  // which has the same spectrum.
  std::vector<cplx> a(m.entries().begin(), m.entries().end());
  std::vector<cplx> w(n);
  cplx dummy{};
  const lapack_int info =
      LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, w.data(), &dummy, 1, &dummy, 1);
  if (info != 0)
    throw EigenSolverError("eigenvalues: zgeev failed with info " + std::to_string(info), m.seed);

  ComplexSpectrum s;
  s.scaled = scale;
  s.values.reserve(n);
  const double inv = scale ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0;
  for (const cplx& x : w) s.values.push_back(x * inv);
  std::sort(s.values.begin(), s.values.end(), magnitude_then_arg_less);
#ifndef NDEBUG
  {
    const cplx raw = s.values.back() / inv;
    assert(eigen_residual(m, raw) <= 1e-6 && "eigenpair residual check failed");
  }
#endif
  return s;
}

/// Sort keys of the spiral order: (floor(sqrt(n)|z|), arg z in (0, 2pi], |z|).
struct SpiralKey {
  bool zero = false;
  std::int64_t shell = 0;
  double arg = 0;
  double modulus = 0;
};

inline SpiralKey spiral_key(cplx z, std::uint64_t n) noexcept {
  if (z == cplx{}) return {true, 0, 0, 0};
  const double mod = std::abs(z);
  const double rn = std::sqrt(static_cast<double>(n));
  const double t = rn * mod;
  // Moduli within 1e-12 of a shell boundary k / sqrt(n) are snapped to it.
  const double k = std::nearbyint(t);
  const double shell = std::abs(mod - k / rn) <= 1e-12 ? k : std::floor(t);
  return {false, static_cast<std::int64_t>(shell), arg_0_2pi(z), mod};
}

inline std::weak_ordering spiral_compare(const SpiralKey& a, const SpiralKey& b) noexcept {
  if (a.zero || b.zero) return b.zero <=> a.zero;  // zero first
  if (a.shell != b.shell) return a.shell <=> b.shell;
  if (a.arg != b.arg) return a.arg < b.arg ? std::weak_ordering::less : std::weak_ordering::greater;
  if (a.modulus != b.modulus) return a.modulus < b.modulus ? std::weak_ordering::less : std::weak_ordering::greater;
  return std::weak_ordering::equivalent;
}

inline std::weak_ordering spiral_compare(cplx w, cplx z, std::uint64_t n) noexcept {
  return spiral_compare(spiral_key(w, n), spiral_key(z, n));
}

/// Stable sort of a spectrum by the spiral order with parameter s.n().
inline ComplexSpectrum spiral_sort(ComplexSpectrum s) {
  const std::uint64_t n = s.n();
  struct Item {
    SpiralKey key;
    cplx value;
  };
  std::vector<Item> items;
  items.reserve(n);
  for (const cplx& v : s.values) items.push_back({spiral_key(v, n), v});
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) { return spiral_compare(a.key, b.key) < 0; });
  for (std::size_t i = 0; i < items.size(); ++i) s.values[i] = items[i].value;
  return s;
}

// Regions used for eigenvalue counting.
struct Disk {
  cplx center;
  double radius = 0;  // open: |z - center| < radius
};

struct Square {
  double a = 0, b = 0, c = 0, d = 0;  // half-open: a <= Re z < b, c <= Im z < d

  static Square with_corner(cplx lower_left, double side) {
    if (!(side > 0)) throw std::invalid_argument("Square: side must be positive");
    return {lower_left.real(), lower_left.real() + side, lower_left.imag(), lower_left.imag() + side};
  }
  static Square from_bounds(double a, double b, double c, double d) {
    if (!(b > a) || !(d > c)) throw std::invalid_argument("Square: side must be positive");
    if (std::abs((b - a) - (d - c)) > 1e-12 * std::max(1.0, b - a))
      throw std::invalid_argument("Square: b - a must equal d - c");
    return {a, b, c, d};
  }
  double side() const noexcept { return b - a; }
};

struct Annulus {
  double r_in = 0, r_out = 0;  // closed: r_in <= |z| <= r_out
};

using Region = std::variant<Disk, Square, Annulus>;

inline bool contains(const Region& r, cplx z) noexcept {
  struct Visitor {
    cplx z;
    bool operator()(const Disk& d) const { return std::abs(z - d.center) < d.radius; }
    bool operator()(const Square& s) const {
      return s.a <= z.real() && z.real() < s.b && s.c <= z.imag() && z.imag() < s.d;
    }
    bool operator()(const Annulus& a) const {
      const double m = std::abs(z);
      return a.r_in <= m && m <= a.r_out;
    }
  };
  return std::visit(Visitor{z}, r);
}

inline std::size_t count_in_region(std::span<const cplx> values, const Region& r) {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [&](cplx z) { return contains(r, z); }));
}

inline std::size_t count_in_region(const ComplexSpectrum& s, const Region& r) { return count_in_region(s.values, r); }

inline double spectral_radius(std::span<const cplx> values) noexcept {
  double r = 0;
  for (const cplx& z : values) r = std::max(r, std::abs(z));
  return r;
}

inline double spectral_radius(const ComplexSpectrum& s) noexcept { return spectral_radius(s.values); }

}  // namespace circlaw
