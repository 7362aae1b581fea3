#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "circlaw/ensembles.hpp"
#include "circlaw/numeric.hpp"
#include "circlaw/rng.hpp"
#include "circlaw/spectral.hpp"
#include "circlaw/transport.hpp"

namespace circlaw {

// ---------------------------------------------------------------------------
// Test functions
// ---------------------------------------------------------------------------

/// A test function f: C -> C with a declared polynomial tail
/// |f(z)| <= tail_C (1 + |z|^tail_m), Lipschitz inside |z| < lipschitz_radius.
struct TestFunction {
  std::string id;
  std::function<cplx(cplx)> evaluate;
  double tail_C = 1;
  unsigned tail_m = 0;
  double lipschitz_radius = 2;
  bool real_valued = false;
  // Exact (df/dx, df/dy) for real-valued built-ins; empty otherwise.
  std::function<std::array<double, 2>(cplx)> gradient;

  cplx operator()(cplx z) const { return evaluate(z); }
};

namespace detail {
inline cplx ipow(cplx z, unsigned k) {
  cplx r = 1.0;
  for (unsigned i = 0; i < k; ++i) r *= z;
  return r;
}
}  // namespace detail

inline TestFunction repow_function(unsigned k) {
  if (k == 0) throw std::invalid_argument("repow_k: k must be positive");
  TestFunction f;
  f.id = "repow_" + std::to_string(k);
  f.evaluate = [k](cplx z) { return cplx(detail::ipow(z, k).real(), 0.0); };
  f.tail_C = 1;
  f.tail_m = k;
  f.real_valued = true;
  f.gradient = [k](cplx z) {
    const cplx d = static_cast<double>(k) * detail::ipow(z, k - 1);
    return std::array<double, 2>{d.real(), -d.imag()};
  };
  return f;
}

/// Built-in test function by id: re, im, abs2, const_1, repow_<k>.
inline TestFunction test_function(std::string_view id) {
  TestFunction f;
  f.id = std::string(id);
  if (id == "re") {
    f.evaluate = [](cplx z) { return cplx(z.real(), 0.0); };
    f.tail_m = 1;
    f.real_valued = true;
    f.gradient = [](cplx) { return std::array<double, 2>{1.0, 0.0}; };
  } else if (id == "im") {
    f.evaluate = [](cplx z) { return cplx(z.imag(), 0.0); };
    f.tail_m = 1;
    f.real_valued = true;
    f.gradient = [](cplx) { return std::array<double, 2>{0.0, 1.0}; };
  } else if (id == "abs2") {
    f.evaluate = [](cplx z) { return cplx(std::norm(z), 0.0); };
    f.tail_m = 2;
    f.real_valued = true;
    f.gradient = [](cplx z) { return std::array<double, 2>{2 * z.real(), 2 * z.imag()}; };
  } else if (id == "const_1") {
    f.evaluate = [](cplx) { return cplx(1.0, 0.0); };
    f.tail_m = 0;
    f.real_valued = true;
    f.gradient = [](cplx) { return std::array<double, 2>{0.0, 0.0}; };
  } else if (id.starts_with("repow_")) {
    unsigned k = 0;
    const auto digits = id.substr(6);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || k == 0)
      throw std::invalid_argument("bad repow_k id: " + std::string(id));
    return repow_function(k);
  } else {
    throw std::invalid_argument("unknown test function id: " + std::string(id));
  }
  return f;
}

/// Spot-check of the declared polynomial tail on random points with
/// modulus up to max_radius (log-uniform in radius).
inline bool check_tail_bound(const TestFunction& f, std::size_t samples, std::uint64_t seed,
                             double max_radius = 1e3) {
  CounterRng rng(seed);
  const double log_max = std::log(max_radius);
  for (std::size_t s = 0; s < samples; ++s) {
    const double r = s == 0 ? 0.0 : std::exp(log_max * (2 * rng.uniform() - 1));
    const cplx z = std::polar(std::min(r, max_radius), 2 * std::numbers::pi * rng.uniform());
    const double bound = f.tail_C * (1 + std::pow(std::abs(z), f.tail_m));
    if (std::abs(f(z)) > bound * (1 + 1e-12)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Linear and partial linear statistics
// ---------------------------------------------------------------------------

/// Sorted, repeat-free subset of [0, n), stored 0-based.
struct IndexSet {
  std::size_t n = 0;
  std::vector<std::size_t> indices;
  // Coupled sampling only: the iid draws collided and a fresh uniform subset
  // was used instead.
  bool fallback = false;

  std::size_t K() const noexcept { return indices.size(); }
};

inline cplx exact_complex_sum(std::span<const cplx> terms) {
  ExactSum re, im;
  for (const cplx& t : terms) {
    re.add(t.real());
    im.add(t.imag());
  }
  return {re.value(), im.value()};
}

/// sum_i f(lambda_i) over a scaled spectrum, correctly rounded.
inline cplx linear_statistic(const ComplexSpectrum& s, const TestFunction& f) {
  if (!s.scaled) throw std::invalid_argument("linear_statistic: spectrum must be scaled by 1/sqrt(n)");
  std::vector<cplx> terms;
  terms.reserve(s.n());
  for (const cplx& z : s.values) terms.push_back(f(z));
  return exact_complex_sum(terms);
}

struct PartialSums {
  cplx kept;     // sum over indices not in I
  cplx removed;  // sum over I
  cplx full;
};

/// Split of the linear statistic into the removed part (indices in I) and
/// the kept part. kept is fl(full - removed) componentwise.
inline PartialSums partial_statistic(const ComplexSpectrum& s, const TestFunction& f, const IndexSet& I) {
  if (I.n != s.n())
    throw std::invalid_argument("partial_statistic: index set population " + std::to_string(I.n) +
                                " does not match spectrum size " + std::to_string(s.n()));
  std::vector<cplx> removed_terms;
  removed_terms.reserve(I.K());
  for (std::size_t i : I.indices) {
    if (i >= s.n()) throw std::out_of_range("partial_statistic: index out of range");
    removed_terms.push_back(f(s.values[i]));
  }
  PartialSums out;
  out.full = linear_statistic(s, f);
  out.removed = exact_complex_sum(removed_terms);
  out.kept = {out.full.real() - out.removed.real(), out.full.imag() - out.removed.imag()};
  return out;
}

namespace detail {
// Floyd's algorithm: uniform K-subset of [0, n).
inline std::vector<std::size_t> floyd_subset(std::size_t n, std::size_t K, CounterRng& rng) {
  std::vector<char> taken(n, 0);
  for (std::size_t j = n - K; j < n; ++j) {
    const auto t = static_cast<std::size_t>(rng.below(j + 1));
    taken[taken[t] ? j : t] = 1;
  }
  std::vector<std::size_t> out;
  out.reserve(K);
  for (std::size_t i = 0; i < n; ++i)
    if (taken[i]) out.push_back(i);
  return out;
}
}  // namespace detail

/// Uniformly random K-subset of [0, n).
///
/// With coupled set, K iid uniform indices are drawn first and used when they
/// are distinct; on a collision a fresh uniform subset is drawn instead. Both
/// routes give the uniform distribution on K-subsets.
inline IndexSet sample_index_set(std::size_t n, std::size_t K, std::uint64_t seed, bool coupled = false) {
  if (K < 1 || K > n)
    throw std::invalid_argument("sample_index_set: K = " + std::to_string(K) + " outside [1, " + std::to_string(n) +
                                "]");
  IndexSet I;
  I.n = n;
  CounterRng rng(seed);
  if (coupled) {
    std::vector<std::size_t> draws(K);
    for (auto& y : draws) y = static_cast<std::size_t>(rng.below(n));
    std::sort(draws.begin(), draws.end());
    if (std::adjacent_find(draws.begin(), draws.end()) == draws.end()) {
      I.indices = std::move(draws);
      return I;
    }
    I.fallback = true;
  }
  I.indices = detail::floyd_subset(n, K, rng);
  return I;
}

// ---------------------------------------------------------------------------
// Thinning bound
// ---------------------------------------------------------------------------

inline double log_binomial(double a, double b) { return std::lgamma(a + 1) - std::lgamma(b + 1) - std::lgamma(a - b + 1); }

namespace detail {
inline void check_thinning_args(std::size_t n, std::size_t K, std::size_t J, std::size_t j) {
  if (K > n || J > n || j > K)
    throw std::invalid_argument("thinning: need 0 <= j <= K <= n and J <= n");
}
}  // namespace detail

/// P(|I \ J| = j) for a uniform K-subset I of [n] and a fixed J with |J| = J_size.
inline double hypergeom_removal_pmf(std::size_t n, std::size_t K, std::size_t J_size, std::size_t j) {
  detail::check_thinning_args(n, K, J_size, j);
  if (j > n - J_size || K - j > J_size) return 0.0;
  const auto nd = static_cast<double>(n), Kd = static_cast<double>(K), Jd = static_cast<double>(J_size),
             jd = static_cast<double>(j);
  return std::exp(log_binomial(nd - Jd, jd) + log_binomial(Jd, Kd - jd) - log_binomial(nd, Kd));
}

inline double binomial_pmf(std::size_t K, double p, std::size_t j) {
  if (j > K) return 0.0;
  if (p <= 0) return j == 0 ? 1.0 : 0.0;
  if (p >= 1) return j == K ? 1.0 : 0.0;
  const auto Kd = static_cast<double>(K), jd = static_cast<double>(j);
  return std::exp(log_binomial(Kd, jd) + jd * std::log(p) + (Kd - jd) * std::log1p(-p));
}

/// exp(K^2/n / sqrt(1 - (K-1)/n)) times the Binomial(K, 1 - |J|/n) pmf at j.
inline double near_binomial_bound(std::size_t n, std::size_t K, std::size_t J_size, std::size_t j) {
  detail::check_thinning_args(n, K, J_size, j);
  if (n == 0) throw std::invalid_argument("near_binomial_bound: n must be positive");
  const auto nd = static_cast<double>(n), Kd = static_cast<double>(K);
  const double prefactor = std::exp(Kd * Kd / nd / std::sqrt(1.0 - (Kd - 1.0) / nd));
  return prefactor * binomial_pmf(K, 1.0 - static_cast<double>(J_size) / nd, j);
}

// ---------------------------------------------------------------------------
// Disk moments and the limiting variance
// ---------------------------------------------------------------------------

struct QuadSpec {
  std::size_t radial_nodes = 48;    // Gauss-Legendre nodes in s = r^2
  std::size_t angular_nodes = 256;  // trapezoid nodes in theta
  std::size_t circle_nodes = 2048;  // trapezoid nodes for Fourier coefficients
  std::size_t k_max = 256;
  double fd_scale = 1e-4;  // central-difference step h = fd_scale * (1 + |z|)
};

struct DiskMoments {
  cplx mean;
  double var_re = 0;
  double var_im = 0;
  double cov = 0;
  double error_estimate = 0;  // max change against a half-resolution grid
};

namespace detail {

struct SecondMoments {
  double xx = 0, yy = 0, xy = 0;
  SecondMoments& operator+=(const SecondMoments& o) {
    xx += o.xx;
    yy += o.yy;
    xy += o.xy;
    return *this;
  }
  friend SecondMoments operator*(double c, const SecondMoments& m) { return {c * m.xx, c * m.yy, c * m.xy}; }
};

// E g(U) for U uniform on the unit disk. With s = r^2 the area element is
// ds dtheta / 2, so the average is a plain product rule on [0,1] x [0, 2pi).
template <typename G>
auto disk_average(G&& g, std::size_t radial, std::size_t angular) {
  const QuadratureRule q = gauss_legendre(radial);
  using R = decltype(g(cplx{}));
  R acc{};
  for (std::size_t i = 0; i < radial; ++i) {
    const double s = 0.5 * (q.nodes[i] + 1.0);
    const double r = std::sqrt(s);
    R ring{};
    for (std::size_t a = 0; a < angular; ++a) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(a) / static_cast<double>(angular);
      ring += g(std::polar(r, theta));
    }
    acc += (0.5 * q.weights[i] / static_cast<double>(angular)) * ring;
  }
  return acc;
}

inline DiskMoments disk_moments_at(const TestFunction& f, std::size_t radial, std::size_t angular) {
  DiskMoments m;
  m.mean = disk_average([&](cplx z) { return f(z); }, radial, angular);
  const auto second = disk_average(
      [&](cplx z) {
        const cplx d = f(z) - m.mean;
        return SecondMoments{d.real() * d.real(), d.imag() * d.imag(), d.real() * d.imag()};
      },
      radial, angular);
  m.var_re = second.xx;
  m.var_im = second.yy;
  m.cov = second.xy;
  return m;
}

}  // namespace detail

/// E f(U), Var Re f(U), Var Im f(U) and Cov(Re f(U), Im f(U)) for U uniform
/// on the unit disk, by Gauss-Legendre in r^2 times the trapezoid rule in
/// theta.
inline DiskMoments disk_moments(const TestFunction& f, const QuadSpec& quad = {}) {
  DiskMoments fine = detail::disk_moments_at(f, quad.radial_nodes, quad.angular_nodes);
  const DiskMoments coarse =
      detail::disk_moments_at(f, std::max<std::size_t>(1, quad.radial_nodes / 2), std::max<std::size_t>(1, quad.angular_nodes / 2));
  fine.error_estimate = std::max({std::abs(fine.mean - coarse.mean), std::abs(fine.var_re - coarse.var_re),
                                  std::abs(fine.var_im - coarse.var_im), std::abs(fine.cov - coarse.cov)});
  return fine;
}

/// The three terms of the limiting variance of the full linear statistic.
struct VarianceBreakdown {
  double sigma2 = 0;
  double gradient_term = 0;
  double fourier_term = 0;
  double moment_term = 0;
  double fourier_tail = 0;  // contribution of the last decade of |k|
  std::string warning;      // nonempty when the Fourier truncation looks unconverged
};

/// Fourier coefficient hat f(k) of f restricted to the unit circle, by the
/// trapezoid rule on `nodes` equispaced points.
inline cplx circle_fourier_coefficient(const std::function<double(cplx)>& g, long k, std::size_t nodes) {
  cplx acc = 0;
  for (std::size_t p = 0; p < nodes; ++p) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(p) / static_cast<double>(nodes);
    acc += g(std::polar(1.0, theta)) * std::polar(1.0, -static_cast<double>(k) * theta);
  }
  return acc / static_cast<double>(nodes);
}

/// Limiting variance of the centered full linear statistic for real-valued f.
///
/// Complex atoms (E xi^2 = 0):
///   (1/4pi) int |grad f|^2 + (1/2) sum |k| |f^(k)|^2 + (E|xi|^4 - 2) (E f(U) - f^(0))^2.
/// Real atoms: the same shape applied to the real-axis symmetrization
/// P f(z) = (f(z) + f(conj z)) / 2, with weights 1/2pi and 1 and E|xi|^4 - 3.
/// Gradients are central differences; the Fourier sum is truncated at k_max.
inline VarianceBreakdown ginibre_variance(const TestFunction& f, const MomentSummary& moments, bool real_atom,
                                          const QuadSpec& quad = {}) {
  if (!f.real_valued) throw std::invalid_argument("ginibre_variance: test function '" + f.id + "' is not real-valued");
  if (real_atom) {
    if (std::abs(moments.second - cplx(1.0)) > 1e-12)
      throw std::invalid_argument("ginibre_variance: real-atom formula needs a real atom (E xi^2 = 1)");
  } else if (std::abs(moments.second) > 1e-12) {
    throw std::invalid_argument("ginibre_variance: complex-atom formula needs E xi^2 = 0");
  }

  const std::function<double(cplx)> g = real_atom
                                            ? std::function<double(cplx)>([&f](cplx z) {
                                                return 0.5 * (f(z).real() + f(std::conj(z)).real());
                                              })
                                            : std::function<double(cplx)>([&f](cplx z) { return f(z).real(); });

  // E |grad g(U)|^2; the disk integral is pi times this.
  const double grad_sq = detail::disk_average(
      [&](cplx z) {
        const double h = quad.fd_scale * (1.0 + std::abs(z));
        const double gx = (g(z + cplx(h, 0)) - g(z - cplx(h, 0))) / (2 * h);
        const double gy = (g(z + cplx(0, h)) - g(z - cplx(0, h))) / (2 * h);
        return gx * gx + gy * gy;
      },
      quad.radial_nodes, quad.angular_nodes);

  double fourier = 0, tail = 0;
  const std::size_t tail_start = quad.k_max / 10;
  for (std::size_t k = 1; k <= quad.k_max; ++k) {
    const auto kl = static_cast<long>(k);
    const double term = static_cast<double>(k) * (std::norm(circle_fourier_coefficient(g, kl, quad.circle_nodes)) +
                                                  std::norm(circle_fourier_coefficient(g, -kl, quad.circle_nodes)));
    fourier += term;
    if (k > tail_start) tail += term;
  }
  const auto fr = [&f](cplx z) { return f(z).real(); };
  const double disk_mean = detail::disk_average(fr, quad.radial_nodes, quad.angular_nodes);
  const double f0 = circle_fourier_coefficient(fr, 0, quad.circle_nodes).real();
  const double gap = disk_mean - f0;

  VarianceBreakdown v;
  if (real_atom) {
    v.gradient_term = grad_sq / 2.0;  // (1/2pi) * pi * E|grad|^2
    v.fourier_term = fourier;
    v.moment_term = (moments.abs_fourth - 3.0) * gap * gap;
  } else {
    v.gradient_term = grad_sq / 4.0;  // (1/4pi) * pi * E|grad|^2
    v.fourier_term = 0.5 * fourier;
    v.moment_term = (moments.abs_fourth - 2.0) * gap * gap;
  }
  v.fourier_tail = real_atom ? tail : 0.5 * tail;
  v.sigma2 = v.gradient_term + v.fourier_term + v.moment_term;
  if (v.fourier_tail > 1e-8 * std::max(1.0, std::abs(v.fourier_term)))
    v.warning = "Fourier series truncated at k_max=" + std::to_string(quad.k_max) +
                " has a non-negligible tail (" + std::to_string(v.fourier_tail) + ")";
  return v;
}

// ---------------------------------------------------------------------------
// Limiting laws
// ---------------------------------------------------------------------------

/// Parameters of the limiting laws: Gaussian part S ~ N(0, sigma2) and the
/// disk moments of f.
struct LimitSpec {
  double sigma2 = 0;
  cplx mean_f;
  double var_re = 0;
  double var_im = 0;
  double cov = 0;
  std::size_t K = 0;
};

inline LimitSpec make_limit_spec(const TestFunction& f, double sigma2, std::size_t K, const QuadSpec& quad = {}) {
  if (!(sigma2 >= 0)) throw std::invalid_argument("make_limit_spec: sigma2 must be nonnegative");
  const DiskMoments m = disk_moments(f, quad);
  return {sigma2, m.mean, std::max(0.0, m.var_re), std::max(0.0, m.var_im), m.cov, K};
}

/// Samples of S - sum_{i=1}^K (f(U_i) - E f(U)), S ~ N(0, sigma2) independent
/// of the iid uniform-disk U_i.
inline std::vector<cplx> limit_sampler_fixed_K(const LimitSpec& spec, const TestFunction& f, std::size_t count,
                                               std::uint64_t seed) {
  if (!(spec.sigma2 >= 0)) throw std::invalid_argument("limit_sampler_fixed_K: sigma2 must be nonnegative");
  std::vector<cplx> out(count);
  const double sd = std::sqrt(spec.sigma2);
  const std::uint64_t base = mix64(seed);
  for (std::size_t c = 0; c < count; ++c) {
    CounterRng rng(hash_combine(base, c));
    const double s = sd * rng.normal();
    cplx sum = 0;
    for (std::size_t i = 0; i < spec.K; ++i) {
      const double r = std::sqrt(rng.uniform());
      const double theta = 2.0 * std::numbers::pi * rng.uniform();
      sum += f(std::polar(r, theta)) - spec.mean_f;
    }
    out[c] = s - sum;
  }
  return out;
}

/// Samples of the centered complex normal with the covariance of f(U).
inline std::vector<cplx> limit_sampler_growing_K(const LimitSpec& spec, std::size_t count, std::uint64_t seed) {
  const double a = std::sqrt(std::max(0.0, spec.var_re));
  const double b = a > 0 ? spec.cov / a : 0.0;
  const double c = std::sqrt(std::max(0.0, spec.var_im - b * b));
  std::vector<cplx> out(count);
  const std::uint64_t base = mix64(seed);
  for (std::size_t k = 0; k < count; ++k) {
    CounterRng rng(hash_combine(base, k));
    double x, y;
    rng.normal_pair(x, y);
    out[k] = {a * x, b * x + c * y};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample statistics and the two-sample KS test
// ---------------------------------------------------------------------------

inline double sample_mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return exact_sum(xs) / static_cast<double>(xs.size());
}

// Unbiased (n - 1) sample covariance.
inline double sample_covariance(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("sample_covariance: size mismatch");
  if (xs.size() < 2) return 0.0;
  const double mx = sample_mean(xs), my = sample_mean(ys);
  ExactSum s;
  for (std::size_t i = 0; i < xs.size(); ++i) s.add((xs[i] - mx) * (ys[i] - my));
  return s.value() / static_cast<double>(xs.size() - 1);
}

inline double sample_variance(std::span<const double> xs) { return sample_covariance(xs, xs); }

/// Survival function of the Kolmogorov distribution, P(K > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form, fast for small lambda.
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8 * lambda * lambda));
    double s = 0;
    for (int k = 1; k <= 15; k += 2) s += std::pow(y, k * k);
    return std::clamp(1.0 - std::sqrt(2 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0;
  for (int k = 1; k <= 100; ++k) {
    const double t = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? t : -t);
    if (t < 1e-300) break;
  }
  return std::clamp(2 * s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0;
  double p_value = 1;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// (Stephens' effective-size correction).
inline KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: samples must be nonempty");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  const double en = std::sqrt(nx * ny / (nx + ny));
  return {d, kolmogorov_survival((en + 0.12 + 0.11 / en) * d)};
}

}  // namespace circlaw
