#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "circlaw/rng.hpp"

namespace circlaw {

using cplx = std::complex<double>;

enum class AtomKind { complex_gaussian, real_gaussian, rademacher, custom_discrete };

inline std::string_view to_string(AtomKind k) {
  switch (k) {
    case AtomKind::complex_gaussian: return "complex-gaussian";
    case AtomKind::real_gaussian: return "real-gaussian";
    case AtomKind::rademacher: return "rademacher";
    case AtomKind::custom_discrete: return "custom-discrete";
  }
  return "unknown";
}

inline AtomKind atom_kind_from_string(std::string_view s) {
  if (s == "complex-gaussian" || s == "ginibre") return AtomKind::complex_gaussian;
  if (s == "real-gaussian") return AtomKind::real_gaussian;
  if (s == "rademacher") return AtomKind::rademacher;
  if (s == "custom-discrete") return AtomKind::custom_discrete;
  throw std::invalid_argument("unknown atom distribution kind: " + std::string(s));
}

struct MomentSummary {
  cplx mean;
  double abs_second = 0;  // E|xi|^2
  cplx second;            // E xi^2
  double abs_fourth = 0;  // E|xi|^4
};

/// Entry distribution of an iid matrix. Always mean zero, unit variance.
class AtomDistribution {
 public:
  static AtomDistribution complex_gaussian() { return AtomDistribution(AtomKind::complex_gaussian); }
  static AtomDistribution real_gaussian() { return AtomDistribution(AtomKind::real_gaussian); }
  static AtomDistribution rademacher() { return AtomDistribution(AtomKind::rademacher); }

  // Finite discrete atom. Throws std::invalid_argument unless the
  // probabilities are a distribution (sum 1 within 1e-12) with mean 0 and
  // E|xi|^2 = 1.
  static AtomDistribution custom_discrete(std::vector<cplx> atoms, std::vector<double> probs) {
    constexpr double tol = 1e-12;
    if (atoms.empty() || atoms.size() != probs.size())
      throw std::invalid_argument("custom-discrete: atoms and probs must be nonempty and of equal length");
    double total = 0;
    cplx mean = 0;
    double var = 0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      if (!(probs[i] >= 0) || !std::isfinite(probs[i]))
        throw std::invalid_argument("custom-discrete: probabilities must be finite and nonnegative");
      if (!std::isfinite(atoms[i].real()) || !std::isfinite(atoms[i].imag()))
        throw std::invalid_argument("custom-discrete: atoms must be finite");
      total += probs[i];
      mean += probs[i] * atoms[i];
      var += probs[i] * std::norm(atoms[i]);
    }
    if (std::abs(total - 1.0) > tol)
      throw std::invalid_argument("custom-discrete: probabilities sum to " + std::to_string(total) + ", not 1");
    if (std::abs(mean) > tol) throw std::invalid_argument("custom-discrete: atom mean is not zero");
    if (std::abs(var - 1.0) > tol) throw std::invalid_argument("custom-discrete: E|xi|^2 is not 1");
    AtomDistribution d(AtomKind::custom_discrete);
    d.atoms_ = std::move(atoms);
    d.probs_ = std::move(probs);
    d.cumulative_.resize(d.probs_.size());
    double c = 0;
    for (std::size_t i = 0; i < d.probs_.size(); ++i) d.cumulative_[i] = (c += d.probs_[i]);
    return d;
  }

  AtomKind kind() const noexcept { return kind_; }
  std::span<const cplx> atoms() const noexcept { return atoms_; }
  std::span<const double> probs() const noexcept { return probs_; }

  // True when every draw is real.
  bool is_real() const noexcept {
    if (kind_ == AtomKind::complex_gaussian) return false;
    if (kind_ != AtomKind::custom_discrete) return true;
    for (std::size_t i = 0; i < atoms_.size(); ++i)
      if (probs_[i] > 0 && atoms_[i].imag() != 0) return false;
    return true;
  }

  cplx sample(CounterRng& rng) const {
    switch (kind_) {
      case AtomKind::complex_gaussian: {
        // Real and imaginary parts iid N(0, 1/2).
        double a, b;
        rng.normal_pair(a, b);
        return {a * std::numbers::sqrt2 / 2, b * std::numbers::sqrt2 / 2};
      }
      case AtomKind::real_gaussian: return {rng.normal(), 0.0};
      case AtomKind::rademacher: return {(rng.next_u64() >> 63) ? 1.0 : -1.0, 0.0};
      case AtomKind::custom_discrete: {
        const double u = rng.uniform() * cumulative_.back();
        for (std::size_t i = 0; i + 1 < cumulative_.size(); ++i)
          if (u < cumulative_[i]) return atoms_[i];
        return atoms_.back();
      }
    }
    return {};
  }

 private:
  explicit AtomDistribution(AtomKind k) : kind_(k) {}

  AtomKind kind_;
  std::vector<cplx> atoms_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

inline MomentSummary atom_moments(const AtomDistribution& d) {
  switch (d.kind()) {
    case AtomKind::complex_gaussian: return {0.0, 1.0, 0.0, 2.0};
    case AtomKind::real_gaussian: return {0.0, 1.0, 1.0, 3.0};
    case AtomKind::rademacher: return {0.0, 1.0, 1.0, 1.0};
    case AtomKind::custom_discrete: break;
  }
  MomentSummary m;
  for (std::size_t i = 0; i < d.atoms().size(); ++i) {
    const cplx a = d.atoms()[i];
    const double p = d.probs()[i];
    m.mean += p * a;
    m.abs_second += p * std::norm(a);
    m.second += p * a * a;
    m.abs_fourth += p * std::norm(a) * std::norm(a);
  }
  return m;
}

/// Dense square complex matrix, row-major.
class ComplexMatrix {
 public:
  explicit ComplexMatrix(std::size_t n) : n_(n), data_(n * n) {
    if (n == 0) throw std::invalid_argument("ComplexMatrix: n must be positive");
  }
  ComplexMatrix(std::size_t n, std::vector<cplx> row_major) : n_(n), data_(std::move(row_major)) {
    if (n == 0 || data_.size() != n * n) throw std::invalid_argument("ComplexMatrix: entries must be n*n");
  }

  std::size_t n() const noexcept { return n_; }
  cplx& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
  std::span<const cplx> entries() const noexcept { return data_; }
  std::span<cplx> entries() noexcept { return data_; }

  // Seed the matrix was sampled from, if any; carried for error reports.
  std::optional<std::uint64_t> seed;

  bool operator==(const ComplexMatrix& o) const noexcept { return n_ == o.n_ && data_ == o.data_; }

 private:
  std::size_t n_;
  std::vector<cplx> data_;
};

/// n x n matrix of iid draws from dist.
///
/// Entry (i, j) is drawn from its own counter stream keyed by (seed, i*n+j),
/// so the result does not depend on fill order.
inline ComplexMatrix sample_matrix(const AtomDistribution& dist, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_matrix: n must be positive");
  ComplexMatrix m(n);
  const std::uint64_t base = mix64(seed);
  auto e = m.entries();
  for (std::size_t k = 0; k < e.size(); ++k) {
    CounterRng rng(hash_combine(base, k));
    e[k] = dist.sample(rng);
  }
  m.seed = seed;
  return m;
}

}  // namespace circlaw
