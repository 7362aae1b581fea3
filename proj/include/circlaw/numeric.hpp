#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace circlaw {

/// Exact floating-point accumulator (Shewchuk's non-overlapping partials).
///
/// value() is the correctly rounded sum of everything added, so the result
/// does not depend on the order of the terms. Terms must be finite.
class ExactSum {
 public:
  void add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  ExactSum& operator+=(double x) {
    add(x);
    return *this;
  }

  double value() const {
    std::size_t n = partials_.size();
    if (n == 0) return 0.0;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      lo = y - (hi - x);
      if (lo != 0.0) break;
    }
    // Round-half-even correction when the remaining partials push past a tie.
    if (n > 0 && ((lo < 0 && partials_[n - 1] < 0) || (lo > 0 && partials_[n - 1] > 0))) {
      const double y = lo * 2;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

inline double exact_sum(std::span<const double> xs) {
  ExactSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

/// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline QuadratureRule gauss_legendre(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: need at least one node");
  QuadratureRule q{std::vector<double>(n), std::vector<double>(n)};
  const auto nd = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const auto kd = static_cast<double>(k);
        const double p2 = ((2 * kd - 1) * x * p1 - (kd - 1) * p0) / kd;
        p0 = p1;
        p1 = p2;
      }
      dp = nd * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = x;
    for (std::size_t k = 2; k <= n; ++k) {
      const auto kd = static_cast<double>(k);
      const double p2 = ((2 * kd - 1) * x * p1 - (kd - 1) * p0) / kd;
      p0 = p1;
      p1 = p2;
    }
    dp = nd * (x * p1 - p0) / (x * x - 1);
    const double w = 2.0 / ((1 - x * x) * dp * dp);
    q.nodes[i] = -x;
    q.nodes[n - 1 - i] = x;
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) q.nodes[n / 2] = 0.0;
  return q;
}

}  // namespace circlaw
