#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "circlaw/ensembles.hpp"

using namespace circlaw;

namespace {

struct EmpiricalMoments {
  cplx mean;
  double abs2 = 0;
  cplx second;
  double abs4 = 0;
};

EmpiricalMoments empirical(const AtomDistribution& d, std::size_t n, std::uint64_t seed) {
  const ComplexMatrix m = sample_matrix(d, n, seed);
  EmpiricalMoments e;
  for (const cplx& x : m.entries()) {
    e.mean += x;
    e.abs2 += std::norm(x);
    e.second += x * x;
    e.abs4 += std::norm(x) * std::norm(x);
  }
  const double N = static_cast<double>(n * n);
  e.mean /= N;
  e.abs2 /= N;
  e.second /= N;
  e.abs4 /= N;
  return e;
}

}  // namespace

TEST(AtomDistribution, NamesRoundTrip) {
  for (auto k : {AtomKind::complex_gaussian, AtomKind::real_gaussian, AtomKind::rademacher, AtomKind::custom_discrete})
    EXPECT_EQ(atom_kind_from_string(to_string(k)), k);
  EXPECT_EQ(atom_kind_from_string("ginibre"), AtomKind::complex_gaussian);
  EXPECT_THROW(atom_kind_from_string("cauchy"), std::invalid_argument);
}

TEST(AtomDistribution, ClosedFormMoments) {
  const auto cg = atom_moments(AtomDistribution::complex_gaussian());
  EXPECT_EQ(cg.abs_second, 1.0);
  EXPECT_EQ(cg.second, cplx(0.0));
  EXPECT_EQ(cg.abs_fourth, 2.0);
  const auto rg = atom_moments(AtomDistribution::real_gaussian());
  EXPECT_EQ(rg.second, cplx(1.0));
  EXPECT_EQ(rg.abs_fourth, 3.0);
  const auto rad = atom_moments(AtomDistribution::rademacher());
  EXPECT_EQ(rad.second, cplx(1.0));
  EXPECT_EQ(rad.abs_fourth, 1.0);
}

TEST(AtomDistribution, EmpiricalMomentsMatch) {
  struct Case {
    AtomDistribution d;
    double tol4;
  };
  for (const auto& [d, tol4] : {Case{AtomDistribution::complex_gaussian(), 0.03}, Case{AtomDistribution::real_gaussian(), 0.05},
                                Case{AtomDistribution::rademacher(), 1e-12}}) {
    const auto m = atom_moments(d);
    const auto e = empirical(d, 400, 17);
    EXPECT_LT(std::abs(e.mean), 0.01) << to_string(d.kind());
    EXPECT_NEAR(e.abs2, m.abs_second, 0.01) << to_string(d.kind());
    EXPECT_LT(std::abs(e.second - m.second), 0.01) << to_string(d.kind());
    EXPECT_NEAR(e.abs4, m.abs_fourth, tol4) << to_string(d.kind());
  }
}

TEST(AtomDistribution, ComplexGaussianPartsHaveHalfVariance) {
  const ComplexMatrix m = sample_matrix(AtomDistribution::complex_gaussian(), 300, 5);
  double re2 = 0, im2 = 0, cross = 0;
  for (const cplx& x : m.entries()) {
    re2 += x.real() * x.real();
    im2 += x.imag() * x.imag();
    cross += x.real() * x.imag();
  }
  const double N = 300.0 * 300.0;
  EXPECT_NEAR(re2 / N, 0.5, 0.01);
  EXPECT_NEAR(im2 / N, 0.5, 0.01);
  EXPECT_NEAR(cross / N, 0.0, 0.01);
}

TEST(AtomDistribution, CustomDiscreteValidation) {
  EXPECT_NO_THROW(AtomDistribution::custom_discrete({1.0, -1.0}, {0.5, 0.5}));
  EXPECT_THROW(AtomDistribution::custom_discrete({1.0, -1.0}, {0.6, 0.5}), std::invalid_argument);
  EXPECT_THROW(AtomDistribution::custom_discrete({2.0, -1.0}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(AtomDistribution::custom_discrete({2.0, -2.0}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(AtomDistribution::custom_discrete({1.0}, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(AtomDistribution::custom_discrete({}, {}), std::invalid_argument);
  EXPECT_THROW(AtomDistribution::custom_discrete({1.0, -1.0}, {1.5, -0.5}), std::invalid_argument);
}

TEST(AtomDistribution, CustomDiscreteMomentsAndSampling) {
  // Fourth roots of unity: E xi^2 = 0, E|xi|^4 = 1.
  const auto d = AtomDistribution::custom_discrete({1.0, cplx(0, 1), -1.0, cplx(0, -1)}, {0.25, 0.25, 0.25, 0.25});
  const auto m = atom_moments(d);
  EXPECT_NEAR(std::abs(m.second), 0.0, 1e-15);
  EXPECT_NEAR(m.abs_fourth, 1.0, 1e-15);
  EXPECT_FALSE(d.is_real());
  const ComplexMatrix x = sample_matrix(d, 50, 9);
  for (const cplx& e : x.entries()) EXPECT_NEAR(std::abs(e), 1.0, 0.0);
  // Asymmetric two-point atom with mean zero and unit variance.
  const double p = 0.2, a = std::sqrt((1 - p) / p), b = -std::sqrt(p / (1 - p));
  const auto two = AtomDistribution::custom_discrete({a, b}, {p, 1 - p});
  EXPECT_TRUE(two.is_real());
  const auto e = empirical(two, 300, 4);
  EXPECT_NEAR(e.mean.real(), 0.0, 0.01);
  EXPECT_NEAR(e.abs2, 1.0, 0.02);
}

TEST(SampleMatrix, SeededAndOrderIndependent) {
  const auto d = AtomDistribution::complex_gaussian();
  const ComplexMatrix a = sample_matrix(d, 20, 123);
  const ComplexMatrix b = sample_matrix(d, 20, 123);
  const ComplexMatrix c = sample_matrix(d, 20, 124);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == c);
  ASSERT_TRUE(a.seed.has_value());
  EXPECT_EQ(*a.seed, 123u);
  // Entry k depends only on (seed, k): a larger matrix agrees on the shared
  // linear indices.
  const ComplexMatrix big = sample_matrix(d, 21, 123);
  for (std::size_t k = 0; k < 20; ++k) EXPECT_EQ(a.entries()[k], big.entries()[k]);
}

TEST(SampleMatrix, RejectsEmpty) {
  EXPECT_THROW(sample_matrix(AtomDistribution::rademacher(), 0, 1), std::invalid_argument);
  EXPECT_THROW(ComplexMatrix(2, std::vector<cplx>(3)), std::invalid_argument);
}

TEST(SampleMatrix, RademacherEntriesArePlusMinusOne) {
  const ComplexMatrix m = sample_matrix(AtomDistribution::rademacher(), 64, 2);
  int plus = 0;
  for (const cplx& x : m.entries()) {
    ASSERT_TRUE(x == cplx(1.0) || x == cplx(-1.0));
    plus += x.real() > 0;
  }
  EXPECT_NEAR(plus / 4096.0, 0.5, 0.05);
}
