// Acceptance suite: runs each criterion at its stated size and tolerance and
// prints one PASS/FAIL line per criterion. Exit status is nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "circlaw/circlaw.hpp"
#include "oracles.hpp"

using namespace circlaw;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::size_t worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::vector<cplx> random_square_points(std::size_t n, CounterRng& r, double half_width) {
  std::vector<cplx> pts(n);
  for (auto& z : pts) z = cplx(half_width * (2 * r.uniform() - 1), half_width * (2 * r.uniform() - 1));
  return pts;
}

// 1. Exact transport against brute-force permutation search.
Outcome exact_transport_oracle() {
  CounterRng r(derive_seed(0, "acceptance", 1, 0, "points"));
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + r.below(7);
    const auto a = random_square_points(n, r, 1.0), b = random_square_points(n, r, 1.0);
    worst = std::max(worst, std::abs(w1_exact(a, b).value - oracle::brute_force_w1(a, b)));
  }
  return {worst <= 1e-12, fmt("1000 instances, n <= 7, max |exact - brute force| = %.3g (tol 1e-12)", worst)};
}

// 2. Grid coupling never beats the optimal matching.
Outcome coupling_dominance() {
  CounterRng r(derive_seed(0, "acceptance", 2, 0, "points"));
  int violations = 0;
  double min_gap = INFINITY;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + r.below(256);
    // Points spill past the default square so the overflow cell is exercised.
    const auto a = random_square_points(n, r, 1.3), b = random_square_points(n, r, 1.3);
    const double grid = grid_pairing(a, b, default_grid(n)).value;
    const double exact = w1_exact(a, b).value;
    min_gap = std::min(min_gap, grid - exact);
    // Only rounding in the two cost sums can separate equal-cost couplings.
    if (grid < exact - 1e-12) ++violations;
  }
  return {violations == 0, fmt("200 instances, n <= 256, violations = %d, min(grid - exact) = %.3g", violations, min_gap)};
}

// 3. Exhaustive thinning bound.
Outcome thinning_bound() {
  ExperimentConfig c;
  c.kind = ExperimentKind::thinning_bound;
  c.n_max = 60;
  const auto r = run_thinning_bound(c);
  const auto& s = r.summary;
  return {s.get("violations") == 0.0,
          fmt("%.0f tuples with n <= 60, violations = %.0f, worst ratio %.6f at (n, K, |J|, j) = (%.0f, %.0f, %.0f, %.0f)",
              s.get("tuples"), s.get("violations"), s.get("worst_ratio"), s.get("worst_n"), s.get("worst_K"),
              s.get("worst_J"), s.get("worst_j"))};
}

// 4. Lattice parameter invariants, exhaustively, in integer arithmetic.
Outcome lattice_structure() {
  std::uint64_t failures = 0, first_bad = 0;
  for (std::uint64_t n = 9; n <= 1000000; ++n) {
    const auto p = lattice_params(n);
    const std::uint64_t N = p.N, m = p.m;
    bool ok = (N - 1) * (N - 1) <= n && n <= N * N;
    ok = ok && p.ring_points() == (N - 2) * (N - 2) && m == n - (N - 2) * (N - 2);
    // 2 sqrt(n) - 3 <= m  <=>  4n <= (m + 3)^2, and m <= 4 sqrt(n)  <=>  m^2 <= 16n.
    ok = ok && 4 * n <= (m + 3) * (m + 3) && m * m <= 16 * n;
    if (!ok && failures++ == 0) first_bad = n;
  }
  return {failures == 0, fmt("9 <= n <= 10^6: %llu failures%s", static_cast<unsigned long long>(failures),
                             failures ? fmt(" (first at n = %llu)", static_cast<unsigned long long>(first_bad)).c_str() : "")};
}

// 5. Spiral order axioms on random triples.
Outcome spiral_axioms() {
  CounterRng r(derive_seed(0, "acceptance", 5, 0, "points"));
  auto draw = [&](std::uint64_t n) -> cplx {
    const double rn = std::sqrt(static_cast<double>(n));
    switch (r.below(6)) {
      case 0: return 0.0;
      case 1: return std::polar(static_cast<double>(r.below(4)) / rn, 2 * std::numbers::pi * r.uniform());  // shell edge
      case 2: return std::polar(0.1 + r.uniform(), 2 * std::numbers::pi * static_cast<double>(r.below(6)) / 6);  // shared args
      case 3: return cplx(r.uniform(), 0.0);  // positive real axis, arg 2pi
      default: return std::polar(1.2 * r.uniform(), 2 * std::numbers::pi * r.uniform());
    }
  };
  auto same_key = [](const SpiralKey& a, const SpiralKey& b) {
    return a.zero == b.zero && (a.zero || (a.shell == b.shell && a.arg == b.arg && a.modulus == b.modulus));
  };
  int bad_total = 0, bad_antisym = 0, bad_trans = 0, bad_zero = 0;
  for (int t = 0; t < 100000; ++t) {
    const std::uint64_t n = 9 + r.below(2000);
    const cplx a = draw(n), b = draw(n), c = draw(n);
    const auto ka = spiral_key(a, n), kb = spiral_key(b, n), kc = spiral_key(c, n);
    const auto ab = spiral_compare(ka, kb), ba = spiral_compare(kb, ka);
    const auto bc = spiral_compare(kb, kc), ac = spiral_compare(ka, kc);
    if (!(ab < 0 || ab == 0 || ab > 0) || (ab < 0) != (ba > 0)) ++bad_total;
    if (ab == 0 && !same_key(ka, kb)) ++bad_antisym;
    if (ab <= 0 && bc <= 0 && !(ac <= 0)) ++bad_trans;
    if (a == cplx(0) && b != cplx(0) && !(ab < 0)) ++bad_zero;
  }
  const int bad = bad_total + bad_antisym + bad_trans + bad_zero;
  return {bad == 0, fmt("10^5 triples: totality %d, antisymmetry %d, transitivity %d, zero-first %d violations", bad_total,
                        bad_antisym, bad_trans, bad_zero)};
}

// 6. Limiting variance and disk moments against analytic values.
Outcome variance_formula() {
  const auto cg = atom_moments(AtomDistribution::complex_gaussian());
  const TestFunction re = test_function("re");
  double worst = 0;
  for (const QuadSpec& q : {QuadSpec{}, QuadSpec{96, 512, 4096, 512, 1e-5}})
    worst = std::max(worst, std::abs(ginibre_variance(re, cg, false, q).sigma2 - 0.5));
  const DiskMoments m = disk_moments(re);
  const double dm_err = std::max({std::abs(m.mean), std::abs(m.var_re - 0.25), std::abs(m.var_im), std::abs(m.cov)});
  return {worst <= 1e-6 && dm_err <= 1e-8,
          fmt("sigma2(re) max error %.3g over default and refined quadrature (tol 1e-6); disk moments error %.3g (tol 1e-8)",
              worst, dm_err)};
}

ExperimentConfig desk(ExperimentKind kind, std::vector<std::size_t> ns, std::size_t reps) {
  ExperimentConfig c;
  c.kind = kind;
  c.n_list = std::move(ns);
  c.replicates = reps;
  c.threads = worker_threads();
  return c;
}

// 7. Fixed-K removed part.
Outcome fixed_K_desk() {
  ExperimentConfig c = desk(ExperimentKind::partial_fixed_K, {256}, 2000);
  c.k_rule.fixed = 1;
  const auto s = run_experiment(c).summary;
  const double v = s.get("var_removed_re", 256), p = s.get("ks_removed_p", 256);
  return {v >= 0.20 && v <= 0.30 && p > 0.001,
          fmt("n=256, K=1, 2000 reps: centered removed variance %.4f in [0.20, 0.30]; KS p = %.4f (> 0.001)", v, p)};
}

// 8. Growing-K removed part, normalized by sqrt(K).
Outcome growing_K_desk() {
  ExperimentConfig c = desk(ExperimentKind::partial_growing_K, {256}, 1000);
  c.k_rule.fixed = 4;
  const auto s = run_experiment(c).summary;
  const double v = s.get("var_removed_re", 256), p = s.get("ks_removed_p", 256);
  return {v >= 0.1875 && v <= 0.3125 && p > 0.001,
          fmt("n=256, K=4, 1000 reps: normalized removed variance %.4f in [0.1875, 0.3125]; KS vs N(0, 1/4) p = %.4f", v,
              p)};
}

// 9. Full linear statistic.
Outcome full_clt_desk() {
  const auto s = run_experiment(desk(ExperimentKind::full_clt, {256}, 1000)).summary;
  const double v = s.get("var_full_re", 256);
  return {v >= 0.375 && v <= 0.625, fmt("n=256, 1000 reps: centered variance %.4f in [0.375, 0.625]", v)};
}

// 10. W1 decay.
Outcome wasserstein_desk() {
  const auto r = run_experiment(desk(ExperimentKind::wasserstein_decay, {64, 256, 1024}, 10));
  const auto& s = r.summary;
  std::size_t over = 0;
  double worst_ratio = 0;
  for (const auto& rec : r.records) {
    if (rec.skipped || rec.n < 256) continue;
    const double bound = std::pow(static_cast<double>(rec.n), -0.25);
    worst_ratio = std::max(worst_ratio, *rec.w1 / bound);
    over += *rec.w1 > bound;
  }
  const bool decreasing = s.get("strictly_decreasing") == 1.0;
  return {decreasing && over == 0,
          fmt("mean W1 %.4f, %.4f, %.4f at n = 64, 256, 1024 (strictly decreasing: %s); trials over n^{-1/4} at n >= 256: "
              "%zu (max W1 n^{1/4} = %.3f); slope %.3f",
              s.get("mean_w1", 64), s.get("mean_w1", 256), s.get("mean_w1", 1024), decreasing ? "yes" : "no", over,
              worst_ratio, s.get("loglog_slope"))};
}

// 11. Per-cell counts against Ginibre.
Outcome local_law_desk() {
  ExperimentConfig c = desk(ExperimentKind::local_law_cells, {1024}, 10);
  c.ensemble = AtomDistribution::rademacher();
  const auto r = run_experiment(c);
  const double scale = std::pow(1024.0, 0.25);
  std::size_t over = 0, contained = 0, totals_bad = 0, worst = 0;
  for (const auto& rec : r.records) {
    worst = std::max(worst, *rec.max_cell_discrepancy);
    over += static_cast<double>(*rec.max_cell_discrepancy) > 5 * scale;
    if (*rec.spectral_radius <= c.C) {
      ++contained;
      totals_bad += *rec.cell_total != rec.n;
    }
  }
  return {over == 0 && totals_bad == 0,
          fmt("n=1024, 10 trials: max discrepancy %zu (= %.2f n^{1/4}, limit 5); trials over limit %zu; "
              "contained trials %zu, with cell total != n: %zu",
              worst, static_cast<double>(worst) / scale, over, contained, totals_bad)};
}

// 12. Byte-identical JSONL across re-runs and thread counts.
Outcome determinism() {
  std::vector<ExperimentConfig> configs;
  {
    ExperimentConfig c = desk(ExperimentKind::partial_fixed_K, {64, 100}, 40);
    c.k_rule.fixed = 3;
    configs.push_back(c);
  }
  configs.push_back(desk(ExperimentKind::partial_growing_K, {81, 256}, 20));
  {
    ExperimentConfig c = desk(ExperimentKind::full_clt, {49}, 30);
    c.ensemble = AtomDistribution::real_gaussian();
    c.function_id = "abs2";
    configs.push_back(c);
  }
  configs.push_back(desk(ExperimentKind::wasserstein_decay, {16, 64}, 5));
  {
    ExperimentConfig c = desk(ExperimentKind::local_law_cells, {64}, 6);
    c.ensemble = AtomDistribution::rademacher();
    configs.push_back(c);
  }
  {
    ExperimentConfig c = desk(ExperimentKind::thinning_bound, {1}, 1);
    c.n_max = 20;
    configs.push_back(c);
  }
  std::size_t mismatches = 0, bytes = 0;
  for (ExperimentConfig c : configs) {
    std::string ref;
    for (std::size_t threads : {1u, 1u, 3u, 8u}) {
      c.threads = threads;
      std::ostringstream os;
      write_jsonl(run_experiment(c), os);
      if (ref.empty()) {
        ref = os.str();
        bytes += ref.size();
      } else if (os.str() != ref) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt("6 experiment kinds x threads {1, 1, 3, 8}: %zu mismatching outputs (%zu reference bytes)",
                               mismatches, bytes)};
}

}  // namespace

int main() {
  pin_blas_single_thread();
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"exact transport oracle", exact_transport_oracle},
      {"coupling dominance", coupling_dominance},
      {"thinning bound", thinning_bound},
      {"lattice structure", lattice_structure},
      {"spiral order axioms", spiral_axioms},
      {"variance formula", variance_formula},
      {"fixed-K partial statistic", fixed_K_desk},
      {"growing-K partial statistic", growing_K_desk},
      {"full linear statistic", full_clt_desk},
      {"W1 decay", wasserstein_desk},
      {"cell counts vs Ginibre", local_law_desk},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("[%2zu] %s  %-28s %s  (%.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu acceptance criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
