#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "circlaw/ensembles.hpp"
#include "circlaw/lattice.hpp"
#include "circlaw/rng.hpp"
#include "circlaw/spectral.hpp"
#include "circlaw/stats.hpp"
#include "circlaw/transport.hpp"

namespace circlaw {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { partial_fixed_K, partial_growing_K, full_clt, wasserstein_decay, local_law_cells, thinning_bound };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::partial_fixed_K: return "partial-fixed-K";
    case ExperimentKind::partial_growing_K: return "partial-growing-K";
    case ExperimentKind::full_clt: return "full-clt";
    case ExperimentKind::wasserstein_decay: return "wasserstein-decay";
    case ExperimentKind::local_law_cells: return "local-law-cells";
    case ExperimentKind::thinning_bound: return "thinning-bound";
  }
  return "unknown";
}

inline ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (auto k : {ExperimentKind::partial_fixed_K, ExperimentKind::partial_growing_K, ExperimentKind::full_clt,
                 ExperimentKind::wasserstein_decay, ExperimentKind::local_law_cells, ExperimentKind::thinning_bound})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind: " + std::string(s));
}

inline std::string_view to_string(W1Method m) { return m == W1Method::lattice ? "lattice" : "sample"; }

inline W1Method w1_method_from_string(std::string_view s) {
  if (s == "lattice") return W1Method::lattice;
  if (s == "sample") return W1Method::sample;
  throw ConfigError("unknown W1 method: " + std::string(s));
}

/// Number of removed eigenvalues as a function of n: either a fixed K or
/// K_n = max(1, floor(scale * n^{1/4 - epsilon})).
struct KRule {
  std::optional<std::size_t> fixed;
  double epsilon = 0.0;
  double scale = 1.0 / 1.2;

  std::size_t evaluate(std::size_t n) const {
    if (fixed) return *fixed;
    const double k = std::floor(scale * std::pow(static_cast<double>(n), 0.25 - epsilon));
    return std::max<std::size_t>(1, static_cast<std::size_t>(k));
  }
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::partial_fixed_K;
  AtomDistribution ensemble = AtomDistribution::complex_gaussian();
  std::vector<std::size_t> n_list{256};
  KRule k_rule;
  bool allow_K_override = false;
  std::string function_id = "re";
  std::size_t replicates = 100;
  std::uint64_t base_seed = 0;
  double C = kDefaultBoundingC;
  W1Method w1_method = W1Method::sample;
  std::size_t w1_reps = 1;
  std::size_t n_max = 60;
  // local-law-cells: the comparison Ginibre matrix reuses the matrix seed.
  bool shared_seed = false;

  // Not part of the experiment identity (excluded from the config hash).
  std::string output;
  std::size_t threads = 1;
};

using ordered_json = nlohmann::ordered_json;

inline ordered_json ensemble_to_json(const AtomDistribution& d) {
  ordered_json j;
  j["kind"] = std::string(to_string(d.kind()));
  if (d.kind() == AtomKind::custom_discrete) {
    ordered_json atoms = ordered_json::array();
    for (const cplx& a : d.atoms()) atoms.push_back(ordered_json::array({a.real(), a.imag()}));
    j["atoms"] = atoms;
    j["probs"] = std::vector<double>(d.probs().begin(), d.probs().end());
  }
  return j;
}

inline AtomDistribution ensemble_from_json(const nlohmann::json& j) {
  try {
    if (j.is_string()) return ensemble_from_json(nlohmann::json{{"kind", j}});
    const AtomKind kind = atom_kind_from_string(j.at("kind").get<std::string>());
    switch (kind) {
      case AtomKind::complex_gaussian: return AtomDistribution::complex_gaussian();
      case AtomKind::real_gaussian: return AtomDistribution::real_gaussian();
      case AtomKind::rademacher: return AtomDistribution::rademacher();
      case AtomKind::custom_discrete: break;
    }
    std::vector<cplx> atoms;
    for (const auto& a : j.at("atoms")) {
      if (a.is_number()) atoms.emplace_back(a.get<double>(), 0.0);
      else if (a.is_array() && a.size() == 2) atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
      else throw ConfigError("ensemble atoms must be numbers or [re, im] pairs");
    }
    return AtomDistribution::custom_discrete(std::move(atoms), j.at("probs").get<std::vector<double>>());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid ensemble descriptor: ") + e.what());
  }
}

/// Canonical JSON of the experiment identity (no output path, no threads).
inline ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["kind"] = std::string(to_string(c.kind));
  j["ensemble"] = ensemble_to_json(c.ensemble);
  j["n"] = c.n_list;
  if (c.k_rule.fixed) {
    j["K"] = *c.k_rule.fixed;
  } else {
    j["K_rule"] = ordered_json{{"epsilon", c.k_rule.epsilon}, {"scale", c.k_rule.scale}};
  }
  j["allow_K_override"] = c.allow_K_override;
  j["function"] = c.function_id;
  j["replicates"] = c.replicates;
  j["seed"] = c.base_seed;
  j["C"] = c.C;
  j["w1_method"] = std::string(to_string(c.w1_method));
  j["w1_reps"] = c.w1_reps;
  j["n_max"] = c.n_max;
  j["shared_seed"] = c.shared_seed;
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_to_json(c).dump())));
  return buf;
}

inline void validate(const ExperimentConfig& c) {
  if (c.n_list.empty()) throw ConfigError("n list must be nonempty");
  if (c.replicates == 0) throw ConfigError("replicates must be at least 1");
  if (c.threads == 0) throw ConfigError("threads must be at least 1");
  if (!(c.C > 1)) throw ConfigError("C must exceed 1");
  if (c.w1_reps == 0) throw ConfigError("w1_reps must be at least 1");
  if (!c.k_rule.fixed) {
    if (!(c.k_rule.epsilon >= 0 && c.k_rule.epsilon < 0.25)) throw ConfigError("K_rule epsilon must lie in [0, 1/4)");
    if (!(c.k_rule.scale > 0)) throw ConfigError("K_rule scale must be positive");
  }
  try {
    (void)test_function(c.function_id);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (std::size_t n : c.n_list) {
    if (n == 0) throw ConfigError("n must be positive");
    const bool partial = c.kind == ExperimentKind::partial_fixed_K || c.kind == ExperimentKind::partial_growing_K;
    if (partial) {
      const std::size_t K = c.k_rule.evaluate(n);
      if (K < 1 || K > n) throw ConfigError("K = " + std::to_string(K) + " outside [1, n] for n = " + std::to_string(n));
      if (c.kind == ExperimentKind::partial_growing_K && !c.allow_K_override &&
          static_cast<double>(K) > std::pow(static_cast<double>(n), 0.25) * (1 + 1e-12))
        throw ConfigError("K = " + std::to_string(K) + " exceeds n^{1/4} for n = " + std::to_string(n) +
                          "; growing-K runs need K_n = O(n^{1/4 - eps}) (set allow_K_override to force)");
    }
    if (c.kind == ExperimentKind::wasserstein_decay) {
      if (n > kDefaultExactCap) throw ConfigError("wasserstein-decay: n exceeds exact-solver cap 4096");
      if (c.w1_method == W1Method::lattice && n < kMinLatticeN)
        throw ConfigError("wasserstein-decay: lattice method needs n >= 9");
    }
  }
  if (c.kind == ExperimentKind::thinning_bound && (c.n_max == 0 || c.n_max > 400))
    throw ConfigError("thinning-bound: n_max must lie in [1, 400]");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::vector<std::string> known{"kind",       "ensemble", "n",       "n_list",  "K",      "K_rule",
                                              "allow_K_override", "function", "replicates", "trials", "seed", "C",
                                              "w1_method",  "w1_reps",  "n_max",   "shared_seed", "output", "threads"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key: " + key);
  ExperimentConfig c;
  try {
    if (j.contains("kind")) c.kind = experiment_kind_from_string(j["kind"].get<std::string>());
    if (j.contains("ensemble")) c.ensemble = ensemble_from_json(j["ensemble"]);
    for (const char* key : {"n", "n_list"}) {
      if (!j.contains(key)) continue;
      const auto& v = j[key];
      c.n_list = v.is_array() ? v.get<std::vector<std::size_t>>() : std::vector<std::size_t>{v.get<std::size_t>()};
    }
    if (j.contains("K")) c.k_rule.fixed = j["K"].get<std::size_t>();
    if (j.contains("K_rule")) {
      const auto& r = j["K_rule"];
      c.k_rule.epsilon = r.value("epsilon", c.k_rule.epsilon);
      c.k_rule.scale = r.value("scale", c.k_rule.scale);
    }
    if (c.kind == ExperimentKind::partial_fixed_K && !c.k_rule.fixed) c.k_rule.fixed = 1;
    c.allow_K_override = j.value("allow_K_override", c.allow_K_override);
    c.function_id = j.value("function", c.function_id);
    c.replicates = j.value("replicates", j.value("trials", c.replicates));
    c.base_seed = j.value("seed", c.base_seed);
    c.C = j.value("C", c.C);
    if (j.contains("w1_method")) c.w1_method = w1_method_from_string(j["w1_method"].get<std::string>());
    c.w1_reps = j.value("w1_reps", c.w1_reps);
    c.n_max = j.value("n_max", c.n_max);
    c.shared_seed = j.value("shared_seed", c.shared_seed);
    c.output = j.value("output", c.output);
    c.threads = j.value("threads", c.threads);
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Records and summaries
// ---------------------------------------------------------------------------

/// One persisted row. Every record is reproducible from (config, n, replicate).
struct ExperimentRecord {
  ExperimentKind kind = ExperimentKind::partial_fixed_K;
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;                    // matrix stream
  std::optional<std::uint64_t> aux_seed;     // index-set, reference-sample or comparison stream
  std::optional<std::size_t> K;
  std::optional<cplx> kept, removed, full;
  std::optional<double> w1, w1_stddev;
  std::optional<std::size_t> bad_count;
  std::optional<std::size_t> max_cell_discrepancy;
  std::optional<std::size_t> cell_total;
  std::optional<double> spectral_radius;
  std::optional<double> worst_ratio;
  std::optional<std::size_t> violations;
  bool skipped = false;
};

namespace detail {
template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}
inline ordered_json opt(const std::optional<cplx>& v) {
  return v ? ordered_json::array({v->real(), v->imag()}) : ordered_json(nullptr);
}
}  // namespace detail

inline ordered_json record_to_json(const ExperimentRecord& r) {
  ordered_json j;
  j["kind"] = std::string(to_string(r.kind));
  j["n"] = r.n;
  j["replicate"] = r.replicate;
  j["seed"] = r.seed;
  j["aux_seed"] = detail::opt(r.aux_seed);
  j["K"] = detail::opt(r.K);
  j["kept"] = detail::opt(r.kept);
  j["removed"] = detail::opt(r.removed);
  j["full"] = detail::opt(r.full);
  j["w1"] = detail::opt(r.w1);
  j["w1_stddev"] = detail::opt(r.w1_stddev);
  j["bad_count"] = detail::opt(r.bad_count);
  j["max_cell_discrepancy"] = detail::opt(r.max_cell_discrepancy);
  j["cell_total"] = detail::opt(r.cell_total);
  j["spectral_radius"] = detail::opt(r.spectral_radius);
  j["worst_ratio"] = detail::opt(r.worst_ratio);
  j["violations"] = detail::opt(r.violations);
  j["skipped"] = r.skipped;
  return j;
}

struct SummaryRow {
  std::optional<std::size_t> n;  // empty for run-wide metrics
  std::string metric;
  double value = 0;
};

struct ExperimentSummary {
  std::vector<SummaryRow> rows;

  void add(std::optional<std::size_t> n, std::string metric, double value) {
    rows.push_back({n, std::move(metric), value});
  }
  std::optional<double> find(std::string_view metric, std::optional<std::size_t> n = std::nullopt) const {
    for (const auto& r : rows)
      if (r.metric == metric && r.n == n) return r.value;
    return std::nullopt;
  }
  double get(std::string_view metric, std::optional<std::size_t> n = std::nullopt) const {
    if (auto v = find(metric, n)) return *v;
    throw std::out_of_range("summary has no metric " + std::string(metric));
  }
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ExperimentRecord> records;
  ExperimentSummary summary;
};

// Shortest round-trip decimal form, shared by JSONL and CSV output.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  return ordered_json(v).dump();
}

inline void write_jsonl(const ExperimentResult& r, std::ostream& os) {
  ordered_json header;
  header["config_hash"] = config_hash(r.config);
  header["config"] = config_to_json(r.config);
  os << header.dump() << '\n';
  for (const auto& rec : r.records) os << record_to_json(rec).dump() << '\n';
}

inline void write_summary_csv(const ExperimentResult& r, std::ostream& os) {
  os << "# config_hash=" << config_hash(r.config) << '\n';
  os << "n,metric,value\n";
  for (const auto& row : r.summary.rows)
    os << (row.n ? std::to_string(*row.n) : std::string{}) << ',' << row.metric << ',' << format_double(row.value)
       << '\n';
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Runs task(i) for i in [0, count) on `threads` workers. Results must be
/// written to slots indexed by i, which keeps output independent of
/// scheduling.
template <typename Task>
void parallel_for(std::size_t count, std::size_t threads, Task&& task) {
  pin_blas_single_thread();
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace detail {

struct RealParts {
  std::vector<double> re, im;
};

inline RealParts split(const std::vector<cplx>& zs, double scale = 1.0) {
  RealParts p;
  p.re.reserve(zs.size());
  p.im.reserve(zs.size());
  for (const cplx& z : zs) {
    p.re.push_back(z.real() * scale);
    p.im.push_back(z.imag() * scale);
  }
  return p;
}

inline double mean_square(const std::vector<double>& xs) {
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = xs[i] * xs[i];
  return sample_mean(sq);
}

inline std::vector<double> centered(std::vector<double> xs) {
  const double m = sample_mean(xs);
  for (double& x : xs) x -= m;
  return xs;
}

// sigma2 of the full statistic when the closed-form variance applies to
// (f, atom): real-valued f, and either a real atom or E xi^2 = 0.
inline std::optional<double> limiting_sigma2(const ExperimentConfig& c, const TestFunction& f) {
  if (!f.real_valued) return std::nullopt;
  const MomentSummary m = atom_moments(c.ensemble);
  try {
    if (c.ensemble.is_real()) return ginibre_variance(f, m, true).sigma2;
    if (std::abs(m.second) <= 1e-12) return ginibre_variance(f, m, false).sigma2;
  } catch (const std::invalid_argument&) {
  }
  return std::nullopt;
}

inline void check_skip_rate(const std::vector<ExperimentRecord>& recs) {
  const auto skipped = static_cast<std::size_t>(std::count_if(recs.begin(), recs.end(), [](const auto& r) { return r.skipped; }));
  if (skipped * 100 > recs.size())
    throw ExperimentError(std::to_string(skipped) + " of " + std::to_string(recs.size()) +
                          " replicates skipped after eigensolver failures (limit 1%)");
}

inline std::optional<ComplexSpectrum> solve_or_skip(const ComplexMatrix& m) {
  try {
    return eigenvalues(m, true);
  } catch (const EigenSolverError& e) {
    std::cerr << "circlaw: skipping replicate: " << e.what() << '\n';
    return std::nullopt;
  }
}

// Replicate-major statistic runs: partial-fixed-K, partial-growing-K, full-clt.
inline std::vector<ExperimentRecord> run_statistic_records(const ExperimentConfig& c, bool with_index_set) {
  const std::string kind(to_string(c.kind));
  const TestFunction f = test_function(c.function_id);
  const std::size_t R = c.replicates;
  std::vector<ExperimentRecord> recs(c.n_list.size() * R);
  parallel_for(recs.size(), c.threads, [&](std::size_t t) {
    const std::size_t n = c.n_list[t / R];
    const std::size_t r = t % R;
    ExperimentRecord& rec = recs[t];
    rec.kind = c.kind;
    rec.n = n;
    rec.replicate = r;
    rec.seed = derive_seed(c.base_seed, kind, n, r, "matrix");
    if (with_index_set) {
      rec.aux_seed = derive_seed(c.base_seed, kind, n, r, "index");
      rec.K = c.k_rule.evaluate(n);
    }
    const auto spec = solve_or_skip(sample_matrix(c.ensemble, n, rec.seed));
    if (!spec) {
      rec.skipped = true;
      return;
    }
    if (with_index_set) {
      const IndexSet I = sample_index_set(n, *rec.K, *rec.aux_seed);
      const PartialSums p = partial_statistic(*spec, f, I);
      rec.kept = p.kept;
      rec.removed = p.removed;
      rec.full = p.full;
    } else {
      rec.full = linear_statistic(*spec, f);
    }
  });
  check_skip_rate(recs);
  return recs;
}

inline std::vector<const ExperimentRecord*> valid_for(const std::vector<ExperimentRecord>& recs, std::size_t n) {
  std::vector<const ExperimentRecord*> out;
  for (const auto& r : recs)
    if (r.n == n && !r.skipped) out.push_back(&r);
  return out;
}

template <typename Get>
std::vector<cplx> collect(const std::vector<const ExperimentRecord*>& rs, Get&& get) {
  std::vector<cplx> out;
  out.reserve(rs.size());
  for (const auto* r : rs) out.push_back(get(*r));
  return out;
}

}  // namespace detail

/// Fixed-K partial statistics: removed part against sum_i (f(U_i) - E f(U)),
/// kept part against S - sum_i (f(U_i) - E f(U)) when sigma2 is available.
inline ExperimentResult run_partial_fixed_K(const ExperimentConfig& config) {
  validate(config);
  if (config.kind != ExperimentKind::partial_fixed_K) throw ConfigError("run_partial_fixed_K: wrong experiment kind");
  ExperimentResult out{config, detail::run_statistic_records(config, true), {}};
  const TestFunction f = test_function(config.function_id);
  const auto sigma2 = detail::limiting_sigma2(config, f);
  const std::string kind(to_string(config.kind));
  for (std::size_t n : config.n_list) {
    const auto rs = detail::valid_for(out.records, n);
    const std::size_t K = config.k_rule.evaluate(n);
    auto& s = out.summary;
    s.add(n, "K", static_cast<double>(K));
    s.add(n, "valid_replicates", static_cast<double>(rs.size()));
    const auto removed = detail::split(detail::collect(rs, [](const auto& r) { return *r.removed; }));
    const auto kept = detail::split(detail::collect(rs, [](const auto& r) { return *r.kept; }));
    const auto full = detail::split(detail::collect(rs, [](const auto& r) { return *r.full; }));
    s.add(n, "mean_removed_re", sample_mean(removed.re));
    s.add(n, "mean_kept_re", sample_mean(kept.re));
    s.add(n, "mean_full_re", sample_mean(full.re));
    s.add(n, "raw_second_moment_removed_re", detail::mean_square(removed.re));
    s.add(n, "var_removed_re", sample_variance(removed.re));
    s.add(n, "var_removed_im", sample_variance(removed.im));
    s.add(n, "cov_removed", sample_covariance(removed.re, removed.im));
    s.add(n, "var_kept_re", sample_variance(kept.re));
    s.add(n, "var_full_re", sample_variance(full.re));

    LimitSpec spec = make_limit_spec(f, 0.0, K);
    s.add(n, "target_var_removed_re", static_cast<double>(K) * spec.var_re);
    s.add(n, "target_var_removed_im", static_cast<double>(K) * spec.var_im);
    // The removed part converges to +sum (f(U_i) - E f(U)), the negative of
    // the sampler output at sigma2 = 0.
    const auto limit = limit_sampler_fixed_K(spec, f, rs.size(), derive_seed(config.base_seed, kind, n, 0, "limit"));
    const auto limit_re = detail::split(limit, -1.0).re;
    const KsResult ks = ks_two_sample(detail::centered(removed.re), limit_re);
    s.add(n, "ks_removed_stat", ks.statistic);
    s.add(n, "ks_removed_p", ks.p_value);
    if (sigma2) {
      spec.sigma2 = *sigma2;
      s.add(n, "sigma2", *sigma2);
      s.add(n, "target_var_kept_re", *sigma2 + static_cast<double>(K) * spec.var_re);
      const auto limit_kept =
          limit_sampler_fixed_K(spec, f, rs.size(), derive_seed(config.base_seed, kind, n, 0, "limit-kept"));
      const KsResult ksk = ks_two_sample(detail::centered(kept.re), detail::split(limit_kept).re);
      s.add(n, "ks_kept_stat", ksk.statistic);
      s.add(n, "ks_kept_p", ksk.p_value);
    }
    s.add(n, "skipped", static_cast<double>(
                             std::count_if(out.records.begin(), out.records.end(),
                                           [n](const auto& r) { return r.n == n && r.skipped; })));
  }
  return out;
}

/// Growing-K partial statistics, normalized by sqrt(K_n), against the
/// centered complex normal with the covariance of f(U).
inline ExperimentResult run_partial_growing_K(const ExperimentConfig& config) {
  validate(config);
  if (config.kind != ExperimentKind::partial_growing_K)
    throw ConfigError("run_partial_growing_K: wrong experiment kind");
  ExperimentResult out{config, detail::run_statistic_records(config, true), {}};
  const TestFunction f = test_function(config.function_id);
  const std::string kind(to_string(config.kind));
  const DiskMoments dm = disk_moments(f);
  for (std::size_t n : config.n_list) {
    const auto rs = detail::valid_for(out.records, n);
    const std::size_t K = config.k_rule.evaluate(n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(K));
    auto& s = out.summary;
    s.add(n, "K", static_cast<double>(K));
    s.add(n, "valid_replicates", static_cast<double>(rs.size()));
    const auto removed = detail::split(detail::collect(rs, [](const auto& r) { return *r.removed; }), norm);
    const auto kept = detail::split(detail::collect(rs, [](const auto& r) { return *r.kept; }), norm);
    s.add(n, "mean_removed_re_raw", sample_mean(removed.re) / norm);
    s.add(n, "raw_second_moment_removed_re", detail::mean_square(removed.re));
    s.add(n, "var_removed_re", sample_variance(removed.re));
    s.add(n, "var_removed_im", sample_variance(removed.im));
    s.add(n, "cov_removed", sample_covariance(removed.re, removed.im));
    s.add(n, "var_kept_re", sample_variance(kept.re));
    s.add(n, "var_kept_im", sample_variance(kept.im));
    s.add(n, "target_var_re", dm.var_re);
    s.add(n, "target_var_im", dm.var_im);
    s.add(n, "target_cov", dm.cov);
    const LimitSpec spec{0.0, dm.mean, std::max(0.0, dm.var_re), std::max(0.0, dm.var_im), dm.cov, K};
    const auto limit = limit_sampler_growing_K(spec, rs.size(), derive_seed(config.base_seed, kind, n, 0, "limit"));
    const KsResult ks = ks_two_sample(detail::centered(removed.re), detail::split(limit).re);
    s.add(n, "ks_removed_stat", ks.statistic);
    s.add(n, "ks_removed_p", ks.p_value);
  }
  return out;
}

/// Variance of the centered full linear statistic against the closed-form
/// limiting variance, when it applies.
inline ExperimentResult run_full_clt(const ExperimentConfig& config) {
  validate(config);
  if (config.kind != ExperimentKind::full_clt) throw ConfigError("run_full_clt: wrong experiment kind");
  ExperimentResult out{config, detail::run_statistic_records(config, false), {}};
  const TestFunction f = test_function(config.function_id);
  const auto sigma2 = detail::limiting_sigma2(config, f);
  for (std::size_t n : config.n_list) {
    const auto rs = detail::valid_for(out.records, n);
    const auto full = detail::split(detail::collect(rs, [](const auto& r) { return *r.full; }));
    auto& s = out.summary;
    s.add(n, "valid_replicates", static_cast<double>(rs.size()));
    s.add(n, "mean_full_re", sample_mean(full.re));
    s.add(n, "mean_full_im", sample_mean(full.im));
    s.add(n, "raw_second_moment_full_re", detail::mean_square(full.re));
    s.add(n, "var_full_re", sample_variance(full.re));
    s.add(n, "var_full_im", sample_variance(full.im));
    if (sigma2) {
      s.add(n, "sigma2", *sigma2);
      s.add(n, "var_ratio", *sigma2 > 0 ? sample_variance(full.re) / *sigma2 : std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

/// W1 between the scaled empirical spectral measure and the uniform disk.
inline ExperimentResult run_wasserstein_decay(const ExperimentConfig& config) {
  validate(config);
  if (config.kind != ExperimentKind::wasserstein_decay)
    throw ConfigError("run_wasserstein_decay: wrong experiment kind");
  const std::string kind(to_string(config.kind));
  const std::size_t R = config.replicates;
  ExperimentResult out{config, std::vector<ExperimentRecord>(config.n_list.size() * R), {}};
  parallel_for(out.records.size(), config.threads, [&](std::size_t t) {
    const std::size_t n = config.n_list[t / R];
    const std::size_t r = t % R;
    ExperimentRecord& rec = out.records[t];
    rec.kind = config.kind;
    rec.n = n;
    rec.replicate = r;
    rec.seed = derive_seed(config.base_seed, kind, n, r, "matrix");
    rec.aux_seed = derive_seed(config.base_seed, kind, n, r, "w1");
    const auto spec = detail::solve_or_skip(sample_matrix(config.ensemble, n, rec.seed));
    if (!spec) {
      rec.skipped = true;
      return;
    }
    const W1Estimate est = w1_to_disk(spec->values, config.w1_method, config.w1_reps, *rec.aux_seed);
    rec.w1 = est.value;
    rec.w1_stddev = est.stddev;
    rec.spectral_radius = spectral_radius(*spec);
  });
  detail::check_skip_rate(out.records);

  std::vector<double> log_n, log_w;
  std::vector<double> means;
  for (std::size_t n : config.n_list) {
    const auto rs = detail::valid_for(out.records, n);
    std::vector<double> w;
    for (const auto* r : rs) w.push_back(*r->w1);
    const double bound = std::pow(static_cast<double>(n), -0.25);
    const auto below = std::count_if(w.begin(), w.end(), [bound](double v) { return v <= bound; });
    auto& s = out.summary;
    const double mean = sample_mean(w);
    s.add(n, "mean_w1", mean);
    s.add(n, "sd_w1", sample_variance(w) > 0 ? std::sqrt(sample_variance(w)) : 0.0);
    s.add(n, "max_w1", w.empty() ? 0.0 : *std::max_element(w.begin(), w.end()));
    s.add(n, "bound_n^-1/4", bound);
    s.add(n, "frac_below_bound", w.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(w.size()));
    means.push_back(mean);
    if (mean > 0) {
      log_n.push_back(std::log(static_cast<double>(n)));
      log_w.push_back(std::log(mean));
    }
  }
  if (log_n.size() >= 2) {
    const double vx = sample_variance(log_n);
    out.summary.add(std::nullopt, "loglog_slope", vx > 0 ? sample_covariance(log_n, log_w) / vx : 0.0);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < means.size(); ++i)
    if (!(means[i] < means[i - 1])) decreasing = false;
  out.summary.add(std::nullopt, "strictly_decreasing", decreasing ? 1.0 : 0.0);
  return out;
}

/// Per-cell eigenvalue counts of the configured ensemble against an
/// independent complex Ginibre matrix on the default grid.
inline ExperimentResult run_local_law_cells(const ExperimentConfig& config) {
  validate(config);
  if (config.kind != ExperimentKind::local_law_cells) throw ConfigError("run_local_law_cells: wrong experiment kind");
  const std::string kind(to_string(config.kind));
  const std::size_t R = config.replicates;
  const AtomDistribution ginibre = AtomDistribution::complex_gaussian();
  ExperimentResult out{config, std::vector<ExperimentRecord>(config.n_list.size() * R), {}};
  parallel_for(out.records.size(), config.threads, [&](std::size_t t) {
    const std::size_t n = config.n_list[t / R];
    const std::size_t r = t % R;
    ExperimentRecord& rec = out.records[t];
    rec.kind = config.kind;
    rec.n = n;
    rec.replicate = r;
    rec.seed = derive_seed(config.base_seed, kind, n, r, "matrix");
    rec.aux_seed = config.shared_seed ? rec.seed : derive_seed(config.base_seed, kind, n, r, "comparison");
    const auto x = detail::solve_or_skip(sample_matrix(config.ensemble, n, rec.seed));
    const auto g = x ? detail::solve_or_skip(sample_matrix(ginibre, n, *rec.aux_seed)) : std::nullopt;
    if (!x || !g) {
      rec.skipped = true;
      return;
    }
    const GridSpec grid = default_grid(n, config.C);
    const TransportResult tr = grid_pairing(x->values, g->values, grid);
    std::size_t worst = 0, total = 0;
    for (const auto& [cx, cg] : *tr.per_cell_counts) {
      worst = std::max(worst, cx > cg ? cx - cg : cg - cx);
      total += cx;
    }
    rec.max_cell_discrepancy = worst;
    rec.cell_total = total;
    rec.bad_count = tr.bad_count;
    rec.w1 = tr.value;
    rec.spectral_radius = std::max(spectral_radius(*x), spectral_radius(*g));
  });
  detail::check_skip_rate(out.records);

  for (std::size_t n : config.n_list) {
    const auto rs = detail::valid_for(out.records, n);
    const double scale = std::pow(static_cast<double>(n), 0.25);
    std::size_t worst = 0, contained = 0, totals_ok = 0;
    double bad = 0, w1 = 0;
    for (const auto* r : rs) {
      worst = std::max(worst, *r->max_cell_discrepancy);
      if (*r->spectral_radius <= config.C) {
        ++contained;
        if (*r->cell_total == n) ++totals_ok;
      }
      bad += static_cast<double>(*r->bad_count);
      w1 += *r->w1;
    }
    const double cnt = std::max<double>(1.0, static_cast<double>(rs.size()));
    auto& s = out.summary;
    s.add(n, "cells", static_cast<double>(default_grid(n, config.C).cell_count()));
    s.add(n, "max_discrepancy", static_cast<double>(worst));
    s.add(n, "max_normalized_discrepancy", static_cast<double>(worst) / scale);
    s.add(n, "contained_trials", static_cast<double>(contained));
    s.add(n, "cell_total_ok_trials", static_cast<double>(totals_ok));
    s.add(n, "mean_bad_count", bad / cnt);
    s.add(n, "mean_grid_w1_bound", w1 / cnt);
  }
  return out;
}

/// Exhaustive check of P(|I \ J| = j) <= near_binomial_bound over all
/// feasible (n, K, |J|, j) with n <= n_max.
inline ExperimentResult run_thinning_bound(const ExperimentConfig& config) {
  validate(config);
  if (config.kind != ExperimentKind::thinning_bound) throw ConfigError("run_thinning_bound: wrong experiment kind");
  ExperimentResult out{config, {}, {}};
  double worst = 0;
  std::size_t arg[4] = {0, 0, 0, 0};
  std::size_t tuples = 0, violations = 0;
  for (std::size_t n = 1; n <= config.n_max; ++n) {
    ExperimentRecord rec;
    rec.kind = config.kind;
    rec.n = n;
    rec.replicate = 0;
    rec.seed = 0;
    double worst_n = 0;
    std::size_t viol_n = 0;
    for (std::size_t K = 1; K <= n; ++K)
      for (std::size_t J = 0; J <= n; ++J)
        for (std::size_t j = 0; j <= K; ++j) {
          const double p = hypergeom_removal_pmf(n, K, J, j);
          const double b = near_binomial_bound(n, K, J, j);
          ++tuples;
          if (p > b) ++viol_n;
          const double ratio = b > 0 ? p / b : (p > 0 ? std::numeric_limits<double>::infinity() : 0.0);
          if (ratio > worst_n) worst_n = ratio;
          if (ratio > worst) {
            worst = ratio;
            arg[0] = n, arg[1] = K, arg[2] = J, arg[3] = j;
          }
        }
    violations += viol_n;
    rec.worst_ratio = worst_n;
    rec.violations = viol_n;
    out.records.push_back(rec);
  }
  auto& s = out.summary;
  s.add(std::nullopt, "n_max", static_cast<double>(config.n_max));
  s.add(std::nullopt, "tuples", static_cast<double>(tuples));
  s.add(std::nullopt, "violations", static_cast<double>(violations));
  s.add(std::nullopt, "worst_ratio", worst);
  s.add(std::nullopt, "worst_n", static_cast<double>(arg[0]));
  s.add(std::nullopt, "worst_K", static_cast<double>(arg[1]));
  s.add(std::nullopt, "worst_J", static_cast<double>(arg[2]));
  s.add(std::nullopt, "worst_j", static_cast<double>(arg[3]));
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  switch (config.kind) {
    case ExperimentKind::partial_fixed_K: return run_partial_fixed_K(config);
    case ExperimentKind::partial_growing_K: return run_partial_growing_K(config);
    case ExperimentKind::full_clt: return run_full_clt(config);
    case ExperimentKind::wasserstein_decay: return run_wasserstein_decay(config);
    case ExperimentKind::local_law_cells: return run_local_law_cells(config);
    case ExperimentKind::thinning_bound: return run_thinning_bound(config);
  }
  throw ConfigError("unknown experiment kind");
}

/// Desk-scale pass criteria used by the CLI's --assert mode. Returns one
/// message per failed check.
inline std::vector<std::string> assert_summary(const ExperimentResult& r) {
  std::vector<std::string> fails;
  const auto& s = r.summary;
  auto within = [&](std::size_t n, std::string_view metric, double target, double rel) {
    const auto v = s.find(metric, n);
    if (!v || std::abs(*v - target) > rel * std::abs(target))
      fails.push_back(std::string(metric) + " at n=" + std::to_string(n) + " is " + (v ? format_double(*v) : "missing") +
                      ", expected " + format_double(target) + " +/- " + format_double(rel * 100) + "%");
  };
  auto p_ok = [&](std::size_t n, std::string_view metric) {
    const auto v = s.find(metric, n);
    if (v && !(*v > 1e-3))
      fails.push_back(std::string(metric) + " at n=" + std::to_string(n) + " is " + format_double(*v) + " <= 0.001");
  };
  for (std::size_t n : r.config.n_list) {
    switch (r.config.kind) {
      case ExperimentKind::partial_fixed_K:
        within(n, "var_removed_re", s.get("target_var_removed_re", n), 0.2);
        p_ok(n, "ks_removed_p");
        break;
      case ExperimentKind::partial_growing_K:
        within(n, "var_removed_re", s.get("target_var_re", n), 0.25);
        p_ok(n, "ks_removed_p");
        break;
      case ExperimentKind::full_clt:
        if (auto sig = s.find("sigma2", n)) within(n, "var_full_re", *sig, 0.25);
        break;
      case ExperimentKind::wasserstein_decay:
        if (n >= 256 && s.get("frac_below_bound", n) < 1.0)
          fails.push_back("some W1 trials at n=" + std::to_string(n) + " exceed n^{-1/4}");
        break;
      case ExperimentKind::local_law_cells:
        if (s.get("max_normalized_discrepancy", n) > 5.0)
          fails.push_back("cell discrepancy at n=" + std::to_string(n) + " exceeds 5 n^{1/4}");
        break;
      case ExperimentKind::thinning_bound: break;
    }
  }
  if (r.config.kind == ExperimentKind::wasserstein_decay && s.get("strictly_decreasing") != 1.0)
    fails.push_back("mean W1 is not strictly decreasing in n");
  if (r.config.kind == ExperimentKind::thinning_bound && s.get("violations") != 0.0)
    fails.push_back("thinning bound violated " + format_double(s.get("violations")) + " times");
  return fails;
}

}  // namespace circlaw
