// Command-line front end for the circlaw library.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error,
// 3 acceptance-threshold failure (--assert).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "circlaw/circlaw.hpp"

namespace {

using namespace circlaw;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAssert = 3;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
  bool assert_mode = false;
};

// Flags shared by the experiment subcommands; unset values leave the config
// (file or defaults) untouched.
struct ExperimentFlags {
  std::string ensemble;
  std::string n_list;
  std::optional<std::size_t> K;
  std::optional<std::size_t> replicates;
  std::string function;
  bool growing = false;
  bool allow_K_override = false;
  std::string method;
  std::optional<std::size_t> w1_reps;
  std::optional<double> C;
  std::optional<std::size_t> n_max;
  bool shared_seed = false;
};

std::vector<std::size_t> parse_n_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("bad n list entry: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty n list");
  return out;
}

AtomDistribution parse_ensemble(const std::string& s) {
  if (!s.empty() && s.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("ensemble JSON: ") + e.what());
    }
    return ensemble_from_json(j);
  }
  try {
    return ensemble_from_json(nlohmann::json(s));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

ExperimentConfig build_config(ExperimentKind kind, const GlobalOptions& g, const ExperimentFlags& f) {
  nlohmann::json j = g.config_path.empty() ? nlohmann::json::object() : load_config_json(g.config_path);
  // partial-stats serves both partial kinds; --growing selects the second.
  if (f.growing) kind = ExperimentKind::partial_growing_K;
  if (j.contains("kind")) {
    const ExperimentKind file_kind = experiment_kind_from_string(j["kind"].get<std::string>());
    const bool both_partial = kind == ExperimentKind::partial_fixed_K && file_kind == ExperimentKind::partial_growing_K;
    if (file_kind != kind && !both_partial)
      throw ConfigError("config kind '" + j["kind"].get<std::string>() + "' does not match the subcommand");
    kind = file_kind;
  }
  j["kind"] = std::string(to_string(kind));
  if (!f.n_list.empty()) j["n"] = parse_n_list(f.n_list);
  if (f.K) j["K"] = *f.K;
  if (f.replicates) j["replicates"] = *f.replicates;
  if (!f.function.empty()) j["function"] = f.function;
  if (f.allow_K_override) j["allow_K_override"] = true;
  if (!f.method.empty()) j["w1_method"] = f.method;
  if (f.w1_reps) j["w1_reps"] = *f.w1_reps;
  if (f.C) j["C"] = *f.C;
  if (f.n_max) j["n_max"] = *f.n_max;
  if (f.shared_seed) j["shared_seed"] = true;
  if (g.seed) j["seed"] = *g.seed;
  if (g.threads) j["threads"] = *g.threads;
  if (!g.out.empty()) j["output"] = g.out;
  if (!f.ensemble.empty()) j.erase("ensemble");
  ExperimentConfig c = config_from_json(j);
  if (!f.ensemble.empty()) {
    c.ensemble = parse_ensemble(f.ensemble);
    validate(c);
  }
  return c;
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
}

int emit_and_check(const ExperimentResult& r, bool assert_mode) {
  std::ostringstream summary;
  write_summary_csv(r, summary);
  std::cout << summary.str();
  if (!r.config.output.empty()) {
    std::ostringstream records;
    write_jsonl(r, records);
    write_file(r.config.output + ".jsonl", records.str());
    write_file(r.config.output + ".summary.csv", summary.str());
    if (r.config.kind == ExperimentKind::wasserstein_decay) {
      std::ostringstream trials;
      trials << "n,trial,w1,method,seed\n";
      for (const auto& rec : r.records)
        if (!rec.skipped)
          trials << rec.n << ',' << rec.replicate << ',' << format_double(*rec.w1) << ','
                 << to_string(r.config.w1_method) << ',' << rec.seed << '\n';
      write_file(r.config.output + ".csv", trials.str());
    }
  }
  if (!assert_mode) return 0;
  const auto fails = assert_summary(r);
  for (const auto& msg : fails) std::cerr << "assert: " << msg << '\n';
  return fails.empty() ? 0 : kExitAssert;
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

void add_experiment_flags(CLI::App* sub, ExperimentFlags& f, bool with_K) {
  sub->add_option("--ensemble", f.ensemble,
                  "complex-gaussian (alias ginibre), real-gaussian, rademacher, or a JSON custom-discrete "
                  "descriptor {\"kind\":\"custom-discrete\",\"atoms\":[...],\"probs\":[...]}");
  sub->add_option("--n-list,--n", f.n_list, "comma-separated matrix sizes [256]");
  sub->add_option("--replicates,--trials", f.replicates, "replicates per n [100]");
  sub->add_option("--f,--function", f.function, "test function id: re, im, abs2, const_1, repow_<k> [re]");
  if (with_K) sub->add_option("--K", f.K, "number of removed eigenvalues [1; growing default floor(n^{1/4}/1.2)]");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"circlaw: partial linear eigenvalue statistics and circular-law transport experiments"};
  app.require_subcommand(1);
  // Global flags are accepted before or after the subcommand.
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON experiment config (fields mirror ExperimentConfig)");
  app.add_option("--seed", g.seed, "base seed [0]");
  app.add_option("--threads", g.threads, "worker threads [1]; output does not depend on it");
  app.add_option("--out", g.out, "output path or prefix");
  app.add_flag("--assert", g.assert_mode, "exit 3 when the run misses its acceptance thresholds");
  ExperimentFlags f;

  std::string single_ensemble = "complex-gaussian";
  std::size_t single_n = 0;

  auto* sample = app.add_subcommand("sample", "sample one matrix; CSV (row, col, re, im)");
  sample->add_option("--ensemble", single_ensemble, "atom distribution [complex-gaussian]");
  sample->add_option("--n", single_n, "matrix size")->required();

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of X/sqrt(n) in spiral order; CSV (index, re, im)");
  spectrum->add_option("--ensemble", single_ensemble, "atom distribution [complex-gaussian]");
  spectrum->add_option("--n", single_n, "matrix size")->required();

  auto* lattice_cmd = app.add_subcommand("lattice", "predicted-location lattice; CSV (i, re, im, ell, q)");
  lattice_cmd->add_option("--n", single_n, "lattice size (>= 9)")->required();

  auto* wasserstein = app.add_subcommand("wasserstein", "W1 to the uniform disk across n (wasserstein-decay)");
  add_experiment_flags(wasserstein, f, false);
  wasserstein->add_option("--method", f.method, "sample or lattice [sample]");
  wasserstein->add_option("--w1-reps", f.w1_reps, "reference samples per trial [1]");

  auto* partial = app.add_subcommand("partial-stats", "partial statistics with fixed or growing K");
  add_experiment_flags(partial, f, true);
  partial->add_flag("--growing", f.growing, "normalize by sqrt(K) and compare with the Gaussian limit");
  partial->add_flag("--allow-K-override", f.allow_K_override, "accept growing-K runs with K > n^{1/4}");

  auto* full = app.add_subcommand("full-clt", "variance of the full linear statistic");
  add_experiment_flags(full, f, false);

  auto* local = app.add_subcommand("local-law", "per-cell counts against complex Ginibre (local-law-cells)");
  add_experiment_flags(local, f, false);
  local->add_option("--C", f.C, "half-width of the bounding square [1.25]");
  local->add_flag("--shared-seed", f.shared_seed, "reuse the matrix seed for the Ginibre comparison");

  auto* thinning = app.add_subcommand("thinning-bound", "exhaustive near-binomial bound check");
  thinning->add_option("--n-max", f.n_max, "largest n checked [60]");

  std::string var_f = "re", var_atom = "complex-gaussian";
  auto* variance = app.add_subcommand("variance", "limiting variance and its three terms");
  variance->add_option("--f", var_f, "test function id [re]");
  variance->add_option("--atom", var_atom, "atom distribution [complex-gaussian]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const std::uint64_t seed = g.seed.value_or(0);
    std::ofstream file;
    if (*sample) {
      const ComplexMatrix m = sample_matrix(parse_ensemble(single_ensemble), single_n, seed);
      std::ostream& os = open_out(g.out, file);
      os << "row,col,re,im\n";
      for (std::size_t i = 0; i < m.n(); ++i)
        for (std::size_t j = 0; j < m.n(); ++j)
          os << i << ',' << j << ',' << format_double(m(i, j).real()) << ',' << format_double(m(i, j).imag()) << '\n';
      return 0;
    }
    if (*spectrum) {
      pin_blas_single_thread();
      const auto s = spiral_sort(eigenvalues(sample_matrix(parse_ensemble(single_ensemble), single_n, seed), true));
      std::ostream& os = open_out(g.out, file);
      os << "index,re,im\n";
      for (std::size_t i = 0; i < s.n(); ++i)
        os << i + 1 << ',' << format_double(s.values[i].real()) << ',' << format_double(s.values[i].imag()) << '\n';
      return 0;
    }
    if (*lattice_cmd) {
      if (single_n < kMinLatticeN) throw ConfigError("lattice: n must be at least 9");
      const auto lat = lattice(single_n);
      std::ostream& os = open_out(g.out, file);
      os << "i,re,im,ell,q\n";
      for (std::size_t i = 1; i <= single_n; ++i) {
        const cplx z = lat.points[i - 1];
        os << i << ',' << format_double(z.real()) << ',' << format_double(z.imag()) << ',';
        if (i <= lat.params.ring_points()) os << lattice_ring(i) << ',' << lattice_slot(i);
        else os << ',';
        os << '\n';
      }
      return 0;
    }
    if (*variance) {
      const TestFunction fn = test_function(var_f);
      const AtomDistribution d = parse_ensemble(var_atom);
      const VarianceBreakdown v = ginibre_variance(fn, atom_moments(d), d.is_real());
      std::cout << "sigma2," << format_double(v.sigma2) << '\n'
                << "gradient_term," << format_double(v.gradient_term) << '\n'
                << "fourier_term," << format_double(v.fourier_term) << '\n'
                << "moment_term," << format_double(v.moment_term) << '\n';
      if (!v.warning.empty()) std::cerr << "warning: " << v.warning << '\n';
      return 0;
    }

    ExperimentKind kind = ExperimentKind::partial_fixed_K;
    if (*wasserstein) kind = ExperimentKind::wasserstein_decay;
    else if (*full) kind = ExperimentKind::full_clt;
    else if (*local) kind = ExperimentKind::local_law_cells;
    else if (*thinning) kind = ExperimentKind::thinning_bound;
    return emit_and_check(run_experiment(build_config(kind, g, f)), g.assert_mode);
  } catch (const std::invalid_argument& e) {  // includes ConfigError
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
