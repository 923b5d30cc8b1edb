#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mala/common.hpp"
#include "mala/initializers.hpp"

namespace mala::harness {

/// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Experiment { dimension_sweep, condition_sweep, single_run, spectral_gap, verify };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::dimension_sweep: return "dimension_sweep";
    case Experiment::condition_sweep: return "condition_sweep";
    case Experiment::single_run: return "single_run";
    case Experiment::spectral_gap: return "spectral_gap";
    case Experiment::verify: return "verify";
  }
  return "unknown";
}

enum class TargetKind { gaussian, perturbed_gaussian };

/// Tagged target record: `target.kind` plus the parameters of that kind.
struct TargetSpec {
  TargetKind kind = TargetKind::perturbed_gaussian;
  std::vector<double> precision;  // gaussian
  Index dim_perturbed = 8;        // perturbed_gaussian, single-run and spectral-gap only
};

struct ExperimentConfig {
  Experiment experiment = Experiment::single_run;
  double theta = 1.0 / 40.0;
  double L = 1.0;
  double m = 1.0;
  std::vector<long> dims;
  std::vector<double> kappas;
  std::vector<double> gammas;
  int n_chains = 50;
  std::uint64_t max_steps = 200'000;
  StartSpec start;
  std::uint64_t seed = 0;
  std::string out_path;
  unsigned workers = 1;

  TargetSpec target;
  double step_size = 0.0;  // single_run / spectral_gap
  bool lazy = true;
  double quantile_level = 0.9;
  double tau_tolerance = 0.05;
  double eps = 0.01;                // spectral_gap: chi^2 tolerance in the lower bound
  std::int64_t n_pairs = 100'000;   // spectral_gap: Dirichlet-form samples
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace detail

/// Defaults that depend on the experiment kind: the published grids, L = m = 1
/// for the dimension sweep and d = 32 for the condition sweep.
inline void apply_experiment_defaults(ExperimentConfig& cfg, const std::map<std::string, std::string>& seen) {
  const auto has = [&](const char* k) { return seen.count(k) > 0; };
  switch (cfg.experiment) {
    case Experiment::dimension_sweep:
      if (!has("dims")) cfg.dims = {64, 128, 256, 512, 1024};
      if (!has("gammas")) {
        cfg.gammas = cfg.start.kind == StartKind::gaussian_small_start
                         ? std::vector<double>{0.5, 0.75, 1.0, 1.25, 1.5}
                         : std::vector<double>{0.2, 0.35, 0.5, 0.65, 0.8};
      }
      break;
    case Experiment::condition_sweep:
      if (!has("dims")) cfg.dims = {32};
      if (!has("kappas")) cfg.kappas = {2, 4, 8, 16, 32};
      if (!has("gammas")) cfg.gammas = {0.5, 0.75, 1.0, 1.25, 1.5};
      break;
    case Experiment::spectral_gap:
      if (!has("start.kind")) cfg.start.kind = StartKind::piecewise_lastdim;
      if (!has("start.marginal")) cfg.start.marginal = MarginalMethod::exact_rejection;
      break;
    default:
      break;
  }
}

/// Parses the flat `key = value` format. Lists are comma separated; `#`
/// starts a comment; `target.*` and `start.*` keys form the tagged records.
/// A `forced` experiment (from a CLI subcommand) must agree with the file.
inline ExperimentConfig parse_config(std::istream& in, std::optional<Experiment> forced = std::nullopt) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("config: duplicate key '" + key + "'");
    kv[key] = value;
  }

  for (const auto& [key, v] : kv) {
    if (key == "experiment") {
      bool found = false;
      for (Experiment e : {Experiment::dimension_sweep, Experiment::condition_sweep,
                           Experiment::single_run, Experiment::spectral_gap, Experiment::verify}) {
        if (to_string(e) == v) {
          cfg.experiment = e;
          found = true;
        }
      }
      if (!found) throw ConfigError("config: unknown experiment '" + v + "'");
    } else if (key == "theta") {
      cfg.theta = detail::to_double(key, v);
    } else if (key == "L") {
      cfg.L = detail::to_double(key, v);
    } else if (key == "m") {
      cfg.m = detail::to_double(key, v);
    } else if (key == "dims") {
      cfg.dims.clear();
      for (const auto& s : detail::split_list(v)) cfg.dims.push_back(static_cast<long>(detail::to_u64(key, s)));
    } else if (key == "kappas") {
      cfg.kappas.clear();
      for (const auto& s : detail::split_list(v)) cfg.kappas.push_back(detail::to_double(key, s));
    } else if (key == "gammas") {
      cfg.gammas.clear();
      for (const auto& s : detail::split_list(v)) cfg.gammas.push_back(detail::to_double(key, s));
    } else if (key == "n_chains") {
      cfg.n_chains = static_cast<int>(detail::to_u64(key, v));
    } else if (key == "max_steps") {
      cfg.max_steps = detail::to_u64(key, v);
    } else if (key == "seed") {
      cfg.seed = detail::to_u64(key, v);
    } else if (key == "out_path") {
      cfg.out_path = v;
    } else if (key == "workers") {
      cfg.workers = static_cast<unsigned>(detail::to_u64(key, v));
    } else if (key == "step_size") {
      cfg.step_size = detail::to_double(key, v);
    } else if (key == "lazy") {
      cfg.lazy = detail::to_bool(key, v);
    } else if (key == "quantile_level") {
      cfg.quantile_level = detail::to_double(key, v);
    } else if (key == "tau_tolerance") {
      cfg.tau_tolerance = detail::to_double(key, v);
    } else if (key == "eps") {
      cfg.eps = detail::to_double(key, v);
    } else if (key == "n_pairs") {
      cfg.n_pairs = static_cast<std::int64_t>(detail::to_u64(key, v));
    } else if (key == "start.kind") {
      const auto k = parse_start_kind(v);
      if (!k) throw ConfigError("config: unknown start kind '" + v + "'");
      cfg.start.kind = *k;
    } else if (key == "start.burn_in") {
      cfg.start.burn_in = static_cast<int>(detail::to_u64(key, v));
    } else if (key == "start.variance_scale") {
      cfg.start.variance_scale = detail::to_double(key, v);
    } else if (key == "start.max_attempts") {
      cfg.start.max_attempts = detail::to_u64(key, v);
    } else if (key == "start.marginal") {
      if (v == "mala_burn_in") {
        cfg.start.marginal = MarginalMethod::mala_burn_in;
      } else if (v == "exact_rejection") {
        cfg.start.marginal = MarginalMethod::exact_rejection;
      } else {
        throw ConfigError("config: unknown start.marginal '" + v + "'");
      }
    } else if (key == "target.kind") {
      if (v == "gaussian") {
        cfg.target.kind = TargetKind::gaussian;
      } else if (v == "perturbed_gaussian") {
        cfg.target.kind = TargetKind::perturbed_gaussian;
      } else {
        throw ConfigError("config: unknown target kind '" + v + "'");
      }
    } else if (key == "target.precision") {
      cfg.target.precision.clear();
      for (const auto& s : detail::split_list(v)) cfg.target.precision.push_back(detail::to_double(key, s));
    } else if (key == "target.dim_perturbed") {
      cfg.target.dim_perturbed = static_cast<Index>(detail::to_u64(key, v));
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (forced) {
    if (kv.count("experiment") && cfg.experiment != *forced) {
      throw ConfigError("config: experiment '" + to_string(cfg.experiment) + "' does not match subcommand '" +
                        to_string(*forced) + "'");
    }
    cfg.experiment = *forced;
  }
  apply_experiment_defaults(cfg, kv);
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text,
                                            std::optional<Experiment> forced = std::nullopt) {
  std::istringstream in(text);
  return parse_config(in, forced);
}

inline ExperimentConfig load_config(const std::string& path, std::optional<Experiment> forced = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse_config(in, forced);
}

/// Structural checks shared by every experiment.
inline void validate(const ExperimentConfig& cfg) {
  if (!(cfg.theta > 0.0 && cfg.theta < 0.25)) throw ConfigError("config: theta must lie in (0, 1/4)");
  if (!(cfg.L > 0.0 && cfg.m > 0.0)) throw ConfigError("config: L and m must be positive");
  if (cfg.n_chains <= 0) throw ConfigError("config: n_chains must be positive");
  if (cfg.max_steps == 0) throw ConfigError("config: max_steps must be positive");
  if (!(cfg.quantile_level > 0.0 && cfg.quantile_level < 1.0)) {
    throw ConfigError("config: quantile_level must lie in (0, 1)");
  }
  if (!(cfg.tau_tolerance > 0.0)) throw ConfigError("config: tau_tolerance must be positive");
  if (cfg.workers == 0) throw ConfigError("config: workers must be positive");
  for (long d : cfg.dims) {
    if (d < 2) throw ConfigError("config: sweep dimensions must be >= 2");
  }
  for (double k : cfg.kappas) {
    if (!(k >= 1.0)) throw ConfigError("config: kappas must be >= 1");
  }
}

}  // namespace mala::harness
