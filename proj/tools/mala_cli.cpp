// Command-line front end: single chains, the dimension and condition sweeps,
// the spectral-gap pipeline and the analytic oracle suite.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mala/experiments.hpp"
#include "mala/mala.hpp"
#include "mala/verify.hpp"

namespace {

using namespace mala;
using namespace mala::harness;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> workers;
  std::optional<int> chains;
  std::optional<std::uint64_t> steps;
};

void add_common_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "key = value configuration file");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--out", o.out, "output path (CSV or JSON)");
  sub->add_option("--workers", o.workers, "concurrent chains")->check(CLI::PositiveNumber);
  sub->add_option("--chains", o.chains, "chains per sweep point")->check(CLI::PositiveNumber);
  sub->add_option("--steps", o.steps, "transitions per chain")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const Overrides& o, Experiment e) {
  ExperimentConfig cfg = o.config.empty() ? parse_config_string("", e) : load_config(o.config, e);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_path = o.out;
  if (o.workers) cfg.workers = *o.workers;
  if (o.chains) cfg.n_chains = *o.chains;
  if (o.steps) cfg.max_steps = *o.steps;
  validate(cfg);
  return cfg;
}

int run_sweep_command(const ExperimentConfig& cfg) {
  const auto records =
      cfg.experiment == Experiment::dimension_sweep ? run_dimension_sweep(cfg) : run_condition_sweep(cfg);
  if (cfg.out_path.empty()) {
    std::cout << render_csv(records);
  } else {
    emit_csv(records, cfg.out_path);
    write_json(sweep_metadata(cfg, records), cfg.out_path + ".meta.json");
    std::cerr << "wrote " << records.size() << " rows to " << cfg.out_path << "\n";
  }
  return 0;
}

int run_spectral_command(const ExperimentConfig& cfg) {
  const SpectralGapResult r = run_spectral_gap(cfg);
  const nlohmann::json j = spectral_json(cfg, r);
  if (cfg.out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(j, cfg.out_path);
  }
  return 0;
}

struct SampleSummary {
  std::uint64_t steps = 0;
  std::uint64_t proposals = 0;
  std::uint64_t accepts = 0;
  double last_mean = 0.0;
  double last_var = 0.0;
  double final_norm = 0.0;
  std::optional<std::size_t> tau;
};

template <Target T>
SampleSummary sample_chain(const T& target, const Vector& x0, const ExperimentConfig& cfg,
                           std::optional<double> true_quantile) {
  ChainState chain(target, x0, derive_seed(cfg.seed, 0, 0));
  const KernelConfig kernel{cfg.step_size, cfg.lazy};
  const Index last = target.dim() - 1;
  MixingProxyConfig proxy;
  proxy.quantile_level = cfg.quantile_level;
  proxy.tolerance = cfg.tau_tolerance;
  proxy.true_quantile = true_quantile.value_or(0.0);
  MixingProxyTracker tracker(proxy);
  double mean = 0.0, m2 = 0.0;
  std::uint64_t n = 0;
  run_chain(chain, target, kernel, cfg.max_steps, [&](const ChainState& s, const StepOutcome&) {
    const double v = s.position()[last];
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
    if (true_quantile) tracker.push(v);
  });
  SampleSummary out;
  out.steps = chain.step_count();
  out.proposals = chain.proposals();
  out.accepts = chain.accepts();
  out.last_mean = mean;
  out.last_var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  out.final_norm = chain.position().norm();
  if (true_quantile) out.tau = tracker.tau();
  return out;
}

int run_sample_command(const ExperimentConfig& cfg) {
  if (!(cfg.step_size > 0.0)) throw ConfigError("sample: step_size must be positive");
  RandomStream start_rng(derive_seed(cfg.seed, 0, 1));
  SampleSummary s;
  if (cfg.target.kind == TargetKind::gaussian) {
    if (cfg.target.precision.empty()) throw ConfigError("sample: target.precision is required for a gaussian target");
    const GaussianTarget target(Eigen::Map<const Vector>(cfg.target.precision.data(),
                                                         static_cast<Index>(cfg.target.precision.size())));
    Vector x0;
    switch (cfg.start.kind) {
      case StartKind::exact_target: x0 = target.sample(start_rng); break;
      case StartKind::gaussian_mode_start:
      case StartKind::gaussian_small_start: {
        const double v = cfg.start.variance_scale > 0.0 ? cfg.start.variance_scale
                         : cfg.start.kind == StartKind::gaussian_small_start ? 1e-3
                                                                             : 1.0 / target.smoothness();
        x0 = sample_gaussian_start(target.dim(), Vector::Zero(target.dim()), v, start_rng);
        break;
      }
      default:
        throw ConfigError("sample: start '" + to_string(cfg.start.kind) + "' needs the perturbed target");
    }
    const double q = quadrature::normal_quantile(cfg.quantile_level) / std::sqrt(target.precision()[target.dim() - 1]);
    s = sample_chain(target, x0, cfg, q);
  } else {
    const PerturbedGaussianTarget target({cfg.target.dim_perturbed, cfg.L, cfg.m, cfg.theta, false});
    const Vector x0 = draw_start(cfg.start, target, start_rng);
    s = sample_chain(target, x0, cfg, last_coordinate_quantile(cfg.quantile_level, cfg.m));
  }
  nlohmann::json j = {{"config", config_json(cfg)},
                      {"step_size", cfg.step_size},
                      {"lazy", cfg.lazy},
                      {"steps", s.steps},
                      {"proposals", s.proposals},
                      {"accepts", s.accepts},
                      {"acceptance_rate", s.proposals ? static_cast<double>(s.accepts) / s.proposals : 0.0},
                      {"last_coordinate_mean", s.last_mean},
                      {"last_coordinate_variance", s.last_var},
                      {"final_norm", s.final_norm},
                      {"tau", s.tau ? nlohmann::json(*s.tau) : nlohmann::json("not reached")}};
  if (cfg.out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(j, cfg.out_path);
  }
  return 0;
}

int run_verify_command() {
  const auto rows = verify::run_fast_checks();
  bool all = true;
  std::printf("%-36s %-5s %-12s %-10s %s\n", "check", "ok", "worst", "tol", "detail");
  for (const auto& r : rows) {
    std::printf("%-36s %-5s %-12.3e %-10.1e %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.worst, r.tolerance,
                r.detail.c_str());
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metropolis-adjusted Langevin sampler: experiments and checks"};
  app.require_subcommand(1);
  Overrides o;
  auto* sample = app.add_subcommand("sample", "run a single chain and print a trajectory summary");
  auto* sweep_d = app.add_subcommand("sweep-dimension", "acceptance and mixing proxy against dimension");
  auto* sweep_k = app.add_subcommand("sweep-condition", "acceptance and mixing proxy against condition number");
  auto* gap = app.add_subcommand("spectral-gap", "Dirichlet-form gap estimate and mixing lower bound");
  auto* verify = app.add_subcommand("verify", "analytic identity and oracle suite");
  for (auto* sub : {sample, sweep_d, sweep_k, gap}) add_common_flags(sub, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*verify) return run_verify_command();
    if (*sample) return run_sample_command(resolve(o, Experiment::single_run));
    if (*sweep_d) return run_sweep_command(resolve(o, Experiment::dimension_sweep));
    if (*sweep_k) return run_sweep_command(resolve(o, Experiment::condition_sweep));
    if (*gap) return run_spectral_command(resolve(o, Experiment::spectral_gap));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidParameter& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const RegimeError& e) {
    std::cerr << "out of regime: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateStart& e) {
    std::cerr << "degenerate start: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
