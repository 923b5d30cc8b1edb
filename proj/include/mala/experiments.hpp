#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mala/analytic.hpp"
#include "mala/config.hpp"
#include "mala/diagnostics.hpp"
#include "mala/initializers.hpp"
#include "mala/quadrature.hpp"
#include "mala/sampler.hpp"
#include "mala/targets.hpp"

namespace mala::harness {

struct RunRecord {
  double sweep_value = 0.0;  // d or kappa
  double gamma = 0.0;
  double h = 0.0;
  double mean_accept = 0.0;
  double mean_tau = std::numeric_limits<double>::quiet_NaN();  // over chains that reached
  double frac_tau_not_reached = 0.0;
  int n_chains = 0;
  std::uint64_t seed = 0;

  // Not part of the CSV; reported in the metadata sidecar.
  double accept_stderr = 0.0;
  double tau_stderr = 0.0;
  double censored_mean_tau = 0.0;  // not-reached chains counted as max_steps + 1
  std::uint64_t total_proposals = 0;
  std::uint64_t total_accepts = 0;
  RejectionTally start_tally;
};

struct ChainResult {
  std::uint64_t accepts = 0;
  std::uint64_t proposals = 0;
  std::uint64_t steps = 0;
  std::optional<std::size_t> tau;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; callers write results into per-index slots.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// True 90% (or other level) quantile of the last coordinate, which is
/// exactly N(0, 1/m).
inline double last_coordinate_quantile(double level, double m) {
  return quadrature::normal_quantile(level) / std::sqrt(m);
}

/// One lazy-MALA chain from a drawn start, tracking the quantile proxy on
/// the last coordinate.
inline ChainResult run_tracked_chain(const PerturbedGaussianTarget& target, const StartSpec& start,
                                     const KernelConfig& kernel, const MixingProxyConfig& proxy,
                                     std::uint64_t steps, std::uint64_t seed,
                                     RejectionTally* tally) {
  RandomStream start_rng(splitmix64(seed ^ 0x5bd1e995ULL));
  const Vector x0 = draw_start(start, target, start_rng, tally);
  ChainState chain(target, x0, seed);
  MixingProxyTracker tracker(proxy);
  const Index last = target.dim() - 1;
  run_chain(chain, target, kernel, steps,
            [&](const ChainState& s, const StepOutcome&) { tracker.push(s.position()[last]); });
  return {chain.accepts(), chain.proposals(), chain.step_count(), tracker.tau()};
}

struct SweepPoint {
  double sweep_value = 0.0;
  double gamma = 0.0;
  double h = 0.0;
  PerturbedGaussianParams params;
};

inline RunRecord aggregate(const SweepPoint& p, const std::vector<ChainResult>& chains,
                           std::uint64_t seed, std::uint64_t max_steps,
                           const RejectionTally& tally) {
  RunRecord r;
  r.sweep_value = p.sweep_value;
  r.gamma = p.gamma;
  r.h = p.h;
  r.n_chains = static_cast<int>(chains.size());
  r.seed = seed;
  r.start_tally = tally;
  const double n = static_cast<double>(chains.size());
  double acc_sum = 0.0, acc_sq = 0.0;
  double tau_sum = 0.0, tau_sq = 0.0, censored = 0.0;
  std::size_t reached = 0;
  for (const auto& c : chains) {
    const double a = c.proposals ? static_cast<double>(c.accepts) / static_cast<double>(c.proposals) : 0.0;
    acc_sum += a;
    acc_sq += a * a;
    r.total_accepts += c.accepts;
    r.total_proposals += c.proposals;
    if (c.tau) {
      const double t = static_cast<double>(*c.tau);
      tau_sum += t;
      tau_sq += t * t;
      censored += t;
      ++reached;
    } else {
      censored += static_cast<double>(max_steps + 1);
    }
  }
  r.mean_accept = acc_sum / n;
  r.accept_stderr = n > 1 ? std::sqrt(std::max(0.0, (acc_sq - n * r.mean_accept * r.mean_accept) / (n - 1)) / n) : 0.0;
  r.frac_tau_not_reached = 1.0 - static_cast<double>(reached) / n;
  r.censored_mean_tau = censored / n;
  if (reached > 0) {
    const double k = static_cast<double>(reached);
    r.mean_tau = tau_sum / k;
    r.tau_stderr = reached > 1 ? std::sqrt(std::max(0.0, (tau_sq - k * r.mean_tau * r.mean_tau) / (k - 1)) / k) : 0.0;
  }
  return r;
}

/// Runs n_chains chains at every sweep point. Points are processed in
/// ascending (sweep_value, gamma) order and the point index seeds its chains.
inline std::vector<RunRecord> run_sweep(const ExperimentConfig& cfg, std::vector<SweepPoint> points) {
  std::sort(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
    return a.sweep_value != b.sweep_value ? a.sweep_value < b.sweep_value : a.gamma < b.gamma;
  });
  MixingProxyConfig proxy;
  proxy.quantile_level = cfg.quantile_level;
  proxy.tolerance = cfg.tau_tolerance;

  std::vector<RunRecord> records;
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const SweepPoint& p = points[pi];
    const PerturbedGaussianTarget target(p.params);
    proxy.true_quantile = last_coordinate_quantile(cfg.quantile_level, target.m());
    const KernelConfig kernel{p.h, true};
    std::vector<ChainResult> results(static_cast<std::size_t>(cfg.n_chains));
    std::vector<RejectionTally> tallies(results.size());
    parallel_for(results.size(), cfg.workers, [&](std::size_t c) {
      results[c] = run_tracked_chain(target, cfg.start, kernel, proxy, cfg.max_steps,
                                     derive_seed(cfg.seed, pi, c), &tallies[c]);
    });
    RejectionTally tally;
    for (const auto& t : tallies) tally.merge(t);
    records.push_back(aggregate(p, results, cfg.seed, cfg.max_steps, tally));
  }
  return records;
}

/// Dimension sweep: total dimension d (d - 1 perturbed coordinates plus the
/// Gaussian one), h = d^{-gamma}.
inline std::vector<RunRecord> run_dimension_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.experiment != Experiment::dimension_sweep) throw ConfigError("run_dimension_sweep: wrong experiment kind");
  if (cfg.start.kind != StartKind::restricted_warm_G && cfg.start.kind != StartKind::gaussian_small_start) {
    throw ConfigError("dimension sweep: start must be restricted_warm_G or gaussian_small_start");
  }
  if (cfg.dims.empty() || cfg.gammas.empty()) throw ConfigError("dimension sweep: dims and gammas must be non-empty");
  std::vector<SweepPoint> points;
  for (long d : cfg.dims) {
    for (double g : cfg.gammas) {
      SweepPoint p;
      p.sweep_value = static_cast<double>(d);
      p.gamma = g;
      p.h = std::pow(static_cast<double>(d), -g);
      p.params = {d - 1, cfg.L, cfg.m, cfg.theta, false};
      points.push_back(p);
    }
  }
  return run_sweep(cfg, std::move(points));
}

/// Condition sweep: d fixed (default 32), L = kappa m, h = kappa^{-gamma} d^{-1/2}.
inline std::vector<RunRecord> run_condition_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.experiment != Experiment::condition_sweep) throw ConfigError("run_condition_sweep: wrong experiment kind");
  if (cfg.start.kind != StartKind::restricted_warm_G && cfg.start.kind != StartKind::gaussian_small_start) {
    throw ConfigError("condition sweep: start must be restricted_warm_G or gaussian_small_start");
  }
  if (cfg.dims.size() != 1) throw ConfigError("condition sweep: exactly one dimension expected");
  if (cfg.kappas.empty() || cfg.gammas.empty()) throw ConfigError("condition sweep: kappas and gammas must be non-empty");
  const long d = cfg.dims.front();
  std::vector<SweepPoint> points;
  for (double kappa : cfg.kappas) {
    for (double g : cfg.gammas) {
      SweepPoint p;
      p.sweep_value = kappa;
      p.gamma = g;
      p.h = std::pow(kappa, -g) / std::sqrt(static_cast<double>(d));
      p.params = {d - 1, kappa * cfg.m, cfg.m, cfg.theta, false};
      points.push_back(p);
    }
  }
  return run_sweep(cfg, std::move(points));
}

// ---------------------------------------------------------------------------
// Spectral gap pipeline

struct SpectralGapResult {
  SpectralEstimate estimate;
  double chi0 = 0.0;  // sqrt(chi2)
  double eps = 0.0;
  double lower_bound = 0.0;  // +inf when the Dirichlet form vanishes
  bool log_form = false;
  bool flagged = false;
  std::string note;
  std::optional<double> warmness;
  bool out_of_regime = false;
};

/// Dirichlet form by Monte Carlo, chi^2 supplied, then the mixing lower bound.
template <class H0, class DrawPi>
SpectralGapResult spectral_gap_pipeline(H0&& h0, double chi2, const PerturbedGaussianTarget& target,
                                        const KernelConfig& kernel, std::int64_t n, double eps,
                                        RandomStream& rng, DrawPi&& draw_pi) {
  SpectralGapResult r;
  r.estimate = dirichlet_form_mc(h0, target, kernel, n, rng, draw_pi);
  r.estimate.with_chi2(chi2);
  r.chi0 = std::sqrt(std::max(chi2, 0.0));
  r.eps = eps;
  if (r.estimate.dirichlet_form <= 0.0 || chi2 <= 0.0) {
    r.lower_bound = std::numeric_limits<double>::infinity();
    r.flagged = true;
    r.note = "vanishing Dirichlet form or chi^2; no finite lower bound";
    return r;
  }
  if (!(r.chi0 > eps)) {
    r.flagged = true;
    r.note = "initial chi divergence does not exceed eps";
    return r;
  }
  try {
    const MixingLowerBound b = mixing_lower_bound(r.estimate.gap_ratio, r.chi0, eps);
    r.lower_bound = b.value;
    r.log_form = b.log_form;
    if (b.log_form) {
      r.flagged = true;
      r.note = "gap ratio above 1/4; logarithmic form used";
    }
  } catch (const RegimeError& e) {
    r.flagged = true;
    r.lower_bound = std::numeric_limits<double>::quiet_NaN();
    r.note = e.what();
  }
  return r;
}

inline PerturbedGaussianTarget spectral_target(const ExperimentConfig& cfg) {
  return PerturbedGaussianTarget({cfg.target.dim_perturbed, cfg.L, cfg.m, cfg.theta, false});
}

inline SpectralGapResult run_spectral_gap(const ExperimentConfig& cfg) {
  validate(cfg);
  if (!(cfg.step_size > 0.0)) throw ConfigError("spectral gap: step_size must be positive");
  if (cfg.n_pairs <= 0) throw ConfigError("spectral gap: n_pairs must be positive");
  if (!(cfg.eps > 0.0)) throw ConfigError("spectral gap: eps must be positive");
  const PerturbedGaussianTarget target = spectral_target(cfg);
  const KernelConfig kernel{cfg.step_size, cfg.lazy};
  RandomStream rng(derive_seed(cfg.seed, 0, 0));
  const MarginalMethod method = cfg.start.marginal;
  const int burn = cfg.start.burn_in;
  auto draw_pi = [&](RandomStream& r) { return draw_product_target(target, r, burn, method); };
  const Index last = target.dim() - 1;

  if (cfg.start.kind == StartKind::piecewise_lastdim) {
    const PiecewiseStart h0(target.m());
    const double chi2 = chi2_quadrature_lastdim([&](double u) { return h0.density(u); }, target.m(), h0.knots());
    auto h0x = [&](const Vector& x) { return h0.density(x[last]); };
    SpectralGapResult r = spectral_gap_pipeline(h0x, chi2, target, kernel, cfg.n_pairs, cfg.eps, rng, draw_pi);
    r.warmness = h0.warmness();
    return r;
  }
  if (cfg.start.kind == StartKind::f1f2_restricted) {
    const Index d = target.dim_perturbed();
    auto member = [&](const Vector& x) {
      return in_set_F2(x[last], target.m()) && f1_membership(x.head(d), target.L(), target.zeta()).member;
    };
    // Restricted mass by Monte Carlo over pi; then h0 = M 1_{F1 x F2}, chi^2 = M - 1.
    RandomStream mass_rng(derive_seed(cfg.seed, 1, 0));
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < cfg.n_pairs; ++i) hits += member(draw_pi(mass_rng));
    if (hits == 0) throw DegenerateStart("spectral gap: F1 x F2 has no mass in the sample");
    const double M = static_cast<double>(cfg.n_pairs) / static_cast<double>(hits);
    auto h0x = [&](const Vector& x) { return member(x) ? M : 0.0; };
    SpectralGapResult r = spectral_gap_pipeline(h0x, M - 1.0, target, kernel, cfg.n_pairs, cfg.eps, rng, draw_pi);
    r.warmness = M;
    r.out_of_regime = d < 2048;
    return r;
  }
  throw ConfigError("spectral gap: start must be piecewise_lastdim or f1f2_restricted");
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_header() {
  return "sweep_value,gamma,h,mean_accept,mean_tau,frac_tau_not_reached,n_chains,seed";
}

/// CSV body, rows sorted by (sweep_value, gamma).
inline std::string render_csv(std::vector<RunRecord> records) {
  if (records.empty()) throw InvalidParameter("emit_csv: no records");
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.sweep_value != b.sweep_value ? a.sweep_value < b.sweep_value : a.gamma < b.gamma;
  });
  std::string out = csv_header() + "\n";
  for (const auto& r : records) {
    out += format_double(r.sweep_value) + "," + format_double(r.gamma) + "," + format_double(r.h) + "," +
           format_double(r.mean_accept) + "," + format_double(r.mean_tau) + "," +
           format_double(r.frac_tau_not_reached) + "," + std::to_string(r.n_chains) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

inline void emit_csv(const std::vector<RunRecord>& records, const std::string& path) {
  const std::string body = render_csv(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "' for writing");
  out << body;
  out.flush();
  if (!out) throw std::runtime_error("emit_csv: write to '" + path + "' failed");
}

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
  return {{"experiment", to_string(cfg.experiment)},
          {"theta", cfg.theta},
          {"L", cfg.L},
          {"m", cfg.m},
          {"dims", cfg.dims},
          {"kappas", cfg.kappas},
          {"gammas", cfg.gammas},
          {"n_chains", cfg.n_chains},
          {"max_steps", cfg.max_steps},
          {"seed", cfg.seed},
          {"lazy", true},
          {"quantile_level", cfg.quantile_level},
          {"tau_tolerance", cfg.tau_tolerance},
          {"tau_trajectory", "positions after each transition, initial state excluded"},
          {"start",
           {{"kind", to_string(cfg.start.kind)},
            {"burn_in", cfg.start.burn_in},
            {"marginal", cfg.start.marginal == MarginalMethod::mala_burn_in ? "mala_burn_in" : "exact_rejection"},
            {"variance_scale", cfg.start.variance_scale},
            {"max_attempts", cfg.start.max_attempts}}}};
}

inline nlohmann::json start_report_json(const WarmStartReport& rep) {
  nlohmann::json j;
  j["warmness_bound"] = rep.warmness_bound ? nlohmann::json(*rep.warmness_bound) : nlohmann::json("unknown");
  j["chi2_initial"] = rep.chi2_initial ? nlohmann::json(*rep.chi2_initial) : nlohmann::json("unknown");
  j["samples_drawn"] = rep.samples_drawn;
  j["rejection_rate"] = rep.rejection_rate;
  j["out_of_regime"] = rep.out_of_regime;
  return j;
}

/// Sidecar with the configuration, declared defaults, standard errors and
/// warm-start reports for each record.
inline nlohmann::json sweep_metadata(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
  nlohmann::json j;
  j["config"] = config_json(cfg);
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    PerturbedGaussianParams params;
    const long d = cfg.experiment == Experiment::condition_sweep ? cfg.dims.front() : static_cast<long>(r.sweep_value);
    params.dim_perturbed = d - 1;
    params.L = cfg.experiment == Experiment::condition_sweep ? r.sweep_value * cfg.m : cfg.L;
    params.m = cfg.m;
    params.theta = cfg.theta;
    params.require_separation = false;
    const WarmStartReport rep = make_start_report(cfg.start, PerturbedGaussianTarget(params), r.start_tally,
                                                  static_cast<std::uint64_t>(r.n_chains));
    j["records"].push_back({{"sweep_value", r.sweep_value},
                            {"gamma", r.gamma},
                            {"h", r.h},
                            {"mean_accept", r.mean_accept},
                            {"accept_stderr", r.accept_stderr},
                            {"mean_tau", std::isnan(r.mean_tau) ? nlohmann::json(nullptr) : nlohmann::json(r.mean_tau)},
                            {"tau_stderr", r.tau_stderr},
                            {"censored_mean_tau", r.censored_mean_tau},
                            {"frac_tau_not_reached", r.frac_tau_not_reached},
                            {"total_proposals", r.total_proposals},
                            {"total_accepts", r.total_accepts},
                            {"start_report", start_report_json(rep)}});
  }
  return j;
}

inline nlohmann::json spectral_json(const ExperimentConfig& cfg, const SpectralGapResult& r) {
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v)); };
  return {{"config", config_json(cfg)},
          {"step_size", cfg.step_size},
          {"dim_perturbed", cfg.target.dim_perturbed},
          {"dirichlet_form", r.estimate.dirichlet_form},
          {"dirichlet_stderr", r.estimate.mc_stderr},
          {"chi2", r.estimate.chi2},
          {"gap_ratio", r.estimate.gap_ratio},
          {"gap_stderr", r.estimate.gap_stderr()},
          {"n_samples", r.estimate.n_samples},
          {"chi0", r.chi0},
          {"eps", r.eps},
          {"lower_bound", num(r.lower_bound)},
          {"log_form", r.log_form},
          {"flagged", r.flagged},
          {"note", r.note},
          {"warmness", r.warmness ? nlohmann::json(*r.warmness) : nlohmann::json("unknown")},
          {"out_of_regime", r.out_of_regime}};
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

}  // namespace mala::harness
