#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "mala/common.hpp"
#include "mala/quadrature.hpp"
#include "mala/rng.hpp"
#include "mala/sampler.hpp"
#include "mala/targets.hpp"

namespace mala {

// ---------------------------------------------------------------------------
// Acceptance rate

struct AcceptanceTally {
  std::uint64_t accepts = 0;
  std::uint64_t proposals = 0;
};

/// Total accepts over total proposals; lazy holds are not proposals.
template <class Range>
double acceptance_rate(const Range& chains) {
  std::uint64_t acc = 0;
  std::uint64_t prop = 0;
  for (const auto& c : chains) {
    if constexpr (requires { c.accepts(); }) {
      acc += c.accepts();
      prop += c.proposals();
    } else {
      acc += c.accepts;
      prop += c.proposals;
    }
  }
  if (prop == 0) throw InvalidParameter("acceptance_rate: no proposals recorded");
  return static_cast<double>(acc) / static_cast<double>(prop);
}

// ---------------------------------------------------------------------------
// Quantile mixing proxy

struct MixingProxyConfig {
  double quantile_level = 0.9;
  double tolerance = 0.05;
  std::optional<Index> coordinate;  // default: last
  double true_quantile = 0.0;

  void validate() const {
    detail::require(quantile_level > 0.0 && quantile_level < 1.0,
                    "MixingProxyConfig: quantile_level must lie in (0, 1)");
    detail::require(tolerance > 0.0, "MixingProxyConfig: tolerance must be positive");
  }
};

/// 1-based rank of the empirical q-quantile of n samples: ceil(n q), the
/// inverted-CDF convention. Guarded against n*q landing a rounding error
/// above an integer.
inline std::size_t quantile_rank(std::size_t n, double q) {
  const double nq = static_cast<double>(n) * q;
  auto k = static_cast<std::size_t>(std::ceil(nq - 1e-9 * nq));
  return std::clamp<std::size_t>(k, 1, n);
}

/// Running inverted-CDF quantile of a growing sample.
class RunningQuantile {
 public:
  explicit RunningQuantile(double q) : q_(q) {}

  double push(double v) {
    if (!low_.empty() && v <= low_.top()) {
      low_.push(v);
    } else {
      high_.push(v);
    }
    ++n_;
    const std::size_t k = quantile_rank(n_, q_);
    while (low_.size() > k) {
      high_.push(low_.top());
      low_.pop();
    }
    while (low_.size() < k) {
      low_.push(high_.top());
      high_.pop();
    }
    return low_.top();
  }

  std::size_t size() const { return n_; }

 private:
  double q_;
  std::size_t n_ = 0;
  std::priority_queue<double> low_;
  std::priority_queue<double, std::vector<double>, std::greater<>> high_;
};

/// tau = min{ n <= max_n : |q_n - q| <= tol } where q_n is the empirical
/// quantile of the first n values; nullopt when never reached.
inline std::optional<std::size_t> mixing_proxy_tau(std::span<const double> trajectory,
                                                   const MixingProxyConfig& cfg,
                                                   std::size_t max_n) {
  cfg.validate();
  if (trajectory.empty()) throw InvalidParameter("mixing_proxy_tau: empty trajectory");
  RunningQuantile rq(cfg.quantile_level);
  const std::size_t n = std::min(max_n, trajectory.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(rq.push(trajectory[i]) - cfg.true_quantile) <= cfg.tolerance) return i + 1;
  }
  return std::nullopt;
}

/// Picks the configured coordinate from each state of a trajectory.
inline std::vector<double> coordinate_trace(std::span<const Vector> states,
                                            const MixingProxyConfig& cfg) {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& x : states) out.push_back(x[cfg.coordinate.value_or(x.size() - 1)]);
  return out;
}

/// Streaming form for long chains: feed values one at a time.
class MixingProxyTracker {
 public:
  explicit MixingProxyTracker(const MixingProxyConfig& cfg) : cfg_(cfg), rq_(cfg.quantile_level) {
    cfg.validate();
  }

  // Stops tracking once the proxy is reached; tau is a first-passage time.
  void push(double v) {
    if (tau_) return;
    const double q = rq_.push(v);
    if (!tau_ && std::abs(q - cfg_.true_quantile) <= cfg_.tolerance) tau_ = rq_.size();
  }

  std::optional<std::size_t> tau() const { return tau_; }

 private:
  MixingProxyConfig cfg_;
  RunningQuantile rq_;
  std::optional<std::size_t> tau_;
};

// ---------------------------------------------------------------------------
// Dirichlet form, chi^2 and the spectral ratio

struct SpectralEstimate {
  double dirichlet_form = 0.0;
  double chi2 = 0.0;
  double gap_ratio = 0.0;  // dirichlet_form / chi2 when chi2 > 0
  double mc_stderr = 0.0;  // of dirichlet_form
  std::uint64_t n_samples = 0;

  /// Standard error of gap_ratio, treating chi2 as exact.
  double gap_stderr() const { return chi2 > 0.0 ? mc_stderr / chi2 : 0.0; }

  SpectralEstimate& with_chi2(double c) {
    chi2 = c;
    gap_ratio = c > 0.0 ? dirichlet_form / c : 0.0;
    return *this;
  }
};

/// 1/2 E[(h0(x) - h0(y))^2] with x ~ pi from draw_pi(rng) and y = step(x, rng).
template <class H0, class DrawPi, class Transition>
SpectralEstimate dirichlet_form_mc(H0&& h0, DrawPi&& draw_pi, Transition&& step,
                                   std::int64_t n, RandomStream& rng) {
  if (n <= 0) throw InvalidParameter("dirichlet_form_mc: n must be positive");
  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const Vector x = draw_pi(rng);
    const Vector y = step(x, rng);
    const double diff = h0(x) - h0(y);
    const double term = 0.5 * diff * diff;
    const double delta = term - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (term - mean);
  }
  SpectralEstimate e;
  e.dirichlet_form = mean;
  e.n_samples = static_cast<std::uint64_t>(n);
  e.mc_stderr = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return e;
}

/// Same, with y drawn by one step of the MALA kernel.
template <Target T, class H0, class DrawPi>
SpectralEstimate dirichlet_form_mc(H0&& h0, const T& target, const KernelConfig& kernel,
                                   std::int64_t n, RandomStream& rng, DrawPi&& draw_pi) {
  kernel.validate();
  std::optional<ChainState> chain;
  auto step = [&](const Vector& x, RandomStream& r) -> Vector {
    if (!chain) {
      chain.emplace(target, x, r.next_u64());
    } else {
      chain->reset_position(target, x);
    }
    mala_step(*chain, target, kernel);
    return chain->position();
  };
  return dirichlet_form_mc(h0, draw_pi, step, n, rng);
}

/// int (h0(u) - 1)^2 pi2(u) du for pi2 = N(0, 1/m), by adaptive quadrature
/// split at the given breakpoints (kinks of h0).
template <class H0>
double chi2_quadrature_lastdim(H0&& h0_1d, double m, std::vector<double> breaks = {}) {
  detail::require(m > 0.0, "chi2_quadrature_lastdim: m must be positive");
  const double s = std::sqrt(m);
  breaks.push_back(0.0);
  const auto integrand = [&](double u) {
    const double e = h0_1d(u) - 1.0;
    return e * e * s * quadrature::normal_pdf(s * u);
  };
  return quadrature::integrate_piecewise(integrand, -std::numeric_limits<double>::infinity(),
                                         std::numeric_limits<double>::infinity(), breaks, 1e-8)
      .value;
}

// ---------------------------------------------------------------------------
// Mixing-time lower bound from the spectral ratio

struct MixingLowerBound {
  double value = 0.0;
  bool log_form = false;  // gap in (1/4, 1/2]: the weaker logarithmic form was used
};

/// n >= 1/2 gap^{-1} log(chi0/eps) for gap <= 1/4; for gap in (1/4, 1/2]
/// returns 2 (-log(1 - 2 gap))^{-1} log(chi0/eps) flagged as log_form.
inline MixingLowerBound mixing_lower_bound(double gap_ratio, double chi0, double eps) {
  detail::require(gap_ratio > 0.0, "mixing_lower_bound: gap ratio must be positive");
  detail::require(eps > 0.0 && chi0 > eps, "mixing_lower_bound: need chi0 > eps > 0");
  const double log_ratio = std::log(chi0 / eps);
  if (gap_ratio <= 0.25) return {0.5 / gap_ratio * log_ratio, false};
  if (gap_ratio <= 0.5) {
    // 2 gap = 1 makes the log form degenerate to 0.
    const double denom = -std::log1p(-2.0 * gap_ratio);
    return {2.0 / denom * log_ratio, true};
  }
  throw RegimeError("mixing_lower_bound: gap ratio above 1/2 is outside the bound's regime");
}

}  // namespace mala
