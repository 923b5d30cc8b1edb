#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include "mala/common.hpp"
#include "mala/rng.hpp"
#include "mala/targets.hpp"

namespace mala {

struct KernelConfig {
  double step_size = 0.1;  // h; proposal N(x - h grad f(x), 2h I)
  bool lazy = true;        // stay put with probability 1/2 before proposing

  void validate() const {
    detail::require(step_size > 0.0 && std::isfinite(step_size),
                    "KernelConfig: step size must be positive");
  }
};

template <Target T, class Noise>
struct StepDriver;

/// Position, counters and random stream of one chain. Also caches f and
/// grad f at the current position so each step costs one gradient call.
class ChainState {
 public:
  template <Target T>
  ChainState(const T& target, Vector x0, std::uint64_t seed)
      : position_(std::move(x0)), rng_(seed) {
    reset_position(target, position_);
  }

  /// Moves the chain to x without touching the counters or the stream.
  template <Target T>
  void reset_position(const T& target, const Vector& x) {
    detail::require(x.size() == target.dim(), "ChainState: position dimension mismatch");
    position_ = x;
    grad_.resize(x.size());
    value_ = value_and_gradient(target, position_, grad_);
    proposal_.resize(x.size());
    proposal_grad_.resize(x.size());
  }

  const Vector& position() const { return position_; }
  double value() const { return value_; }
  const Vector& grad() const { return grad_; }
  std::uint64_t step_count() const { return step_count_; }
  std::uint64_t accepts() const { return accepts_; }
  std::uint64_t proposals() const { return proposals_; }
  RandomStream& rng() { return rng_; }

 private:
  template <Target T, class Noise>
  friend struct StepDriver;

  Vector position_;
  double value_ = 0.0;
  Vector grad_;
  Vector proposal_;
  Vector proposal_grad_;
  std::uint64_t step_count_ = 0;
  std::uint64_t accepts_ = 0;
  std::uint64_t proposals_ = 0;
  RandomStream rng_;
};

struct StepOutcome {
  bool proposed = false;
  bool accepted = false;
  double log_ratio = 0.0;  // meaningful only when proposed
};

/// Explicit randomness for one step, replacing draws from the chain's stream.
struct StepNoise {
  double lazy_coin = 1.0;  // stays put iff lazy and lazy_coin < 1/2
  Vector xi;               // proposal noise
  double uniform = 0.0;    // accept iff log(uniform) < log ratio
};

/// x - h grad f(x) + sqrt(2h) xi.
inline void mala_propose_into(const Vector& x, const Vector& grad_x, double h, const Vector& xi,
                              Vector& out) {
  out = x - h * grad_x + std::sqrt(2.0 * h) * xi;
}

template <Target T>
Vector mala_propose(const Vector& x, const T& target, double h, const Vector& xi) {
  detail::require(h > 0.0, "mala_propose: h must be positive");
  Vector out;
  mala_propose_into(x, gradient(target, x), h, xi, out);
  return out;
}

template <Target T>
Vector mala_propose(const Vector& x, const T& target, double h, RandomStream& rng) {
  return mala_propose(x, target, h, rng.normal_vector(x.size()));
}

namespace detail {

// [-f(y) - |x - y + h grad f(y)|^2/(4h)] - [-f(x) - |y - x + h grad f(x)|^2/(4h)]
inline double log_accept_ratio(const Vector& x, double fx, const Vector& gx, const Vector& y,
                               double fy, const Vector& gy, double h) {
  const double inv4h = 0.25 / h;
  double back = 0.0;
  double fwd = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    const double b = x[i] - y[i] + h * gy[i];
    const double f = y[i] - x[i] + h * gx[i];
    back += b * b;
    fwd += f * f;
  }
  return (fx - fy) - inv4h * (back - fwd);
}

}  // namespace detail

/// Log of the Metropolis-Hastings ratio pi(y) q(y, x) / (pi(x) q(x, y)),
/// unclamped; alpha = exp(min(0, .)).
template <Target T>
double mala_log_accept_ratio(const Vector& x, const Vector& y, const T& target, double h) {
  detail::require(h > 0.0, "mala_log_accept_ratio: h must be positive");
  Vector gx(target.dim()), gy(target.dim());
  const double fx = value_and_gradient(target, x, gx);
  const double fy = value_and_gradient(target, y, gy);
  return detail::log_accept_ratio(x, fx, gx, y, fy, gy, h);
}

/// log q(x, y) for the proposal N(x - h grad f(x), 2h I), normalized.
template <Target T>
double mala_log_proposal_density(const Vector& x, const Vector& y, const T& target, double h) {
  const Vector mean = x - h * gradient(target, x);
  const double d = static_cast<double>(x.size());
  return -(y - mean).squaredNorm() / (4.0 * h) - 0.5 * d * std::log(4.0 * std::numbers::pi * h);
}

template <Target T, class Noise>
struct StepDriver {
  static StepOutcome run(ChainState& s, const T& target, const KernelConfig& cfg, Noise&& noise) {
    ++s.step_count_;
    StepOutcome out;
    if (cfg.lazy && noise.lazy_coin(s) < 0.5) return out;

    const double h = cfg.step_size;
    noise.fill_xi(s, s.proposal_);
    s.proposal_ = s.position_ - h * s.grad_ + std::sqrt(2.0 * h) * s.proposal_;
    const double fy = value_and_gradient(target, s.proposal_, s.proposal_grad_);
    out.log_ratio = detail::log_accept_ratio(s.position_, s.value_, s.grad_, s.proposal_, fy,
                                             s.proposal_grad_, h);
    out.proposed = true;
    ++s.proposals_;
    const double u = noise.uniform(s);
    if (std::log(u) < out.log_ratio) {
      out.accepted = true;
      ++s.accepts_;
      std::swap(s.position_, s.proposal_);
      std::swap(s.grad_, s.proposal_grad_);
      s.value_ = fy;
    }
    return out;
  }
};

namespace detail {

struct StreamNoise {
  double lazy_coin(ChainState& s) { return s.rng().uniform(); }
  void fill_xi(ChainState& s, Vector& xi) { s.rng().fill_normal(xi); }
  double uniform(ChainState& s) { return s.rng().uniform(); }
};

struct InjectedNoise {
  const StepNoise& n;
  double lazy_coin(ChainState&) { return n.lazy_coin; }
  void fill_xi(ChainState&, Vector& xi) { xi = n.xi; }
  double uniform(ChainState&) { return n.uniform; }
};

}  // namespace detail

/// One transition of (optionally 1/2-lazy) MALA. The lazy coin is drawn
/// first, so a lazy hold consumes exactly one uniform from the stream.
/// Accepts iff log u < log ratio.
template <Target T>
StepOutcome mala_step(ChainState& state, const T& target, const KernelConfig& cfg) {
  return StepDriver<T, detail::StreamNoise>::run(state, target, cfg, detail::StreamNoise{});
}

template <Target T>
StepOutcome mala_step(ChainState& state, const T& target, const KernelConfig& cfg,
                      const StepNoise& noise) {
  detail::require(noise.xi.size() == target.dim(), "mala_step: injected noise has wrong length");
  return StepDriver<T, detail::InjectedNoise>::run(state, target, cfg, detail::InjectedNoise{noise});
}

/// Runs `steps` transitions, calling observe(state, outcome) after each.
template <Target T, class Observer>
void run_chain(ChainState& state, const T& target, const KernelConfig& cfg, std::uint64_t steps,
               Observer&& observe) {
  cfg.validate();
  for (std::uint64_t k = 0; k < steps; ++k) {
    const StepOutcome o = mala_step(state, target, cfg);
    observe(std::as_const(state), o);
  }
}

template <Target T>
void run_chain(ChainState& state, const T& target, const KernelConfig& cfg, std::uint64_t steps) {
  run_chain(state, target, cfg, steps, [](const ChainState&, const StepOutcome&) {});
}

// Single-step leapfrog view of the proposal.

struct LeapfrogState {
  Vector q;
  Vector p;
};

/// p_half = p - (eta/2) grad f(q); q' = q + eta p_half; p' = p_half - (eta/2) grad f(q').
/// With eta = sqrt(2h) and p = xi, q' is exactly the MALA proposal.
template <Target T>
LeapfrogState leapfrog_step(const LeapfrogState& s, const T& target, double eta) {
  detail::require(eta > 0.0, "leapfrog_step: eta must be positive");
  detail::require(s.q.size() == s.p.size(), "leapfrog_step: q and p differ in length");
  const Vector p_half = s.p - 0.5 * eta * gradient(target, s.q);
  LeapfrogState out;
  out.q = s.q + eta * p_half;
  out.p = p_half - 0.5 * eta * gradient(target, out.q);
  return out;
}

/// H(q0, p0) - H(q1, p1) with H(q, p) = f(q) + |p|^2 / 2.
template <Target T>
double hamiltonian_accept_exponent(const LeapfrogState& s0, const LeapfrogState& s1,
                                   const T& target) {
  return -target.neg_log_density(s1.q) - 0.5 * s1.p.squaredNorm() +
         target.neg_log_density(s0.q) + 0.5 * s0.p.squaredNorm();
}

}  // namespace mala
