#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>

#include "mala/common.hpp"
#include "mala/diagnostics.hpp"
#include "mala/quadrature.hpp"
#include "mala/rng.hpp"
#include "mala/sampler.hpp"
#include "mala/targets.hpp"

namespace mala {

enum class StartKind {
  restricted_warm_G,
  gaussian_mode_start,
  gaussian_small_start,
  piecewise_lastdim,
  f1f2_restricted,
  exact_target,
};

/// How approximate draws from a one-dimensional marginal are produced.
enum class MarginalMethod {
  mala_burn_in,     // independent 1-D lazy MALA chain per coordinate
  exact_rejection,  // Gaussian envelope, exact for the product target
};

inline std::string to_string(StartKind k) {
  switch (k) {
    case StartKind::restricted_warm_G: return "restricted_warm_G";
    case StartKind::gaussian_mode_start: return "gaussian_mode_start";
    case StartKind::gaussian_small_start: return "gaussian_small_start";
    case StartKind::piecewise_lastdim: return "piecewise_lastdim";
    case StartKind::f1f2_restricted: return "f1f2_restricted";
    case StartKind::exact_target: return "exact_target";
  }
  return "unknown";
}

inline std::optional<StartKind> parse_start_kind(const std::string& s) {
  for (StartKind k : {StartKind::restricted_warm_G, StartKind::gaussian_mode_start,
                      StartKind::gaussian_small_start, StartKind::piecewise_lastdim,
                      StartKind::f1f2_restricted, StartKind::exact_target}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct StartSpec {
  StartKind kind = StartKind::restricted_warm_G;
  int burn_in = 2000;
  MarginalMethod marginal = MarginalMethod::mala_burn_in;
  // Gaussian starts: N(mode, variance_scale I). Non-positive means the kind's
  // default (1/L for the mode start, 1/1000 for the small start).
  double variance_scale = 0.0;
  std::uint64_t max_attempts = 1'000'000;

  void validate() const {
    detail::require(burn_in >= 0, "StartSpec: burn_in must be non-negative");
    detail::require(max_attempts >= 1, "StartSpec: max_attempts must be positive");
  }
};

struct WarmStartReport {
  std::optional<double> warmness_bound;  // M; nullopt when unknown
  std::optional<double> chi2_initial;    // chi^2(mu0 || pi); nullopt when unknown
  std::uint64_t samples_drawn = 0;
  double rejection_rate = 0.0;
  bool out_of_regime = false;
};

/// Attempt/accept counts for rejection-based starts.
struct RejectionTally {
  std::uint64_t attempts = 0;
  std::uint64_t accepted = 0;

  void merge(const RejectionTally& o) {
    attempts += o.attempts;
    accepted += o.accepted;
  }
  double acceptance() const {
    return attempts == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempts);
  }
};

// ---------------------------------------------------------------------------
// One-dimensional marginals of the perturbed Gaussian.

/// u -> L/2 u^2 - amp cos(freq u), a single perturbed coordinate.
class PerturbedMarginalTarget {
 public:
  explicit PerturbedMarginalTarget(const PerturbedGaussianTarget& t) : t_(&t) {}
  Index dim() const { return 1; }
  double smoothness() const { return 1.5 * t_->L(); }
  double strong_convexity() const { return 0.5 * t_->L(); }
  double neg_log_density(const Vector& x) const { return t_->marginal_value(x[0]); }
  void gradient(const Vector& x, Vector& g) const {
    g.resize(1);
    g[0] = t_->marginal_derivative(x[0]);
  }

 private:
  const PerturbedGaussianTarget* t_;
};

namespace detail {

inline double exact_perturbed_coordinate(const PerturbedGaussianTarget& t, RandomStream& rng) {
  // exp(amp cos(freq u)) <= exp(amp): accept N(0, 1/L) draws w.p. exp(amp (cos - 1)).
  const double sd = 1.0 / std::sqrt(t.L());
  for (;;) {
    const double u = sd * rng.normal();
    if (rng.uniform() < std::exp(t.amplitude() * (std::cos(t.frequency() * u) - 1.0))) return u;
  }
}

}  // namespace detail

/// Approximate draw from the product target pi: each perturbed coordinate
/// from its own 1-D chain (h = 1/(3L)) and the last one from a 1-D chain on
/// N(0, 1/m) (h = 1/(2m)), both lazy, burn_in steps from a Gaussian draw.
/// With MarginalMethod::exact_rejection the draw is exact.
inline Vector draw_product_target(const PerturbedGaussianTarget& t, RandomStream& rng,
                                  int burn_in, MarginalMethod method) {
  const Index d = t.dim_perturbed();
  Vector x(d + 1);
  if (method == MarginalMethod::exact_rejection) {
    for (Index i = 0; i < d; ++i) x[i] = detail::exact_perturbed_coordinate(t, rng);
    x[d] = rng.normal() / std::sqrt(t.m());
    return x;
  }
  const PerturbedMarginalTarget marginal(t);
  const GaussianTarget last = GaussianTarget::isotropic(1, t.m());
  const KernelConfig perturbed_kernel{1.0 / (3.0 * t.L()), true};
  const KernelConfig last_kernel{1.0 / (2.0 * t.m()), true};
  Vector x0(1);
  x0[0] = rng.normal() / std::sqrt(t.L());
  ChainState chain(marginal, x0, rng.next_u64());
  for (Index i = 0; i < d; ++i) {
    x0[0] = rng.normal() / std::sqrt(t.L());
    chain.reset_position(marginal, x0);
    for (int k = 0; k < burn_in; ++k) mala_step(chain, marginal, perturbed_kernel);
    x[i] = chain.position()[0];
  }
  x0[0] = rng.normal() / std::sqrt(t.m());
  ChainState tail(last, x0, rng.next_u64());
  for (int k = 0; k < burn_in; ++k) mala_step(tail, last, last_kernel);
  x[d] = tail.position()[0];
  return x;
}

// ---------------------------------------------------------------------------
// Restricted warm start on G.

/// G = { sqrt(L) |x_{1..d}| <= sqrt(d), sqrt(m) |x_{d+1}| <= 1 }.
inline bool in_set_G(const Vector& x, const PerturbedGaussianTarget& t) {
  const Index d = t.dim_perturbed();
  const double head = t.L() * x.head(d).squaredNorm();
  return head <= static_cast<double>(d) && std::sqrt(t.m()) * std::abs(x[d]) <= 1.0;
}

/// pi restricted to G, by rejection over approximate product draws.
inline Vector sample_restricted_warm_G(const PerturbedGaussianTarget& t, RandomStream& rng,
                                       int burn_in, RejectionTally* tally = nullptr,
                                       MarginalMethod method = MarginalMethod::mala_burn_in,
                                       std::uint64_t max_attempts = 1'000'000) {
  for (std::uint64_t a = 0; a < max_attempts; ++a) {
    Vector x = draw_product_target(t, rng, burn_in, method);
    const bool ok = in_set_G(x, t);
    if (tally) {
      ++tally->attempts;
      tally->accepted += ok;
    }
    if (ok) return x;
  }
  throw DegenerateStart("restricted warm start: retry limit exceeded");
}

// ---------------------------------------------------------------------------
// Gaussian starts.

inline Vector sample_gaussian_start(Index d, const Vector& mode, double variance_scale,
                                    RandomStream& rng) {
  detail::require(variance_scale > 0.0, "sample_gaussian_start: variance_scale must be positive");
  detail::require(mode.size() == d, "sample_gaussian_start: mode has wrong length");
  return mode + std::sqrt(variance_scale) * rng.normal_vector(d);
}

// ---------------------------------------------------------------------------
// Piecewise-linear density ratio on the last coordinate.

/// Z = int g(u) pi2(u) du, where g is |u| up to the knot 2/sqrt(m), then
/// 4/sqrt(m) - |u| out to 4/sqrt(m), and pi2 = N(0, 1/m).
inline double compute_piecewise_Z(double m) {
  detail::require(m > 0.0, "compute_piecewise_Z: m must be positive");
  const double s = std::sqrt(m);
  const double knot = 2.0 / s;
  const double edge = 4.0 / s;
  const auto integrand = [&](double u) {
    const double g = u <= knot ? u : edge - u;
    return g * s * std::exp(-0.5 * m * u * u) / std::sqrt(2.0 * std::numbers::pi);
  };
  return 2.0 * quadrature::integrate_piecewise(integrand, 0.0, edge, {knot}, 1e-10).value;
}

class PiecewiseStart {
 public:
  explicit PiecewiseStart(double m) : m_(m), Z_(compute_piecewise_Z(m)) {}

  double m() const { return m_; }
  double Z() const { return Z_; }

  /// h0(u) = dmu0/dpi as a function of the last coordinate.
  double density(double u) const {
    const double a = std::abs(u);
    const double s = std::sqrt(m_);
    if (s * a <= 2.0) return a / Z_;
    if (s * a <= 4.0) return (4.0 / s - a) / Z_;
    return 0.0;
  }

  /// sup h0 = 2/(Z sqrt(m)).
  double warmness() const { return 2.0 / (Z_ * std::sqrt(m_)); }

  /// Knots of h0, for quadrature panels.
  std::vector<double> knots() const {
    const double s = std::sqrt(m_);
    return {-4.0 / s, -2.0 / s, 0.0, 2.0 / s, 4.0 / s};
  }

  /// Draws u from h0(u) pi2(u) by rejection against pi2 with envelope M.
  double sample(RandomStream& rng, RejectionTally* tally = nullptr,
                std::uint64_t max_attempts = 1'000'000) const {
    const double M = warmness();
    for (std::uint64_t a = 0; a < max_attempts; ++a) {
      const double u = rng.normal() / std::sqrt(m_);
      const bool ok = rng.uniform() * M < density(u);
      if (tally) {
        ++tally->attempts;
        tally->accepted += ok;
      }
      if (ok) return u;
    }
    throw DegenerateStart("piecewise start: retry limit exceeded");
  }

 private:
  double m_;
  double Z_;
};

inline double piecewise_h0_density(double u, double m) { return PiecewiseStart(m).density(u); }

inline Vector sample_piecewise_lastdim(const PerturbedGaussianTarget& t, const PiecewiseStart& h0,
                                       RandomStream& rng, int burn_in,
                                       RejectionTally* tally = nullptr,
                                       MarginalMethod method = MarginalMethod::mala_burn_in) {
  Vector x = draw_product_target(t, rng, burn_in, method);
  x[t.dim_perturbed()] = h0.sample(rng, tally);
  return x;
}

// ---------------------------------------------------------------------------
// F1 x F2 restricted start.

struct F1Condition {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct F1Check {
  std::array<F1Condition, 5> conditions;
  bool member = false;
};

/// The five simultaneous conditions defining F1 (w = d^zeta sqrt(L)):
///   1. max_i sqrt(L)|x_i| < 4 sqrt(log 8d)
///   2. L |x|^2 < d + d^{1-4 zeta} + 5 sqrt(d)
///   3. sum -cos(w x_i) < -d^{1-2 zeta}/4 + d^{1-4 zeta}/2 + 2 sqrt(d)
///   4. |sum -cos(2 w x_i) + d^{1-2 zeta}/16| <= d^{1-4 zeta}/8 + 2 sqrt(d)
///   5. |sum sqrt(L) x_i sin(w x_i)| < d^{1-4 zeta}/2 + 2 sqrt(d)
inline F1Check f1_membership(const Vector& x, double L, double zeta) {
  detail::require(L > 0.0, "f1_membership: L must be positive");
  detail::require(zeta > 0.2 && zeta < 0.25, "f1_membership: zeta must lie in (1/5, 1/4)");
  detail::require(x.size() >= 1, "f1_membership: empty x");
  const double d = static_cast<double>(x.size());
  const double sL = std::sqrt(L);
  const double w = std::pow(d, zeta) * sL;
  const double d_1m4z = std::pow(d, 1.0 - 4.0 * zeta);
  const double d_1m2z = std::pow(d, 1.0 - 2.0 * zeta);
  const double sqd = std::sqrt(d);

  double max_abs = 0.0;
  detail::CompensatedSum norm2, cos1, cos2, xsin;
  for (Index i = 0; i < x.size(); ++i) {
    max_abs = std::max(max_abs, sL * std::abs(x[i]));
    norm2.add(x[i] * x[i]);
    cos1.add(-std::cos(w * x[i]));
    cos2.add(-std::cos(2.0 * w * x[i]));
    xsin.add(sL * x[i] * std::sin(w * x[i]));
  }

  F1Check r;
  auto& c = r.conditions;
  c[0] = {max_abs, 4.0 * std::sqrt(std::log(8.0 * d)), false};
  c[0].holds = c[0].lhs < c[0].rhs;
  c[1] = {L * norm2.value(), d + d_1m4z + 5.0 * sqd, false};
  c[1].holds = c[1].lhs < c[1].rhs;
  c[2] = {cos1.value(), -0.25 * d_1m2z + 0.5 * d_1m4z + 2.0 * sqd, false};
  c[2].holds = c[2].lhs < c[2].rhs;
  c[3] = {std::abs(cos2.value() + d_1m2z / 16.0), d_1m4z / 8.0 + 2.0 * sqd, false};
  c[3].holds = c[3].lhs <= c[3].rhs;
  c[4] = {std::abs(xsin.value()), 0.5 * d_1m4z + 2.0 * sqd, false};
  c[4].holds = c[4].lhs < c[4].rhs;
  r.member = c[0].holds && c[1].holds && c[2].holds && c[3].holds && c[4].holds;
  return r;
}

/// F2 = (-1/sqrt(m), 1/sqrt(m)).
inline bool in_set_F2(double u, double m) { return std::sqrt(m) * std::abs(u) < 1.0; }

inline Vector sample_f1f2_restricted(const PerturbedGaussianTarget& t, RandomStream& rng,
                                     int burn_in, RejectionTally* tally = nullptr,
                                     MarginalMethod method = MarginalMethod::mala_burn_in,
                                     std::uint64_t max_attempts = 1'000'000) {
  const Index d = t.dim_perturbed();
  for (std::uint64_t a = 0; a < max_attempts; ++a) {
    Vector x = draw_product_target(t, rng, burn_in, method);
    const bool ok = in_set_F2(x[d], t.m()) && f1_membership(x.head(d), t.L(), t.zeta()).member;
    if (tally) {
      ++tally->attempts;
      tally->accepted += ok;
    }
    if (ok) return x;
  }
  throw DegenerateStart("F1 x F2 start: retry limit exceeded");
}

// ---------------------------------------------------------------------------
// Dispatch by StartSpec.

/// Draws one x0 for the perturbed target according to spec.
inline Vector draw_start(const StartSpec& spec, const PerturbedGaussianTarget& t,
                         RandomStream& rng, RejectionTally* tally = nullptr) {
  spec.validate();
  switch (spec.kind) {
    case StartKind::restricted_warm_G:
      return sample_restricted_warm_G(t, rng, spec.burn_in, tally, spec.marginal, spec.max_attempts);
    case StartKind::gaussian_mode_start: {
      const double v = spec.variance_scale > 0.0 ? spec.variance_scale : 1.0 / t.L();
      return sample_gaussian_start(t.dim(), Vector::Zero(t.dim()), v, rng);
    }
    case StartKind::gaussian_small_start: {
      const double v = spec.variance_scale > 0.0 ? spec.variance_scale : 1e-3;
      return sample_gaussian_start(t.dim(), Vector::Zero(t.dim()), v, rng);
    }
    case StartKind::piecewise_lastdim:
      return sample_piecewise_lastdim(t, PiecewiseStart(t.m()), rng, spec.burn_in, tally,
                                      spec.marginal);
    case StartKind::f1f2_restricted:
      return sample_f1f2_restricted(t, rng, spec.burn_in, tally, spec.marginal, spec.max_attempts);
    case StartKind::exact_target:
      return draw_product_target(t, rng, 0, MarginalMethod::exact_rejection);
  }
  throw InvalidParameter("draw_start: unknown start kind");
}

/// Warmness and initial chi^2 for the idealized start, with the rejection
/// statistics observed while drawing. Restricted starts report
/// M = 1 / (estimated restricted mass).
inline WarmStartReport make_start_report(const StartSpec& spec, const PerturbedGaussianTarget& t,
                                         const RejectionTally& tally, std::uint64_t samples) {
  WarmStartReport r;
  r.samples_drawn = samples;
  r.rejection_rate = tally.attempts == 0 ? 0.0 : 1.0 - tally.acceptance();
  switch (spec.kind) {
    case StartKind::restricted_warm_G:
      if (tally.accepted > 0) r.warmness_bound = 1.0 / tally.acceptance();
      break;
    case StartKind::f1f2_restricted:
      if (tally.accepted > 0) {
        r.warmness_bound = 1.0 / tally.acceptance();
        r.chi2_initial = *r.warmness_bound - 1.0;
      }
      r.out_of_regime = t.dim_perturbed() < 2048;
      break;
    case StartKind::piecewise_lastdim: {
      const PiecewiseStart h0(t.m());
      r.warmness_bound = h0.warmness();
      r.chi2_initial = chi2_quadrature_lastdim([&](double u) { return h0.density(u); }, t.m(),
                                               h0.knots());
      break;
    }
    case StartKind::exact_target:
      r.warmness_bound = 1.0;
      r.chi2_initial = 0.0;
      break;
    case StartKind::gaussian_mode_start:
    case StartKind::gaussian_small_start:
      break;
  }
  return r;
}

}  // namespace mala
