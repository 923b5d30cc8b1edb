#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mala/analytic.hpp"
#include "mala/diagnostics.hpp"
#include "mala/initializers.hpp"
#include "mala/quadrature.hpp"
#include "mala/rng.hpp"
#include "mala/sampler.hpp"
#include "mala/targets.hpp"

// Identity and oracle checks. Each compares an implementation path against
// an independent route (algebraic identity, quadrature, or Monte Carlo) and
// reports the worst discrepancy seen.

namespace mala::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  double worst = 0.0;      // largest discrepancy observed
  double tolerance = 0.0;  // threshold it is compared against
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline Vector uniform_ball_point(RandomStream& rng, Index d, double radius) {
  Vector v = rng.normal_vector(d);
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
  return v * (r / std::max(v.norm(), 1e-300));
}

inline PerturbedGaussianTarget random_perturbed(RandomStream& rng) {
  PerturbedGaussianParams p;
  p.dim_perturbed = 1 + static_cast<Index>(rng.uniform() * 16);
  p.m = 0.5 + rng.uniform();
  p.L = 2.0 * p.m + 3.0 * rng.uniform();
  p.theta = 0.01 + 0.2 * rng.uniform();
  return PerturbedGaussianTarget(p);
}

inline GaussianTarget random_gaussian(RandomStream& rng) {
  const Index d = 1 + static_cast<Index>(rng.uniform() * 16);
  Vector prec(d);
  for (Index i = 0; i < d; ++i) prec[i] = 0.2 + 4.0 * rng.uniform();
  return GaussianTarget(prec);
}

template <class Fn>
CheckResult timed(std::string name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = fn();
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Componentwise relative error of a against b, relative to the larger of
// |b_i| and the magnitude of the terms that formed it.
inline double proposal_mismatch(const Vector& a, const Vector& b, const Vector& scale) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max({std::abs(b[i]), scale[i], 1e-300}));
  }
  return worst;
}

template <Target T>
double leapfrog_mismatch(const T& target, RandomStream& rng) {
  const Index d = target.dim();
  const Vector x = uniform_ball_point(rng, d, 10.0);
  const Vector p0 = uniform_ball_point(rng, d, 10.0);
  const double h = std::max(1e-6, rng.uniform());
  const double eta = std::sqrt(2.0 * h);
  const LeapfrogState s1 = leapfrog_step(LeapfrogState{x, p0}, target, eta);
  const Vector y = mala_propose(x, target, h, p0);
  const Vector g = gradient(target, x);
  const Vector scale = x.cwiseAbs() + h * g.cwiseAbs() + eta * p0.cwiseAbs();
  return proposal_mismatch(s1.q, y, scale);
}

template <Target T>
double hamiltonian_mismatch(const T& target, RandomStream& rng) {
  const Index d = target.dim();
  const Vector q0 = uniform_ball_point(rng, d, 10.0);
  const Vector p0 = uniform_ball_point(rng, d, 10.0);
  const double eta = std::max(1e-6, rng.uniform());
  const LeapfrogState s0{q0, p0};
  const LeapfrogState s1 = leapfrog_step(s0, target, eta);
  const double ham = hamiltonian_accept_exponent(s0, s1, target);
  const double mh = mala_log_accept_ratio(q0, s1.q, target, 0.5 * eta * eta);
  return std::abs(ham - mh);
}

template <Target T>
double detailed_balance_mismatch(const T& target, RandomStream& rng) {
  const Index d = target.dim();
  const Vector x = uniform_ball_point(rng, d, 5.0);
  const double h = std::max(1e-4, rng.uniform());
  // Half the pairs are genuine proposals, half arbitrary points.
  const Vector y = rng.uniform() < 0.5 ? mala_propose(x, target, h, rng) : Vector(uniform_ball_point(rng, d, 5.0));
  const double r = mala_log_accept_ratio(x, y, target, h);
  const double lhs = -target.neg_log_density(x) + mala_log_proposal_density(x, y, target, h) + std::min(0.0, r);
  const double rhs = -target.neg_log_density(y) + mala_log_proposal_density(y, x, target, h) +
                     std::min(0.0, mala_log_accept_ratio(y, x, target, h));
  return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
}

}  // namespace detail

/// Leapfrog position after one step with eta = sqrt(2h) and momentum p0
/// against the MALA proposal with noise p0; 1e-12 componentwise relative.
inline CheckResult check_leapfrog_proposal_identity(int n = 1000, std::uint64_t seed = 1) {
  return detail::timed("leapfrog/proposal identity", [&] {
    RandomStream rng(seed);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, i % 2 ? detail::leapfrog_mismatch(detail::random_perturbed(rng), rng)
                                    : detail::leapfrog_mismatch(detail::random_gaussian(rng), rng));
    }
    return CheckResult{"", worst <= 1e-12, worst, 1e-12, std::to_string(n) + " cases"};
  });
}

/// Hamiltonian energy difference against the Metropolis-Hastings log ratio
/// with h = eta^2/2; 1e-9 absolute.
inline CheckResult check_hamiltonian_identity(int n = 1000, std::uint64_t seed = 2) {
  return detail::timed("hamiltonian/acceptance identity", [&] {
    RandomStream rng(seed);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, i % 2 ? detail::hamiltonian_mismatch(detail::random_perturbed(rng), rng)
                                    : detail::hamiltonian_mismatch(detail::random_gaussian(rng), rng));
    }
    return CheckResult{"", worst <= 1e-9, worst, 1e-9, std::to_string(n) + " cases"};
  });
}

/// pi(x) q(x,y) alpha(x,y) = pi(y) q(y,x) alpha(y,x) in log space; 1e-9.
inline CheckResult check_detailed_balance(int n = 1000, std::uint64_t seed = 3) {
  return detail::timed("detailed balance", [&] {
    RandomStream rng(seed);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      worst = std::max(worst, i % 2 ? detail::detailed_balance_mismatch(detail::random_perturbed(rng), rng)
                                    : detail::detailed_balance_mismatch(detail::random_gaussian(rng), rng));
    }
    return CheckResult{"", worst <= 1e-9, worst, 1e-9, std::to_string(n) + " cases"};
  });
}

/// Sum of the seven terms against the sampler's log ratio on pi1;
/// |sum - direct| <= 1e-8 (1 + |direct|), d in {2, 8, 32}.
inline CheckResult check_delta_identity(int n = 500, std::uint64_t seed = 4) {
  return detail::timed("seven-term decomposition identity", [&] {
    RandomStream rng(seed);
    const Index dims[] = {2, 8, 32};
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const Index d = dims[i % 3];
      const analytic::Pi1Params p{0.25 + 4.0 * rng.uniform(), 0.2 + 0.05 * rng.uniform()};
      const analytic::Pi1Target target(d, p);
      const double h = 2.0 * std::max(1e-4, rng.uniform()) / p.L;
      const Vector x = rng.normal_vector(d) / std::sqrt(p.L);
      const Vector y = rng.uniform() < 0.5 ? mala_propose(x, target, h, rng)
                                           : Vector(rng.normal_vector(d) / std::sqrt(p.L));
      const double direct = mala_log_accept_ratio(x, y, target, h);
      const analytic::DeltaBreakdown br = analytic::delta_decomposition(x, y, h, p);
      worst = std::max(worst, std::abs(br.total - direct) / (1.0 + std::abs(direct)));
    }
    return CheckResult{"", worst <= 1e-8, worst, 1e-8, std::to_string(n) + " cases"};
  });
}

/// Quadrature of the pi2 ratio integrand over the Gaussian's centre +- 20
/// standard deviations; the neglected tails are below e^-200 relative.
inline double pi2_ratio_quadrature(double m, double h, double x) {
  const double s = 1.0 + m * m * h * h;
  const double centre = (1.0 - m * h) * x / s;
  const double sd = std::sqrt(2.0 * h / s);
  const auto f = [&](double y) { return analytic::pi2_ratio_integrand(m, h, x, y); };
  const double scale = analytic::pi2_ratio_integral(m, h, x);
  return quadrature::integrate_piecewise(f, centre - 20.0 * sd, centre + 20.0 * sd, {centre},
                                         1e-12 * std::max(1.0, scale))
      .value;
}

/// Closed-form pi2 ratio integral against quadrature on a 5x5x5 grid with
/// m h in [0.01, 2] and |x| sqrt(m) <= 3 (1e-8 relative), plus the bound
/// value <= exp(m x^2/2) <= 2 on F2.
inline CheckResult check_pi2_closed_form() {
  return detail::timed("pi2 ratio closed form", [&] {
    const double ms[] = {0.25, 0.5, 1.0, 2.0, 4.0};
    const double mhs[] = {0.01, 0.1, 0.5, 1.0, 2.0};
    const double xs[] = {-3.0, -1.5, 0.0, 1.0, 3.0};
    double worst = 0.0;
    bool bound_ok = true;
    for (double m : ms) {
      for (double mh : mhs) {
        const double h = mh / m;
        for (double xs_ : xs) {
          const double x = xs_ / std::sqrt(m);
          const double closed = analytic::pi2_ratio_integral(m, h, x);
          const double quad = pi2_ratio_quadrature(m, h, x);
          worst = std::max(worst, std::abs(closed - quad) / std::abs(quad));
        }
        if (mh < 1.0) {
          for (double t = -0.999; t < 1.0; t += 0.037) {
            const double x = t / std::sqrt(m);
            const double v = analytic::pi2_ratio_integral(m, h, x);
            bound_ok = bound_ok && v <= std::exp(0.5 * m * x * x) && v <= 2.0;
          }
        }
      }
    }
    return CheckResult{"", worst <= 1e-8 && bound_ok, worst, 1e-8,
                       bound_ok ? "bound <= 2 holds on F2" : "bound <= 2 violated on F2"};
  });
}

/// Cosine moments against Gauss-Hermite quadrature on a 10x10 (a, b) grid,
/// |a| <= 10, |b| <= 5, ell in {0,1,2}; 1e-10 absolute, plus the three
/// absolute-value bounds.
inline CheckResult check_cosine_moments(int nodes = 96) {
  return detail::timed("gaussian cosine moments", [&] {
    const quadrature::HermiteRule rule = quadrature::gauss_hermite(nodes);
    double worst = 0.0;
    bool bounds_ok = true;
    for (int i = 0; i < 10; ++i) {
      const double a = -10.0 + 20.0 * i / 9.0;
      for (int j = 0; j < 10; ++j) {
        const double b = -5.0 + 10.0 * j / 9.0;
        for (int ell = 0; ell <= 2; ++ell) {
          const double gh = rule.expectation([&](double xi) { return std::pow(xi, ell) * std::cos(a + b * xi); });
          const double closed = analytic::gaussian_cosine_moment(a, b, ell);
          worst = std::max(worst, std::abs(gh - closed));
          bounds_ok = bounds_ok && std::abs(closed) <= analytic::gaussian_cosine_moment_bound(b, ell) + 1e-15;
        }
      }
    }
    return CheckResult{"", worst <= 1e-10 && bounds_ok, worst, 1e-10,
                       bounds_ok ? "bounds hold" : "absolute-value bound violated"};
  });
}

struct PiecewiseNumerics {
  double z_sqrt_m = 0.0;
  double warmness = 0.0;
  double chi2 = 0.0;
};

inline PiecewiseNumerics piecewise_numerics(double m = 1.0) {
  const PiecewiseStart h0(m);
  PiecewiseNumerics r;
  r.z_sqrt_m = h0.Z() * std::sqrt(m);
  r.warmness = h0.warmness();
  r.chi2 = chi2_quadrature_lastdim([&](double u) { return h0.density(u); }, m, h0.knots());
  return r;
}

/// Z sqrt(m) in (0.7, 0.8), M = 2/(Z sqrt(m)) in (2.6, 2.7), chi^2 in (0.4, 0.5).
inline CheckResult check_piecewise_numerics() {
  return detail::timed("piecewise start numerics", [&] {
    bool ok = true;
    std::string detail;
    for (double m : {0.01, 1.0, 100.0}) {
      const PiecewiseNumerics n = piecewise_numerics(m);
      ok = ok && n.z_sqrt_m > 0.7 && n.z_sqrt_m < 0.8 && n.warmness > 2.6 && n.warmness < 2.7 && n.chi2 > 0.4 &&
           n.chi2 < 0.5;
      if (m == 1.0) {
        detail = "Z*sqrt(m)=" + std::to_string(n.z_sqrt_m) + " M=" + std::to_string(n.warmness) +
                 " chi2=" + std::to_string(n.chi2);
      }
    }
    return CheckResult{"", ok, 0.0, 0.0, detail};
  });
}

/// Empirical pi2(F2) for F2 = (-1/sqrt(m), 1/sqrt(m)) inside (1/2, 3/4) and
/// within 4 standard errors of 2 Phi(1) - 1.
inline CheckResult check_f2_mass(int n = 200'000, double m = 1.0, std::uint64_t seed = 9) {
  return detail::timed("pi2(F2) mass", [&] {
    RandomStream rng(seed);
    const GaussianTarget pi2 = GaussianTarget::isotropic(1, m);
    std::int64_t hits = 0;
    for (int i = 0; i < n; ++i) hits += in_set_F2(pi2.sample(rng)[0], m);
    const double p = static_cast<double>(hits) / n;
    const double se = std::sqrt(p * (1.0 - p) / n);
    const double exact = 2.0 * quadrature::normal_cdf(1.0) - 1.0;
    const bool ok = p - 4.0 * se > 0.5 && p + 4.0 * se < 0.75 && std::abs(p - exact) <= 4.0 * se;
    return CheckResult{"", ok, std::abs(p - exact), 4.0 * se,
                       "estimate " + std::to_string(p) + " exact " + std::to_string(exact)};
  });
}

/// The fast oracle suite run by the `verify` subcommand.
inline std::vector<CheckResult> run_fast_checks() {
  return {check_leapfrog_proposal_identity(), check_hamiltonian_identity(), check_detailed_balance(),
          check_delta_identity(),             check_pi2_closed_form(),      check_cosine_moments(),
          check_piecewise_numerics(),         check_f2_mass()};
}

}  // namespace mala::verify
