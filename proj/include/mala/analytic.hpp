#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "mala/common.hpp"
#include "mala/targets.hpp"

namespace mala::analytic {

struct StepSizeRecipe {
  double c0 = 1.0;
  double c2 = std::numbers::e * std::numbers::e;
  double h = 0.0;
};

/// h = c0 / (L sqrt(d) log^2(max{kappa, d, M/eps, c2})). c2 >= e keeps the
/// log bounded away from zero.
inline double theorem1_step_size(double L, double d, double kappa, double M, double eps,
                                 double c0 = 1.0, double c2 = std::numbers::e * std::numbers::e) {
  detail::require(L > 0.0 && d > 0.0 && M > 0.0 && c0 > 0.0, "theorem1_step_size: inputs must be positive");
  detail::require(eps > 0.0 && eps < 1.0, "theorem1_step_size: eps must lie in (0, 1)");
  detail::require(kappa >= 1.0, "theorem1_step_size: kappa must be >= 1");
  detail::require(c2 >= std::numbers::e, "theorem1_step_size: c2 must be >= e");
  const double arg = std::max({kappa, d, M / eps, c2});
  const double lg = std::log(arg);
  return c0 / (L * std::sqrt(d) * lg * lg);
}

inline StepSizeRecipe step_size_recipe(double L, double d, double kappa, double M, double eps,
                                       double c0 = 1.0,
                                       double c2 = std::numbers::e * std::numbers::e) {
  return {c0, c2, theorem1_step_size(L, d, kappa, M, eps, c0, c2)};
}

/// Integrand pi2(y) Q2(y, x) / pi2(x) for pi2 = N(0, 1/m) and the MALA
/// proposal density Q2 with step h.
inline double pi2_ratio_integrand(double m, double h, double x, double y) {
  const double r = x - (1.0 - m * h) * y;
  return std::exp(0.5 * m * (x * x - y * y) - r * r / (4.0 * h)) /
         std::sqrt(4.0 * std::numbers::pi * h);
}

/// Closed form of int pi2(y) Q2(y, x) / pi2(x) dy:
/// (1 + m^2 h^2)^{-1/2} exp(m^3 h^2 x^2 / (2 (1 + m^2 h^2))).
inline double pi2_ratio_integral(double m, double h, double x) {
  detail::require(m > 0.0 && h > 0.0, "pi2_ratio_integral: m and h must be positive");
  const double s = 1.0 + m * m * h * h;
  return std::exp(m * m * m * h * h * x * x / (2.0 * s)) / std::sqrt(s);
}

/// E[xi^ell cos(a + b xi)] for xi ~ N(0, 1), ell in {0, 1, 2}:
///   ell=0: cos(a) e^{-b^2/2}
///   ell=1: -b sin(a) e^{-b^2/2}
///   ell=2: (1 - b^2) cos(a) e^{-b^2/2}
inline double gaussian_cosine_moment(double a, double b, int ell) {
  const double damp = std::exp(-0.5 * b * b);
  switch (ell) {
    case 0: return std::cos(a) * damp;
    case 1: return -b * std::sin(a) * damp;
    case 2: return (1.0 - b * b) * std::cos(a) * damp;
    default: throw InvalidParameter("gaussian_cosine_moment: ell must be 0, 1 or 2");
  }
}

/// The matching upper bounds on |E[xi^ell cos(a + b xi)]|.
inline double gaussian_cosine_moment_bound(double b, int ell) {
  const double damp = std::exp(-0.5 * b * b);
  switch (ell) {
    case 0: return damp;
    case 1: return std::abs(b) * damp;
    case 2: return std::abs(b * b - 1.0) * damp;
    default: throw InvalidParameter("gaussian_cosine_moment_bound: ell must be 0, 1 or 2");
  }
}

struct Pi1Params {
  double L = 1.0;
  double zeta = 0.225;
};

/// The d-dimensional perturbed part alone:
///   f(x) = L/2 |x|^2 - 1/(2 d^{2 zeta}) sum cos(d^zeta sqrt(L) x_i).
class Pi1Target {
 public:
  Pi1Target(Index d, Pi1Params p) : d_(d), p_(p) {
    detail::require(d >= 1 && p.L > 0.0, "Pi1Target: need d >= 1 and L > 0");
    const double dz = std::pow(static_cast<double>(d), p.zeta);
    freq_ = dz * std::sqrt(p.L);
    amp_ = 0.5 / (dz * dz);
    grad_amp_ = std::sqrt(p.L) / (2.0 * dz);
  }

  Index dim() const { return d_; }
  double smoothness() const { return 1.5 * p_.L; }
  double strong_convexity() const { return 0.5 * p_.L; }
  double L() const { return p_.L; }

  /// f_P(x), the cosine part.
  double perturbation(const Vector& x) const {
    detail::CompensatedSum s;
    for (Index i = 0; i < d_; ++i) s.add(std::cos(freq_ * x[i]));
    return -amp_ * s.value();
  }
  /// grad f_P(x).
  Vector perturbation_gradient(const Vector& x) const {
    Vector g(d_);
    for (Index i = 0; i < d_; ++i) g[i] = grad_amp_ * std::sin(freq_ * x[i]);
    return g;
  }

  double neg_log_density(const Vector& x) const {
    return 0.5 * p_.L * x.squaredNorm() + perturbation(x);
  }
  void gradient(const Vector& x, Vector& g) const { g = p_.L * x + perturbation_gradient(x); }

 private:
  Index d_;
  Pi1Params p_;
  double freq_ = 0.0;
  double amp_ = 0.0;
  double grad_amp_ = 0.0;
};

struct DeltaBreakdown {
  std::array<double, 7> deltas{};
  Vector g;  // y - x + h grad f(x)
  double total = 0.0;
};

/// Splits the log acceptance exponent
///   f(x) - f(y) - |x - y + h grad f(y)|^2/(4h) + |y - x + h grad f(x)|^2/(4h)
/// for the pi1 target into seven terms, with g = y - x + h grad f(x),
/// P = grad f_P:
///   D1 = f_P(x) - f_P(y)
///   D2 = (L^3 h^2/2 - L^4 h^3/4)|x|^2 - (L^2 h/4)|g|^2
///   D3 = (L^3 h^2/2 - L^2 h/2) <x, g>
///   D4 = (1 + L^2 h^2)/2 <P(x), g> + (1 - L h)/2 <P(y), g>
///   D5 = (L^2 h^2/2 - L^3 h^3/2) <P(x), x> - (L h/2)(2 - L h) <P(y), x>
///   D6 = -(L h^2/2) |P(x)|^2
///   D7 = -(h/4) |(1 - L h) P(x) + P(y)|^2
inline DeltaBreakdown delta_decomposition(const Vector& x, const Vector& y, double h,
                                          const Pi1Params& params) {
  detail::require(h > 0.0, "delta_decomposition: h must be positive");
  detail::require(x.size() == y.size() && x.size() >= 1, "delta_decomposition: x and y must match");
  const Pi1Target target(x.size(), params);
  const double L = params.L;
  const Vector px = target.perturbation_gradient(x);
  const Vector py = target.perturbation_gradient(y);

  DeltaBreakdown out;
  out.g = y - x + h * (L * x + px);
  const Vector& g = out.g;

  const double c2x = L * L * L * h * h / 2.0 - L * L * L * L * h * h * h / 4.0;
  const double c2g = L * L * h / 4.0;
  const double c3 = L * L * L * h * h / 2.0 - L * L * h / 2.0;
  const double c4x = (1.0 + L * L * h * h) / 2.0;
  const double c4y = (1.0 - L * h) / 2.0;
  const double c5x = L * L * h * h / 2.0 - L * L * L * h * h * h / 2.0;
  const double c5y = L * h / 2.0 * (2.0 - L * h);
  const double c6 = L * h * h / 2.0;

  detail::CompensatedSum s2, s3, s4, s5, s6, s7;
  for (Index i = 0; i < x.size(); ++i) {
    s2.add(c2x * x[i] * x[i]);
    s2.add(-c2g * g[i] * g[i]);
    s3.add(c3 * x[i] * g[i]);
    s4.add(c4x * px[i] * g[i]);
    s4.add(c4y * py[i] * g[i]);
    s5.add(c5x * px[i] * x[i]);
    s5.add(-c5y * py[i] * x[i]);
    s6.add(-c6 * px[i] * px[i]);
    const double v = (1.0 - L * h) * px[i] + py[i];
    s7.add(-h / 4.0 * v * v);
  }
  out.deltas = {target.perturbation(x) - target.perturbation(y),
                s2.value(),
                s3.value(),
                s4.value(),
                s5.value(),
                s6.value(),
                s7.value()};
  detail::CompensatedSum total;
  for (double v : out.deltas) total.add(v);
  out.total = total.value();
  return out;
}

/// Certified bound 18 m h on the spectral ratio of the piecewise start,
/// valid for 0 < h < 1/m.
inline double lemma7a_gap_bound(double m, double h) {
  detail::require(m > 0.0 && h > 0.0, "lemma7a_gap_bound: m and h must be positive");
  if (m * h >= 1.0) throw RegimeError("lemma7a_gap_bound: requires h < 1/m");
  return 18.0 * m * h;
}

}  // namespace mala::analytic
