#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mala/common.hpp"

namespace mala::quadrature {

struct Result {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive 15-point Gauss-Kronrod integration of f over [a, b]; either end
/// may be infinite. Throws NumericalError when the error estimate exceeds
/// abs_tol.
template <class F>
Result integrate(F&& f, double a, double b, double abs_tol = 1e-10,
                 unsigned max_depth = 15) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  Result r;
  r.value = GK::integrate(f, a, b, max_depth, 1e-12, &r.error);
  if (!std::isfinite(r.value) || r.error > abs_tol) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "adaptive quadrature did not converge (error %.3g > %.3g)", r.error, abs_tol);
    throw NumericalError(buf);
  }
  return r;
}

/// Integrates over [a, b] split at the given interior breakpoints, so kinks
/// of a piecewise-smooth integrand fall on panel boundaries.
template <class F>
Result integrate_piecewise(F&& f, double a, double b, std::vector<double> breaks,
                           double abs_tol = 1e-10) {
  std::erase_if(breaks, [&](double t) { return !(t > a && t < b); });
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> knots;
  knots.push_back(a);
  knots.insert(knots.end(), breaks.begin(), breaks.end());
  knots.push_back(b);
  const double panel_tol = abs_tol / static_cast<double>(knots.size() - 1);
  Result total;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const Result r = integrate(f, knots[i], knots[i + 1], panel_tol);
    total.value += r.value;
    total.error += r.error;
  }
  return total;
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  detail::require(p > 0.0 && p < 1.0, "normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Gauss-Hermite rule for expectations under N(0, 1):
/// E[g(xi)] ~= sum_i weights[i] * g(nodes[i]).
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  template <class F>
  double expectation(F&& g) const {
    detail::CompensatedSum acc;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc.add(weights[i] * g(nodes[i]));
    return acc.value();
  }
};

/// Golub-Welsch construction for the probabilists' Hermite weight.
inline HermiteRule gauss_hermite(int n) {
  detail::require(n >= 1, "gauss_hermite: need at least one node");
  Vector diag = Vector::Zero(n);
  Vector sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("gauss_hermite: eigen decomposition failed");
  }
  HermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;
  }
  return rule;
}

}  // namespace mala::quadrature
