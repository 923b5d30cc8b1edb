#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <string>
#include <utility>
#include <variant>

#include "mala/common.hpp"
#include "mala/rng.hpp"

namespace mala {

/// A log-concave target pi ~ exp(-f). f is known only up to an additive
/// constant; every consumer works with differences of f.
template <class T>
concept Target = requires(const T& t, const Vector& x, Vector& g) {
  { t.dim() } -> std::convertible_to<Index>;
  { t.smoothness() } -> std::convertible_to<double>;
  { t.strong_convexity() } -> std::convertible_to<double>;
  { t.neg_log_density(x) } -> std::convertible_to<double>;
  t.gradient(x, g);
};

/// f(x) and grad f(x) in one pass when the target supports it.
template <Target T>
double value_and_gradient(const T& target, const Vector& x, Vector& grad) {
  if constexpr (requires { { target.value_and_gradient(x, grad) } -> std::convertible_to<double>; }) {
    return target.value_and_gradient(x, grad);
  } else {
    target.gradient(x, grad);
    return target.neg_log_density(x);
  }
}

template <Target T>
Vector gradient(const T& target, const Vector& x) {
  Vector g(target.dim());
  target.gradient(x, g);
  return g;
}

template <Target T>
double condition_number(const T& target) {
  return target.smoothness() / target.strong_convexity();
}

/// Product Gaussian with diagonal precision: f(x) = 1/2 sum_i p_i x_i^2.
class GaussianTarget {
 public:
  explicit GaussianTarget(Vector precision) : precision_(std::move(precision)) {
    detail::require(precision_.size() > 0, "gaussian_target: dimension must be positive");
    detail::require((precision_.array() > 0.0).all() && precision_.allFinite(),
                    "gaussian_target: precision entries must be positive");
  }

  static GaussianTarget isotropic(Index d, double precision) {
    return GaussianTarget(Vector::Constant(d, precision));
  }

  Index dim() const { return precision_.size(); }
  double smoothness() const { return precision_.maxCoeff(); }
  double strong_convexity() const { return precision_.minCoeff(); }
  const Vector& precision() const { return precision_; }

  double neg_log_density(const Vector& x) const {
    return 0.5 * (precision_.array() * x.array().square()).sum();
  }
  void gradient(const Vector& x, Vector& g) const { g = precision_.cwiseProduct(x); }
  double value_and_gradient(const Vector& x, Vector& g) const {
    g = precision_.cwiseProduct(x);
    return 0.5 * g.dot(x);
  }

  /// Exact draw from pi.
  Vector sample(RandomStream& rng) const {
    Vector x(dim());
    for (Index i = 0; i < dim(); ++i) x[i] = rng.normal() / std::sqrt(precision_[i]);
    return x;
  }

 private:
  Vector precision_;
};

inline GaussianTarget gaussian_target(Index d, const Vector& precision_diag) {
  detail::require(precision_diag.size() == d, "gaussian_target: precision length must equal d");
  return GaussianTarget(precision_diag);
}

struct PerturbedGaussianParams {
  Index dim_perturbed = 1;
  double L = 1.0;
  double m = 1.0;
  double theta = 1.0 / 40.0;
  // The worst-case construction assumes L >= 2m. The published experiments
  // run at L = m = 1, so the check can be switched off; the reported strong
  // convexity is then min(m, L/2).
  bool require_separation = true;
};

/// Cosine-perturbed Gaussian on R^{d+1}:
///   f(x) = L/2 sum_{i<=d} x_i^2 - 1/(2 d^{2 zeta}) sum_{i<=d} cos(d^zeta sqrt(L) x_i)
///          + m/2 x_{d+1}^2,           zeta = 1/4 - theta.
/// Hessian is diagonal with entries L(1 + cos(.)/2) in [L/2, 3L/2] and m.
class PerturbedGaussianTarget {
 public:
  explicit PerturbedGaussianTarget(const PerturbedGaussianParams& p) : params_(p) {
    detail::require(p.dim_perturbed >= 1, "perturbed_gaussian: dim_perturbed must be >= 1");
    detail::require(p.L > 0.0 && p.m > 0.0, "perturbed_gaussian: L and m must be positive");
    detail::require(p.theta > 0.0 && p.theta < 0.25, "perturbed_gaussian: theta must lie in (0, 1/4)");
    if (p.require_separation) {
      detail::require(p.L >= 2.0 * p.m, "perturbed_gaussian: requires L >= 2m");
    }
    zeta_ = 0.25 - p.theta;
    const double d = static_cast<double>(p.dim_perturbed);
    const double d_zeta = std::pow(d, zeta_);
    freq_ = d_zeta * std::sqrt(p.L);
    amp_ = 0.5 / (d_zeta * d_zeta);
    grad_amp_ = std::sqrt(p.L) / (2.0 * d_zeta);
  }

  const PerturbedGaussianParams& params() const { return params_; }
  Index dim_perturbed() const { return params_.dim_perturbed; }
  Index dim() const { return params_.dim_perturbed + 1; }
  double L() const { return params_.L; }
  double m() const { return params_.m; }
  double theta() const { return params_.theta; }
  double zeta() const { return zeta_; }
  /// d^zeta sqrt(L), the angular frequency of the ripples.
  double frequency() const { return freq_; }
  /// 1/(2 d^{2 zeta}), the ripple amplitude in f.
  double amplitude() const { return amp_; }

  double smoothness() const { return 1.5 * params_.L; }
  double strong_convexity() const { return std::min(params_.m, 0.5 * params_.L); }

  /// Cosine part f_P over the first d coordinates.
  double perturbation(const Vector& x) const {
    detail::CompensatedSum s;
    for (Index i = 0; i < params_.dim_perturbed; ++i) s.add(std::cos(freq_ * x[i]));
    return -amp_ * s.value();
  }

  double neg_log_density(const Vector& x) const {
    double quad = 0.0;
    double cos_sum = 0.0;
    const Index d = params_.dim_perturbed;
    for (Index i = 0; i < d; ++i) {
      quad += x[i] * x[i];
      cos_sum += std::cos(freq_ * x[i]);
    }
    return 0.5 * params_.L * quad - amp_ * cos_sum + 0.5 * params_.m * x[d] * x[d];
  }

  void gradient(const Vector& x, Vector& g) const { value_and_gradient(x, g); }

  double value_and_gradient(const Vector& x, Vector& g) const {
    const Index d = params_.dim_perturbed;
    g.resize(d + 1);
    double quad = 0.0;
    double cos_sum = 0.0;
    for (Index i = 0; i < d; ++i) {
      const double xi = x[i];
      const double arg = freq_ * xi;
      quad += xi * xi;
      cos_sum += std::cos(arg);
      g[i] = params_.L * xi + grad_amp_ * std::sin(arg);
    }
    g[d] = params_.m * x[d];
    return 0.5 * params_.L * quad - amp_ * cos_sum + 0.5 * params_.m * x[d] * x[d];
  }

  /// One perturbed coordinate's marginal: u -> L/2 u^2 - amp cos(freq u).
  double marginal_value(double u) const { return 0.5 * params_.L * u * u - amp_ * std::cos(freq_ * u); }
  double marginal_derivative(double u) const {
    return params_.L * u + grad_amp_ * std::sin(freq_ * u);
  }

 private:
  PerturbedGaussianParams params_;
  double zeta_ = 0.0;
  double freq_ = 0.0;
  double amp_ = 0.0;
  double grad_amp_ = 0.0;
};

inline PerturbedGaussianTarget perturbed_gaussian_target(const PerturbedGaussianParams& p) {
  return PerturbedGaussianTarget(p);
}

/// Target assembled from callables; test stubs and ad-hoc models.
class FunctionTarget {
 public:
  using Value = std::function<double(const Vector&)>;
  using Gradient = std::function<void(const Vector&, Vector&)>;

  FunctionTarget(Index dim, double L, double m, Value f, Gradient grad)
      : dim_(dim), L_(L), m_(m), f_(std::move(f)), grad_(std::move(grad)) {
    detail::require(dim > 0, "FunctionTarget: dimension must be positive");
    detail::require(m > 0.0 && L >= m, "FunctionTarget: need 0 < m <= L");
  }

  Index dim() const { return dim_; }
  double smoothness() const { return L_; }
  double strong_convexity() const { return m_; }
  double neg_log_density(const Vector& x) const { return f_(x); }
  void gradient(const Vector& x, Vector& g) const {
    g.resize(dim_);
    grad_(x, g);
  }

 private:
  Index dim_;
  double L_;
  double m_;
  Value f_;
  Gradient grad_;
};

/// Maximum relative discrepancy between central finite differences of f
/// and the analytic gradient at x: ||fd - g||_inf / max(1, ||g||_inf).
/// Step is 1e-6 (1 + ||x||) so it tracks the scale of x.
template <Target T>
double gradient_check_error(const T& target, const Vector& x) {
  const double step = 1e-6 * (1.0 + x.norm());
  Vector g(target.dim());
  target.gradient(x, g);
  Vector xp = x;
  double worst = 0.0;
  for (Index i = 0; i < target.dim(); ++i) {
    xp[i] = x[i] + step;
    const double fp = target.neg_log_density(xp);
    xp[i] = x[i] - step;
    const double fm = target.neg_log_density(xp);
    xp[i] = x[i];
    worst = std::max(worst, std::abs((fp - fm) / (2.0 * step) - g[i]));
  }
  return worst / std::max(1.0, g.lpNorm<Eigen::Infinity>());
}

/// Checks that the numerically differentiated diagonal Hessian at x lies in
/// [L/2 - tol, 3L/2 + tol] on the first d coordinates and within tol of m on
/// the last, with tol = 1e-4 L.
template <Target T>
bool hessian_diag_bounds_check(const T& target, const Vector& x, double L, double m) {
  const double tol = 1e-4 * L;
  const Index n = target.dim();
  Vector xp = x;
  Vector gp(n), gm(n);
  for (Index i = 0; i < n; ++i) {
    const double step = 1e-4 * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + step;
    target.gradient(xp, gp);
    xp[i] = x[i] - step;
    target.gradient(xp, gm);
    xp[i] = x[i];
    const double hii = (gp[i] - gm[i]) / (2.0 * step);
    if (!std::isfinite(hii)) return false;
    if (i + 1 < n) {
      if (hii < 0.5 * L - tol || hii > 1.5 * L + tol) return false;
    } else if (std::abs(hii - m) > tol) {
      return false;
    }
  }
  return true;
}

inline bool hessian_diag_bounds_check(const PerturbedGaussianTarget& target, const Vector& x) {
  return hessian_diag_bounds_check(target, x, target.L(), target.m());
}

/// Targets selectable from configuration.
using AnyTarget = std::variant<GaussianTarget, PerturbedGaussianTarget>;

}  // namespace mala
