#include <gtest/gtest.h>

#include <cmath>

#include "mala/initializers.hpp"
#include "mala/quadrature.hpp"

using namespace mala;

namespace {

PerturbedGaussianTarget target(Index d, double L, double m, double theta = 1.0 / 40.0) {
  PerturbedGaussianParams p;
  p.dim_perturbed = d;
  p.L = L;
  p.m = m;
  p.theta = theta;
  p.require_separation = false;
  return PerturbedGaussianTarget(p);
}

// Normalized mass of one perturbed coordinate's marginal on [a, b].
double marginal_mass(const PerturbedGaussianTarget& t, double a, double b) {
  const auto dens = [&](double u) { return std::exp(-t.marginal_value(u)); };
  const double lim = 12.0 / std::sqrt(t.L());
  const double z = quadrature::integrate(dens, -lim, lim, 1e-10).value;
  return quadrature::integrate(dens, a, b, 1e-10).value / z;
}

}  // namespace

TEST(StartKind, RoundTripsThroughStrings) {
  for (StartKind k : {StartKind::restricted_warm_G, StartKind::gaussian_mode_start, StartKind::gaussian_small_start,
                      StartKind::piecewise_lastdim, StartKind::f1f2_restricted, StartKind::exact_target}) {
    EXPECT_EQ(parse_start_kind(to_string(k)), k);
  }
  EXPECT_FALSE(parse_start_kind("warm").has_value());
}

TEST(RestrictedWarmG, SamplesLieInG) {
  const auto t = target(15, 1.0, 1.0);
  RandomStream rng(1);
  for (int k = 0; k < 50; ++k) {
    const Vector x = sample_restricted_warm_G(t, rng, 200);
    EXPECT_LE(t.L() * x.head(15).squaredNorm(), 15.0);
    EXPECT_LE(std::sqrt(t.m()) * std::abs(x[15]), 1.0);
  }
}

TEST(RestrictedWarmG, AcceptanceMatchesQuadratureOfG) {
  // d = 2: one perturbed coordinate plus the Gaussian one, L = m = 1.
  const auto t = target(1, 1.0, 1.0);
  const double pG = marginal_mass(t, -1.0, 1.0) * (2.0 * quadrature::normal_cdf(1.0) - 1.0);
  for (MarginalMethod method : {MarginalMethod::exact_rejection, MarginalMethod::mala_burn_in}) {
    RandomStream rng(2);
    RejectionTally tally;
    const int n = method == MarginalMethod::exact_rejection ? 40000 : 8000;
    double var_last = 0.0;
    for (int k = 0; k < n; ++k) {
      const Vector x = sample_restricted_warm_G(t, rng, 300, &tally, method);
      EXPECT_LE(std::abs(x[1]), 1.0);
      var_last += x[1] * x[1];
    }
    const double p = tally.acceptance();
    const double se = std::sqrt(pG * (1 - pG) / static_cast<double>(tally.attempts));
    EXPECT_NEAR(p, pG, 4 * se) << "method " << static_cast<int>(method);
    EXPECT_LT(var_last / n, 1.0 / t.m());
  }
}

TEST(RestrictedWarmG, RetryLimit) {
  const auto t = target(4, 1.0, 1.0);
  // One attempt per call; some seed in the sweep must draw outside G.
  bool threw = false;
  for (int s = 0; s < 200 && !threw; ++s) {
    RandomStream r(s);
    try {
      sample_restricted_warm_G(t, r, 10, nullptr, MarginalMethod::exact_rejection, 1);
    } catch (const DegenerateStart&) {
      threw = true;
    }
  }
  EXPECT_TRUE(threw);
}

TEST(ProductTarget, ExactDrawsMatchMarginalMoments) {
  const auto t = target(3, 2.0, 0.5);
  RandomStream rng(4);
  const int n = 100000;
  int inside = 0;
  double sq_last = 0.0;
  for (int k = 0; k < n; ++k) {
    const Vector x = draw_product_target(t, rng, 0, MarginalMethod::exact_rejection);
    inside += std::abs(x[0]) < 0.5;
    sq_last += x[3] * x[3];
  }
  const double p = marginal_mass(t, -0.5, 0.5);
  EXPECT_NEAR(static_cast<double>(inside) / n, p, 4 * std::sqrt(p * (1 - p) / n));
  EXPECT_NEAR(sq_last / n, 2.0, 4 * 2.0 * std::sqrt(2.0 / n));
}

TEST(GaussianStart, TinyVarianceConcentratesAtMode) {
  RandomStream rng(5);
  const Vector x = sample_gaussian_start(4, Vector::Zero(4), 1e-12, rng);
  EXPECT_LT(x.lpNorm<Eigen::Infinity>(), 1e-5);
  EXPECT_THROW(sample_gaussian_start(4, Vector::Zero(4), 0.0, rng), InvalidParameter);
}

TEST(GaussianStart, EmpiricalCovariance) {
  RandomStream rng(6);
  const int n = 100000;
  const double v = 0.3;
  const Vector mode{{1.0, -2.0}};
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int k = 0; k < n; ++k) {
    const Vector z = sample_gaussian_start(2, mode, v, rng) - mode;
    cov += z * z.transpose();
  }
  cov /= n;
  const double se_diag = v * std::sqrt(2.0 / n), se_off = v / std::sqrt(n);
  EXPECT_NEAR(cov(0, 0), v, 4 * se_diag);
  EXPECT_NEAR(cov(1, 1), v, 4 * se_diag);
  EXPECT_NEAR(cov(0, 1), 0.0, 4 * se_off);
}

TEST(Piecewise, DensityShape) {
  for (double m : {0.25, 1.0, 9.0}) {
    const PiecewiseStart h0(m);
    const double s = std::sqrt(m);
    EXPECT_EQ(h0.density(5.0 / s), 0.0);
    EXPECT_EQ(h0.density(0.0), 0.0);
    EXPECT_NEAR(h0.density(2.0 / s), 2.0 / (s * h0.Z()), 1e-12);
    EXPECT_EQ(h0.density(1.3 / s), h0.density(-1.3 / s));
    EXPECT_EQ(piecewise_h0_density(3.0 / s, m), h0.density(3.0 / s));
    EXPECT_GT(h0.density(3.99 / s), 0.0);
    EXPECT_EQ(h0.density(4.01 / s), 0.0);
  }
}

TEST(Piecewise, NormalizesAgainstPi2) {
  for (double m : {0.5, 1.0, 4.0}) {
    const PiecewiseStart h0(m);
    const auto f = [&](double u) { return h0.density(u) * std::sqrt(m) * quadrature::normal_pdf(std::sqrt(m) * u); };
    const double total = quadrature::integrate_piecewise(f, -4.0 / std::sqrt(m), 4.0 / std::sqrt(m), h0.knots()).value;
    EXPECT_NEAR(total, 1.0, 1e-8);
  }
}

TEST(Piecewise, NormalizerNumerics) {
  EXPECT_NEAR(compute_piecewise_Z(1.0), 10.0 * compute_piecewise_Z(100.0), 1e-10);
  const PiecewiseStart h0(1.0);
  EXPECT_GT(h0.Z(), 0.7);
  EXPECT_LT(h0.Z(), 0.8);
  EXPECT_GT(h0.warmness(), 2.6);
  EXPECT_LT(h0.warmness(), 2.7);
}

TEST(Piecewise, LipschitzInU) {
  const PiecewiseStart h0(2.0);
  RandomStream rng(7);
  for (int k = 0; k < 10000; ++k) {
    const double u = 6 * rng.uniform() - 3, v = 6 * rng.uniform() - 3;
    EXPECT_LE(std::abs(h0.density(u) - h0.density(v)), std::abs(u - v) / h0.Z() + 1e-15);
  }
}

TEST(Piecewise, SamplerMatchesQuadratureAndEnvelope) {
  const double m = 2.0;
  const auto t = target(3, 2.0, m);
  const PiecewiseStart h0(m);
  RandomStream rng(8);
  RejectionTally tally;
  const int n = 50000;
  double sum = 0, sq = 0;
  for (int k = 0; k < n; ++k) {
    const Vector x = sample_piecewise_lastdim(t, h0, rng, 0, &tally, MarginalMethod::exact_rejection);
    const double a = std::abs(x[3]) * std::sqrt(m);
    ASSERT_LE(a, 4.0);
    sum += a;
    sq += a * a;
  }
  const auto f = [&](double u) {
    return std::abs(u) * std::sqrt(m) * h0.density(u) * std::sqrt(m) * quadrature::normal_pdf(std::sqrt(m) * u);
  };
  const double expected = quadrature::integrate_piecewise(f, -4 / std::sqrt(m), 4 / std::sqrt(m), h0.knots()).value;
  const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, expected, 4 * se);
  EXPECT_GT(tally.acceptance(), 0.37);
  EXPECT_LT(tally.acceptance(), 0.385);
}

TEST(F1, OriginFailsConditionFour) {
  const F1Check c = f1_membership(Vector::Zero(16), 1.0, 0.24);
  EXPECT_FALSE(c.member);
  EXPECT_TRUE(c.conditions[0].holds);
  EXPECT_TRUE(c.conditions[1].holds);
  EXPECT_TRUE(c.conditions[2].holds);
  EXPECT_FALSE(c.conditions[3].holds);
  EXPECT_TRUE(c.conditions[4].holds);
  const double d = 16;
  EXPECT_NEAR(c.conditions[3].lhs, std::abs(-d + std::pow(d, 1 - 0.48) / 16), 1e-12);
  EXPECT_NEAR(c.conditions[3].rhs, std::pow(d, 1 - 0.96) / 8 + 2 * std::sqrt(d), 1e-12);
}

TEST(F1, LargeCoordinateFailsRegardless) {
  const auto t = target(64, 1.0, 1.0, 0.01);
  RandomStream rng(9);
  Vector x = draw_product_target(t, rng, 0, MarginalMethod::exact_rejection).head(64);
  x[5] = 4.0 * std::sqrt(std::log(8.0 * 64)) + 0.01;
  const F1Check c = f1_membership(x, 1.0, 0.24);
  EXPECT_FALSE(c.conditions[0].holds);
  EXPECT_FALSE(c.member);
}

TEST(F1, RejectsZetaOutsideRange) {
  EXPECT_THROW(f1_membership(Vector::Zero(4), 1.0, 0.2), InvalidParameter);
  EXPECT_THROW(f1_membership(Vector::Zero(4), 1.0, 0.25), InvalidParameter);
}

TEST(F1, ProbabilityAtLargeDimensionExceedsOneSixth) {
  // theta = 0.01 gives zeta = 0.24.
  const Index d = 2048;
  const auto t = target(d, 1.0, 1.0, 0.01);
  RandomStream rng(10);
  const int n = 10000;
  int hits = 0;
  for (int k = 0; k < n; ++k) {
    hits += f1_membership(draw_product_target(t, rng, 0, MarginalMethod::exact_rejection).head(d), 1.0, 0.24).member;
  }
  const double p = static_cast<double>(hits) / n;
  EXPECT_GT(p - 1.645 * std::sqrt(p * (1 - p) / n), 1.0 / 6.0);
}

TEST(F1F2, RestrictedSamplesAndAcceptance) {
  const Index d = 256;
  const auto t = target(d, 1.0, 1.0, 0.01);
  RandomStream rng(11);
  RejectionTally tally;
  for (int k = 0; k < 300; ++k) {
    const Vector x = sample_f1f2_restricted(t, rng, 0, &tally, MarginalMethod::exact_rejection);
    EXPECT_TRUE(in_set_F2(x[d], t.m()));
    EXPECT_TRUE(f1_membership(x.head(d), t.L(), t.zeta()).member);
  }
  EXPECT_GT(tally.acceptance(), 1.0 / 12.0);
  EXPECT_LT(tally.acceptance(), 0.75);
}

TEST(StartReport, WarmnessAndChi2) {
  const auto t = target(8, 2.0, 1.0);
  StartSpec spec;
  spec.kind = StartKind::piecewise_lastdim;
  const WarmStartReport pw = make_start_report(spec, t, {}, 0);
  ASSERT_TRUE(pw.warmness_bound && pw.chi2_initial);
  EXPECT_GT(*pw.warmness_bound, 2.6);
  EXPECT_GT(*pw.chi2_initial, 0.4);
  EXPECT_LT(*pw.chi2_initial, 0.5);

  spec.kind = StartKind::restricted_warm_G;
  const WarmStartReport g = make_start_report(spec, t, {100, 40}, 40);
  EXPECT_DOUBLE_EQ(*g.warmness_bound, 2.5);
  EXPECT_DOUBLE_EQ(g.rejection_rate, 0.6);
  EXPECT_FALSE(g.chi2_initial.has_value());

  spec.kind = StartKind::f1f2_restricted;
  const WarmStartReport f = make_start_report(spec, t, {10, 5}, 5);
  EXPECT_TRUE(f.out_of_regime);
  EXPECT_DOUBLE_EQ(*f.chi2_initial, 1.0);

  spec.kind = StartKind::gaussian_small_start;
  EXPECT_FALSE(make_start_report(spec, t, {}, 0).warmness_bound.has_value());
}

TEST(DrawStart, DeterministicForFixedSeed) {
  const auto t = target(6, 2.0, 1.0);
  for (StartKind k : {StartKind::restricted_warm_G, StartKind::gaussian_mode_start, StartKind::gaussian_small_start,
                      StartKind::piecewise_lastdim, StartKind::exact_target}) {
    StartSpec spec;
    spec.kind = k;
    spec.burn_in = 50;
    RandomStream a(42), b(42);
    EXPECT_EQ(draw_start(spec, t, a), draw_start(spec, t, b)) << to_string(k);
  }
}

TEST(DrawStart, SmallStartScale) {
  const auto t = target(200, 1.0, 1.0);
  StartSpec spec;
  spec.kind = StartKind::gaussian_small_start;
  RandomStream rng(12);
  const Vector x = draw_start(spec, t, rng);
  EXPECT_NEAR(x.squaredNorm() / 201, 1e-3, 4e-3 * std::sqrt(2.0 / 201));
}
