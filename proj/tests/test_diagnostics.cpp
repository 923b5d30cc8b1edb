#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mala/diagnostics.hpp"
#include "mala/initializers.hpp"

using namespace mala;

namespace {

// Brute force: sort every prefix and read off the ceil(n q)-th value.
std::optional<std::size_t> brute_force_tau(const std::vector<double>& xs, double q, double truth, double tol) {
  for (std::size_t n = 1; n <= xs.size(); ++n) {
    std::vector<double> prefix(xs.begin(), xs.begin() + n);
    std::sort(prefix.begin(), prefix.end());
    std::size_t k = 1;
    while (static_cast<double>(k) < static_cast<double>(n) * q - 1e-9) ++k;  // smallest k with k >= n q
    if (std::abs(prefix[k - 1] - truth) <= tol) return n;
  }
  return std::nullopt;
}

MixingProxyConfig proxy(double truth, double tol = 0.05) {
  MixingProxyConfig c;
  c.true_quantile = truth;
  c.tolerance = tol;
  return c;
}

}  // namespace

TEST(AcceptanceRate, AllAccepted) {
  std::vector<AcceptanceTally> t{{5, 5}, {7, 7}};
  EXPECT_EQ(acceptance_rate(t), 1.0);
}

TEST(AcceptanceRate, PoolsChainsAndRejectsEmpty) {
  std::vector<AcceptanceTally> t{{1, 4}, {3, 4}};
  EXPECT_EQ(acceptance_rate(t), 0.5);
  std::vector<AcceptanceTally> none{{0, 0}};
  EXPECT_THROW(acceptance_rate(none), InvalidParameter);
}

TEST(AcceptanceRate, TinyStepAndLazyInvariance) {
  const auto t = GaussianTarget::isotropic(2, 1.0);
  std::vector<ChainState> tiny{ChainState(t, Vector::Ones(2), 1)};
  run_chain(tiny[0], t, {1e-12, true}, 10000);
  EXPECT_GE(acceptance_rate(tiny), 0.999);

  std::vector<ChainState> lazy, eager;
  for (int c = 0; c < 20; ++c) {
    RandomStream init(c);
    lazy.emplace_back(t, t.sample(init), derive_seed(1, 0, c));
    eager.emplace_back(t, t.sample(init), derive_seed(1, 1, c));
    run_chain(lazy.back(), t, {1.5, true}, 4000);
    run_chain(eager.back(), t, {1.5, false}, 2000);
  }
  const double a = acceptance_rate(lazy), b = acceptance_rate(eager);
  const double se = std::sqrt(a * (1 - a) / 20000.0) * 2.0;  // chains are autocorrelated; be generous
  EXPECT_NEAR(a, b, 4 * se);
}

TEST(QuantileRank, InvertedCdfConvention) {
  EXPECT_EQ(quantile_rank(1, 0.9), 1u);
  EXPECT_EQ(quantile_rank(10, 0.9), 9u);
  EXPECT_EQ(quantile_rank(11, 0.9), 10u);
  EXPECT_EQ(quantile_rank(100, 0.9), 90u);
  EXPECT_EQ(quantile_rank(5, 0.5), 3u);
}

TEST(RunningQuantile, MatchesSortedPrefixes) {
  RandomStream rng(1);
  RunningQuantile rq(0.9);
  std::vector<double> seen;
  for (int i = 0; i < 500; ++i) {
    const double v = rng.normal();
    seen.push_back(v);
    const double q = rq.push(v);
    std::vector<double> s = seen;
    std::sort(s.begin(), s.end());
    ASSERT_EQ(q, s[quantile_rank(s.size(), 0.9) - 1]);
  }
}

TEST(MixingProxy, FirstSampleAtTruth) {
  const std::vector<double> xs{1.2816, 5.0, -3.0};
  EXPECT_EQ(mixing_proxy_tau(xs, proxy(1.2816), 100), 1u);
}

TEST(MixingProxy, FrozenChainNeverReaches) {
  const std::vector<double> xs(1000, 2.2816);
  EXPECT_FALSE(mixing_proxy_tau(xs, proxy(1.2816), 1000).has_value());
}

TEST(MixingProxy, EmptyAndInvalid) {
  EXPECT_THROW(mixing_proxy_tau(std::vector<double>{}, proxy(0.0), 10), InvalidParameter);
  MixingProxyConfig bad = proxy(0.0);
  bad.tolerance = 0.0;
  EXPECT_THROW(mixing_proxy_tau(std::vector<double>{1.0}, bad, 10), InvalidParameter);
}

TEST(MixingProxy, MatchesBruteForceOnIidNormals) {
  const double truth = quadrature::normal_quantile(0.9);
  std::vector<std::size_t> fast, slow;
  for (int r = 0; r < 200; ++r) {
    RandomStream rng(derive_seed(77, 0, r));
    std::vector<double> xs(400);
    for (double& x : xs) x = rng.normal();
    const auto a = mixing_proxy_tau(xs, proxy(truth), xs.size());
    const auto b = brute_force_tau(xs, 0.9, truth, 0.05);
    ASSERT_EQ(a, b) << "replication " << r;
    fast.push_back(a.value_or(0));
    slow.push_back(b.value_or(0));
  }
  std::nth_element(fast.begin(), fast.begin() + 100, fast.end());
  std::nth_element(slow.begin(), slow.begin() + 100, slow.end());
  EXPECT_EQ(fast[100], slow[100]);
}

TEST(MixingProxy, MaxNTruncates) {
  std::vector<double> xs(50, 10.0);
  xs.push_back(0.0);
  EXPECT_FALSE(mixing_proxy_tau(xs, proxy(0.0, 0.01), 50).has_value());
}

TEST(MixingProxy, MonotoneInTolerance) {
  RandomStream rng(3);
  std::vector<double> xs(2000);
  for (double& x : xs) x = 0.3 + rng.normal();
  std::size_t prev = xs.size() + 1;
  for (double tol : {0.01, 0.02, 0.05, 0.1, 0.3, 1.0}) {
    const std::size_t tau = mixing_proxy_tau(xs, proxy(1.2816, tol), xs.size()).value_or(xs.size() + 1);
    EXPECT_LE(tau, prev);
    prev = tau;
  }
}

TEST(MixingProxy, StreamingTrackerAgreesWithBatch) {
  RandomStream rng(4);
  std::vector<double> xs(3000);
  double v = 3.0;
  for (double& x : xs) x = v = 0.95 * v + 0.3 * rng.normal();
  const MixingProxyConfig c = proxy(0.5);
  MixingProxyTracker tracker(c);
  for (double x : xs) tracker.push(x);
  EXPECT_EQ(tracker.tau(), mixing_proxy_tau(xs, c, xs.size()));

  std::vector<Vector> states;
  for (double x : xs) states.push_back(Vector{{-1.0, x}});
  EXPECT_EQ(coordinate_trace(states, c), xs);
}

TEST(Dirichlet, ConstantFunctionGivesZero) {
  const auto t = GaussianTarget::isotropic(2, 1.0);
  RandomStream rng(5);
  const auto e = dirichlet_form_mc([](const Vector&) { return 3.0; }, t, KernelConfig{0.5, true}, 1000, rng,
                                   [&](RandomStream& r) { return t.sample(r); });
  EXPECT_EQ(e.dirichlet_form, 0.0);
  EXPECT_EQ(e.mc_stderr, 0.0);
  EXPECT_EQ(e.n_samples, 1000u);
}

TEST(Dirichlet, AlwaysRejectKernelGivesZero) {
  const auto t = GaussianTarget::isotropic(1, 1.0);
  RandomStream rng(6);
  const auto e = dirichlet_form_mc([](const Vector& x) { return x[0]; }, [&](RandomStream& r) { return t.sample(r); },
                                   [](const Vector& x, RandomStream&) { return x; }, 500, rng);
  EXPECT_EQ(e.dirichlet_form, 0.0);
  EXPECT_THROW(dirichlet_form_mc([](const Vector&) { return 0.0; }, [&](RandomStream& r) { return t.sample(r); },
                                 [](const Vector& x, RandomStream&) { return x; }, 0, rng),
               InvalidParameter);
}

TEST(Dirichlet, ReversedPairsAgree) {
  // For a reversible kernel, (x, y) and (y, x) have the same law under pi.
  const auto t = GaussianTarget::isotropic(1, 1.0);
  const KernelConfig k{0.8, false};
  const auto h0 = [](const Vector& x) { return std::tanh(x[0]) + 0.3 * x[0] * x[0]; };
  RandomStream rng(7);
  ChainState chain(t, Vector::Zero(1), 9);
  const int n = 40000;
  double fwd = 0, bwd = 0, f2 = 0, b2 = 0;
  for (int i = 0; i < n; ++i) {
    const Vector x = t.sample(rng);
    chain.reset_position(t, x);
    mala_step(chain, t, k);
    const Vector y = chain.position();
    // forward: h0(x)^2 - h0(x)h0(y); backward: h0(y)^2 - h0(x)h0(y)
    const double a = h0(x) * h0(x) - h0(x) * h0(y), b = h0(y) * h0(y) - h0(x) * h0(y);
    fwd += a;
    bwd += b;
    f2 += a * a;
    b2 += b * b;
  }
  const double se = std::sqrt((f2 / n - fwd * fwd / n / n + b2 / n - bwd * bwd / n / n) / n);
  EXPECT_NEAR(fwd / n, bwd / n, 4 * se);
}

TEST(Dirichlet, BoundedFunctionRatioAtMostTwo) {
  const auto t = GaussianTarget::isotropic(1, 1.0);
  const auto h0 = [](const Vector& x) { return x[0] > 0 ? 1.0 : 0.0; };
  RandomStream rng(8);
  auto e = dirichlet_form_mc(h0, t, KernelConfig{2.0, false}, 20000, rng, [&](RandomStream& r) { return t.sample(r); });
  e.with_chi2(0.25);  // Var of the indicator of a half-space under pi
  EXPECT_LE(e.gap_ratio, 2.0 * (1.0 + 4.0 * e.gap_stderr() / std::max(e.gap_ratio, 1e-300)));
  EXPECT_DOUBLE_EQ(e.gap_ratio, e.dirichlet_form / 0.25);
}

TEST(Chi2, ConstantOneIsZero) {
  EXPECT_NEAR(chi2_quadrature_lastdim([](double) { return 1.0; }, 2.0), 0.0, 1e-14);
}

TEST(Chi2, PiecewiseStartInPublishedInterval) {
  const PiecewiseStart h0(1.0);
  const double c = chi2_quadrature_lastdim([&](double u) { return h0.density(u); }, 1.0, h0.knots());
  EXPECT_GT(c, 0.4);
  EXPECT_LT(c, 0.5);
}

TEST(Chi2, IndicatorOfKnownMass) {
  // F = {|u| sqrt(m) < 1}: mass p = 2 Phi(1) - 1, h0 = 1_F / p, chi^2 = 1/p - 1.
  const double m = 3.0, s = std::sqrt(m);
  const double p = 2 * quadrature::normal_cdf(1.0) - 1;
  const double c =
      chi2_quadrature_lastdim([&](double u) { return s * std::abs(u) < 1 ? 1 / p : 0.0; }, m, {-1 / s, 1 / s});
  EXPECT_NEAR(c, 1 / p - 1, 1e-8);
}

TEST(LowerBound, DirectSubstitution) {
  EXPECT_NEAR(mixing_lower_bound(0.25, std::exp(1.0), 1.0).value, 2.0, 1e-14);
  EXPECT_NEAR(mixing_lower_bound(0.125, std::exp(2.0) * 0.01, 0.01).value, 8.0, 1e-12);
  // Lemma-7(a) composition: 18 m h with m h = 1/144 is 1/8.
  const double gap = 18.0 / 144.0;
  EXPECT_NEAR(mixing_lower_bound(gap, 0.7, 0.01).value, 4.0 * std::log(70.0), 1e-12);
}

TEST(LowerBound, RegimeHandling) {
  const MixingLowerBound weak = mixing_lower_bound(0.3, 1.0, 0.1);
  EXPECT_TRUE(weak.log_form);
  EXPECT_NEAR(weak.value, 2.0 / -std::log(1 - 0.6) * std::log(10.0), 1e-12);
  EXPECT_THROW(mixing_lower_bound(0.6, 1.0, 0.1), RegimeError);
  EXPECT_THROW(mixing_lower_bound(0.0, 1.0, 0.1), InvalidParameter);
  EXPECT_THROW(mixing_lower_bound(0.1, 0.1, 0.1), InvalidParameter);
}

TEST(LowerBound, MonotoneOnGrid) {
  for (double chi0 : {0.5, 1.0, 5.0}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double gap = 0.01; gap <= 0.25; gap += 0.01) {
      const double v = mixing_lower_bound(gap, chi0, 0.01).value;
      EXPECT_LT(v, prev);
      prev = v;
    }
  }
  for (double gap : {0.01, 0.1, 0.25}) {
    double prev = 0.0;
    for (double ratio = 1.5; ratio < 1e4; ratio *= 2) {
      const double v = mixing_lower_bound(gap, ratio * 0.01, 0.01).value;
      EXPECT_GT(v, prev);
      prev = v;
    }
  }
}
