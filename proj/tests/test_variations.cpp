#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "shelab/errors.hpp"
#include "shelab/linear_exact.hpp"
#include "shelab/rng.hpp"
#include "shelab/variations.hpp"

using namespace shelab;

namespace {

std::vector<double> brownian(std::size_t n, double h, std::uint64_t seed, std::uint32_t rep = 0) {
  NormalStream z({seed, 0, rep});
  std::vector<double> w(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) w[i] = w[i - 1] + std::sqrt(h) * z.next();
  return w;
}

SampledPath view(const std::vector<double>& v, double origin, double spacing,
                 PathBoundary b = PathBoundary::None) {
  SampledPath p;
  p.values = v;
  p.origin = origin;
  p.spacing = spacing;
  p.boundary = b;
  return p;
}

}  // namespace

TEST(PowerVariation, SmallExample) {
  const std::vector<double> v{0.0, 1.0, -1.0, 2.0};
  EXPECT_DOUBLE_EQ(power_variation(v, 2), 1.0 + 4.0 + 9.0);
  EXPECT_DOUBLE_EQ(power_variation(v, 4), 1.0 + 16.0 + 81.0);
}

TEST(PowerVariation, RejectsBadInput) {
  const std::vector<double> one{1.0};
  const std::vector<double> two{1.0, 2.0};
  EXPECT_THROW(power_variation(one, 2), DomainError);
  EXPECT_THROW(power_variation(two, 3), DomainError);
  EXPECT_THROW(power_variation(two, 0), DomainError);
}

TEST(PowerVariation, ShiftReversalScaling) {
  const auto w = brownian(4096, 1.0 / 4096, 11);
  for (unsigned p : {2u, 4u}) {
    const double base = power_variation(w, p);
    auto shifted = w;
    for (double& x : shifted) x += 3.75;
    auto reversed = std::vector<double>(w.rbegin(), w.rend());
    auto scaled = w;
    const double c = 1.7;
    for (double& x : scaled) x *= c;
    EXPECT_NEAR(power_variation(shifted, p), base, 1e-12 * base);
    EXPECT_NEAR(power_variation(reversed, p), base, 1e-12 * base);
    EXPECT_NEAR(power_variation(scaled, p), std::pow(c, p) * base, 1e-12 * std::pow(c, p) * base);
  }
}

TEST(PowerVariation, SmoothPathDecaysLikeOneOverN) {
  std::vector<double> ns, vs;
  for (std::size_t n : {64u, 128u, 256u, 512u, 1024u}) {
    std::vector<double> f(n + 1);
    for (std::size_t j = 0; j <= n; ++j) f[j] = std::sin(3.0 * static_cast<double>(j) / static_cast<double>(n));
    ns.push_back(std::log(static_cast<double>(n)));
    vs.push_back(std::log(power_variation(f, 2)));
  }
  const double slope = (vs.back() - vs.front()) / (ns.back() - ns.front());
  EXPECT_NEAR(slope, -1.0, 0.05);
}

TEST(PowerVariation, BrownianQuadraticVariationIsLength) {
  const std::size_t n = 1u << 16;
  const double t = 2.0;
  const auto w = brownian(n, t / static_cast<double>(n), 5);
  // sd of the sum is t sqrt(2 / n) ~ 0.011
  EXPECT_NEAR(power_variation(w, 2), t, 0.05);
}

TEST(Partition, SubsamplesTheGrid) {
  std::vector<double> v(101);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const auto p = view(v, 0.0, 0.01);
  const auto part = make_partition(p, 0.2, 0.6, 8);
  EXPECT_EQ(part.first, 20u);
  EXPECT_EQ(part.stride, 5u);
  const auto g = gather(p, part);
  ASSERT_EQ(g.size(), 9u);
  EXPECT_EQ(g.front(), 20.0);
  EXPECT_EQ(g.back(), 60.0);
}

TEST(Partition, RejectsIncommensurateWindow) {
  std::vector<double> v(101, 0.0);
  const auto p = view(v, 0.0, 0.01);
  EXPECT_THROW(make_partition(p, 0.2, 0.6, 7), ConfigError);
  EXPECT_THROW(make_partition(p, 0.205, 0.605, 8), ConfigError);
}

TEST(Partition, RejectsOutOfRangeAndTooFine) {
  std::vector<double> v(101, 0.0);
  const auto p = view(v, 0.0, 0.01);
  EXPECT_THROW(make_partition(p, 0.5, 1.5, 10), ConfigError);
  PartitionRules rules;
  rules.min_stride = 8;
  EXPECT_THROW(make_partition(p, 0.2, 0.6, 8, rules), ConfigError);
  EXPECT_NO_THROW(make_partition(p, 0.2, 0.6, 4, rules));
}

TEST(Partition, GuardBandOnWalledPaths) {
  std::vector<double> v(101, 0.0);
  const auto walled = view(v, 0.0, 0.01, PathBoundary::Walled);
  EXPECT_THROW(make_partition(walled, 0.05, 0.5, 9), ConfigError);
  EXPECT_THROW(make_partition(walled, 0.5, 0.95, 9), ConfigError);
  EXPECT_NO_THROW(make_partition(walled, 0.1, 0.9, 8));
  const auto open = view(v, 0.0, 0.01);
  EXPECT_NO_THROW(make_partition(open, 0.05, 0.5, 9));
}

TEST(Partition, PeriodicWrapsAround) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  const auto p = view(v, 0.0, 0.01, PathBoundary::Periodic);
  const auto part = make_partition(p, 0.8, 1.2, 4);
  const auto g = gather(p, part);
  EXPECT_EQ(g[0], 80.0);
  EXPECT_EQ(g[2], 0.0);
  EXPECT_EQ(g[4], 20.0);
  EXPECT_THROW(make_partition(p, 0.0, 1.5, 3), ConfigError);
}

TEST(Reports, ConstantSigmaTargets) {
  std::vector<double> v(1025, 0.0);
  const auto p = view(v, 0.0, 1.0 / 1024);
  const auto s = spatial_quadratic_report(p, SigmaSpec::constant(1.0), 1.0, 1.0 / 16, 0.25, 0.75);
  EXPECT_EQ(s.n, 8u);
  EXPECT_DOUBLE_EQ(s.target, 0.25);

  const auto tv = view(v, 1.0, 1.0 / 1024);
  const auto t = temporal_quartic_report(tv, SigmaSpec::constant(1.0), 1.0, 1.25, 1.75, 8);
  EXPECT_DOUBLE_EQ(t.target, 3.0 / std::numbers::pi * 0.5);
  EXPECT_EQ(t.relative_error, 1.0);
}

TEST(Reports, FullSpanTargetIsOneHalfForUnitSigma) {
  std::vector<double> v(1025, 0.0);
  const auto p = view(v, 0.0, 1.0 / 1024);
  EXPECT_DOUBLE_EQ(spatial_quadratic_report(p, SigmaSpec::constant(1.0), 1.0, 1.0 / 32, 0.0, 1.0).target, 0.5);
}

TEST(Reports, ZeroSigmaGivesZeroTarget) {
  std::vector<double> v(1025, 0.0);
  const auto p = view(v, 0.0, 1.0 / 1024);
  const auto s = spatial_quadratic_report(p, SigmaSpec::constant(0.0), 1.0, 1.0 / 16, 0.25, 0.75);
  EXPECT_EQ(s.target, 0.0);
  EXPECT_EQ(s.empirical, 0.0);
  EXPECT_EQ(s.relative_error, 0.0);
}

TEST(Reports, NonConstantTargetUsesTrapezoidOnFineGrid) {
  // X(x) = x on [0, 1]; sigma(u) = 2 + sin u; target = 1/2 int_a^b (2 + sin x)^2 dx.
  const std::size_t m = 4096;
  std::vector<double> v(m + 1);
  for (std::size_t i = 0; i <= m; ++i) v[i] = static_cast<double>(i) / static_cast<double>(m);
  const auto p = view(v, 0.0, 1.0 / static_cast<double>(m));
  const auto r = spatial_quadratic_report(p, SigmaSpec::sine(2.0, 1.0, 1.0), 1.0, 1.0 / 8, 0.25, 0.75);
  const auto antideriv = [](double x) { return 4.5 * x - 4.0 * std::cos(x) - 0.25 * std::sin(2.0 * x); };
  const double exact = 0.5 * (antideriv(0.75) - antideriv(0.25));
  EXPECT_NEAR(r.target, exact, 1e-7);
}

TEST(Reports, TemporalNeedsPositiveStart) {
  std::vector<double> v(1025, 0.0);
  const auto p = view(v, 0.0, 1.0 / 1024);
  EXPECT_THROW(temporal_quartic_report(p, SigmaSpec::constant(1.0), 1.0, 0.0, 0.5, 8), ConfigError);
}

TEST(Reports, CsvRowShape) {
  std::vector<double> v(1025, 0.0);
  const auto p = view(v, 0.0, 1.0 / 1024);
  const auto s = spatial_quadratic_report(p, SigmaSpec::constant(1.0), 1.0, 1.0 / 16, 0.25, 0.75);
  EXPECT_EQ(csv_header_variation(), "axis,p,n,delta,empirical,target,rel_error,seed");
  EXPECT_EQ(csv_row(s), "space,2,8,0.0625,0,0.25,1,0");
}

TEST(Reports, ExactSpatialSliceMatchesTarget) {
  // sigma = 1, alpha = 1: the quadratic variation of X_t on [0, 1] tends to 1/2.
  const PhysicalParams params{1.0, 1.0};
  const auto sampler = build_spatial_sampler({0.0, 1.0, 1024}, 1.0, params);
  const auto path = sample(sampler, {42, 0, 0});
  const auto r = spatial_quadratic_report(exact_path(path), SigmaSpec::constant(1.0), 1.0, 1.0 / 1024, 0.0, 1.0);
  EXPECT_LT(r.relative_error, 0.15);
}

TEST(Scan, VarianceDecreasesForBrownianQuadraticVariation) {
  const std::size_t finest = 1024;
  const PathSource src = [&](std::size_t n, std::uint32_t rep) {
    const auto w = brownian(finest, 1.0 / static_cast<double>(finest), 9, rep);
    std::vector<double> out(n + 1);
    const std::size_t stride = finest / n;
    for (std::size_t j = 0; j <= n; ++j) out[j] = w[j * stride];
    return out;
  };
  const std::vector<std::size_t> ns{16, 64, 256, 1024};
  const auto s1 = variation_scaling_scan(src, 2, ns, 200, 1);
  EXPECT_TRUE(s1.variance_decreasing);
  for (const auto& row : s1.rows) EXPECT_NEAR(row.mean, 1.0, 0.1);
  const auto s4 = variation_scaling_scan(src, 2, ns, 200, 4);
  for (std::size_t k = 0; k < ns.size(); ++k) EXPECT_EQ(s1.rows[k].variance, s4.rows[k].variance);
}

TEST(Scan, DeterministicPathHasZeroVariance) {
  const PathSource src = [](std::size_t n, std::uint32_t) {
    std::vector<double> out(n + 1);
    for (std::size_t j = 0; j <= n; ++j) out[j] = std::sin(static_cast<double>(j) / static_cast<double>(n));
    return out;
  };
  const std::vector<std::size_t> ns{8, 32};
  const auto s = variation_scaling_scan(src, 2, ns, 5);
  for (const auto& row : s.rows) EXPECT_EQ(row.variance, 0.0);
  EXPECT_FALSE(s.variance_decreasing);
}
