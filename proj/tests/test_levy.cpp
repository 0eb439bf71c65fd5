#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "nrmkit/levy.hpp"
#include "oracles.hpp"

using namespace nrmkit;

namespace {
double rel(double x, double y) { return std::fabs(x - y) / std::fabs(y); }
}  // namespace

TEST(LaplaceExponent, Examples) {
  EXPECT_EQ(laplace_exponent({0.3, 2.0}, 0.0), 0.0);
  EXPECT_NEAR(laplace_exponent({0.5, 1.0}, 3.0), 1.0, 1e-15);
  const NggParams p{0.001, 2.0};
  EXPECT_LT(std::fabs(laplace_exponent(p, 1.0) / (p.mass * p.a) - std::log(2.0)), 1e-3);
}

// (1e12)^a - 1 exceeds 1e6 only for a > 0.5; smaller a still diverge, slowly.
TEST(LaplaceExponent, GrowsWithoutBound) {
  for (double a : {0.6, 0.9}) EXPECT_GT(laplace_exponent({a, 3.0}, 1e12), 1e6 * 3.0);
  for (double a : {0.1, 0.3, 0.5}) {
    double prev = 0.0;
    for (double v = 1.0; v <= 1e12; v *= 10.0) {
      const double cur = laplace_exponent({a, 3.0}, v);
      EXPECT_GT(cur, prev);
      prev = cur;
    }
    EXPECT_GT(prev, 10.0 * 3.0);
  }
}

TEST(LaplaceExponent, DerivativesMatchFiniteDifferences) {
  const double h = 1e-5;
  for (double a : {0.1, 0.4, 0.8}) {
    for (double m : {0.5, 3.0}) {
      const NggParams p{a, m};
      for (double v : {0.01, 0.5, 2.0, 10.0}) {
        const double d1 = (laplace_exponent(p, v + h) - laplace_exponent(p, v - h)) / (2 * h);
        const double d2 = (laplace_exponent_d1(p, v + h) - laplace_exponent_d1(p, v - h)) / (2 * h);
        EXPECT_LT(rel(laplace_exponent_d1(p, v), d1), 1e-6);
        EXPECT_LT(rel(laplace_exponent_d2(p, v), d2), 1e-6);
      }
    }
  }
}

TEST(TailMass, MatchesQuadrature) {
  const NggParams p{0.5, 1.0};
  EXPECT_LT(rel(tail_mass(p, 1.0), oracle::tail(0.5, 1.0)), 1e-10);
  for (double a : {0.1, 0.3, 0.7, 0.95}) {
    for (double L : {1e-3, 0.5, 1.9, 2.1, 7.0, 40.0}) {
      EXPECT_LT(rel(tail_mass_unit(a, L), oracle::tail(a, L)), 1e-9) << a << " " << L;
    }
  }
}

TEST(TailMass, MonotoneAndVanishing) {
  const NggParams p{0.4, 2.0};
  double prev = tail_mass(p, 1e-4);
  for (double L = 2e-4; L < 100; L *= 1.7) {
    const double cur = tail_mass(p, L);
    EXPECT_GT(prev, cur);
    prev = cur;
  }
  EXPECT_LT(tail_mass({0.5, 1.0}, 200.0), 1e-12);
  EXPECT_THROW(tail_mass(p, 0.0), DomainError);
  EXPECT_THROW(tail_mass(p, -1.0), DomainError);
}

TEST(ExpTiltedTail, ReducesToTailAtZero) {
  const NggParams p{0.35, 1.5};
  for (double L : {0.01, 1.0, 5.0}) EXPECT_EQ(exp_tilted_tail(p, 0.0, L), tail_mass(p, L));
}

TEST(ExpTiltedTail, DecreasingInV) {
  const NggParams p{0.6, 1.0};
  double prev = exp_tilted_tail(p, 0.0, 0.3);
  for (double v = 0.1; v < 50; v *= 1.5) {
    const double cur = exp_tilted_tail(p, v, 0.3);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(ExpTiltedTail, MatchesQuadrature) {
  const NggParams p{0.5, 2.0};
  const double ref = 2.0 * oracle::integrate_to_inf([](double t) { return std::exp(-t) * oracle::rho(0.5, t); }, 0.5);
  EXPECT_LT(rel(exp_tilted_tail(p, 1.0, 0.5), ref), 1e-8);
}

TEST(TruncatedExponent, Examples) {
  const NggParams p{0.3, 1.0};
  EXPECT_EQ(truncated_exponent(p, 0.0, 0.1), 0.0);
  EXPECT_NEAR(truncated_exponent(p, 2.0, 200.0), laplace_exponent(p, 2.0), 1e-10);
  const double ref = oracle::integrate([](double t) { return -std::expm1(-2.0 * t) * oracle::rho(0.3, t); }, 0.0, 0.1);
  EXPECT_LT(rel(truncated_exponent(p, 2.0, 0.1), ref), 1e-8);
}

TEST(TruncatedExponent, SeriesAndClosedFormAgreeAtSwitch) {
  for (double a : {0.2, 0.5, 0.8}) {
    for (double v : {0.5, 3.0}) {
      const double L = 2.0 / (1.0 + v);
      const double series = truncated_exponent_unit(a, v, L);
      const double closed =
          laplace_exponent_unit(a, v) + exp_tilted_tail_unit(a, v, L) - tail_mass_unit(a, L);
      EXPECT_LT(rel(series, closed), 1e-12);
    }
  }
}

TEST(TruncatedExponent, QuadratureGrid) {
  for (double a : {0.1, 0.5, 0.9}) {
    for (double v : {0.2, 1.0, 5.0}) {
      for (double L : {1e-6, 0.05, 1.0, 4.0}) {
        const double ref = oracle::integrate(
            [&](double t) { return -std::expm1(-v * t) * oracle::rho(a, t); }, 0.0, L);
        EXPECT_LT(rel(truncated_exponent_unit(a, v, L), ref), 1e-8) << a << " " << v << " " << L;
      }
    }
  }
}

TEST(TailInverse, RoundTrip) {
  for (double a : {0.05, 0.5, 0.9}) {
    for (double t : {1e-30, 1e-5, 0.3, 2.0, 50.0, 600.0}) {
      const double back = tail_mass_unit_inverse(a, log_tail_mass_unit(a, t));
      EXPECT_LT(rel(back, t), 1e-10) << a << " " << t;
    }
  }
}

TEST(SampleCrmDecreasing, StrictlyDecreasing) {
  Rng rng(11);
  const auto crm = sample_crm_decreasing({0.5, 2.0}, BaseMeasure::uniform_cube(2), 500, rng);
  ASSERT_EQ(crm.atoms.size(), 500u);
  for (std::size_t i = 1; i < crm.atoms.size(); ++i) EXPECT_LT(crm.atoms[i].jump, crm.atoms[i - 1].jump);
  for (const auto& at : crm.atoms) {
    EXPECT_GT(at.jump, 0.0);
    EXPECT_EQ(at.location.size(), 2u);
  }
}

TEST(SampleCrmDecreasing, CountAboveThresholdMatchesTailMass) {
  const NggParams p{0.5, 5.0};
  const double z = 0.1;
  Rng rng(2024);
  std::vector<double> counts;
  for (int r = 0; r < 10000; ++r) {
    const auto jumps = sample_largest_jumps(p.a, p.mass, 40, rng);
    ASSERT_LT(jumps.back(), z);
    counts.push_back(static_cast<double>(std::count_if(jumps.begin(), jumps.end(), [&](double j) { return j > z; })));
  }
  const auto ms = oracle::mean_se(counts);
  EXPECT_LT(std::fabs(ms.mean - tail_mass(p, z)), 3 * ms.se) << ms.mean << " vs " << tail_mass(p, z);
}

TEST(SampleCrmDecreasing, MeanTotalMassIsPsiPrimeAtZero) {
  const NggParams p{0.5, 1.0};
  Rng rng(77);
  std::vector<double> totals;
  for (int r = 0; r < 60; ++r) {
    const auto jumps = sample_largest_jumps(p.a, p.mass, 10000, rng);
    double s = 0.0;
    for (double j : jumps) s += j;
    totals.push_back(s);
  }
  const auto ms = oracle::mean_se(totals);
  EXPECT_LT(std::fabs(ms.mean - p.mass * p.a), 3 * ms.se) << ms.mean;
}

TEST(SampleCrmThreshold, AllJumpsAboveAndMeanCount) {
  const NggParams p{0.5, 2.0};
  const double z = 0.05;
  Rng rng(5);
  std::vector<double> counts;
  const auto base = BaseMeasure::uniform_cube(1);
  for (int r = 0; r < 10000; ++r) {
    const auto crm = sample_crm_threshold(p, base, z, rng);
    for (const auto& at : crm.atoms) ASSERT_GT(at.jump, z);
    counts.push_back(static_cast<double>(crm.atoms.size()));
  }
  const auto ms = oracle::mean_se(counts);
  EXPECT_LT(std::fabs(ms.mean - tail_mass(p, z)), 3 * ms.se);
}

TEST(SampleCrmThreshold, HugeThresholdGivesNoAtoms) {
  const NggParams p{0.5, 2.0};
  ASSERT_LT(tail_mass(p, 30.0), 1e-10);
  Rng rng(9);
  int nonempty = 0;
  for (int r = 0; r < 1000; ++r) nonempty += !sample_crm_threshold(p, BaseMeasure::uniform_cube(1), 30.0, rng).atoms.empty();
  EXPECT_EQ(nonempty, 0);
}

TEST(SampleCrmThreshold, JumpMethodsAgreeInDistribution) {
  for (double z : {0.01, 2.5}) {
    Rng r1(1), r2(2);
    std::vector<double> x1, x2;
    for (int i = 0; i < 20000; ++i) {
      x1.push_back(std::log(sample_jump_above(0.4, z, r1, JumpMethod::inverse_cdf)));
      x2.push_back(std::log(sample_jump_above(0.4, z, r2, JumpMethod::rejection)));
    }
    const auto m1 = oracle::mean_se(x1);
    const auto m2 = oracle::mean_se(x2);
    // E[log t] by quadrature.
    const double ref = oracle::integrate_to_inf([&](double t) { return std::log(t) * oracle::rho(0.4, t); }, z) /
                       tail_mass_unit(0.4, z);
    EXPECT_LT(std::fabs(m1.mean - ref), 3 * m1.se);
    EXPECT_LT(std::fabs(m2.mean - ref), 3 * m2.se);
  }
}

TEST(LaplaceFunctional, ThresholdRealizationsMatchTruncatedExponent) {
  const NggParams p{0.5, 1.5};
  const double z = 1e-3;
  Rng rng(31);
  const std::vector<double> vs = {0.5, 1.0, 2.0};
  std::vector<std::vector<double>> samples(vs.size());
  for (int r = 0; r < 10000; ++r) {
    const auto jumps = sample_jumps_above(p.a, p.mass, z, rng, JumpMethod::rejection);
    double s = 0.0;
    for (double j : jumps) s += j;
    for (std::size_t i = 0; i < vs.size(); ++i) samples[i].push_back(std::exp(-vs[i] * s));
  }
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const double target = std::exp(-laplace_exponent(p, vs[i]) + truncated_exponent(p, vs[i], z));
    const auto ms = oracle::mean_se(samples[i]);
    EXPECT_LT(std::fabs(ms.mean - target), 3 * ms.se) << vs[i];
  }
}

TEST(Normalize, Examples) {
  CrmRealization c;
  c.atoms = {{2.0, {0.1}, 1}};
  EXPECT_EQ(normalize(c).weights, std::vector<double>{1.0});
  c.atoms = {{1.0, {0.1}, 1}, {3.0, {0.2}, 2}};
  const auto n = normalize(c);
  EXPECT_EQ(n.weights[0], 0.25);
  EXPECT_EQ(n.weights[1], 0.75);
  EXPECT_EQ(n.total_mass_before_normalization, 4.0);
  c.atoms.clear();
  EXPECT_THROW(normalize(c), DomainError);
}

TEST(Normalize, ScaleInvariance) {
  Rng rng(3);
  auto crm = sample_crm_decreasing({0.3, 2.0}, BaseMeasure::gaussian(1), 50, rng);
  const auto w1 = normalize(crm).weights;
  for (auto& at : crm.atoms) at.jump *= 8.0;  // power of two keeps ratios exact
  const auto w2 = normalize(crm).weights;
  double sum = 0.0;
  for (std::size_t i = 0; i < w1.size(); ++i) {
    EXPECT_DOUBLE_EQ(w1[i], w2[i]);
    sum += w2[i];
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Serialization, BitExactRoundTrip) {
  Rng rng(8);
  const auto crm = sample_crm_threshold({0.45, 1.3}, BaseMeasure::gaussian(2), 0.01, rng);
  const std::string text = nlohmann::json(crm).dump();
  const auto back = nlohmann::json::parse(text).get<CrmRealization>();
  ASSERT_EQ(back.atoms.size(), crm.atoms.size());
  for (std::size_t i = 0; i < crm.atoms.size(); ++i) {
    EXPECT_EQ(back.atoms[i].jump, crm.atoms[i].jump);
    EXPECT_EQ(back.atoms[i].location, crm.atoms[i].location);
    EXPECT_EQ(back.atoms[i].id, crm.atoms[i].id);
  }
  EXPECT_EQ(back.params.a, 0.45);
  EXPECT_EQ(back.truncation.threshold, 0.01);
}

TEST(BaseMeasure, DensitiesIntegrateToOne) {
  const auto g = BaseMeasure::gaussian(1, 0.5, 2.0);
  const double total = oracle::integrate(
      [&](double x) { return std::exp(g.log_density({x})); }, -40.0, 40.0);
  EXPECT_NEAR(total, 1.0, 1e-10);
  const auto u = BaseMeasure::uniform_cube(1);
  EXPECT_EQ(u.log_density({0.3}), 0.0);
  EXPECT_EQ(u.log_density({1.3}), -std::numeric_limits<double>::infinity());
  // Monte Carlo spot check of the Gaussian sampler's mean.
  Rng rng(4);
  std::vector<double> xs;
  for (int i = 0; i < 20000; ++i) xs.push_back(g.sample(rng)[0]);
  const auto ms = oracle::mean_se(xs);
  EXPECT_LT(std::fabs(ms.mean - 0.5), 3 * ms.se);
}
