#include <chrono>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "nrmkit/tak.hpp"
#include "oracles.hpp"

using namespace nrmkit;

namespace {

double rel(double x, double y) { return std::fabs(x - y) / std::fabs(y); }

// Defining integral by tanh-sinh on [M, M+200] in plain doubles.
double tak_oracle(int n, int k, double a, double m) {
  return oracle::integrate(
      [&](double t) { return std::pow(1.0 - std::pow(m / t, 1.0 / a), n - 1) * std::pow(t, k - 1) * std::exp(-t); },
      m, m + 300.0, 1e-13);
}

}  // namespace

TEST(TakQuadrature, Examples) {
  for (double a : {0.2, 0.5, 0.9}) EXPECT_NEAR(tak_quadrature(1, 1, a, 1.0).value(), 0.3678794412, 1e-10);
  EXPECT_LT(rel(tak_quadrature(1, 3, 0.4, 2.0).value(), 10.0 * std::exp(-2.0)), 1e-10);
  EXPECT_LE(tak_quadrature(10, 3, 0.5, 1.0).log_magnitude(), log_gamma_upper(3, 1.0));
}

TEST(TakQuadrature, MatchesPlainQuadrature) {
  for (auto [n, k, a, m] : {std::tuple{2, 1, 0.3, 1.0}, {5, 4, 0.6, 0.5}, {12, 7, 0.45, 3.0}, {30, 10, 0.7, 2.0}}) {
    EXPECT_LT(rel(tak_quadrature(n, k, a, m).value(), tak_oracle(n, k, a, m)), 1e-9) << n << " " << k;
  }
}

TEST(TakQuadrature, AlternativeParameterizationAgrees) {
  for (int n : {1, 3, 17, 30}) {
    for (int k : {1, 4, 10}) {
      for (auto [a, m] : {std::pair{0.3, 1.0}, {0.5, 2.0}, {0.7, 0.5}, {0.1, 5.0}}) {
        const double q1 = tak_quadrature(n, k, a, m).log_magnitude();
        const double q2 = tak_quadrature_alt(n, k, a, m).log_magnitude();
        EXPECT_NEAR(q1, q2, 1e-9) << n << " " << k << " " << a << " " << m;
      }
    }
  }
}

TEST(TakQuadrature, RejectsBadArguments) {
  EXPECT_THROW(tak_quadrature(0, 1, 0.5, 1.0), DomainError);
  EXPECT_THROW(tak_quadrature(1, 1, 1.0, 1.0), DomainError);
  EXPECT_THROW(tak_quadrature(1, 1, 0.5, 0.0), DomainError);
}

TEST(TakSeries, Examples) {
  const auto s1 = tak_series(1, 4, 0.3, 1.7);
  EXPECT_LT(rel(s1.value.value(), std::exp(log_gamma_upper(4, 1.7))), 1e-13);
  EXPECT_LT(rel(tak_series(5, 2, 0.5, 1.0).value.value(), tak_quadrature(5, 2, 0.5, 1.0).value()), 1e-8);
  EXPECT_LT(rel(tak_series(3, 1, 0.4, 2.0).value.value(), tak_quadrature(3, 1, 0.4, 2.0).value()), 1e-8);
}

TEST(TakSeries, IntegralKaIsRejectedWhenStrict) {
  EXPECT_TRUE(tak_series_excluded(5, 3, 0.5));  // k=2: 2a = 1
  EXPECT_THROW(tak_series(5, 3, 0.5, 1.0, true), DomainError);
  EXPECT_FALSE(tak_series_excluded(5, 2, 0.5));
  const auto fallback = tak_series(5, 3, 0.5, 1.0);
  EXPECT_EQ(fallback.form, TakSeriesResult::Form::expansion);
  EXPECT_LT(rel(fallback.value.value(), tak_quadrature(5, 3, 0.5, 1.0).value()), 1e-8);
}

// The Pochhammer form is exact only for 2 <= N and K <= N.
TEST(TakSeries, ClosedFormDomain) {
  EXPECT_TRUE(tak_series_closed_form_applies(5, 5, 0.3));
  EXPECT_FALSE(tak_series_closed_form_applies(5, 7, 0.3));
  EXPECT_FALSE(tak_series_closed_form_applies(2, 3, 0.3));
  EXPECT_FALSE(tak_series_closed_form_applies(1, 2, 0.3));
  for (auto [n, k, a, m] : {std::tuple{5, 7, 0.3, 1.0}, {2, 3, 0.3, 1.0}, {6, 6, 0.35, 1.5}, {4, 2, 0.8, 0.7}}) {
    EXPECT_LT(rel(tak_series(n, k, a, m).value.value(), tak_quadrature(n, k, a, m).value()), 1e-8) << n << " " << k;
  }
}

TEST(TakSeries, CancellationDiagnosticGrowsWithN) {
  const auto small = tak_series(3, 1, 0.3, 1.0);
  const auto large = tak_series(40, 1, 0.3, 1.0);
  EXPECT_LT(small.cancellation, 1e3);
  EXPECT_GT(large.cancellation, small.cancellation);
  EXPECT_TRUE(tak_series(60, 1, 0.3, 1.0).catastrophic());
}

TEST(TakRecursion, CorrectedKRecursionHolds) {
  // T^{N,K+1} = K T^{N,K} + (N-1)/a (T^{N-1,K} - T^{N,K}).
  for (auto [n, k, a, m] : {std::tuple{2, 1, 0.3, 1.0}, {6, 3, 0.7, 2.0}, {10, 5, 0.45, 0.5}}) {
    const double lhs = tak_quadrature(n, k + 1, a, m).value();
    const double rhs = k * tak_quadrature(n, k, a, m).value() +
                       (n - 1) / a * (tak_quadrature(n - 1, k, a, m).value() - tak_quadrature(n, k, a, m).value());
    EXPECT_LT(rel(lhs, rhs), 1e-8);
  }
}

TEST(TakRecursion, InverseIntegerNRecursionHolds) {
  // a = 1/2: T^{N+1,K} = T^{N,K} - M^2 T^{N,K-2}.
  const double a = 0.5, m = 2.0;
  for (int n = 1; n <= 6; ++n) {
    for (int k = 3; k <= 8; ++k) {
      const double lhs = tak_quadrature(n + 1, k, a, m).value();
      const double rhs = tak_quadrature(n, k, a, m).value() - m * m * tak_quadrature(n, k - 2, a, m).value();
      EXPECT_LT(rel(lhs, rhs), 1e-8) << n << " " << k;
    }
  }
}

TEST(TakTable, FillMatchesQuadratureOnGrid) {
  for (auto [a, m] : {std::pair{0.3, 1.0}, {0.7, 2.0}, {0.5, 2.0}, {0.7, 0.5}, {0.25, 10.0}, {0.45, 3.0}}) {
    TakTable table(a, m);
    table.fill(30, 10);
    EXPECT_TRUE(table.violations().empty()) << table.violations().front();
    double worst = 0.0;
    for (int n = 1; n <= 30; ++n) {
      for (int k = 1; k <= 10; ++k) {
        const auto cell = table.find(n, k);
        ASSERT_TRUE(cell.has_value());
        const double q = tak_quadrature(n, k, a, m).log_magnitude();
        worst = std::max(worst, std::fabs(std::expm1(cell->value.log_magnitude() - q)));
        EXPECT_LE(cell->value.log_magnitude(), log_gamma_upper(k, m) + 1e-12);
      }
    }
    EXPECT_LT(worst, 1e-8) << "a=" << a << " M=" << m;
  }
}

TEST(TakTable, InverseIntegerPathUsesNRecursion) {
  TakTable table(0.5, 2.0);
  table.fill(30, 10);
  int recursion_n = 0;
  for (const auto& [key, cell] : table.cells()) {
    if (cell.method == TakMethod::recursionN) {
      ++recursion_n;
      EXPECT_GT(key.second, 2);
      const double q = tak_quadrature(key.first, key.second, 0.5, 2.0).log_magnitude();
      EXPECT_NEAR(cell.value.log_magnitude(), q, 1e-6);
    }
  }
  EXPECT_GT(recursion_n, 100);
}

TEST(TakTable, Monotonicity) {
  TakTable table(0.4, 1.5);
  table.fill(20, 8);
  for (int n = 1; n < 20; ++n) {
    for (int k = 1; k <= 8; ++k) {
      EXPECT_LT(table.get(n + 1, k).log_magnitude(), table.get(n, k).log_magnitude());
      if (k < 8) EXPECT_LT(table.get(n, k).log_magnitude(), table.get(n, k + 1).log_magnitude());
    }
  }
}

TEST(TakTable, MonotoneInMassAndDiscount) {
  for (auto [n, k] : {std::pair{3, 2}, {8, 4}, {20, 1}}) {
    EXPECT_GT(tak_quadrature(n, k, 0.5, 1.0).log_magnitude(), tak_quadrature(n, k, 0.5, 1.5).log_magnitude());
    // (M/t)^{1/a} grows with a for t > M, so T decreases in a.
    EXPECT_GT(tak_quadrature(n, k, 0.4, 1.0).log_magnitude(), tak_quadrature(n, k, 0.6, 1.0).log_magnitude());
  }
}

TEST(TakTable, CrossMethodAgreement) {
  for (auto [n, k, a, m] : {std::tuple{4, 1, 0.3, 1.0}, {7, 2, 0.7, 2.0}, {9, 2, 0.45, 0.8}}) {
    TakTable table(a, m);
    table.fill(n, k + 3);
    const double q = tak_quadrature(n, k, a, m).log_magnitude();
    EXPECT_NEAR(tak_series(n, k, a, m).value.log_magnitude(), q, 1e-6);
    EXPECT_NEAR(table.get(n, k).log_magnitude(), q, 1e-6);
    EXPECT_NEAR(tak_quadrature_alt(n, k, a, m).log_magnitude(), q, 1e-6);
  }
}

TEST(TakTable, InsertFlagsBoundViolation) {
  TakTable table(0.5, 1.0);
  table.insert(3, 2, LogReal::from_log(log_gamma_upper(2, 1.0) + 0.1), TakMethod::quadrature);
  EXPECT_FALSE(table.violations().empty());
}

TEST(TakTable, CsvRoundTrip) {
  TakTable table(0.35, 1.2);
  table.fill(6, 4);
  std::stringstream ss;
  table.write_csv(ss);
  const auto back = TakTable::read_csv(ss, 0.35, 1.2);
  ASSERT_EQ(back.size(), table.size());
  for (const auto& [key, cell] : table.cells()) {
    const auto other = back.find(key.first, key.second);
    ASSERT_TRUE(other.has_value());
    EXPECT_DOUBLE_EQ(other->value.log_magnitude(), cell.value.log_magnitude());
    EXPECT_EQ(other->method, cell.method);
  }
}

TEST(TakTable, FillRuntime) {
  const auto t0 = std::chrono::steady_clock::now();
  for (auto [a, m] : {std::pair{0.3, 1.0}, {0.5, 2.0}, {0.7, 0.5}}) TakTable(a, m).fill(30, 10);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 10.0);
}
