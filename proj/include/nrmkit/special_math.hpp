#pragma once

// Special functions used throughout the library: signed log-domain reals,
// incomplete gamma functions with negative first argument, Pochhammer
// symbols and generalized Stirling numbers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "nrmkit/error.hpp"

namespace nrmkit {

/// A signed real with an extended exponent range.
///
/// Stored as mantissa in [0.5, 1) times 2^exponent (64-bit), so products of
/// thousands of probability weights neither underflow nor lose precision;
/// `log_magnitude()` gives the natural log of the absolute value.
class LogReal {
 public:
  constexpr LogReal() = default;

  static LogReal from_value(double x) {
    if (x == 0.0) return {};
    if (!std::isfinite(x)) throw DomainError("LogReal: non-finite value");
    int e = 0;
    const double m = std::frexp(std::fabs(x), &e);
    return LogReal{m, e, x > 0 ? 1 : -1};
  }
  static LogReal from_log(double log_magnitude, int sign = 1) {
    if (sign == 0 || log_magnitude == -std::numeric_limits<double>::infinity()) return {};
    if (!std::isfinite(log_magnitude)) throw DomainError("LogReal: non-finite log magnitude");
    const double e2 = std::floor(log_magnitude / kLn2);
    LogReal r = from_value(std::exp(log_magnitude - e2 * kLn2));
    r.exp_ += static_cast<std::int64_t>(e2);
    r.sign_ = sign > 0 ? 1 : -1;
    return r;
  }
  static LogReal zero() { return {}; }
  static LogReal one() { return from_value(1.0); }

  [[nodiscard]] double log_magnitude() const {
    return sign_ == 0 ? -std::numeric_limits<double>::infinity()
                      : std::log(mant_) + static_cast<double>(exp_) * kLn2;
  }
  [[nodiscard]] int sign() const { return sign_; }
  [[nodiscard]] bool is_zero() const { return sign_ == 0; }
  /// Plain double value; underflows to 0 or overflows to inf outside the double range.
  [[nodiscard]] double value() const {
    if (sign_ == 0) return 0.0;
    if (exp_ > 2000) return sign_ * std::numeric_limits<double>::infinity();
    if (exp_ < -2000) return 0.0;
    return sign_ * std::ldexp(mant_, static_cast<int>(exp_));
  }

  LogReal operator-() const {
    LogReal r = *this;
    r.sign_ = -sign_;
    return r;
  }

  friend LogReal operator*(LogReal x, LogReal y) {
    if (x.sign_ == 0 || y.sign_ == 0) return {};
    return normalized(x.mant_ * y.mant_, x.exp_ + y.exp_, x.sign_ * y.sign_);
  }
  friend LogReal operator/(LogReal x, LogReal y) {
    if (y.sign_ == 0) throw DomainError("LogReal: division by zero");
    if (x.sign_ == 0) return {};
    return normalized(x.mant_ / y.mant_, x.exp_ - y.exp_, x.sign_ * y.sign_);
  }
  friend LogReal operator+(LogReal x, LogReal y) {
    if (x.sign_ == 0) return y;
    if (y.sign_ == 0) return x;
    const bool x_big = x.exp_ > y.exp_ || (x.exp_ == y.exp_ && x.mant_ >= y.mant_);
    const LogReal& big = x_big ? x : y;
    const LogReal& small = x_big ? y : x;
    const std::int64_t shift = big.exp_ - small.exp_;
    if (shift > 1100) return big;
    const double sm = std::ldexp(small.mant_, -static_cast<int>(shift));
    const double m = big.sign_ == small.sign_ ? big.mant_ + sm : big.mant_ - sm;
    if (m == 0.0) return {};
    return normalized(m, big.exp_, big.sign_);
  }
  friend LogReal operator-(LogReal x, LogReal y) { return x + (-y); }

  LogReal& operator*=(LogReal o) { return *this = *this * o; }
  LogReal& operator/=(LogReal o) { return *this = *this / o; }
  LogReal& operator+=(LogReal o) { return *this = *this + o; }
  LogReal& operator-=(LogReal o) { return *this = *this - o; }

  friend bool operator==(const LogReal& x, const LogReal& y) {
    return x.sign_ == y.sign_ && (x.sign_ == 0 || (x.mant_ == y.mant_ && x.exp_ == y.exp_));
  }

 private:
  static constexpr double kLn2 = 0.693147180559945309417232121458176568;

  constexpr LogReal(double m, std::int64_t e, int s) : mant_(m), exp_(e), sign_(s) {}

  static LogReal normalized(double m, std::int64_t e, int s) {
    int de = 0;
    const double mm = std::frexp(m, &de);
    return LogReal{mm, e + de, s};
  }

  double mant_ = 0.0;
  std::int64_t exp_ = 0;
  int sign_ = 0;
};

namespace detail {

inline bool is_non_positive_integer(double x) { return x <= 0.0 && x == std::floor(x); }

// log|Gamma(x)| and its sign.
inline double lgamma_signed(double x, int* sign) {
  return boost::math::lgamma(x, sign);
}

// Continued fraction for Gamma(s, x) e^x x^{-s}, valid for any real s once x
// is moderately large (modified Lentz).
inline double upper_gamma_cf(double s, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) return h;
  }
  throw NumericalError("upper_gamma_cf: continued fraction did not converge");
}

}  // namespace detail

/// Regularized upper incomplete gamma Q(x, y) = Gamma(x, y) / Gamma(x).
///
/// For x < 0 the value is obtained from Q(x+1, y) by
/// Q(x, y) = Q(x+1, y) - y^x e^{-y} / Gamma(x+1), applied until the first
/// argument is positive. Note that Q is negative for x in (-1, 0).
inline double reg_inc_gamma_q(double x, double y) {
  if (!(y > 0.0)) throw DomainError("reg_inc_gamma_q: y must be positive, got " + std::to_string(y));
  if (detail::is_non_positive_integer(x)) {
    throw DomainError("reg_inc_gamma_q: x must not be a non-positive integer, got " + std::to_string(x));
  }
  if (x > 0.0) return boost::math::gamma_q(x, y);

  const int steps = static_cast<int>(std::ceil(-x));
  double s = x + steps;  // in (0, 1)
  double q = boost::math::gamma_q(s, y);
  const double log_y = std::log(y);
  for (int i = 0; i < steps; ++i) {
    s -= 1.0;
    int sign = 1;
    const double lg = detail::lgamma_signed(s + 1.0, &sign);
    q -= sign * std::exp(s * log_y - y - lg);
  }
  return q;
}

/// Non-regularized upper incomplete gamma Gamma(x, y) for any real x, y > 0.
///
/// Defined for non-positive integer x as well (Gamma(0, y) = E_1(y)); used by
/// the alternating series for T^{N,K}.
inline double upper_inc_gamma(double x, double y) {
  if (!(y > 0.0)) throw DomainError("upper_inc_gamma: y must be positive");
  if (x > 0.0) return boost::math::tgamma(x, y);
  // The downward recursion cancels badly for large y.
  if (y > 2.0) return std::exp(x * std::log(y) - y) * detail::upper_gamma_cf(x, y);

  const bool integral = x == std::floor(x);
  const int steps = integral ? static_cast<int>(-x) : static_cast<int>(std::ceil(-x));
  double s = x + steps;  // in [0, 1)
  double g = (s == 0.0) ? boost::math::expint(1, y) : boost::math::tgamma(s, y);
  const double log_y = std::log(y);
  for (int i = 0; i < steps; ++i) {
    s -= 1.0;
    g = (g - std::exp(s * log_y - y)) / s;
  }
  return g;
}

/// Pochhammer symbol (x)_n = x (x+1) ... (x+n-1) in log form; (x)_0 = 1.
inline LogReal rising_factorial_log(double x, int n) {
  if (n < 0) throw DomainError("rising_factorial_log: n must be non-negative");
  LogReal acc = LogReal::one();
  for (int i = 0; i < n; ++i) acc *= LogReal::from_value(x + i);
  return acc;
}

/// Triangular table of generalized Stirling numbers S^N_{k,a} in log domain.
///
/// S^N_{k,a} sums prod_blocks (1-a)_{|block|-1} over set partitions of
/// {1..N} into k blocks. Rows are grown on demand with
/// S^{N+1}_{k} = S^N_{k-1} + (N - k a) S^N_{k}. Reads are concurrent; growth
/// takes an exclusive lock.
class GeneralizedStirlingTable {
 public:
  explicit GeneralizedStirlingTable(double a) : a_(a) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("generalized Stirling: a must lie in (0,1)");
    rows_.push_back({0.0});  // S^1_1 = 1
  }

  [[nodiscard]] double a() const { return a_; }

  /// log S^n_{k,a}; -inf when k is outside [1, n].
  double log_value(int n, int k) const {
    if (n < 1) throw DomainError("generalized Stirling: N must be positive");
    if (k < 1 || k > n) return -std::numeric_limits<double>::infinity();
    {
      std::shared_lock lock(mutex_);
      if (static_cast<int>(rows_.size()) >= n) return rows_[n - 1][k - 1];
    }
    std::unique_lock lock(mutex_);
    grow(n);
    return rows_[n - 1][k - 1];
  }

  /// Copy of row n (k = 1..n), log domain.
  std::vector<double> log_row(int n) const {
    log_value(n, 1);
    std::shared_lock lock(mutex_);
    return rows_[n - 1];
  }

 private:
  void grow(int n) const {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    while (static_cast<int>(rows_.size()) < n) {
      const auto& prev = rows_.back();
      const int m = static_cast<int>(prev.size());  // current N
      std::vector<double> next(m + 1, neg_inf);
      for (int k = 1; k <= m + 1; ++k) {
        const double from_new_block = (k >= 2) ? prev[k - 2] : neg_inf;
        const double from_join =
            (k <= m) ? prev[k - 1] + std::log(static_cast<double>(m) - k * a_) : neg_inf;
        const double hi = std::max(from_new_block, from_join);
        const double lo = std::min(from_new_block, from_join);
        next[k - 1] = (lo == neg_inf) ? hi : hi + std::log1p(std::exp(lo - hi));
      }
      rows_.push_back(std::move(next));
    }
  }

  double a_;
  mutable std::shared_mutex mutex_;
  mutable std::vector<std::vector<double>> rows_;
};

/// Process-wide table for a given discount a.
inline const GeneralizedStirlingTable& stirling_table(double a) {
  static std::mutex registry_mutex;
  static std::map<double, std::unique_ptr<GeneralizedStirlingTable>> registry;
  std::lock_guard lock(registry_mutex);
  auto& slot = registry[a];
  if (!slot) slot = std::make_unique<GeneralizedStirlingTable>(a);
  return *slot;
}

/// S^N_{k,a}.
inline LogReal generalized_stirling(int n, int k, double a) {
  if (n < 1 || k < 1 || k > n) {
    throw DomainError("generalized_stirling: need 1 <= k <= N, got N=" + std::to_string(n) +
                      " k=" + std::to_string(k));
  }
  return LogReal::from_log(stirling_table(a).log_value(n, k));
}

/// log of the binomial coefficient C(n, k).
inline double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

/// log(exp(x) + exp(y)) without overflow.
inline double log_add_exp(double x, double y) {
  if (x == -std::numeric_limits<double>::infinity()) return y;
  if (y == -std::numeric_limits<double>::infinity()) return x;
  const double hi = std::max(x, y);
  return hi + std::log1p(std::exp(std::min(x, y) - hi));
}

/// log sum exp over a range.
template <class Range>
double log_sum_exp(const Range& values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

}  // namespace nrmkit
