#pragma once

// T^{N,K}_{a,M} = int_M^inf (1 - (M/t)^{1/a})^{N-1} t^{K-1} e^{-t} dt
// by quadrature, the alternating series, and recursions, with a table that
// records how each cell was obtained.

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nrmkit/error.hpp"
#include "nrmkit/logging.hpp"
#include "nrmkit/quadrature.hpp"
#include "nrmkit/special_math.hpp"

namespace nrmkit {

namespace detail {

inline void check_tak_args(int n, int k, double a, double m) {
  if (n < 1 || k < 1) throw DomainError("T^{N,K}: N and K must be positive");
  if (!(a > 0.0 && a < 1.0)) throw DomainError("T^{N,K}: a must lie in (0,1)");
  if (!(m > 0.0)) throw DomainError("T^{N,K}: M must be positive");
}

}  // namespace detail

/// Upper incomplete gamma Gamma(K, M) in log form; the bound T^{N,K} <= Gamma(K,M).
inline double log_gamma_upper(int k, double m) {
  return std::log(boost::math::gamma_q(static_cast<double>(k), m)) + std::lgamma(static_cast<double>(k));
}

/// T^{N,K} by adaptive quadrature of its defining integral (t = M + e^s).
inline LogReal tak_quadrature(int n, int k, double a, double m, double rel_tol = 1e-10) {
  detail::check_tak_args(n, k, a, m);
  const double log_m = std::log(m);
  auto g = [&](double s) {
    const double x = std::exp(s);
    const double t = m + x;
    const double log_t = std::log(t);
    // log(1 - (M/t)^{1/a}) without cancellation near t = M.
    const double log_gap = std::log(-std::expm1((log_m - log_t) / a));
    return (n - 1) * log_gap + (k - 1) * log_t - t + s;
  };
  const double s0 = std::log(std::max(1.0, static_cast<double>(k) + (n - 1) * a * m));
  const auto r = quad::integrate_exp_unimodal(g, s0, rel_tol);
  if (r.rel_error > 1e3 * rel_tol) {
    std::ostringstream os;
    os << "tak_quadrature: N=" << n << " K=" << k << " reached rel. error " << r.rel_error;
    throw NumericalError(os.str());
  }
  return LogReal::from_log(r.log_value);
}

/// T^{N,K} through the substitution t = M(1+u)^a:
/// a M^K int_0^inf u^{N-1} (1+u)^{Ka-N} e^{-M(1+u)^a} du (u = e^s).
inline LogReal tak_quadrature_alt(int n, int k, double a, double m, double rel_tol = 1e-10) {
  detail::check_tak_args(n, k, a, m);
  auto g = [&](double s) {
    const double l1pu = std::log1p(std::exp(s));
    return n * s + (k * a - n) * l1pu - m * std::exp(a * l1pu);
  };
  const auto r = quad::integrate_exp_unimodal(g, 0.0, rel_tol);
  if (r.rel_error > 1e3 * rel_tol) throw NumericalError("tak_quadrature_alt: tolerance not reached");
  return LogReal::from_log(std::log(a) + k * std::log(m) + r.log_value);
}

struct TakSeriesResult {
  enum class Form { closed, expansion };

  LogReal value;
  /// Largest |term| divided by |result|; about 10^d means d digits lost.
  double cancellation = 1.0;
  Form form = Form::closed;

  [[nodiscard]] bool catastrophic(double threshold = 1e12) const {
    return !(cancellation < threshold) || value.sign() <= 0;
  }
};

/// True when k a is an integer for some k in 1..K-1 with k a <= N-1, which
/// puts a pole of Gamma(1 - n/a) into the series of tak_series.
inline bool tak_series_excluded(int n, int k, double a) {
  for (int kk = 1; kk <= k - 1; ++kk) {
    const double ka = kk * a;
    const double r = std::round(ka);
    if (std::fabs(ka - r) < 1e-12 && r >= 1.0 && r <= n - 1) return true;
  }
  return false;
}

/// Whether the Pochhammer form of the series equals T^{N,K}: it needs
/// N >= 2 (the incomplete-gamma boundary terms cancel only then), K <= N and
/// no integral k a.
inline bool tak_series_closed_form_applies(int n, int k, double a) {
  return n >= 2 && k <= n && !tak_series_excluded(n, k, a);
}

/// Alternating series for T^{N,K}.
///
/// Closed form: sum_{n=0}^{N-1} C(N-1,n) (-M^{1/a})^n (1-n/a)_{K-1} Gamma(1-n/a, M).
/// Where that does not apply (see tak_series_closed_form_applies) the plain
/// binomial expansion sum_n C(N-1,n) (-M^{1/a})^n Gamma(K-n/a, M) is summed
/// instead, unless `strict` is set, in which case DomainError is thrown.
/// Terms are accumulated in signed extended-range form.
inline TakSeriesResult tak_series(int n, int k, double a, double m, bool strict = false) {
  detail::check_tak_args(n, k, a, m);
  const bool closed = tak_series_closed_form_applies(n, k, a);
  if (!closed && strict && n > 1) {
    throw DomainError("tak_series: closed form needs N >= 2, K <= N and no integral k*a");
  }
  LogReal sum;
  double log_max_term = -std::numeric_limits<double>::infinity();
  const double log_m = std::log(m);
  for (int i = 0; i < n; ++i) {
    LogReal term = LogReal::from_log(log_choose(n - 1, i) + i * log_m / a, (i % 2 == 0) ? 1 : -1);
    if (closed) {
      const double x = 1.0 - i / a;
      term *= rising_factorial_log(x, k - 1);
      term *= LogReal::from_value(upper_inc_gamma(x, m));
    } else {
      term *= LogReal::from_value(upper_inc_gamma(k - i / a, m));
    }
    if (!term.is_zero()) log_max_term = std::max(log_max_term, term.log_magnitude());
    sum += term;
  }
  TakSeriesResult out;
  out.value = sum;
  out.form = closed ? TakSeriesResult::Form::closed : TakSeriesResult::Form::expansion;
  out.cancellation = sum.is_zero() ? std::numeric_limits<double>::infinity()
                                   : std::exp(log_max_term - sum.log_magnitude());
  return out;
}

/// How a table cell was obtained.
enum class TakMethod { quadrature, series, recursionK, recursionN, exact };

inline const char* to_string(TakMethod m) {
  switch (m) {
    case TakMethod::quadrature: return "quadrature";
    case TakMethod::series: return "series";
    case TakMethod::recursionK: return "recursionK";
    case TakMethod::recursionN: return "recursionN";
    case TakMethod::exact: return "exact";
  }
  return "?";
}

inline TakMethod tak_method_from_string(const std::string& s) {
  if (s == "quadrature") return TakMethod::quadrature;
  if (s == "series") return TakMethod::series;
  if (s == "recursionK") return TakMethod::recursionK;
  if (s == "recursionN") return TakMethod::recursionN;
  if (s == "exact") return TakMethod::exact;
  throw ConfigError("unknown T-table method: " + s);
}

struct TakFillOptions {
  /// Series seeds are accepted only below this cancellation ratio.
  double series_seed_max_cancellation = 1e4;
  /// Cells whose propagated error bound exceeds this are recomputed by quadrature.
  double max_relative_error_bound = 1e-9;
};

/// Cache of T^{N,K}_{a,M} with per-cell provenance.
class TakTable {
 public:
  struct Cell {
    LogReal value;
    TakMethod method;
  };

  using FillOptions = TakFillOptions;

  TakTable(double a, double m) : a_(a), m_(m) { detail::check_tak_args(1, 1, a, m); }

  [[nodiscard]] double a() const { return a_; }
  [[nodiscard]] double mass() const { return m_; }
  [[nodiscard]] std::size_t size() const { return cells_.size(); }
  [[nodiscard]] const std::map<std::pair<int, int>, Cell>& cells() const { return cells_; }
  [[nodiscard]] const std::vector<std::string>& violations() const { return violations_; }

  [[nodiscard]] bool contains(int n, int k) const { return cells_.count({n, k}) != 0; }

  /// Stored value, or a quadrature evaluation that is then cached.
  LogReal get(int n, int k) {
    auto it = cells_.find({n, k});
    if (it != cells_.end()) return it->second.value;
    const LogReal v = n == 1 ? LogReal::from_log(log_gamma_upper(k, m_)) : tak_quadrature(n, k, a_, m_);
    insert(n, k, v, n == 1 ? TakMethod::exact : TakMethod::quadrature);
    return v;
  }

  [[nodiscard]] std::optional<Cell> find(int n, int k) const {
    auto it = cells_.find({n, k});
    if (it == cells_.end()) return std::nullopt;
    return it->second;
  }

  /// Stores a value, checking the Gamma(K,M) bound and monotonicity against
  /// neighbours already present.
  void insert(int n, int k, LogReal v, TakMethod method) {
    if (v.sign() <= 0) {
      std::ostringstream os;
      os << "T(" << n << "," << k << ") non-positive from " << to_string(method);
      violations_.push_back(os.str());
    } else if (v.log_magnitude() > log_gamma_upper(k, m_) + 1e-12) {
      std::ostringstream os;
      os << "T(" << n << "," << k << ") exceeds Gamma(K,M) (" << to_string(method) << ")";
      violations_.push_back(os.str());
    }
    cells_[{n, k}] = {v, method};
    check_order(n, k);
  }

  /// Fills N = 1..n_max, K = 1..k_max.
  ///
  /// a = 1/R: marches in N with T^{N+1,K} = T^{N,K} - M^R T^{N,K-R}
  /// (K > R), seeding K <= R. Otherwise, per row N, seeds one cell at
  /// K* = ceil((N-1)/(2a)) and applies
  /// T^{N,K+1} = K T^{N,K} + (N-1)/a (T^{N-1,K} - T^{N,K})
  /// upward for K > K* and solved for T^{N,K} downward for K < K*.
  TakTable& fill(int n_max, int k_max, const FillOptions& opt = {}) {
    if (n_max < 1 || k_max < 1) throw DomainError("TakTable::fill: sizes must be positive");
    const double inv_a = 1.0 / a_;
    const double r = std::round(inv_a);
    if (r >= 2.0 && std::fabs(inv_a - r) < 1e-12) {
      fill_inverse_integer(n_max, k_max, static_cast<int>(r), opt);
    } else {
      fill_two_directional(n_max, k_max, opt);
    }
    return *this;
  }

  /// CSV with header N,K,log_value,method; log values at 17 significant digits.
  void write_csv(std::ostream& os) const {
    os << "N,K,log_value,method\n";
    os.precision(17);
    for (const auto& [key, cell] : cells_) {
      os << key.first << ',' << key.second << ',' << cell.value.log_magnitude() << ',' << to_string(cell.method)
         << '\n';
    }
  }

  static TakTable read_csv(std::istream& is, double a, double m) {
    TakTable t(a, m);
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("T-table CSV: empty input");
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string n, k, lv, method;
      std::getline(ss, n, ',');
      std::getline(ss, k, ',');
      std::getline(ss, lv, ',');
      std::getline(ss, method, ',');
      try {
        t.insert(std::stoi(n), std::stoi(k), LogReal::from_log(std::stod(lv)), tak_method_from_string(method));
      } catch (const std::logic_error& e) {
        throw ConfigError("T-table CSV: malformed line '" + line + "'");
      }
    }
    return t;
  }

 private:
  void check_order(int n, int k) {
    const auto& v = cells_.at({n, k}).value;
    auto report = [&](const char* what) {
      std::ostringstream os;
      os << "T(" << n << "," << k << ") breaks monotonicity in " << what;
      violations_.push_back(os.str());
    };
    if (auto p = cells_.find({n - 1, k}); p != cells_.end() && !(v.log_magnitude() < p->second.value.log_magnitude())) report("N");
    if (auto p = cells_.find({n + 1, k}); p != cells_.end() && !(v.log_magnitude() > p->second.value.log_magnitude())) report("N");
    if (auto p = cells_.find({n, k - 1}); p != cells_.end() && !(v.log_magnitude() > p->second.value.log_magnitude())) report("K");
    if (auto p = cells_.find({n, k + 1}); p != cells_.end() && !(v.log_magnitude() < p->second.value.log_magnitude())) report("K");
  }

  // A seed cell: series when it applies and is well conditioned, else quadrature.
  std::pair<LogReal, TakMethod> seed(int n, int k, const FillOptions& opt) {
    if (n == 1) return {LogReal::from_log(log_gamma_upper(k, m_)), TakMethod::exact};
    {
      const auto s = tak_series(n, k, a_, m_);
      if (!s.catastrophic() && s.cancellation < opt.series_seed_max_cancellation) {
        seed_cancellation_ = s.cancellation;
        return {s.value, TakMethod::series};
      }
    }
    return {tak_quadrature(n, k, a_, m_), TakMethod::quadrature};
  }

  // Each series term carries a relative error of a few 1e-15, amplified by
  // the cancellation.
  double seed_bound(TakMethod m) const {
    if (m == TakMethod::exact) return 4 * std::numeric_limits<double>::epsilon();
    if (m == TakMethod::series) return 3e-14 * seed_cancellation_;
    return 1e-10;
  }

  void fill_two_directional(int n_max, int k_max, const FillOptions& opt) {
    const double eps = std::numeric_limits<double>::epsilon();
    const std::size_t cols = static_cast<std::size_t>(k_max) + 2;
    std::vector<std::vector<LogReal>> rows(static_cast<std::size_t>(n_max) + 1, std::vector<LogReal>(cols));
    // Propagated relative error bound per cell; past the tolerance the cell
    // is recomputed by quadrature and the recursion restarts from it.
    std::vector<std::vector<double>> bound(rows.size(), std::vector<double>(cols, 0.0));
    auto take_quadrature = [&](int n, int k) {
      rows[n][k] = tak_quadrature(n, k, a_, m_);
      bound[n][k] = 1e-10;
      insert(n, k, rows[n][k], TakMethod::quadrature);
    };
    for (int k = 1; k <= k_max; ++k) {
      rows[1][k] = LogReal::from_log(log_gamma_upper(k, m_));
      bound[1][k] = 4 * eps;
      insert(1, k, rows[1][k], TakMethod::exact);
    }
    for (int n = 2; n <= n_max; ++n) {
      const double c = (n - 1) / a_;
      const int k_star = std::clamp(static_cast<int>(std::ceil(c / 2.0)), 1, k_max);
      const auto [sv, sm] = seed(n, k_star, opt);
      rows[n][k_star] = sv;
      bound[n][k_star] = seed_bound(sm);
      insert(n, k_star, sv, sm);
      const LogReal c_lr = LogReal::from_value(c);
      for (int k = k_star; k < k_max; ++k) {
        const LogReal x = LogReal::from_value(k - c) * rows[n][k];
        const LogReal y = c_lr * rows[n - 1][k];
        const LogReal v = x + y;
        const double rel = relative_bound(x, bound[n][k], y, bound[n - 1][k], v);
        if (v.sign() <= 0 || !(rel <= opt.max_relative_error_bound)) {
          take_quadrature(n, k + 1);
          continue;
        }
        rows[n][k + 1] = v;
        bound[n][k + 1] = rel;
        insert(n, k + 1, v, TakMethod::recursionK);
      }
      for (int k = k_star - 1; k >= 1; --k) {
        const double denom = k - c;
        if (std::fabs(denom) < 1e-8) {
          take_quadrature(n, k);
          continue;
        }
        const LogReal x = rows[n][k + 1];
        const LogReal y = -(c_lr * rows[n - 1][k]);
        const LogReal v = (x + y) / LogReal::from_value(denom);
        const double rel = relative_bound(x, bound[n][k + 1], y, bound[n - 1][k], x + y);
        if (v.sign() <= 0 || !(rel <= opt.max_relative_error_bound)) {
          take_quadrature(n, k);
          continue;
        }
        rows[n][k] = v;
        bound[n][k] = rel;
        insert(n, k, v, TakMethod::recursionK);
      }
    }
  }

  // Relative error bound of x + y given relative bounds on x and y.
  static double relative_bound(LogReal x, double bx, LogReal y, double by, LogReal sum) {
    if (sum.is_zero()) return std::numeric_limits<double>::infinity();
    const double eps = std::numeric_limits<double>::epsilon();
    const double ls = sum.log_magnitude();
    const double rx = x.is_zero() ? 0.0 : std::exp(x.log_magnitude() - ls);
    const double ry = y.is_zero() ? 0.0 : std::exp(y.log_magnitude() - ls);
    return rx * (bx + 2 * eps) + ry * (by + 2 * eps) + eps;
  }

  void fill_inverse_integer(int n_max, int k_max, int r, const FillOptions& opt) {
    const double eps = std::numeric_limits<double>::epsilon();
    std::vector<std::vector<double>> logv(static_cast<std::size_t>(n_max) + 1,
                                          std::vector<double>(static_cast<std::size_t>(k_max) + 1));
    std::vector<std::vector<double>> bound(logv);  // relative error bound per cell
    for (int k = 1; k <= k_max; ++k) {
      logv[1][k] = log_gamma_upper(k, m_);
      bound[1][k] = 4 * eps;
      insert(1, k, LogReal::from_log(logv[1][k]), TakMethod::exact);
    }
    for (int n = 2; n <= n_max; ++n) {
      for (int k = 1; k <= std::min(r, k_max); ++k) {
        const auto [sv, sm] = seed(n, k, opt);
        logv[n][k] = sv.log_magnitude();
        bound[n][k] = seed_bound(sm);
        insert(n, k, sv, sm);
      }
    }
    const double log_mr = r * std::log(m_);
    for (int n = 1; n < n_max; ++n) {
      for (int k = r + 1; k <= k_max; ++k) {
        const double big = logv[n][k];
        const double sub = log_mr + logv[n][k - r];
        const double ratio = std::exp(sub - big);  // < 1 when the result is positive
        const double log_val = big + std::log1p(-ratio);
        // Absolute error of the difference relative to the result.
        const double rel_bound =
            (bound[n][k] + ratio * bound[n][k - r] + 2 * eps * (1 + ratio)) / (1.0 - ratio);
        if (!(ratio < 1.0) || !(rel_bound <= opt.max_relative_error_bound)) {
          const LogReal q = tak_quadrature(n + 1, k, a_, m_);
          logv[n + 1][k] = q.log_magnitude();
          bound[n + 1][k] = 1e-10;
          insert(n + 1, k, q, TakMethod::quadrature);
        } else {
          logv[n + 1][k] = log_val;
          bound[n + 1][k] = rel_bound;
          insert(n + 1, k, LogReal::from_log(log_val), TakMethod::recursionN);
        }
      }
    }
  }

  double a_;
  double m_;
  std::map<std::pair<int, int>, Cell> cells_;
  std::vector<std::string> violations_;
  double seed_cancellation_ = 1.0;
};

}  // namespace nrmkit
