#pragma once

// Thin wrappers over Boost adaptive quadrature that report the achieved
// error and throw NumericalError on non-finite results.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "nrmkit/error.hpp"
#include "nrmkit/logging.hpp"

namespace nrmkit::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error

  [[nodiscard]] double relative_error() const {
    return value == 0.0 ? error : error / std::fabs(value);
  }
};

namespace detail {

inline Result finish(double value, double error, double rel_tol, const char* what) {
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << what << ": non-finite quadrature result (achieved error " << error << ")";
    throw NumericalError(os.str());
  }
  Result r{value, error};
  if (r.relative_error() > 100.0 * rel_tol && error > 1e-300) {
    std::ostringstream os;
    os << what << ": requested rel. tolerance " << rel_tol << ", achieved " << r.relative_error();
    log::debug(os.str());
  }
  return r;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (61 point) on [lo, hi]; either bound may be infinite.
template <class F>
Result gauss_kronrod(F f, double lo, double hi, double rel_tol = 1e-10, unsigned max_depth = 20) {
  double err = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, max_depth, rel_tol, &err);
  return detail::finish(v, err, rel_tol, "gauss_kronrod");
}

/// Double-exponential quadrature on a finite interval; tolerates integrable
/// endpoint singularities.
template <class F>
Result tanh_sinh(F f, double lo, double hi, double rel_tol = 1e-10) {
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  const double v = integrator.integrate(f, lo, hi, rel_tol, &err, &l1, &levels);
  return detail::finish(v, err, rel_tol, "tanh_sinh");
}

/// Double-exponential quadrature on [lo, inf).
template <class F>
Result exp_sinh(F f, double lo, double rel_tol = 1e-10) {
  static thread_local boost::math::quadrature::exp_sinh<double> integrator(12);
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  const double v = integrator.integrate(f, lo, std::numeric_limits<double>::infinity(), rel_tol, &err,
                                        &l1, &levels);
  return detail::finish(v, err, rel_tol, "exp_sinh");
}

/// Sum of several panels: integrates f over [x_0,x_1], ..., [x_{n-1}, inf)
/// with Gauss-Kronrod on each; useful when the integrand has a sharp peak
/// whose location is known.
template <class F>
Result gauss_kronrod_panels(F f, const std::vector<double>& breaks, double rel_tol = 1e-10) {
  Result total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const Result r = gauss_kronrod(f, breaks[i], breaks[i + 1], rel_tol);
    total.value += r.value;
    total.error += r.error;
  }
  return total;
}


/// log of an integral, with relative error estimate.
struct LogResult {
  double log_value = 0.0;
  double rel_error = 0.0;
};

/// log int_{-inf}^{inf} exp(g(s)) ds for a unimodal, smooth g.
///
/// Locates the mode by an uphill walk plus golden-section refinement,
/// rescales by the curvature there and integrates exp(g - max g) on each side
/// with Gauss-Kronrod. Working relative to the maximum keeps the integrand
/// O(1) whatever the magnitude of the result.
template <class G>
LogResult integrate_exp_unimodal(G g, double s0, double rel_tol = 1e-10) {
  auto val = [&](double s) {
    const double v = g(s);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };
  // Walk uphill with growing steps until the value drops.
  double left = s0 - 1.0, mid = s0, right = s0 + 1.0;
  double gl = val(left), gm = val(mid), gr = val(right);
  for (int it = 0; it < 400 && !(gm >= gl && gm >= gr); ++it) {
    const double step = (right - left) * 0.5 * (it < 40 ? 1.0 : 2.0);
    if (gr > gm) {
      left = mid, gl = gm;
      mid = right, gm = gr;
      right = mid + step, gr = val(right);
    } else {
      right = mid, gr = gm;
      mid = left, gm = gl;
      left = mid - step, gl = val(left);
    }
  }
  if (!std::isfinite(gm)) throw NumericalError("integrate_exp_unimodal: integrand vanishes everywhere searched");
  // Golden-section refinement on [left, right].
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = left, b = right;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double gc = val(c), gd = val(d);
  for (int it = 0; it < 200 && (b - a) > 1e-7 * (1.0 + std::fabs(a)); ++it) {
    if (gc >= gd) {
      b = d, d = c, gd = gc;
      c = b - phi * (b - a), gc = val(c);
    } else {
      a = c, c = d, gc = gd;
      d = a + phi * (b - a), gd = val(d);
    }
  }
  double mode = gc >= gd ? c : d;
  double gmax = std::max({gc, gd, gm});
  if (gm > std::max(gc, gd)) mode = mid;

  const double h = 1e-3;
  const double curv = -(val(mode + h) - 2.0 * gmax + val(mode - h)) / (h * h);
  const double w = (curv > 1e-12 && std::isfinite(curv)) ? 1.0 / std::sqrt(curv) : 1.0;

  auto f = [&](double y) {
    const double e = val(mode + w * y) - gmax;
    return e < -745.0 ? 0.0 : std::exp(e);
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  const Result left_part = gauss_kronrod(f, -inf, 0.0, rel_tol);
  const Result right_part = gauss_kronrod(f, 0.0, inf, rel_tol);
  const double total = left_part.value + right_part.value;
  if (!(total > 0.0)) throw NumericalError("integrate_exp_unimodal: zero integral");
  return {gmax + std::log(w) + std::log(total), (left_part.error + right_part.error) / total};
}

}  // namespace nrmkit::quad
