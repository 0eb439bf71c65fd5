#pragma once

// Randomness sources, keyed hashing for reproducible per-atom decisions, and
// a few exact samplers not provided by <random>.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

#include "nrmkit/error.hpp"

namespace nrmkit {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive hash of a key tuple.
inline std::uint64_t hash_keys(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto k : keys) h = mix64(h ^ mix64(k));
  return h;
}

/// Uniform in the open interval (0, 1) derived from a hash value.
inline double hash_to_unit(std::uint64_t h) {
  return (static_cast<double>(h >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

/// Independent generator for substream `index` of `seed`.
inline Rng substream(std::uint64_t seed, std::uint64_t index) { return Rng(hash_keys({seed, index})); }

inline double uniform01(Rng& rng) {
  // (0,1): avoids log(0) in inversion formulas.
  return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

inline double sample_exponential(Rng& rng) { return -std::log(uniform01(rng)); }

/// Gamma(shape, rate).
inline double sample_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("sample_gamma: shape and rate must be positive");
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

inline long sample_poisson(double mean, Rng& rng) {
  if (!(mean >= 0.0)) throw DomainError("sample_poisson: negative mean");
  if (mean == 0.0) return 0;
  std::poisson_distribution<long> p(mean);
  return p(rng);
}

inline double sample_normal(double mean, double sd, Rng& rng) {
  std::normal_distribution<double> n(mean, sd);
  return n(rng);
}

inline std::vector<double> sample_dirichlet(const std::vector<double>& alpha, Rng& rng) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) total += out[i] = sample_gamma(alpha[i], 1.0, rng);
  for (double& x : out) x /= total;
  return out;
}

/// Draws index i with probability proportional to exp(log_weights[i]).
inline std::size_t sample_categorical_log(const std::vector<double>& log_weights, Rng& rng) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) hi = std::max(hi, w);
  if (hi == -std::numeric_limits<double>::infinity()) {
    throw InvariantError("sample_categorical_log: all weights are zero");
  }
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - hi);
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    u -= std::exp(log_weights[i] - hi);
    if (u <= 0.0) return i;
  }
  for (std::size_t i = log_weights.size(); i-- > 0;) {
    if (log_weights[i] > -std::numeric_limits<double>::infinity()) return i;
  }
  return 0;
}

/// Exact sampler for a density proportional to exp(h(x)) on the real line
/// with h concave (adaptive rejection sampling with tangent envelopes).
///
/// `h` and `dh` are the log-density and its derivative; `x0` is a starting
/// point and `scale` a rough width used to bracket the mode.
template <class H, class DH>
double sample_log_concave(H h, DH dh, double x0, double scale, Rng& rng, int max_points = 40) {
  struct Knot {
    double x, h, d;
  };
  auto knot = [&](double x) { return Knot{x, h(x), dh(x)}; };

  std::vector<Knot> knots;
  {
    // Bracket the mode, then refine it with the Illinois variant of regula falsi on h'.
    double left = x0, right = x0, step = scale;
    int guard = 0;
    double dl = dh(left);
    while (dl <= 0.0) {
      left -= step;
      step *= 2.0;
      dl = dh(left);
      if (++guard > 200) throw NumericalError("sample_log_concave: cannot bracket mode from the left");
    }
    step = scale;
    guard = 0;
    double dr = dh(right);
    while (dr >= 0.0) {
      right += step;
      step *= 2.0;
      dr = dh(right);
      if (++guard > 200) throw NumericalError("sample_log_concave: cannot bracket mode from the right");
    }
    double lo = left, hi = right, dlo = dl, dhi = dr;
    int side = 0;
    double mode = 0.5 * (lo + hi);
    for (int it = 0; it < 60 && hi - lo > 1e-3 * scale; ++it) {
      mode = (lo * dhi - hi * dlo) / (dhi - dlo);
      if (!(mode > lo && mode < hi)) mode = 0.5 * (lo + hi);
      const double dm = dh(mode);
      if (dm > 0.0) {
        lo = mode, dlo = dm;
        if (side == 1) dhi *= 0.5;
        side = 1;
      } else if (dm < 0.0) {
        hi = mode, dhi = dm;
        if (side == -1) dlo *= 0.5;
        side = -1;
      } else {
        break;
      }
    }
    // Outer knots where h has dropped by at least one unit below the mode, so
    // the tangent tails decay at a useful rate.
    const double hm = h(mode);
    auto outer = [&](double dir) {
      double x = mode + dir * scale, st = scale;
      for (int g = 0; g < 200; ++g) {
        if (h(x) < hm - 1.0) return x;
        x += dir * st;
        st *= 2.0;
      }
      throw NumericalError("sample_log_concave: density does not decay");
    };
    knots.push_back(knot(outer(-1.0)));
    knots.push_back(knot(mode));
    knots.push_back(knot(outer(1.0)));
  }

  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const std::size_t n = knots.size();
    // Breakpoints between consecutive tangent lines.
    std::vector<double> z(n + 1);
    z[0] = -inf;
    z[n] = inf;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Knot& p = knots[i];
      const Knot& q = knots[i + 1];
      const double dd = p.d - q.d;
      double zi = (std::fabs(dd) > 1e-300) ? (q.h - p.h - q.x * q.d + p.x * p.d) / dd : 0.5 * (p.x + q.x);
      if (!(zi >= p.x) || !(zi <= q.x)) zi = 0.5 * (p.x + q.x);
      z[i + 1] = zi;
    }
    // Log mass of each exponential piece.
    std::vector<double> log_mass(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Knot& k = knots[i];
      const double lo = z[i], hi = z[i + 1];
      if (k.d == 0.0) {
        log_mass[i] = k.h + std::log(hi - lo);
      } else if (lo == -inf) {
        log_mass[i] = k.h + k.d * (hi - k.x) - std::log(k.d);
      } else if (hi == inf) {
        log_mass[i] = k.h + k.d * (lo - k.x) - std::log(-k.d);
      } else {
        const double e_hi = k.h + k.d * (hi - k.x);
        const double e_lo = k.h + k.d * (lo - k.x);
        const double top = std::max(e_hi, e_lo);
        log_mass[i] = top + std::log(-std::expm1(-std::fabs(e_hi - e_lo))) - std::log(std::fabs(k.d));
      }
    }
    const std::size_t seg = sample_categorical_log(log_mass, rng);
    const Knot& k = knots[seg];
    const double lo = z[seg], hi = z[seg + 1];
    const double u = uniform01(rng);
    double x;
    if (lo == -inf) {
      x = hi + std::log(u) / k.d;
    } else if (hi == inf) {
      x = lo + std::log(u) / k.d;
    } else if (std::fabs(k.d * (hi - lo)) < 1e-12) {
      x = lo + u * (hi - lo);
    } else {
      x = lo + std::log1p(u * std::expm1(k.d * (hi - lo))) / k.d;
    }
    const double envelope = k.h + k.d * (x - k.x);
    const double hx = h(x);
    if (std::log(uniform01(rng)) <= hx - envelope) return x;
    if (static_cast<int>(knots.size()) < max_points && std::isfinite(hx)) {
      const Knot nk{x, hx, dh(x)};
      auto pos = std::lower_bound(knots.begin(), knots.end(), x,
                                  [](const Knot& a, double v) { return a.x < v; });
      if (pos == knots.end() || pos->x != x) knots.insert(pos, nk);
    }
  }
  throw NumericalError("sample_log_concave: rejection loop did not terminate");
}

}  // namespace nrmkit
