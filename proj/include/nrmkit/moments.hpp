#pragma once

// Means, variances and covariances of normalized random measures on a set B,
// for a single measure and for pairs linked by superposition, subsampling or
// point transition. Quadrature values, NGG closed forms where they exist, and
// a Monte Carlo oracle with jackknife standard errors.
//
// Derivations use 1/T^2 = int_0^inf v e^{-vT} dv and
// 1/(T_k T) = int int e^{-v1 T_k - v2 T} dv1 dv2 with independent masses on
// disjoint sets. With g(s) = (P M_k psi'(s)^2 - psi''(s)) e^{-M_k psi(s)}:
//
//   Var mu(B)               = P(P-1) M int v psi''(v) e^{-M psi(v)} dv
//   Cov(mu_k(B), mu(B))     = P M_k int_0^inf g(s) W(s) ds + P^2 (M_R/M - 1),
//                             W(s) = int_0^s e^{-M_R psi(v)} dv, M_R = M - M_k
//   Cov(mu(B), (T mu)(B))   = P_A P_B (M^2 int v psi'(v)^2 e^{-M psi(v)} dv - 1)
//
// The superposition and transition forms differ from the published ones; those
// are reported alongside as `as_printed` where they are finite.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "nrmkit/dependency_ops.hpp"
#include "nrmkit/error.hpp"
#include "nrmkit/levy.hpp"
#include "nrmkit/quadrature.hpp"
#include "nrmkit/random.hpp"
#include "nrmkit/special_math.hpp"

namespace nrmkit {

enum class LevyFamily { ngg, dp };
enum class MomentOp { mean, variance, superposition, subsampling, transition };

inline const char* to_string(MomentOp op) {
  switch (op) {
    case MomentOp::mean: return "mean";
    case MomentOp::variance: return "var";
    case MomentOp::superposition: return "super";
    case MomentOp::subsampling: return "sub";
    case MomentOp::transition: return "trans";
  }
  return "?";
}

inline MomentOp moment_op_from_string(const std::string& s) {
  if (s == "mean") return MomentOp::mean;
  if (s == "var") return MomentOp::variance;
  if (s == "super") return MomentOp::superposition;
  if (s == "sub") return MomentOp::subsampling;
  if (s == "trans") return MomentOp::transition;
  throw ConfigError("unknown moment operation '" + s + "' (expected mean|var|super|sub|trans)");
}

/// Unit-mass Laplace exponent and its derivatives. NGG: (1+v)^a - 1; DP: log(1+v).
struct UnitExponent {
  LevyFamily family = LevyFamily::ngg;
  double a = 0.5;

  static UnitExponent ngg(double a) {
    NggParams{a, 1.0}.validate();
    return {LevyFamily::ngg, a};
  }
  static UnitExponent dp() { return {LevyFamily::dp, 0.0}; }

  [[nodiscard]] double psi(double v) const {
    return family == LevyFamily::dp ? std::log1p(v) : laplace_exponent_unit(a, v);
  }
  [[nodiscard]] double d1(double v) const {
    return family == LevyFamily::dp ? 1.0 / (1.0 + v) : laplace_exponent_unit_d1(a, v);
  }
  [[nodiscard]] double d2(double v) const {
    return family == LevyFamily::dp ? -1.0 / ((1.0 + v) * (1.0 + v)) : laplace_exponent_unit_d2(a, v);
  }
  /// v with mass * psi(v) = 1; the natural scale of e^{-mass psi(v)}.
  [[nodiscard]] double scale(double mass) const {
    const double v = family == LevyFamily::dp ? std::expm1(1.0 / mass) : std::pow(1.0 + 1.0 / mass, 1.0 / a) - 1.0;
    return std::isfinite(v) ? std::max(v, 1e-300) : 1e300;
  }
};

struct MomentQuery {
  MomentOp op = MomentOp::variance;
  LevyFamily family = LevyFamily::ngg;
  double a = 0.5;
  double mass = 1.0;           // single measure, subsampling, transition
  std::vector<double> masses;  // superposition components
  std::size_t k = 0;           // superposition: component paired with the sum
  double p_b = 0.5;
  double p_a = 0.0;  // transition: base mass of the set moved into B
  double q = 0.5;    // subsampling rate

  [[nodiscard]] UnitExponent exponent() const {
    return family == LevyFamily::dp ? UnitExponent::dp() : UnitExponent::ngg(a);
  }

  void validate() const {
    if (family == LevyFamily::ngg) NggParams{a, 1.0}.validate();
    if (!(p_b >= 0.0 && p_b <= 1.0)) throw ConfigError("moments: P_B must lie in [0,1]");
    if (op == MomentOp::superposition) {
      if (masses.size() < 2) throw ConfigError("moments: superposition needs at least two masses");
      if (k >= masses.size()) throw ConfigError("moments: component index out of range");
      for (double m : masses) {
        if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("moments: masses must be positive");
      }
    } else if (!(mass > 0.0) || !std::isfinite(mass)) {
      throw ConfigError("moments: mass must be positive");
    }
    if (op == MomentOp::subsampling && !(q > 0.0 && q <= 1.0)) throw ConfigError("moments: q must lie in (0,1]");
    if (op == MomentOp::transition) {
      if (!(p_a >= 0.0 && p_a <= 1.0)) throw ConfigError("moments: P_A must lie in [0,1]");
      if (p_a + p_b > 1.0 + 1e-15) throw ConfigError("moments: transition needs disjoint sets, P_A + P_B <= 1");
    }
  }
};

struct MomentResult {
  double value = 0.0;       // quadrature value of the (derived) formula
  double quadrature_error = 0.0;
  std::optional<double> closed_form;
  std::optional<double> as_printed;  // published expression, for comparison only
};

namespace detail {

constexpr double kOuterTol = 1e-7;
constexpr double kInnerTol = 1e-9;

// int_0^inf f(v) dv with v = c s.
template <class F>
quad::Result integrate_scaled(F f, double c, double tol) {
  auto g = [&](double s) {
    const double v = f(c * s) * c;
    return std::isfinite(v) ? v : 0.0;
  };
  return quad::gauss_kronrod(g, 0.0, std::numeric_limits<double>::infinity(), tol, 25);
}

// M int v psi''(v) e^{-M psi(v)} dv (negative).
inline quad::Result variance_integral(const UnitExponent& e, double m) {
  auto r = integrate_scaled([&](double v) { return m * v * e.d2(v) * std::exp(-m * e.psi(v)); }, e.scale(m),
                            1e-11);
  return r;
}

// M^2 int v psi'(v)^2 e^{-M psi(v)} dv (equals 1 + variance_integral).
inline quad::Result cross_integral(const UnitExponent& e, double m) {
  return integrate_scaled(
      [&](double v) {
        const double d = e.d1(v);
        return m * m * v * d * d * std::exp(-m * e.psi(v));
      },
      e.scale(m), 1e-11);
}

// (P M_k psi'^2 - psi'') e^{-M_k psi}.
inline double g_term(const UnitExponent& e, double p, double mk, double s) {
  const double d = e.d1(s);
  return (p * mk * d * d - e.d2(s)) * std::exp(-mk * e.psi(s));
}

// int_0^s e^{-m psi(v)} dv.
inline double w_term(const UnitExponent& e, double m, double s) {
  if (s <= 0.0) return 0.0;
  return quad::gauss_kronrod([&](double v) { return std::exp(-m * e.psi(v)); }, 0.0, s, kInnerTol, 20).value;
}

inline quad::Result cov_pair(const UnitExponent& e, double mk, double mr, double p) {
  const double m = mk + mr;
  const auto r = integrate_scaled([&](double s) { return g_term(e, p, mk, s) * w_term(e, mr, s); }, e.scale(mk),
                                  kOuterTol);
  return {p * mk * r.value + p * p * (mr / m - 1.0), p * mk * r.error};
}

inline std::optional<double> cov_pair_as_printed(const UnitExponent& e, double mk, double mr, double p) {
  try {
    const double m = mk + mr;
    auto gamma_fn = [&](double v) {
      if (v <= 0.0) return 0.0;
      return quad::gauss_kronrod([&](double s) { return g_term(e, p, mk, s); }, 0.0, v, kInnerTol, 20).value;
    };
    const auto r = integrate_scaled([&](double v) { return gamma_fn(v) * std::exp(-mr * e.psi(v)); },
                                    e.scale(mr), kOuterTol);
    return p * mk * r.value + p * p * (1.0 - 2.0 * mr / m);
  } catch (const NumericalError&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// e^M M^{1/a} |Gamma(-1/a, M)|, stable for large M.
inline double ngg_variance_factor(double a, double m) {
  NggParams{a, m}.validate();
  if (m > 2.0) return detail::upper_gamma_cf(-1.0 / a, m);
  return std::exp(m + std::log(m) / a) * std::fabs(upper_inc_gamma(-1.0 / a, m));
}

/// NGG closed form P(1-P) (1-a)/a e^M M^{1/a} |Gamma(-1/a, M)|.
inline double ngg_variance_closed_form(double a, double m, double p) {
  return p * (1.0 - p) * (1.0 - a) / a * ngg_variance_factor(a, m);
}

inline double dp_variance(double m, double p) { return p * (1.0 - p) / (m + 1.0); }

inline double nrm_mean(const MomentQuery& q) {
  q.validate();
  return q.p_b;
}

/// Variance of mu(B) by quadrature. For the NGG the closed form is also
/// evaluated and must agree to 1e-6 (NumericalError otherwise).
inline MomentResult nrm_variance(const MomentQuery& q) {
  q.validate();
  const auto e = q.exponent();
  const auto r = detail::variance_integral(e, q.mass);
  MomentResult out;
  out.value = q.p_b * (q.p_b - 1.0) * r.value;
  out.quadrature_error = std::fabs(q.p_b * (q.p_b - 1.0)) * r.error;
  out.closed_form = q.family == LevyFamily::dp ? dp_variance(q.mass, q.p_b)
                                               : ngg_variance_closed_form(q.a, q.mass, q.p_b);
  const double scale = std::max(std::fabs(*out.closed_form), 1e-300);
  if (std::fabs(out.value - *out.closed_form) > 1e-6 * scale) {
    throw NumericalError("nrm_variance: quadrature " + std::to_string(out.value) + " disagrees with closed form " +
                         std::to_string(*out.closed_form));
  }
  return out;
}

/// Cov(mu_k(B), mu(B)) for mu the superposition of the components.
inline MomentResult cov_superposition(const MomentQuery& q) {
  q.validate();
  const auto e = q.exponent();
  double total = 0.0;
  for (double m : q.masses) total += m;
  const double mk = q.masses[q.k];
  const double mr = total - mk;
  const auto r = detail::cov_pair(e, mk, mr, q.p_b);
  return {r.value, r.error, std::nullopt, detail::cov_pair_as_printed(e, mk, mr, q.p_b)};
}

/// Cov(mu^q(B), mu(B)) with constant rate q, i.e. M_q = q M.
inline MomentResult cov_subsampling(const MomentQuery& q) {
  q.validate();
  const auto e = q.exponent();
  const double mq = q.q * q.mass;
  const double mr = q.mass - mq;
  if (mr <= 0.0) {
    MomentQuery v = q;
    v.op = MomentOp::variance;
    return nrm_variance(v);
  }
  const auto r = detail::cov_pair(e, mq, mr, q.p_b);
  return {r.value, r.error, std::nullopt, detail::cov_pair_as_printed(e, mq, mr, q.p_b)};
}

/// Cov(mu(B), (T mu)(B)) where the atoms landing in B come from a set of base
/// mass P_A disjoint from B. The published double integral diverges, so no
/// as-printed value is given.
inline MomentResult cov_transition(const MomentQuery& q) {
  q.validate();
  const auto e = q.exponent();
  const auto r = detail::cross_integral(e, q.mass);
  MomentResult out;
  out.value = q.p_a * q.p_b * (r.value - 1.0);
  out.quadrature_error = q.p_a * q.p_b * r.error;
  if (q.family == LevyFamily::ngg) {
    out.closed_form = -q.p_a * q.p_b * (1.0 - q.a) / q.a * ngg_variance_factor(q.a, q.mass);
  } else {
    out.closed_form = -q.p_a * q.p_b / (q.mass + 1.0);
  }
  return out;
}

inline MomentResult evaluate_moment(const MomentQuery& q) {
  switch (q.op) {
    case MomentOp::mean: {
      const double m = nrm_mean(q);
      return {m, 0.0, m, m};
    }
    case MomentOp::variance: return nrm_variance(q);
    case MomentOp::superposition: return cov_superposition(q);
    case MomentOp::subsampling: return cov_subsampling(q);
    case MomentOp::transition: return cov_transition(q);
  }
  throw ConfigError("evaluate_moment: unknown operation");
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle

/// masses: exact draws of the independent masses on B and its complement
/// (and per component). atoms: truncated CRM realizations pushed through the
/// keyed operators, with the expected small-jump mass added back.
enum class McMode { masses, atoms };

struct MonteCarloResult {
  long reps = 0;
  double mean = 0.0;  // E X
  double mean_se = 0.0;
  double second = 0.0;  // Var X, or Cov(X, Y) for operator pairs
  double second_se = 0.0;
};

namespace detail {

inline double sample_mass(const MomentQuery& q, double m, Rng& rng) {
  if (m <= 0.0) return 0.0;
  if (q.family == LevyFamily::dp) return sample_gamma(m, 1.0, rng);
  return sample_total_mass(q.a, m, rng);
}

// (X, Y) from exact independent masses.
inline std::pair<double, double> draw_masses(const MomentQuery& q, Rng& rng) {
  const double p = q.p_b;
  switch (q.op) {
    case MomentOp::mean:
    case MomentOp::variance: {
      const double tb = sample_mass(q, q.mass * p, rng);
      const double x = tb / (tb + sample_mass(q, q.mass * (1.0 - p), rng));
      return {x, x};
    }
    case MomentOp::superposition: {
      double xb = 0.0, xt = 0.0, yb = 0.0, yt = 0.0;
      for (std::size_t j = 0; j < q.masses.size(); ++j) {
        const double b = sample_mass(q, q.masses[j] * p, rng);
        const double t = b + sample_mass(q, q.masses[j] * (1.0 - p), rng);
        if (j == q.k) {
          xb = b;
          xt = t;
        }
        yb += b;
        yt += t;
      }
      return {xb / xt, yb / yt};
    }
    case MomentOp::subsampling: {
      const double mq = q.q * q.mass, mr = q.mass - mq;
      const double kb = sample_mass(q, mq * p, rng);
      const double kt = kb + sample_mass(q, mq * (1.0 - p), rng);
      const double rb = sample_mass(q, mr * p, rng);
      const double rt = rb + sample_mass(q, mr * (1.0 - p), rng);
      return {kb / kt, (kb + rb) / (kt + rt)};
    }
    case MomentOp::transition: {
      const double tb = sample_mass(q, q.mass * q.p_b, rng);
      const double ta = sample_mass(q, q.mass * q.p_a, rng);
      const double rest = sample_mass(q, q.mass * std::max(0.0, 1.0 - q.p_a - q.p_b), rng);
      const double t = ta + tb + rest;
      return {tb / t, ta / t};
    }
  }
  return {0.0, 0.0};
}

/// Kernel on [0,1]: [P_B, P_B + P_A) is stretched onto B = [0, P_B); everything
/// else is squeezed into [P_B, 1).
inline TransitionKernel into_b_kernel(double p_a, double p_b) {
  return {"into_b", [p_a, p_b](const Point& x, Rng&) {
            const double v = x[0];
            if (v >= p_b && v < p_b + p_a) return Point{(v - p_b) * (p_b / p_a)};
            return Point{p_b + (1.0 - p_b) * v};
          }};
}

inline double mass_below(const CrmRealization& c, double p) {
  double s = 0.0;
  for (const auto& at : c.atoms) {
    if (at.location[0] < p) s += at.jump;
  }
  return s;
}

// (X, Y) from truncated realizations on [0,1] with B = [0, P_B).
inline std::pair<double, double> draw_atoms(const MomentQuery& q, double z, std::uint64_t key, Rng& rng) {
  const auto base = BaseMeasure::uniform_cube(1);
  const double p = q.p_b;
  // Expected mass of the jumps below z per unit of Levy mass.
  const double small = small_jump_mean_unit(q.a, z);
  auto crm = [&](double m) { return sample_crm_threshold({q.a, m}, base, z, rng); };
  switch (q.op) {
    case MomentOp::mean:
    case MomentOp::variance: {
      const auto c = crm(q.mass);
      const double x = (mass_below(c, p) + q.mass * small * p) / (c.total_mass() + q.mass * small);
      return {x, x};
    }
    case MomentOp::superposition: {
      std::vector<CrmRealization> parts;
      for (double m : q.masses) parts.push_back(crm(m));
      const auto& ck = parts[q.k];
      const double mk = q.masses[q.k];
      double total_m = 0.0;
      for (double m : q.masses) total_m += m;
      const auto sum = superpose(parts);
      return {(mass_below(ck, p) + mk * small * p) / (ck.total_mass() + mk * small),
              (mass_below(sum, p) + total_m * small * p) / (sum.total_mass() + total_m * small)};
    }
    case MomentOp::subsampling: {
      const auto c = crm(q.mass);
      KeyedRandomness keyed(key);
      const auto thinned = subsample(c, q.q, keyed);
      const double mq = q.q * q.mass;
      return {(mass_below(thinned, p) + mq * small * p) / (thinned.total_mass() + mq * small),
              (mass_below(c, p) + q.mass * small * p) / (c.total_mass() + q.mass * small)};
    }
    case MomentOp::transition: {
      const auto c = crm(q.mass);
      KeyedRandomness keyed(key);
      const auto moved = point_transition(c, into_b_kernel(q.p_a, p), keyed);
      const double total = c.total_mass() + q.mass * small;
      return {(mass_below(c, p) + q.mass * small * p) / total,
              (mass_below(moved, p) + q.mass * small * q.p_a) / total};
    }
  }
  return {0.0, 0.0};
}

struct Sums {
  double n = 0, x = 0, y = 0, xy = 0;
  Sums& operator+=(const Sums& o) {
    n += o.n;
    x += o.x;
    y += o.y;
    xy += o.xy;
    return *this;
  }
  Sums operator-(const Sums& o) const { return {n - o.n, x - o.x, y - o.y, xy - o.xy}; }
  [[nodiscard]] double mean() const { return x / n; }
  [[nodiscard]] double cov() const { return (xy - x * y / n) / (n - 1.0); }
};

}  // namespace detail

/// Sample mean of X and Var X (or Cov(X,Y)) with delete-a-group jackknife
/// standard errors. Replicate r uses substream(seed, r).
inline MonteCarloResult monte_carlo_moments(const MomentQuery& q, long reps, std::uint64_t seed,
                                            McMode mode = McMode::masses, double threshold = 1e-5) {
  q.validate();
  if (reps < 100) throw ConfigError("monte_carlo_moments: need at least 100 replicates");
  if (mode == McMode::atoms && q.family != LevyFamily::ngg) {
    throw ConfigError("monte_carlo_moments: atom mode needs an NGG family");
  }
  if (q.op == MomentOp::transition && mode == McMode::atoms && !(q.p_a > 0.0)) {
    throw ConfigError("monte_carlo_moments: atom mode for a transition needs P_A > 0");
  }
  const long groups = std::min<long>(reps, 200);
  std::vector<detail::Sums> by_group(static_cast<std::size_t>(groups));
  for (long r = 0; r < reps; ++r) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(r));
    const auto [x, y] = mode == McMode::masses
                            ? detail::draw_masses(q, rng)
                            : detail::draw_atoms(q, threshold, hash_keys({seed, static_cast<std::uint64_t>(r)}), rng);
    auto& s = by_group[static_cast<std::size_t>(r % groups)];
    s += detail::Sums{1.0, x, y, x * y};
  }
  detail::Sums all;
  for (const auto& s : by_group) all += s;
  // For variance queries Y = X, so cov() is the variance.
  std::vector<double> means, seconds;
  for (const auto& s : by_group) {
    const auto rest = all - s;
    means.push_back(rest.mean());
    seconds.push_back(rest.cov());
  }
  auto jack_se = [&](const std::vector<double>& th) {
    double m = 0.0;
    for (double t : th) m += t;
    m /= static_cast<double>(th.size());
    double ss = 0.0;
    for (double t : th) ss += (t - m) * (t - m);
    const auto g = static_cast<double>(th.size());
    return std::sqrt((g - 1.0) / g * ss);
  };
  MonteCarloResult out;
  out.reps = reps;
  out.mean = all.mean();
  out.mean_se = jack_se(means);
  out.second = all.cov();
  out.second_se = jack_se(seconds);
  return out;
}

inline MonteCarloResult monte_carlo_moments(const MomentQuery& q, long reps, Rng& rng, McMode mode = McMode::masses,
                                            double threshold = 1e-5) {
  return monte_carlo_moments(q, reps, static_cast<std::uint64_t>(rng()), mode, threshold);
}

/// |value - estimate| in units of se.
inline double z_score(double value, double estimate, double se) {
  if (!(se > 0.0)) return value == estimate ? 0.0 : std::numeric_limits<double>::infinity();
  return std::fabs(value - estimate) / se;
}

}  // namespace nrmkit
