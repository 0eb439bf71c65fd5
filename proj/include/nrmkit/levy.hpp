#pragma once

// NGG Levy machinery: Laplace exponent, tail integrals, CRM sampling by the
// decreasing-jump and threshold constructions, and normalization.
//
// Unit-mass Levy density: rho_a(t) = a / Gamma(1-a) t^{-1-a} e^{-t}.
// Functions with a `_unit` suffix omit the mass factor M.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "json.hpp"
#include "nrmkit/error.hpp"
#include "nrmkit/random.hpp"
#include "nrmkit/special_math.hpp"

namespace nrmkit {

struct NggParams {
  double a = 0.5;     // discount, in (0,1)
  double mass = 1.0;  // total mass M > 0

  void validate() const {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("NggParams: a must lie in (0,1), got " + std::to_string(a));
    if (!(mass > 0.0) || !std::isfinite(mass)) {
      throw DomainError("NggParams: mass must be positive, got " + std::to_string(mass));
    }
  }
};

inline void to_json(nlohmann::json& j, const NggParams& p) { j = {{"a", p.a}, {"mass", p.mass}}; }
inline void from_json(const nlohmann::json& j, NggParams& p) {
  p.a = j.at("a").get<double>();
  p.mass = j.at("mass").get<double>();
}

// ---------------------------------------------------------------------------
// Laplace exponent and tail integrals

/// psi(v)/M = (1+v)^a - 1.
inline double laplace_exponent_unit(double a, double v) { return std::expm1(a * std::log1p(v)); }
inline double laplace_exponent_unit_d1(double a, double v) { return a * std::pow(1.0 + v, a - 1.0); }
inline double laplace_exponent_unit_d2(double a, double v) { return a * (a - 1.0) * std::pow(1.0 + v, a - 2.0); }

/// psi(v) = M((1+v)^a - 1).
inline double laplace_exponent(const NggParams& p, double v) {
  if (!(v >= 0.0)) throw DomainError("laplace_exponent: v must be non-negative");
  return p.mass * laplace_exponent_unit(p.a, v);
}
inline double laplace_exponent_d1(const NggParams& p, double v) { return p.mass * laplace_exponent_unit_d1(p.a, v); }
inline double laplace_exponent_d2(const NggParams& p, double v) { return p.mass * laplace_exponent_unit_d2(p.a, v); }

/// log rho_a(t) at unit mass.
inline double log_levy_density_unit(double a, double t) {
  return std::log(a) - std::lgamma(1.0 - a) - (1.0 + a) * std::log(t) - t;
}

namespace detail {

// Lentz continued fraction for Gamma(s, x) e^{x} x^{-s}; good for x > 1 + max(s, 0).
inline void check_threshold(double L, const char* what) {
  if (!(L > 0.0)) throw DomainError(std::string(what) + ": threshold must be positive");
}

}  // namespace detail

/// log |Q(-a, L)| = log of the unit-mass tail integral of rho_a above L.
///
/// Small arguments use the negative-argument recursion; for L > 2 the
/// continued fraction avoids the cancellation between the two terms of the
/// recursion and stays finite where the value itself underflows.
inline double log_tail_mass_unit(double a, double L) {
  detail::check_threshold(L, "tail_mass");
  if (L <= 2.0) return std::log(std::fabs(reg_inc_gamma_q(-a, L)));
  return std::log(a) - std::lgamma(1.0 - a) - L - a * std::log(L) + std::log(detail::upper_gamma_cf(-a, L));
}

/// |Q(-a, L)|.
inline double tail_mass_unit(double a, double L) { return std::exp(log_tail_mass_unit(a, L)); }

/// M |Q(-a, L)|: expected number of jumps above L.
inline double tail_mass(const NggParams& p, double L) { return p.mass * tail_mass_unit(p.a, L); }

/// (1+v)^a |Q(-a, L(1+v))| = int_L^inf e^{-vt} rho_a(t) dt.
inline double exp_tilted_tail_unit(double a, double v, double L) {
  if (!(v >= 0.0)) throw DomainError("exp_tilted_tail: v must be non-negative");
  detail::check_threshold(L, "exp_tilted_tail");
  return std::exp(a * std::log1p(v) + log_tail_mass_unit(a, L * (1.0 + v)));
}

inline double exp_tilted_tail(const NggParams& p, double v, double L) {
  return p.mass * exp_tilted_tail_unit(p.a, v, L);
}

/// int_0^L (1 - e^{-vt}) rho_a(t) dt.
///
/// Uses the closed form ((1+v)^a - 1) + tilted tail - tail. For L(1+v) <= 2
/// the power series in L is summed instead; the closed form there subtracts
/// two nearly equal tails and loses relative accuracy as L -> 0.
inline double truncated_exponent_unit(double a, double v, double L) {
  if (!(v >= 0.0)) throw DomainError("truncated_exponent: v must be non-negative");
  detail::check_threshold(L, "truncated_exponent");
  if (v == 0.0) return 0.0;
  if (L * (1.0 + v) <= 2.0) {
    // a/Gamma(1-a) sum_{n>=1} (-1)^{n+1} ((1+v)^n - 1) L^{n-a} / (n! (n-a))
    const double w = 1.0 + v;
    double sum = 0.0;
    double lpow = 1.0;   // L^n / n!
    double wpow = 1.0;   // (w L)^n / n!
    for (int n = 1; n < 200; ++n) {
      lpow *= L / n;
      wpow *= w * L / n;
      const double term = (wpow - lpow) / (n - a);
      sum += (n % 2 == 1) ? term : -term;
      if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
    }
    return a / std::tgamma(1.0 - a) * std::pow(L, -a) * sum;
  }
  const double value = laplace_exponent_unit(a, v) + exp_tilted_tail_unit(a, v, L) - tail_mass_unit(a, L);
  return std::max(value, 0.0);
}

inline double truncated_exponent(const NggParams& p, double v, double L) {
  return p.mass * truncated_exponent_unit(p.a, v, L);
}

/// Expected total size of the jumps below z, per unit mass: int_0^z t rho_a(t) dt.
inline double small_jump_mean_unit(double a, double z) { return a * boost::math::gamma_p(1.0 - a, z); }

/// Solves log |Q(-a, t)| = log_target for t.
///
/// Safeguarded Newton in s = log t: Newton steps from an asymptotic initial
/// guess, falling back to bisection once the root is bracketed. Relative
/// tolerance 1e-12 in t. Throws NumericalError when the root lies outside
/// [1e-300, 1e300].
inline double tail_mass_unit_inverse(double a, double log_target) {
  if (!std::isfinite(log_target)) throw DomainError("tail_mass_unit_inverse: target must be finite and positive");
  constexpr double s_min = -690.0, s_max = 690.0;
  const double log_c = std::log(a) - std::lgamma(1.0 - a);

  // Small t: |Q(-a,t)| ~ t^{-a}/Gamma(1-a). Large t: ~ a/Gamma(1-a) t^{-1-a} e^{-t}.
  double s = -(log_target + std::lgamma(1.0 - a)) / a;
  if (s > 0.0) {
    double t = std::max(1.0, -(log_target - log_c));
    for (int i = 0; i < 3; ++i) t = std::max(1e-3, log_c - log_target - (1.0 + a) * std::log(t));
    s = std::log(t);
  }
  s = std::clamp(s, s_min, s_max);

  double lo = s_min, hi = s_max;  // f(lo) > 0 > f(hi) once established
  bool have_lo = false, have_hi = false;
  for (int it = 0; it < 300; ++it) {
    const double t = std::exp(s);
    const double log_tail = log_tail_mass_unit(a, t);
    const double fs = log_tail - log_target;
    if (fs == 0.0) return t;
    if (fs > 0.0) {
      lo = s;
      have_lo = true;
    } else {
      hi = s;
      have_hi = true;
    }
    const double d = -std::exp(log_c - (1.0 + a) * s - t + s - log_tail);
    double next = s - fs / d;
    if (!std::isfinite(next)) next = fs > 0.0 ? s + 4.0 : s - 4.0;
    next = std::clamp(next, s - 8.0, s + 8.0);
    if (have_lo && have_hi) {
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (hi - lo < 1e-13) return std::exp(0.5 * (lo + hi));
    } else if (next <= s_min || next >= s_max) {
      if ((fs < 0.0 && s <= s_min) || (fs > 0.0 && s >= s_max)) {
        std::ostringstream os;
        os << "tail_mass_unit_inverse: root outside [1e-300, 1e300] (a=" << a << ", log target=" << log_target << ")";
        throw NumericalError(os.str());
      }
      next = std::clamp(next, s_min, s_max);
    }
    if (std::fabs(next - s) < 1e-13) return std::exp(next);
    s = next;
  }
  throw NumericalError("tail_mass_unit_inverse: no convergence");
}

// ---------------------------------------------------------------------------
// Jump samplers

enum class JumpMethod {
  inverse_cdf,  // invert the tail integral numerically
  rejection,    // Pareto / shifted-exponential proposal, exact and much faster
};

/// One jump with density proportional to rho_a(t) on (z, inf).
inline double sample_jump_above(double a, double z, Rng& rng, JumpMethod method = JumpMethod::inverse_cdf) {
  detail::check_threshold(z, "sample_jump_above");
  if (method == JumpMethod::inverse_cdf) {
    return tail_mass_unit_inverse(a, std::log(uniform01(rng)) + log_tail_mass_unit(a, z));
  }
  for (;;) {
    if (z < 1.0) {
      const double t = z * std::pow(uniform01(rng), -1.0 / a);
      if (uniform01(rng) <= std::exp(-(t - z))) return t;
    } else {
      const double t = z + sample_exponential(rng);
      if (uniform01(rng) <= std::pow(t / z, -1.0 - a)) return t;
    }
  }
}

/// One jump with density proportional to e^{-v t} rho_a(t) on (L, inf).
inline double sample_tilted_jump_above(double a, double v, double L, Rng& rng,
                                       JumpMethod method = JumpMethod::inverse_cdf) {
  const double w = 1.0 + v;
  return sample_jump_above(a, L * w, rng, method) / w;
}

/// Jumps of a unit-a CRM with mass `mass` that exceed z (Poisson number).
inline std::vector<double> sample_jumps_above(double a, double mass, double z, Rng& rng,
                                              JumpMethod method = JumpMethod::inverse_cdf) {
  const long k = sample_poisson(mass * tail_mass_unit(a, z), rng);
  std::vector<double> jumps(static_cast<std::size_t>(k));
  for (double& j : jumps) j = sample_jump_above(a, z, rng, method);
  return jumps;
}

/// The `count` largest jumps, in decreasing order (Ferguson-Klass).
///
/// M |Q(-a, J_k)| is the k-th arrival of a unit-rate Poisson process, which
/// is the same as drawing J_k from P(J_k <= j | J_{k-1}) =
/// exp{-M int_j^{J_{k-1}} rho_a} by inversion.
inline std::vector<double> sample_largest_jumps(double a, double mass, int count, Rng& rng) {
  std::vector<double> jumps;
  jumps.reserve(static_cast<std::size_t>(std::max(count, 0)));
  double arrival = 0.0;
  for (int k = 0; k < count; ++k) {
    arrival += sample_exponential(rng);
    const double j = tail_mass_unit_inverse(a, std::log(arrival / mass));
    if (!jumps.empty() && !(j < jumps.back())) {
      throw NumericalError("sample_largest_jumps: jump sequence not strictly decreasing (precision exhausted)");
    }
    jumps.push_back(j);
  }
  return jumps;
}

/// Positive a-stable variable with E e^{-vS} = e^{-v^a} (Kanter's representation).
inline double sample_positive_stable(double a, Rng& rng) {
  const double u = M_PI * uniform01(rng);
  const double e = sample_exponential(rng);
  const double log_a_u = (a / (1.0 - a)) * std::log(std::sin(a * u)) + std::log(std::sin((1.0 - a) * u)) -
                         std::log(std::sin(u)) / (1.0 - a);
  return std::exp((1.0 - a) / a * (log_a_u - std::log(e)));
}

/// Exact draw of the total mass of an NGG CRM, Laplace transform
/// exp{-mass ((1+v)^a - 1)}. The mass is split into pieces of at most 1 and
/// each piece is an exponentially tilted stable drawn by rejection
/// (acceptance e^{-piece} >= e^{-1}).
inline double sample_total_mass(double a, double mass, Rng& rng) {
  NggParams{a, mass}.validate();
  const auto pieces = static_cast<long>(std::ceil(mass));
  const double piece = mass / static_cast<double>(pieces);
  const double scale = std::pow(piece, 1.0 / a);
  double total = 0.0;
  for (long i = 0; i < pieces; ++i) {
    for (;;) {
      const double x = scale * sample_positive_stable(a, rng);
      if (sample_exponential(rng) > x) {
        total += x;
        break;
      }
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Realizations

using Point = std::vector<double>;

/// Probability measure H on the data space.
class BaseMeasure {
 public:
  using Sampler = std::function<Point(Rng&)>;
  using LogDensity = std::function<double(const Point&)>;

  BaseMeasure(int dimension, Sampler sampler, LogDensity log_density, std::string name = "custom")
      : dimension_(dimension), sampler_(std::move(sampler)), log_density_(std::move(log_density)),
        name_(std::move(name)) {
    if (dimension < 1) throw DomainError("BaseMeasure: dimension must be positive");
  }

  /// Uniform on [0,1]^d.
  static BaseMeasure uniform_cube(int d) {
    return BaseMeasure(
        d,
        [d](Rng& rng) {
          Point p(static_cast<std::size_t>(d));
          for (double& x : p) x = uniform01(rng);
          return p;
        },
        [](const Point& p) {
          for (double x : p) {
            if (x < 0.0 || x > 1.0) return -std::numeric_limits<double>::infinity();
          }
          return 0.0;
        },
        "uniform");
  }

  /// Isotropic Gaussian N(mean * 1, sd^2 I) on R^d.
  static BaseMeasure gaussian(int d, double mean = 0.0, double sd = 1.0) {
    if (!(sd > 0.0)) throw DomainError("BaseMeasure::gaussian: sd must be positive");
    return BaseMeasure(
        d,
        [d, mean, sd](Rng& rng) {
          Point p(static_cast<std::size_t>(d));
          for (double& x : p) x = sample_normal(mean, sd, rng);
          return p;
        },
        [mean, sd](const Point& p) {
          double acc = 0.0;
          for (double x : p) {
            const double z = (x - mean) / sd;
            acc += -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
          }
          return acc;
        },
        "gaussian");
  }

  [[nodiscard]] int dimension() const { return dimension_; }
  [[nodiscard]] const std::string& name() const { return name_; }
  Point sample(Rng& rng) const { return sampler_(rng); }
  [[nodiscard]] double log_density(const Point& x) const { return log_density_(x); }

 private:
  int dimension_;
  Sampler sampler_;
  LogDensity log_density_;
  std::string name_;
};

struct Atom {
  double jump = 0.0;
  Point location;
  std::uint64_t id = 0;  // stable identity used by keyed randomness
};

struct Truncation {
  enum class Kind { none, threshold, count };
  Kind kind = Kind::none;
  double threshold = 0.0;
  int count = 0;
};

struct CrmRealization {
  NggParams params;
  std::vector<Atom> atoms;
  Truncation truncation;

  [[nodiscard]] double total_mass() const {
    double s = 0.0;
    for (const auto& at : atoms) s += at.jump;
    return s;
  }
};

struct NrmRealization {
  std::vector<double> weights;
  std::vector<Point> locations;
  std::vector<std::uint64_t> ids;
  double total_mass_before_normalization = 0.0;
};

/// K_max largest jumps with i.i.d. locations from `base`.
inline CrmRealization sample_crm_decreasing(const NggParams& p, const BaseMeasure& base, int k_max, Rng& rng) {
  p.validate();
  if (k_max < 1) throw DomainError("sample_crm_decreasing: K_max must be at least 1");
  CrmRealization crm;
  crm.params = p;
  crm.truncation = {Truncation::Kind::count, 0.0, k_max};
  const auto jumps = sample_largest_jumps(p.a, p.mass, k_max, rng);
  crm.atoms.reserve(jumps.size());
  for (double j : jumps) {
    const std::uint64_t id = rng();
    crm.atoms.push_back({j, base.sample(rng), id});
  }
  return crm;
}

/// All jumps above z with i.i.d. locations from `base`.
inline CrmRealization sample_crm_threshold(const NggParams& p, const BaseMeasure& base, double z, Rng& rng,
                                           JumpMethod method = JumpMethod::inverse_cdf) {
  p.validate();
  detail::check_threshold(z, "sample_crm_threshold");
  CrmRealization crm;
  crm.params = p;
  crm.truncation = {Truncation::Kind::threshold, z, 0};
  const auto jumps = sample_jumps_above(p.a, p.mass, z, rng, method);
  crm.atoms.reserve(jumps.size());
  for (double j : jumps) {
    const std::uint64_t id = rng();
    crm.atoms.push_back({j, base.sample(rng), id});
  }
  return crm;
}

inline NrmRealization normalize(const CrmRealization& crm) {
  if (crm.atoms.empty()) throw DomainError("normalize: realization has no atoms");
  NrmRealization out;
  const double total = crm.total_mass();
  if (!(total > 0.0)) throw DomainError("normalize: total mass is not positive");
  out.total_mass_before_normalization = total;
  out.weights.reserve(crm.atoms.size());
  for (const auto& at : crm.atoms) {
    out.weights.push_back(at.jump / total);
    out.locations.push_back(at.location);
    out.ids.push_back(at.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const Truncation& t) {
  switch (t.kind) {
    case Truncation::Kind::none: j = {{"kind", "none"}}; break;
    case Truncation::Kind::threshold: j = {{"kind", "threshold"}, {"z", t.threshold}}; break;
    case Truncation::Kind::count: j = {{"kind", "count"}, {"k_max", t.count}}; break;
  }
}
inline void from_json(const nlohmann::json& j, Truncation& t) {
  const auto kind = j.at("kind").get<std::string>();
  t = {};
  if (kind == "threshold") {
    t.kind = Truncation::Kind::threshold;
    t.threshold = j.at("z").get<double>();
  } else if (kind == "count") {
    t.kind = Truncation::Kind::count;
    t.count = j.at("k_max").get<int>();
  } else if (kind != "none") {
    throw ConfigError("unknown truncation kind: " + kind);
  }
}

inline void to_json(nlohmann::json& j, const Atom& a) {
  j = {{"jump", a.jump}, {"location", a.location}, {"id", a.id}};
}
inline void from_json(const nlohmann::json& j, Atom& a) {
  a.jump = j.at("jump").get<double>();
  a.location = j.at("location").get<Point>();
  a.id = j.value("id", std::uint64_t{0});
}

inline void to_json(nlohmann::json& j, const CrmRealization& c) {
  j = {{"params", c.params}, {"atoms", c.atoms}, {"truncation", c.truncation}};
}
inline void from_json(const nlohmann::json& j, CrmRealization& c) {
  c.params = j.at("params").get<NggParams>();
  c.atoms = j.at("atoms").get<std::vector<Atom>>();
  c.truncation = j.at("truncation").get<Truncation>();
}

inline void to_json(nlohmann::json& j, const NrmRealization& n) {
  j = {{"weights", n.weights},
       {"locations", n.locations},
       {"ids", n.ids},
       {"total_mass_before_normalization", n.total_mass_before_normalization}};
}
inline void from_json(const nlohmann::json& j, NrmRealization& n) {
  n.weights = j.at("weights").get<std::vector<double>>();
  n.locations = j.at("locations").get<std::vector<Point>>();
  n.ids = j.value("ids", std::vector<std::uint64_t>{});
  n.total_mass_before_normalization = j.at("total_mass_before_normalization").get<double>();
}

}  // namespace nrmkit
