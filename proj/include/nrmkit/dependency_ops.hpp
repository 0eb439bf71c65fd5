#pragma once

// Superposition, subsampling and point transition of CRMs and NRMs, the
// operator-expression algebra with its normal form, and the posterior
// pieces used when sampling dependent measures.
//
// Keyed randomness: each atom gets one uniform U = h(seed, id). The atom also
// carries its acceptance so far (c) and its transition count (t). Subsampling
// by q keeps the atom iff U < c q. The t-th transition draws from a generator
// seeded by h(seed, id, kernel, t). Both depend only on the atom's own
// history, so any rewriting that keeps the per-atom sequence of rates and
// kernels keeps the atoms, and S^q(S^q') keeps exactly the atoms that S^{qq'} keeps.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "nrmkit/error.hpp"
#include "nrmkit/levy.hpp"
#include "nrmkit/random.hpp"
#include "nrmkit/special_math.hpp"

namespace nrmkit {

// ---------------------------------------------------------------------------
// Transition kernels

struct TransitionKernel {
  std::string id;
  std::function<Point(const Point&, Rng&)> apply;

  static TransitionKernel identity() {
    return {"id", [](const Point& x, Rng&) { return x; }};
  }

  /// x' = x + N(0, sd^2 I).
  static TransitionKernel gaussian_random_walk(double sd, std::string id = "rw") {
    if (!(sd > 0.0)) throw ConfigError("gaussian_random_walk: sd must be positive");
    return {std::move(id), [sd](const Point& x, Rng& rng) {
              Point y = x;
              for (double& v : y) v += sample_normal(0.0, sd, rng);
              return y;
            }};
  }

  /// x' ~ H, independent of x.
  static TransitionKernel resample_from(BaseMeasure base, std::string id = "resample") {
    return {std::move(id), [b = std::move(base)](const Point&, Rng& rng) { return b.sample(rng); }};
  }
};

using KernelRegistry = std::map<std::string, TransitionKernel>;

/// "id" and "rw" (sd 0.1); "resample" draws from `base`.
inline KernelRegistry default_kernels(const BaseMeasure& base, double rw_sd = 0.1) {
  KernelRegistry r;
  r.emplace("id", TransitionKernel::identity());
  r.emplace("rw", TransitionKernel::gaussian_random_walk(rw_sd));
  r.emplace("resample", TransitionKernel::resample_from(base));
  return r;
}

// ---------------------------------------------------------------------------
// Randomness

/// Per-atom keyed randomness with the acceptance and transition history
/// described at the top of this file. One object per evaluation.
class KeyedRandomness {
 public:
  explicit KeyedRandomness(std::uint64_t seed) : seed_(seed) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

  /// Applies a subsampling step of rate q to atom `id`; true if kept.
  bool keep(std::uint64_t id, double q) {
    auto& t = trail_[id];
    t.acceptance *= q;
    return hash_to_unit(hash_keys({seed_, id, kSubsampleTag})) < t.acceptance;
  }

  /// Generator for the next transition of atom `id` under `kernel_id`.
  Rng transition_rng(std::uint64_t id, const std::string& kernel_id) {
    auto& t = trail_[id];
    const std::uint64_t k = std::hash<std::string>{}(kernel_id);
    return Rng(hash_keys({seed_, id, kTransitionTag, k, t.transitions++}));
  }

 private:
  static constexpr std::uint64_t kSubsampleTag = 0x5355425341ULL;
  static constexpr std::uint64_t kTransitionTag = 0x5452414e53ULL;
  struct Trail {
    double acceptance = 1.0;
    std::uint64_t transitions = 0;
  };
  std::uint64_t seed_;
  std::unordered_map<std::uint64_t, Trail> trail_;
};

/// Either a plain generator or keyed randomness.
struct OpRandomness {
  Rng* rng = nullptr;
  KeyedRandomness* keyed = nullptr;

  OpRandomness(Rng& r) : rng(&r) {}                  // NOLINT(google-explicit-constructor)
  OpRandomness(KeyedRandomness& k) : keyed(&k) {}    // NOLINT(google-explicit-constructor)

  bool keep(std::uint64_t id, double q) {
    if (keyed) return keyed->keep(id, q);
    return uniform01(*rng) < q;
  }
  Point transition(const Atom& at, const TransitionKernel& kernel) {
    if (keyed) {
      Rng r = keyed->transition_rng(at.id, kernel.id);
      return kernel.apply(at.location, r);
    }
    return kernel.apply(at.location, *rng);
  }
};

// ---------------------------------------------------------------------------
// Operators on CRM realizations

/// Union of the atoms; total masses add.
inline CrmRealization superpose(const std::vector<CrmRealization>& crms) {
  if (crms.empty()) throw DomainError("superpose: no measures");
  CrmRealization out;
  out.params = crms.front().params;
  out.truncation = crms.front().truncation;
  std::size_t dim = 0;
  for (const auto& c : crms) {
    for (const auto& at : c.atoms) {
      if (dim == 0) dim = at.location.size();
      if (at.location.size() != dim) throw DomainError("superpose: location dimension mismatch");
      out.atoms.push_back(at);
    }
  }
  return out;
}

/// Keeps each atom independently with probability q.
inline CrmRealization subsample(const CrmRealization& crm, double q, OpRandomness rnd) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("subsample: q must lie in [0,1]");
  CrmRealization out;
  out.params = crm.params;
  out.truncation = crm.truncation;
  for (const auto& at : crm.atoms) {
    if (rnd.keep(at.id, q)) out.atoms.push_back(at);
  }
  return out;
}

/// Location-dependent acceptance q(x); not part of the expression algebra.
inline CrmRealization subsample(const CrmRealization& crm, const std::function<double(const Point&)>& q, Rng& rng) {
  CrmRealization out;
  out.params = crm.params;
  out.truncation = crm.truncation;
  for (const auto& at : crm.atoms) {
    const double p = q(at.location);
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("subsample: q(x) outside [0,1]");
    if (uniform01(rng) < p) out.atoms.push_back(at);
  }
  return out;
}

/// Moves every location through the kernel; jumps and ids untouched.
inline CrmRealization point_transition(const CrmRealization& crm, const TransitionKernel& kernel, OpRandomness rnd) {
  CrmRealization out = crm;
  for (auto& at : out.atoms) at.location = rnd.transition(at, kernel);
  return out;
}

// ---------------------------------------------------------------------------
// The same operators on normalized measures

namespace detail {

inline NrmRealization rebuild_nrm(std::vector<double> raw, std::vector<Point> locs, std::vector<std::uint64_t> ids) {
  NrmRealization out;
  double total = 0.0;
  for (double r : raw) total += r;
  out.total_mass_before_normalization = total;
  out.weights.reserve(raw.size());
  for (double r : raw) out.weights.push_back(total > 0.0 ? r / total : 0.0);
  out.locations = std::move(locs);
  out.ids = std::move(ids);
  return out;
}

}  // namespace detail

/// (sum_i m_i mu_i) / sum_i m_i with m_i the pre-normalization masses.
inline NrmRealization superpose(const std::vector<NrmRealization>& nrms) {
  if (nrms.empty()) throw DomainError("superpose: no measures");
  std::vector<double> raw;
  std::vector<Point> locs;
  std::vector<std::uint64_t> ids;
  for (const auto& n : nrms) {
    for (std::size_t i = 0; i < n.weights.size(); ++i) {
      raw.push_back(n.weights[i] * n.total_mass_before_normalization);
      locs.push_back(n.locations[i]);
      ids.push_back(i < n.ids.size() ? n.ids[i] : 0);
    }
  }
  return detail::rebuild_nrm(std::move(raw), std::move(locs), std::move(ids));
}

/// Thins the atoms and renormalizes; the recorded mass shrinks accordingly.
inline NrmRealization subsample(const NrmRealization& nrm, double q, OpRandomness rnd) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("subsample: q must lie in [0,1]");
  std::vector<double> raw;
  std::vector<Point> locs;
  std::vector<std::uint64_t> ids;
  for (std::size_t i = 0; i < nrm.weights.size(); ++i) {
    const std::uint64_t id = i < nrm.ids.size() ? nrm.ids[i] : 0;
    if (!rnd.keep(id, q)) continue;
    raw.push_back(nrm.weights[i] * nrm.total_mass_before_normalization);
    locs.push_back(nrm.locations[i]);
    ids.push_back(id);
  }
  return detail::rebuild_nrm(std::move(raw), std::move(locs), std::move(ids));
}

inline NrmRealization point_transition(const NrmRealization& nrm, const TransitionKernel& kernel, OpRandomness rnd) {
  NrmRealization out = nrm;
  for (std::size_t i = 0; i < out.locations.size(); ++i) {
    const Atom at{0.0, out.locations[i], i < out.ids.size() ? out.ids[i] : 0};
    out.locations[i] = rnd.transition(at, kernel);
  }
  return out;
}

/// Weighted atoms sorted by id then location, for set comparisons.
struct WeightedAtom {
  std::uint64_t id = 0;
  double weight = 0.0;
  Point location;
  bool operator==(const WeightedAtom&) const = default;
  bool operator<(const WeightedAtom& o) const {
    return std::tie(id, location, weight) < std::tie(o.id, o.location, o.weight);
  }
};

inline std::vector<WeightedAtom> atom_set(const NrmRealization& n) {
  std::vector<WeightedAtom> out;
  for (std::size_t i = 0; i < n.weights.size(); ++i) out.push_back({n.ids.at(i), n.weights[i], n.locations[i]});
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<WeightedAtom> atom_set(const CrmRealization& c) {
  std::vector<WeightedAtom> out;
  for (const auto& at : c.atoms) out.push_back({at.id, at.jump, at.location});
  std::sort(out.begin(), out.end());
  return out;
}

/// Same ids and locations, weights equal to relative tolerance `tol`.
inline bool same_atoms(const std::vector<WeightedAtom>& x, const std::vector<WeightedAtom>& y, double tol = 1e-12) {
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].id != y[i].id || x[i].location != y[i].location) return false;
    if (std::fabs(x[i].weight - y[i].weight) > tol * std::max(std::fabs(x[i].weight), std::fabs(y[i].weight))) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Operator expressions

struct OperatorExpr {
  enum class Kind { leaf, subsample, transition, superpose };

  Kind kind = Kind::leaf;
  std::string id;                   // measure id (leaf) or kernel id (transition)
  std::optional<NggParams> params;  // leaf only
  double q = 1.0;                   // subsample only
  std::vector<OperatorExpr> children;

  static OperatorExpr leaf(std::string measure, std::optional<NggParams> p = std::nullopt) {
    OperatorExpr e;
    e.kind = Kind::leaf;
    e.id = std::move(measure);
    e.params = p;
    return e;
  }
  static OperatorExpr subsample(double q, OperatorExpr child) {
    OperatorExpr e;
    e.kind = Kind::subsample;
    e.q = q;
    e.children.push_back(std::move(child));
    e.validate();
    return e;
  }
  static OperatorExpr transition(std::string kernel, OperatorExpr child) {
    OperatorExpr e;
    e.kind = Kind::transition;
    e.id = std::move(kernel);
    e.children.push_back(std::move(child));
    return e;
  }
  static OperatorExpr superpose(std::vector<OperatorExpr> children) {
    OperatorExpr e;
    e.kind = Kind::superpose;
    e.children = std::move(children);
    e.validate();
    return e;
  }

  void validate() const {
    switch (kind) {
      case Kind::leaf:
        if (id.empty()) throw ConfigError("leaf needs a measure id");
        if (!children.empty()) throw ConfigError("leaf has children");
        if (params) params->validate();
        break;
      case Kind::subsample:
        if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("subsample rate must lie in [0,1]");
        if (children.size() != 1) throw ConfigError("subsample takes one operand");
        break;
      case Kind::transition:
        if (id.empty()) throw ConfigError("transition needs a kernel id");
        if (children.size() != 1) throw ConfigError("transition takes one operand");
        break;
      case Kind::superpose:
        if (children.size() < 2) throw ConfigError("superpose needs at least two operands");
        break;
    }
    for (const auto& c : children) c.validate();
  }

  bool operator==(const OperatorExpr& o) const {
    return kind == o.kind && id == o.id && q == o.q && children == o.children &&
           params.has_value() == o.params.has_value() &&
           (!params || (params->a == o.params->a && params->mass == o.params->mass));
  }

  [[nodiscard]] int depth() const {
    int d = 0;
    for (const auto& c : children) d = std::max(d, c.depth());
    return d + 1;
  }
};

namespace detail {

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  // Shortest representation that round-trips.
  for (int p = 1; p <= 17; ++p) {
    std::ostringstream t;
    t.precision(p);
    t << v;
    if (std::stod(t.str()) == v) return t.str();
  }
  return os.str();
}

class ExprParser {
 public:
  explicit ExprParser(const std::string& text) : s_(text) {}

  OperatorExpr parse() {
    OperatorExpr e = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("trailing input");
    e.validate();
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("expression parse error at offset " + std::to_string(pos_) + ": " + msg);
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  std::string token() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != '(' &&
           s_[pos_] != ')') {
      ++pos_;
    }
    if (start == pos_) fail("expected a token");
    return s_.substr(start, pos_ - start);
  }
  double number() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) fail("bad number '" + t + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("bad number '" + t + "'");
    }
  }

  OperatorExpr expr() {
    expect('(');
    const std::string head = token();
    OperatorExpr e;
    if (head == "leaf") {
      e = OperatorExpr::leaf(token());
      if (!peek(')')) {
        const double a = number();
        const double m = number();
        e.params = NggParams{a, m};
        try {
          e.params->validate();
        } catch (const DomainError& err) {
          fail(err.what());
        }
      }
    } else if (head == "subsample") {
      const double q = number();
      if (!(q >= 0.0 && q <= 1.0)) fail("subsample rate outside [0,1]");
      e = OperatorExpr::subsample(q, expr());
    } else if (head == "transition") {
      std::string k = token();
      e = OperatorExpr::transition(std::move(k), expr());
    } else if (head == "superpose") {
      std::vector<OperatorExpr> cs;
      while (!peek(')')) cs.push_back(expr());
      if (cs.size() < 2) fail("superpose needs at least two operands");
      e = OperatorExpr::superpose(std::move(cs));
    } else {
      fail("unknown operator '" + head + "'");
    }
    expect(')');
    return e;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Prefix syntax: (leaf ID [a M]) | (subsample Q E) | (transition KERNEL E) | (superpose E E ...).
inline OperatorExpr parse_expr(const std::string& text) { return detail::ExprParser(text).parse(); }

inline std::string to_string(const OperatorExpr& e) {
  switch (e.kind) {
    case OperatorExpr::Kind::leaf:
      if (e.params) {
        return "(leaf " + e.id + " " + detail::format_double(e.params->a) + " " +
               detail::format_double(e.params->mass) + ")";
      }
      return "(leaf " + e.id + ")";
    case OperatorExpr::Kind::subsample:
      return "(subsample " + detail::format_double(e.q) + " " + to_string(e.children[0]) + ")";
    case OperatorExpr::Kind::transition:
      return "(transition " + e.id + " " + to_string(e.children[0]) + ")";
    case OperatorExpr::Kind::superpose: {
      std::string s = "(superpose";
      for (const auto& c : e.children) s += " " + to_string(c);
      return s + ")";
    }
  }
  return {};
}

namespace detail {

inline void flatten_into(OperatorExpr e, std::vector<OperatorExpr>& out) {
  if (e.kind == OperatorExpr::Kind::superpose) {
    for (auto& c : e.children) flatten_into(std::move(c), out);
  } else {
    out.push_back(std::move(e));
  }
}

inline OperatorExpr make_sum(std::vector<OperatorExpr> terms) {
  std::vector<OperatorExpr> flat;
  for (auto& t : terms) flatten_into(std::move(t), flat);
  if (flat.size() == 1) return std::move(flat.front());
  OperatorExpr e;
  e.kind = OperatorExpr::Kind::superpose;
  e.children = std::move(flat);
  return e;
}

// S^q applied to an expression already in normal form.
inline OperatorExpr push_subsample(double q, OperatorExpr e) {
  switch (e.kind) {
    case OperatorExpr::Kind::superpose: {
      std::vector<OperatorExpr> terms;
      for (auto& c : e.children) terms.push_back(push_subsample(q, std::move(c)));
      return make_sum(std::move(terms));
    }
    case OperatorExpr::Kind::transition:
      e.children[0] = push_subsample(q, std::move(e.children[0]));
      return e;
    case OperatorExpr::Kind::subsample:
      // Inner rate first, in the order keyed evaluation multiplies them.
      e.q = e.q * q;
      return e;
    case OperatorExpr::Kind::leaf:
      break;
  }
  return OperatorExpr::subsample(q, std::move(e));
}

// T applied to an expression already in normal form.
inline OperatorExpr push_transition(const std::string& kernel, OperatorExpr e) {
  if (e.kind == OperatorExpr::Kind::superpose) {
    std::vector<OperatorExpr> terms;
    for (auto& c : e.children) terms.push_back(push_transition(kernel, std::move(c)));
    return make_sum(std::move(terms));
  }
  return OperatorExpr::transition(kernel, std::move(e));
}

}  // namespace detail

/// Rewrites with S(S) -> S, S(T) -> T(S), S and T distributed over superposition,
/// then flattens: a superposition of chains T...T(S^q(leaf)).
inline OperatorExpr normal_form(const OperatorExpr& e) {
  e.validate();
  switch (e.kind) {
    case OperatorExpr::Kind::leaf:
      return e;
    case OperatorExpr::Kind::superpose: {
      std::vector<OperatorExpr> terms;
      for (const auto& c : e.children) terms.push_back(normal_form(c));
      return detail::make_sum(std::move(terms));
    }
    case OperatorExpr::Kind::subsample:
      return detail::push_subsample(e.q, normal_form(e.children[0]));
    case OperatorExpr::Kind::transition:
      return detail::push_transition(e.id, normal_form(e.children[0]));
  }
  return e;
}

/// True if `e` has the shape produced by normal_form.
inline bool is_normal_form(const OperatorExpr& e) {
  auto chain_ok = [](const OperatorExpr* c) {
    while (c->kind == OperatorExpr::Kind::transition) c = &c->children[0];
    if (c->kind == OperatorExpr::Kind::subsample) c = &c->children[0];
    return c->kind == OperatorExpr::Kind::leaf;
  };
  if (e.kind != OperatorExpr::Kind::superpose) return chain_ok(&e);
  return std::all_of(e.children.begin(), e.children.end(), [&](const OperatorExpr& c) {
    return c.kind != OperatorExpr::Kind::superpose && chain_ok(&c);
  });
}

inline std::vector<std::string> leaf_ids(const OperatorExpr& e) {
  if (e.kind == OperatorExpr::Kind::leaf) return {e.id};
  std::vector<std::string> out;
  for (const auto& c : e.children) {
    auto sub = leaf_ids(c);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

namespace detail {

inline CrmRealization evaluate_rec(const OperatorExpr& e, const std::map<std::string, CrmRealization>& leaves,
                                   const KernelRegistry& kernels, OpRandomness rnd) {
  switch (e.kind) {
    case OperatorExpr::Kind::leaf: {
      const auto it = leaves.find(e.id);
      if (it == leaves.end()) throw ConfigError("evaluate_expr: unbound leaf '" + e.id + "'");
      return it->second;
    }
    case OperatorExpr::Kind::subsample:
      return subsample(evaluate_rec(e.children[0], leaves, kernels, rnd), e.q, rnd);
    case OperatorExpr::Kind::transition: {
      const auto it = kernels.find(e.id);
      if (it == kernels.end()) throw ConfigError("evaluate_expr: unknown kernel '" + e.id + "'");
      return point_transition(evaluate_rec(e.children[0], leaves, kernels, rnd), it->second, rnd);
    }
    case OperatorExpr::Kind::superpose: {
      std::vector<CrmRealization> parts;
      for (const auto& c : e.children) parts.push_back(evaluate_rec(c, leaves, kernels, rnd));
      return superpose(parts);
    }
  }
  throw DomainError("evaluate_expr: bad node");
}

}  // namespace detail

/// Interprets the expression over concrete leaf realizations. Each leaf may
/// appear once: superposition is of independent measures.
inline CrmRealization evaluate_expr(const OperatorExpr& e, const std::map<std::string, CrmRealization>& leaves,
                                    const KernelRegistry& kernels, OpRandomness rnd) {
  e.validate();
  auto ids = leaf_ids(e);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ConfigError("evaluate_expr: a leaf appears more than once");
  }
  return detail::evaluate_rec(e, leaves, kernels, rnd);
}

// ---------------------------------------------------------------------------
// Time-dependent chains

/// Normalized realized masses of q^{m-j} mu_j, j = 1..m.
inline std::vector<double> chain_weights(const std::vector<double>& thinned_masses) {
  if (thinned_masses.empty()) throw DomainError("chain_weights: need at least one epoch");
  double total = 0.0;
  for (double m : thinned_masses) {
    if (!(m >= 0.0)) throw DomainError("chain_weights: masses must be non-negative");
    total += m;
  }
  if (!(total > 0.0)) throw DomainError("chain_weights: all masses are zero");
  std::vector<double> out;
  for (double m : thinned_masses) out.push_back(m / total);
  return out;
}

/// Weights proportional to the expected masses q^{m-j} M_j a_j.
inline std::vector<double> expected_chain_weights(const std::vector<NggParams>& params, double q) {
  if (params.empty()) throw DomainError("expected_chain_weights: need at least one epoch");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("expected_chain_weights: q must lie in (0,1]");
  const auto m = static_cast<int>(params.size());
  std::vector<double> raw;
  for (int j = 1; j <= m; ++j) {
    const auto& p = params[static_cast<std::size_t>(j - 1)];
    p.validate();
    raw.push_back(std::pow(q, m - j) * p.mass * p.a);
  }
  return chain_weights(raw);
}

/// mu'_1 = mu_1, mu'_m = T(S^q(mu'_{m-1})) + mu_m on the CRM side.
inline CrmRealization dependent_chain_crm(const std::vector<CrmRealization>& epochs, double q,
                                          const TransitionKernel& kernel, OpRandomness rnd) {
  if (epochs.empty()) throw DomainError("dependent_chain: no epochs");
  CrmRealization cur = epochs.front();
  for (std::size_t j = 1; j < epochs.size(); ++j) {
    cur = superpose({point_transition(subsample(cur, q, rnd), kernel, rnd), epochs[j]});
  }
  return cur;
}

/// The same recursion carried out on normalized measures.
inline NrmRealization dependent_chain_nrm(const std::vector<NrmRealization>& epochs, double q,
                                          const TransitionKernel& kernel, OpRandomness rnd) {
  if (epochs.empty()) throw DomainError("dependent_chain: no epochs");
  NrmRealization cur = epochs.front();
  for (std::size_t j = 1; j < epochs.size(); ++j) {
    cur = superpose(std::vector<NrmRealization>{point_transition(subsample(cur, q, rnd), kernel, rnd), epochs[j]});
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Posterior pieces

/// Posterior of a superposition of independent NGG CRMs given U = u and
/// fixed points with counts n_k.
class SuperpositionPosterior {
 public:
  SuperpositionPosterior(std::vector<NggParams> components, double u, std::vector<int> counts)
      : comps_(std::move(components)), u_(u), counts_(std::move(counts)) {
    if (comps_.empty()) throw DomainError("superposition_posterior: no components");
    for (const auto& p : comps_) p.validate();
    if (!(u >= 0.0)) throw DomainError("superposition_posterior: u must be non-negative");
    for (int n : counts_) {
      if (n < 1) throw DomainError("superposition_posterior: fixed points need n_k >= 1");
    }
    // log of each component's share of int t^{n_k} e^{-ut} sum_i nu_i(t) dt.
    for (int n : counts_) {
      std::vector<double> lw;
      for (const auto& p : comps_) {
        lw.push_back(std::log(p.mass) + std::log(p.a) - std::lgamma(1.0 - p.a) + std::lgamma(n - p.a) +
                     (p.a - n) * std::log1p(u_));
      }
      log_weights_.push_back(std::move(lw));
    }
  }

  [[nodiscard]] double u() const { return u_; }
  [[nodiscard]] const std::vector<int>& counts() const { return counts_; }

  /// sum_i nu_i(t): the Levy density of the superposition.
  [[nodiscard]] double levy_density(double t) const {
    double s = 0.0;
    for (const auto& p : comps_) s += p.mass * std::exp(log_levy_density_unit(p.a, t));
    return s;
  }

  /// e^{-ut} sum_i nu_i(t): Levy density of the continuous part.
  [[nodiscard]] double continuous_levy_density(double t) const { return std::exp(-u_ * t) * levy_density(t); }

  /// Laplace exponent of the continuous part: sum_i M_i [psi_i(u+v) - psi_i(u)].
  [[nodiscard]] double continuous_laplace_exponent(double v) const {
    double s = 0.0;
    for (const auto& p : comps_) {
      s += p.mass * (std::pow(1.0 + u_ + v, p.a) - std::pow(1.0 + u_, p.a));
    }
    return s;
  }

  /// log of int_0^inf t^{n_k} e^{-ut} sum_i nu_i(t) dt.
  [[nodiscard]] double fixed_jump_log_normalizer(std::size_t k) const {
    return log_sum_exp(log_weights_.at(k));
  }

  /// Normalized density of fixed jump k.
  [[nodiscard]] double fixed_jump_density(std::size_t k, double t) const {
    if (!(t > 0.0)) return 0.0;
    const double n = counts_.at(k);
    return std::exp(n * std::log(t) - u_ * t - fixed_jump_log_normalizer(k)) * levy_density(t);
  }

  /// Exact draw: pick a component by its share, then Gamma(n_k - a_i, 1 + u).
  double sample_fixed_jump(std::size_t k, Rng& rng) const {
    const std::size_t i = sample_categorical_log(log_weights_.at(k), rng);
    return sample_gamma(counts_[k] - comps_[i].a, 1.0 + u_, rng);
  }

  /// Jumps of the continuous part above L.
  std::vector<double> sample_continuous_above(double L, Rng& rng) const {
    std::vector<double> out;
    for (const auto& p : comps_) {
      const long n = sample_poisson(p.mass * exp_tilted_tail_unit(p.a, u_, L), rng);
      for (long j = 0; j < n; ++j) out.push_back(sample_tilted_jump_above(p.a, u_, L, rng));
    }
    return out;
  }

 private:
  std::vector<NggParams> comps_;
  double u_;
  std::vector<int> counts_;
  std::vector<std::vector<double>> log_weights_;
};

inline SuperpositionPosterior superposition_posterior(std::vector<NggParams> components, double u,
                                                      std::vector<int> counts) {
  return {std::move(components), u, std::move(counts)};
}

/// Result of an acceptance posterior; `degenerate` is set when the
/// alternative z_k = 0 has zero likelihood.
struct AcceptanceProbability {
  double value = 1.0;
  bool degenerate = false;
};

namespace detail {

// q/J / (q/J + (1-q)/J^{-k}) with J = (rest + target)^n, J^{-k} = rest^n.
inline AcceptanceProbability acceptance_posterior(double rest, double target, double q, int n) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("acceptance posterior: q must lie in [0,1]");
  if (n < 0) throw DomainError("acceptance posterior: negative count");
  if (!(target > 0.0) || !(rest >= 0.0)) throw DomainError("acceptance posterior: jumps must be positive");
  if (q == 1.0) return {1.0, false};
  if (q == 0.0) return {0.0, false};
  if (n == 0) return {q, false};
  if (rest == 0.0) return {1.0, true};
  // log odds of z=0 against z=1: log(1-q) - log q + n log((rest+target)/rest)
  const double log_odds = std::log1p(-q) - std::log(q) + n * std::log1p(target / rest);
  return {1.0 / (1.0 + std::exp(log_odds)), false};
}

}  // namespace detail

/// Posterior acceptance of atom k under subsampling at rate q, given n
/// observations of which n_k sit on atom k. z_current holds the other atoms' indicators.
inline AcceptanceProbability subsample_z_posterior(const std::vector<double>& jumps, const std::vector<int>& z_current,
                                                   double q, std::size_t k, int n, int n_k) {
  if (jumps.size() != z_current.size() || k >= jumps.size()) throw DomainError("subsample_z_posterior: bad sizes");
  if (n_k < 0 || n_k > n) throw DomainError("subsample_z_posterior: bad counts");
  if (n_k > 0) return {1.0, false};
  double rest = 0.0;
  for (std::size_t i = 0; i < jumps.size(); ++i) {
    if (i != k && z_current[i] != 0) rest += jumps[i];
  }
  return detail::acceptance_posterior(rest, jumps[k], q, n);
}

/// Acceptance of atom k of epoch `origin` seen from epoch m >= origin, with
/// prior rate q^{m - origin}; sums run over all atoms of epochs 1..m.
/// jumps[e] and z[e] are epoch e's atoms (0-based epochs, m and origin 1-based).
inline AcceptanceProbability hierarchical_z_posterior(int m, int origin, const std::vector<std::vector<double>>& jumps,
                                                      const std::vector<std::vector<int>>& z, double q,
                                                      std::size_t k, int n_mk, int n_m_total) {
  if (origin < 1 || origin > m || static_cast<std::size_t>(m) > jumps.size() || jumps.size() != z.size()) {
    throw DomainError("hierarchical_z_posterior: need 1 <= origin <= m <= number of epochs");
  }
  if (n_mk < 0 || n_mk > n_m_total) throw DomainError("hierarchical_z_posterior: bad counts");
  const auto& target_epoch = jumps[static_cast<std::size_t>(origin - 1)];
  if (k >= target_epoch.size()) throw DomainError("hierarchical_z_posterior: atom index out of range");
  if (n_mk > 0) return {1.0, false};
  double rest = 0.0;
  for (int e = 0; e < m; ++e) {
    const auto& je = jumps[static_cast<std::size_t>(e)];
    const auto& ze = z[static_cast<std::size_t>(e)];
    if (je.size() != ze.size()) throw DomainError("hierarchical_z_posterior: jumps/z size mismatch");
    for (std::size_t i = 0; i < je.size(); ++i) {
      if (e == origin - 1 && i == k) continue;
      if (ze[i] != 0) rest += je[i];
    }
  }
  return detail::acceptance_posterior(rest, target_epoch[k], std::pow(q, m - origin), n_m_total);
}

}  // namespace nrmkit
