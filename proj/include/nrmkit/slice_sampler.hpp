#pragma once

// Gibbs slice sampler for NGG mixture models.
//
// The state holds every jump above the threshold L = min(u), occupied or
// not; jumps below L are integrated out. One sweep updates
//   allocations -> U_N -> components -> occupied jumps -> slices (and L)
//   -> unoccupied jumps above L -> M.
// Occupied jumps are drawn with the slices integrated out and the slices are
// drawn straight after them, so the pair is a single block; the unoccupied
// jumps are then regenerated above the new L.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include "json.hpp"

#include "nrmkit/error.hpp"
#include "nrmkit/levy.hpp"
#include "nrmkit/logging.hpp"
#include "nrmkit/random.hpp"
#include "nrmkit/special_math.hpp"

namespace nrmkit {

// ---------------------------------------------------------------------------
// Likelihood models

/// Component likelihood g_0(x | theta) with prior h(theta).
///
/// Conjugate models override sample_posterior. Non-conjugate models get a
/// random-walk Metropolis step with isotropic scale rw_scale(); a scale of 0
/// means no proposal is configured.
class LikelihoodModel {
 public:
  virtual ~LikelihoodModel() = default;

  [[nodiscard]] virtual int data_dimension() const = 0;
  [[nodiscard]] virtual double log_g0(const Point& x, const Point& theta) const = 0;
  [[nodiscard]] virtual double log_prior(const Point& theta) const = 0;
  virtual Point sample_prior(Rng& rng) const = 0;
  [[nodiscard]] virtual bool conjugate() const { return false; }
  [[nodiscard]] virtual double rw_scale() const { return 0.0; }

  /// Draw from h(theta) prod g_0(x_i | theta), normalized.
  virtual Point sample_posterior(const std::vector<const Point*>& xs, const Point& current, Rng& rng) const {
    if (xs.empty()) return sample_prior(rng);
    if (conjugate()) throw ConfigError("conjugate model must override sample_posterior");
    const double scale = rw_scale();
    if (!(scale > 0.0)) throw ConfigError("non-conjugate likelihood needs a random-walk proposal scale");
    auto target = [&](const Point& th) {
      double s = log_prior(th);
      if (!std::isfinite(s)) return s;
      for (const Point* x : xs) s += log_g0(*x, th);
      return s;
    };
    Point prop = current;
    for (double& v : prop) v += sample_normal(0.0, scale, rng);
    const double lr = target(prop) - target(current);
    return std::log(uniform01(rng)) < lr ? prop : current;
  }
};

/// Gaussian likelihood with known covariance and a Gaussian prior on the mean.
class GaussianMeanModel : public LikelihoodModel {
 public:
  GaussianMeanModel(Eigen::MatrixXd likelihood_cov, Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov)
      : sigma_(std::move(likelihood_cov)), mu0_(std::move(prior_mean)), sigma0_(std::move(prior_cov)) {
    const auto d = mu0_.size();
    if (d < 1 || sigma_.rows() != d || sigma_.cols() != d || sigma0_.rows() != d || sigma0_.cols() != d) {
      throw ConfigError("GaussianMeanModel: dimension mismatch");
    }
    sigma_llt_.compute(sigma_);
    sigma0_llt_.compute(sigma0_);
    if (sigma_llt_.info() != Eigen::Success || sigma0_llt_.info() != Eigen::Success) {
      throw ConfigError("GaussianMeanModel: covariance not positive definite");
    }
    sigma_inv_ = sigma_llt_.solve(Eigen::MatrixXd::Identity(d, d));
    sigma0_inv_ = sigma0_llt_.solve(Eigen::MatrixXd::Identity(d, d));
    log_det_sigma_ = 2.0 * sigma_llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
    log_det_sigma0_ = 2.0 * sigma0_llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  /// x ~ N(theta, sigma^2), theta ~ N(mu0, tau^2).
  static GaussianMeanModel univariate(double sigma, double mu0, double tau) {
    if (!(sigma > 0.0) || !(tau > 0.0)) throw ConfigError("GaussianMeanModel: scales must be positive");
    return {Eigen::MatrixXd::Constant(1, 1, sigma * sigma), Eigen::VectorXd::Constant(1, mu0),
            Eigen::MatrixXd::Constant(1, 1, tau * tau)};
  }

  /// Isotropic version in d dimensions.
  static GaussianMeanModel isotropic(int d, double sigma, double mu0, double tau) {
    if (d < 1 || !(sigma > 0.0) || !(tau > 0.0)) throw ConfigError("GaussianMeanModel: bad isotropic parameters");
    return {Eigen::MatrixXd::Identity(d, d) * sigma * sigma, Eigen::VectorXd::Constant(d, mu0),
            Eigen::MatrixXd::Identity(d, d) * tau * tau};
  }

  [[nodiscard]] int data_dimension() const override { return static_cast<int>(mu0_.size()); }
  [[nodiscard]] bool conjugate() const override { return true; }

  [[nodiscard]] double log_g0(const Point& x, const Point& theta) const override {
    return log_normal(x, theta, sigma_llt_, log_det_sigma_);
  }
  [[nodiscard]] double log_prior(const Point& theta) const override {
    return log_normal(theta, to_point(mu0_), sigma0_llt_, log_det_sigma0_);
  }
  Point sample_prior(Rng& rng) const override { return draw(mu0_, sigma0_llt_, rng); }

  /// Posterior mean and covariance of theta given observations.
  [[nodiscard]] std::pair<Eigen::VectorXd, Eigen::MatrixXd> posterior(const std::vector<const Point*>& xs) const {
    const auto d = mu0_.size();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    for (const Point* x : xs) sum += Eigen::Map<const Eigen::VectorXd>(x->data(), d);
    const Eigen::MatrixXd precision = sigma0_inv_ + static_cast<double>(xs.size()) * sigma_inv_;
    const Eigen::MatrixXd cov = precision.llt().solve(Eigen::MatrixXd::Identity(d, d));
    const Eigen::VectorXd mean = cov * (sigma0_inv_ * mu0_ + sigma_inv_ * sum);
    return {mean, cov};
  }

  Point sample_posterior(const std::vector<const Point*>& xs, const Point& /*current*/, Rng& rng) const override {
    if (xs.empty()) return sample_prior(rng);
    for (const Point* x : xs) {
      if (static_cast<int>(x->size()) != data_dimension()) throw DomainError("GaussianMeanModel: observation dimension");
    }
    const auto [mean, cov] = posterior(xs);
    return draw(mean, Eigen::LLT<Eigen::MatrixXd>(cov), rng);
  }

  Point sample_observation(const Point& theta, Rng& rng) const {
    return draw(Eigen::Map<const Eigen::VectorXd>(theta.data(), data_dimension()), sigma_llt_, rng);
  }

 private:
  static Point to_point(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

  static Point draw(const Eigen::VectorXd& mean, const Eigen::LLT<Eigen::MatrixXd>& llt, Rng& rng) {
    Eigen::VectorXd z(mean.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sample_normal(0.0, 1.0, rng);
    return to_point(mean + llt.matrixL() * z);
  }

  static double log_normal(const Point& x, const Point& m, const Eigen::LLT<Eigen::MatrixXd>& llt, double log_det) {
    const auto d = static_cast<Eigen::Index>(x.size());
    if (d != llt.rows() || static_cast<Eigen::Index>(m.size()) != d) throw DomainError("log_normal: dimension mismatch");
    const Eigen::VectorXd r =
        Eigen::Map<const Eigen::VectorXd>(x.data(), d) - Eigen::Map<const Eigen::VectorXd>(m.data(), d);
    const Eigen::VectorXd y = llt.matrixL().solve(r);
    return -0.5 * (y.squaredNorm() + log_det + static_cast<double>(d) * std::log(2.0 * M_PI));
  }

  Eigen::MatrixXd sigma_, sigma_inv_;
  Eigen::VectorXd mu0_;
  Eigen::MatrixXd sigma0_, sigma0_inv_;
  Eigen::LLT<Eigen::MatrixXd> sigma_llt_, sigma0_llt_;
  double log_det_sigma_ = 0.0, log_det_sigma0_ = 0.0;
};

// ---------------------------------------------------------------------------
// State

struct MixtureState {
  std::vector<Point> components;  // theta_k
  std::vector<double> jumps;      // J_k, all > threshold
  std::vector<int> allocations;   // s_i in [0, K)
  std::vector<double> slices;     // u_i in (0, J_{s_i}]
  double u_n = 1.0;               // latent relative mass
  double mass = 1.0;              // M
  double threshold = 0.0;         // L = min u

  [[nodiscard]] int k() const { return static_cast<int>(jumps.size()); }
  [[nodiscard]] std::size_t n() const { return allocations.size(); }

  [[nodiscard]] std::vector<int> counts() const {
    std::vector<int> c(jumps.size(), 0);
    for (int s : allocations) ++c[static_cast<std::size_t>(s)];
    return c;
  }

  [[nodiscard]] int occupied() const {
    const auto c = counts();
    return static_cast<int>(std::count_if(c.begin(), c.end(), [](int x) { return x > 0; }));
  }

  [[nodiscard]] double jump_sum() const { return std::accumulate(jumps.begin(), jumps.end(), 0.0); }

  [[nodiscard]] double occupied_jump_sum() const {
    const auto c = counts();
    double s = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] > 0) s += jumps[k];
    }
    return s;
  }
};

inline void to_json(nlohmann::json& j, const MixtureState& s) {
  j = {{"components", s.components}, {"jumps", s.jumps}, {"allocations", s.allocations}, {"slices", s.slices},
       {"U_N", s.u_n},           {"M", s.mass},         {"L", s.threshold}};
}

/// Throws InvariantError (with a state dump) if the state is inconsistent.
inline void check_invariants(const MixtureState& s, const char* where = "state") {
  auto fail = [&](const std::string& msg) {
    nlohmann::json dump = s;
    throw InvariantError(std::string(where) + ": " + msg + "; state = " + dump.dump());
  };
  if (s.components.size() != s.jumps.size()) fail("component/jump count mismatch");
  if (s.slices.size() != s.allocations.size()) fail("slice/allocation count mismatch");
  if (s.allocations.empty()) fail("no observations");
  if (!(s.u_n > 0.0) || !std::isfinite(s.u_n)) fail("U_N not positive");
  if (!(s.mass > 0.0) || !std::isfinite(s.mass)) fail("M not positive");
  const double mn = *std::min_element(s.slices.begin(), s.slices.end());
  if (s.threshold != mn) fail("L is not min(u)");
  for (std::size_t i = 0; i < s.allocations.size(); ++i) {
    const int c = s.allocations[i];
    if (c < 0 || c >= s.k()) fail("allocation out of range");
    if (!(s.slices[i] > 0.0) || s.slices[i] > s.jumps[static_cast<std::size_t>(c)]) fail("u_i outside (0, J_{s_i}]");
  }
  for (double j : s.jumps) {
    if (!(j > s.threshold) || !std::isfinite(j)) fail("jump not above L");
  }
}

// ---------------------------------------------------------------------------
// Conditional updates

namespace detail {

inline std::vector<std::vector<const Point*>> group_data(const MixtureState& s, const std::vector<Point>& data) {
  std::vector<std::vector<const Point*>> groups(s.jumps.size());
  for (std::size_t i = 0; i < data.size(); ++i) groups[static_cast<std::size_t>(s.allocations[i])].push_back(&data[i]);
  return groups;
}

/// Removes the listed components and relabels allocations.
inline void drop_components(MixtureState& s, const std::vector<bool>& drop) {
  std::vector<int> relabel(s.jumps.size(), -1);
  std::size_t w = 0;
  for (std::size_t k = 0; k < s.jumps.size(); ++k) {
    if (drop[k]) continue;
    relabel[k] = static_cast<int>(w);
    if (w != k) {
      s.jumps[w] = s.jumps[k];
      s.components[w] = std::move(s.components[k]);
    }
    ++w;
  }
  s.jumps.resize(w);
  s.components.resize(w);
  for (int& c : s.allocations) {
    c = relabel[static_cast<std::size_t>(c)];
    if (c < 0) throw InvariantError("drop_components: occupied component removed");
  }
}

}  // namespace detail

/// s_i from {k : J_k > u_i} with weights g_0(x_i | theta_k).
inline void sample_allocations(MixtureState& s, const std::vector<Point>& data, const LikelihoodModel& model,
                               Rng& rng) {
  if (data.size() != s.allocations.size()) throw DomainError("sample_allocations: data size mismatch");
  std::vector<double> logw;
  std::vector<int> cand;
  for (std::size_t i = 0; i < data.size(); ++i) {
    logw.clear();
    cand.clear();
    for (int k = 0; k < s.k(); ++k) {
      if (s.jumps[static_cast<std::size_t>(k)] > s.slices[i]) {
        cand.push_back(k);
        logw.push_back(model.log_g0(data[i], s.components[static_cast<std::size_t>(k)]));
      }
    }
    if (cand.empty()) throw InvariantError("sample_allocations: no jump exceeds u_i");
    if (cand.size() == 1) {
      s.allocations[i] = cand[0];
      continue;
    }
    s.allocations[i] = cand[sample_categorical_log(logw, rng)];
  }
}

/// Counters for the U_N rejection sampler.
struct LatentMassStats {
  long proposals = 0;
  long accepted = 0;
  long grid_fallbacks = 0;
};

namespace detail {

/// Inverse-CDF draw on a 2048-point grid in w = log U over the region
/// where the log density is within 40 of its maximum.
template <class G>
double grid_sample_log_scale(G g, double w0, Rng& rng) {
  constexpr int n = 2048;
  // Locate the maximum by walking uphill, then widen until the density has dropped.
  double step = 1.0, w = w0, gw = g(w);
  for (int it = 0; it < 400; ++it) {
    const double gr = g(w + step), gl = g(w - step);
    if (gr > gw) {
      w += step, gw = gr;
    } else if (gl > gw) {
      w -= step, gw = gl;
    } else if (step > 1e-3) {
      step *= 0.5;
    } else {
      break;
    }
  }
  double lo = w - 1.0, hi = w + 1.0;
  for (int it = 0; it < 200 && g(lo) > gw - 40.0; ++it) lo -= (w - lo);
  for (int it = 0; it < 200 && g(hi) > gw - 40.0; ++it) hi += (hi - w);
  const double h = (hi - lo) / n;
  std::vector<double> logm(n);
  for (int i = 0; i < n; ++i) logm[static_cast<std::size_t>(i)] = g(lo + (i + 0.5) * h);
  const std::size_t cell = sample_categorical_log(logm, rng);
  return std::exp(lo + (static_cast<double>(cell) + uniform01(rng)) * h);
}

}  // namespace detail

/// U_N from U^{N-1} exp{-U sum J} exp{-M truncated_exponent(U, L)}.
///
/// Rejection from Gamma(N, sum J); if 10^4 proposals pass without an
/// acceptance, a grid sampler takes over and a warning is logged.
inline void sample_latent_mass(MixtureState& s, double a, Rng& rng, LatentMassStats* stats = nullptr) {
  if (s.k() < 1) throw InvariantError("sample_latent_mass: no jumps");
  const double n = static_cast<double>(s.n());
  const double total = s.jump_sum();
  const double L = s.threshold;
  auto penalty = [&](double u) { return s.mass * truncated_exponent_unit(a, u, L); };
  constexpr long window = 10000;
  for (long t = 0; t < window; ++t) {
    const double u = sample_gamma(n, total, rng);
    if (stats) ++stats->proposals;
    if (!(u > 0.0)) continue;
    if (std::log(uniform01(rng)) <= -penalty(u)) {
      if (stats) ++stats->accepted;
      s.u_n = u;
      return;
    }
  }
  log::warn("sample_latent_mass: acceptance below 1e-4, using grid sampler");
  if (stats) ++stats->grid_fallbacks;
  auto g = [&](double w) {
    const double u = std::exp(w);
    return n * w - u * total - penalty(u);
  };
  s.u_n = detail::grid_sample_log_scale(g, std::log(n / total), rng);
}

/// theta_k from its conditional; empty components from the prior.
inline void sample_components(MixtureState& s, const std::vector<Point>& data, const LikelihoodModel& model,
                              Rng& rng) {
  const auto groups = detail::group_data(s, data);
  for (std::size_t k = 0; k < s.components.size(); ++k) {
    s.components[k] = model.sample_posterior(groups[k], s.components[k], rng);
  }
}

/// Occupied jumps from Gamma(n_k - a, 1 + U_N), slices integrated out.
/// Must be followed by sample_slices before anything reads u.
inline void sample_fixed_jumps(MixtureState& s, double a, Rng& rng) {
  const auto c = s.counts();
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k] > 0) s.jumps[k] = sample_gamma(c[k] - a, 1.0 + s.u_n, rng);
  }
}

/// u_i ~ Uniform(0, J_{s_i}], L = min u; unoccupied jumps at or below L are dropped.
inline void sample_slices(MixtureState& s, Rng& rng) {
  for (std::size_t i = 0; i < s.slices.size(); ++i) {
    // 1 - U with U in (0,1) keeps u in (0, J].
    s.slices[i] = s.jumps[static_cast<std::size_t>(s.allocations[i])] * (1.0 - uniform01(rng));
    if (!(s.slices[i] > 0.0)) s.slices[i] = std::numeric_limits<double>::min();
  }
  s.threshold = *std::min_element(s.slices.begin(), s.slices.end());
  const auto c = s.counts();
  std::vector<bool> drop(c.size(), false);
  bool any = false;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k] == 0 && !(s.jumps[k] > s.threshold)) drop[k] = any = true;
  }
  if (any) detail::drop_components(s, drop);
}

/// Replaces the unoccupied jumps by a fresh draw of the tilted Poisson
/// process above L: Poisson(M (1+U)^a |Q(-a, L(1+U))|) jumps with density
/// proportional to e^{-U t} rho_a(t) on (L, inf); components from the prior.
inline void sample_new_jumps(MixtureState& s, double a, const LikelihoodModel& model, Rng& rng,
                             JumpMethod method = JumpMethod::inverse_cdf) {
  if (!(s.threshold > 0.0)) throw InvariantError("sample_new_jumps: L must be positive");
  const auto c = s.counts();
  std::vector<bool> drop(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) drop[k] = c[k] == 0;
  detail::drop_components(s, drop);
  const long count = sample_poisson(s.mass * exp_tilted_tail_unit(a, s.u_n, s.threshold), rng);
  for (long j = 0; j < count; ++j) {
    double t = sample_tilted_jump_above(a, s.u_n, s.threshold, rng, method);
    // Inversion can round onto the boundary when L(1+U) is tiny.
    if (!(t > s.threshold)) t = std::nextafter(s.threshold, std::numeric_limits<double>::infinity());
    s.jumps.push_back(t);
    s.components.push_back(model.sample_prior(rng));
  }
}

/// Gamma(shape, rate) prior on M.
struct MassPrior {
  double shape = 1.0;
  double rate = 1.0;

  void validate() const {
    if (!(shape > 0.0) || !(rate > 0.0)) throw ConfigError("mass prior: shape and rate must be positive");
  }
};

/// M ~ Gamma(alpha + K, beta + |Q(-a, L)| + truncated_exponent_unit(U_N, L)), K counting all jumps above L.
inline void sample_mass(MixtureState& s, double a, const MassPrior& prior, Rng& rng) {
  prior.validate();
  const double integral = tail_mass_unit(a, s.threshold) + truncated_exponent_unit(a, s.u_n, s.threshold);
  s.mass = sample_gamma(prior.shape + s.k(), prior.rate + integral, rng);
}

/// Log of the joint density of the state and data at fixed M, up to a constant:
/// (N-1) log U - U sum J - M trunc(U, L) + sum_k log[rho_a(J_k)/tail(L)]
/// + sum_k log h(theta_k) + sum_i log g_0(x_i | theta_{s_i}); -inf if some u_i > J_{s_i}.
inline double log_joint(const MixtureState& s, const std::vector<Point>& data, const LikelihoodModel& model,
                        double a) {
  if (data.size() != s.allocations.size()) throw DomainError("log_joint: data size mismatch");
  const double n = static_cast<double>(s.n());
  double lp = (n - 1.0) * std::log(s.u_n) - s.u_n * s.jump_sum() -
              s.mass * truncated_exponent_unit(a, s.u_n, s.threshold);
  const double log_tail = log_tail_mass_unit(a, s.threshold);
  for (std::size_t k = 0; k < s.jumps.size(); ++k) {
    lp += log_levy_density_unit(a, s.jumps[k]) - log_tail + model.log_prior(s.components[k]);
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<std::size_t>(s.allocations[i]);
    if (s.slices[i] > s.jumps[c]) return -std::numeric_limits<double>::infinity();
    lp += model.log_g0(data[i], s.components[c]);
  }
  return lp;
}

// ---------------------------------------------------------------------------
// Chain driver

struct ChainConfig {
  double a = 0.5;
  double initial_mass = 1.0;
  bool learn_mass = true;  // false keeps M at initial_mass
  MassPrior mass_prior;
  int iterations = 1000;
  int burn_in = 0;
  int thin = 1;
  bool check_invariants = true;
  JumpMethod jump_method = JumpMethod::inverse_cdf;  // for unoccupied jumps

  void validate() const {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("chain: a must lie in (0,1)");
    if (!(initial_mass > 0.0)) throw ConfigError("chain: initial mass must be positive");
    mass_prior.validate();
    if (iterations < 1) throw ConfigError("chain: iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations) throw ConfigError("chain: burn-in must lie in [0, iterations)");
    if (thin < 1) throw ConfigError("chain: thinning must be positive");
  }
};

struct ChainRecord {
  int iter = 0;
  int k_occupied = 0;
  double mass = 0.0;
  double u_n = 0.0;
  double threshold = 0.0;
  double log_joint = 0.0;
  std::vector<int> allocations;  // relabelled by first appearance
};

inline void to_json(nlohmann::json& j, const ChainRecord& r) {
  j = {{"iter", r.iter}, {"K", r.k_occupied},         {"M", r.mass},
       {"U_N", r.u_n},   {"L", r.threshold},          {"log_joint", r.log_joint},
       {"allocations", r.allocations}};
}

inline void from_json(const nlohmann::json& j, ChainRecord& r) {
  j.at("iter").get_to(r.iter);
  j.at("K").get_to(r.k_occupied);
  j.at("M").get_to(r.mass);
  j.at("U_N").get_to(r.u_n);
  j.at("L").get_to(r.threshold);
  j.at("log_joint").get_to(r.log_joint);
  j.at("allocations").get_to(r.allocations);
}

/// Labels 0,1,2,... in order of first appearance.
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::vector<int> out(labels.size());
  std::vector<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == labels[i]; });
    if (it == seen.end()) {
      seen.emplace_back(labels[i], static_cast<int>(seen.size()));
      out[i] = seen.back().second;
    } else {
      out[i] = it->second;
    }
  }
  return out;
}

/// One component holding all data, J_1 ~ Gamma(N - a, 1), u_i ~ U(0, J_1].
inline MixtureState initial_state(const std::vector<Point>& data, const LikelihoodModel& model,
                                  const ChainConfig& cfg, Rng& rng) {
  if (data.empty()) throw DomainError("slice sampler: empty data");
  MixtureState s;
  const auto n = data.size();
  s.allocations.assign(n, 0);
  s.jumps = {sample_gamma(static_cast<double>(n) - cfg.a, 1.0, rng)};
  std::vector<const Point*> all;
  for (const auto& x : data) all.push_back(&x);
  s.components = {model.sample_posterior(all, model.sample_prior(rng), rng)};
  s.mass = cfg.learn_mass ? sample_gamma(cfg.mass_prior.shape, cfg.mass_prior.rate, rng) : cfg.initial_mass;
  s.u_n = static_cast<double>(n) / s.jumps[0];
  s.slices.resize(n);
  sample_slices(s, rng);
  return s;
}

/// One full sweep.
inline void sweep(MixtureState& s, const std::vector<Point>& data, const LikelihoodModel& model,
                  const ChainConfig& cfg, Rng& rng, LatentMassStats* stats = nullptr) {
  auto check = [&](const char* where) {
    if (cfg.check_invariants) check_invariants(s, where);
  };
  sample_allocations(s, data, model, rng);
  check("allocations");
  sample_latent_mass(s, cfg.a, rng, stats);
  check("latent mass");
  sample_components(s, data, model, rng);
  check("components");
  sample_fixed_jumps(s, cfg.a, rng);
  sample_slices(s, rng);
  check("fixed jumps and slices");
  sample_new_jumps(s, cfg.a, model, rng, cfg.jump_method);
  check("new jumps");
  if (cfg.learn_mass) sample_mass(s, cfg.a, cfg.mass_prior, rng);
  check("mass");
}

/// Runs the chain; `on_record` (if set) sees each kept record as it is produced.
inline std::vector<ChainRecord> run_chain(const std::vector<Point>& data, const LikelihoodModel& model,
                                          const ChainConfig& cfg, Rng& rng,
                                          const std::function<void(const ChainRecord&)>& on_record = {},
                                          MixtureState* final_state = nullptr) {
  cfg.validate();
  if (data.empty()) throw DomainError("run_chain: empty data");
  for (const auto& x : data) {
    if (static_cast<int>(x.size()) != model.data_dimension()) throw DomainError("run_chain: observation dimension");
    for (double v : x) {
      if (!std::isfinite(v)) throw DomainError("run_chain: non-finite observation");
    }
  }
  MixtureState s = initial_state(data, model, cfg, rng);
  LatentMassStats stats;
  std::vector<ChainRecord> out;
  for (int it = 1; it <= cfg.iterations; ++it) {
    sweep(s, data, model, cfg, rng, &stats);
    if (it <= cfg.burn_in || (it - cfg.burn_in) % cfg.thin != 0) continue;
    ChainRecord r;
    r.iter = it;
    r.k_occupied = s.occupied();
    r.mass = s.mass;
    r.u_n = s.u_n;
    r.threshold = s.threshold;
    r.log_joint = log_joint(s, data, model, cfg.a);
    if (!std::isfinite(r.log_joint)) {
      nlohmann::json dump = s;
      throw NumericalError("run_chain: non-finite log joint; state = " + dump.dump());
    }
    r.allocations = canonical_labels(s.allocations);
    if (on_record) on_record(r);
    out.push_back(std::move(r));
  }
  if (final_state) *final_state = std::move(s);
  return out;
}

/// Allocation of the record with the highest log joint.
inline std::vector<int> map_allocations(const std::vector<ChainRecord>& chain) {
  if (chain.empty()) throw DomainError("map_allocations: empty chain");
  const auto it = std::max_element(chain.begin(), chain.end(),
                                   [](const auto& x, const auto& y) { return x.log_joint < y.log_joint; });
  return it->allocations;
}

/// Adjusted Rand index of two labelings.
inline double adjusted_rand_index(const std::vector<int>& x, const std::vector<int>& y) {
  if (x.size() != y.size() || x.empty()) throw DomainError("adjusted_rand_index: size mismatch");
  const auto cx = canonical_labels(x), cy = canonical_labels(y);
  const int kx = *std::max_element(cx.begin(), cx.end()) + 1;
  const int ky = *std::max_element(cy.begin(), cy.end()) + 1;
  std::vector<double> table(static_cast<std::size_t>(kx * ky), 0.0), rows(kx, 0.0), cols(ky, 0.0);
  for (std::size_t i = 0; i < cx.size(); ++i) {
    table[static_cast<std::size_t>(cx[i] * ky + cy[i])] += 1.0;
    rows[static_cast<std::size_t>(cx[i])] += 1.0;
    cols[static_cast<std::size_t>(cy[i])] += 1.0;
  }
  auto c2 = [](double v) { return 0.5 * v * (v - 1.0); };
  double idx = 0.0, sr = 0.0, sc = 0.0;
  for (double v : table) idx += c2(v);
  for (double v : rows) sr += c2(v);
  for (double v : cols) sc += c2(v);
  const double expected = sr * sc / c2(static_cast<double>(cx.size()));
  const double top = 0.5 * (sr + sc);
  if (top == expected) return 1.0;
  return (idx - expected) / (top - expected);
}

}  // namespace nrmkit
