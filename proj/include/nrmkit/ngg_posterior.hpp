#pragma once

// Posterior quantities for the normalized generalized Gamma process given a
// partition of N observations into K clusters: marginal likelihood,
// predictive weights (marginal and conditional on the latent relative mass
// U_N), the U_N posterior and sampler, the reduced joints used by samplers,
// the posterior measure decomposition and the sequential generative scheme.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "nrmkit/error.hpp"
#include "nrmkit/levy.hpp"
#include "nrmkit/quadrature.hpp"
#include "nrmkit/random.hpp"
#include "nrmkit/special_math.hpp"
#include "nrmkit/tak.hpp"

namespace nrmkit {

/// N observations grouped into K clusters of sizes n_1..n_K.
struct PartitionStats {
  int n = 0;
  std::vector<int> counts;

  [[nodiscard]] int k() const { return static_cast<int>(counts.size()); }

  void validate() const {
    if (n < 1) throw DomainError("PartitionStats: N must be positive");
    long total = 0;
    for (int c : counts) {
      if (c < 1) throw DomainError("PartitionStats: cluster counts must be positive");
      total += c;
    }
    if (total != n) throw DomainError("PartitionStats: counts do not sum to N");
  }

  static PartitionStats from_counts(std::vector<int> counts) {
    PartitionStats s;
    for (int c : counts) s.n += c;
    s.counts = std::move(counts);
    s.validate();
    return s;
  }

  /// From cluster labels 0..K-1 (every label in range must occur).
  static PartitionStats from_labels(const std::vector<int>& labels) {
    PartitionStats s;
    for (int l : labels) {
      if (l < 0) throw DomainError("PartitionStats: negative label");
      if (l >= s.k()) s.counts.resize(static_cast<std::size_t>(l) + 1, 0);
      ++s.counts[static_cast<std::size_t>(l)];
    }
    s.n = static_cast<int>(labels.size());
    s.validate();
    return s;
  }
};

inline void to_json(nlohmann::json& j, const PartitionStats& s) { j = {{"N", s.n}, {"counts", s.counts}}; }
inline void from_json(const nlohmann::json& j, PartitionStats& s) {
  s.n = j.at("N").get<int>();
  s.counts = j.at("counts").get<std::vector<int>>();
  s.validate();
}

namespace detail {

// log (1-a)_{n-1} = log Gamma(n-a) - log Gamma(1-a).
inline double log_cluster_factor(int n, double a) { return std::lgamma(n - a) - std::lgamma(1.0 - a); }

inline double sum_log_cluster_factors(const PartitionStats& s, double a) {
  double acc = 0.0;
  for (int c : s.counts) acc += log_cluster_factor(c, a);
  return acc;
}

// log T^{N,K}_{a,M}, from `table` when given (its a and M must match).
inline double log_tak(int n, int k, const NggParams& p, TakTable* table) {
  if (table != nullptr) {
    if (table->a() != p.a || table->mass() != p.mass) throw DomainError("T-table parameters do not match");
    return table->get(n, k).log_magnitude();
  }
  if (n == 1) return log_gamma_upper(k, p.mass);
  return tak_quadrature(n, k, p.a, p.mass).log_magnitude();
}

inline double log1p_exp(double w) { return w > 0.0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w)); }

inline double sigmoid(double w) {
  return w >= 0.0 ? 1.0 / (1.0 + std::exp(-w)) : std::exp(w) / (1.0 + std::exp(w));
}

}  // namespace detail

/// log p(X, partition) = M + (K-1) log a + log T^{N,K} - log Gamma(N)
///                       + sum_k log (1-a)_{n_k-1} + sum_k log h(X*_k).
inline double marginal_log_likelihood(const PartitionStats& stats, const NggParams& params,
                                      const std::vector<double>& log_base_densities, TakTable* table = nullptr) {
  stats.validate();
  params.validate();
  if (static_cast<int>(log_base_densities.size()) != stats.k()) {
    throw DomainError("marginal_log_likelihood: need one base density per cluster");
  }
  double h = 0.0;
  for (double v : log_base_densities) h += v;
  const int k = stats.k();
  return params.mass + (k - 1) * std::log(params.a) + detail::log_tak(stats.n, k, params, table) -
         std::lgamma(static_cast<double>(stats.n)) + detail::sum_log_cluster_factors(stats, params.a) + h;
}

/// Same with h = 1 (the exchangeable partition probability).
inline double partition_log_probability(const PartitionStats& stats, const NggParams& params,
                                        TakTable* table = nullptr) {
  return marginal_log_likelihood(stats, params, std::vector<double>(stats.counts.size(), 0.0), table);
}

/// Predictive probabilities of a new cluster (index 0) and of each existing
/// cluster k (index k), given the partition of the first N observations.
inline std::vector<double> predictive_weights(const PartitionStats& stats, const NggParams& params,
                                              TakTable* table = nullptr) {
  stats.validate();
  params.validate();
  const int k = stats.k();
  const double a = params.a;
  std::vector<double> logw(static_cast<std::size_t>(k) + 1);
  logw[0] = std::log(a) + detail::log_tak(stats.n + 1, k + 1, params, table) -
            detail::log_tak(stats.n + 1, k, params, table);
  for (int i = 0; i < k; ++i) logw[static_cast<std::size_t>(i) + 1] = std::log(stats.counts[i] - a);
  const double norm = log_sum_exp(logw);
  std::vector<double> w(logw.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - norm);
  return w;
}

/// Predictive weights given U_N = u: new cluster proportional to M a (1+u)^a,
/// cluster k proportional to n_k - a.
inline std::vector<double> conditional_predictive_weights(const PartitionStats& stats, const NggParams& params,
                                                          double u) {
  stats.validate();
  params.validate();
  if (!(u >= 0.0)) throw DomainError("conditional_predictive_weights: u must be non-negative");
  const double a = params.a;
  std::vector<double> w(stats.counts.size() + 1);
  w[0] = params.mass * a * std::pow(1.0 + u, a);
  double total = w[0];
  for (std::size_t i = 0; i < stats.counts.size(); ++i) total += w[i + 1] = stats.counts[i] - a;
  for (double& x : w) x /= total;
  return w;
}

/// Posterior of the latent relative mass U_N given the partition:
/// density a M^K / T^{N,K} u^{N-1} (1+u)^{Ka-N} e^{-M(1+u)^a}.
class UnPosterior {
 public:
  // The normalizing constant needs T^{N,K}; it is computed on first use so
  // that sampling alone stays cheap.
  UnPosterior(const PartitionStats& stats, const NggParams& params, TakTable* table = nullptr)
      : UnPosterior(stats.n, stats.k(), params, table) {
    stats.validate();
  }

  /// Depends on the partition only through N and K.
  UnPosterior(int n, int k, const NggParams& params, TakTable* table = nullptr)
      : n_(n), k_(k), a_(params.a), m_(params.mass), table_(table) {
    params.validate();
    if (n < 1 || k < 1 || k > n) throw DomainError("UnPosterior: need 1 <= K <= N");
  }

  [[nodiscard]] double log_density(double u) const {
    if (!(u > 0.0)) throw DomainError("un_posterior_logdensity: u must be positive");
    return log_normalizer() + log_kernel_w(std::log(u)) - std::log(u);
  }

  /// Unnormalized log density of W = log U_N (includes the Jacobian u).
  [[nodiscard]] double log_kernel_w(double w) const {
    const double l1p = detail::log1p_exp(w);
    return n_ * w + (k_ * a_ - n_) * l1p - m_ * std::exp(a_ * l1p);
  }
  [[nodiscard]] double log_kernel_w_d1(double w) const {
    const double s = detail::sigmoid(w);
    return n_ + (k_ * a_ - n_) * s - m_ * a_ * std::exp(a_ * detail::log1p_exp(w)) * s;
  }
  [[nodiscard]] double log_kernel_w_d2(double w) const {
    const double s = detail::sigmoid(w);
    const double g = std::exp(a_ * detail::log1p_exp(w));
    return (k_ * a_ - n_) * s * (1.0 - s) - m_ * a_ * g * (a_ * s * s + s * (1.0 - s));
  }
  [[nodiscard]] double log_normalizer() const {
    if (!log_norm_) {
      log_norm_ = std::log(a_) + k_ * std::log(m_) - detail::log_tak(n_, k_, NggParams{a_, m_}, table_);
    }
    return *log_norm_;
  }

  /// Exact draw (adaptive rejection sampling in log u, where the density is
  /// log-concave). `w_hint` is a starting guess for log u, e.g. the previous draw.
  double sample(Rng& rng, double w_hint = 0.0) const {
    const double w0 = std::isfinite(w_hint) ? w_hint : 0.0;
    const double curv = -log_kernel_w_d2(w0);
    const double scale = std::clamp(curv > 0.0 ? 1.0 / std::sqrt(curv) : 1.0, 1e-3, 10.0);
    const double w = sample_log_concave([this](double x) { return log_kernel_w(x); },
                                        [this](double x) { return log_kernel_w_d1(x); }, w0, scale, rng);
    return std::exp(w);
  }

 private:
  int n_, k_;
  double a_, m_;
  TakTable* table_;
  mutable std::optional<double> log_norm_;
};

inline double un_posterior_logdensity(double u, const PartitionStats& stats, const NggParams& params,
                                      TakTable* table = nullptr) {
  return UnPosterior(stats, params, table).log_density(u);
}

inline double sample_un(const PartitionStats& stats, const NggParams& params, Rng& rng) {
  return UnPosterior(stats, params).sample(rng);
}

/// Distribution of U_{N+1} given the partition of the first N items, with the
/// allocation of item N+1 summed out:
/// proportional to u^N (1+u)^{Ka-N-1} e^{-M(1+u)^a} (M a (1+u)^a + N - K a).
///
/// The conditional predictive weights are the allocation probabilities of
/// item N+1 given this variable, so integrating them against this density
/// gives the marginal predictive weights.
class NextUPosterior {
 public:
  NextUPosterior(const PartitionStats& stats, const NggParams& params, TakTable* table = nullptr)
      : n_(stats.n), k_(stats.k()), a_(params.a), m_(params.mass), c_(stats.n - stats.k() * params.a),
        table_(table) {
    stats.validate();
    params.validate();
  }

  /// Unnormalized log density of W = log U_{N+1}.
  [[nodiscard]] double log_kernel_w(double w) const {
    const double s = detail::log1p_exp(w);
    const double x = m_ * a_ * std::exp(a_ * s);
    return (n_ + 1) * w + (k_ * a_ - n_ - 1) * s - x / a_ + std::log(x + c_);
  }
  [[nodiscard]] double log_kernel_w_d1(double w) const {
    const double sg = detail::sigmoid(w);
    const double x = m_ * a_ * std::exp(a_ * detail::log1p_exp(w));
    return (n_ + 1) + (k_ * a_ - n_ - 1) * sg + (-x + a_ * x / (x + c_)) * sg;
  }

  /// log of the normalizer (T^{N+1,K+1} + (N-Ka)/a T^{N+1,K}) / M^K.
  [[nodiscard]] double log_normalizer() const {
    if (!log_norm_) {
      const NggParams p{a_, m_};
      const double t1 = detail::log_tak(n_ + 1, k_ + 1, p, table_);
      const double t0 = std::log(c_ / a_) + detail::log_tak(n_ + 1, k_, p, table_);
      log_norm_ = log_add_exp(t1, t0) - k_ * std::log(m_);
    }
    return *log_norm_;
  }

  [[nodiscard]] double log_density(double u) const {
    if (!(u > 0.0)) throw DomainError("NextUPosterior: u must be positive");
    return log_kernel_w(std::log(u)) - std::log(u) - log_normalizer();
  }

  /// Exact draw. The density is log-concave in log u when
  /// (M a + N - K a)^2 >= a (N - K a); otherwise a rejection step proposes from
  /// the U posterior for N+1 items in K+1 clusters.
  double sample(Rng& rng, double w_hint = 0.0) const {
    const double w0 = std::isfinite(w_hint) ? w_hint : 0.0;
    const double ma = m_ * a_;
    if ((ma + c_) * (ma + c_) >= a_ * c_) {
      const double w = sample_log_concave([this](double x) { return log_kernel_w(x); },
                                          [this](double x) { return log_kernel_w_d1(x); }, w0, 1.0, rng);
      return std::exp(w);
    }
    const UnPosterior proposal(n_ + 1, k_ + 1, NggParams{a_, m_});
    for (int i = 0; i < 1000000; ++i) {
      const double u = proposal.sample(rng, w0);
      if (uniform01(rng) * (ma + c_) <= ma + c_ * std::pow(1.0 + u, -a_)) return u;
    }
    throw NumericalError("NextUPosterior: rejection sampler did not terminate");
  }

 private:
  int n_, k_;
  double a_, m_, c_;
  TakTable* table_;
  mutable std::optional<double> log_norm_;
};

/// p(partition | U_N = u) over all partitions of N items:
/// W^K prod (1-a)_{n_k-1} / sum_j W^j S^N_{j,a}, with W = M a (1+u)^a.
inline double conditional_partition_log_probability(const PartitionStats& stats, const NggParams& params,
                                                    double u) {
  stats.validate();
  params.validate();
  if (!(u >= 0.0)) throw DomainError("conditional_partition_log_probability: u must be non-negative");
  const double log_w = std::log(params.mass * params.a) + params.a * std::log1p(u);
  const auto row = stirling_table(params.a).log_row(stats.n);
  std::vector<double> terms(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) terms[j] = (j + 1.0) * log_w + row[j];
  return stats.k() * log_w + detail::sum_log_cluster_factors(stats, params.a) - log_sum_exp(terms);
}

/// Prior distribution of the number of clusters K_N: entry k-1 holds
/// log p(K_N = k) = M + (k-1) log a + log T^{N,k} - log Gamma(N) + log S^N_{k,a}.
inline std::vector<double> cluster_count_log_distribution(int n, const NggParams& params,
                                                          TakTable* table = nullptr) {
  params.validate();
  if (n < 1) throw DomainError("cluster_count_log_distribution: N must be positive");
  const auto row = stirling_table(params.a).log_row(n);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    out[k - 1] = params.mass + (k - 1) * std::log(params.a) + detail::log_tak(n, k, params, table) -
                 std::lgamma(static_cast<double>(n)) + row[k - 1];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequential generative scheme

enum class SequentialScheme {
  conditional,  // draw U_{n+1} given the first n items, then use the conditional weights
  marginal,     // T-ratio predictive weights (practical for small N)
};

struct SequentialResult {
  PartitionStats stats;
  std::vector<int> k_trajectory;  // K_n for n = 1..N
  std::vector<int> labels;        // cluster of each item, in arrival order
};

/// Draws a partition of N items one item at a time from the NGG predictive rule.
/// The marginal scheme reads T values from `table` when given, else from a
/// private table.
inline SequentialResult sequential_sample(const NggParams& params, int n_total, Rng& rng,
                                          SequentialScheme scheme = SequentialScheme::conditional,
                                          TakTable* table = nullptr) {
  params.validate();
  if (n_total < 1) throw DomainError("sequential_sample: N must be positive");
  const double a = params.a;
  SequentialResult out;
  out.stats.n = 1;
  out.stats.counts = {1};
  out.labels.reserve(static_cast<std::size_t>(n_total));
  out.labels.push_back(0);
  out.k_trajectory.reserve(static_cast<std::size_t>(n_total));
  out.k_trajectory.push_back(1);

  std::optional<TakTable> own_table;
  if (scheme == SequentialScheme::marginal && table == nullptr) table = &own_table.emplace(params.a, params.mass);
  if (table != nullptr && (table->a() != params.a || table->mass() != params.mass)) {
    throw DomainError("sequential_sample: T-table parameters do not match");
  }
  double w = 0.0;  // log U_n, carried over as the next starting point

  for (int n = 1; n < n_total; ++n) {
    const int k = out.stats.k();
    // Probability that item n+1 opens a new cluster.
    double p_new;
    if (scheme == SequentialScheme::conditional) {
      w = std::log(NextUPosterior(out.stats, params).sample(rng, w));
      const double w0 = params.mass * a * std::exp(a * detail::log1p_exp(w));
      p_new = w0 / (w0 + n - k * a);
    } else {
      const double log_ratio = std::log(a) + table->get(n + 1, k + 1).log_magnitude() -
                               table->get(n + 1, k).log_magnitude();
      const double r = std::exp(log_ratio);
      p_new = r / (r + n - k * a);
    }
    int label;
    if (uniform01(rng) < p_new) {
      label = k;
      out.stats.counts.push_back(1);
    } else {
      // Cluster c with probability proportional to n_c - a: pick a previous
      // item uniformly, keep its cluster with probability (n_c - a) / n_c.
      for (;;) {
        const auto idx = static_cast<std::size_t>(uniform01(rng) * n);
        const int c = out.labels[std::min(idx, static_cast<std::size_t>(n - 1))];
        const int nc = out.stats.counts[static_cast<std::size_t>(c)];
        if (uniform01(rng) * nc < nc - a) {
          label = c;
          break;
        }
      }
      ++out.stats.counts[static_cast<std::size_t>(label)];
    }
    out.labels.push_back(label);
    out.stats.n = n + 1;
    out.k_trajectory.push_back(out.stats.k());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Posterior measure given U_N

struct PosteriorMeasureSample {
  NrmRealization measure;
  double t_mass = 0.0;        // total of the jumps drawn for the non-cluster part
  double j_plus = 0.0;        // total mass on the observed cluster locations
  std::vector<double> p;      // split of j_plus across clusters
  double truncation_bias = 0.0;  // expected mass of the jumps not drawn
};

/// Draws the posterior random measure given the partition and U_N = u:
/// mu = T/(T+J+) mu' + J+/(T+J+) sum_k p_k delta_{X*_k}, where mu' has Levy
/// density (M a / Gamma(1-a)) s^{-a-1} e^{-(1+u)s} truncated to its k_max
/// largest jumps, J+ ~ Gamma(N - K a, 1+u) and p ~ Dirichlet(n_k - a).
inline PosteriorMeasureSample posterior_measure_sample(const PartitionStats& stats, const NggParams& params,
                                                       double u, const BaseMeasure& base,
                                                       const std::vector<Point>& cluster_locations, Rng& rng,
                                                       int k_max = 10000) {
  stats.validate();
  params.validate();
  if (!(u >= 0.0)) throw DomainError("posterior_measure_sample: u must be non-negative");
  const double a = params.a;
  const double shape = stats.n - stats.k() * a;
  if (!(shape > 0.0)) throw DomainError("posterior_measure_sample: need N - K a > 0");
  if (!cluster_locations.empty() && static_cast<int>(cluster_locations.size()) != stats.k()) {
    throw DomainError("posterior_measure_sample: need one location per cluster");
  }
  const double tilt = 1.0 + u;
  // s' = (1+u) s has the untilted unit density with mass M (1+u)^a.
  const double scaled_mass = params.mass * std::pow(tilt, a);
  const auto jumps = sample_largest_jumps(a, scaled_mass, k_max, rng);

  PosteriorMeasureSample out;
  out.j_plus = sample_gamma(shape, tilt, rng);
  std::vector<double> alpha(stats.counts.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = stats.counts[i] - a;
  out.p = sample_dirichlet(alpha, rng);

  std::vector<double> masses;
  std::vector<Point> locations;
  std::vector<std::uint64_t> ids;
  for (double j : jumps) {
    masses.push_back(j / tilt);
    out.t_mass += j / tilt;
    locations.push_back(base.sample(rng));
    ids.push_back(rng());
  }
  out.truncation_bias = scaled_mass * small_jump_mean_unit(a, jumps.empty() ? 0.0 : jumps.back()) / tilt;
  for (std::size_t i = 0; i < out.p.size(); ++i) {
    masses.push_back(out.j_plus * out.p[i]);
    locations.push_back(cluster_locations.empty() ? Point{} : cluster_locations[i]);
    ids.push_back(rng());
  }
  const double total = out.t_mass + out.j_plus;
  out.measure.total_mass_before_normalization = total;
  for (double m : masses) out.measure.weights.push_back(m / total);
  out.measure.locations = std::move(locations);
  out.measure.ids = std::move(ids);
  return out;
}

/// Joint density of the partition, data and U_N with the jumps integrated out:
/// u^{N-1} (1+u)^{Ka-N} (M a)^K e^{M - M(1+u)^a} prod (1-a)_{n_k-1} h(X*_k).
/// With `jumps` (one per cluster) the jumps are kept instead:
/// u^{N-1} (M a / Gamma(1-a))^K e^{M - M(1+u)^a} prod J_k^{n_k-a-1} e^{-(1+u)J_k} h(X*_k).
inline double reduced_posterior_logjoint(const PartitionStats& stats, const NggParams& params, double u,
                                         const std::vector<double>& log_base_densities,
                                         const std::optional<std::vector<double>>& jumps = std::nullopt) {
  stats.validate();
  params.validate();
  if (!(u > 0.0)) throw DomainError("reduced_posterior_logjoint: u must be positive");
  if (static_cast<int>(log_base_densities.size()) != stats.k()) {
    throw DomainError("reduced_posterior_logjoint: need one base density per cluster");
  }
  const double a = params.a, m = params.mass;
  const int n = stats.n, k = stats.k();
  double h = 0.0;
  for (double v : log_base_densities) h += v;
  const double common = (n - 1) * std::log(u) + m - m * std::pow(1.0 + u, a) + h;
  if (!jumps) {
    return common + (k * a - n) * std::log1p(u) + k * std::log(m * a) +
           detail::sum_log_cluster_factors(stats, a);
  }
  if (static_cast<int>(jumps->size()) != k) throw DomainError("reduced_posterior_logjoint: need K jumps");
  double acc = common + k * (std::log(m * a) - std::lgamma(1.0 - a));
  for (int i = 0; i < k; ++i) {
    const double j = (*jumps)[static_cast<std::size_t>(i)];
    if (!(j > 0.0)) throw DomainError("reduced_posterior_logjoint: jumps must be positive");
    acc += (stats.counts[static_cast<std::size_t>(i)] - a - 1.0) * std::log(j) - (1.0 + u) * j;
  }
  return acc;
}

/// Pitman-Yor (two-parameter Poisson-Dirichlet) partition probability:
/// prod_{j=1}^{K-1} (b + j a) / (b+1)_{N-1} prod (1-a)_{n_k-1}.
inline double pdp_partition_log_probability(const PartitionStats& stats, double a, double b) {
  stats.validate();
  if (!(a > 0.0 && a < 1.0)) throw DomainError("pdp_partition_log_probability: a must lie in (0,1)");
  if (!(b > -a)) throw DomainError("pdp_partition_log_probability: need b > -a");
  double acc = 0.0;
  for (int j = 1; j < stats.k(); ++j) acc += std::log(b + j * a);
  acc -= std::lgamma(b + stats.n) - std::lgamma(b + 1.0);
  return acc + detail::sum_log_cluster_factors(stats, a);
}

}  // namespace nrmkit
