#pragma once

// End-to-end verification checks, one per acceptance criterion, plus the
// statistics helpers they share. Used by `nrmkit verify` and the acceptance
// binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include "json.hpp"

#include "nrmkit/dependency_ops.hpp"
#include "nrmkit/moments.hpp"
#include "nrmkit/ngg_posterior.hpp"
#include "nrmkit/slice_sampler.hpp"
#include "nrmkit/tak.hpp"

namespace nrmkit {

// ---------------------------------------------------------------------------
// Statistics helpers

namespace stats {

/// All set partitions of {0..n-1} as restricted growth strings.
inline std::vector<std::vector<int>> set_partitions(int n) {
  if (n < 0) throw DomainError("set_partitions: n must be non-negative");
  std::vector<std::vector<int>> out;
  if (n == 0) return {{}};
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == n) {
      out.push_back(labels);
      return;
    }
    for (int b = 0; b <= used; ++b) {
      labels[static_cast<std::size_t>(i)] = b;
      rec(i + 1, std::max(used, b + 1));
    }
  };
  rec(1, 1);
  return out;
}

/// Asymptotic Kolmogorov tail P(D_n > d) with Stephens' small-sample correction.
inline double kolmogorov_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  if (lam < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lam * lam);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

/// sup |F_n - F| for a sample against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw DomainError("ks_statistic: empty sample");
  std::sort(xs.begin(), xs.end());
  const double m = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, std::fabs(f - i / m), std::fabs(f - (i + 1) / m)});
  }
  return d;
}

struct TestOutcome {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline TestOutcome ks_test(const std::vector<double>& xs, const std::function<double(double)>& cdf) {
  const double d = ks_statistic(xs, cdf);
  return {d, kolmogorov_pvalue(d, xs.size())};
}

/// Pearson chi-square against expected counts; bins below 5 expected are pooled.
inline TestOutcome chi2_test(const std::vector<double>& observed, const std::vector<double>& expected) {
  if (observed.size() != expected.size()) throw DomainError("chi2_test: size mismatch");
  std::vector<double> o, e;
  double po = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    po += observed[i];
    pe += expected[i];
    if (pe >= 5.0) {
      o.push_back(po);
      e.push_back(pe);
      po = pe = 0.0;
    }
  }
  if (pe > 0.0 || po > 0.0) {
    if (e.empty()) return {0.0, 1.0};
    o.back() += po;
    e.back() += pe;
  }
  if (e.size() < 2) return {0.0, 1.0};
  double stat = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) stat += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
  const boost::math::chi_squared dist(static_cast<double>(e.size() - 1));
  return {stat, boost::math::cdf(boost::math::complement(dist, stat))};
}

/// Correlation of the two empirical CDFs over the pooled sample (PP-plot correlation).
inline double pp_correlation(std::vector<double> x, std::vector<double> y) {
  if (x.empty() || y.empty()) throw DomainError("pp_correlation: empty sample");
  std::vector<double> pool = x;
  pool.insert(pool.end(), y.begin(), y.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  std::vector<double> fx, fy;
  const std::size_t step = std::max<std::size_t>(1, pool.size() / 400);
  for (std::size_t i = 0; i < pool.size(); i += step) {
    fx.push_back(double(std::upper_bound(x.begin(), x.end(), pool[i]) - x.begin()) / double(x.size()));
    fy.push_back(double(std::upper_bound(y.begin(), y.end(), pool[i]) - y.begin()) / double(y.size()));
  }
  const auto m = static_cast<double>(fx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < fx.size(); ++i) mx += fx[i], my += fy[i];
  mx /= m, my /= m;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    sxy += (fx[i] - mx) * (fy[i] - my);
    sxx += (fx[i] - mx) * (fx[i] - mx);
    syy += (fy[i] - my) * (fy[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return fx == fy ? 1.0 : 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// CDF of a density known up to a constant, tabulated on a grid in log x.
class LogGridCdf {
 public:
  template <class LogDensity>
  LogGridCdf(LogDensity logf, double x_lo, double x_hi, int n = 4000)
      : w_lo_(std::log(x_lo)), h_((std::log(x_hi) - w_lo_) / n), cdf_(static_cast<std::size_t>(n) + 1, 0.0) {
    std::vector<double> lv(cdf_.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lv.size(); ++i) {
      const double w = w_lo_ + static_cast<double>(i) * h_;
      lv[i] = logf(std::exp(w)) + w;
      mx = std::max(mx, lv[i]);
    }
    for (std::size_t i = 1; i < lv.size(); ++i) {
      cdf_[i] = cdf_[i - 1] + 0.5 * h_ * (std::exp(lv[i - 1] - mx) + std::exp(lv[i] - mx));
    }
    for (double& c : cdf_) c /= cdf_.back();
  }

  double operator()(double x) const {
    if (!(x > 0.0)) return 0.0;
    const double pos = (std::log(x) - w_lo_) / h_;
    if (pos <= 0.0) return 0.0;
    if (pos >= static_cast<double>(cdf_.size() - 1)) return 1.0;
    const auto j = static_cast<std::size_t>(pos);
    return cdf_[j] + (pos - static_cast<double>(j)) * (cdf_[j + 1] - cdf_[j]);
  }

 private:
  double w_lo_, h_;
  std::vector<double> cdf_;
};

/// Ordinary least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("ols_slope: need two or more points");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxy / sxx;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
  if (xs.size() < 2) throw DomainError("mean_se: need two or more values");
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  v /= static_cast<double>(xs.size() - 1);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

}  // namespace stats

// ---------------------------------------------------------------------------
// Experiments shared by the CLI and the checks

/// Log-spaced integers in [lo, hi], deduplicated.
inline std::vector<int> log_grid(int lo, int hi, int points) {
  if (lo < 1 || hi < lo || points < 2) throw DomainError("log_grid: need 1 <= lo <= hi and points >= 2");
  std::vector<int> out;
  for (int i = 0; i < points; ++i) {
    const double t = std::log(lo) + (std::log(hi) - std::log(lo)) * i / (points - 1.0);
    const int v = static_cast<int>(std::lround(std::exp(t)));
    if (out.empty() || v != out.back()) out.push_back(v);
  }
  return out;
}

struct PowerLawRuns {
  NggParams params;
  int n = 0;
  std::vector<std::vector<int>> k_trajectories;  // K_n for n = 1..N, one per run
  std::vector<std::vector<int>> final_counts;    // cluster sizes at N, one per run
};

/// Independent sequential runs; run r uses substream(seed, r), so results do
/// not depend on the thread count.
inline PowerLawRuns power_law_runs(const NggParams& params, int n, int runs, std::uint64_t seed, int threads = 1) {
  params.validate();
  if (runs < 1) throw ConfigError("power law: runs must be positive");
  if (n < 2) throw ConfigError("power law: n must be at least 2");
  PowerLawRuns out{params, n, std::vector<std::vector<int>>(static_cast<std::size_t>(runs)),
                   std::vector<std::vector<int>>(static_cast<std::size_t>(runs))};
  auto work = [&](int first, int stride) {
    for (int r = first; r < runs; r += stride) {
      Rng rng = substream(seed, static_cast<std::uint64_t>(r));
      auto res = sequential_sample(params, n, rng);
      out.k_trajectories[static_cast<std::size_t>(r)] = std::move(res.k_trajectory);
      out.final_counts[static_cast<std::size_t>(r)] = std::move(res.stats.counts);
    }
  };
  threads = std::clamp(threads, 1, runs);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

/// Slope of log K_n on log n over [lo, hi] for one trajectory.
inline double log_log_slope(const std::vector<int>& k_trajectory, int lo, int hi, int points = 60) {
  if (hi > static_cast<int>(k_trajectory.size())) throw DomainError("log_log_slope: range beyond trajectory");
  std::vector<double> x, y;
  for (int n : log_grid(lo, hi, points)) {
    x.push_back(std::log(n));
    y.push_back(std::log(k_trajectory[static_cast<std::size_t>(n - 1)]));
  }
  return stats::ols_slope(x, y);
}

/// Three unit-variance Gaussian clusters in the plane centred on an equilateral
/// triangle of side 10; labels 0, 1, 2.
struct LabeledData {
  std::vector<Point> points;
  std::vector<int> labels;
};

inline LabeledData three_cluster_data(std::uint64_t seed, int per_cluster = 100) {
  const double cx[3] = {0.0, 10.0, 5.0}, cy[3] = {0.0, 0.0, 5.0 * std::sqrt(3.0)};
  Rng rng(seed);
  LabeledData out;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_cluster; ++i) {
      out.points.push_back({sample_normal(cx[c], 1.0, rng), sample_normal(cy[c], 1.0, rng)});
      out.labels.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checks

namespace verify {

struct CheckResult {
  int number = 0;
  std::string id;
  std::string title;
  bool passed = false;
  double measured = 0.0;   // headline statistic
  double threshold = 0.0;  // what it is compared with
  std::string detail;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const CheckResult& r) {
  j = {{"criterion", r.number}, {"id", r.id},         {"title", r.title},     {"passed", r.passed},
       {"measured", r.measured}, {"threshold", r.threshold}, {"detail", r.detail}, {"seed", r.seed},
       {"seconds", r.seconds},   {"extra", r.extra}};
}

struct CheckOptions {
  std::uint64_t seed = 20240601;
  int threads = 1;
  // Directory with three_clusters.csv and three_clusters_labels.csv; when
  // empty the recovery check generates equivalent data.
  std::string data_dir;
};

namespace detail {

inline double rel_diff(double x, double y) { return std::fabs(x - y) / std::max(std::fabs(y), 1e-300); }

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

// int_0^L (1 - e^{-vt}) rho_a(t) dt by direct quadrature in log t.
inline double truncated_exponent_quadrature(double a, double v, double L) {
  auto g = [&](double s) {
    const double t = L * std::exp(s);
    if (!(t > 0.0)) return 0.0;
    return -std::expm1(-v * t) * a / std::tgamma(1.0 - a) * std::pow(t, -a) * std::exp(-t);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      g, -std::numeric_limits<double>::infinity(), 0.0, 25, 1e-12);
}

inline MixtureState make_state(std::vector<double> jumps, std::vector<int> alloc, double u_n, double mass) {
  MixtureState s;
  s.jumps = std::move(jumps);
  s.components.assign(s.jumps.size(), Point{0.0});
  s.allocations = std::move(alloc);
  s.u_n = u_n;
  s.mass = mass;
  s.slices.resize(s.allocations.size());
  return s;
}

inline std::vector<Point> read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<Point> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    Point p;
    double v;
    while (is >> v) p.push_back(v);
    out.push_back(p);
  }
  return out;
}

inline std::vector<int> read_ints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<int> out;
  int v;
  while (in >> v) out.push_back(v);
  return out;
}

}  // namespace detail

/// Recursion-filled T table against quadrature, and T <= Gamma(K, M).
inline CheckResult check_tak(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{1, "tak", "T-table consistency"};
  r.threshold = 1e-6;
  double worst = 0.0;
  bool bounded = true;
  int cells = 0;
  for (auto [a, m] : {std::pair{0.3, 1.0}, {0.5, 2.0}, {0.7, 0.5}}) {
    TakTable table(a, m);
    table.fill(30, 10);
    for (int n = 1; n <= 30; ++n) {
      for (int k = 1; k <= std::min(n, 10); ++k) {
        const double lt = table.get(n, k).log_magnitude();
        const double lq = tak_quadrature(n, k, a, m).log_magnitude();
        worst = std::max(worst, std::fabs(std::expm1(lt - lq)));
        if (lt > log_gamma_upper(k, m) + 1e-12) bounded = false;
        ++cells;
      }
    }
  }
  r.seconds = timer.seconds();
  r.measured = worst;
  r.passed = worst <= r.threshold && bounded && r.seconds < 60.0;
  r.detail = std::to_string(cells) + " cells, max rel diff " + detail::fmt(worst) +
             (bounded ? ", all below Gamma(K,M)" : ", BOUND VIOLATED") + ", " + detail::fmt(r.seconds) + " s";
  r.extra = {{"cells", cells}, {"bounded", bounded}};
  r.seed = opt.seed;
  return r;
}

/// Partition probabilities summed over every set partition, N <= 6.
inline CheckResult check_partition(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{2, "partition", "Partition normalization"};
  r.threshold = 1e-6;
  const NggParams p{0.5, 1.0};
  nlohmann::json sums = nlohmann::json::array();
  double worst = 0.0;
  for (int n = 1; n <= 6; ++n) {
    double total = 0.0;
    for (const auto& labels : stats::set_partitions(n)) {
      total += std::exp(partition_log_probability(PartitionStats::from_labels(labels), p));
    }
    worst = std::max(worst, std::fabs(total - 1.0));
    sums.push_back(total);
  }
  r.measured = worst;
  r.passed = worst <= r.threshold;
  r.detail = "max |sum - 1| = " + detail::fmt(worst) + " over N = 1..6";
  r.extra = {{"sums", sums}};
  r.seed = opt.seed;
  r.seconds = timer.seconds();
  return r;
}

/// Conditional predictive weights integrated against the latent-mass
/// posterior, compared with the marginal weights. The exact mixing variable is
/// U_{N+1} given the first N allocations; mixing over U_N is reported too.
inline CheckResult check_conditional(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{3, "conditional", "Conditional vs marginal predictive weights"};
  r.threshold = 1e-5;
  struct Case {
    std::vector<int> counts;
    NggParams p;
  };
  const std::vector<Case> cases = {{{1}, {0.5, 1.0}},
                                   {{3, 2, 1}, {0.6, 0.7}},
                                   {{5, 1}, {0.5, 4.0}},
                                   {{1, 1, 1, 1}, {0.25, 1.5}},
                                   {{8, 5, 4, 2, 1}, {0.4, 3.0}}};
  auto integrate_u = [](const std::function<double(double)>& f) {
    auto g = [&](double s) {
      const double u = std::exp(s);
      if (!(u > 0.0) || !std::isfinite(u)) return 0.0;
      const double v = f(u) * u;
      return std::isfinite(v) ? v : 0.0;
    };
    const double inf = std::numeric_limits<double>::infinity();
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, -inf, inf, 25, 1e-13);
  };
  double worst = 0.0, worst_un = 0.0;
  for (const auto& c : cases) {
    const auto st = PartitionStats::from_counts(c.counts);
    const NextUPosterior next(st, c.p);
    const UnPosterior un(st, c.p);
    const auto marginal = predictive_weights(st, c.p);
    for (std::size_t j = 0; j < marginal.size(); ++j) {
      const double v = integrate_u([&](double u) {
        return conditional_predictive_weights(st, c.p, u)[j] * std::exp(next.log_density(u));
      });
      const double w = integrate_u([&](double u) {
        return conditional_predictive_weights(st, c.p, u)[j] * std::exp(un.log_density(u));
      });
      worst = std::max(worst, detail::rel_diff(v, marginal[j]));
      worst_un = std::max(worst_un, detail::rel_diff(w, marginal[j]));
    }
  }
  r.measured = worst;
  r.passed = worst <= r.threshold;
  r.detail = "5 cases, max rel diff " + detail::fmt(worst) + " mixing over U_{N+1}; mixing over U_N gives " +
             detail::fmt(worst_un);
  r.extra = {{"max_rel_diff_next_u", worst}, {"max_rel_diff_u_n", worst_un}};
  r.seed = opt.seed;
  r.seconds = timer.seconds();
  return r;
}

/// NGG partition probability mixed over M ~ Gamma(b/a, 1) against the PDP EPPF.
inline CheckResult check_pdp(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{4, "pdp", "PDP equivalence"};
  r.threshold = 1e-5;
  const double a = 0.5, b = 1.0;
  const boost::math::gamma_distribution<double> prior(b / a, 1.0);
  double worst = 0.0;
  int shapes = 0;
  for (int n = 1; n <= 6; ++n) {
    std::map<std::vector<int>, int> seen;
    for (const auto& labels : stats::set_partitions(n)) {
      auto counts = PartitionStats::from_labels(labels).counts;
      std::sort(counts.begin(), counts.end());
      if (seen[counts]++ > 0) continue;
      const auto st = PartitionStats::from_counts(counts);
      const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          [&](double m) {
            if (m <= 0.0) return 0.0;
            return std::exp(partition_log_probability(st, {a, m})) * boost::math::pdf(prior, m);
          },
          0.0, std::numeric_limits<double>::infinity(), 15, 1e-10);
      worst = std::max(worst, detail::rel_diff(v, std::exp(pdp_partition_log_probability(st, a, b))));
      ++shapes;
    }
  }
  r.measured = worst;
  r.passed = worst <= r.threshold;
  r.detail = std::to_string(shapes) + " block-size patterns, max rel diff " + detail::fmt(worst);
  r.seed = opt.seed;
  r.seconds = timer.seconds();
  return r;
}

/// Mean, DP variance, NGG variance (closed form, quadrature, Monte Carlo) and the large-M asymptote.
inline CheckResult check_moments(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{5, "moments", "Moments"};
  MomentQuery q;
  q.a = 0.5;
  q.mass = 1.0;
  q.p_b = 0.3;

  MomentQuery qm = q;
  qm.op = MomentOp::mean;
  qm.mass = 2.0;
  const auto mc_mean = monte_carlo_moments(qm, 10000, hash_keys({opt.seed, 51}), McMode::atoms, 1e-4);
  const double z_mean = z_score(0.3, mc_mean.mean, mc_mean.mean_se);

  MomentQuery qd = q;
  qd.family = LevyFamily::dp;
  qd.mass = 2.0;
  const double dp_rel = detail::rel_diff(nrm_variance(qd).value, 0.07);

  const auto var = nrm_variance(q);
  const double ngg_rel = detail::rel_diff(var.value, *var.closed_form);
  const auto mc_var = monte_carlo_moments(q, 100000, hash_keys({opt.seed, 52}));
  const double z_var = z_score(var.value, mc_var.second, mc_var.second_se);

  MomentQuery ql = q;
  ql.mass = 1e4;
  const double asym = 0.3 * 0.7 * 0.5 / (1e4 * 0.5);
  const double asym_rel = detail::rel_diff(*nrm_variance(ql).closed_form, asym);

  r.passed = z_mean < 3.0 && dp_rel <= 1e-8 && ngg_rel <= 1e-6 && z_var < 3.0 && asym_rel <= 0.02;
  r.measured = std::max(z_mean, z_var);
  r.threshold = 3.0;
  r.detail = "mean z " + detail::fmt(z_mean) + "; DP var rel " + detail::fmt(dp_rel) + "; NGG closed/quad rel " +
             detail::fmt(ngg_rel) + "; NGG var " + detail::fmt(var.value) + " vs MC " + detail::fmt(mc_var.second) +
             " (z " + detail::fmt(z_var) + "); asymptote rel " + detail::fmt(asym_rel);
  r.extra = {{"mean_mc", mc_mean.mean},     {"mean_se", mc_mean.mean_se}, {"dp_rel", dp_rel},
             {"ngg_closed_vs_quad", ngg_rel}, {"ngg_var", var.value},     {"ngg_var_mc", mc_var.second},
             {"ngg_var_se", mc_var.second_se}, {"asymptote_rel", asym_rel}};
  r.seed = opt.seed;
  r.seconds = timer.seconds();
  return r;
}

/// The three operator covariances against 1e5 exact Monte Carlo replicates.
inline CheckResult check_covariance(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{6, "covariance", "Operator covariances"};
  r.threshold = 3.0;
  std::vector<MomentQuery> qs(3);
  qs[0].op = MomentOp::superposition;
  qs[0].masses = {1.0, 1.0};
  qs[0].p_b = 0.3;
  qs[1].op = MomentOp::subsampling;
  qs[1].mass = 2.0;
  qs[1].q = 0.5;
  qs[1].p_b = 0.3;
  qs[2].op = MomentOp::transition;
  qs[2].mass = 1.0;
  qs[2].p_b = 0.3;
  qs[2].p_a = 0.2;
  double worst = 0.0;
  std::string text;
  nlohmann::json cases = nlohmann::json::array();
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto res = evaluate_moment(qs[i]);
    const auto mc = monte_carlo_moments(qs[i], 100000, hash_keys({opt.seed, 60 + i}));
    const double z = z_score(res.value, mc.second, mc.second_se);
    worst = std::max(worst, z);
    text += std::string(i ? "; " : "") + to_string(qs[i].op) + " " + detail::fmt(res.value) + " vs MC " +
            detail::fmt(mc.second) + " +- " + detail::fmt(mc.second_se) + " (z " + detail::fmt(z) + ")";
    nlohmann::json c = {{"op", to_string(qs[i].op)}, {"formula", res.value}, {"mc", mc.second},
                        {"mc_se", mc.second_se},    {"z", z}};
    if (res.as_printed) c["as_printed"] = *res.as_printed;
    cases.push_back(c);
  }
  r.measured = worst;
  r.passed = worst < r.threshold && timer.seconds() < 600.0;
  r.detail = text;
  r.extra = {{"cases", cases}};
  r.seed = opt.seed;
  r.seconds = timer.seconds();
  return r;
}

/// Growth of the number of clusters: log-log slope for a = 0.5, and K_n / log n
/// for the Dirichlet-process surrogate a = 0.01, M = 10 / a.
inline CheckResult check_powerlaw(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{7, "powerlaw", "Power-law growth"};
  r.threshold = 0.05;
  const auto ngg = power_law_runs({0.5, 10.0}, 100000, 20, hash_keys({opt.seed, 71}), opt.threads);
  double slope = 0.0;
  for (const auto& tr : ngg.k_trajectories) slope += log_log_slope(tr, 1000, 100000);
  slope /= 20.0;
  const auto dp = power_law_runs({0.01, 10.0 / 0.01}, 100000, 20, hash_keys({opt.seed, 72}), opt.threads);
  double ratio = 0.0;
  for (const auto& tr : dp.k_trajectories) ratio += tr.back() / std::log(1e5);
  ratio /= 20.0;
  const double slope_err = std::fabs(slope - 0.5);
  const double ratio_rel = std::fabs(ratio - 10.0) / 10.0;
  r.seconds = timer.seconds();
  r.measured = slope;
  r.passed = slope_err <= 0.05 && ratio_rel <= 0.25 && r.seconds < 300.0;
  r.detail = "mean slope " + detail::fmt(slope) + " (target 0.5 +- 0.05); DP surrogate K_n/log n " +
             detail::fmt(ratio) + " (target 10 +- 25%); " + detail::fmt(r.seconds) + " s";
  r.extra = {{"slope", slope}, {"dp_ratio", ratio}};
  r.seed = opt.seed;
  return r;
}

/// Stationarity of each conditional update, the Geweke joint test, and
/// recovery of three separated clusters.
inline CheckResult check_slice(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{8, "slice", "Slice sampler correctness"};
  const auto model = GaussianMeanModel::univariate(1.0, 0.0, 3.0);
  std::vector<std::pair<std::string, stats::TestOutcome>> tests;
  const int draws = 20000;

  {  // allocations: chi-square over the components above the slice
    Rng rng(hash_keys({opt.seed, 81}));
    auto s = detail::make_state({1.0, 0.8, 0.2, 0.6}, {0}, 1.0, 1.0);
    s.components = {Point{0.5}, Point{-1.0}, Point{0.0}, Point{1.5}};
    s.slices = {0.3};
    s.threshold = 0.3;
    const std::vector<Point> data{{0.2}};
    std::vector<double> obs(4, 0.0), expct(4, 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      if (s.jumps[k] > 0.3) total += expct[k] = std::exp(model.log_g0(data[0], s.components[k]));
    }
    for (int t = 0; t < draws; ++t) {
      sample_allocations(s, data, model, rng);
      obs[static_cast<std::size_t>(s.allocations[0])] += 1.0;
    }
    std::vector<double> o, e;
    bool forbidden = false;
    for (std::size_t k = 0; k < 4; ++k) {
      if (expct[k] > 0.0) {
        o.push_back(obs[k]);
        e.push_back(expct[k] / total * draws);
      } else if (obs[k] > 0.0) {
        forbidden = true;
      }
    }
    auto outcome = stats::chi2_test(o, e);
    if (forbidden) outcome.p_value = 0.0;
    tests.emplace_back("allocations", outcome);
  }
  {  // latent relative mass: KS against the quadrature-normalized target
    const double a = 0.5, L = 0.05;
    Rng rng(hash_keys({opt.seed, 82}));
    auto s = detail::make_state({0.8, 0.5, 0.3}, std::vector<int>(10, 0), 1.0, 1.0);
    s.threshold = L;
    const double total = s.jump_sum();
    std::vector<double> us;
    for (int t = 0; t < draws; ++t) {
      sample_latent_mass(s, a, rng);
      us.push_back(s.u_n);
    }
    const stats::LogGridCdf cdf(
        [&](double u) { return 9.0 * std::log(u) - u * total - detail::truncated_exponent_quadrature(a, u, L); },
        1e-2, 200.0, 3000);
    tests.emplace_back("latent_mass", stats::ks_test(us, cdf));
  }
  {  // components: conjugate normal posterior
    Rng rng(hash_keys({opt.seed, 83}));
    const std::vector<Point> data{{0.3}, {1.7}, {2.2}, {-0.4}};
    auto s = detail::make_state({1.0}, {0, 0, 0, 0}, 1.0, 1.0);
    const double prec = 1.0 / 9.0 + 4.0;
    const boost::math::normal post(3.8 / prec, std::sqrt(1.0 / prec));
    std::vector<double> th;
    for (int t = 0; t < draws; ++t) {
      sample_components(s, data, model, rng);
      th.push_back(s.components[0][0]);
    }
    tests.emplace_back("components", stats::ks_test(th, [&](double x) { return boost::math::cdf(post, x); }));
  }
  {  // fixed jumps: Gamma(n_k - a, 1 + U_N)
    Rng rng(hash_keys({opt.seed, 84}));
    auto s = detail::make_state({1.0}, {0, 0, 0, 0, 0}, 2.0, 1.0);
    const boost::math::gamma_distribution<double> g(4.5, 1.0 / 3.0);
    std::vector<double> js;
    for (int t = 0; t < draws; ++t) {
      sample_fixed_jumps(s, 0.5, rng);
      js.push_back(s.jumps[0]);
    }
    tests.emplace_back("fixed_jumps", stats::ks_test(js, [&](double x) { return boost::math::cdf(g, x); }));
  }
  {  // slices: Uniform(0, J)
    Rng rng(hash_keys({opt.seed, 85}));
    auto s = detail::make_state({2.0, 0.5}, {0, 1}, 1.0, 1.0);
    std::vector<double> u0;
    for (int t = 0; t < draws; ++t) {
      s.jumps = {2.0, 0.5};
      s.components = {Point{0.0}, Point{0.0}};
      sample_slices(s, rng);
      u0.push_back(s.slices[0]);
    }
    tests.emplace_back("slices", stats::ks_test(u0, [](double x) { return std::clamp(x / 2.0, 0.0, 1.0); }));
  }
  {  // new jumps: Poisson count and tilted Levy sizes
    const double a = 0.4, U = 2.0, L = 0.05, M = 5.0;
    Rng rng(hash_keys({opt.seed, 86}));
    std::vector<double> sizes;
    std::vector<double> count_hist;
    for (int t = 0; t < draws; ++t) {
      auto s = detail::make_state({3.0}, {0}, U, M);
      s.threshold = L;
      sample_new_jumps(s, a, model, rng);
      const auto c = static_cast<std::size_t>(s.k() - 1);
      if (count_hist.size() <= c) count_hist.resize(c + 1, 0.0);
      count_hist[c] += 1.0;
      if (sizes.size() < static_cast<std::size_t>(draws)) sizes.insert(sizes.end(), s.jumps.begin() + 1, s.jumps.end());
    }
    const double denom = exp_tilted_tail_unit(a, U, L);
    tests.emplace_back("new_jump_sizes", stats::ks_test(sizes, [&](double x) {
                         return x <= L ? 0.0 : 1.0 - exp_tilted_tail_unit(a, U, x) / denom;
                       }));
    const boost::math::poisson_distribution<double> pois(M * denom);
    count_hist.resize(count_hist.size() + 10, 0.0);
    std::vector<double> expct(count_hist.size());
    for (std::size_t c = 0; c < expct.size(); ++c) expct[c] = draws * boost::math::pdf(pois, static_cast<double>(c));
    expct.back() += draws * boost::math::cdf(boost::math::complement(pois, static_cast<double>(expct.size() - 1)));
    tests.emplace_back("new_jump_count", stats::chi2_test(count_hist, expct));
  }
  {  // mass: Gamma(alpha + K, beta + tail + truncated exponent)
    const double a = 0.5, U = 1.0, L = 0.1;
    Rng rng(hash_keys({opt.seed, 87}));
    auto s = detail::make_state({0.5, 0.4, 0.3}, {0}, U, 1.0);
    s.threshold = L;
    const double integral = tail_mass_unit(a, L) + detail::truncated_exponent_quadrature(a, U, L);
    const boost::math::gamma_distribution<double> g(4.0, 1.0 / (1.0 + integral));
    std::vector<double> ms;
    for (int t = 0; t < draws; ++t) {
      sample_mass(s, a, MassPrior{1.0, 1.0}, rng);
      ms.push_back(s.mass);
    }
    tests.emplace_back("mass", stats::ks_test(ms, [&](double x) { return boost::math::cdf(g, x); }));
  }
  const double alpha = 0.01 / static_cast<double>(tests.size());
  double min_p = 1.0;
  nlohmann::json tj = nlohmann::json::object();
  for (const auto& [name, o] : tests) {
    min_p = std::min(min_p, o.p_value);
    tj[name] = {{"statistic", o.statistic}, {"p_value", o.p_value}};
  }
  const bool stationary = min_p > alpha;

  // Geweke: forward simulation from the prior against successive-conditional Gibbs.
  const int n = 20;
  const double a = 0.5;
  ChainConfig cfg;
  cfg.a = a;
  cfg.mass_prior = MassPrior{10.0, 5.0};
  cfg.jump_method = JumpMethod::rejection;
  cfg.check_invariants = false;
  Rng rng(hash_keys({opt.seed, 88}));
  auto forward = [&](MixtureState& s, std::vector<Point>& x) {
    const NggParams p{a, sample_gamma(cfg.mass_prior.shape, cfg.mass_prior.rate, rng)};
    const auto seq = sequential_sample(p, n, rng);
    s = MixtureState{};
    s.mass = p.mass;
    s.allocations = seq.labels;
    s.u_n = UnPosterior(seq.stats, p).sample(rng);
    for (int c : seq.stats.counts) {
      s.jumps.push_back(sample_gamma(c - a, 1.0 + s.u_n, rng));
      s.components.push_back(model.sample_prior(rng));
    }
    x.clear();
    for (int i = 0; i < n; ++i) {
      x.push_back(model.sample_observation(s.components[static_cast<std::size_t>(s.allocations[i])], rng));
    }
  };
  struct Trace {
    std::vector<double> k, m, u, sj;
    void add(const MixtureState& s) {
      k.push_back(s.occupied());
      m.push_back(s.mass);
      u.push_back(std::log(s.u_n));
      sj.push_back(s.occupied_jump_sum());
    }
  } fwd, gibbs;
  MixtureState s;
  std::vector<Point> x;
  for (int i = 0; i < 3000; ++i) {
    forward(s, x);
    fwd.add(s);
  }
  forward(s, x);
  s.slices.resize(n);
  sample_slices(s, rng);
  sample_new_jumps(s, a, model, rng, cfg.jump_method);
  for (int i = 0; i < 20000; ++i) {
    sweep(s, x, model, cfg, rng);
    for (int j = 0; j < n; ++j) {
      x[static_cast<std::size_t>(j)] =
          model.sample_observation(s.components[static_cast<std::size_t>(s.allocations[j])], rng);
    }
    gibbs.add(s);
  }
  const double pp = std::min({stats::pp_correlation(fwd.k, gibbs.k), stats::pp_correlation(fwd.m, gibbs.m),
                              stats::pp_correlation(fwd.u, gibbs.u), stats::pp_correlation(fwd.sj, gibbs.sj)});

  // Three-cluster recovery.
  LabeledData ld;
  if (!opt.data_dir.empty()) {
    ld.points = detail::read_points(opt.data_dir + "/three_clusters.csv");
    ld.labels = detail::read_ints(opt.data_dir + "/three_clusters_labels.csv");
  } else {
    ld = three_cluster_data(hash_keys({opt.seed, 89}));
  }
  ChainConfig ccfg;
  ccfg.iterations = 2000;
  ccfg.burn_in = 500;
  Rng crng(hash_keys({opt.seed, 90}));
  detail::Timer ctimer;
  const auto chain = run_chain(ld.points, GaussianMeanModel::isotropic(2, 1.0, 5.0, 10.0), ccfg, crng);
  const double csecs = ctimer.seconds();
  std::map<int, int> k_hist;
  for (const auto& rec : chain) ++k_hist[rec.k_occupied];
  const int mode =
      std::max_element(k_hist.begin(), k_hist.end(), [](auto& p, auto& q) { return p.second < q.second; })->first;
  const double ari = adjusted_rand_index(map_allocations(chain), ld.labels);
  const bool recovered = mode == 3 && ari >= 0.9 && csecs < 60.0;

  r.passed = stationary && pp > 0.99 && recovered;
  r.measured = min_p;
  r.threshold = alpha;
  r.detail = "min conditional p " + detail::fmt(min_p) + " (Bonferroni level " + detail::fmt(alpha) +
             "); Geweke min PP corr " + detail::fmt(pp) + "; recovery mode K " + std::to_string(mode) + ", ARI " +
             detail::fmt(ari) + ", " + detail::fmt(csecs) + " s";
  r.extra = {{"conditional_tests", tj}, {"geweke_pp_min", pp}, {"mode_k", mode}, {"ari", ari},
             {"recovery_seconds", csecs}};
  r.seed = opt.seed;
  r.seconds = timer.seconds();
  return r;
}

/// Normal forms of random expressions, the thinned Laplace functional, and the
/// two constructions of the dependent chain.
inline CheckResult check_algebra(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{9, "algebra", "Operator algebra"};
  r.threshold = 3.0;
  Rng rng(hash_keys({opt.seed, 91}));
  const auto base = BaseMeasure::gaussian(1);
  const auto kernels = default_kernels(base, 0.2);

  std::function<OperatorExpr(int, int&)> random_expr = [&](int max_depth, int& next_leaf) {
    const double u = uniform01(rng);
    if (max_depth <= 1 || u < 0.2) return OperatorExpr::leaf("m" + std::to_string(next_leaf++));
    if (u < 0.45) {
      const double q = std::round(100.0 * (0.2 + 0.8 * uniform01(rng))) / 100.0;
      return OperatorExpr::subsample(q, random_expr(max_depth - 1, next_leaf));
    }
    if (u < 0.7) {
      return OperatorExpr::transition(uniform01(rng) < 0.5 ? "rw" : "resample", random_expr(max_depth - 1, next_leaf));
    }
    std::vector<OperatorExpr> cs;
    const int n = 2 + static_cast<int>(uniform01(rng) * 2.0);
    for (int i = 0; i < n; ++i) cs.push_back(random_expr(max_depth - 1, next_leaf));
    return OperatorExpr::superpose(std::move(cs));
  };
  int expr_failures = 0;
  for (int i = 0; i < 100; ++i) {
    int next_leaf = 1;
    const auto e = random_expr(5, next_leaf);
    const auto nf = normal_form(e);
    bool ok = e.depth() <= 5 && normal_form(nf) == nf && is_normal_form(nf);
    std::map<std::string, CrmRealization> leaves;
    for (const auto& id : leaf_ids(e)) leaves.emplace(id, sample_crm_threshold({0.5, 2.0}, base, 0.01, rng));
    KeyedRandomness k1(hash_keys({opt.seed, 92, static_cast<std::uint64_t>(i)}));
    KeyedRandomness k2(hash_keys({opt.seed, 92, static_cast<std::uint64_t>(i)}));
    ok = ok && same_atoms(atom_set(evaluate_expr(e, leaves, kernels, k1)),
                          atom_set(evaluate_expr(nf, leaves, kernels, k2)), 0.0);
    if (!ok) ++expr_failures;
  }

  // Thinned mass: keyed subsampling of realizations with jumps above z; the
  // expected mass of the jumps below z is added back.
  const NggParams p{0.5, 2.0};
  const double q = 0.6, z = 1e-6;
  const int reps = 20000;
  const std::vector<double> vs{0.5, 1.0, 2.0};
  std::vector<std::vector<double>> samples(vs.size(), std::vector<double>(static_cast<std::size_t>(reps)));
  const double small = q * p.mass * small_jump_mean_unit(p.a, z);
  for (int rep = 0; rep < reps; ++rep) {
    Rng rr = substream(hash_keys({opt.seed, 93}), static_cast<std::uint64_t>(rep));
    KeyedRandomness kr(hash_keys({opt.seed, 94, static_cast<std::uint64_t>(rep)}));
    const auto c = sample_crm_threshold(p, base, z, rr, JumpMethod::rejection);
    const double mass = subsample(c, q, kr).total_mass() + small;
    for (std::size_t i = 0; i < vs.size(); ++i) samples[i][static_cast<std::size_t>(rep)] = std::exp(-vs[i] * mass);
  }
  double worst_z = 0.0;
  nlohmann::json lap = nlohmann::json::array();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const auto ms = stats::mean_se(samples[i]);
    const double exact = std::exp(-q * p.mass * laplace_exponent_unit(p.a, vs[i]));
    const double zz = std::fabs(ms.mean - exact) / ms.se;
    worst_z = std::max(worst_z, zz);
    lap.push_back({{"v", vs[i]}, {"mc", ms.mean}, {"se", ms.se}, {"exact", exact}, {"z", zz}});
  }

  // Dependent chain, m = 3, q = 0.7: CRM construction, NRM construction, and
  // the normal form of the nested expression.
  int chain_failures = 0;
  const auto& rw = kernels.at("rw");
  const auto expr = parse_expr(
      "(superpose (transition rw (subsample 0.7 (superpose (transition rw (subsample 0.7 (leaf m1))) (leaf m2))))"
      " (leaf m3))");
  const auto nf = normal_form(expr);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<CrmRealization> crms;
    std::vector<NrmRealization> nrms;
    std::map<std::string, CrmRealization> leaves;
    for (int j = 1; j <= 3; ++j) {
      crms.push_back(sample_crm_threshold({0.5, 2.0}, base, 0.01, rng));
      nrms.push_back(normalize(crms.back()));
      leaves.emplace("m" + std::to_string(j), crms.back());
    }
    const auto key = hash_keys({opt.seed, 95, static_cast<std::uint64_t>(rep)});
    KeyedRandomness kc(key), kn(key), ke(key);
    const auto crm_side = normalize(dependent_chain_crm(crms, 0.7, rw, kc));
    const auto nrm_side = dependent_chain_nrm(nrms, 0.7, rw, kn);
    const auto mix = normalize(evaluate_expr(nf, leaves, kernels, ke));
    if (!same_atoms(atom_set(crm_side), atom_set(nrm_side), 1e-12) ||
        !same_atoms(atom_set(mix), atom_set(crm_side), 1e-12)) {
      ++chain_failures;
    }
  }

  r.measured = worst_z;
  r.passed = expr_failures == 0 && worst_z < 3.0 && chain_failures == 0;
  r.detail = "expression failures " + std::to_string(expr_failures) + "/100; Laplace max z " + detail::fmt(worst_z) +
             "; chain mismatches " + std::to_string(chain_failures) + "/25";
  r.extra = {{"expression_failures", expr_failures}, {"laplace", lap}, {"chain_failures", chain_failures}};
  r.seed = opt.seed;
  r.seconds = timer.seconds();
  return r;
}

/// Acceptance posteriors: the worked example against enumeration, and the
/// hierarchical form with two epochs against the single-epoch form.
inline CheckResult check_zposterior(const CheckOptions& opt) {
  detail::Timer timer;
  CheckResult r{10, "zposterior", "z posteriors"};
  r.threshold = 1e-12;
  // Two-case enumeration: atom 1 holds all n = 3 observations; atom 0 is either in or out.
  const double q = 0.5;
  const double in = q * std::pow(2.0, -3.0), out = (1.0 - q) * 1.0;
  const double oracle = in / (in + out);
  const double got = subsample_z_posterior({1.0, 1.0}, {1, 1}, q, 0, 3, 0).value;
  const double example_err = std::fabs(got - oracle);

  Rng rng(hash_keys({opt.seed, 101}));
  double worst = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t m0 = 1 + static_cast<std::size_t>(uniform01(rng) * 4.0);
    const std::size_t m1 = 1 + static_cast<std::size_t>(uniform01(rng) * 3.0);
    std::vector<std::vector<double>> jumps(2);
    std::vector<std::vector<int>> z(2);
    for (std::size_t i = 0; i < m0; ++i) {
      jumps[0].push_back(0.05 + 2.0 * uniform01(rng));
      z[0].push_back(uniform01(rng) < 0.6 ? 1 : 0);
    }
    for (std::size_t i = 0; i < m1; ++i) {
      jumps[1].push_back(0.05 + 2.0 * uniform01(rng));
      z[1].push_back(1);
    }
    const double qq = 0.05 + 0.9 * uniform01(rng);
    const std::size_t k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(m0));
    const int n = 1 + static_cast<int>(uniform01(rng) * 10.0);
    std::vector<double> flat = jumps[0];
    flat.insert(flat.end(), jumps[1].begin(), jumps[1].end());
    std::vector<int> fz = z[0];
    fz.insert(fz.end(), z[1].begin(), z[1].end());
    const auto h = hierarchical_z_posterior(2, 1, jumps, z, qq, k, 0, n);
    const auto s = subsample_z_posterior(flat, fz, qq, k, n, 0);
    worst = std::max(worst, std::fabs(h.value - s.value) / s.value);
    if (h.degenerate != s.degenerate) worst = std::numeric_limits<double>::infinity();
  }
  r.measured = std::max(example_err, worst);
  r.passed = example_err <= 1e-12 && worst <= 1e-14;
  r.detail = "example " + detail::fmt(got) + " vs enumeration " + detail::fmt(oracle) + " (|diff| " +
             detail::fmt(example_err) + "); single-epoch reduction max rel diff " + detail::fmt(worst) +
             " over 500 cases";
  r.extra = {{"example", got}, {"enumeration", oracle}, {"reduction_max_rel", worst}};
  r.seed = opt.seed;
  r.seconds = timer.seconds();
  return r;
}

struct CheckInfo {
  int number;
  std::string id;
  std::function<CheckResult(const CheckOptions&)> run;
};

inline const std::vector<CheckInfo>& all_checks() {
  static const std::vector<CheckInfo> checks = {
      {1, "tak", check_tak},           {2, "partition", check_partition}, {3, "conditional", check_conditional},
      {4, "pdp", check_pdp},           {5, "moments", check_moments},     {6, "covariance", check_covariance},
      {7, "powerlaw", check_powerlaw}, {8, "slice", check_slice},         {9, "algebra", check_algebra},
      {10, "zposterior", check_zposterior}};
  return checks;
}

/// Looks a check up by id or number.
inline const CheckInfo& find_check(const std::string& key) {
  for (const auto& c : all_checks()) {
    if (c.id == key || std::to_string(c.number) == key) return c;
  }
  throw ConfigError("unknown check '" + key + "'");
}

/// Runs a check; library errors become a failed result instead of escaping.
inline CheckResult run_check(const CheckInfo& info, const CheckOptions& opt) {
  detail::Timer timer;
  try {
    return info.run(opt);
  } catch (const std::exception& e) {
    CheckResult r{info.number, info.id, info.id};
    r.detail = std::string("error: ") + e.what();
    r.seed = opt.seed;
    r.seconds = timer.seconds();
    return r;
  }
}

inline std::string summary_line(const CheckResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << " [" << r.number << "] " << r.title << ": " << r.detail;
  return os.str();
}

}  // namespace verify
}  // namespace nrmkit
