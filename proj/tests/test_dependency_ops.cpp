#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "nrmkit/dependency_ops.hpp"
#include "oracles.hpp"

using namespace nrmkit;

namespace {

constexpr double kZ = 1e-3;

// Laplace exponent of the jumps above z, per unit mass.
double psi_above(double a, double v, double z) {
  return laplace_exponent_unit(a, v) - truncated_exponent_unit(a, v, z);
}

// E[exp(-v X)] by Monte Carlo with a standard error.
template <class Draw>
oracle::MeanSe laplace_mc(Draw draw, double v, int reps) {
  std::vector<double> xs(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) xs[static_cast<std::size_t>(r)] = std::exp(-v * draw(r));
  return oracle::mean_se(xs);
}

double mass_where(const CrmRealization& c, const std::function<bool(const Point&)>& in) {
  double s = 0.0;
  for (const auto& at : c.atoms) {
    if (in(at.location)) s += at.jump;
  }
  return s;
}

// Random expression over fresh leaves; depth <= max_depth.
OperatorExpr random_expr(Rng& rng, int max_depth, int& next_leaf) {
  const double u = uniform01(rng);
  if (max_depth <= 1 || u < 0.2) return OperatorExpr::leaf("m" + std::to_string(next_leaf++));
  if (u < 0.45) {
    const double q = std::round(100.0 * (0.2 + 0.8 * uniform01(rng))) / 100.0;
    return OperatorExpr::subsample(q, random_expr(rng, max_depth - 1, next_leaf));
  }
  if (u < 0.7) {
    return OperatorExpr::transition(uniform01(rng) < 0.5 ? "rw" : "resample",
                                    random_expr(rng, max_depth - 1, next_leaf));
  }
  std::vector<OperatorExpr> cs;
  const int n = 2 + static_cast<int>(uniform01(rng) * 2.0);
  for (int i = 0; i < n; ++i) cs.push_back(random_expr(rng, max_depth - 1, next_leaf));
  return OperatorExpr::superpose(std::move(cs));
}

std::map<std::string, CrmRealization> realize_leaves(const OperatorExpr& e, const BaseMeasure& base, Rng& rng) {
  std::map<std::string, CrmRealization> out;
  for (const auto& id : leaf_ids(e)) out.emplace(id, sample_crm_threshold({0.5, 2.0}, base, 0.01, rng));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Single operators: Laplace functionals

TEST(Operators, SuperpositionAddsExponents) {
  const NggParams p1{0.5, 1.0}, p2{0.3, 2.0};
  const auto base = BaseMeasure::uniform_cube(1);
  const double v = 0.7;
  Rng rng(1);
  const auto ms = laplace_mc(
      [&](int) {
        const auto c = superpose({sample_crm_threshold(p1, base, kZ, rng), sample_crm_threshold(p2, base, kZ, rng)});
        return c.total_mass();
      },
      v, 6000);
  const double exact = std::exp(-p1.mass * psi_above(p1.a, v, kZ) - p2.mass * psi_above(p2.a, v, kZ));
  EXPECT_LT(std::fabs(ms.mean - exact), 3.0 * ms.se) << ms.mean << " vs " << exact;
}

TEST(Operators, SubsamplingScalesLevyMeasure) {
  const NggParams p{0.5, 3.0};
  const auto base = BaseMeasure::uniform_cube(1);
  const double v = 1.3, q = 0.4;
  Rng rng(2);
  const auto plain = laplace_mc(
      [&](int) { return subsample(sample_crm_threshold(p, base, kZ, rng), q, rng).total_mass(); }, v, 6000);
  const auto keyed = laplace_mc(
      [&](int r) {
        KeyedRandomness k(static_cast<std::uint64_t>(r) + 1000);
        return subsample(sample_crm_threshold(p, base, kZ, rng), q, k).total_mass();
      },
      v, 6000);
  const double exact = std::exp(-q * p.mass * psi_above(p.a, v, kZ));
  EXPECT_LT(std::fabs(plain.mean - exact), 3.0 * plain.se) << plain.mean << " vs " << exact;
  EXPECT_LT(std::fabs(keyed.mean - exact), 3.0 * keyed.se) << keyed.mean << " vs " << exact;
}

TEST(Operators, LocationDependentSubsampling) {
  const NggParams p{0.5, 3.0};
  const auto base = BaseMeasure::uniform_cube(1);
  const double v = 1.0;
  Rng rng(3);
  // q(x) = x: thinned Levy measure has mass M * int_0^1 x dx = M/2.
  const auto ms = laplace_mc(
      [&](int) {
        return subsample(sample_crm_threshold(p, base, kZ, rng), [](const Point& x) { return x[0]; }, rng)
            .total_mass();
      },
      v, 6000);
  const double exact = std::exp(-0.5 * p.mass * psi_above(p.a, v, kZ));
  EXPECT_LT(std::fabs(ms.mean - exact), 3.0 * ms.se);
  EXPECT_THROW(subsample(sample_crm_threshold({0.5, 50.0}, base, 0.01, rng), [](const Point&) { return 1.5; }, rng),
               DomainError);
}

TEST(Operators, TransitionPushesBaseForward) {
  const NggParams p{0.4, 2.0};
  const auto base = BaseMeasure::gaussian(1);
  const double sd = 0.8, v = 1.5;
  const auto kernel = TransitionKernel::gaussian_random_walk(sd);
  Rng rng(4);
  const auto ms = laplace_mc(
      [&](int) {
        const auto c = point_transition(sample_crm_threshold(p, base, kZ, rng), kernel, rng);
        return mass_where(c, [](const Point& x) { return x[0] > 1.0; });
      },
      v, 6000);
  // New base is N(0, 1 + sd^2).
  const boost::math::normal_distribution<double> h(0.0, std::sqrt(1.0 + sd * sd));
  const double share = boost::math::cdf(boost::math::complement(h, 1.0));
  const double exact = std::exp(-share * p.mass * psi_above(p.a, v, kZ));
  EXPECT_LT(std::fabs(ms.mean - exact), 3.0 * ms.se) << ms.mean << " vs " << exact;
}

TEST(Operators, ResampleKernelAndIdentity) {
  const auto base = BaseMeasure::uniform_cube(2);
  Rng rng(5);
  const auto c = sample_crm_threshold({0.5, 4.0}, base, 0.01, rng);
  const auto same = point_transition(c, TransitionKernel::identity(), rng);
  EXPECT_TRUE(same_atoms(atom_set(c), atom_set(same)));
  const auto moved = point_transition(c, TransitionKernel::resample_from(BaseMeasure::gaussian(2, 10.0)), rng);
  ASSERT_EQ(moved.atoms.size(), c.atoms.size());
  for (std::size_t i = 0; i < c.atoms.size(); ++i) {
    EXPECT_EQ(moved.atoms[i].jump, c.atoms[i].jump);
    EXPECT_EQ(moved.atoms[i].id, c.atoms[i].id);
    EXPECT_GT(moved.atoms[i].location[0], 3.0);
  }
  EXPECT_THROW(TransitionKernel::gaussian_random_walk(0.0), ConfigError);
}

TEST(Operators, Validation) {
  Rng rng(6);
  const auto c = sample_crm_threshold({0.5, 1.0}, BaseMeasure::uniform_cube(1), 0.1, rng);
  EXPECT_THROW(subsample(c, 1.2, rng), DomainError);
  EXPECT_THROW(superpose(std::vector<CrmRealization>{}), DomainError);
  EXPECT_THROW(superpose({c, sample_crm_threshold({0.5, 1.0}, BaseMeasure::uniform_cube(2), 0.1, rng)}),
               DomainError);
  EXPECT_TRUE(subsample(c, 0.0, rng).atoms.empty());
  EXPECT_EQ(subsample(c, 1.0, rng).atoms.size(), c.atoms.size());
}

// Operating on the CRM then normalizing equals normalizing then operating.
TEST(Operators, CommuteWithNormalization) {
  const auto base = BaseMeasure::gaussian(1);
  const auto kernel = TransitionKernel::gaussian_random_walk(0.3);
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto c1 = sample_crm_threshold({0.5, 5.0}, base, 0.01, rng);
    const auto c2 = sample_crm_threshold({0.3, 3.0}, base, 0.01, rng);
    const auto seed = static_cast<std::uint64_t>(rep);
    {
      KeyedRandomness kc(seed), kn(seed);
      EXPECT_TRUE(same_atoms(atom_set(normalize(subsample(c1, 0.6, kc))), atom_set(subsample(normalize(c1), 0.6, kn)),
                             1e-12));
    }
    {
      KeyedRandomness kc(seed), kn(seed);
      EXPECT_TRUE(same_atoms(atom_set(normalize(point_transition(c1, kernel, kc))),
                             atom_set(point_transition(normalize(c1), kernel, kn))));
    }
    EXPECT_TRUE(same_atoms(atom_set(normalize(superpose({c1, c2}))),
                           atom_set(superpose(std::vector<NrmRealization>{normalize(c1), normalize(c2)}))));
  }
}

// ---------------------------------------------------------------------------
// Expressions

TEST(Expr, ParsePrintRoundTrip) {
  const std::string text = "(superpose (transition rw (subsample 0.5 (leaf m1))) (leaf m2 0.3 2.5))";
  const auto e = parse_expr(text);
  EXPECT_EQ(to_string(e), text);
  EXPECT_EQ(e.kind, OperatorExpr::Kind::superpose);
  EXPECT_EQ(e.depth(), 4);
  ASSERT_TRUE(e.children[1].params.has_value());
  EXPECT_EQ(e.children[1].params->a, 0.3);
  EXPECT_EQ(parse_expr("  ( leaf\n x )"), OperatorExpr::leaf("x"));
}

TEST(Expr, ParseErrors) {
  for (const char* bad : {"(subsample 1.5 (leaf m))", "(superpose (leaf a))", "(foo)", "(leaf m) x", "(leaf m",
                          "(subsample abc (leaf m))", "(transition rw)", "(leaf m 2.0 1.0)", ""}) {
    EXPECT_THROW(parse_expr(bad), ConfigError) << bad;
  }
}

TEST(Expr, NormalFormRules) {
  auto nf = [](const char* s) { return to_string(normal_form(parse_expr(s))); };
  EXPECT_EQ(nf("(subsample 0.5 (subsample 0.4 (leaf m)))"), "(subsample 0.2 (leaf m))");
  EXPECT_EQ(nf("(subsample 0.5 (transition rw (leaf m)))"), "(transition rw (subsample 0.5 (leaf m)))");
  EXPECT_EQ(nf("(subsample 0.5 (superpose (leaf a) (leaf b)))"),
            "(superpose (subsample 0.5 (leaf a)) (subsample 0.5 (leaf b)))");
  EXPECT_EQ(nf("(transition rw (superpose (leaf a) (superpose (leaf b) (leaf c))))"),
            "(superpose (transition rw (leaf a)) (transition rw (leaf b)) (transition rw (leaf c)))");
  EXPECT_EQ(nf("(leaf m)"), "(leaf m)");
}

TEST(Expr, RandomExpressionsNormalizeAndEvaluateIdentically) {
  Rng rng(2025);
  const auto base = BaseMeasure::gaussian(1);
  const auto kernels = default_kernels(base, 0.2);
  int max_depth_seen = 0;
  for (int i = 0; i < 100; ++i) {
    int next_leaf = 1;
    const auto e = random_expr(rng, 5, next_leaf);
    max_depth_seen = std::max(max_depth_seen, e.depth());
    ASSERT_LE(e.depth(), 5);
    const auto nf = normal_form(e);
    ASSERT_TRUE(is_normal_form(nf)) << to_string(nf);
    ASSERT_EQ(normal_form(nf), nf) << to_string(e);
    ASSERT_EQ(parse_expr(to_string(e)), e);
    auto l1 = leaf_ids(e), l2 = leaf_ids(nf);
    std::sort(l1.begin(), l1.end());
    std::sort(l2.begin(), l2.end());
    ASSERT_EQ(l1, l2);

    const auto leaves = realize_leaves(e, base, rng);
    KeyedRandomness k1(static_cast<std::uint64_t>(i)), k2(static_cast<std::uint64_t>(i));
    const auto x = evaluate_expr(e, leaves, kernels, k1);
    const auto y = evaluate_expr(nf, leaves, kernels, k2);
    ASSERT_TRUE(same_atoms(atom_set(x), atom_set(y), 0.0)) << to_string(e);
  }
  EXPECT_EQ(max_depth_seen, 5);
}

// The expected total mass of an expression depends only on the rates along
// each leaf's path, so a plain generator gives the same mean for e and its
// normal form.
TEST(Expr, NormalFormPreservesExpectedMass) {
  const auto e = parse_expr("(subsample 0.5 (superpose (transition rw (subsample 0.6 (leaf a))) (leaf b)))");
  const auto nf = normal_form(e);
  const auto base = BaseMeasure::gaussian(1);
  const auto kernels = default_kernels(base);
  const NggParams p{0.5, 2.0};
  const double per_leaf = p.mass * (p.a - small_jump_mean_unit(p.a, 0.01));
  const double exact = (0.3 + 0.5) * per_leaf;
  for (const auto* expr : {&e, &nf}) {
    Rng rng(expr == &e ? 31 : 32);
    std::vector<double> xs;
    for (int r = 0; r < 20000; ++r) {
      const auto leaves = realize_leaves(*expr, base, rng);
      xs.push_back(evaluate_expr(*expr, leaves, kernels, rng).total_mass());
    }
    const auto ms = oracle::mean_se(xs);
    EXPECT_LT(std::fabs(ms.mean - exact), 3.0 * ms.se) << ms.mean << " vs " << exact;
  }
}

TEST(Expr, EvaluationErrors) {
  const auto base = BaseMeasure::gaussian(1);
  const auto kernels = default_kernels(base);
  Rng rng(9);
  const auto e = parse_expr("(superpose (leaf a) (subsample 0.5 (leaf a)))");
  std::map<std::string, CrmRealization> leaves{{"a", sample_crm_threshold({0.5, 1.0}, base, 0.1, rng)}};
  EXPECT_THROW(evaluate_expr(e, leaves, kernels, rng), ConfigError);
  EXPECT_THROW(evaluate_expr(parse_expr("(leaf b)"), leaves, kernels, rng), ConfigError);
  EXPECT_THROW(evaluate_expr(parse_expr("(transition nope (leaf a))"), leaves, kernels, rng), ConfigError);
}

// ---------------------------------------------------------------------------
// Time-dependent chains

TEST(Chain, WeightsExamples) {
  const auto w = chain_weights({2.0, 2.0});
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 0.5);
  const auto e = expected_chain_weights({{0.5, 1.0}, {0.5, 1.0}, {0.5, 1.0}}, 0.5);
  EXPECT_NEAR(e[0], 0.25 / 1.75, 1e-15);
  EXPECT_NEAR(e[2], 1.0 / 1.75, 1e-15);
  EXPECT_THROW(chain_weights({}), DomainError);
  EXPECT_THROW(chain_weights({0.0, 0.0}), DomainError);
}

// Recursion on normalized measures, recursion on CRMs, and the normal-form
// mixture over epochs all give the same weighted atoms (m = 3, q = 0.7).
TEST(Chain, NrmAndCrmSidesAgree) {
  const double q = 0.7;
  const auto base = BaseMeasure::gaussian(1);
  const auto kernels = default_kernels(base, 0.25);
  const auto& rw = kernels.at("rw");
  Rng rng(10);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<CrmRealization> crms;
    std::vector<NrmRealization> nrms;
    std::map<std::string, CrmRealization> leaves;
    for (int j = 1; j <= 3; ++j) {
      crms.push_back(sample_crm_threshold({0.5, 2.0}, base, 0.01, rng));
      nrms.push_back(normalize(crms.back()));
      leaves.emplace("m" + std::to_string(j), crms.back());
    }
    const auto seed = static_cast<std::uint64_t>(rep) * 7 + 1;
    KeyedRandomness kc(seed), kn(seed), ke(seed);
    const auto crm_side = normalize(dependent_chain_crm(crms, q, rw, kc));
    const auto nrm_side = dependent_chain_nrm(nrms, q, rw, kn);
    ASSERT_TRUE(same_atoms(atom_set(crm_side), atom_set(nrm_side), 1e-12));

    const auto expr = parse_expr(
        "(superpose (transition rw (subsample 0.7 (superpose (transition rw (subsample 0.7 (leaf m1))) (leaf m2))))"
        " (leaf m3))");
    const auto nf = normal_form(expr);
    const auto mix = evaluate_expr(nf, leaves, kernels, ke);
    ASSERT_TRUE(same_atoms(atom_set(normalize(mix)), atom_set(crm_side), 1e-12));

    // Epoch weights from the normal-form chains.
    std::vector<double> masses;
    for (const auto& chain : nf.children) {
      KeyedRandomness kk(seed);
      std::map<std::string, CrmRealization> one;
      const auto id = leaf_ids(chain).front();
      one.emplace(id, leaves.at(id));
      masses.push_back(evaluate_expr(chain, one, kernels, kk).total_mass());
    }
    const auto w = chain_weights(masses);
    double total = 0.0;
    for (double x : w) total += x;
    EXPECT_NEAR(total, 1.0, 1e-14);
    EXPECT_NEAR(masses[0] + masses[1] + masses[2], mix.total_mass(), 1e-12 * mix.total_mass());
  }
}

// ---------------------------------------------------------------------------
// Posterior pieces

TEST(SuperpositionPosterior, NormalizersAndMoments) {
  const std::vector<NggParams> comps = {{0.5, 1.0}, {0.2, 3.0}};
  const double u = 1.7;
  const auto post = superposition_posterior(comps, u, {1, 4});
  for (std::size_t k = 0; k < 2; ++k) {
    const int n = post.counts()[k];
    const double z = oracle::integrate_log_scale(
        [&](double t) { return std::pow(t, n) * std::exp(-u * t) * post.levy_density(t); });
    EXPECT_NEAR(post.fixed_jump_log_normalizer(k), std::log(z), 1e-9);
    EXPECT_NEAR(oracle::integrate_log_scale([&](double t) { return post.fixed_jump_density(k, t); }), 1.0, 1e-9);
    const double mean = oracle::integrate_log_scale([&](double t) { return t * post.fixed_jump_density(k, t); });
    Rng rng(40 + k);
    std::vector<double> xs(50000);
    for (double& x : xs) x = post.sample_fixed_jump(k, rng);
    const auto ms = oracle::mean_se(xs);
    EXPECT_LT(std::fabs(ms.mean - mean), 3.0 * ms.se) << "k=" << k;
  }
}

TEST(SuperpositionPosterior, ContinuousPart) {
  const std::vector<NggParams> comps = {{0.5, 1.0}, {0.3, 2.0}};
  const double u = 0.9;
  const auto post = superposition_posterior(comps, u, {});
  for (double v : {0.1, 1.0, 5.0}) {
    const double quad = oracle::integrate_log_scale(
        [&](double t) { return -std::expm1(-v * t) * post.continuous_levy_density(t); });
    EXPECT_NEAR(post.continuous_laplace_exponent(v), quad, 1e-9 * quad);
  }
  const double L = 0.05;
  const double expected =
      oracle::integrate_to_inf([&](double t) { return post.continuous_levy_density(t); }, L, 1e-12);
  Rng rng(41);
  std::vector<double> counts;
  for (int r = 0; r < 20000; ++r) {
    const auto js = post.sample_continuous_above(L, rng);
    for (double j : js) ASSERT_GT(j, L);
    counts.push_back(static_cast<double>(js.size()));
  }
  const auto ms = oracle::mean_se(counts);
  EXPECT_LT(std::fabs(ms.mean - expected), 3.0 * ms.se);
}

TEST(SuperpositionPosterior, Validation) {
  EXPECT_THROW(superposition_posterior({}, 1.0, {}), DomainError);
  EXPECT_THROW(superposition_posterior({{0.5, 1.0}}, -1.0, {}), DomainError);
  EXPECT_THROW(superposition_posterior({{0.5, 1.0}}, 1.0, {0}), DomainError);
}

namespace {

// P(z_k = 1 | z_{-k}) from the joint over all indicator vectors:
// prod rate^z (1-rate)^(1-z) * (sum z J)^(-n), zero if an occupied atom is dropped.
double enumerate_acceptance(const std::vector<double>& jumps, const std::vector<double>& rates,
                            const std::vector<int>& occupied, const std::vector<int>& z_fixed, std::size_t k, int n) {
  const std::size_t m = jumps.size();
  double num = 0.0, den = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    bool ok = true;
    double w = 1.0, s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const int zi = static_cast<int>((mask >> i) & 1u);
      if (i != k && zi != z_fixed[i]) ok = false;
      if (occupied[i] && !zi) ok = false;
      w *= zi ? rates[i] : 1.0 - rates[i];
      s += zi * jumps[i];
    }
    if (!ok || s == 0.0) continue;
    w *= std::pow(s, -n);
    den += w;
    if ((mask >> k) & 1u) num += w;
  }
  return num / den;
}

}  // namespace

TEST(ZPosterior, SubsampleExample) {
  const auto r = subsample_z_posterior({1.0, 1.0}, {1, 1}, 0.5, 0, 3, 0);
  EXPECT_NEAR(r.value, 1.0 / 9.0, 1e-15);
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.value, enumerate_acceptance({1.0, 1.0}, {0.5, 0.5}, {0, 1}, {1, 1}, 0, 3), 1e-15);
  EXPECT_EQ(subsample_z_posterior({1.0, 1.0}, {1, 1}, 0.5, 0, 3, 2).value, 1.0);
}

TEST(ZPosterior, SubsampleAgainstEnumeration) {
  Rng rng(50);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = 2 + static_cast<std::size_t>(uniform01(rng) * 4.0);
    std::vector<double> jumps(m);
    std::vector<int> z(m), occ(m, 0);
    for (auto& j : jumps) j = 0.05 + 2.0 * uniform01(rng);
    for (auto& x : z) x = uniform01(rng) < 0.7 ? 1 : 0;
    const std::size_t k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(m));
    // Some other accepted atom holds all the data.
    std::size_t holder = m;
    for (std::size_t i = 0; i < m; ++i) {
      if (i != k && z[i]) holder = i;
    }
    if (holder == m) continue;
    occ[holder] = 1;
    const double q = 0.1 + 0.8 * uniform01(rng);
    const int n = 1 + static_cast<int>(uniform01(rng) * 8.0);
    const auto r = subsample_z_posterior(jumps, z, q, k, n, 0);
    EXPECT_NEAR(r.value, enumerate_acceptance(jumps, std::vector<double>(m, q), occ, z, k, n), 1e-12);
  }
}

TEST(ZPosterior, ZeroBaseIsDegenerate) {
  const auto r = subsample_z_posterior({2.0, 1.0}, {1, 0}, 0.3, 0, 4, 0);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(subsample_z_posterior({2.0}, {1}, 0.3, 0, 0, 0).value, 0.3);
  EXPECT_THROW(subsample_z_posterior({2.0}, {1, 1}, 0.3, 0, 1, 0), DomainError);
}

// No underflow for large n: the answer is q / (q + (1-q) (1 + J_k/rest)^n).
TEST(ZPosterior, LargeCountsStayFinite) {
  const auto r = subsample_z_posterior({1e-3, 5.0}, {1, 1}, 0.5, 0, 100000, 0);
  EXPECT_NEAR(std::log(r.value), -100000 * std::log1p(1e-3 / 5.0), 1e-6);
}

TEST(ZPosterior, HierarchicalExample) {
  // Epoch 1 holds the jump 2, epoch 2 the jump 1; target is epoch 1's atom seen at m = 2.
  const std::vector<std::vector<double>> jumps = {{2.0}, {1.0}};
  const std::vector<std::vector<int>> z = {{1}, {1}};
  const auto r = hierarchical_z_posterior(2, 1, jumps, z, 0.5, 0, 0, 2);
  EXPECT_NEAR(r.value, 0.1, 1e-15);
  EXPECT_NEAR(r.value, enumerate_acceptance({2.0, 1.0}, {0.5, 1.0}, {0, 1}, {1, 1}, 0, 2), 1e-15);
  // Seen from its own epoch the rate is q^0 = 1.
  EXPECT_EQ(hierarchical_z_posterior(1, 1, jumps, z, 0.5, 0, 0, 2).value, 1.0);
  EXPECT_THROW(hierarchical_z_posterior(1, 2, jumps, z, 0.5, 0, 0, 2), DomainError);
}

TEST(ZPosterior, HierarchicalAgainstEnumeration) {
  Rng rng(51);
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 3;
    std::vector<std::vector<double>> jumps(m);
    std::vector<std::vector<int>> z(m);
    std::vector<double> flat_j, flat_rate;
    std::vector<int> flat_z, occ;
    const double q = 0.2 + 0.7 * uniform01(rng);
    for (int e = 0; e < m; ++e) {
      for (int i = 0; i < 2; ++i) {
        jumps[e].push_back(0.1 + uniform01(rng));
        z[e].push_back(uniform01(rng) < 0.6 ? 1 : 0);
        flat_j.push_back(jumps[e].back());
        flat_rate.push_back(std::pow(q, m - (e + 1)));
        flat_z.push_back(z[e].back());
        occ.push_back(0);
      }
    }
    // Current epoch's atoms are all accepted; the first holds the data.
    for (std::size_t i = 0; i < 2; ++i) {
      z[m - 1][i] = 1;
      flat_z[4 + i] = 1;
    }
    occ[4] = 1;
    const int origin = 1 + static_cast<int>(uniform01(rng) * 2.0);
    const std::size_t k = uniform01(rng) < 0.5 ? 0 : 1;
    const int n = 1 + static_cast<int>(uniform01(rng) * 6.0);
    const auto r = hierarchical_z_posterior(m, origin, jumps, z, q, k, 0, n);
    const std::size_t flat_k = static_cast<std::size_t>(origin - 1) * 2 + k;
    EXPECT_NEAR(r.value, enumerate_acceptance(flat_j, flat_rate, occ, flat_z, flat_k, n), 1e-12);
  }
}
