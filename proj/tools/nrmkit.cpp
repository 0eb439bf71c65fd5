// nrmkit command-line front end.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 numerical failure.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nrmkit/nrmkit.hpp"

using nlohmann::json;
using namespace nrmkit;

namespace {

#ifndef NRMKIT_VERSION
#define NRMKIT_VERSION "0.0.0"
#endif

struct Common {
  double a = 0.5;
  double mass = 1.0;
  std::uint64_t seed = 1;
  std::string out;
  int threads = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--a", c.a, "discount parameter in (0,1)");
  cmd->add_option("--mass", c.mass, "total mass M > 0");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--out", c.out, "output path (default: stdout)");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::Range(1, 256));
}

json meta(const Common& c, json config) {
  return {{"version", NRMKIT_VERSION}, {"seed", c.seed}, {"config", std::move(config)}};
}

// Output stream: the --out file or stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ConfigError("cannot write " + path);
    }
    stream().precision(17);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

// Normalized measure, or null when the realization has no atoms to normalize.
json normalized_or_null(const CrmRealization& crm) {
  if (crm.atoms.empty()) {
    log::warn("realization has no atoms; normalized measure omitted");
    return nullptr;
  }
  return normalize(crm);
}

void emit(const std::string& path, const json& j) {
  Output out(path);
  out.stream() << j.dump(2) << "\n";
}

std::vector<Point> read_data_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path);
  std::vector<Point> out;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Point p;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        p.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(row) + ": not a number: '" + cell + "'");
      }
    }
    if (!out.empty() && p.size() != out.front().size()) {
      throw ConfigError(path + ":" + std::to_string(row) + ": inconsistent number of columns");
    }
    out.push_back(std::move(p));
  }
  if (out.empty()) throw ConfigError("data file " + path + " has no observations");
  return out;
}

// key = value lines; '#' starts a comment.
std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int row = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++row;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(row) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " is not a number: '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x) || std::fabs(x) > 2e9) throw ConfigError("config: " + key + " must be an integer");
  return static_cast<int>(x);
}

void check_params(double a, double mass) {
  if (!(a > 0.0 && a < 1.0)) throw ConfigError("a must lie in (0,1)");
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("mass must be positive");
}

BaseMeasure make_base(const std::string& name, int dim) {
  if (dim < 1) throw ConfigError("dimension must be positive");
  if (name == "uniform") return BaseMeasure::uniform_cube(dim);
  if (name == "gaussian") return BaseMeasure::gaussian(dim);
  throw ConfigError("unknown base measure '" + name + "' (uniform|gaussian)");
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string construction = "threshold";
  int kmax = 100;
  double z = 0.01;
  std::string base = "uniform";
  int dim = 1;
};

int cmd_sample(const Common& c, const SampleArgs& s) {
  check_params(c.a, c.mass);
  const auto base = make_base(s.base, s.dim);
  Rng rng(c.seed);
  const NggParams p{c.a, c.mass};
  CrmRealization crm;
  if (s.construction == "decreasing") {
    if (s.kmax < 1) throw ConfigError("--kmax must be positive");
    crm = sample_crm_decreasing(p, base, s.kmax, rng);
  } else if (s.construction == "threshold") {
    if (!(s.z > 0.0)) throw ConfigError("--z must be positive");
    crm = sample_crm_threshold(p, base, s.z, rng);
  } else {
    throw ConfigError("unknown construction '" + s.construction + "' (decreasing|threshold)");
  }
  json j = meta(c, {{"a", c.a},
                    {"mass", c.mass},
                    {"construction", s.construction},
                    {"kmax", s.kmax},
                    {"z", s.z},
                    {"base", s.base},
                    {"dim", s.dim}});
  j["crm"] = crm;
  j["nrm"] = normalized_or_null(crm);
  emit(c.out, j);
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string config;
  std::optional<int> iters, burn_in, thin;
};

int cmd_fit(Common c, const FitArgs& f, const CLI::App& app) {
  ChainConfig cfg;
  cfg.a = c.a;
  cfg.initial_mass = c.mass;
  double sigma = 1.0, mu0 = 0.0, tau = 10.0;
  std::string model = "gaussian";
  if (!f.config.empty()) {
    for (const auto& [k, v] : read_key_values(f.config)) {
      if (k == "a") {
        if (app.count("--a") == 0) cfg.a = c.a = to_double(k, v);
      } else if (k == "M" || k == "mass") {
        if (app.count("--mass") == 0) cfg.initial_mass = c.mass = to_double(k, v);
      } else if (k == "learn_M") {
        cfg.learn_mass = v == "1" || v == "true";
      } else if (k == "M_shape") {
        cfg.mass_prior.shape = to_double(k, v);
      } else if (k == "M_rate") {
        cfg.mass_prior.rate = to_double(k, v);
      } else if (k == "iterations") {
        cfg.iterations = to_int(k, v);
      } else if (k == "burn_in") {
        cfg.burn_in = to_int(k, v);
      } else if (k == "thin") {
        cfg.thin = to_int(k, v);
      } else if (k == "seed") {
        if (app.count("--seed") == 0) c.seed = static_cast<std::uint64_t>(to_double(k, v));
      } else if (k == "model") {
        model = v;
      } else if (k == "sigma") {
        sigma = to_double(k, v);
      } else if (k == "mu0") {
        mu0 = to_double(k, v);
      } else if (k == "tau") {
        tau = to_double(k, v);
      } else {
        throw ConfigError("config: unknown key '" + k + "'");
      }
    }
  }
  if (f.iters) cfg.iterations = *f.iters;
  if (f.burn_in) cfg.burn_in = *f.burn_in;
  if (f.thin) cfg.thin = *f.thin;
  if (model != "gaussian") throw ConfigError("config: unknown model family '" + model + "' (gaussian)");
  check_params(cfg.a, cfg.initial_mass);
  const auto data = read_data_csv(f.data);
  const int dim = static_cast<int>(data.front().size());
  const auto lik = GaussianMeanModel::isotropic(dim, sigma, mu0, tau);

  const json config = {{"data", f.data},
                       {"a", cfg.a},
                       {"initial_mass", cfg.initial_mass},
                       {"learn_M", cfg.learn_mass},
                       {"M_shape", cfg.mass_prior.shape},
                       {"M_rate", cfg.mass_prior.rate},
                       {"iterations", cfg.iterations},
                       {"burn_in", cfg.burn_in},
                       {"thin", cfg.thin},
                       {"model", model},
                       {"dim", dim},
                       {"sigma", sigma},
                       {"mu0", mu0},
                       {"tau", tau},
                       {"N", data.size()}};
  Output out(c.out);
  out.stream() << json{{"header", meta(c, config)}}.dump() << "\n";
  if (cfg.iterations == 0) return 0;
  cfg.validate();
  Rng rng(c.seed);
  run_chain(data, lik, cfg, rng, [&](const ChainRecord& r) { out.stream() << json(r).dump() << "\n"; });
  return 0;
}

// ---------------------------------------------------------------------------

struct PowerLawArgs {
  int n = 100000;
  int runs = 20;
  int points = 200;
  std::string sizes_out;
};

int cmd_powerlaw(const Common& c, const PowerLawArgs& p) {
  check_params(c.a, c.mass);
  if (p.n < 2) throw ConfigError("--n must be at least 2");
  const auto res = power_law_runs({c.a, c.mass}, p.n, p.runs, c.seed, c.threads);
  const json m = meta(c, {{"a", c.a}, {"mass", c.mass}, {"n", p.n}, {"runs", p.runs}, {"points", p.points}});
  {
    Output out(c.out);
    out.stream() << "# " << m.dump() << "\n";
    out.stream() << "n,K_n,run_id\n";
    const auto grid = log_grid(1, p.n, p.points);
    for (int r = 0; r < p.runs; ++r) {
      for (int n : grid) {
        out.stream() << n << "," << res.k_trajectories[static_cast<std::size_t>(r)][static_cast<std::size_t>(n - 1)]
                     << "," << r << "\n";
      }
    }
  }
  // Cluster-size frequencies pooled over runs.
  std::map<int, long> sizes;
  for (const auto& counts : res.final_counts) {
    for (int s : counts) ++sizes[s];
  }
  std::string sizes_path = p.sizes_out;
  if (sizes_path.empty() && !c.out.empty()) sizes_path = c.out + ".sizes.csv";
  if (!sizes_path.empty()) {
    Output out(sizes_path);
    out.stream() << "# " << m.dump() << "\n";
    out.stream() << "cluster_size,count\n";
    for (const auto& [s, n] : sizes) out.stream() << s << "," << n << "\n";
  }
  if (!c.out.empty()) {
    double slope = 0.0;
    const int lo = std::max(1, p.n / 100);
    for (const auto& tr : res.k_trajectories) slope += log_log_slope(tr, lo, p.n);
    std::cerr << "mean log-log slope of K_n over [" << lo << ", " << p.n << "]: " << slope / p.runs << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct MomentArgs {
  std::string op = "var";
  std::string family = "ngg";
  std::vector<double> masses;
  std::size_t k = 0;
  double pb = 0.5, pa = 0.0, q = 0.5;
  long mc = 0;
  std::string mc_mode = "masses";
};

int cmd_moments(const Common& c, const MomentArgs& m) {
  MomentQuery q;
  q.op = moment_op_from_string(m.op);
  if (m.family == "ngg") {
    q.family = LevyFamily::ngg;
  } else if (m.family == "dp") {
    q.family = LevyFamily::dp;
  } else {
    throw ConfigError("unknown family '" + m.family + "' (ngg|dp)");
  }
  q.a = c.a;
  q.mass = c.mass;
  q.masses = m.masses;
  q.k = m.k;
  q.p_b = m.pb;
  q.p_a = m.pa;
  q.q = m.q;
  q.validate();
  json config = {{"op", m.op}, {"family", m.family}, {"a", c.a},    {"mass", c.mass}, {"masses", m.masses},
                 {"k", m.k},   {"pb", m.pb},         {"pa", m.pa}, {"q", m.q},       {"mc", m.mc},
                 {"mc_mode", m.mc_mode}};
  json j = meta(c, config);
  if (q.op == MomentOp::mean) {
    j["value"] = nrm_mean(q);
  } else {
    const auto r = evaluate_moment(q);
    j["quadrature"] = r.value;
    j["quadrature_error"] = r.quadrature_error;
    j["closed_form"] = r.closed_form ? json(*r.closed_form) : json(nullptr);
    j["as_printed"] = r.as_printed ? json(*r.as_printed) : json(nullptr);
  }
  if (m.mc > 0) {
    McMode mode;
    if (m.mc_mode == "masses") {
      mode = McMode::masses;
    } else if (m.mc_mode == "atoms") {
      mode = McMode::atoms;
    } else {
      throw ConfigError("unknown --mc-mode '" + m.mc_mode + "' (masses|atoms)");
    }
    const auto mc = monte_carlo_moments(q, m.mc, c.seed, mode);
    j["monte_carlo"] = {{"reps", mc.reps},
                        {"mean", mc.mean},
                        {"mean_se", mc.mean_se},
                        {"second", mc.second},
                        {"second_se", mc.second_se}};
  }
  emit(c.out, j);
  return 0;
}

// ---------------------------------------------------------------------------

struct TakArgs {
  int n = 10;
  int k = 3;
  bool table = false;
  bool quadrature = false;
};

int cmd_tak(const Common& c, const TakArgs& t) {
  check_params(c.a, c.mass);
  if (t.n < 1 || t.k < 1) throw ConfigError("--n and --k must be positive");
  TakTable table(c.a, c.mass);
  table.fill(t.n, std::min(t.n, t.k));
  if (!table.violations().empty()) {
    for (const auto& v : table.violations()) log::warn(v);
  }
  const json m = meta(c, {{"a", c.a}, {"mass", c.mass}, {"n", t.n}, {"k", t.k}, {"table", t.table}});
  if (t.table) {
    Output out(c.out);
    out.stream() << "# " << m.dump() << "\n";
    table.write_csv(out.stream());
    return 0;
  }
  if (t.k > t.n) throw ConfigError("--k must not exceed --n");
  const auto cell = *table.find(t.n, t.k);
  json j = m;
  j["N"] = t.n;
  j["K"] = t.k;
  j["log_value"] = cell.value.log_magnitude();
  j["method"] = to_string(cell.method);
  j["log_gamma_upper_bound"] = log_gamma_upper(t.k, c.mass);
  if (t.quadrature) j["log_value_quadrature"] = tak_quadrature(t.n, t.k, c.a, c.mass).log_magnitude();
  emit(c.out, j);
  return 0;
}

// ---------------------------------------------------------------------------

struct AlgebraArgs {
  std::string expr;
  bool evaluate = false;
  double z = 0.01;
  double rw_sd = 0.1;
  std::string base = "uniform";
  int dim = 1;
};

int cmd_algebra(const Common& c, const AlgebraArgs& a) {
  const auto e = parse_expr(a.expr);
  const auto nf = normal_form(e);
  json j = meta(c, {{"expr", a.expr},   {"evaluate", a.evaluate}, {"a", c.a},     {"mass", c.mass},
                    {"z", a.z},         {"rw_sd", a.rw_sd},       {"base", a.base}, {"dim", a.dim}});
  j["input"] = to_string(e);
  j["normal_form"] = to_string(nf);
  j["depth"] = e.depth();
  if (a.evaluate) {
    check_params(c.a, c.mass);
    if (!(a.z > 0.0)) throw ConfigError("--z must be positive");
    const auto base = make_base(a.base, a.dim);
    const auto kernels = default_kernels(base, a.rw_sd);
    Rng rng(c.seed);
    std::map<std::string, CrmRealization> leaves;
    auto ids = leaf_ids(e);
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
      // Leaves may carry their own (a M); otherwise the common flags apply.
      std::function<std::optional<NggParams>(const OperatorExpr&)> find = [&](const OperatorExpr& x) {
        if (x.kind == OperatorExpr::Kind::leaf && x.id == id) return x.params;
        for (const auto& ch : x.children) {
          if (auto p = find(ch)) return p;
        }
        return std::optional<NggParams>{};
      };
      const NggParams p = find(e).value_or(NggParams{c.a, c.mass});
      leaves.emplace(id, sample_crm_threshold(p, base, a.z, rng));
    }
    KeyedRandomness k1(c.seed), k2(c.seed);
    const auto x = evaluate_expr(e, leaves, kernels, k1);
    const auto y = evaluate_expr(nf, leaves, kernels, k2);
    j["realization"] = x;
    j["normalized"] = normalized_or_null(x);
    j["normal_form_identical"] = same_atoms(atom_set(x), atom_set(y), 0.0);
  }
  emit(c.out, j);
  return 0;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::vector<std::string> only;
  std::string data_dir;
};

int cmd_verify(const Common& c, const VerifyArgs& v) {
  verify::CheckOptions opt;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.data_dir = v.data_dir;
  std::vector<const verify::CheckInfo*> selected;
  for (const auto& id : v.only) selected.push_back(&verify::find_check(id));
  if (selected.empty()) {
    for (const auto& ch : verify::all_checks()) selected.push_back(&ch);
  }
  json report = meta(c, {{"only", v.only}, {"data_dir", v.data_dir}, {"threads", c.threads}});
  report["checks"] = json::array();
  bool all = true;
  for (const auto* ch : selected) {
    const auto r = verify::run_check(*ch, opt);
    std::cerr << verify::summary_line(r) << "\n";
    report["checks"].push_back(r);
    all = all && r.passed;
  }
  report["passed"] = all;
  emit(c.out, report);
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nrmkit: normalized random measures, NGG posteriors, slice sampling and dependency operators"};
  app.set_version_flag("--version", NRMKIT_VERSION);
  app.require_subcommand(1);

  Common common;
  SampleArgs sample_args;
  FitArgs fit_args;
  PowerLawArgs pl_args;
  MomentArgs mom_args;
  TakArgs tak_args;
  AlgebraArgs alg_args;
  VerifyArgs ver_args;

  auto* sample = app.add_subcommand("sample", "draw a CRM realization and its normalization (JSON)");
  add_common(sample, common);
  sample->add_option("--construction", sample_args.construction, "decreasing|threshold");
  sample->add_option("--kmax", sample_args.kmax, "number of jumps (decreasing)");
  sample->add_option("--z", sample_args.z, "jump threshold (threshold)");
  sample->add_option("--base", sample_args.base, "uniform|gaussian");
  sample->add_option("--dim", sample_args.dim, "location dimension");

  auto* fit = app.add_subcommand("fit", "run the slice sampler on a CSV data set (JSON lines)");
  add_common(fit, common);
  fit->add_option("data", fit_args.data, "headerless CSV, one observation per row")->required();
  fit->add_option("--config", fit_args.config, "key = value file");
  fit->add_option("--iters", fit_args.iters, "iterations (0 writes only the header)");
  fit->add_option("--burn-in", fit_args.burn_in, "iterations discarded");
  fit->add_option("--thin", fit_args.thin, "keep every k-th record");

  auto* pl = app.add_subcommand("powerlaw", "cluster growth experiment (CSV)");
  add_common(pl, common);
  pl->add_option("--n", pl_args.n, "items per run");
  pl->add_option("--runs", pl_args.runs, "independent runs");
  pl->add_option("--points", pl_args.points, "log-spaced n values written per run");
  pl->add_option("--sizes-out", pl_args.sizes_out, "cluster-size CSV (default: <out>.sizes.csv)");

  auto* mom = app.add_subcommand("moments", "moments and operator covariances (JSON)");
  add_common(mom, common);
  mom->add_option("--op", mom_args.op, "mean|var|super|sub|trans");
  mom->add_option("--family", mom_args.family, "ngg|dp");
  mom->add_option("--masses", mom_args.masses, "component masses (super)")->delimiter(',');
  mom->add_option("--k", mom_args.k, "component paired with the sum (super)");
  mom->add_option("--pb", mom_args.pb, "base measure of B");
  mom->add_option("--pa", mom_args.pa, "base measure of the set moved into B (trans)");
  mom->add_option("--q", mom_args.q, "subsampling rate (sub)");
  mom->add_option("--mc", mom_args.mc, "Monte Carlo replicates (0 = none)");
  mom->add_option("--mc-mode", mom_args.mc_mode, "masses|atoms");

  auto* tak = app.add_subcommand("tak", "T^{N,K} cells (JSON) or the whole table (CSV)");
  add_common(tak, common);
  tak->add_option("--n", tak_args.n, "N");
  tak->add_option("--k", tak_args.k, "K");
  tak->add_flag("--table", tak_args.table, "write N = 1..n, K = 1..k as CSV");
  tak->add_flag("--quadrature", tak_args.quadrature, "also report the quadrature value");

  auto* alg = app.add_subcommand("algebra", "normal form and evaluation of operator expressions (JSON)");
  add_common(alg, common);
  alg->add_option("expr", alg_args.expr, "e.g. (superpose (subsample 0.5 (leaf m1)) (leaf m2))")->required();
  alg->add_flag("--eval", alg_args.evaluate, "evaluate against sampled leaves");
  alg->add_option("--z", alg_args.z, "leaf jump threshold");
  alg->add_option("--rw-sd", alg_args.rw_sd, "random-walk kernel sd");
  alg->add_option("--base", alg_args.base, "uniform|gaussian");
  alg->add_option("--dim", alg_args.dim, "location dimension");

  auto* ver = app.add_subcommand("verify", "run the verification checks (JSON report)");
  add_common(ver, common);
  ver->add_option("--only", ver_args.only, "check id or number (repeatable)");
  ver->add_option("--data-dir", ver_args.data_dir, "directory with three_clusters.csv and labels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sample) return cmd_sample(common, sample_args);
    if (*fit) return cmd_fit(common, fit_args, *fit);
    if (*pl) return cmd_powerlaw(common, pl_args);
    if (*mom) return cmd_moments(common, mom_args);
    if (*tak) return cmd_tak(common, tak_args);
    if (*alg) return cmd_algebra(common, alg_args);
    if (*ver) {
      if (common.seed == 1 && ver->count("--seed") == 0) common.seed = verify::CheckOptions{}.seed;
      return cmd_verify(common, ver_args);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
