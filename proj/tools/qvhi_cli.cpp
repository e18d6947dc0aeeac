// Configuration-driven experiment runner.
//
//   qvhi_cli <solve|mosco|oracle-compare|fem|bounds|sample> --config cfg.json
//            [--out dir] [--seed n] [--threads n]
//
// Exit codes: 0 success/converged, 2 honest non-convergence, 1 data error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "qvhi.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace qvhi;

namespace {

constexpr int kSchemaVersion = 1;

const char *kColumnsHelp = R"(Output files (first line of every CSV is a '# generated <UTC time>' stamp):
  solve           history.csv  iteration,outer_residual,v_norm,w_norm,feasibility
                  solution.csv index,value
                  summary.csv  key,value
  mosco           mosco.csv    n,error,iterations,residual
  oracle-compare  oracle.csv   start,converged,distance,nearest_cluster,spacing
                  clusters.csv cluster,u0,u1,score,size
  fem             hypotheses.csv clause,pass,detail
                  history.csv, solution.csv, summary.csv as for solve; nodal.csv x,y,value; mesh.txt
                  poisson model: convergence.csv n,h,h1_error,l2_error,h1_ratio,l2_ratio
                  smallness sweep: smallness.csv c1bar,margin,pass
  bounds          bounds.csv   key,value
  sample          solutions.csv index,u_norm,coords
                  summary.csv  key,value
Config files are JSON objects with "schema_version": 1; unknown keys are rejected.)";

/// JSON object view that rejects keys nobody asked about.
class Obj {
public:
  Obj(const json &j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object())
      throw DataError(where_ + ": expected a JSON object");
  }
  ~Obj() noexcept(false) {
    if (std::uncaught_exceptions() == 0)
      finish();
  }
  /// Rejects unread keys; called before any computation starts.
  void finish() {
    if (finished_)
      return;
    finished_ = true;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw DataError(where_ + ": unknown key '" + it.key() + "'");
  }
  bool has(const std::string &k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  const json &at(const std::string &k) {
    seen_.insert(k);
    if (!j_.contains(k))
      throw DataError(where_ + ": missing key '" + k + "'");
    return j_.at(k);
  }
  template <class T> T get(const std::string &k, T def) {
    seen_.insert(k);
    if (!j_.contains(k))
      return def;
    try {
      return j_.at(k).get<T>();
    } catch (const json::exception &) {
      throw DataError(where_ + ": key '" + k + "' has the wrong type");
    }
  }
  template <class T> T req(const std::string &k) {
    const json &v = at(k);
    try {
      return v.get<T>();
    } catch (const json::exception &) {
      throw DataError(where_ + ": key '" + k + "' has the wrong type");
    }
  }
  const std::string &where() const { return where_; }

private:
  const json &j_;
  std::string where_;
  std::set<std::string> seen_;
  bool finished_ = false;
};

Vec to_vec(const json &j, const std::string &what) {
  if (!j.is_array())
    throw DataError(what + ": expected an array of numbers");
  Vec v(Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw DataError(what + ": expected numbers");
    v[Index(i)] = j[i].get<double>();
  }
  return v;
}

Mat to_mat(const json &j, const std::string &what) {
  if (!j.is_array() || j.empty())
    throw DataError(what + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].size();
  Mat m(Index(j.size()), Index(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vec row = to_vec(j[r], what);
    if (std::size_t(row.size()) != cols)
      throw DataError(what + ": ragged matrix");
    m.row(Index(r)) = row.transpose();
  }
  return m;
}

struct Context {
  fs::path config_dir;
  fs::path out;
  std::uint64_t seed = 0;
  int threads = 1;
};

OuterConfig parse_solver(const json *j, const Context &ctx, double eps_inner = 1e-9) {
  OuterConfig c;
  c.seed = ctx.seed;
  c.vi_cfg.eps_inner = eps_inner;
  if (!j)
    return c;
  Obj o(*j, "solver");
  c.theta = o.get("theta", c.theta);
  c.tol_outer = o.get("tol_outer", c.tol_outer);
  c.max_outer = o.get("max_outer", c.max_outer);
  c.multistart = o.get("multistart", c.multistart);
  c.feas_tol = o.get("feas_tol", c.feas_tol);
  c.stall_window = o.get("stall_window", c.stall_window);
  c.vi_cfg.tol = o.get("vi_tol", c.vi_cfg.tol);
  c.vi_cfg.max_iter = o.get("vi_max_iter", c.vi_cfg.max_iter);
  c.vi_cfg.eps_inner = o.get("eps_inner", c.vi_cfg.eps_inner);
  if (o.has("vi_tau"))
    c.vi_cfg.tau = o.req<double>("vi_tau");
  const std::string sel = o.get<std::string>("selection", "min-norm");
  if (sel == "min-norm")
    c.selection = SelectionRule::MinNorm;
  else if (sel == "direction")
    c.selection = SelectionRule::DirectionAttaining;
  else if (sel == "midpoint")
    c.selection = SelectionRule::Midpoint;
  else
    throw DataError("solver: unknown selection '" + sel + "'");
  return c;
}

LocallyLipschitz1D parse_potential(Obj &o) {
  LocallyLipschitz1D h = named_potential(o.get<std::string>("potential", "zero"));
  const double s = o.get("potential_scale", 1.0);
  if (s != 1.0)
    h = h.scaled(s);
  if (o.has("growth")) {
    const Vec g = to_vec(o.at("growth"), "growth");
    if (g.size() != 2)
      throw DataError("growth: expected [c0, c1]");
    h = h.with_growth(g[0], g[1]);
  }
  return h;
}

/// Explicit finite-dimensional problem.
QVHIProblem parse_explicit(const json &j) {
  Obj o(j, "explicit");
  const Mat A = to_mat(o.at("A"), "A");
  const Index n = A.rows();
  GramSpace V = o.has("gram") ? GramSpace::dense(to_mat(o.at("gram"), "gram"), "V")
                              : GramSpace::identity(n, "V");
  const Vec xw = o.has("x_weights") ? to_vec(o.at("x_weights"), "x_weights") : Vec::Ones(n);
  GramSpace X = GramSpace::diagonal(xw, "X");
  const Mat M = o.has("M") ? to_mat(o.at("M"), "M") : Mat::Identity(xw.size(), n);
  const Vec f = to_vec(o.at("f"), "f");
  if (f.size() != n)
    throw DataError("explicit: f has the wrong length");
  SuperpositionFunctional j_fun(X, parse_potential(o));
  const GrowthConstants gc = j_fun.growth(GrowthForm::Minkowski);

  ConvexFunction phi = zero_function(V);
  if (o.has("phi")) {
    Obj p(o.at("phi"), "phi");
    const std::string kind = p.req<std::string>("kind");
    const Vec w = to_vec(p.at("weights"), "phi.weights");
    if (kind == "l1")
      phi = weighted_l1(V, w);
    else if (kind == "quadratic")
      phi = weighted_quadratic(V, w);
    else if (kind != "zero")
      throw DataError("phi: unknown kind '" + kind + "'");
  }
  RadialConstraintFamily K = RadialConstraintFamily::unconstrained(V);
  if (o.has("K")) {
    Obj k(o.at("K"), "K");
    const std::string kind = k.req<std::string>("kind");
    const double m0 = k.get("m0", 1.0), slope = k.get("slope", 0.0);
    if (kind == "ball")
      K = RadialConstraintFamily::ambient_norm(
          V, [m0, slope](const Vector &v) { return m0 + slope * v.norm(); }, m0);
    else if (kind != "none")
      throw DataError("K: unknown kind '" + kind + "'");
  }
  ConstraintSet C = whole_space(V);
  if (o.has("C")) {
    Obj c(o.at("C"), "C");
    const std::string kind = c.req<std::string>("kind");
    if (kind == "box")
      C = box_set(V, to_vec(c.at("lower"), "C.lower"), to_vec(c.at("upper"), "C.upper"));
    else if (kind != "whole")
      throw DataError("C: unknown kind '" + kind + "'");
  }
  const bool enforce = o.get("enforce_smallness", true);
  return make_qvhi_problem(linear_operator(V, A), std::move(phi), std::move(j_fun),
                           LinearMap(M.sparseView(), V, X), DualVector{V, f}, std::move(K),
                           std::move(C), gc.alpha, gc.beta, enforce);
}

QVHIProblem parse_problem(const json &j, const Context &ctx) {
  Obj o(j, "problem");
  if (o.has("instance"))
    return hand_instance(o.req<std::string>("instance"));
  if (o.has("synthetic")) {
    Obj s(o.at("synthetic"), "synthetic");
    const std::string regime = s.get<std::string>("regime", "unique");
    if (regime != "unique" && regime != "multistable")
      throw DataError("synthetic: unknown regime '" + regime + "'");
    return synthetic_instance(s.req<int>("dim"), s.get<std::uint64_t>("seed", ctx.seed),
                              regime == "unique" ? Regime::Unique : Regime::Multistable);
  }
  if (o.has("explicit"))
    return parse_explicit(o.at("explicit"));
  if (o.has("file")) {
    const fs::path p = ctx.config_dir / o.req<std::string>("file");
    std::ifstream in(p);
    if (!in)
      throw DataError("problem file not found: " + p.string());
    json inner;
    try {
      in >> inner;
    } catch (const json::exception &e) {
      throw DataError("problem file " + p.string() + ": " + e.what());
    }
    return parse_explicit(inner);
  }
  throw DataError("problem: expected one of instance, synthetic, explicit, file");
}

std::ofstream open_out(const Context &ctx, const std::string &name) {
  fs::create_directories(ctx.out);
  std::ofstream os(ctx.out / name);
  if (!os)
    throw DataError("cannot write " + (ctx.out / name).string());
  return os;
}

void write_summary(const Context &ctx, const std::string &name,
                   const std::vector<std::pair<std::string, std::string>> &kv) {
  auto os = open_out(ctx, name);
  csv::Writer w(os, {"key", "value"});
  for (const auto &[k, v] : kv) {
    w.row(k, v);
    std::cout << k << " = " << v << '\n';
  }
}

std::string b2s(bool b) { return b ? "true" : "false"; }

std::vector<std::pair<std::string, std::string>> solution_summary(const QVHIProblem &P,
                                                                  const QVHISolution &s) {
  const double tau = auto_step(P.A);
  const QVHIResidual r = qvhi_residual(P, s.u, s.w, tau);
  return {{"converged", b2s(s.converged)},
          {"message", s.message},
          {"u_norm", csv::num(s.u.norm())},
          {"Mu_norm", csv::num(P.M.apply(s.u).norm())},
          {"outer_residual", csv::num(s.outer_residual)},
          {"constraint_residual", csv::num(s.constraint_residual)},
          {"certificate_fp", csv::num(r.fp)},
          {"certificate_subgradient", b2s(r.subgrad_ok)},
          {"certificate_pass", b2s(r.pass(1e-6))},
          {"truncation_active", b2s(s.truncation_active)},
          {"iterations", std::to_string(s.iterations)},
          {"restarts", std::to_string(s.restarts)},
          {"R1", csv::num(s.bounds.R1)},
          {"R2", csv::num(s.bounds.R2)},
          {"R", csv::num(s.bounds.R)}};
}

void write_solution(const Context &ctx, const QVHISolution &s) {
  {
    auto os = open_out(ctx, "history.csv");
    csv::write_history(os, s);
  }
  auto os = open_out(ctx, "solution.csv");
  csv::Writer w(os, {"index", "value"});
  for (Index i = 0; i < s.u.size(); ++i)
    w.row(long(i), s.u.coords[i]);
}

int cmd_solve(Obj &cfg, const Context &ctx) {
  const QVHIProblem P = parse_problem(cfg.at("problem"), ctx);
  const OuterConfig oc = parse_solver(cfg.has("solver") ? &cfg.at("solver") : nullptr, ctx);
  cfg.finish();
  const QVHISolution s = solve_qvhi(P, oc);
  spdlog::info("solve: {} after {} iterations", s.message, s.iterations);
  write_solution(ctx, s);
  write_summary(ctx, "summary.csv", solution_summary(P, s));
  return s.converged ? 0 : 2;
}

int cmd_mosco(Obj &cfg, const Context &ctx) {
  Obj vi(cfg.at("vi"), "vi");
  const Mat A = to_mat(vi.at("A"), "vi.A");
  GramSpace V = vi.has("gram") ? GramSpace::dense(to_mat(vi.at("gram"), "vi.gram"), "V")
                               : GramSpace::identity(A.rows(), "V");
  const DualVector g{V, to_vec(vi.at("g"), "vi.g")};
  VISolverConfig vc;
  vc.tol = vi.get("tol", 1e-12);
  vc.max_iter = vi.get("max_iter", 200000);
  vc.eps_inner = vi.get("eps_inner", 1e-12);

  Obj fam(cfg.at("family"), "family");
  const std::string kind = fam.req<std::string>("kind");
  std::vector<int> n_list = cfg.get<std::vector<int>>("n_list", {10, 100, 1000});
  VIInstance base{linear_operator(V, A), zero_function(V), whole_space(V), g};
  PerturbationFamily family;
  if (kind == "shrinking-ball") {
    const double r0 = fam.req<double>("radius");
    base.E = ball_set(Vector::zero(V), r0);
    family = shrinking_ball_family(V, r0, g);
  } else if (kind == "data-shift") {
    const DualVector e{V, to_vec(fam.at("e"), "family.e")};
    if (fam.has("radius"))
      base.E = ball_set(Vector::zero(V), fam.req<double>("radius"));
    family = data_shift_family(base.E, g, e);
  } else if (kind == "moving-box") {
    const Vec lo = to_vec(fam.at("lower"), "family.lower"), hi = to_vec(fam.at("upper"), "family.upper");
    base.E = box_set(V, lo, hi);
    family = moving_box_family(V, lo, hi, to_vec(fam.at("shift"), "family.shift"), g);
  } else if (kind == "halfspace-cap") {
    const DualVector a{V, to_vec(fam.at("normal"), "family.normal")};
    const double b = fam.req<double>("offset");
    base.E = halfspace_set(a, b);
    family = halfspace_cap_family(a, b, fam.req<double>("delta"), g);
  } else {
    throw DataError("family: unknown kind '" + kind + "'");
  }
  fam.finish();
  vi.finish();
  cfg.finish();
  const PerturbationResult res = perturbation_experiment(base, family, n_list, vc);
  auto os = open_out(ctx, "mosco.csv");
  csv::write_perturbation(os, res);
  for (const auto &r : res.rows)
    std::cout << "n = " << r.n << "  error = " << csv::num(r.error) << '\n';
  return 0;
}

int cmd_oracle_compare(Obj &cfg, const Context &ctx) {
  const QVHIProblem P = parse_problem(cfg.at("problem"), ctx);
  const OuterConfig oc = parse_solver(cfg.has("solver") ? &cfg.at("solver") : nullptr, ctx);
  Obj g(cfg.at("grid"), "grid");
  const double us = g.req<double>("u_spacing");
  const double zs = g.get("z_spacing", us);
  const Vec lo = to_vec(g.at("lower"), "grid.lower"), hi = to_vec(g.at("upper"), "grid.upper");
  const int starts = cfg.get("starts", 4);
  g.finish();
  cfg.finish();
  const BruteForceResult bf = brute_force_qvhi(P, us, zs, lo, hi);
  if (bf.clusters.empty())
    spdlog::warn("oracle-compare: {}", bf.diagnostic);
  const SolutionSetSample sample = sample_solution_set(P, oc, starts, ctx.seed, ctx.threads);

  auto os = open_out(ctx, "oracle.csv");
  csv::Writer w(os, {"start", "converged", "distance", "nearest_cluster", "spacing"});
  bool all_close = !bf.clusters.empty();
  for (std::size_t k = 0; k < sample.runs.size(); ++k) {
    const auto &r = sample.runs[k];
    double best = std::numeric_limits<double>::infinity();
    long nearest = -1;
    for (std::size_t c = 0; c < bf.clusters.size(); ++c) {
      const double d = (bf.clusters[c].representative - r.u).norm();
      if (d < best) {
        best = d;
        nearest = long(c);
      }
    }
    all_close = all_close && r.converged && best <= 2.0 * bf.spacing;
    w.row(long(k), r.converged, best, nearest, bf.spacing);
  }
  auto oc2 = open_out(ctx, "clusters.csv");
  csv::Writer wc(oc2, {"cluster", "u0", "u1", "score", "size"});
  for (std::size_t c = 0; c < bf.clusters.size(); ++c) {
    const Vec &x = bf.clusters[c].representative.coords;
    wc.row(long(c), x[0], x.size() > 1 ? x[1] : 0.0, bf.clusters[c].score, bf.clusters[c].size);
  }
  std::cout << "clusters = " << bf.clusters.size() << "  starts = " << sample.runs.size()
            << "  failures = " << sample.failures << "  agree = " << b2s(all_close) << '\n';
  return sample.failures == 0 ? 0 : 2;
}

ScalarField parse_field(const json &j, const std::string &what) {
  if (j.is_number())
    return constant_field(j.get<double>());
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "sin-1d")
      return [](double x, double) { return M_PI * M_PI * std::sin(M_PI * x); };
    if (s == "sin-2d")
      return [](double x, double y) {
        return 2.0 * M_PI * M_PI * std::sin(M_PI * x) * std::sin(M_PI * y);
      };
  }
  throw DataError(what + ": expected a number or one of \"sin-1d\", \"sin-2d\"");
}

ConstraintOptions parse_constraint(Obj &o) {
  ConstraintOptions K;
  if (!o.has("K"))
    return K;
  Obj k(o.at("K"), "K");
  const std::string kind = k.get<std::string>("kind", "ambient");
  if (kind == "none")
    K.kind = ConstraintOptions::Kind::None;
  else if (kind == "ambient")
    K.kind = ConstraintOptions::Kind::AmbientNorm;
  else if (kind == "gradient-l1")
    K.kind = ConstraintOptions::Kind::GradientL1;
  else
    throw DataError("K: unknown kind '" + kind + "'");
  K.m0 = k.get("m0", K.m0);
  K.rho2 = constant_field(k.get("rho2", 0.0));
  K.rho1 = constant_field(k.get("rho1", 1.0));
  return K;
}

MaterialLaw parse_law(Obj &o) {
  if (!o.has("law"))
    return linear_iso(1.0);
  Obj l(o.at("law"), "law");
  const std::string kind = l.get<std::string>("kind", "linear-iso");
  if (kind == "linear-iso")
    return linear_iso(l.get("c", 1.0));
  if (kind == "nonlinear-demo")
    return nonlinear_demo(l.req<double>("alpha_a"), l.req<double>("m_a"));
  throw DataError("law: unknown kind '" + kind + "'");
}

int cmd_fem_poisson(Obj &cfg, const Context &ctx, int dim) {
  const std::vector<int> sizes = cfg.get<std::vector<int>>("sizes", {8, 16, 32});
  cfg.finish();
  auto os = open_out(ctx, "convergence.csv");
  csv::Writer w(os, {"n", "h", "h1_error", "l2_error", "h1_ratio", "l2_ratio"});
  for (const ConvergenceRow &r : manufactured_study(dim, sizes)) {
    w.row(r.n, r.h, r.h1, r.l2, r.h1_ratio, r.l2_ratio);
    std::cout << "n = " << r.n << "  H1 = " << csv::num(r.h1) << "  L2 = " << csv::num(r.l2)
              << '\n';
  }
  return 0;
}

int cmd_fem(Obj &cfg, const Context &ctx) {
  const std::string model = cfg.req<std::string>("model");
  const int dim = cfg.get("dim", 1);
  if (model == "poisson")
    return cmd_fem_poisson(cfg, ctx, dim);
  const int n = cfg.get("n", 16);
  const MaterialLaw law = parse_law(cfg);
  const OuterConfig oc = parse_solver(cfg.has("solver") ? &cfg.at("solver") : nullptr, ctx, 1e-7);
  const LocallyLipschitz1D h = parse_potential(cfg);
  const ScalarField g1 = cfg.has("g1") ? parse_field(cfg.at("g1"), "g1") : constant_field(0.0);
  const ConstraintOptions K = parse_constraint(cfg);
  const std::vector<double> sweep = cfg.get<std::vector<double>>("c1bar_sweep", {});

  std::optional<FEMSpace> S;
  std::function<AssembledProblem(const LocallyLipschitz1D &, std::optional<double>)> build;
  if (model == "interior") {
    S = build_fem_space(build_mesh(dim, n, "interior-model"));
    const double ks = cfg.get("k_scale", 0.0);
    build = [&, ks](const LocallyLipschitz1D &hh, std::optional<double> nM) {
      InteriorOptions o;
      o.h = hh;
      o.k_scale = ks;
      o.g1 = g1;
      o.K = K;
      o.M_norm = nM;
      return build_interior_problem(*S, law, o);
    };
  } else if (model == "boundary") {
    S = build_fem_space(build_mesh(dim, n, "boundary-model"));
    const double ps = cfg.get("p_scale", 0.0);
    const ScalarField k2 = cfg.has("k2") ? parse_field(cfg.at("k2"), "k2") : constant_field(1.0);
    build = [&, ps, k2](const LocallyLipschitz1D &hh, std::optional<double> nM) {
      BoundaryOptions o;
      o.h2 = hh;
      o.p_scale = ps;
      o.g1 = g1;
      o.k2 = k2;
      o.K = K;
      o.M_norm = nM;
      return build_boundary_problem(*S, law, o);
    };
  } else {
    throw DataError("fem: unknown model '" + model + "'");
  }
  cfg.finish();
  const AssembledProblem AP = build(h, std::nullopt);
  {
    const HypothesisReport rep = check_hypotheses(AP, 500, ctx.seed);
    auto os = open_out(ctx, "hypotheses.csv");
    csv::Writer w(os, {"clause", "pass", "detail"});
    for (const auto &c : rep.clauses) {
      w.row(c.name, c.pass, "\"" + c.detail + "\"");
      if (!c.pass)
        spdlog::warn("hypothesis '{}' fails: {}", c.name, c.detail);
    }
  }
  {
    std::ofstream ms = open_out(ctx, "mesh.txt");
    csv::write_mesh(ms, AP.space.mesh);
  }
  if (!sweep.empty()) {
    auto os = open_out(ctx, "smallness.csv");
    csv::Writer w(os, {"c1bar", "margin", "pass"});
    for (double c : sweep) {
      const AssembledProblem Q =
          build(named_potential("remark43").with_growth(0.0, 1.0).scaled(c), AP.qvhi.M_norm);
      w.row(c, Q.smallness.margin, Q.smallness.pass);
    }
    std::cout << "smallness threshold c1bar = "
              << csv::num(smallness_threshold(AP.law.alpha_a, AP.qvhi.M_norm)) << '\n';
  }
  if (!AP.smallness.pass)
    throw DataError("smallness condition (H0) violated for the assembled model: margin " +
                    csv::num(AP.smallness.margin));
  const QVHISolution s = solve_qvhi(AP.qvhi, oc);
  write_solution(ctx, s);
  {
    auto os = open_out(ctx, "nodal.csv");
    csv::write_nodal(os, AP.space, s.u);
  }
  auto kv = solution_summary(AP.qvhi, s);
  kv.emplace_back("operator_norm_M", csv::num(AP.qvhi.M_norm));
  kv.emplace_back("smallness_margin", csv::num(AP.smallness.margin));
  if (AP.model == "boundary") {
    const ComplementarityReport cr = complementarity(AP, s.u, s.w);
    kv.emplace_back("complementarity_max_product", csv::num(cr.max_product));
    kv.emplace_back("complementarity_min_multiplier", csv::num(cr.min_multiplier));
    kv.emplace_back("obstacle_max_violation", csv::num(cr.max_violation));
  }
  write_summary(ctx, "summary.csv", kv);
  return s.converged ? 0 : 2;
}

int cmd_bounds(Obj &cfg, const Context &ctx) {
  const QVHIProblem P = parse_problem(cfg.at("problem"), ctx);
  const OuterConfig oc = parse_solver(cfg.has("solver") ? &cfg.at("solver") : nullptr, ctx);
  cfg.finish();
  const APrioriBounds B = a_priori_bounds(P);
  const QVHISolution s = solve_qvhi(P, oc);
  const double un = s.u.norm(), mun = P.M.apply(s.u).norm();
  write_summary(ctx, "bounds.csv",
                {{"c1", csv::num(B.c1)},
                 {"c2", csv::num(B.c2)},
                 {"R1", csv::num(B.R1)},
                 {"R2", csv::num(B.R2)},
                 {"R", csv::num(B.R)},
                 {"u_norm", csv::num(un)},
                 {"Mu_norm", csv::num(mun)},
                 {"within_R1", b2s(un <= B.R1 + 1e-6)},
                 {"within_R2", b2s(mun <= B.R2 + 1e-6)},
                 {"truncation_active", b2s(s.truncation_active)},
                 {"converged", b2s(s.converged)}});
  return s.converged ? 0 : 2;
}

int cmd_sample(Obj &cfg, const Context &ctx) {
  const QVHIProblem P = parse_problem(cfg.at("problem"), ctx);
  const OuterConfig oc = parse_solver(cfg.has("solver") ? &cfg.at("solver") : nullptr, ctx);
  const int starts = cfg.get("starts", 8);
  cfg.finish();
  const SolutionSetSample s = sample_solution_set(P, oc, starts, ctx.seed, ctx.threads);
  {
    auto os = open_out(ctx, "solutions.csv");
    csv::Writer w(os, {"index", "u_norm", "coords"});
    for (std::size_t k = 0; k < s.solutions.size(); ++k) {
      std::string coords;
      for (Index i = 0; i < s.solutions[k].size(); ++i)
        coords += (i ? " " : "") + csv::num(s.solutions[k].coords[i]);
      w.row(long(k), s.solutions[k].norm(), coords);
    }
  }
  write_summary(ctx, "summary.csv",
                {{"starts", std::to_string(starts)},
                 {"distinct_solutions", std::to_string(s.solutions.size())},
                 {"failures", std::to_string(s.failures)},
                 {"diameter", csv::num(s.diameter)},
                 {"bounds_ok", b2s(s.bounds_ok)}});
  return s.failures == 0 ? 0 : 2;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("qvhi");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char *lv = std::getenv("QVHI_LOG")) {
    const std::string s = lv;
    if (s == "error")
      spdlog::set_level(spdlog::level::err);
    else if (s == "info")
      spdlog::set_level(spdlog::level::info);
    else if (s == "debug")
      spdlog::set_level(spdlog::level::debug);
    else
      spdlog::warn("QVHI_LOG='{}' not recognised; expected error, info or debug", s);
  }
}

} // namespace

int main(int argc, char **argv) {
  setup_logging();
  CLI::App app{"Solver and experiment runner for quasi-variational-hemivariational inequalities"};
  app.footer(kColumnsHelp);
  app.require_subcommand(1);
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"solve", "solve one problem and certify the result"},
      {"mosco", "perturbation study on a family of constraint sets or data"},
      {"oracle-compare", "compare solver output with the brute-force grid oracle (dim <= 2)"},
      {"fem", "finite-element models: poisson, interior, boundary"},
      {"bounds", "a-priori bounds next to the computed solution"},
      {"sample", "multistart sampling of the solution set"}};
  for (const auto &[name, help] : subs) {
    CLI::App *sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "JSON experiment config")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads for multistart runs")
        ->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    std::ifstream in(config);
    if (!in)
      throw DataError("cannot open config " + config);
    json doc;
    try {
      in >> doc;
    } catch (const json::exception &e) {
      throw DataError(std::string("config is not valid JSON: ") + e.what());
    }
    Obj cfg(doc, "config");
    if (cfg.req<int>("schema_version") != kSchemaVersion)
      throw DataError("config: unsupported schema_version (expected " +
                      std::to_string(kSchemaVersion) + ")");
    Context ctx;
    ctx.config_dir = fs::path(config).parent_path();
    ctx.out = out;
    ctx.seed = seed ? *seed : cfg.get<std::uint64_t>("seed", 0);
    ctx.threads = threads;
    const std::string declared = cfg.get<std::string>("command", cmd);
    if (declared != cmd)
      throw DataError("config is for '" + declared + "', not '" + cmd + "'");
    cfg.get<std::string>("description", "");
    spdlog::info("{}: config {}, seed {}", cmd, config, ctx.seed);
    if (cmd == "solve")
      return cmd_solve(cfg, ctx);
    if (cmd == "mosco")
      return cmd_mosco(cfg, ctx);
    if (cmd == "oracle-compare")
      return cmd_oracle_compare(cfg, ctx);
    if (cmd == "fem")
      return cmd_fem(cfg, ctx);
    if (cmd == "bounds")
      return cmd_bounds(cfg, ctx);
    return cmd_sample(cfg, ctx);
  } catch (const ConvergenceError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
