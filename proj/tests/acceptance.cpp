// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>

#include "oracles.hpp"
#include "qvhi.hpp"

using namespace qvhi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(double x, int digits = 3) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

VISolverConfig tight_vi() {
  VISolverConfig c;
  c.tol = 1e-12;
  c.eps_inner = 1e-13;
  return c;
}

OuterConfig tight_outer() {
  OuterConfig c;
  c.vi_cfg.tol = 1e-12;
  c.vi_cfg.eps_inner = 1e-12;
  return c;
}

std::vector<Vector> box_samples(const oracle::Instance2D &I, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vector> out;
  for (int k = 0; k < n; ++k)
    out.push_back(Vector{I.vi.A.domain, (Vec(2) << I.lo[0] + (I.hi[0] - I.lo[0]) * u(rng),
                                         I.lo[1] + (I.hi[1] - I.lo[1]) * u(rng)).finished()});
  return out;
}

Outcome vi_oracle_equivalence() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto I = oracle::random_instance(seed);
    const VISolution s = solve_vi(I.vi, tight_vi(), Vector::zero(I.vi.A.domain));
    if (!s.converged)
      return {false, "seed " + std::to_string(seed) + " did not converge"};
    worst = std::max(worst, (s.u.coords - oracle::grid_minimizer(I, 1e-3)).norm());
  }
  return {worst <= 2e-3, "max distance " + fmt(worst) + " over 20 instances"};
}

Outcome vi_uniqueness() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto I = oracle::random_instance(seed);
    std::mt19937_64 rng(seed + 1000);
    std::normal_distribution<double> n;
    std::vector<Vector> sols;
    for (int k = 0; k < 10; ++k)
      sols.push_back(
          solve_vi(I.vi, tight_vi(), Vector{I.vi.A.domain, (Vec(2) << 5 * n(rng), 5 * n(rng)).finished()})
              .u);
    for (const auto &a : sols)
      for (const auto &b : sols)
        worst = std::max(worst, (a - b).norm());
  }
  return {worst <= 1e-8, "max pairwise distance " + fmt(worst)};
}

Outcome minty_equivalence() {
  double worst = std::numeric_limits<double>::infinity();
  int violated = 0, tried = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto I = oracle::random_instance(seed);
    const VISolution s = solve_vi(I.vi, tight_vi(), Vector::zero(I.vi.A.domain));
    const auto samples = box_samples(I, 10000, seed + 7);
    const MintyReport r = minty_check(I.vi, s.u, samples, 1e-8);
    worst = std::min({worst, r.min_direct, r.min_minty});
    int here = 0;
    for (std::size_t k = 0; here < 5 && k < samples.size(); ++k) {
      if ((samples[k] - s.u).norm() < 0.05)
        continue;
      ++here;
      ++tried;
      if (!minty_check(I.vi, samples[k], samples, 1e-8).direct_ok)
        ++violated;
    }
  }
  return {worst >= -1e-8 && violated == tried && tried == 100,
          "min slack " + fmt(worst) + ", non-solutions violating " + std::to_string(violated) +
              "/" + std::to_string(tried)};
}

Outcome contraction_rate() {
  double worst_margin = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    const int d = 3 + int(seed % 4);
    Mat B(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        B(i, j) = n(rng);
    const Mat A = B * B.transpose() + Mat::Identity(d, d);
    GramSpace V = GramSpace::identity(d);
    Vec g(d);
    for (int i = 0; i < d; ++i)
      g[i] = n(rng);
    VIInstance vi{linear_operator(V, A), zero_function(V), whole_space(V), DualVector{V, g}};
    VISolverConfig c;
    c.tol = 1e-14;
    c.max_iter = 200;
    const VISolution s = solve_vi(vi, c, Vector{V, Vec::Constant(d, 10.0)});
    const double m = vi.A.m_strong, L = vi.A.lipschitz;
    const double bound = std::sqrt(1.0 - m * m / (L * L)) + 0.05;
    if (s.history.size() < 12)
      return {false, "too few iterations recorded"};
    for (std::size_t k = s.history.size() - 10; k < s.history.size(); ++k)
      if (s.history[k - 1] > 1e-300)
        worst_margin = std::max(worst_margin, s.history[k] / s.history[k - 1] - bound);
  }
  return {worst_margin <= 0.0, "max ratio minus bound " + fmt(worst_margin)};
}

Outcome perturbation_convergence() {
  GramSpace V = GramSpace::identity(2);
  const DualVector g{V, (Vec(2) << 6.0, 8.0).finished()};
  const double a = 2.0, r0 = 1.0;
  VIInstance base{linear_operator(V, Mat(a * Mat::Identity(2, 2))), zero_function(V),
                  ball_set(Vector::zero(V), r0), g};
  const auto ball = perturbation_experiment(base, shrinking_ball_family(V, r0, g),
                                            {10, 100, 1000}, tight_vi());
  const Vector u = radial_ball_solution(g, a, r0);
  double closed = 0.0;
  for (const auto &row : ball.rows)
    closed = std::max(closed, std::abs(row.error - (radial_ball_solution(g, a, r0 * (1.0 + 1.0 / row.n)) - u).norm()));
  double ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto I = oracle::random_instance(seed + 50);
    const DualVector e{I.vi.A.domain, (Vec(2) << 1.5, -2.0).finished()};
    const auto shift = perturbation_experiment(I.vi, data_shift_family(I.vi.E, I.vi.g, e),
                                               {10, 100, 1000}, tight_vi());
    for (const auto &row : shift.rows)
      ratio = std::max(ratio, row.error / (e.norm() / (I.vi.A.m_strong * row.n)));
  }
  return {closed <= 1e-6 && ratio <= 1.01,
          "closed-form gap " + fmt(closed) + ", error / bound " + fmt(ratio)};
}

Outcome bound_audit() {
  int bad = 0, solves = 0;
  for (int dim : {1, 2, 3, 4, 5})
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const QVHIProblem P = synthetic_instance(dim, seed, Regime::Unique);
      const QVHISolution s = solve_qvhi(P, tight_outer());
      ++solves;
      if (!s.converged || s.u.norm() > s.bounds.R1 + 1e-6 ||
          P.M.apply(s.u).norm() > s.bounds.R2 + 1e-6 || s.truncation_active)
        ++bad;
    }
  return {bad == 0 && solves == 50, std::to_string(solves - bad) + "/" + std::to_string(solves) +
                                        " solves within R1, R2 with inactive truncation"};
}

Outcome qvhi_oracle_equivalence() {
  struct Case {
    std::string name;
    QVHIProblem P;
  };
  std::vector<Case> cases;
  for (const char *key : {"remark43-1d", "constraint-family-1d", "vi-box-1d", "vi-l1-1d", "vi-ball-2d"})
    cases.push_back({key, hand_instance(key)});
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    cases.push_back({"synthetic-2d-" + std::to_string(seed), synthetic_instance(2, seed, Regime::Unique)});
  cases.push_back({"synthetic-1d-3", synthetic_instance(1, 3, Regime::Unique)});
  cases.push_back({"multistable-1d", synthetic_instance(1, 1, Regime::Multistable)});
  double worst = 0.0;
  std::string where;
  for (const auto &c : cases) {
    const Index dim = c.P.V().dim();
    const double h = dim == 1 ? 1e-3 : 5e-3;
    const SolutionSetSample sample = sample_solution_set(c.P, tight_outer(), 4, 1);
    if (sample.solutions.empty())
      return {false, c.name + ": solver found no solution"};
    double R = 0.0;
    for (const auto &u : sample.solutions)
      R = std::max(R, u.coords.lpNorm<Eigen::Infinity>());
    R = std::max(1.0, 1.5 * R + 0.5);
    const BruteForceResult bf =
        brute_force_qvhi(c.P, h, h, Vec::Constant(dim, -R), Vec::Constant(dim, R));
    for (const auto &u : sample.solutions) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto &cl : bf.clusters)
        best = std::min(best, (cl.representative - u).norm());
      if (best / h > worst) {
        worst = best / h;
        where = c.name;
      }
    }
  }
  return {worst <= 2.0, "max distance / spacing " + fmt(worst) + " (" + where + ") over " +
                            std::to_string(cases.size()) + " instances"};
}

Outcome special_case_collapse() {
  GramSpace V = GramSpace::dense((Mat(2, 2) << 2.0, 0.3, 0.3, 1.0).finished());
  GramSpace X = GramSpace::identity(2, "X");
  const Mat A = (Mat(2, 2) << 3.0, 1.0, -0.5, 2.0).finished();
  const DualVector f{V, (Vec(2) << 4.0, -3.0).finished()};
  const auto constant_ball =
      RadialConstraintFamily::ambient_norm(V, [](const Vector &) { return 0.7; }, 0.7);
  const ConstraintSet box = box_set(V, -Vec::Constant(2, 0.4), Vec::Constant(2, 0.5));
  struct Case {
    ConvexFunction phi;
    RadialConstraintFamily K;
    ConstraintSet C, E;
  };
  const std::vector<Case> cases = {
      {zero_function(V), RadialConstraintFamily::unconstrained(V), whole_space(V), whole_space(V)},
      {zero_function(V), RadialConstraintFamily::unconstrained(V), box, box},
      {weighted_l1(V, Vec::Constant(2, 0.5)), constant_ball, whole_space(V),
       ball_set(Vector::zero(V), 0.7)},
      {weighted_l1(V, Vec::Constant(2, 0.5)), constant_ball, box,
       intersect(ball_set(Vector::zero(V), 0.7), box)}};
  double worst = 0.0;
  for (const auto &c : cases) {
    const QVHIProblem P = make_qvhi_problem(linear_operator(V, A), c.phi,
                                            SuperpositionFunctional(X, named_potential("zero")),
                                            LinearMap::identity(V, X), f, c.K, c.C, 0.0, 0.0);
    const QVHISolution q = solve_qvhi(P, tight_outer());
    const VISolution v = solve_vi(VIInstance{P.A, c.phi, c.E, f}, tight_vi(), Vector::zero(V));
    if (!q.converged || !v.converged)
      return {false, "a reference solve did not converge"};
    worst = std::max(worst, (q.u - v.u).norm());
  }
  return {worst <= 1e-10, "max gap " + fmt(worst) + " over 4 degenerate configurations"};
}

Outcome relaxed_monotonicity() {
  const auto h = named_potential("remark43");
  const auto wit = relaxed_monotonicity_witness(h, 5.0);
  const int n = 12;
  const bool analytic = 1.0 - (1.0 + 2.0 * 5.0) / n > 0.0;
  const bool straddles = wit && wit->r < 1.0 && wit->s > 1.0 && wit->value < 0.0;
  // Pair r, s = 1 -+ 1/n: value -(2/n)(1 - (1 + 2m)/n) = -1/72 at n = 12, m = 5.
  const double pair12 = relaxed_monotonicity_value(h, 5.0, 1.0 - 1.0 / n, 1.0 + 1.0 / n);
  const bool closed_form = std::abs(pair12 + 1.0 / 72.0) <= 1e-14;
  bool convex_clean = true;
  for (const char *key : {"abs", "smooth-quad", "zero"})
    for (double m : {0.0, 0.5, 1.0, 5.0, 100.0})
      if (relaxed_monotonicity_witness(named_potential(key), m))
        convex_clean = false;
  return {analytic && straddles && closed_form && convex_clean,
          wit ? "witness r = " + fmt(wit->r, 6) + ", s = " + fmt(wit->s, 6) +
                    ", value = " + fmt(wit->value) + ", n = 12 pair value " + fmt(pair12, 6)
              : "no witness"};
}

Outcome manufactured_solution() {
  std::string detail;
  bool ok = true;
  for (int dim : {1, 2}) {
    const auto rows = manufactured_study(dim, {8, 16, 32, 64});
    for (std::size_t k = 1; k < rows.size(); ++k) {
      ok = ok && rows[k].h1_ratio >= 1.7 && rows[k].h1_ratio <= 2.3 && rows[k].l2_ratio >= 3.4 &&
           rows[k].l2_ratio <= 4.6;
    }
    detail += std::to_string(dim) + "D ratios H1 " + fmt(rows.back().h1_ratio) + ", L2 " +
              fmt(rows.back().l2_ratio) + "; ";
  }
  const FEMSpace S = build_fem_space(build_mesh(1, 64, "dirichlet-all"));
  const double nrm = operator_norm(assemble_embedding(S));
  const double rel = std::abs(nrm * M_PI - 1.0);
  ok = ok && rel <= 0.02;
  return {ok, detail + "1D embedding norm off 1/pi by " + fmt(100 * rel) + "%"};
}

template <class Build>
double flip_point(Build build, double expected) {
  for (int k = 0; k <= 400; ++k) {
    const double c = expected * (0.5 + k / 400.0);
    if (!build(c).smallness.pass)
      return c;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

Outcome smallness_flip() {
  const FEMSpace S1 = build_fem_space(build_mesh(1, 32, "interior-model"));
  const double alpha1 = 1.0;
  double nM1 = 0.0;
  auto interior = [&](double c) {
    InteriorOptions o;
    o.h = named_potential("remark43").with_growth(0.0, 1.0).scaled(c);
    if (nM1 > 0.0)
      o.M_norm = nM1;
    return build_interior_problem(S1, linear_iso(alpha1), o);
  };
  nM1 = interior(1.0).qvhi.M_norm;
  const double t1 = alpha1 / (std::sqrt(2.0) * std::pow(oracle::embedding_norm_oracle(S1), 2));
  const double e1 = std::abs(flip_point(interior, t1) / t1 - 1.0);

  const FEMSpace S2 = build_fem_space(build_mesh(2, 8, "boundary-model"));
  const double alpha2 = 2.0;
  const double nM2 = operator_norm(assemble_trace(S2));
  auto boundary = [&](double c) {
    BoundaryOptions o;
    o.h2 = named_potential("remark43").with_growth(0.0, 1.0).scaled(c);
    o.k2 = constant_field(1.0);
    o.M_norm = nM2;
    return build_boundary_problem(S2, linear_iso(alpha2), o);
  };
  const double t2 = alpha2 / (std::sqrt(2.0) * std::pow(oracle::trace_norm_oracle(S2), 2));
  const double e2 = std::abs(flip_point(boundary, t2) / t2 - 1.0);
  return {e1 <= 0.01 && e2 <= 0.01, "interior flip off by " + fmt(100 * e1) +
                                        "%, boundary flip off by " + fmt(100 * e2) + "%"};
}

Outcome obstacle_activity() {
  const FEMSpace S = build_fem_space(build_mesh(2, 12, "boundary-model"));
  BoundaryOptions o;
  const double nM = operator_norm(assemble_trace(S));
  o.h2 = named_potential("remark43").with_growth(0.0, 1.0).scaled(0.5 * smallness_threshold(1.0, nM));
  o.g1 = constant_field(4.0);
  o.k2 = constant_field(0.0);
  o.M_norm = nM;
  const AssembledProblem AP = build_boundary_problem(S, linear_iso(1.0), o);
  OuterConfig c = tight_outer();
  c.vi_cfg.tol = 1e-11;
  c.tol_outer = 1e-9;
  const QVHISolution s = solve_qvhi(AP.qvhi, c);
  double worst = 0.0;
  for (Index i : AP.part3_free)
    worst = std::max(worst, std::abs(s.u.coords[i]));
  const QVHIResidual r = qvhi_residual(AP.qvhi, s.u, s.w, auto_step(AP.qvhi.A));
  return {s.converged && worst <= 1e-8 && r.pass(1e-6),
          "max |u| on the obstacle part " + fmt(worst) + ", certificate residual " + fmt(r.fp)};
}

int run_cli(const std::string &args) {
  const std::string cmd = std::string(QVHI_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string csv_body(const fs::path &p) {
  std::ifstream in(p);
  std::string first;
  std::getline(in, first);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"solve", "demo-1d-remark43"}, {"sample", "sample-multistable"},
      {"oracle-compare", "oracle-synthetic-2d"}, {"fem", "fem-boundary-2d"},
      {"mosco", "mosco-shrinking-ball"}};
  int files = 0, differing = 0;
  for (const auto &[cmd, name] : runs) {
    const std::string cfg = std::string(QVHI_CONFIG_DIR) + "/" + name + ".json";
    const fs::path base = fs::temp_directory_path() / ("qvhi_acceptance_" + name);
    fs::remove_all(base);
    for (const char *run : {"a", "b"})
      if (run_cli(cmd + " --config " + cfg + " --seed 3 --threads " + (run[0] == 'a' ? "1" : "3") +
                  " --out " + (base / run).string()) != 0)
        return {false, name + " exited with an error"};
    for (const auto &e : fs::directory_iterator(base / "a")) {
      if (e.path().extension() != ".csv")
        continue;
      ++files;
      if (csv_body(e.path()) != csv_body(base / "b" / e.path().filename()))
        ++differing;
    }
  }
  return {differing == 0 && files > 0,
          std::to_string(files - differing) + "/" + std::to_string(files) + " CSV bodies identical"};
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"VI oracle equivalence", vi_oracle_equivalence},
      {"VI uniqueness from random starts", vi_uniqueness},
      {"direct and Minty forms", minty_equivalence},
      {"contraction rate", contraction_rate},
      {"perturbation convergence", perturbation_convergence},
      {"a-priori bound audit", bound_audit},
      {"QVHI oracle equivalence", qvhi_oracle_equivalence},
      {"special-case collapse", special_case_collapse},
      {"relaxed-monotonicity witness", relaxed_monotonicity},
      {"FEM manufactured solution", manufactured_solution},
      {"smallness flip", smallness_flip},
      {"boundary obstacle activity", obstacle_activity},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::printf("[%s] %2zu %-34s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", k + 1,
                criteria[k].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
