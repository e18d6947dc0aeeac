#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qvhi/clarke.hpp"
#include "qvhi/convex.hpp"
#include "qvhi/fem.hpp"
#include "qvhi/hilbert.hpp"
#include "qvhi/solver.hpp"

namespace qvhi {

using ScalarField = std::function<double(double, double)>;

inline ScalarField constant_field(double c) {
  return [c](double, double) { return c; };
}

/// Flux law xi -> a(x, xi).
///  linear-iso:     a = c(x) xi with alpha_a <= c <= m_a
///  nonlinear-demo: a = (alpha_a + (m_a - alpha_a)/(1 + |xi|)) xi
struct MaterialLaw {
  enum class Kind { LinearIso, NonlinearDemo };
  Kind kind = Kind::LinearIso;
  ScalarField c = constant_field(1.0);
  double alpha_a = 1.0; ///< strong monotonicity constant
  double m_a = 1.0;     ///< growth / Lipschitz constant

  Eigen::Vector2d flux(double x, double y, const Eigen::Vector2d &xi) const {
    if (kind == Kind::LinearIso)
      return c(x, y) * xi;
    return (alpha_a + (m_a - alpha_a) / (1.0 + xi.norm())) * xi;
  }

  std::string name() const { return kind == Kind::LinearIso ? "linear-iso" : "nonlinear-demo"; }
};

inline MaterialLaw linear_iso(double c) {
  return {MaterialLaw::Kind::LinearIso, constant_field(c), c, c};
}

inline MaterialLaw linear_iso(ScalarField c, double c_min, double c_max) {
  return {MaterialLaw::Kind::LinearIso, std::move(c), c_min, c_max};
}

inline MaterialLaw nonlinear_demo(double alpha_a, double m_a) {
  if (!(m_a >= alpha_a))
    throw DataError("nonlinear-demo law needs m_a >= alpha_a");
  return {MaterialLaw::Kind::NonlinearDemo, constant_field(1.0), alpha_a, m_a};
}

/// <Au, v> = sum over cells |T| a(x_T, grad u) . grad v with centroid
/// quadrature; constants (alpha_a, m_a) in the stiffness metric.
inline NonlinearOperator assemble_operator(const FEMSpace &S, const MaterialLaw &law) {
  if (law.kind == MaterialLaw::Kind::LinearIso) {
    SpMat K = restrict_free(assemble_weighted_stiffness(S.mesh, law.c), S.free_index, S.n_free());
    return linear_operator(S.V, std::move(K), std::max(0.0, law.alpha_a),
                           std::max(law.m_a, 1e-300));
  }
  const SpMat D = assemble_gradient(S);
  const Mesh &mesh = S.mesh;
  std::vector<double> meas(mesh.cells.size());
  std::vector<Eigen::Vector2d> cent(mesh.cells.size());
  for (std::size_t e = 0; e < mesh.cells.size(); ++e) {
    meas[e] = mesh.cell_measure(e);
    cent[e] = mesh.centroid(e);
  }
  const int dim = mesh.dim;
  auto fn = [D, meas, cent, dim, law](const Vec &u) -> Vec {
    const Vec g = D * u;
    Vec flux(g.size());
    for (std::size_t e = 0; e < meas.size(); ++e) {
      Eigen::Vector2d xi = Eigen::Vector2d::Zero();
      for (int d = 0; d < dim; ++d)
        xi[d] = g[Index(e) * dim + d];
      const Eigen::Vector2d a = law.flux(cent[e].x(), cent[e].y(), xi);
      for (int d = 0; d < dim; ++d)
        flux[Index(e) * dim + d] = meas[e] * a[d];
    }
    return D.transpose() * flux;
  };
  return NonlinearOperator(S.V, fn, std::max(0.0, law.alpha_a), std::max(law.m_a, 1e-300));
}

/// K(v) = {w : r(w) <= m0 + sum_i omega_i rho2(x_i) |(i v)_i|}.
struct ConstraintOptions {
  enum class Kind { None, AmbientNorm, GradientL1 };
  Kind kind = Kind::AmbientNorm;
  double m0 = 1.0;
  ScalarField rho2 = constant_field(0.0);
  ScalarField rho1 = constant_field(1.0); ///< weight of |grad w| for GradientL1
};

struct InteriorOptions {
  LocallyLipschitz1D h = named_potential("zero");
  double k_scale = 0.0; ///< phi(v) = k_scale * sum over part-2 nodes of bw_i |v_i|
  ScalarField g1 = constant_field(0.0);
  ConstraintOptions K{};
  std::optional<double> M_norm; ///< reuse a known ||i|| across sweeps
};

struct BoundaryOptions {
  LocallyLipschitz1D h2 = named_potential("zero");
  double p_scale = 0.0; ///< phi(v) = p_scale * sum over nodes of omega_i |v_i|
  ScalarField g1 = constant_field(0.0);
  ScalarField k2 = constant_field(1e30); ///< obstacle on part 3: v <= k2
  bool unilateral = true;
  ConstraintOptions K{};
  std::optional<double> M_norm;
};

struct AssembledProblem {
  FEMSpace space;
  QVHIProblem qvhi;
  std::string model; ///< "interior" or "boundary"
  MaterialLaw law;
  ConstraintOptions K_options;
  std::vector<Index> part3_free; ///< free indices of obstacle nodes
  Vec k2;                        ///< obstacle values at part3_free
  SmallnessCheck smallness;
};

namespace detail {

inline RadialConstraintFamily fem_constraint_family(const FEMSpace &S, const ConstraintOptions &o) {
  if (o.kind == ConstraintOptions::Kind::None)
    return RadialConstraintFamily::unconstrained(S.V);
  Vec node_w(S.mesh.n_nodes());
  for (Index i = 0; i < S.mesh.n_nodes(); ++i) {
    const auto &p = S.mesh.nodes[std::size_t(i)];
    node_w[i] = S.lumped_mass[i] * o.rho2(p.x(), p.y());
  }
  if ((node_w.array() < 0.0).any())
    throw DataError("constraint weight rho2 must be >= 0");
  const std::vector<Index> free_nodes = S.free_nodes;
  const double m0 = o.m0;
  auto m = [node_w, free_nodes, m0](const Vector &v) {
    double s = m0;
    for (std::size_t k = 0; k < free_nodes.size(); ++k)
      s += node_w[free_nodes[k]] * std::abs(v.coords[Index(k)]);
    return s;
  };
  if (o.kind == ConstraintOptions::Kind::AmbientNorm)
    return RadialConstraintFamily::ambient_norm(S.V, m, m0);
  const SpMat D = assemble_gradient(S);
  std::vector<Index> ptr;
  Vec wts(Index(S.mesh.cells.size()));
  for (std::size_t e = 0; e < S.mesh.cells.size(); ++e) {
    ptr.push_back(Index(e) * S.mesh.dim);
    const auto c = S.mesh.centroid(e);
    wts[Index(e)] = o.rho1(c.x(), c.y()) * S.mesh.cell_measure(e);
  }
  ptr.push_back(D.rows());
  return RadialConstraintFamily::weighted_l1(S.V, D, ptr, wts, m, m0);
}

inline Vec part_weights_on_free(const FEMSpace &S) {
  Vec w = Vec::Zero(S.n_free());
  for (std::size_t k = 0; k < S.part2_nodes.size(); ++k) {
    const Index f = S.free_index[std::size_t(S.part2_nodes[k])];
    if (f >= 0)
      w[f] = S.boundary_mass[Index(k)];
  }
  return w;
}

} // namespace detail

/// Interior semipermeability model on a mesh with parts 1 (Dirichlet) and 2.
/// Hypothesis failures do not throw here; see check_hypotheses.
inline AssembledProblem build_interior_problem(const FEMSpace &S, const MaterialLaw &law,
                                               const InteriorOptions &o) {
  NonlinearOperator A = assemble_operator(S, law);
  ConvexFunction phi = o.k_scale > 0.0
                           ? weighted_l1(S.V, o.k_scale * detail::part_weights_on_free(S))
                           : zero_function(S.V);
  SuperpositionFunctional j(S.X_domain, o.h);
  const GrowthConstants gc = j.growth(GrowthForm::Holder);
  LinearMap M = assemble_embedding(S);
  DualVector f{S.V, lumped_load(S, o.g1)};
  QVHIProblem P = make_qvhi_problem(std::move(A), std::move(phi), std::move(j), std::move(M),
                                    std::move(f), detail::fem_constraint_family(S, o.K),
                                    whole_space(S.V), gc.alpha, gc.beta, false, o.M_norm);
  const SmallnessCheck sc = check_smallness(P);
  return AssembledProblem{S, std::move(P), "interior", law, o.K, {}, Vec(), sc};
}

/// Boundary semipermeability model: parts 1 (Dirichlet), 2 (nonmonotone
/// boundary law through the trace) and 3 (unilateral v <= k2).
inline AssembledProblem build_boundary_problem(const FEMSpace &S, const MaterialLaw &law,
                                               const BoundaryOptions &o) {
  const std::vector<Index> p3 = S.mesh.part_nodes(BoundaryPart::P3);
  if (p3.empty())
    throw DataError("build_boundary_problem: the unilateral boundary part is empty");
  NonlinearOperator A = assemble_operator(S, law);
  ConvexFunction phi = zero_function(S.V);
  if (o.p_scale > 0.0) {
    Vec w(S.n_free());
    for (Index k = 0; k < S.n_free(); ++k)
      w[k] = o.p_scale * S.lumped_mass[S.free_nodes[std::size_t(k)]];
    phi = weighted_l1(S.V, w);
  }
  LinearMap M = assemble_trace(S);
  SuperpositionFunctional j(*S.X_boundary, o.h2);
  const GrowthConstants gc = j.growth(GrowthForm::Holder);
  DualVector f{S.V, lumped_load(S, o.g1)};

  std::vector<Index> part3_free;
  std::vector<double> k2vals;
  const double inf = std::numeric_limits<double>::infinity();
  Vec upper = Vec::Constant(S.n_free(), inf);
  for (Index node : p3) {
    const Index fi = S.free_index[std::size_t(node)];
    if (fi < 0)
      continue;
    const auto &p = S.mesh.nodes[std::size_t(node)];
    const double k = o.k2(p.x(), p.y());
    part3_free.push_back(fi);
    k2vals.push_back(k);
    if (o.unilateral)
      upper[fi] = k;
  }
  ConstraintSet C = o.unilateral ? box_set(S.V, Vec::Constant(S.n_free(), -inf), upper)
                                 : whole_space(S.V);
  QVHIProblem P = make_qvhi_problem(std::move(A), std::move(phi), std::move(j), std::move(M),
                                    std::move(f), detail::fem_constraint_family(S, o.K),
                                    std::move(C), gc.alpha, gc.beta, false, o.M_norm);
  const SmallnessCheck sc = check_smallness(P);
  Vec k2 = Eigen::Map<Vec>(k2vals.data(), Index(k2vals.size()));
  return AssembledProblem{S, std::move(P), "boundary", law, o.K, std::move(part3_free),
                          std::move(k2), sc};
}

struct HypothesisClause {
  std::string name;
  bool pass;
  std::string detail;
};

struct HypothesisReport {
  std::vector<HypothesisClause> clauses;

  bool all_pass() const {
    return std::all_of(clauses.begin(), clauses.end(), [](const auto &c) { return c.pass; });
  }
  const HypothesisClause *find(const std::string &name) const {
    for (const auto &c : clauses)
      if (c.name == name)
        return &c;
    return nullptr;
  }
};

namespace detail {

inline std::string fmt_point(std::initializer_list<double> xs) {
  std::ostringstream os;
  os.precision(6);
  os << '(';
  bool first = true;
  for (double x : xs) {
    os << (first ? "" : ", ") << x;
    first = false;
  }
  os << ')';
  return os.str();
}

} // namespace detail

/// Sampled checks of the flux law: a(x,0) = 0, growth |a| <= m_a (1 + |xi|),
/// strong monotonicity with constant alpha_a > 0.
inline std::vector<HypothesisClause> check_material_law(const MaterialLaw &law, int dim,
                                                        int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss;
  auto xi = [&]() -> Eigen::Vector2d {
    const double a = gauss(rng);
    const double b = dim == 2 ? gauss(rng) : 0.0;
    return Eigen::Vector2d(a, b) * std::pow(10.0, 3.0 * unif(rng) - 1.0);
  };
  std::vector<HypothesisClause> out;
  HypothesisClause zero{"law: a(x,0) = 0", true, ""};
  HypothesisClause growth{"law: growth", true, ""};
  HypothesisClause mono{"law: strong monotonicity", law.alpha_a > 0.0, ""};
  for (int k = 0; k < n_samples; ++k) {
    const double x = unif(rng), y = dim == 2 ? unif(rng) : 0.0;
    if (zero.pass && law.flux(x, y, Eigen::Vector2d::Zero()).norm() > 1e-14) {
      zero.pass = false;
      zero.detail = "witness x = " + detail::fmt_point({x, y});
    }
    const Eigen::Vector2d a = xi(), b = xi();
    const Eigen::Vector2d fa = law.flux(x, y, a), fb = law.flux(x, y, b);
    if (growth.pass && fa.norm() > law.m_a * (1.0 + a.norm()) * (1 + 1e-12)) {
      growth.pass = false;
      growth.detail = "witness xi = " + detail::fmt_point({a.x(), a.y()});
    }
    const double lhs = (fa - fb).dot(a - b), rhs = law.alpha_a * (a - b).squaredNorm();
    if (mono.pass && (lhs < rhs - 1e-12 * std::max(1.0, std::abs(rhs)) || lhs <= 0.0)) {
      mono.pass = false;
      mono.detail = "witness xi1 = " + detail::fmt_point({a.x(), a.y()}) +
                    ", xi2 = " + detail::fmt_point({b.x(), b.y()});
    }
    if (!mono.pass && mono.detail.empty())
      mono.detail = "declared constant alpha_a <= 0; witness xi1 = " +
                    detail::fmt_point({a.x(), a.y()}) + ", xi2 = " +
                    detail::fmt_point({b.x(), b.y()});
  }
  out.push_back(zero);
  out.push_back(growth);
  out.push_back(mono);
  return out;
}

/// Sampled growth check |zeta| <= c0 + c1 |r| over r in [-range, range].
inline HypothesisClause check_potential_growth(const LocallyLipschitz1D &h, int n_samples,
                                               std::uint64_t seed, double range = 100.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  HypothesisClause c{"potential: subgradient growth", true, ""};
  auto test = [&](double r) {
    const auto [lo, hi] = h.interval(r);
    const double bound = h.c0() + h.c1() * std::abs(r);
    if (std::max(std::abs(lo), std::abs(hi)) > bound * (1 + 1e-12) + 1e-14 && c.pass) {
      c.pass = false;
      c.detail = "witness r = " + std::to_string(r);
    }
  };
  for (double b : h.breakpoints())
    test(b);
  for (int k = 0; k < n_samples; ++k)
    test(range * unif(rng) * std::abs(unif(rng)));
  return c;
}

/// Report-only audit of every structural hypothesis of an assembled model.
inline HypothesisReport check_hypotheses(const AssembledProblem &AP, int n_samples,
                                         std::uint64_t seed) {
  HypothesisReport rep;
  for (auto &c : check_material_law(AP.law, AP.space.mesh.dim, n_samples, seed))
    rep.clauses.push_back(std::move(c));
  // Potential growth, node by node when x-dependent.
  {
    HypothesisClause g{"potential: subgradient growth", true, ""};
    const SuperpositionFunctional &j = AP.qvhi.j;
    const Index nn = j.weights().size();
    for (Index i = 0; i < nn && g.pass; ++i) {
      auto c = check_potential_growth(j.h(i), std::max(10, n_samples / int(std::max<Index>(1, nn / 4))),
                                      seed + std::uint64_t(i));
      if (!c.pass) {
        g.pass = false;
        g.detail = "node " + std::to_string(i) + ": " + c.detail;
      }
    }
    rep.clauses.push_back(g);
  }
  {
    HypothesisClause c{"convex potential: non-negative weights", true, ""};
    if (AP.qvhi.phi.l1_weights && (AP.qvhi.phi.l1_weights->array() < 0.0).any()) {
      c.pass = false;
      c.detail = "negative weight";
    }
    rep.clauses.push_back(c);
  }
  // Constraint functional: homogeneity, subadditivity, m >= rho >= r(0).
  {
    const RadialConstraintFamily &K = AP.qvhi.K;
    const GramSpace &V = AP.qvhi.V();
    std::mt19937_64 rng(seed ^ 0x5a5a);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif(0.1, 10.0);
    auto rnd = [&] {
      Vec c(V.dim());
      for (Index i = 0; i < c.size(); ++i)
        c[i] = gauss(rng);
      return Vector{V, c};
    };
    HypothesisClause hom{"constraint: positive homogeneity", true, ""};
    HypothesisClause sub{"constraint: subadditivity", true, ""};
    HypothesisClause inf{"constraint: m >= rho >= r(0)", K.r(Vector::zero(V)) <= K.rho(), ""};
    for (int k = 0; k < std::min(n_samples, 200); ++k) {
      const Vector a = rnd(), b = rnd();
      const double lam = unif(rng);
      const double ra = K.r(a), rb = K.r(b);
      if (hom.pass && std::abs(K.r(lam * a) - lam * ra) > 1e-10 * std::max(1.0, lam * ra)) {
        hom.pass = false;
        hom.detail = "witness scale " + std::to_string(lam);
      }
      if (sub.pass && K.r(a + b) > ra + rb + 1e-10 * std::max(1.0, ra + rb)) {
        sub.pass = false;
        sub.detail = "witness sample " + std::to_string(k);
      }
      if (inf.pass && K.m(lam * a) < K.rho() * (1 - 1e-12)) {
        inf.pass = false;
        inf.detail = "m below rho at sample " + std::to_string(k);
      }
    }
    rep.clauses.push_back(hom);
    rep.clauses.push_back(sub);
    rep.clauses.push_back(inf);
  }
  {
    const auto &s = AP.smallness;
    std::ostringstream os;
    os << "m - beta*||M||^2 = " << s.margin << " (m = " << AP.qvhi.A.m_strong
       << ", beta = " << AP.qvhi.beta << ", ||M|| = " << AP.qvhi.M_norm << ")";
    rep.clauses.push_back({"smallness", s.pass, os.str()});
  }
  if (AP.model == "boundary") {
    HypothesisClause ob{"obstacle: k2 >= 0 and not identically zero", true, ""};
    if (AP.k2.size() > 0 && (AP.k2.array() < 0.0).any()) {
      ob.pass = false;
      ob.detail = "negative obstacle value";
    } else if (AP.k2.size() == 0 || (AP.k2.array() == 0.0).all()) {
      ob.pass = false;
      ob.detail = "k2 vanishes identically";
    }
    rep.clauses.push_back(ob);
  }
  return rep;
}

/// Smallness threshold for the coefficient c1 of the potential's growth:
/// sqrt(2) c1 ||M||^2 < alpha_a  <=>  c1 < alpha_a / (sqrt(2) ||M||^2).
inline double smallness_threshold(double alpha_a, double M_norm) {
  return alpha_a / (std::sqrt(2.0) * M_norm * M_norm);
}

struct ComplementarityReport {
  double max_product = 0.0;    ///< max |lambda_i (k2_i - u_i)|
  double min_multiplier = 0.0; ///< lambda_i should be >= 0
  double max_violation = 0.0;  ///< max (u_i - k2_i)+
};

/// Nodal multiplier of the obstacle on part 3, recovered from the residual
/// of the inner problem with the convex potential's subgradient removed.
inline ComplementarityReport complementarity(const AssembledProblem &AP, const Vector &u,
                                             const Vector &w) {
  const QVHIProblem &P = AP.qvhi;
  const Vec res = (P.f - adjoint_apply(P.M, w) - P.A.apply(u)).coords;
  const Vec wts = P.phi.l1_weights ? *P.phi.l1_weights : Vec::Zero(u.size());
  ComplementarityReport rep;
  rep.min_multiplier = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < AP.part3_free.size(); ++k) {
    const Index i = AP.part3_free[k];
    const double ui = u.coords[i];
    double lam;
    if (std::abs(ui) > 1e-12)
      lam = res[i] - wts[i] * (ui > 0 ? 1.0 : -1.0);
    else
      lam = res[i] - std::clamp(res[i], -wts[i], wts[i]);
    const double gap = AP.k2[Index(k)] - ui;
    rep.max_product = std::max(rep.max_product, std::abs(lam * gap));
    rep.min_multiplier = std::min(rep.min_multiplier, lam);
    rep.max_violation = std::max(rep.max_violation, -gap);
  }
  if (AP.part3_free.empty())
    rep.min_multiplier = 0.0;
  return rep;
}

enum class Regime { Unique, Multistable };

/// Random instance with exactly known operator constants. "unique": convex
/// smooth potential sized so that beta ||M||^2 = 0.3 m, slowly varying ball
/// constraints; "multistable": decoupled coordinates, each with three
/// solutions (two smooth, one at the kink).
inline QVHIProblem synthetic_instance(int dim, std::uint64_t seed, Regime regime) {
  if (dim < 1)
    throw DataError("synthetic_instance: dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Index n = dim;
  auto rand_mat = [&](Index r, Index c) {
    Mat m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index k = 0; k < c; ++k)
        m(i, k) = gauss(rng);
    return m;
  };

  if (regime == Regime::Multistable) {
    GramSpace V = GramSpace::identity(n, "V");
    GramSpace X = GramSpace::identity(n, "X");
    const double s = 0.5 + unif(rng);
    Vec f(n);
    for (Index i = 0; i < n; ++i)
      f[i] = 1.0 + s * (0.2 + 0.6 * unif(rng));
    SuperpositionFunctional j(X, named_potential("remark43").scaled(s));
    const GrowthConstants gc = j.growth(GrowthForm::Minkowski);
    return make_qvhi_problem(linear_operator(V, Mat(Mat::Identity(n, n))), zero_function(V),
                             std::move(j), LinearMap::identity(V, X), DualVector{V, f},
                             RadialConstraintFamily::unconstrained(V), whole_space(V), gc.alpha,
                             gc.beta, true, 1.0);
  }

  const Mat B = rand_mat(n, n) / std::sqrt(double(n));
  const Mat G = B * B.transpose() + 0.5 * Mat::Identity(n, n);
  GramSpace V = GramSpace::dense(G, "V");
  const Mat Lc = G.llt().matrixL();
  Eigen::HouseholderQR<Mat> qr(rand_mat(n, n));
  const Mat Q = qr.householderQ();
  Vec lam(n);
  for (Index i = 0; i < n; ++i)
    lam[i] = 1.0 + 2.0 * unif(rng);
  const Mat A = Lc * Q * lam.asDiagonal() * Q.transpose() * Lc.transpose();
  NonlinearOperator Aop = linear_operator(V, A);

  Vec xw(n);
  for (Index i = 0; i < n; ++i)
    xw[i] = 0.5 + unif(rng);
  GramSpace X = GramSpace::diagonal(xw, "X");
  LinearMap M(rand_mat(n, n).sparseView(), V, X);
  const double nM = operator_norm(M);
  const double s = 0.3 * Aop.m_strong / (nM * nM);
  SuperpositionFunctional j(X, named_potential("smooth-quad").scaled(s));
  const GrowthConstants gc = j.growth(GrowthForm::Minkowski);

  ConvexFunction phi = zero_function(V);
  switch (seed % 3) {
  case 1: {
    Vec w(n);
    for (Index i = 0; i < n; ++i)
      w[i] = 0.5 * unif(rng);
    phi = weighted_l1(V, w);
    break;
  }
  case 2: {
    Vec w(n);
    for (Index i = 0; i < n; ++i)
      w[i] = unif(rng);
    phi = weighted_quadratic(V, w);
    break;
  }
  default: break;
  }

  const double m0 = 0.5 + 1.5 * unif(rng);
  const double c = 0.2 * unif(rng) / nM;
  const LinearMap Mc = M;
  auto mfn = [Mc, m0, c](const Vector &v) { return m0 + c * Mc.apply(v).norm(); };
  RadialConstraintFamily K = RadialConstraintFamily::ambient_norm(V, mfn, m0);

  Vec dir(n);
  for (Index i = 0; i < n; ++i)
    dir[i] = gauss(rng);
  DualVector f{V, dir};
  f = ((0.5 + 2.5 * unif(rng)) * Aop.m_strong * m0 / f.norm()) * f;

  ConstraintSet C = whole_space(V);
  if (seed % 4 == 3) {
    Vec lo(n), hi(n);
    for (Index i = 0; i < n; ++i) {
      lo[i] = -(0.3 + 0.7 * unif(rng));
      hi[i] = 0.3 + 0.7 * unif(rng);
    }
    C = box_set(V, lo, hi);
  }
  return make_qvhi_problem(std::move(Aop), std::move(phi), std::move(j), M, std::move(f),
                           std::move(K), std::move(C), gc.alpha, gc.beta, true, nM);
}

/// Hand-solvable instances:
///  "remark43-1d"          A = 1, f = 0.5, j from the "remark43" potential, M = 1;
///                          unique solution u = 0.25
///  "constraint-family-1d" A = 1, f = 2, j = 0, K(v) = {|z| <= 1 + |v|/2}; u = 2
///  "vi-box-1d"            A = 1, f = 3, j = 0, C = [0, 1]; u = 1
///  "vi-l1-1d"             A = 1, f = 3, phi = |.|, j = 0; u = 2
///  "vi-ball-2d"           A = 2 I, f = (2, 2), j = 0, K = unit ball; u = (1, 1)/sqrt(2)
inline QVHIProblem hand_instance(const std::string &key) {
  GramSpace V1 = GramSpace::identity(1, "V");
  GramSpace X1 = GramSpace::identity(1, "X");
  auto A1 = [&] { return linear_operator(V1, Mat(Mat::Identity(1, 1))); };
  auto zero_j = [&](const GramSpace &X) { return SuperpositionFunctional(X, named_potential("zero")); };
  if (key == "remark43-1d") {
    SuperpositionFunctional j(X1, named_potential("remark43"));
    return make_qvhi_problem(A1(), zero_function(V1), j, LinearMap::identity(V1, X1),
                             DualVector{V1, Vec::Constant(1, 0.5)},
                             RadialConstraintFamily::unconstrained(V1), whole_space(V1), 1.0, 0.0);
  }
  if (key == "constraint-family-1d") {
    auto m = [](const Vector &v) { return 1.0 + 0.5 * std::abs(v.coords[0]); };
    return make_qvhi_problem(A1(), zero_function(V1), zero_j(X1), LinearMap::identity(V1, X1),
                             DualVector{V1, Vec::Constant(1, 2.0)},
                             RadialConstraintFamily::ambient_norm(V1, m, 1.0), whole_space(V1), 0.0,
                             0.0);
  }
  if (key == "vi-box-1d") {
    return make_qvhi_problem(A1(), zero_function(V1), zero_j(X1), LinearMap::identity(V1, X1),
                             DualVector{V1, Vec::Constant(1, 3.0)},
                             RadialConstraintFamily::unconstrained(V1),
                             box_set(V1, Vec::Zero(1), Vec::Ones(1)), 0.0, 0.0);
  }
  if (key == "vi-l1-1d") {
    return make_qvhi_problem(A1(), weighted_l1(V1, Vec::Ones(1)), zero_j(X1),
                             LinearMap::identity(V1, X1), DualVector{V1, Vec::Constant(1, 3.0)},
                             RadialConstraintFamily::unconstrained(V1), whole_space(V1), 0.0, 0.0);
  }
  if (key == "vi-ball-2d") {
    GramSpace V2 = GramSpace::identity(2, "V");
    GramSpace X2 = GramSpace::identity(2, "X");
    return make_qvhi_problem(linear_operator(V2, Mat(2.0 * Mat::Identity(2, 2))),
                             zero_function(V2), zero_j(X2), LinearMap::identity(V2, X2),
                             DualVector{V2, Vec::Constant(2, 2.0)},
                             RadialConstraintFamily::ambient_norm(
                                 V2, [](const Vector &) { return 1.0; }, 1.0),
                             whole_space(V2), 0.0, 0.0);
  }
  throw DataError("unknown instance '" + key + "'");
}

} // namespace qvhi
