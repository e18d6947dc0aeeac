#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qvhi/problems.hpp"
#include "qvhi/solver.hpp"

using namespace qvhi;
using namespace qvhi::oracle;

namespace {

// First swept value at which the smallness check fails.
template <class Build>
double flip_point(Build build, double lo, double hi, int steps) {
  for (int k = 0; k <= steps; ++k) {
    const double c = lo + (hi - lo) * k / steps;
    if (!build(c).smallness.pass)
      return c;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

} // namespace

TEST(Mesh, CountsAndBoundaryParts) {
  const Mesh m1 = build_mesh(1, 10, "interior-model");
  EXPECT_EQ(m1.n_nodes(), 11);
  EXPECT_EQ(m1.cells.size(), 10u);
  EXPECT_EQ(m1.part_nodes(BoundaryPart::P1), std::vector<Index>{0});
  EXPECT_EQ(m1.part_nodes(BoundaryPart::P2), std::vector<Index>{10});
  const Mesh m2 = build_mesh(2, 4, "boundary-model");
  EXPECT_EQ(m2.n_nodes(), 25);
  EXPECT_EQ(m2.cells.size(), 32u);
  EXPECT_EQ(m2.part_nodes(BoundaryPart::P1).size(), 5u);
  EXPECT_EQ(m2.part_nodes(BoundaryPart::P3).size(), 5u);
  EXPECT_THROW(build_mesh(1, 8, "boundary-model"), DataError);
  EXPECT_THROW(build_mesh(3, 8, "dirichlet-all"), DataError);
  EXPECT_THROW(build_mesh(2, 8, "mystery"), DataError);
}

TEST(FEMSpace, MassesIntegrateTheDomainAndBoundary) {
  for (int dim : {1, 2}) {
    const FEMSpace S = build_fem_space(build_mesh(dim, 8, "interior-model"));
    EXPECT_NEAR(S.lumped_mass.sum(), 1.0, 1e-14);
  }
  // Boundary model: part 2 is the top and left edges, total length 2.
  const FEMSpace S = build_fem_space(build_mesh(2, 8, "boundary-model"));
  EXPECT_NEAR(S.boundary_mass.sum(), 2.0, 1e-14);
}

TEST(FEMSpace, StiffnessMetricIsTheGradientL2Norm) {
  const FEMSpace S = build_fem_space(build_mesh(2, 6, "dirichlet-all"));
  const SpMat D = assemble_gradient(S);
  Vec area(Index(S.mesh.cells.size()) * 2);
  for (std::size_t e = 0; e < S.mesh.cells.size(); ++e)
    area.segment(Index(e) * 2, 2).setConstant(S.mesh.cell_measure(e));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int k = 0; k < 5; ++k) {
    Vec v(S.n_free());
    for (Index i = 0; i < v.size(); ++i)
      v[i] = g(rng);
    const Vec grad = D * v;
    const double direct = std::sqrt((area.array() * grad.array().square()).sum());
    EXPECT_NEAR(Vector(S.V, v).norm(), direct, 1e-12 * direct);
  }
  // The linear law with c = 1 is the Riesz map of V.
  const NonlinearOperator A = assemble_operator(S, linear_iso(1.0));
  const Vec v = Vec::LinSpaced(S.n_free(), -1.0, 2.0);
  EXPECT_LT((A.apply(Vector{S.V, v}).coords - S.V.gram() * v).norm(), 1e-12);
}

TEST(Manufactured, RatesInOneAndTwoDimensions) {
  for (int dim : {1, 2}) {
    const auto rows = manufactured_study(dim, {8, 16, 32, 64});
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      EXPECT_GE(rows[k].h1_ratio, 1.7) << "dim " << dim << " n " << rows[k].n;
      EXPECT_LE(rows[k].h1_ratio, 2.3) << "dim " << dim << " n " << rows[k].n;
      EXPECT_GE(rows[k].l2_ratio, 3.4) << "dim " << dim << " n " << rows[k].n;
      EXPECT_LE(rows[k].l2_ratio, 4.6) << "dim " << dim << " n " << rows[k].n;
    }
  }
}

TEST(Embedding, OneDimensionalNormApproachesOneOverPi) {
  const FEMSpace S = build_fem_space(build_mesh(1, 64, "dirichlet-all"));
  const double n = operator_norm(assemble_embedding(S));
  EXPECT_NEAR(n, embedding_norm_oracle(S), 1e-6 * n);
  EXPECT_LT(std::abs(n - 1.0 / M_PI), 0.02 / M_PI);
}

TEST(Embedding, NormsAgreeWithDenseEigenOracles) {
  const FEMSpace S1 = build_fem_space(build_mesh(1, 32, "interior-model"));
  EXPECT_NEAR(operator_norm(assemble_embedding(S1)), embedding_norm_oracle(S1), 1e-6);
  // Dirichlet at one end only: the limit is 2/pi.
  EXPECT_LT(std::abs(operator_norm(assemble_embedding(S1)) - 2.0 / M_PI), 0.02 * 2.0 / M_PI);
  const FEMSpace S2 = build_fem_space(build_mesh(2, 8, "boundary-model"));
  EXPECT_NEAR(operator_norm(assemble_trace(S2)), trace_norm_oracle(S2), 1e-6);
}

TEST(Hypotheses, LawChecks) {
  for (const auto &law : {linear_iso(2.0), nonlinear_demo(0.5, 2.0)})
    for (const auto &c : check_material_law(law, 2, 400, 3))
      EXPECT_TRUE(c.pass) << law.name() << ": " << c.name << " " << c.detail;
  const auto bad = check_material_law(nonlinear_demo(0.0, 1.0), 2, 400, 3);
  EXPECT_TRUE(bad[0].pass);
  EXPECT_FALSE(bad[2].pass);
  EXPECT_NE(bad[2].detail.find("witness"), std::string::npos);
  // Understated growth constant is caught with a witness.
  MaterialLaw lie = linear_iso(3.0);
  lie.m_a = 1.0;
  const auto g = check_material_law(lie, 1, 400, 5);
  EXPECT_FALSE(g[1].pass);
  EXPECT_THROW(nonlinear_demo(2.0, 1.0), DataError);
}

TEST(Hypotheses, NonlinearOperatorConstantsHoldOnSamples) {
  const FEMSpace S = build_fem_space(build_mesh(2, 5, "interior-model"));
  const NonlinearOperator A = assemble_operator(S, nonlinear_demo(0.5, 2.0));
  const ConstantEstimate est = estimate_constants(A, 300, 5.0, 2);
  EXPECT_GE(est.m_est, 0.5 * (1 - 1e-9));
  EXPECT_LE(est.L_est, 2.0 * (1 + 1e-9));
}

TEST(Hypotheses, PotentialGrowth) {
  EXPECT_TRUE(check_potential_growth(named_potential("remark43"), 500, 1).pass);
  const auto c = check_potential_growth(named_potential("smooth-quad").with_growth(1.0, 0.5), 500, 1);
  EXPECT_FALSE(c.pass);
  EXPECT_NE(c.detail.find("witness"), std::string::npos);
}

TEST(Hypotheses, AssembledReportsNameEveryClause) {
  const FEMSpace S = build_fem_space(build_mesh(2, 6, "interior-model"));
  InteriorOptions o;
  o.h = named_potential("remark43").with_growth(0.0, 1.0);
  o.g1 = constant_field(1.0);
  const AssembledProblem AP = build_interior_problem(S, linear_iso(1.0), o);
  const HypothesisReport rep = check_hypotheses(AP, 200, 1);
  for (const char *name : {"law: a(x,0) = 0", "law: growth", "law: strong monotonicity",
                           "potential: subgradient growth",
                           "convex potential: non-negative weights",
                           "constraint: positive homogeneity", "constraint: subadditivity",
                           "constraint: m >= rho >= r(0)", "smallness"}) {
    const HypothesisClause *c = rep.find(name);
    ASSERT_NE(c, nullptr) << name;
    EXPECT_TRUE(c->pass) << name << ": " << c->detail;
  }
  EXPECT_TRUE(rep.all_pass());
  EXPECT_EQ(rep.find("obstacle: k2 >= 0 and not identically zero"), nullptr);
}

TEST(Hypotheses, GradientConstraintFamilyIsASeminorm) {
  const FEMSpace S = build_fem_space(build_mesh(2, 5, "interior-model"));
  InteriorOptions o;
  o.K.kind = ConstraintOptions::Kind::GradientL1;
  o.K.rho2 = constant_field(0.5);
  const AssembledProblem AP = build_interior_problem(S, linear_iso(1.0), o);
  const HypothesisReport rep = check_hypotheses(AP, 200, 2);
  EXPECT_TRUE(rep.all_pass());
  o.K.rho2 = constant_field(-1.0);
  EXPECT_THROW(build_interior_problem(S, linear_iso(1.0), o), DataError);
}

TEST(Smallness, InteriorFlipMatchesTheEmbeddingThreshold) {
  const FEMSpace S = build_fem_space(build_mesh(1, 32, "interior-model"));
  const double nM = embedding_norm_oracle(S);
  const double alpha = 1.0;
  const double expected = alpha / (std::sqrt(2.0) * nM * nM);
  double known = 0.0;
  auto build = [&](double c) {
    InteriorOptions o;
    o.h = named_potential("remark43").with_growth(0.0, 1.0).scaled(c);
    if (known > 0.0)
      o.M_norm = known;
    return build_interior_problem(S, linear_iso(alpha), o);
  };
  known = build(1.0).qvhi.M_norm;
  EXPECT_NEAR(smallness_threshold(alpha, known), expected, 1e-5 * expected);
  const double flip = flip_point(build, 0.5 * expected, 1.5 * expected, 400);
  EXPECT_LT(std::abs(flip - expected), 0.01 * expected);
  EXPECT_TRUE(build(0.99 * expected).smallness.pass);
  EXPECT_FALSE(build(1.01 * expected).smallness.pass);
}

TEST(Smallness, BoundaryFlipMatchesTheTraceThreshold) {
  const FEMSpace S = build_fem_space(build_mesh(2, 8, "boundary-model"));
  const double nM = trace_norm_oracle(S);
  const double alpha = 2.0;
  const double expected = alpha / (std::sqrt(2.0) * nM * nM);
  auto build = [&](double c) {
    BoundaryOptions o;
    o.h2 = named_potential("remark43").with_growth(0.0, 1.0).scaled(c);
    o.k2 = constant_field(1.0);
    return build_boundary_problem(S, linear_iso(alpha), o);
  };
  const double flip = flip_point(build, 0.5 * expected, 1.5 * expected, 400);
  EXPECT_LT(std::abs(flip - expected), 0.01 * expected);
}

TEST(BoundaryModel, ZeroObstacleIsActiveAndComplementary) {
  const FEMSpace S = build_fem_space(build_mesh(2, 12, "boundary-model"));
  BoundaryOptions o;
  const double half = 0.5 / (std::sqrt(2.0) * std::pow(trace_norm_oracle(S), 2));
  o.h2 = named_potential("remark43").with_growth(0.0, 1.0).scaled(half);
  o.g1 = constant_field(4.0);
  o.k2 = constant_field(0.0);
  const AssembledProblem AP = build_boundary_problem(S, linear_iso(1.0), o);
  ASSERT_TRUE(AP.smallness.pass);
  const HypothesisReport rep = check_hypotheses(AP, 200, 1);
  const HypothesisClause *ob = rep.find("obstacle: k2 >= 0 and not identically zero");
  ASSERT_NE(ob, nullptr);
  EXPECT_FALSE(ob->pass);
  EXPECT_EQ(ob->detail, "k2 vanishes identically");

  OuterConfig c;
  c.vi_cfg.tol = 1e-11;
  c.vi_cfg.eps_inner = 1e-12;
  c.tol_outer = 1e-9;
  const QVHISolution s = solve_qvhi(AP.qvhi, c);
  ASSERT_TRUE(s.converged) << s.message;
  for (Index i : AP.part3_free)
    EXPECT_LE(std::abs(s.u.coords[i]), 1e-8);
  const QVHIResidual r = qvhi_residual(AP.qvhi, s.u, s.w, auto_step(AP.qvhi.A));
  EXPECT_TRUE(r.pass(1e-6)) << r.fp << " " << r.feas;
  const ComplementarityReport cr = complementarity(AP, s.u, s.w);
  EXPECT_LE(cr.max_violation, 1e-8);
  EXPECT_GE(cr.min_multiplier, -1e-6);
  EXPECT_LE(cr.max_product, 1e-8);
  // Positive source pushes the obstacle: some multiplier is strictly positive.
  double lam_max = 0.0;
  const Vec res = (AP.qvhi.f - adjoint_apply(AP.qvhi.M, s.w) - AP.qvhi.A.apply(s.u)).coords;
  for (Index i : AP.part3_free)
    lam_max = std::max(lam_max, res[i]);
  EXPECT_GT(lam_max, 1e-3);
}

TEST(BoundaryModel, NeedsTheUnilateralPart) {
  const FEMSpace S = build_fem_space(build_mesh(2, 4, "interior-model"));
  EXPECT_THROW(build_boundary_problem(S, linear_iso(1.0), BoundaryOptions{}), DataError);
}

TEST(Synthetic, UniqueInstancesSatisfySmallnessWithKnownConstants) {
  for (int dim : {1, 2, 3, 5})
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const QVHIProblem P = synthetic_instance(dim, seed, Regime::Unique);
      const SmallnessCheck sc = check_smallness(P);
      EXPECT_TRUE(sc.pass);
      EXPECT_NEAR(P.beta * P.M_norm * P.M_norm, 0.3 * P.A.m_strong, 1e-9);
      const ConstantEstimate est = estimate_constants(P.A, 200, 3.0, seed);
      EXPECT_GE(est.m_est, P.A.m_strong * (1 - 1e-9));
      EXPECT_LE(est.L_est, P.A.lipschitz * (1 + 1e-9));
    }
  // Same seed, same instance.
  const QVHIProblem a = synthetic_instance(3, 7, Regime::Unique);
  const QVHIProblem b = synthetic_instance(3, 7, Regime::Unique);
  EXPECT_EQ(a.f.coords, b.f.coords);
  EXPECT_THROW(synthetic_instance(0, 1, Regime::Unique), DataError);
}
