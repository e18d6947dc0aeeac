#include <gtest/gtest.h>

#include "qvhi/clarke.hpp"

using namespace qvhi;

namespace {

// One-sided difference quotients as an independent derivative oracle.
double right_deriv(const LocallyLipschitz1D &h, double r, double t = 1e-7) {
  return (h.value(r + t) - h.value(r)) / t;
}
double left_deriv(const LocallyLipschitz1D &h, double r, double t = 1e-7) {
  return (h.value(r) - h.value(r - t)) / t;
}

} // namespace

TEST(Potential, KinkedPresetValuesAndIntervals) {
  const auto h = named_potential("remark43");
  EXPECT_EQ(h.value(-2.0), 0.0);
  EXPECT_DOUBLE_EQ(h.value(0.5), 0.125);
  EXPECT_DOUBLE_EQ(h.value(1.0), 0.5);
  EXPECT_DOUBLE_EQ(h.value(7.0), 0.5);
  EXPECT_EQ(h.interval(0.0), std::make_pair(0.0, 0.0));
  EXPECT_EQ(h.interval(1.0), std::make_pair(0.0, 1.0));
  EXPECT_EQ(h.interval(0.5), std::make_pair(0.5, 0.5));
  EXPECT_EQ(h.interval(3.0), std::make_pair(0.0, 0.0));
}

TEST(Potential, IntervalsAgreeWithDifferenceQuotients) {
  for (const char *key : {"remark43", "abs", "smooth-quad", "zero"}) {
    const auto h = named_potential(key);
    for (double r : {-2.3, -0.7, 0.0, 0.4, 1.0, 1.8}) {
      const auto [lo, hi] = h.interval(r);
      const double a = left_deriv(h, r), b = right_deriv(h, r);
      EXPECT_NEAR(lo, std::min(a, b), 1e-6) << key << " at " << r;
      EXPECT_NEAR(hi, std::max(a, b), 1e-6) << key << " at " << r;
    }
  }
}

TEST(Potential, AbsHasFullIntervalAtKink) {
  const auto h = named_potential("abs");
  EXPECT_EQ(h.interval(0.0), std::make_pair(-1.0, 1.0));
  EXPECT_EQ(h.interval(-3.0), std::make_pair(-1.0, -1.0));
}

TEST(Potential, UnknownKeyAndDiscontinuityRejected) {
  EXPECT_THROW(named_potential("no-such-potential"), DataError);
  auto v = [](std::size_t k, double) { return k == 0 ? 0.0 : 1.0; };
  auto d = [](std::size_t, double) { return 0.0; };
  EXPECT_THROW(LocallyLipschitz1D({0.0}, v, d, 0.0, 0.0, "jump"), DataError);
  EXPECT_THROW(LocallyLipschitz1D({1.0, 0.0}, v, d, 0.0, 0.0, "order"), DataError);
  EXPECT_THROW(named_potential("abs").scaled(-1.0), DataError);
}

TEST(Potential, GrowthBoundHoldsOnSamples) {
  for (const char *key : {"remark43", "abs", "smooth-quad"}) {
    const auto h = named_potential(key).scaled(2.5);
    for (int k = -400; k <= 400; ++k) {
      const double r = k / 40.0;
      const auto [lo, hi] = h.interval(r);
      EXPECT_LE(std::max(std::abs(lo), std::abs(hi)), h.c0() + h.c1() * std::abs(r) + 1e-12);
    }
  }
}

TEST(Directional, GeneralizedDerivativeIsSupportFunction) {
  const auto h = named_potential("remark43");
  EXPECT_DOUBLE_EQ(h0_directional(h, 1.0, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(h0_directional(h, 1.0, -2.0), 0.0);
  const auto a = named_potential("abs");
  EXPECT_DOUBLE_EQ(h0_directional(a, 0.0, -3.0), 3.0);
  // Smooth point: ordinary derivative times direction.
  EXPECT_NEAR(h0_directional(h, 0.3, 1.5), 0.45, 1e-15);
}

TEST(Selection, RulesPickFromTheInterval) {
  EXPECT_EQ(select_in_interval(-1.0, 2.0, SelectionRule::MinNorm, 0.0), 0.0);
  EXPECT_EQ(select_in_interval(0.5, 2.0, SelectionRule::MinNorm, 0.0), 0.5);
  EXPECT_EQ(select_in_interval(-3.0, -1.0, SelectionRule::MinNorm, 0.0), -1.0);
  EXPECT_EQ(select_in_interval(-1.0, 2.0, SelectionRule::DirectionAttaining, 1.0), 2.0);
  EXPECT_EQ(select_in_interval(-1.0, 2.0, SelectionRule::DirectionAttaining, -1.0), -1.0);
  EXPECT_EQ(select_in_interval(-1.0, 2.0, SelectionRule::DirectionAttaining, 0.0), 0.0);
  EXPECT_EQ(select_in_interval(-1.0, 2.0, SelectionRule::Midpoint, 0.0), 0.5);
}

TEST(Superposition, ValueJ0AndSelectionsUseQuadratureWeights) {
  const Vec w = (Vec(3) << 0.5, 1.0, 2.0).finished();
  GramSpace X = GramSpace::diagonal(w);
  const SuperpositionFunctional j(X, named_potential("remark43"));
  const Vector z{X, (Vec(3) << 0.5, 1.0, -1.0).finished()};
  EXPECT_DOUBLE_EQ(j.value(z), 0.5 * 0.125 + 1.0 * 0.5 + 0.0);
  const Vector d{X, (Vec(3) << 1.0, 1.0, 1.0).finished()};
  // j0 = sum w_i max(lo_i d_i, hi_i d_i) = 0.5*0.5 + 1*1 + 0.
  EXPECT_DOUBLE_EQ(j.j0(z, d), 1.25);
  const Vector zeta = j.select(z, SelectionRule::DirectionAttaining, d);
  EXPECT_TRUE(j.admissible(z, zeta));
  // Attaining selection realizes j0: <zeta, d>_X = j0(z; d).
  EXPECT_NEAR(inner(zeta, d), j.j0(z, d), 1e-15);
  const Vector bad{X, (Vec(3) << 0.5, 1.5, 0.0).finished()};
  EXPECT_FALSE(j.admissible(z, bad));
}

TEST(Superposition, RejectsNonLumpedMetricAndWeightMismatch) {
  Mat g(2, 2);
  g << 2, 0.5, 0.5, 2;
  EXPECT_THROW(SuperpositionFunctional(GramSpace::dense(g), named_potential("abs")), DataError);
  GramSpace X = GramSpace::diagonal(Vec::Ones(2));
  EXPECT_THROW(SuperpositionFunctional(X, {named_potential("abs")}, Vec::Constant(2, 2.0)),
               DataError);
  EXPECT_THROW(SuperpositionFunctional(X, std::vector<LocallyLipschitz1D>(3, named_potential("abs"))),
               DataError);
}

TEST(Superposition, GrowthConstantsBoundSelections) {
  const Vec w = (Vec(4) << 0.25, 0.5, 0.75, 1.0).finished();
  GramSpace X = GramSpace::diagonal(w);
  const SuperpositionFunctional j(X, named_potential("remark43").with_growth(1.0, 1.0));
  for (GrowthForm form : {GrowthForm::Minkowski, GrowthForm::Holder}) {
    const auto gc = j.growth(form);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int k = 0; k < 500; ++k) {
      const Vector z{X, (Vec(4) << g(rng), g(rng), g(rng), g(rng)).finished() * 3.0};
      for (auto rule : {SelectionRule::MinNorm, SelectionRule::Midpoint})
        EXPECT_LE(j.select(z, rule).norm(), gc.alpha + gc.beta * z.norm() + 1e-12);
    }
  }
  const auto mk = j.growth(GrowthForm::Minkowski), ho = j.growth(GrowthForm::Holder);
  EXPECT_DOUBLE_EQ(mk.alpha, std::sqrt(2.5));
  EXPECT_DOUBLE_EQ(mk.beta, 1.0);
  EXPECT_DOUBLE_EQ(ho.alpha, std::sqrt(2.0) * std::sqrt(2.5));
  EXPECT_DOUBLE_EQ(ho.beta, std::sqrt(2.0));
}

TEST(Retraction, ClampsToTheBall) {
  GramSpace X = GramSpace::diagonal(Vec::Constant(2, 4.0));
  const Vector z{X, (Vec(2) << 3.0, 4.0).finished()}; // norm 10
  EXPECT_NEAR(radial_retraction(z, 2.5).norm(), 2.5, 1e-14);
  EXPECT_EQ(radial_retraction(z, 20.0).coords, z.coords);
  EXPECT_THROW(radial_retraction(z, 0.0), DataError);
  const SuperpositionFunctional j(X, named_potential("smooth-quad"));
  // smooth-quad: zeta = r, so the truncated selection is the retracted point.
  EXPECT_LT((truncated_F(j, z, 2.5, SelectionRule::MinNorm).coords -
             radial_retraction(z, 2.5).coords).norm(), 1e-14);
}

TEST(RelaxedMonotonicity, ClosedFormPairValue) {
  // r = 1 - 1/n, s = 1 + 1/n: value = -(2/n)(1 - (1 + 2m)/n).
  const auto h = named_potential("remark43");
  for (double m : {0.0, 1.0, 5.0})
    for (int n : {12, 20, 50}) {
      const double expected = -(2.0 / n) * (1.0 - (1.0 + 2.0 * m) / n);
      EXPECT_NEAR(relaxed_monotonicity_value(h, m, 1.0 - 1.0 / n, 1.0 + 1.0 / n), expected,
                  1e-14);
    }
  EXPECT_NEAR(relaxed_monotonicity_value(h, 5.0, 1.0 - 1.0 / 12, 1.0 + 1.0 / 12), -1.0 / 72.0,
              1e-15);
}

TEST(RelaxedMonotonicity, WitnessStraddlesTheKink) {
  const auto h = named_potential("remark43");
  const auto wit = relaxed_monotonicity_witness(h, 5.0);
  ASSERT_TRUE(wit.has_value());
  EXPECT_LT(wit->r, 1.0);
  EXPECT_GT(wit->s, 1.0);
  EXPECT_LT(wit->value, -1.0 / 72.0 + 1e-15);
  EXPECT_NEAR(wit->value, relaxed_monotonicity_value(h, 5.0, wit->r, wit->s), 1e-15);
}

TEST(RelaxedMonotonicity, ConvexPresetsHaveNoWitness) {
  for (const char *key : {"abs", "smooth-quad", "zero"})
    for (double m : {0.0, 0.5, 5.0, 100.0})
      EXPECT_FALSE(relaxed_monotonicity_witness(named_potential(key), m).has_value())
          << key << " m=" << m;
  EXPECT_THROW(relaxed_monotonicity_witness(named_potential("abs"), -1.0), DataError);
}
