#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qvhi/hilbert.hpp"

namespace qvhi {

/// Piecewise-C^1 scalar potential. Piece k lives on (b_{k-1}, b_k) with
/// b_{-1} = -inf and b_{K} = +inf, so there are breakpoints.size() + 1 pieces.
/// Growth pair (c0, c1) promises |zeta| <= c0 + c1 |r| for every Clarke
/// subgradient zeta at r.
class LocallyLipschitz1D {
public:
  using PieceFn = std::function<double(std::size_t, double)>;

  LocallyLipschitz1D(std::vector<double> breakpoints, PieceFn value, PieceFn deriv,
                     double c0, double c1, std::string name = "custom")
      : breaks_(std::move(breakpoints)), value_(std::move(value)),
        deriv_(std::move(deriv)), c0_(c0), c1_(c1), name_(std::move(name)) {
    if (!std::is_sorted(breaks_.begin(), breaks_.end()) ||
        std::adjacent_find(breaks_.begin(), breaks_.end()) != breaks_.end())
      throw DataError("potential '" + name_ + "': breakpoints must be strictly increasing");
    if (!(c0 >= 0.0) || !(c1 >= 0.0))
      throw DataError("potential '" + name_ + "': growth constants must be >= 0");
    for (std::size_t k = 0; k < breaks_.size(); ++k) {
      const double b = breaks_[k];
      const double gap = std::abs(value_(k, b) - value_(k + 1, b));
      if (!(gap <= 1e-12 * std::max(1.0, std::abs(value_(k, b)))))
        throw DataError("potential '" + name_ + "': discontinuous at breakpoint " +
                        std::to_string(b));
    }
  }

  const std::vector<double> &breakpoints() const { return breaks_; }
  double c0() const { return c0_; }
  double c1() const { return c1_; }
  const std::string &name() const { return name_; }

  std::size_t piece_of(double r) const {
    return std::size_t(std::upper_bound(breaks_.begin(), breaks_.end(), r) - breaks_.begin());
  }

  std::optional<std::size_t> breakpoint_at(double r) const {
    for (std::size_t k = 0; k < breaks_.size(); ++k)
      if (std::abs(r - breaks_[k]) <= 1e-12 * std::max(1.0, std::abs(breaks_[k])))
        return k;
    return std::nullopt;
  }

  double value(double r) const { return value_(piece_of(r), r); }

  /// Convex hull of the one-sided derivatives at r.
  std::pair<double, double> interval(double r) const {
    if (auto k = breakpoint_at(r)) {
      const double b = breaks_[*k];
      const double left = deriv_(*k, b), right = deriv_(*k + 1, b);
      return {std::min(left, right), std::max(left, right)};
    }
    const double d = deriv_(piece_of(r), r);
    return {d, d};
  }

  LocallyLipschitz1D scaled(double c) const {
    if (!(c >= 0.0))
      throw DataError("potential scale must be >= 0");
    auto v = value_;
    auto d = deriv_;
    return LocallyLipschitz1D(
        breaks_, [v, c](std::size_t k, double r) { return c * v(k, r); },
        [d, c](std::size_t k, double r) { return c * d(k, r); }, c * c0_, c * c1_,
        name_);
  }

  /// Same function, different declared growth pair (both must be valid).
  LocallyLipschitz1D with_growth(double c0, double c1) const {
    return LocallyLipschitz1D(breaks_, value_, deriv_, c0, c1, name_);
  }

private:
  std::vector<double> breaks_;
  PieceFn value_;
  PieceFn deriv_;
  double c0_;
  double c1_;
  std::string name_;
};

/// Built-in potentials:
///  "remark43"    0 for r < 0, r^2/2 on [0,1), 1/2 for r >= 1 (|zeta| <= 1)
///  "abs"         |r|
///  "smooth-quad" r^2/2
///  "zero"        0
inline LocallyLipschitz1D named_potential(const std::string &key) {
  using P = LocallyLipschitz1D;
  if (key == "remark43") {
    return P({0.0, 1.0},
             [](std::size_t k, double r) { return k == 0 ? 0.0 : k == 1 ? 0.5 * r * r : 0.5; },
             [](std::size_t k, double r) { return k == 1 ? r : 0.0; }, 1.0, 0.0, key);
  }
  if (key == "abs") {
    return P({0.0}, [](std::size_t k, double r) { return k == 0 ? -r : r; },
             [](std::size_t k, double) { return k == 0 ? -1.0 : 1.0; }, 1.0, 0.0, key);
  }
  if (key == "smooth-quad") {
    return P({}, [](std::size_t, double r) { return 0.5 * r * r; },
             [](std::size_t, double r) { return r; }, 0.0, 1.0, key);
  }
  if (key == "zero") {
    return P({}, [](std::size_t, double) { return 0.0; },
             [](std::size_t, double) { return 0.0; }, 0.0, 0.0, key);
  }
  throw DataError("unknown potential '" + key + "' (expected remark43, abs, smooth-quad, zero)");
}

inline std::pair<double, double> interval_subdifferential(const LocallyLipschitz1D &h,
                                                          double r) {
  return h.interval(r);
}

/// Support function of the interval subdifferential: max{zeta d}.
inline double h0_directional(const LocallyLipschitz1D &h, double r, double d) {
  const auto [lo, hi] = h.interval(r);
  return std::max(lo * d, hi * d);
}

enum class SelectionRule { MinNorm, DirectionAttaining, Midpoint };

inline double select_in_interval(double lo, double hi, SelectionRule rule, double d) {
  switch (rule) {
  case SelectionRule::Midpoint: return 0.5 * (lo + hi);
  case SelectionRule::DirectionAttaining:
    if (d > 0.0) return hi;
    if (d < 0.0) return lo;
    [[fallthrough]];
  case SelectionRule::MinNorm: return std::clamp(0.0, lo, hi);
  }
  return lo;
}

/// How to turn the nodal growth pair into (alpha, beta) of
/// ||zeta||_X <= alpha + beta ||w||_X.
enum class GrowthForm {
  Minkowski, ///< alpha = c0 sqrt(sum w_i), beta = c1
  Holder     ///< alpha = sqrt(2) c0 sqrt(sum w_i), beta = sqrt(2) c1
};

struct GrowthConstants {
  double alpha;
  double beta;
};

/// j(w) = sum_i omega_i h_i(w_i) on a lumped space X whose Gram is diag(omega).
class SuperpositionFunctional {
public:
  SuperpositionFunctional(GramSpace space, std::vector<LocallyLipschitz1D> h)
      : space_(std::move(space)), h_(std::move(h)) {
    if (!space_.is_diagonal())
      throw DataError("superposition functional needs a lumped (diagonal) X metric");
    if (h_.size() != 1 && h_.size() != std::size_t(space_.dim()))
      throw DataError("superposition functional: need one potential or one per node");
    weights_ = space_.diag();
    if (!weights_.allFinite() || (weights_.array() <= 0.0).any())
      throw DataError("superposition functional: quadrature weights must be positive");
  }

  SuperpositionFunctional(GramSpace space, LocallyLipschitz1D h)
      : SuperpositionFunctional(std::move(space), std::vector<LocallyLipschitz1D>{std::move(h)}) {}

  /// Rejects a Gram that is not exactly diag(weights).
  SuperpositionFunctional(GramSpace space, std::vector<LocallyLipschitz1D> h, const Vec &weights)
      : SuperpositionFunctional(std::move(space), std::move(h)) {
    if (weights.size() != weights_.size() ||
        (weights - weights_).cwiseAbs().maxCoeff() > 1e-14 * weights_.cwiseAbs().maxCoeff())
      throw DataError("superposition functional: X Gram does not equal the quadrature weights");
  }

  const GramSpace &space() const { return space_; }
  const Vec &weights() const { return weights_; }
  const LocallyLipschitz1D &h(Index i) const { return h_.size() == 1 ? h_[0] : h_[std::size_t(i)]; }

  bool is_zero() const {
    return std::all_of(h_.begin(), h_.end(),
                       [](const LocallyLipschitz1D &p) { return p.name() == "zero"; });
  }

  double value(const Vector &w) const {
    check(w, "value");
    double s = 0.0;
    for (Index i = 0; i < w.size(); ++i)
      s += weights_[i] * h(i).value(w.coords[i]);
    return s;
  }

  std::pair<Vec, Vec> intervals(const Vector &w) const {
    check(w, "intervals");
    Vec lo(w.size()), hi(w.size());
    for (Index i = 0; i < w.size(); ++i)
      std::tie(lo[i], hi[i]) = h(i).interval(w.coords[i]);
    return {lo, hi};
  }

  /// sum_i omega_i h_i^0(w_i; d_i), the pointwise upper surrogate of j^0.
  double j0(const Vector &w, const Vector &d) const {
    check(w, "j0");
    check(d, "j0");
    double s = 0.0;
    for (Index i = 0; i < w.size(); ++i)
      s += weights_[i] * h0_directional(h(i), w.coords[i], d.coords[i]);
    return s;
  }

  /// Nodal selection zeta in the X-space; <zeta, d>_X = sum omega_i zeta_i d_i.
  Vector select(const Vector &w, SelectionRule rule,
                const std::optional<Vector> &d = std::nullopt) const {
    check(w, "select");
    if (rule == SelectionRule::DirectionAttaining && !d)
      throw DataError("direction-attaining selection needs a direction");
    if (d)
      check(*d, "select");
    Vec z(w.size());
    for (Index i = 0; i < w.size(); ++i) {
      const auto [lo, hi] = h(i).interval(w.coords[i]);
      z[i] = select_in_interval(lo, hi, rule, d ? d->coords[i] : 0.0);
    }
    return Vector{space_, std::move(z)};
  }

  /// True iff every zeta_i lies in the interval subdifferential at w_i.
  bool admissible(const Vector &w, const Vector &zeta, double tol = 1e-10) const {
    const auto [lo, hi] = intervals(w);
    return ((lo.array() - tol) <= zeta.coords.array()).all() &&
           (zeta.coords.array() <= (hi.array() + tol)).all();
  }

  GrowthConstants growth(GrowthForm form = GrowthForm::Minkowski) const {
    double c0 = 0.0, c1 = 0.0;
    for (const auto &p : h_) {
      c0 = std::max(c0, p.c0());
      c1 = std::max(c1, p.c1());
    }
    const double s = std::sqrt(weights_.sum());
    if (form == GrowthForm::Holder)
      return {std::sqrt(2.0) * c0 * s, std::sqrt(2.0) * c1};
    return {c0 * s, c1};
  }

private:
  void check(const Vector &v, const char *where) const {
    if (v.space != space_)
      throw DataError(std::string("superposition functional ") + where + ": vector not in X");
  }

  GramSpace space_;
  std::vector<LocallyLipschitz1D> h_;
  Vec weights_;
};

inline double j0_directional(const SuperpositionFunctional &j, const Vector &w, const Vector &d) {
  return j.j0(w, d);
}

inline Vector subgradient_select(const SuperpositionFunctional &j, const Vector &w,
                                 SelectionRule rule,
                                 const std::optional<Vector> &d = std::nullopt) {
  return j.select(w, rule, d);
}

/// Metric clamp onto the closed X-ball of radius R2.
inline Vector radial_retraction(const Vector &z, double R2) {
  if (!(R2 > 0.0))
    throw DataError("radial_retraction: radius must be positive");
  const double n = z.norm();
  if (n <= R2)
    return z;
  return (R2 / n) * z;
}

/// Subgradient selection at the retracted point; norm bounded by alpha + beta R2.
inline Vector truncated_F(const SuperpositionFunctional &j, const Vector &z, double R2,
                          SelectionRule rule, const std::optional<Vector> &d = std::nullopt) {
  return j.select(radial_retraction(z, R2), rule, d);
}

struct MonotonicityWitness {
  double r;
  double s;
  double value; ///< (zeta_r - zeta_s)(r - s) + m (r - s)^2, negative on violation
};

/// Worst value of the relaxed monotonicity pairing over extreme selections.
inline double relaxed_monotonicity_value(const LocallyLipschitz1D &h, double m_relax,
                                         double r, double s) {
  if (r > s)
    std::swap(r, s);
  // r - s < 0, so the worst case maximizes zeta_r - zeta_s.
  const double zr = h.interval(r).second;
  const double zs = h.interval(s).first;
  return (zr - zs) * (r - s) + m_relax * (r - s) * (r - s);
}

struct WitnessSearch {
  double lo = -3.0;
  double hi = 3.0;
  int grid_points = 241;
  int offsets_per_breakpoint = 60;
  double min_offset = 1e-4;
  double max_offset = 1.0;
};

/// Most violating pair for the relaxed monotonicity condition with constant
/// m_relax, or nothing if every probed pair satisfies it. Probes pairs that
/// straddle each breakpoint and all pairs of a uniform grid.
inline std::optional<MonotonicityWitness>
relaxed_monotonicity_witness(const LocallyLipschitz1D &h, double m_relax,
                             const WitnessSearch &search = {}) {
  if (!(m_relax >= 0.0))
    throw DataError("relaxed monotonicity constant must be >= 0");
  std::optional<MonotonicityWitness> best;
  auto consider = [&](double r, double s) {
    if (!(r < s))
      return;
    const double v = relaxed_monotonicity_value(h, m_relax, r, s);
    const double scale = std::max(1.0, (1.0 + m_relax) * (s - r) * (s - r));
    if (v < -1e-13 * scale && (!best || v < best->value))
      best = MonotonicityWitness{r, s, v};
  };
  std::vector<double> offsets;
  const int no = std::max(2, search.offsets_per_breakpoint);
  for (int k = 0; k < no; ++k)
    offsets.push_back(search.min_offset *
                      std::pow(search.max_offset / search.min_offset, double(k) / (no - 1)));
  for (double b : h.breakpoints())
    for (double d1 : offsets)
      for (double d2 : offsets)
        consider(b - d1, b + d2);
  std::vector<double> grid;
  const int ng = std::max(2, search.grid_points);
  for (int k = 0; k < ng; ++k) {
    const double x = search.lo + (search.hi - search.lo) * k / (ng - 1);
    if (!h.breakpoint_at(x))
      grid.push_back(x);
  }
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = a + 1; b < grid.size(); ++b)
      consider(grid[a], grid[b]);
  return best;
}

} // namespace qvhi
