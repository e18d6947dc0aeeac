#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qvhi/hilbert.hpp"
#include "qvhi/separable_qp.hpp"

namespace qvhi {

/// Affine minorant: value(z) >= slope(z) + offset for every z.
struct Minorant {
  DualVector slope;
  double offset = 0.0;
};

/// Convex, finite, continuous potential on a GramSpace.
///
/// `prox(x, tau, eps)` returns argmin_z 1/2 ||z - x||_V^2 + tau * value(z) to
/// inner tolerance eps, in the metric of the space (not the Euclidean one).
struct ConvexFunction {
  GramSpace space;
  std::function<double(const Vector &)> value;
  std::function<Vector(const Vector &, double, double)> prox;
  std::optional<Minorant> minorant;
  std::string name;
  bool is_zero = false;
  /// Set iff value(z) = sum_i w_i |z_i|; lets composite_prox fold box
  /// constraints into a single separable solve.
  std::optional<Vec> l1_weights;
};

inline ConvexFunction zero_function(const GramSpace &space) {
  ConvexFunction f{space,
                   [](const Vector &) { return 0.0; },
                   [](const Vector &x, double, double) { return x; },
                   Minorant{DualVector::zero(space), 0.0},
                   "zero",
                   true,
                   std::nullopt};
  return f;
}

/// phi(z) = sum_i w_i |z_i| with w_i >= 0.
inline ConvexFunction weighted_l1(const GramSpace &space, Vec weights) {
  if (weights.size() != space.dim() || (weights.array() < 0.0).any() ||
      !weights.allFinite())
    throw DataError("weighted_l1: weights must be finite, non-negative, one per coordinate");
  auto value = [weights](const Vector &z) {
    return weights.dot(z.coords.cwiseAbs());
  };
  auto prox = [space, weights](const Vector &x, double tau, double eps) {
    detail::require_same(x.space, space, "weighted_l1::prox");
    const Index n = space.dim();
    const double inf = std::numeric_limits<double>::infinity();
    if (space.is_diagonal()) {
      Vec z(n);
      for (Index i = 0; i < n; ++i)
        z[i] = detail::scalar_prox(x.coords[i], tau * weights[i] / space.diag()[i],
                                   -inf, inf);
      return Vector{space, std::move(z)};
    }
    detail::SeparableTerms terms{tau * weights, Vec::Constant(n, -inf),
                                 Vec::Constant(n, inf)};
    Vec z = detail::solve_separable_qp(space.gram(), space.apply(x.coords),
                                       terms, x.coords, eps * 1e-2);
    return Vector{space, std::move(z)};
  };
  return ConvexFunction{space,  value, prox, Minorant{DualVector::zero(space), 0.0},
                        "l1",   false, weights};
}

/// phi(z) = 1/2 sum_i w_i z_i^2 with w_i >= 0.
inline ConvexFunction weighted_quadratic(const GramSpace &space, Vec weights) {
  if (weights.size() != space.dim() || (weights.array() < 0.0).any() ||
      !weights.allFinite())
    throw DataError("weighted_quadratic: weights must be finite, non-negative, one per coordinate");
  auto value = [weights](const Vector &z) {
    return 0.5 * weights.dot(z.coords.cwiseAbs2());
  };
  auto prox = [space, weights](const Vector &x, double tau, double) {
    detail::require_same(x.space, space, "weighted_quadratic::prox");
    if (space.is_diagonal()) {
      Vec z = (space.diag().array() * x.coords.array()) /
              (space.diag().array() + tau * weights.array());
      return Vector{space, std::move(z)};
    }
    SpMat lhs = space.gram();
    for (Index i = 0; i < lhs.rows(); ++i)
      lhs.coeffRef(i, i) += tau * weights[i];
    Eigen::SimplicialLLT<SpMat> llt(lhs);
    return Vector{space, llt.solve(space.apply(x.coords))};
  };
  return ConvexFunction{space, value, prox, Minorant{DualVector::zero(space), 0.0},
                        "quadratic", false, std::nullopt};
}

struct Box {
  Vec lower;
  Vec upper;
};

/// Nonempty closed convex subset with a metric projection oracle.
struct ConstraintSet {
  GramSpace space;
  std::function<bool(const Vector &, double)> contains;
  std::function<Vector(const Vector &, double)> project;
  std::string name;
  bool whole = false;
  std::optional<Box> box;
  /// Flattened components when this set is an intersection.
  std::vector<ConstraintSet> parts;

  double distance(const Vector &x, double eps) const {
    return whole ? 0.0 : (x - project(x, eps)).norm();
  }
};

inline ConstraintSet whole_space(const GramSpace &space) {
  return ConstraintSet{space,
                       [](const Vector &, double) { return true; },
                       [](const Vector &x, double) { return x; },
                       "whole",
                       true,
                       std::nullopt,
                       {}};
}

/// {lower <= z <= upper}; bounds may be infinite. Exact clamp under a diagonal
/// metric, separable active-set solve otherwise.
inline ConstraintSet box_set(const GramSpace &space, Vec lower, Vec upper) {
  const Index n = space.dim();
  if (lower.size() != n || upper.size() != n)
    throw DataError("box_set: bound length mismatch");
  for (Index i = 0; i < n; ++i)
    if (!(lower[i] <= upper[i]) || std::isnan(lower[i]) || std::isnan(upper[i]))
      throw DataError("box_set: empty box at coordinate " + std::to_string(i));
  auto contains = [lower, upper](const Vector &z, double tol) {
    return ((z.coords - upper).array() <= tol).all() &&
           ((lower - z.coords).array() <= tol).all();
  };
  auto project = [space, lower, upper](const Vector &x, double eps) {
    detail::require_same(x.space, space, "box_set::project");
    if (space.is_diagonal())
      return Vector{space, x.coords.cwiseMax(lower).cwiseMin(upper)};
    detail::SeparableTerms terms{Vec::Zero(space.dim()), lower, upper};
    Vec z = detail::solve_separable_qp(space.gram(), space.apply(x.coords),
                                       terms, x.coords, eps * 1e-2);
    return Vector{space, std::move(z)};
  };
  return ConstraintSet{space, contains, project, "box", false,
                       Box{std::move(lower), std::move(upper)}, {}};
}

/// Closed V-norm ball.
inline ConstraintSet ball_set(const Vector &center, double radius) {
  if (!(radius >= 0.0))
    throw DataError("ball_set: negative radius");
  const GramSpace space = center.space;
  auto contains = [center, radius](const Vector &z, double tol) {
    return (z - center).norm() <= radius + tol;
  };
  auto project = [center, radius](const Vector &x, double) {
    Vector d = x - center;
    const double n = d.norm();
    if (n <= radius)
      return x;
    return center + (radius / n) * d;
  };
  return ConstraintSet{space, contains, project, "ball", false, std::nullopt, {}};
}

/// Half-space {z : a(z) <= b} for a nonzero functional a.
inline ConstraintSet halfspace_set(const DualVector &a, double b) {
  const double an = a.norm();
  if (an == 0.0)
    throw DataError("halfspace_set: zero normal");
  const GramSpace space = a.space;
  const Vector normal = riesz(a);
  auto contains = [a, b](const Vector &z, double tol) { return pair(a, z) <= b + tol; };
  auto project = [a, b, normal, an](const Vector &x, double) {
    const double excess = pair(a, x) - b;
    if (excess <= 0.0)
      return x;
    return x - (excess / (an * an)) * normal;
  };
  return ConstraintSet{space, contains, project, "halfspace", false, std::nullopt, {}};
}

namespace detail {

inline std::vector<ConstraintSet> flatten(const ConstraintSet &s) {
  if (!s.parts.empty())
    return s.parts;
  return {s};
}

inline constexpr int kDykstraMaxIter = 500;

/// Dykstra's alternating projection onto an intersection.
inline Vector dykstra_project(const std::vector<ConstraintSet> &sets,
                              const Vector &x0, double eps,
                              int max_iter = kDykstraMaxIter) {
  Vector x = x0;
  std::vector<Vec> incr(sets.size(), Vec::Zero(x0.size()));
  double change = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector cycle_start = x;
    double incr_change = 0.0;
    for (std::size_t k = 0; k < sets.size(); ++k) {
      Vector shifted{x.space, x.coords + incr[k]};
      Vector y = sets[k].project(shifted, eps * 1e-2);
      Vec next_incr = shifted.coords - y.coords;
      incr_change += Vector{x.space, next_incr - incr[k]}.norm();
      incr[k] = std::move(next_incr);
      x = std::move(y);
    }
    change = (x - cycle_start).norm();
    const double tol = attainable(eps, x.norm());
    if (change <= tol && incr_change <= tol)
      return x;
  }
  throw ConvergenceError("Dykstra projection did not converge", change);
}

} // namespace detail

/// Intersection; projection by Dykstra's algorithm to tolerance eps.
inline ConstraintSet intersect(const ConstraintSet &a, const ConstraintSet &b) {
  detail::require_same(a.space, b.space, "intersect");
  if (a.whole)
    return b;
  if (b.whole)
    return a;
  std::vector<ConstraintSet> parts = detail::flatten(a);
  for (auto &p : detail::flatten(b))
    parts.push_back(p);
  auto contains = [parts](const Vector &z, double tol) {
    return std::all_of(parts.begin(), parts.end(),
                       [&](const ConstraintSet &s) { return s.contains(z, tol); });
  };
  auto project = [parts](const Vector &x, double eps) {
    return detail::dykstra_project(parts, x, eps);
  };
  ConstraintSet out{a.space, contains, project, a.name + "&" + b.name, false,
                    std::nullopt, parts};
  return out;
}

/// Which of the supported projection strategies the sublevel sets
/// {w : r(w) <= m(v)} use.
enum class RKind {
  AmbientNorm, ///< r(w) = ||w||_V, exact radial scaling
  SeminormL2,  ///< r(w) = ||D w||_2, Newton on the multiplier
  WeightedL1,  ///< r(w) = sum_k c_k ||(D w)_k||_2 over row groups, ADMM splitting
  Unconstrained ///< r = 0, K(v) is the whole space
};

/// Solution-dependent constraints K(v) = {w : r(w) <= m(v)} with r positively
/// homogeneous and subadditive, inf m = rho > 0 and r(0) = 0 <= rho.
class RadialConstraintFamily {
public:
  using MFn = std::function<double(const Vector &)>;

  static RadialConstraintFamily unconstrained(const GramSpace &space) {
    RadialConstraintFamily K(space, RKind::Unconstrained,
                             [](const Vector &) { return 1.0; }, 1.0);
    return K;
  }

  static RadialConstraintFamily ambient_norm(const GramSpace &space, MFn m,
                                             double rho) {
    return RadialConstraintFamily(space, RKind::AmbientNorm, std::move(m), rho);
  }

  static RadialConstraintFamily seminorm_l2(const GramSpace &space, SpMat D,
                                            MFn m, double rho) {
    RadialConstraintFamily K(space, RKind::SeminormL2, std::move(m), rho);
    if (D.cols() != space.dim())
      throw DataError("seminorm family: D has wrong column count");
    K.D_ = std::move(D);
    return K;
  }

  /// `group_ptr` has one more entry than there are groups; group k covers
  /// rows [group_ptr[k], group_ptr[k+1]) of D and carries weight c_k >= 0.
  static RadialConstraintFamily weighted_l1(const GramSpace &space, SpMat D,
                                            std::vector<Index> group_ptr,
                                            Vec weights, MFn m, double rho) {
    RadialConstraintFamily K(space, RKind::WeightedL1, std::move(m), rho);
    if (D.cols() != space.dim())
      throw DataError("weighted-l1 family: D has wrong column count");
    if (group_ptr.size() != std::size_t(weights.size()) + 1 ||
        group_ptr.front() != 0 || group_ptr.back() != D.rows() ||
        !std::is_sorted(group_ptr.begin(), group_ptr.end()))
      throw DataError("weighted-l1 family: malformed group pointer");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
      throw DataError("weighted-l1 family: weights must be finite and >= 0");
    K.D_ = std::move(D);
    K.group_ptr_ = std::move(group_ptr);
    K.weights_ = std::move(weights);
    // ADMM penalty balanced against the metric; factor once.
    const SpMat DtD = SpMat(K.D_.transpose()) * K.D_;
    const double dtd_mean = DtD.diagonal().mean();
    K.admm_rho_ = dtd_mean > 0.0 ? space.diag().mean() / dtd_mean : 1.0;
    auto llt = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
    llt->compute(SpMat(space.gram() + K.admm_rho_ * DtD));
    if (llt->info() != Eigen::Success)
      throw DataError("weighted-l1 family: ADMM system not SPD");
    K.admm_llt_ = std::move(llt);
    return K;
  }

  const GramSpace &space() const { return space_; }
  RKind kind() const { return kind_; }
  double rho() const { return rho_; }
  double m(const Vector &v) const { return m_(v); }
  const SpMat &D() const { return D_; }
  int max_iter() const { return max_iter_; }
  void set_max_iter(int n) { max_iter_ = n; }

  double r(const Vector &w) const {
    switch (kind_) {
    case RKind::Unconstrained: return 0.0;
    case RKind::AmbientNorm: return w.norm();
    case RKind::SeminormL2: return (D_ * w.coords).norm();
    case RKind::WeightedL1: return group_sum(D_ * w.coords);
    }
    return 0.0;
  }

  /// Metric projection onto {w : r(w) <= level}.
  Vector project_sublevel(const Vector &x, double level, double eps) const {
    detail::require_same(x.space, space_, "constraint family projection");
    const double rx = r(x);
    if (rx <= level)
      return x;
    switch (kind_) {
    case RKind::Unconstrained: return x;
    case RKind::AmbientNorm: return (level / rx) * x;
    case RKind::SeminormL2: return feasible(project_seminorm(x, level, eps), level);
    case RKind::WeightedL1: return feasible(project_weighted_l1(x, level, eps), level);
    }
    return x;
  }

private:
  RadialConstraintFamily(GramSpace space, RKind kind, MFn m, double rho)
      : space_(std::move(space)), kind_(kind), m_(std::move(m)), rho_(rho) {
    if (!(rho > 0.0))
      throw DataError("constraint family: rho must be positive");
  }

  double group_sum(const Vec &y) const {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < group_ptr_.size(); ++k)
      s += weights_[Index(k)] *
           y.segment(group_ptr_[k], group_ptr_[k + 1] - group_ptr_[k]).norm();
    return s;
  }

  // Positive homogeneity: rescaling lands exactly on the sublevel set.
  Vector feasible(Vector z, double level) const {
    const double rz = r(z);
    if (rz > level && rz > 0.0)
      z = (level / rz) * z;
    return z;
  }

  Vector project_seminorm(const Vector &x, double level, double eps) const {
    const SpMat DtD = SpMat(D_.transpose()) * D_;
    const Vec Gx = space_.apply(x.coords);
    auto solve_at = [&](double mu, Vec &z, Vec &dz) {
      Eigen::SimplicialLLT<SpMat> llt(SpMat(space_.gram() + mu * DtD));
      z = llt.solve(Gx);
      dz = -llt.solve(DtD * z);
    };
    if (level <= 0.0) {
      // Project onto ker D: mu -> infinity limit.
      Vec z, dz;
      solve_at(1e12 * std::max(1.0, space_.diag().maxCoeff()), z, dz);
      return Vector{space_, z};
    }
    // Newton on psi(mu) = 1/||D z(mu)|| - 1/level, which is increasing and
    // nearly linear in mu; safeguarded by a bracket.
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double mu = 0.0;
    Vec z, dz;
    for (int it = 0; it < max_iter_; ++it) {
      solve_at(mu, z, dz);
      const Vec Dz = D_ * z;
      const double nd = Dz.norm();
      if (std::abs(nd - level) <= detail::attainable(eps, 1.0) * std::max(1.0, level))
        return Vector{space_, z};
      if (nd > level)
        lo = mu;
      else
        hi = mu;
      const double dnd = nd > 0.0 ? Dz.dot(D_ * dz) / nd : 0.0;
      const double psi = 1.0 / std::max(nd, 1e-300) - 1.0 / level;
      const double dpsi = -dnd / std::max(nd * nd, 1e-300);
      double next = dpsi > 0.0 ? mu - psi / dpsi : std::numeric_limits<double>::quiet_NaN();
      if (!(next > lo && next < hi))
        next = std::isfinite(hi) ? 0.5 * (lo + hi) : std::max(2.0 * mu, 1.0);
      mu = next;
    }
    throw ConvergenceError("seminorm projection: multiplier Newton did not converge",
                           std::abs((D_ * z).norm() - level));
  }

  // Euclidean projection onto {y : sum_k c_k ||y_k|| <= level}.
  Vec project_group_ball(const Vec &v, double level) const {
    const std::size_t ng = group_ptr_.size() - 1;
    std::vector<double> norms(ng);
    double total = 0.0;
    for (std::size_t k = 0; k < ng; ++k) {
      norms[k] = v.segment(group_ptr_[k], group_ptr_[k + 1] - group_ptr_[k]).norm();
      total += weights_[Index(k)] * norms[k];
    }
    if (total <= level)
      return v;
    // Solve sum_k c_k max(n_k - theta c_k, 0) = level over sorted breakpoints.
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < ng; ++k)
      if (weights_[Index(k)] > 0.0)
        order.push_back(k);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return norms[a] / weights_[Index(a)] > norms[b] / weights_[Index(b)];
    });
    double s1 = 0.0, s2 = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) {
      const double c = weights_[Index(order[j])];
      s1 += c * norms[order[j]];
      s2 += c * c;
      theta = (s1 - level) / s2;
      const double next_break =
          j + 1 < order.size() ? norms[order[j + 1]] / weights_[Index(order[j + 1])] : 0.0;
      if (theta >= next_break)
        break;
    }
    theta = std::max(theta, 0.0);
    Vec y = v;
    for (std::size_t k = 0; k < ng; ++k) {
      const double c = weights_[Index(k)];
      if (c == 0.0)
        continue;
      const double shrink = norms[k] > 0.0 ? std::max(norms[k] - theta * c, 0.0) / norms[k] : 0.0;
      y.segment(group_ptr_[k], group_ptr_[k + 1] - group_ptr_[k]) *= shrink;
    }
    return y;
  }

  Vector project_weighted_l1(const Vector &x, double level, double eps) const {
    const Vec Gx = space_.apply(x.coords);
    Vec z = x.coords;
    Vec y = project_group_ball(D_ * z, level);
    Vec lam = Vec::Zero(D_.rows());
    double res = 0.0;
    for (int it = 0; it < max_iter_; ++it) {
      const Vec z_prev = z;
      z = admm_llt_->solve(Gx + admm_rho_ * (D_.transpose() * (y - lam)));
      const Vec Dz = D_ * z;
      y = project_group_ball(Dz + lam, level);
      lam += Dz - y;
      const double primal = (Dz - y).norm();
      const double dual = Vector{space_, z - z_prev}.norm();
      res = std::max(primal, dual);
      if (it > 0 && res <= detail::attainable(eps, Dz.norm()))
        return Vector{space_, z};
    }
    throw ConvergenceError("weighted-l1 projection: splitting did not converge", res);
  }

  GramSpace space_;
  RKind kind_;
  MFn m_;
  double rho_;
  SpMat D_;
  std::vector<Index> group_ptr_;
  Vec weights_;
  double admm_rho_ = 1.0;
  std::shared_ptr<const Eigen::SimplicialLLT<SpMat>> admm_llt_;
  int max_iter_ = 20000;
};

/// The set K(v) = {w : r(w) <= m(v)}.
inline ConstraintSet constraint_set_at(const RadialConstraintFamily &K,
                                       const Vector &v) {
  if (K.kind() == RKind::Unconstrained)
    return whole_space(K.space());
  const double level = K.m(v);
  const double r0 = K.r(Vector::zero(K.space()));
  if (!(level >= r0))
    throw DataError("constraint_set_at: m(v) = " + std::to_string(level) +
                    " is below r(0); the constraint set would be empty");
  auto contains = [K, level](const Vector &z, double tol) { return K.r(z) <= level + tol; };
  auto project = [K, level](const Vector &x, double eps) {
    return K.project_sublevel(x, level, eps);
  };
  return ConstraintSet{K.space(), contains, project, "K(v)", false, std::nullopt, {}};
}

namespace detail {

inline Box merge_boxes(const std::vector<ConstraintSet> &parts, Index n) {
  const double inf = std::numeric_limits<double>::infinity();
  Box b{Vec::Constant(n, -inf), Vec::Constant(n, inf)};
  for (const auto &p : parts)
    if (p.box) {
      b.lower = b.lower.cwiseMax(p.box->lower);
      b.upper = b.upper.cwiseMin(p.box->upper);
    }
  return b;
}

/// Dykstra-like proximal iteration for prox of f + g (both proxes in the
/// same metric). Returns the last g-side iterate when `return_g_side`.
template <class ProxF, class ProxG>
Vector dykstra_like(const ProxF &prox_f, const ProxG &prox_g, const Vector &x0,
                    double eps, bool return_g_side,
                    int max_iter = kDykstraMaxIter) {
  Vector x = x0;
  Vec p = Vec::Zero(x0.size()), q = Vec::Zero(x0.size());
  double res = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector y = prox_g(Vector{x.space, x.coords + p});
    p = x.coords + p - y.coords;
    Vector xn = prox_f(Vector{x.space, y.coords + q});
    q = y.coords + q - xn.coords;
    res = std::max((xn - x).norm(), (xn - y).norm());
    x = std::move(xn);
    if (it > 0 && res <= attainable(eps, x.norm()))
      return return_g_side ? y : x;
  }
  throw ConvergenceError("composite prox: Dykstra-like iteration did not converge", res);
}

} // namespace detail

/// argmin_{z in E} 1/2 ||z - x||_V^2 + tau * phi(z).
inline Vector composite_prox(const ConvexFunction &phi, const ConstraintSet &E,
                             const Vector &x, double tau, double eps) {
  if (!(tau > 0.0))
    throw DataError("composite_prox: tau must be positive");
  if (phi.is_zero)
    return E.whole ? x : E.project(x, eps);
  if (E.whole)
    return phi.prox(x, tau, eps);

  const std::vector<ConstraintSet> parts = detail::flatten(E);
  const bool any_box = std::any_of(parts.begin(), parts.end(),
                                   [](const ConstraintSet &s) { return s.box.has_value(); });
  if (phi.l1_weights && any_box) {
    const GramSpace &V = x.space;
    const Index n = V.dim();
    const Box box = detail::merge_boxes(parts, n);
    auto prox_sep = [&](const Vector &y) {
      detail::SeparableTerms terms{tau * *phi.l1_weights, box.lower, box.upper};
      if (V.is_diagonal()) {
        Vec z(n);
        for (Index i = 0; i < n; ++i)
          z[i] = detail::scalar_prox(y.coords[i], terms.l1[i] / V.diag()[i],
                                     box.lower[i], box.upper[i]);
        return Vector{V, std::move(z)};
      }
      return Vector{V, detail::solve_separable_qp(V.gram(), V.apply(y.coords), terms,
                                                  y.coords, eps * 1e-2)};
    };
    std::vector<ConstraintSet> rest;
    for (const auto &p : parts)
      if (!p.box && !p.whole)
        rest.push_back(p);
    if (rest.empty())
      return prox_sep(x);
    auto proj_rest = [&](const Vector &y) {
      return rest.size() == 1 ? rest.front().project(y, eps * 1e-2)
                              : detail::dykstra_project(rest, y, eps * 1e-2);
    };
    return detail::dykstra_like(prox_sep, proj_rest, x, eps, false);
  }

  auto prox_f = [&](const Vector &y) { return phi.prox(y, tau, eps * 1e-2); };
  auto proj = [&](const Vector &y) { return E.project(y, eps * 1e-2); };
  return detail::dykstra_like(prox_f, proj, x, eps, true);
}

} // namespace qvhi
