#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qvhi/clarke.hpp"
#include "qvhi/convex.hpp"
#include "qvhi/hilbert.hpp"
#include "qvhi/vi.hpp"

namespace qvhi {

/// Find u in C with u in K(u) and, for all z in K(u),
///   <Au - f, z - u> + phi(z) - phi(u) + j0(Mu; Mz - Mu) >= 0.
/// alpha, beta bound the subgradients: ||zeta||_X <= alpha + beta ||x||_X.
struct QVHIProblem {
  NonlinearOperator A;
  ConvexFunction phi;
  SuperpositionFunctional j;
  LinearMap M;
  DualVector f;
  RadialConstraintFamily K;
  ConstraintSet C;
  double alpha = 0.0;
  double beta = 0.0;
  double M_norm = 0.0; ///< ||M||_{L(V,X)}, filled by make_qvhi_problem

  const GramSpace &V() const { return A.domain; }
  const GramSpace &X() const { return M.codomain; }
};

struct SmallnessCheck {
  bool pass;
  double margin; ///< m - beta ||M||^2
};

inline SmallnessCheck check_smallness(const QVHIProblem &P) {
  const double margin = P.A.m_strong - P.beta * P.M_norm * P.M_norm;
  return {margin > 0.0, margin};
}

/// Assembles and validates the problem data. With `enforce_smallness` the
/// condition m > beta ||M||^2 is checked here; otherwise it is left to the
/// caller (hypothesis reports, parameter sweeps) and to solve_qvhi.
inline QVHIProblem make_qvhi_problem(NonlinearOperator A, ConvexFunction phi,
                                     SuperpositionFunctional j, LinearMap M, DualVector f,
                                     RadialConstraintFamily K, ConstraintSet C, double alpha,
                                     double beta, bool enforce_smallness = true,
                                     std::optional<double> M_norm = std::nullopt) {
  const GramSpace &V = A.domain;
  detail::require_same(phi.space, V, "QVHIProblem (phi)");
  detail::require_same(M.domain, V, "QVHIProblem (M domain)");
  detail::require_same(j.space(), M.codomain, "QVHIProblem (j on X)");
  detail::require_same(f.space, V, "QVHIProblem (f)");
  detail::require_same(K.space(), V, "QVHIProblem (K)");
  detail::require_same(C.space, V, "QVHIProblem (C)");
  if (!(alpha >= 0.0) || !(beta >= 0.0))
    throw DataError("QVHIProblem: growth constants alpha, beta must be >= 0");
  if (!phi.minorant)
    throw DataError("QVHIProblem: phi needs an affine minorant for the a-priori bounds");
  if (enforce_smallness && !(A.m_strong > 0.0))
    throw DataError("QVHIProblem: A must be strongly monotone (m > 0)");
  // 0 in K(v) for all v: r(0) = 0 <= rho <= m(v).
  std::mt19937_64 rng(0x0f00d);
  std::normal_distribution<double> gauss;
  for (int k = 0; k < 8; ++k) {
    Vec c(V.dim());
    for (Index i = 0; i < c.size(); ++i)
      c[i] = (k == 0 ? 0.0 : std::pow(4.0, k - 4)) * gauss(rng);
    const double mv = K.m(Vector{V, c});
    if (!(mv >= K.rho() * (1.0 - 1e-12)))
      throw DataError("QVHIProblem: m(v) = " + std::to_string(mv) +
                      " falls below the declared infimum rho = " + std::to_string(K.rho()));
  }
  QVHIProblem P{std::move(A), std::move(phi), std::move(j), std::move(M), std::move(f),
                std::move(K), std::move(C), alpha, beta, 0.0};
  P.M_norm = M_norm ? *M_norm : operator_norm(P.M);
  if (enforce_smallness) {
    const auto s = check_smallness(P);
    if (!s.pass)
      throw DataError("smallness condition (H0) violated: m - beta*||M||^2 = " +
                      std::to_string(s.margin) + " <= 0");
  }
  return P;
}

struct APrioriBounds {
  Vector z0;
  double c1 = 0.0;
  double c2 = 0.0;
  double R1 = 0.0;
  double R2 = 0.0;
  double R = 0.0;
};

/// Solution-norm bound R1, image bound R2 = ||M|| R1 and subgradient bound
/// R = alpha + beta R2, from the anchor z0 and the minorant (l, b) of phi.
inline APrioriBounds a_priori_bounds(const QVHIProblem &P, const Vector &z0) {
  const auto s = check_smallness(P);
  if (!s.pass)
    throw DataError("a_priori_bounds: smallness condition (H0) violated (margin " +
                    std::to_string(s.margin) + ")");
  if (!P.phi.minorant)
    throw DataError("a_priori_bounds: phi has no affine minorant");
  const Minorant &mn = *P.phi.minorant;
  const double nM = P.M_norm;
  const double nz0 = z0.norm();
  const double nl = mn.slope.norm();
  const double c1 = P.A.apply(z0).norm() + P.f.norm() + P.alpha * nM + nl +
                    P.beta * nM * nM * nz0;
  const double c2 = std::abs(P.phi.value(z0)) + nl * nz0 + std::abs(mn.offset);
  const double R1 = nz0 + elementary_bound(c1 / s.margin, c2 / s.margin);
  const double R2 = nM * R1;
  return APrioriBounds{z0, c1, c2, R1, R2, P.alpha + P.beta * R2};
}

inline APrioriBounds a_priori_bounds(const QVHIProblem &P) {
  return a_priori_bounds(P, Vector::zero(P.V()));
}

struct OuterConfig {
  double theta = 0.5;
  double tol_outer = 1e-10;
  int max_outer = 2000;
  SelectionRule selection = SelectionRule::MinNorm;
  VISolverConfig vi_cfg{};
  int multistart = 4;
  std::uint64_t seed = 0;
  double feas_tol = 1e-7;
  int stall_window = 20;
};

struct OuterRow {
  int iteration;
  double outer_residual;
  double v_norm;
  double w_norm;
  double feasibility;
};

struct QVHISolution {
  Vector u;
  Vector w;
  double outer_residual = std::numeric_limits<double>::infinity();
  double constraint_residual = std::numeric_limits<double>::infinity();
  bool truncation_active = false;
  APrioriBounds bounds;
  bool converged = false;
  int iterations = 0;
  int restarts = 0;
  double max_v_norm = 0.0; ///< over all iterates, for the D-invariance audit
  double max_w_norm = 0.0;
  std::string message;
  std::vector<OuterRow> history;
};

namespace detail {

inline Vector clip_ball(const Vector &z, double radius) {
  if (radius <= 0.0)
    return Vector::zero(z.space);
  const double n = z.norm();
  return n <= radius ? z : (radius / n) * z;
}

inline Vector select_truncated(const QVHIProblem &P, const Vector &Mu, double R2,
                               SelectionRule rule, const Vector &dir) {
  const Vector base = clip_ball(Mu, R2);
  return P.j.select(base, rule, dir);
}

inline ConstraintSet feasible_set(const QVHIProblem &P, const Vector &v) {
  return intersect(constraint_set_at(P.K, v), P.C);
}

/// Distance-like violation of u in C: exact box violation for box parts,
/// metric distance for the rest.
inline double c_violation(const ConstraintSet &C, const Vector &u, double eps) {
  if (C.whole)
    return 0.0;
  double out = 0.0;
  for (const auto &part : flatten(C)) {
    if (part.whole)
      continue;
    if (part.box) {
      const Vec over = (u.coords - part.box->upper).cwiseMax(part.box->lower - u.coords);
      out = std::max(out, over.maxCoeff());
    } else {
      out = std::max(out, part.distance(u, eps));
    }
  }
  return std::max(out, 0.0);
}

inline double feasibility(const QVHIProblem &P, const Vector &u, double eps) {
  return std::max({P.K.r(u) - P.K.m(u), c_violation(P.C, u, eps), 0.0});
}

inline Vector random_in_ball(const GramSpace &S, double radius, std::mt19937_64 &rng) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  Vec c(S.dim());
  for (Index i = 0; i < c.size(); ++i)
    c[i] = gauss(rng);
  Vector d{S, c};
  const double n = d.norm();
  if (n == 0.0 || radius <= 0.0)
    return Vector::zero(S);
  return (radius * std::pow(unif(rng), 1.0 / double(S.dim())) / n) * d;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace detail

/// Unique solution of the inner problem with E = K(v) ∩ C and g = f - M* w.
inline Vector auxiliary_solve(const QVHIProblem &P, const Vector &v, const Vector &w,
                              const VISolverConfig &cfg,
                              const std::optional<Vector> &warm = std::nullopt) {
  VIInstance inst{P.A, P.phi, detail::feasible_set(P, v), P.f - adjoint_apply(P.M, w)};
  VISolution s = solve_vi(inst, cfg, warm ? *warm : Vector::zero(P.V()));
  if (!s.converged)
    throw ConvergenceError("auxiliary problem did not converge", s.fp_residual);
  return std::move(s.u);
}

/// Damped fixed-point iteration on (v, w) -> (p(v, w), F(M p(v, w))).
/// The iteration is not guaranteed to converge; failure is reported through
/// `converged = false` and the best iterate.
inline QVHISolution solve_qvhi(const QVHIProblem &P, const OuterConfig &cfg,
                               const Vector &v0, const Vector &w0) {
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0))
    throw DataError("solve_qvhi: damping theta must lie in (0, 1]");
  const auto small = check_smallness(P);
  if (!small.pass)
    throw DataError("smallness condition (H0) violated: m - beta*||M||^2 = " +
                    std::to_string(small.margin) + " <= 0");
  const APrioriBounds B = a_priori_bounds(P);
  const bool j_zero = P.j.is_zero();

  QVHISolution best{Vector::zero(P.V()), Vector::zero(P.X()), std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity(), false, B, false, 0, 0, 0.0, 0.0, "", {}};
  double theta = j_zero ? 1.0 : cfg.theta;
  std::mt19937_64 rng(detail::mix_seed(cfg.seed, 0xabc));
  Vector v = v0, w = j_zero ? Vector::zero(P.X()) : w0;
  int total_iter = 0;

  for (int attempt = 0; attempt < std::max(1, cfg.multistart); ++attempt) {
    if (attempt > 0) {
      v = detail::random_in_ball(P.V(), B.R1, rng);
      w = detail::random_in_ball(P.X(), B.R, rng);
      theta *= 0.5;
      best.restarts = attempt;
    }
    // Clip the start into D.
    if (!P.C.whole)
      v = P.C.project(v, cfg.vi_cfg.eps_inner);
    v = detail::clip_ball(v, B.R1);
    w = detail::clip_ball(w, B.R);

    double best_res = std::numeric_limits<double>::infinity();
    int since_improve = 0;
    std::optional<Vector> warm = v;
    for (int it = 0; it < cfg.max_outer; ++it) {
      Vector u = auxiliary_solve(P, v, w, cfg.vi_cfg, warm);
      const Vector Mu = P.M.apply(u);
      const Vector dir = Mu - P.M.apply(v);
      const Vector w_new = detail::select_truncated(P, Mu, B.R2, cfg.selection, dir);
      const Vector w_next = (1.0 - theta) * w + theta * w_new;
      const double res = (u - v).norm() + (w_next - w).norm();
      ++total_iter;
      const double feas = detail::feasibility(P, u, cfg.vi_cfg.eps_inner);
      best.history.push_back({total_iter, res, u.norm(), w_next.norm(), feas});
      best.max_v_norm = std::max(best.max_v_norm, u.norm());
      best.max_w_norm = std::max(best.max_w_norm, w_next.norm());
      warm = u;
      v = u;
      w = w_next;

      if (res < best.outer_residual || !std::isfinite(best.outer_residual)) {
        best.u = u;
        best.w = w_new;
        best.outer_residual = res;
      }
      if (res <= cfg.tol_outer) {
        best.u = u;
        best.w = w_new;
        best.outer_residual = res;
        best.iterations = total_iter;
        best.constraint_residual = detail::feasibility(P, u, cfg.vi_cfg.eps_inner);
        best.truncation_active = Mu.norm() > B.R2 + cfg.tol_outer;
        best.converged = !best.truncation_active && best.constraint_residual <= cfg.feas_tol;
        if (best.converged)
          best.message = "converged";
        else if (best.truncation_active)
          best.message = "fixed point reached with truncation active";
        else
          best.message = "fixed point violates u in K(u) beyond tolerance";
        return best;
      }
      if (res < 0.999 * best_res) {
        best_res = res;
        since_improve = 0;
      } else if (++since_improve >= cfg.stall_window) {
        break; // cycling or stalled: restart
      }
    }
  }
  best.iterations = total_iter;
  best.constraint_residual = detail::feasibility(P, best.u, cfg.vi_cfg.eps_inner);
  best.truncation_active = P.M.apply(best.u).norm() > B.R2 + cfg.tol_outer;
  best.message = "outer iteration did not converge after " + std::to_string(best.restarts + 1) +
                 " attempt(s)";
  return best;
}

inline QVHISolution solve_qvhi(const QVHIProblem &P, const OuterConfig &cfg) {
  return solve_qvhi(P, cfg, Vector::zero(P.V()), Vector::zero(P.X()));
}

struct QVHIResidual {
  double fp;
  double feas;
  bool subgrad_ok;

  bool pass(double tol) const { return fp <= tol && feas <= tol && subgrad_ok; }
};

/// Certificate for (u, w): fixed-point residual of the inner problem with
/// E = K(u) ∩ C and g = f - M* w, feasibility of u, and w in the nodal
/// subdifferential of j at Mu.
inline QVHIResidual qvhi_residual(const QVHIProblem &P, const Vector &u, const Vector &w,
                                  double tau_probe, double eps_inner = 1e-12) {
  VIInstance inst{P.A, P.phi, detail::feasible_set(P, u), P.f - adjoint_apply(P.M, w)};
  return {vi_residual(inst, u, tau_probe, eps_inner), detail::feasibility(P, u, eps_inner),
          P.j.admissible(P.M.apply(u), w, 1e-10)};
}

/// <Au - f, z - u> + phi(z) - phi(u) + j0(Mu; Mz - Mu).
inline double inequality_value(const QVHIProblem &P, const Vector &u, const Vector &z,
                               const DualVector &Au_f, double phi_u, const Vector &Mu) {
  return pair(Au_f, z - u) + P.phi.value(z) - phi_u + P.j.j0(Mu, P.M.apply(z) - Mu);
}

struct InequalityReport {
  double min_value = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
  bool pass = false;
};

inline InequalityReport verify_inequality(const QVHIProblem &P, const Vector &u,
                                          const std::vector<Vector> &z_samples, double slack) {
  if (z_samples.empty())
    throw DataError("verify_inequality: empty sample set");
  InequalityReport rep;
  const DualVector Au_f = P.A.apply(u) - P.f;
  const double phi_u = P.phi.value(u);
  const Vector Mu = P.M.apply(u);
  for (const auto &z : z_samples)
    rep.min_value = std::min(rep.min_value, inequality_value(P, u, z, Au_f, phi_u, Mu));
  rep.samples = z_samples.size();
  rep.pass = rep.min_value >= -slack;
  return rep;
}

/// Points of K(u) ∩ C: u itself, projections of perturbations of u at
/// log-spread scales, and projections of random points of the R-ball.
inline std::vector<Vector> feasible_samples(const QVHIProblem &P, const Vector &u, int n,
                                            double radius, std::uint64_t seed,
                                            double eps = 1e-12) {
  const ConstraintSet E = detail::feasible_set(P, u);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif;
  std::vector<Vector> out;
  out.reserve(std::size_t(std::max(n, 1)));
  out.push_back(E.project(u, eps));
  for (int k = 1; k < n; ++k) {
    if (k % 2 == 0) {
      out.push_back(E.project(detail::random_in_ball(P.V(), radius, rng), eps));
    } else {
      const double scale = radius * std::pow(10.0, -6.0 * unif(rng));
      out.push_back(E.project(u + detail::random_in_ball(P.V(), scale, rng), eps));
    }
  }
  return out;
}

struct BruteForceCluster {
  Vector representative;
  double score;
  std::size_t size;
};

struct BruteForceResult {
  std::vector<BruteForceCluster> clusters;
  std::size_t feasible_points = 0;
  std::size_t survivors = 0;
  double spacing = 0.0;
  std::string diagnostic;
};

struct BruteForceOptions {
  double kappa = 4.0;        ///< tolerance multiplier on spacing * local Lipschitz bound
  double eps_feas = 0.0;     ///< 0: use the u-grid spacing
  int window = 6;            ///< z-window radius in z-steps (2D)
  int coarse_cells = 40;     ///< cells per axis at the coarsest level
  int refine_halo = 2;       ///< neighbours (per axis) refined around survivors
};

namespace detail {

/// Local Lipschitz bound for the stationarity quantity: operator part, plus
/// the subgradient slope of h pushed through M.
inline double local_lipschitz(const QVHIProblem &P, double radius) {
  double slope = 0.0;
  const Vec &wts = P.j.weights();
  for (Index i = 0; i < std::min<Index>(wts.size(), 64); ++i) {
    const auto &h = P.j.h(i);
    for (int k = -200; k <= 200; ++k) {
      const double r = radius * k / 200.0, dr = radius / 400.0 + 1e-9;
      if (h.breakpoint_at(r) || h.piece_of(r) != h.piece_of(r + dr))
        continue;
      const double a = select_in_interval(h.interval(r).first, h.interval(r).second,
                                          SelectionRule::MinNorm, 0.0);
      const double b = select_in_interval(h.interval(r + dr).first, h.interval(r + dr).second,
                                          SelectionRule::MinNorm, 0.0);
      slope = std::max(slope, std::abs(b - a) / dr);
    }
  }
  return P.A.lipschitz + slope * P.M_norm * P.M_norm + 1.0;
}

} // namespace detail

/// Grid oracle for dim <= 2: keeps grid points u with u in K(u) ∩ C (within
/// eps_feas) whose inequality holds on a z-window around u up to a tolerance
/// proportional to the spacing. Convexity of z -> inequality_value makes the
/// local window sufficient. Coarse-to-fine: each level refines only the
/// neighbourhoods of the previous level's survivors.
inline BruteForceResult brute_force_qvhi(const QVHIProblem &P, double u_spacing,
                                         double z_spacing, const Vec &lower, const Vec &upper,
                                         const BruteForceOptions &opt = {}) {
  const GramSpace &V = P.V();
  const Index dim = V.dim();
  if (dim > 2)
    throw DataError("brute_force_qvhi: dimension must be 1 or 2");
  if (lower.size() != dim || upper.size() != dim || !((upper - lower).array() > 0.0).all())
    throw DataError("brute_force_qvhi: bad search box");
  if (!(u_spacing > 0.0) || !(z_spacing > 0.0))
    throw DataError("brute_force_qvhi: spacings must be positive");

  const double width = (upper - lower).maxCoeff();
  const double Lloc = detail::local_lipschitz(P, std::max(1.0, width));
  const double zratio = z_spacing / u_spacing;

  struct Cand {
    Vec x;
    double score;
  };
  // Lowest score of the normalized inequality over the z-window; stops early
  // once below the threshold.
  auto score_of = [&](const Vec &x, double h, double thresh) -> std::optional<double> {
    const Vector grid_point{V, x};
    const double ef = opt.eps_feas > 0.0 ? opt.eps_feas : h;
    if (P.K.r(grid_point) > P.K.m(grid_point) + ef || !P.C.contains(grid_point, ef))
      return std::nullopt;
    const ConstraintSet E = detail::feasible_set(P, grid_point);
    // A grid point inside the slack but outside E is scored at its projection.
    const Vector u = E.contains(grid_point, 1e-14) ? grid_point : E.project(grid_point, 1e-12);
    const DualVector Au_f = P.A.apply(u) - P.f;
    const double phi_u = P.phi.value(u);
    const Vector Mu = P.M.apply(u);
    const double hz = h * zratio;
    double s = std::numeric_limits<double>::infinity();
    // Window points outside E are replaced by their projections, which keeps
    // tangential directions testable on curved boundaries.
    auto probe = [&](const Vec &d) {
      Vector z{V, u.coords + hz * d};
      if (!E.contains(z, 1e-14))
        z = E.project(z, 1e-12);
      const double dist = (z - u).norm();
      if (dist <= 1e-3 * hz)
        return true;
      s = std::min(s, inequality_value(P, u, z, Au_f, phi_u, Mu) / dist);
      return s >= thresh;
    };
    if (dim == 1) {
      for (double d : {1.0, -1.0})
        if (!probe(Vec::Constant(1, d)))
          return s;
    } else {
      // Axis directions first, then the full window.
      const int W = std::max(1, opt.window);
      static constexpr int axes[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (const auto &d : axes)
        if (!probe(Eigen::Vector2d(d[0], d[1])))
          return s;
      for (int a = -W; a <= W; ++a)
        for (int b = -W; b <= W; ++b) {
          if (a == 0 && b == 0)
            continue;
          if (!probe(Eigen::Vector2d(a, b) / double(std::max(std::abs(a), std::abs(b)))))
            return s;
        }
    }
    return std::isfinite(s) ? s : 0.0;
  };

  BruteForceResult out;
  // Level spacings from coarse to the requested spacing.
  std::vector<double> levels;
  for (double h = u_spacing; ; h *= 2.0) {
    levels.push_back(h);
    if (width / h <= opt.coarse_cells)
      break;
  }
  std::reverse(levels.begin(), levels.end());

  std::vector<Vec> candidates;
  {
    const double h = levels.front();
    std::vector<Index> counts(static_cast<std::size_t>(dim));
    for (Index k = 0; k < dim; ++k)
      counts[std::size_t(k)] = Index(std::floor((upper[k] - lower[k]) / h + 1e-9)) + 1;
    if (dim == 1) {
      for (Index a = 0; a < counts[0]; ++a)
        candidates.push_back(Vec::Constant(1, lower[0] + a * h));
    } else {
      for (Index a = 0; a < counts[0]; ++a)
        for (Index b = 0; b < counts[1]; ++b)
          candidates.push_back(Eigen::Vector2d(lower[0] + a * h, lower[1] + b * h));
    }
  }

  std::vector<Cand> surv;
  for (std::size_t lv = 0; lv < levels.size(); ++lv) {
    const double h = levels[lv];
    const double thresh = -opt.kappa * h * Lloc;
    surv.clear();
    std::size_t feasible = 0;
    for (const auto &x : candidates) {
      auto s = score_of(x, h, thresh);
      if (!s)
        continue;
      ++feasible;
      if (*s >= thresh)
        surv.push_back({x, *s});
    }
    if (lv + 1 == levels.size()) {
      out.feasible_points = feasible;
      break;
    }
    // Next-level candidates: halo of each survivor on the finer lattice.
    const double hn = levels[lv + 1];
    const int halo = opt.refine_halo * 2;
    std::vector<std::vector<long long>> keys;
    for (const auto &c : surv) {
      std::vector<long long> base(static_cast<std::size_t>(dim));
      for (Index k = 0; k < dim; ++k)
        base[std::size_t(k)] = std::llround((c.x[k] - lower[k]) / hn);
      if (dim == 1) {
        for (int a = -halo; a <= halo; ++a)
          keys.push_back({base[0] + a});
      } else {
        for (int a = -halo; a <= halo; ++a)
          for (int b = -halo; b <= halo; ++b)
            keys.push_back({base[0] + a, base[1] + b});
      }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    candidates.clear();
    for (const auto &key : keys) {
      Vec x(dim);
      bool inside = true;
      for (Index k = 0; k < dim; ++k) {
        x[k] = lower[k] + double(key[std::size_t(k)]) * hn;
        inside = inside && x[k] >= lower[k] - 1e-12 && x[k] <= upper[k] + 1e-12;
      }
      if (inside)
        candidates.push_back(x);
    }
  }

  out.spacing = levels.back();
  out.survivors = surv.size();
  if (out.feasible_points == 0) {
    out.diagnostic = "no grid point satisfies u in K(u) ∩ C";
    return out;
  }
  if (surv.empty()) {
    out.diagnostic = "no grid point satisfies the inequality within tolerance";
    return out;
  }
  // Cluster survivors: single linkage at 1.5 grid cells.
  const double link = 1.5 * out.spacing * std::sqrt(double(dim)) + 1e-12;
  std::vector<int> label(surv.size(), -1);
  int nl = 0;
  for (std::size_t s0 = 0; s0 < surv.size(); ++s0) {
    if (label[s0] >= 0)
      continue;
    std::vector<std::size_t> stack{s0};
    label[s0] = nl;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < surv.size(); ++b)
        if (label[b] < 0 && (surv[a].x - surv[b].x).lpNorm<Eigen::Infinity>() <= link) {
          label[b] = nl;
          stack.push_back(b);
        }
    }
    ++nl;
  }
  for (int c = 0; c < nl; ++c) {
    std::size_t best = 0, size = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < surv.size(); ++s)
      if (label[s] == c) {
        ++size;
        if (surv[s].score > best_score) {
          best_score = surv[s].score;
          best = s;
        }
      }
    out.clusters.push_back({Vector{V, surv[best].x}, best_score, size});
  }
  return out;
}

struct SolutionSetSample {
  std::vector<Vector> solutions;
  std::vector<QVHISolution> runs;
  double diameter = 0.0;
  bool bounds_ok = true; ///< every member satisfies ||u|| <= R1 (+ tolerance)
  int failures = 0;
};

/// Runs solve_qvhi from n_starts random points of D and deduplicates the
/// converged solutions at 10 * tol_outer. Start k uses its own random stream
/// derived from `seed`, so results do not depend on the thread count.
inline SolutionSetSample sample_solution_set(const QVHIProblem &P, const OuterConfig &cfg,
                                             int n_starts, std::uint64_t seed, int threads = 1) {
  if (n_starts < 1)
    throw DataError("sample_solution_set: n_starts must be >= 1");
  const APrioriBounds B = a_priori_bounds(P);
  std::vector<std::optional<QVHISolution>> runs(static_cast<std::size_t>(n_starts));
  std::vector<std::string> errors(static_cast<std::size_t>(n_starts));
  auto run = [&](int k) {
    std::mt19937_64 rng(detail::mix_seed(seed, std::uint64_t(k)));
    const Vector v0 = detail::random_in_ball(P.V(), B.R1, rng);
    const Vector w0 = detail::random_in_ball(P.X(), B.R, rng);
    OuterConfig c = cfg;
    c.seed = detail::mix_seed(seed, std::uint64_t(k) + 0x1000);
    try {
      runs[std::size_t(k)] = solve_qvhi(P, c, v0, w0);
    } catch (const std::exception &e) {
      errors[std::size_t(k)] = e.what();
    }
  };
  const int nt = std::max(1, std::min(threads, n_starts));
  if (nt == 1) {
    for (int k = 0; k < n_starts; ++k)
      run(k);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&, t] {
        for (int k = t; k < n_starts; k += nt)
          run(k);
      });
    for (auto &th : pool)
      th.join();
  }

  SolutionSetSample out;
  const double dedup = 10.0 * cfg.tol_outer;
  for (int k = 0; k < n_starts; ++k) {
    auto &r = runs[std::size_t(k)];
    if (!r || !r->converged) {
      ++out.failures;
      if (r)
        out.runs.push_back(*r);
      continue;
    }
    if (r->u.norm() > B.R1 + 1e-6)
      out.bounds_ok = false;
    const bool seen = std::any_of(out.solutions.begin(), out.solutions.end(),
                                  [&](const Vector &s) { return (s - r->u).norm() <= dedup; });
    if (!seen)
      out.solutions.push_back(r->u);
    out.runs.push_back(*r);
  }
  for (std::size_t a = 0; a < out.solutions.size(); ++a)
    for (std::size_t b = a + 1; b < out.solutions.size(); ++b)
      out.diameter = std::max(out.diameter, (out.solutions[a] - out.solutions[b]).norm());
  return out;
}

} // namespace qvhi
