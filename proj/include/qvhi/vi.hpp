#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "qvhi/convex.hpp"
#include "qvhi/hilbert.hpp"

namespace qvhi {

/// Find u in E with <Au - g, z - u> + phi(z) - phi(u) >= 0 for all z in E.
struct VIInstance {
  NonlinearOperator A;
  ConvexFunction phi;
  ConstraintSet E;
  DualVector g;

  void validate() const {
    detail::require_same(A.domain, phi.space, "VIInstance (phi)");
    detail::require_same(A.domain, E.space, "VIInstance (E)");
    detail::require_same(A.domain, g.space, "VIInstance (g)");
  }
};

struct VISolverConfig {
  std::optional<double> tau; ///< empty: m / L^2
  double tol = 1e-10;
  int max_iter = 100000;
  double eps_inner = 1e-9;
};

struct VISolution {
  Vector u;
  double fp_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  double tau = 0.0;
  std::vector<double> history;
};

inline double auto_step(const NonlinearOperator &A) {
  return A.m_strong / (A.lipschitz * A.lipschitz);
}

/// Contraction factor sqrt(1 - 2 tau m + tau^2 L^2) of the forward-backward map.
inline double contraction_factor(const NonlinearOperator &A, double tau) {
  const double m = A.m_strong, L = A.lipschitz;
  return std::sqrt(std::max(0.0, 1.0 - 2.0 * tau * m + tau * tau * L * L));
}

namespace detail {

inline Vector forward_backward_step(const VIInstance &inst, const Vector &u, double tau,
                                    double eps) {
  const Vector grad = riesz(inst.A.apply(u) - inst.g);
  return composite_prox(inst.phi, inst.E, u - tau * grad, tau, eps);
}

} // namespace detail

/// Forward-backward splitting u+ = prox_{tau(phi + i_E)}(u - tau R(Au - g)).
/// Stops when ||u+ - u|| <= tol * tau; returns the last iterate either way.
inline VISolution solve_vi(const VIInstance &inst, const VISolverConfig &cfg, const Vector &u0) {
  inst.validate();
  const double m = inst.A.m_strong, L = inst.A.lipschitz;
  if (!(m > 0.0))
    throw DataError("solve_vi: operator must be strongly monotone (m > 0)");
  const double tau = cfg.tau.value_or(auto_step(inst.A));
  if (!(tau > 0.0) || !(tau < 2.0 * m / (L * L)))
    throw DataError("solve_vi: step must lie in (0, 2m/L^2)");
  detail::require_same(u0.space, inst.A.domain, "solve_vi (start)");

  VISolution sol{u0, std::numeric_limits<double>::infinity(), 0, false, tau, {}};
  Vector u = u0;
  for (int k = 0; k < cfg.max_iter; ++k) {
    Vector next = detail::forward_backward_step(inst, u, tau, cfg.eps_inner);
    const double step = (next - u).norm();
    sol.history.push_back(step / tau);
    u = std::move(next);
    sol.iterations = k + 1;
    if (step <= cfg.tol * tau) {
      sol.converged = true;
      break;
    }
  }
  sol.fp_residual = sol.history.empty() ? 0.0 : sol.history.back();
  sol.u = std::move(u);
  return sol;
}

/// ||u - prox(u - tau R(Au - g))|| / tau; zero exactly at solutions.
inline double vi_residual(const VIInstance &inst, const Vector &u, double tau_probe,
                          double eps_inner = 1e-12) {
  if (!(tau_probe > 0.0))
    throw DataError("vi_residual: probe step must be positive");
  return (u - detail::forward_backward_step(inst, u, tau_probe, eps_inner)).norm() / tau_probe;
}

struct MintyReport {
  double min_direct = std::numeric_limits<double>::infinity(); ///< operator at u
  double min_minty = std::numeric_limits<double>::infinity();  ///< operator at z
  std::size_t samples = 0;
  bool direct_ok = false;
  bool minty_ok = false;
};

/// Evaluates the direct form <Au - g, z - u> + phi(z) - phi(u) and the Minty
/// form <Az - g, z - u> + phi(z) - phi(u) at every sample.
inline MintyReport minty_check(const VIInstance &inst, const Vector &u,
                               const std::vector<Vector> &z_samples, double slack,
                               double feas_tol = 1e-8) {
  inst.validate();
  MintyReport rep;
  const DualVector Au_g = inst.A.apply(u) - inst.g;
  const double phi_u = inst.phi.value(u);
  for (const auto &z : z_samples) {
    if (!inst.E.contains(z, feas_tol))
      throw DataError("minty_check: sample outside the constraint set");
    const Vector dz = z - u;
    const double conv = inst.phi.value(z) - phi_u;
    rep.min_direct = std::min(rep.min_direct, pair(Au_g, dz) + conv);
    rep.min_minty = std::min(rep.min_minty, pair(inst.A.apply(z) - inst.g, dz) + conv);
  }
  rep.samples = z_samples.size();
  rep.direct_ok = rep.min_direct >= -slack;
  rep.minty_ok = rep.min_minty >= -slack;
  return rep;
}

/// sqrt(d1^2 + 2 d2): bounds every x >= 0 with x^2 <= d1 x + d2.
inline double elementary_bound(double d1, double d2) {
  if (!std::isfinite(d1) || !std::isfinite(d2) || d1 < 0.0 || d2 < 0.0)
    throw DataError("elementary_bound: inputs must be finite and non-negative");
  return std::sqrt(d1 * d1 + 2.0 * d2);
}

/// n -> (E_n, g_n).
using PerturbationFamily = std::function<std::pair<ConstraintSet, DualVector>(int)>;

struct PerturbationRow {
  int n;
  double error;
  int iterations;
  double residual;
};

struct PerturbationResult {
  VISolution base;
  std::vector<PerturbationRow> rows;
};

/// Solves the base problem and each member of the family; errors are
/// ||u_n - u||_V. Throws ConvergenceError if any solve fails.
inline PerturbationResult perturbation_experiment(const VIInstance &base,
                                                  const PerturbationFamily &family,
                                                  const std::vector<int> &n_list,
                                                  const VISolverConfig &cfg) {
  const Vector u0 = Vector::zero(base.A.domain);
  PerturbationResult out{solve_vi(base, cfg, u0), {}};
  if (!out.base.converged)
    throw ConvergenceError("perturbation_experiment: base problem did not converge",
                           out.base.fp_residual);
  for (int n : n_list) {
    if (n <= 0)
      throw DataError("perturbation_experiment: family indices must be positive");
    auto [En, gn] = family(n);
    VIInstance inst{base.A, base.phi, std::move(En), std::move(gn)};
    VISolution s = solve_vi(inst, cfg, out.base.u);
    if (!s.converged)
      throw ConvergenceError("perturbation_experiment: member n=" + std::to_string(n) +
                                 " did not converge",
                             s.fp_residual);
    out.rows.push_back({n, (s.u - out.base.u).norm(), s.iterations, s.fp_residual});
  }
  return out;
}

/// E_n = closed V-ball of radius r0 (1 + 1/n) around the origin, g_n = g.
inline PerturbationFamily shrinking_ball_family(const GramSpace &V, double r0, DualVector g) {
  return [V, r0, g](int n) {
    return std::make_pair(ball_set(Vector::zero(V), r0 * (1.0 + 1.0 / n)), g);
  };
}

/// E_n = E, g_n = g + e / n.
inline PerturbationFamily data_shift_family(ConstraintSet E, DualVector g, DualVector e) {
  return [E, g, e](int n) { return std::make_pair(E, g + (1.0 / n) * e); };
}

/// E_n = [lower + shift/n, upper + shift/n], g_n = g.
inline PerturbationFamily moving_box_family(const GramSpace &V, Vec lower, Vec upper, Vec shift,
                                            DualVector g) {
  return [V, lower, upper, shift, g](int n) {
    return std::make_pair(box_set(V, lower + shift / n, upper + shift / n), g);
  };
}

/// E_n = {a(z) <= b + delta/n}, g_n = g.
inline PerturbationFamily halfspace_cap_family(DualVector a, double b, double delta, DualVector g) {
  return [a, b, delta, g](int n) { return std::make_pair(halfspace_set(a, b + delta / n), g); };
}

/// Closed-form solution for A = a G, phi = 0, E = ball of radius rad at 0:
/// the radial clamp of R(g)/a.
inline Vector radial_ball_solution(const DualVector &g, double a, double rad) {
  const Vector free = (1.0 / a) * riesz(g);
  const double n = free.norm();
  return n <= rad ? free : (rad / n) * free;
}

} // namespace qvhi
