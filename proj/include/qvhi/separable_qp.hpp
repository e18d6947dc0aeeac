#pragma once

// Solver for
//
//   minimize  1/2 z^T G z - b^T z + sum_i w_i |z_i|   s.t.  lo <= z <= hi
//
// with G symmetric positive definite and sparse. This is the common kernel
// behind metric box projections and metric weighted-l1 proxes.
//
// Primary method: primal-dual active set (semismooth Newton on the
// diagonally scaled natural residual). It terminates finitely for M-matrices
// and in practice for small dense SPD blocks; if the active set cycles we
// fall back to exact cyclic coordinate descent, which always converges.

#include <cmath>
#include <limits>
#include <vector>

#include "qvhi/hilbert.hpp"

namespace qvhi::detail {

struct SeparableTerms {
  Vec l1;    // w_i >= 0
  Vec lower; // may contain -inf
  Vec upper; // may contain +inf
};

inline double scalar_prox(double y, double threshold, double lo, double hi) {
  double t = 0.0;
  if (y > threshold)
    t = y - threshold;
  else if (y < -threshold)
    t = y + threshold;
  return std::min(std::max(t, lo), hi);
}

inline double natural_residual(const SpMat &G, const Vec &b, const Vec &d,
                               const SeparableTerms &s, const Vec &z) {
  const Vec grad = G * z - b;
  double res = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double p =
        scalar_prox(z[i] - grad[i] / d[i], s.l1[i] / d[i], s.lower[i], s.upper[i]);
    res = std::max(res, std::abs(p - z[i]));
  }
  return res;
}

enum class PdasState : unsigned char { Lower, Upper, Zero, Pos, Neg };

inline Vec solve_separable_qp(const SpMat &G, const Vec &b,
                              const SeparableTerms &s, const Vec &start,
                              double tol, int max_pdas = 100,
                              int max_sweeps = 200000) {
  const Index n = b.size();
  const Vec d = G.diagonal();
  Vec z(n);
  for (Index i = 0; i < n; ++i)
    z[i] = std::min(std::max(start[i], s.lower[i]), s.upper[i]);

  std::vector<PdasState> state(n), prev;
  Vec best = z;
  double best_res = natural_residual(G, b, d, s, z);
  auto reached = [&](double res, const Vec &x) {
    return res <= attainable(tol, x.lpNorm<Eigen::Infinity>());
  };
  if (reached(best_res, z))
    return z;

  for (int it = 0; it < max_pdas; ++it) {
    const Vec grad = G * z - b;
    for (Index i = 0; i < n; ++i) {
      const double y = z[i] - grad[i] / d[i];
      const double thr = s.l1[i] / d[i];
      const double t = scalar_prox(y, thr, -std::numeric_limits<double>::infinity(),
                                   std::numeric_limits<double>::infinity());
      if (t <= s.lower[i])
        state[i] = PdasState::Lower;
      else if (t >= s.upper[i])
        state[i] = PdasState::Upper;
      else if (y > thr)
        state[i] = PdasState::Pos;
      else if (y < -thr)
        state[i] = PdasState::Neg;
      else
        state[i] = PdasState::Zero;
    }
    if (state == prev)
      break; // active set settled but residual still above tol: fall back

    std::vector<Index> free_idx;
    std::vector<Index> pos(n, -1);
    Vec fixed = Vec::Zero(n);
    for (Index i = 0; i < n; ++i) {
      switch (state[i]) {
      case PdasState::Lower: fixed[i] = s.lower[i]; break;
      case PdasState::Upper: fixed[i] = s.upper[i]; break;
      case PdasState::Zero: fixed[i] = 0.0; break;
      default:
        pos[i] = Index(free_idx.size());
        free_idx.push_back(i);
      }
    }
    Vec next = fixed;
    if (!free_idx.empty()) {
      const Index nf = Index(free_idx.size());
      std::vector<Eigen::Triplet<double>> trips;
      Vec rhs(nf);
      const Vec Gfixed = G * fixed;
      for (Index k = 0; k < nf; ++k) {
        const Index i = free_idx[k];
        const double sign = state[i] == PdasState::Pos ? 1.0 : -1.0;
        rhs[k] = b[i] - sign * s.l1[i] - Gfixed[i];
        for (SpMat::InnerIterator itg(G, i); itg; ++itg)
          if (pos[itg.row()] >= 0)
            trips.emplace_back(pos[itg.row()], k, itg.value());
      }
      SpMat Gff(nf, nf);
      Gff.setFromTriplets(trips.begin(), trips.end());
      Eigen::SimplicialLLT<SpMat> llt(Gff);
      if (llt.info() != Eigen::Success)
        break;
      const Vec zf = llt.solve(rhs);
      for (Index k = 0; k < nf; ++k)
        next[free_idx[k]] = zf[k];
    }
    z = std::move(next);
    prev = state;
    const double res = natural_residual(G, b, d, s, z);
    if (res < best_res) {
      best_res = res;
      best = z;
    }
    if (reached(res, z))
      return z;
  }

  // Cyclic coordinate descent from the best iterate. G is symmetric, so
  // column i doubles as row i.
  z = best;
  for (Index i = 0; i < n; ++i)
    z[i] = std::min(std::max(z[i], s.lower[i]), s.upper[i]);
  double res = best_res;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Index i = 0; i < n; ++i) {
      double acc = b[i];
      for (SpMat::InnerIterator itg(G, i); itg; ++itg)
        if (itg.row() != i)
          acc -= itg.value() * z[itg.row()];
      z[i] = scalar_prox(acc / d[i], s.l1[i] / d[i], s.lower[i], s.upper[i]);
    }
    if (sweep % 16 == 15 || n <= 8) {
      res = natural_residual(G, b, d, s, z);
      if (reached(res, z))
        return z;
    }
  }
  throw ConvergenceError("separable QP did not converge", res);
}

} // namespace qvhi::detail
