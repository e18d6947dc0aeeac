#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qvhi/errors.hpp"

namespace qvhi {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

namespace detail {

inline bool all_finite(const Vec &v) { return v.allFinite(); }

/// Smallest stopping tolerance reachable in double precision at this scale.
inline double attainable(double eps, double scale) {
  return std::max(eps, 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale));
}

inline SpMat sparse_from_dense(const Mat &m) { return m.sparseView(); }

inline double max_abs(const SpMat &m) {
  double out = 0.0;
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it)
      out = std::max(out, std::abs(it.value()));
  return out;
}

} // namespace detail

/// A finite-dimensional Hilbert space R^n with inner product u^T G v.
///
/// The Gram matrix is checked for symmetry and factorized once at
/// construction; the Cholesky factor is shared by every copy of the handle.
/// Two handles denote the same space iff they share the same factorization.
class GramSpace {
public:
  GramSpace(SpMat gram, std::string label) {
    if (gram.rows() != gram.cols() || gram.rows() == 0)
      throw DataError("gram matrix must be square and non-empty");
    gram.makeCompressed();
    const double scale = detail::max_abs(gram);
    if (!std::isfinite(scale) || scale <= 0.0)
      throw DataError("gram matrix must have finite, non-zero entries");
    SpMat asym = SpMat(gram.transpose()) - gram;
    if (detail::max_abs(asym) > 1e-12 * scale)
      throw DataError("gram matrix is not symmetric");

    auto impl = std::make_shared<Impl>();
    impl->label = std::move(label);
    impl->diagonal = true;
    for (Index k = 0; k < gram.outerSize(); ++k)
      for (SpMat::InnerIterator it(gram, k); it; ++it)
        if (it.row() != it.col() && it.value() != 0.0)
          impl->diagonal = false;
    impl->diag = gram.diagonal();
    impl->gram = std::move(gram);
    impl->llt.compute(impl->gram);
    if (impl->llt.info() != Eigen::Success || (impl->diag.array() <= 0.0).any())
      throw DataError("gram matrix of space '" + impl->label +
                      "' is not positive definite");
    impl_ = std::move(impl);
  }

  static GramSpace identity(Index n, std::string label = "V") {
    SpMat g(n, n);
    g.setIdentity();
    return GramSpace(std::move(g), std::move(label));
  }

  static GramSpace diagonal(const Vec &d, std::string label = "X") {
    SpMat g(d.size(), d.size());
    std::vector<Eigen::Triplet<double>> t;
    for (Index i = 0; i < d.size(); ++i)
      t.emplace_back(i, i, d[i]);
    g.setFromTriplets(t.begin(), t.end());
    return GramSpace(std::move(g), std::move(label));
  }

  static GramSpace dense(const Mat &g, std::string label = "V") {
    return GramSpace(detail::sparse_from_dense(g), std::move(label));
  }

  Index dim() const { return impl_->gram.rows(); }
  const SpMat &gram() const { return impl_->gram; }
  const std::string &label() const { return impl_->label; }
  bool is_diagonal() const { return impl_->diagonal; }
  const Vec &diag() const { return impl_->diag; }

  Vec apply(const Vec &v) const { return impl_->gram * v; }
  Vec solve(const Vec &rhs) const { return impl_->llt.solve(rhs); }

  bool operator==(const GramSpace &o) const { return impl_ == o.impl_; }
  bool operator!=(const GramSpace &o) const { return impl_ != o.impl_; }

private:
  struct Impl {
    SpMat gram;
    Eigen::SimplicialLLT<SpMat> llt;
    Vec diag;
    std::string label;
    bool diagonal = false;
  };
  std::shared_ptr<const Impl> impl_;
};

namespace detail {

inline void require_same(const GramSpace &a, const GramSpace &b,
                         const char *where) {
  if (a != b)
    throw DataError(std::string(where) + ": space mismatch ('" + a.label() +
                    "' vs '" + b.label() + "')");
}

} // namespace detail

/// Element of a GramSpace in primal coordinates.
struct Vector {
  GramSpace space;
  Vec coords;

  Vector(GramSpace s, Vec c) : space(std::move(s)), coords(std::move(c)) {
    if (coords.size() != space.dim())
      throw DataError("vector length does not match space dimension");
    if (!detail::all_finite(coords))
      throw DataError("vector has non-finite entries");
  }

  static Vector zero(const GramSpace &s) { return {s, Vec::Zero(s.dim())}; }

  double norm() const { return std::sqrt(std::max(0.0, coords.dot(space.apply(coords)))); }
  Index size() const { return coords.size(); }
};

/// Continuous linear functional on a GramSpace, stored in functional
/// coordinates: its pairing with a Vector is the plain dot product.
struct DualVector {
  GramSpace space;
  Vec coords;

  DualVector(GramSpace s, Vec c) : space(std::move(s)), coords(std::move(c)) {
    if (coords.size() != space.dim())
      throw DataError("dual vector length does not match space dimension");
    if (!detail::all_finite(coords))
      throw DataError("dual vector has non-finite entries");
  }

  static DualVector zero(const GramSpace &s) { return {s, Vec::Zero(s.dim())}; }

  /// Dual norm sup_{v != 0} g(v)/||v|| = sqrt(g^T G^{-1} g).
  double norm() const {
    return std::sqrt(std::max(0.0, coords.dot(space.solve(coords))));
  }
};

inline Vector operator+(const Vector &a, const Vector &b) {
  detail::require_same(a.space, b.space, "operator+");
  return {a.space, a.coords + b.coords};
}
inline Vector operator-(const Vector &a, const Vector &b) {
  detail::require_same(a.space, b.space, "operator-");
  return {a.space, a.coords - b.coords};
}
inline Vector operator*(double s, const Vector &a) { return {a.space, s * a.coords}; }

inline DualVector operator+(const DualVector &a, const DualVector &b) {
  detail::require_same(a.space, b.space, "operator+");
  return {a.space, a.coords + b.coords};
}
inline DualVector operator-(const DualVector &a, const DualVector &b) {
  detail::require_same(a.space, b.space, "operator-");
  return {a.space, a.coords - b.coords};
}
inline DualVector operator*(double s, const DualVector &a) {
  return {a.space, s * a.coords};
}

/// <u, v> = u^T G v.
inline double inner(const Vector &u, const Vector &v) {
  detail::require_same(u.space, v.space, "inner");
  return u.coords.dot(u.space.apply(v.coords));
}

/// Duality pairing g(v).
inline double pair(const DualVector &g, const Vector &v) {
  detail::require_same(g.space, v.space, "pair");
  return g.coords.dot(v.coords);
}

inline double distance(const Vector &a, const Vector &b) { return (a - b).norm(); }

/// Riesz representative: the s with <s, v> = g(v) for all v.
inline Vector riesz(const DualVector &g) {
  Vec s = g.space.solve(g.coords);
  if (!s.allFinite())
    throw DataError("riesz: gram solve failed");
  return {g.space, std::move(s)};
}

/// Inverse Riesz map v -> <v, .>.
inline DualVector to_dual(const Vector &v) { return {v.space, v.space.apply(v.coords)}; }

/// Bounded linear map between two GramSpaces.
struct LinearMap {
  SpMat matrix;
  GramSpace domain;
  GramSpace codomain;

  LinearMap(SpMat m, GramSpace dom, GramSpace cod)
      : matrix(std::move(m)), domain(std::move(dom)), codomain(std::move(cod)) {
    if (matrix.rows() != codomain.dim() || matrix.cols() != domain.dim())
      throw DataError("linear map shape does not match its spaces");
    for (Index k = 0; k < matrix.outerSize(); ++k)
      for (SpMat::InnerIterator it(matrix, k); it; ++it)
        if (!std::isfinite(it.value()))
          throw DataError("linear map has non-finite entries");
    matrix.makeCompressed();
  }

  static LinearMap identity(const GramSpace &dom, const GramSpace &cod) {
    SpMat m(cod.dim(), dom.dim());
    m.setIdentity();
    return {std::move(m), dom, cod};
  }

  Vector apply(const Vector &v) const {
    detail::require_same(v.space, domain, "LinearMap::apply");
    return {codomain, matrix * v.coords};
  }

  LinearMap scaled(double c) const { return {c * matrix, domain, codomain}; }
};

/// M* w as a functional on the domain: v -> <w, M v>_X.
inline DualVector adjoint_apply(const LinearMap &M, const Vector &w) {
  detail::require_same(w.space, M.codomain, "adjoint_apply");
  return {M.domain, M.matrix.transpose() * M.codomain.apply(w.coords)};
}

/// sup ||M v||_X / ||v||_V by power iteration on the generalized eigenproblem
/// (M^T G_X M) v = lambda G_V v.
inline double operator_norm(const LinearMap &M, double rel_tol = 1e-8,
                            int max_iter = 10000) {
  const Index n = M.domain.dim();
  if (M.matrix.nonZeros() == 0)
    return 0.0;
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Vec v(n);
  for (Index i = 0; i < n; ++i)
    v[i] = unif(rng);
  auto vnorm = [&](const Vec &x) { return std::sqrt(x.dot(M.domain.apply(x))); };
  v /= vnorm(v);
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vec mv = M.matrix * v;
    const Vec rhs = M.matrix.transpose() * M.codomain.apply(mv);
    Vec next = M.domain.solve(rhs);
    const double nn = vnorm(next);
    if (nn == 0.0) {
      // v landed in the kernel; perturb and retry.
      for (Index i = 0; i < n; ++i)
        v[i] = unif(rng);
      v /= vnorm(v);
      continue;
    }
    next /= nn;
    const Vec mn = M.matrix * next;
    const double next_lambda = mn.dot(M.codomain.apply(mn));
    const bool done = it > 0 && std::abs(next_lambda - lambda) <=
                                    rel_tol * std::max(next_lambda, 1e-300);
    lambda = next_lambda;
    v = std::move(next);
    if (done)
      return std::sqrt(lambda);
  }
  throw ConvergenceError("operator_norm: power iteration did not converge",
                         lambda);
}

/// Nonlinear operator V -> V* given as a pure oracle on coordinates, with
/// declared strong-monotonicity and Lipschitz constants (both in the V-metric).
struct NonlinearOperator {
  GramSpace domain;
  std::function<Vec(const Vec &)> fn;
  double m_strong = 0.0;
  double lipschitz = 1.0;

  NonlinearOperator(GramSpace dom, std::function<Vec(const Vec &)> f, double m,
                    double L)
      : domain(std::move(dom)), fn(std::move(f)), m_strong(m), lipschitz(L) {
    if (!(m >= 0.0) || !(L > 0.0) || m > L * (1.0 + 1e-12))
      throw DataError("operator constants must satisfy 0 <= m <= L, L > 0");
  }

  DualVector apply(const Vector &v) const {
    detail::require_same(v.space, domain, "NonlinearOperator::apply");
    return {domain, fn(v.coords)};
  }
};

/// Exact (m, L) of a linear operator v -> A v in the metric of `space`:
/// m = min eigenvalue of the symmetric part relative to G, L = sqrt of the
/// max eigenvalue of A^T G^{-1} A relative to G. Dense; meant for small n.
inline std::pair<double, double> linear_constants(const GramSpace &space,
                                                  const Mat &A) {
  const Mat G = Mat(space.gram());
  const Mat S = 0.5 * (A + A.transpose());
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es_m(S, G);
  const Mat Ginv_A = G.llt().solve(A);
  const Mat N = A.transpose() * Ginv_A;
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es_l(0.5 * (N + N.transpose()),
                                                     G);
  const double m = std::max(0.0, es_m.eigenvalues().minCoeff());
  const double L = std::sqrt(std::max(0.0, es_l.eigenvalues().maxCoeff()));
  return {m, std::max(L, m)};
}

/// Linear operator u -> A u with constants computed by linear_constants().
inline NonlinearOperator linear_operator(const GramSpace &space, const Mat &A) {
  if (A.rows() != space.dim() || A.cols() != space.dim())
    throw DataError("linear operator shape does not match space");
  auto [m, L] = linear_constants(space, A);
  return {space, [A](const Vec &u) -> Vec { return A * u; }, m, L};
}

/// Linear operator with caller-supplied constants (sparse, any size).
inline NonlinearOperator linear_operator(const GramSpace &space, SpMat A,
                                         double m, double L) {
  if (A.rows() != space.dim() || A.cols() != space.dim())
    throw DataError("linear operator shape does not match space");
  return {space, [A = std::move(A)](const Vec &u) -> Vec { return A * u; }, m,
          L};
}

struct ConstantEstimate {
  double m_est;
  double L_est;
};

/// Sampled witness of strong monotonicity and Lipschitz continuity over the
/// ball of the given radius. Deterministic in `seed`.
inline ConstantEstimate estimate_constants(const NonlinearOperator &A,
                                           int n_samples, double radius,
                                           std::uint64_t seed) {
  if (n_samples < 2)
    throw DataError("estimate_constants needs at least 2 samples");
  const GramSpace &V = A.domain;
  const Index n = V.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  auto sample = [&] {
    Vec d(n);
    for (Index i = 0; i < n; ++i)
      d[i] = gauss(rng);
    Vector dv{V, d};
    const double r = radius * std::pow(unif(rng), 1.0 / double(n));
    return Vector{V, d * (r / std::max(dv.norm(), 1e-300))};
  };
  double m_est = std::numeric_limits<double>::infinity();
  double L_est = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    Vector a = sample();
    Vector b = sample();
    Vector diff = a - b;
    const double dn = diff.norm();
    if (dn < 1e-12 * std::max(1.0, radius))
      continue;
    DualVector dA = A.apply(a) - A.apply(b);
    m_est = std::min(m_est, pair(dA, diff) / (dn * dn));
    L_est = std::max(L_est, dA.norm() / dn);
  }
  if (!std::isfinite(m_est))
    m_est = L_est = 0.0;
  return {std::min(m_est, L_est), L_est};
}

} // namespace qvhi
