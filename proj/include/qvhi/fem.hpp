#pragma once

// P1 finite elements on the unit interval and the unit square.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qvhi/hilbert.hpp"

namespace qvhi {

/// Boundary part tags. For the interior model 1 = Dirichlet part, 2 = the
/// part carrying the convex boundary potential; for the boundary model
/// 1 = Dirichlet, 2 = nonmonotone part, 3 = unilateral part.
enum class BoundaryPart : int { None = 0, P1 = 1, P2 = 2, P3 = 3 };

struct BoundaryEdge {
  Index a;
  Index b; ///< equals a in 1D (a boundary point)
  BoundaryPart part;
};

struct Mesh {
  int dim = 1;
  int n_cells = 0;                       ///< cells per side
  std::vector<Eigen::Vector2d> nodes;    ///< y = 0 in 1D
  std::vector<std::array<Index, 3>> cells; ///< third entry unused in 1D
  std::vector<BoundaryEdge> boundary;

  Index n_nodes() const { return Index(nodes.size()); }

  double cell_measure(std::size_t c) const {
    const auto &t = cells[c];
    if (dim == 1)
      return nodes[std::size_t(t[1])].x() - nodes[std::size_t(t[0])].x();
    const Eigen::Vector2d e1 = nodes[std::size_t(t[1])] - nodes[std::size_t(t[0])];
    const Eigen::Vector2d e2 = nodes[std::size_t(t[2])] - nodes[std::size_t(t[0])];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }

  Eigen::Vector2d centroid(std::size_t c) const {
    const auto &t = cells[c];
    if (dim == 1)
      return 0.5 * (nodes[std::size_t(t[0])] + nodes[std::size_t(t[1])]);
    return (nodes[std::size_t(t[0])] + nodes[std::size_t(t[1])] + nodes[std::size_t(t[2])]) / 3.0;
  }

  /// Nodes touching a boundary edge with the given tag.
  std::vector<Index> part_nodes(BoundaryPart p) const {
    std::vector<char> mark(nodes.size(), 0);
    for (const auto &e : boundary)
      if (e.part == p)
        mark[std::size_t(e.a)] = mark[std::size_t(e.b)] = 1;
    std::vector<Index> out;
    for (std::size_t i = 0; i < mark.size(); ++i)
      if (mark[i])
        out.push_back(Index(i));
    return out;
  }
};

/// Presets: "dirichlet-all"; "interior-model" (2D: part 1 = left and right,
/// part 2 = top and bottom; 1D: part 1 = left end, part 2 = right end);
/// "boundary-model" (2D only: part 1 = bottom, part 2 = top and left,
/// part 3 = right).
inline Mesh build_mesh(int dim, int n_cells, const std::string &boundary_preset) {
  if (dim != 1 && dim != 2)
    throw DataError("build_mesh: dim must be 1 or 2");
  if (n_cells < 2)
    throw DataError("build_mesh: need at least 2 cells per side");
  using BP = BoundaryPart;
  Mesh m;
  m.dim = dim;
  m.n_cells = n_cells;
  const int n = n_cells;
  const double h = 1.0 / n;
  if (dim == 1) {
    for (int i = 0; i <= n; ++i)
      m.nodes.emplace_back(i * h, 0.0);
    for (int i = 0; i < n; ++i)
      m.cells.push_back({Index(i), Index(i + 1), Index(-1)});
    BP left, right;
    if (boundary_preset == "dirichlet-all") {
      left = right = BP::P1;
    } else if (boundary_preset == "interior-model") {
      left = BP::P1;
      right = BP::P2;
    } else if (boundary_preset == "boundary-model") {
      throw DataError("build_mesh: the boundary model needs three boundary parts (2D only)");
    } else {
      throw DataError("build_mesh: unknown boundary preset '" + boundary_preset + "'");
    }
    m.boundary.push_back({0, 0, left});
    m.boundary.push_back({Index(n), Index(n), right});
    return m;
  }

  auto id = [n](int i, int j) { return Index(j * (n + 1) + i); };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.nodes.emplace_back(i * h, j * h);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      m.cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  BP bottom, top, left, right;
  if (boundary_preset == "dirichlet-all") {
    bottom = top = left = right = BP::P1;
  } else if (boundary_preset == "interior-model") {
    left = right = BP::P1;
    top = bottom = BP::P2;
  } else if (boundary_preset == "boundary-model") {
    bottom = BP::P1;
    top = left = BP::P2;
    right = BP::P3;
  } else {
    throw DataError("build_mesh: unknown boundary preset '" + boundary_preset + "'");
  }
  for (int i = 0; i < n; ++i) {
    m.boundary.push_back({id(i, 0), id(i + 1, 0), bottom});
    m.boundary.push_back({id(i, n), id(i + 1, n), top});
  }
  for (int j = 0; j < n; ++j) {
    m.boundary.push_back({id(0, j), id(0, j + 1), left});
    m.boundary.push_back({id(n, j), id(n, j + 1), right});
  }
  return m;
}

namespace detail {

/// Constant gradients of the P1 basis functions on a cell (rows = local nodes).
inline Eigen::Matrix<double, 3, 2> p1_gradients(const Mesh &m, std::size_t c) {
  Eigen::Matrix<double, 3, 2> g = Eigen::Matrix<double, 3, 2>::Zero();
  const auto &t = m.cells[c];
  if (m.dim == 1) {
    const double h = m.cell_measure(c);
    g(0, 0) = -1.0 / h;
    g(1, 0) = 1.0 / h;
    return g;
  }
  const Eigen::Vector2d p0 = m.nodes[std::size_t(t[0])], p1 = m.nodes[std::size_t(t[1])],
                        p2 = m.nodes[std::size_t(t[2])];
  Eigen::Matrix2d J;
  J.col(0) = p1 - p0;
  J.col(1) = p2 - p0;
  const Eigen::Matrix2d JinvT = J.inverse().transpose();
  const Eigen::Vector2d r1 = JinvT * Eigen::Vector2d(1, 0), r2 = JinvT * Eigen::Vector2d(0, 1);
  g.row(1) = r1.transpose();
  g.row(2) = r2.transpose();
  g.row(0) = -(r1 + r2).transpose();
  return g;
}

inline int local_count(const Mesh &m) { return m.dim == 1 ? 2 : 3; }

} // namespace detail

/// V = P1 functions vanishing on part 1 with ||v||_V = ||grad v||_{L2};
/// X_domain = nodal L2 with lumped mass on all nodes; X_boundary = nodal
/// L2 on part-2 boundary nodes with lumped boundary mass.
struct FEMSpace {
  Mesh mesh;
  std::vector<Index> free_nodes;
  std::vector<Index> free_index; ///< node -> position in free_nodes, or -1
  SpMat stiffness_full;
  GramSpace V;
  Vec lumped_mass;
  GramSpace X_domain;
  std::vector<Index> part2_nodes;
  Vec boundary_mass; ///< aligned with part2_nodes
  std::optional<GramSpace> X_boundary;

  Index n_free() const { return Index(free_nodes.size()); }

  /// Zero-extends free-node coefficients to all nodes.
  Vec extend(const Vec &free) const {
    Vec full = Vec::Zero(mesh.n_nodes());
    for (Index k = 0; k < n_free(); ++k)
      full[free_nodes[std::size_t(k)]] = free[k];
    return full;
  }

  /// Nodal interpolant of a function on the free nodes.
  Vec interpolate(const std::function<double(double, double)> &fn) const {
    Vec v(n_free());
    for (Index k = 0; k < n_free(); ++k) {
      const auto &p = mesh.nodes[std::size_t(free_nodes[std::size_t(k)])];
      v[k] = fn(p.x(), p.y());
    }
    return v;
  }
};

inline SpMat assemble_weighted_stiffness(const Mesh &m,
                                         const std::function<double(double, double)> &c) {
  const int nl = detail::local_count(m);
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t e = 0; e < m.cells.size(); ++e) {
    const auto g = detail::p1_gradients(m, e);
    const auto xc = m.centroid(e);
    const double w = m.cell_measure(e) * c(xc.x(), xc.y());
    for (int a = 0; a < nl; ++a)
      for (int b = 0; b < nl; ++b)
        t.emplace_back(m.cells[e][std::size_t(a)], m.cells[e][std::size_t(b)],
                       w * g.row(a).dot(g.row(b)));
  }
  SpMat K(m.n_nodes(), m.n_nodes());
  K.setFromTriplets(t.begin(), t.end());
  return K;
}

inline Vec assemble_lumped_mass(const Mesh &m) {
  const int nl = detail::local_count(m);
  Vec mass = Vec::Zero(m.n_nodes());
  for (std::size_t e = 0; e < m.cells.size(); ++e)
    for (int a = 0; a < nl; ++a)
      mass[m.cells[e][std::size_t(a)]] += m.cell_measure(e) / nl;
  return mass;
}

/// Restriction of a full matrix to the free rows and columns.
inline SpMat restrict_free(const SpMat &full, const std::vector<Index> &free_index,
                           Index n_free) {
  std::vector<Eigen::Triplet<double>> t;
  for (Index k = 0; k < full.outerSize(); ++k)
    for (SpMat::InnerIterator it(full, k); it; ++it) {
      const Index r = free_index[std::size_t(it.row())], c = free_index[std::size_t(it.col())];
      if (r >= 0 && c >= 0)
        t.emplace_back(r, c, it.value());
    }
  SpMat out(n_free, n_free);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

inline FEMSpace build_fem_space(const Mesh &mesh) {
  const std::vector<Index> dirichlet = mesh.part_nodes(BoundaryPart::P1);
  if (dirichlet.empty())
    throw DataError("build_fem_space: the Dirichlet part must be nonempty");
  std::vector<Index> free_index(std::size_t(mesh.n_nodes()), 0);
  for (Index d : dirichlet)
    free_index[std::size_t(d)] = -1;
  std::vector<Index> free_nodes;
  for (Index i = 0; i < mesh.n_nodes(); ++i)
    if (free_index[std::size_t(i)] >= 0) {
      free_index[std::size_t(i)] = Index(free_nodes.size());
      free_nodes.push_back(i);
    }
  if (free_nodes.empty())
    throw DataError("build_fem_space: no free nodes");
  SpMat Kfull = assemble_weighted_stiffness(mesh, [](double, double) { return 1.0; });
  GramSpace V(restrict_free(Kfull, free_index, Index(free_nodes.size())), "V");
  Vec mass = assemble_lumped_mass(mesh);
  GramSpace Xd = GramSpace::diagonal(mass, "X");

  std::vector<Index> p2 = mesh.part_nodes(BoundaryPart::P2);
  Vec bmass = Vec::Zero(Index(p2.size()));
  std::optional<GramSpace> Xb;
  if (!p2.empty()) {
    std::map<Index, Index> pos;
    for (std::size_t k = 0; k < p2.size(); ++k)
      pos[p2[k]] = Index(k);
    for (const auto &e : mesh.boundary)
      if (e.part == BoundaryPart::P2) {
        const double len = mesh.dim == 1 ? 1.0 : (mesh.nodes[std::size_t(e.a)] -
                                                  mesh.nodes[std::size_t(e.b)]).norm();
        bmass[pos[e.a]] += 0.5 * len;
        bmass[pos[e.b]] += 0.5 * len;
      }
    Xb = GramSpace::diagonal(bmass, "X_boundary");
  }
  return FEMSpace{mesh, std::move(free_nodes), std::move(free_index), std::move(Kfull),
                  std::move(V), std::move(mass), std::move(Xd), std::move(p2),
                  std::move(bmass), std::move(Xb)};
}

/// Embedding V -> X_domain: free nodes into the full nodal vector.
inline LinearMap assemble_embedding(const FEMSpace &S) {
  std::vector<Eigen::Triplet<double>> t;
  for (Index k = 0; k < S.n_free(); ++k)
    t.emplace_back(S.free_nodes[std::size_t(k)], k, 1.0);
  SpMat m(S.mesh.n_nodes(), S.n_free());
  m.setFromTriplets(t.begin(), t.end());
  return LinearMap(std::move(m), S.V, S.X_domain);
}

/// Trace V -> X_boundary: values at the part-2 boundary nodes.
inline LinearMap assemble_trace(const FEMSpace &S) {
  if (!S.X_boundary)
    throw DataError("assemble_trace: the boundary part carrying the trace is empty");
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t k = 0; k < S.part2_nodes.size(); ++k) {
    const Index f = S.free_index[std::size_t(S.part2_nodes[k])];
    if (f >= 0)
      t.emplace_back(Index(k), f, 1.0);
  }
  SpMat m(Index(S.part2_nodes.size()), S.n_free());
  m.setFromTriplets(t.begin(), t.end());
  return LinearMap(std::move(m), S.V, *S.X_boundary);
}

/// Cellwise gradients of a free-node vector: D (rows: dim per cell).
inline SpMat assemble_gradient(const FEMSpace &S) {
  const Mesh &m = S.mesh;
  const int nl = detail::local_count(m);
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t e = 0; e < m.cells.size(); ++e) {
    const auto g = detail::p1_gradients(m, e);
    for (int a = 0; a < nl; ++a) {
      const Index f = S.free_index[std::size_t(m.cells[e][std::size_t(a)])];
      if (f < 0)
        continue;
      for (int d = 0; d < m.dim; ++d)
        t.emplace_back(Index(e) * m.dim + d, f, g(a, d));
    }
  }
  SpMat D(Index(m.cells.size()) * m.dim, S.n_free());
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

/// Lumped load: f_i = mass_i * g(x_i) on free nodes.
inline Vec lumped_load(const FEMSpace &S, const std::function<double(double, double)> &g) {
  Vec f(S.n_free());
  for (Index k = 0; k < S.n_free(); ++k) {
    const Index node = S.free_nodes[std::size_t(k)];
    const auto &p = S.mesh.nodes[std::size_t(node)];
    f[k] = S.lumped_mass[node] * g(p.x(), p.y());
  }
  return f;
}

struct ErrorNorms {
  double h1; ///< ||grad(u_h - u)||_{L2}
  double l2; ///< ||u_h - u||_{L2}
};

/// Errors of a free-node solution against an exact solution, by 3-point
/// Gauss (1D) or 6-point degree-4 (triangles) quadrature.
inline ErrorNorms error_norms(const FEMSpace &S, const Vec &u_free,
                              const std::function<double(double, double)> &u,
                              const std::function<Eigen::Vector2d(double, double)> &grad) {
  const Mesh &m = S.mesh;
  const Vec uh = S.extend(u_free);
  double e1 = 0.0, e0 = 0.0;
  // Barycentric points and weights (weights sum to 1).
  std::vector<std::array<double, 3>> bary;
  std::vector<double> wts;
  if (m.dim == 1) {
    const double s = std::sqrt(0.6);
    for (double x : {-s, 0.0, s})
      bary.push_back({0.5 * (1 - x), 0.5 * (1 + x), 0.0});
    wts = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  } else {
    const double a1 = 0.445948490915965, b1 = 0.108103018168070, w1 = 0.223381589678011;
    const double a2 = 0.091576213509771, b2 = 0.816847572980459, w2 = 0.109951743655322;
    bary = {{a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1}, {a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}};
    wts = {w1, w1, w1, w2, w2, w2};
  }
  const int nl = detail::local_count(m);
  for (std::size_t e = 0; e < m.cells.size(); ++e) {
    const auto g = detail::p1_gradients(m, e);
    const auto &t = m.cells[e];
    Eigen::Vector2d gh = Eigen::Vector2d::Zero();
    for (int a = 0; a < nl; ++a)
      gh += uh[t[std::size_t(a)]] * g.row(a).transpose();
    const double meas = m.cell_measure(e);
    for (std::size_t q = 0; q < wts.size(); ++q) {
      Eigen::Vector2d x = Eigen::Vector2d::Zero();
      double val = 0.0;
      for (int a = 0; a < nl; ++a) {
        x += bary[q][std::size_t(a)] * m.nodes[std::size_t(t[std::size_t(a)])];
        val += bary[q][std::size_t(a)] * uh[t[std::size_t(a)]];
      }
      Eigen::Vector2d dg = gh - grad(x.x(), x.y());
      if (m.dim == 1)
        dg.y() = 0.0;
      e1 += wts[q] * meas * dg.squaredNorm();
      e0 += wts[q] * meas * std::pow(val - u(x.x(), x.y()), 2);
    }
  }
  return {std::sqrt(e1), std::sqrt(e0)};
}

struct ConvergenceRow {
  int n;
  double h;
  double h1;
  double l2;
  double h1_ratio; ///< previous h1 / this h1, 0 on the first row
  double l2_ratio;
};

/// Poisson on a Dirichlet-everywhere mesh with exact solution sin(pi x)
/// (1D) or sin(pi x) sin(pi y) (2D), lumped load.
inline std::vector<ConvergenceRow> manufactured_study(int dim, const std::vector<int> &sizes) {
  const double pi = std::acos(-1.0);
  auto exact = [dim, pi](double x, double y) {
    return dim == 1 ? std::sin(pi * x) : std::sin(pi * x) * std::sin(pi * y);
  };
  auto source = [dim, pi, exact](double x, double y) { return dim * pi * pi * exact(x, y); };
  auto grad = [dim, pi](double x, double y) -> Eigen::Vector2d {
    if (dim == 1)
      return {pi * std::cos(pi * x), 0.0};
    return {pi * std::cos(pi * x) * std::sin(pi * y), pi * std::sin(pi * x) * std::cos(pi * y)};
  };
  std::vector<ConvergenceRow> rows;
  for (int n : sizes) {
    const FEMSpace S = build_fem_space(build_mesh(dim, n, "dirichlet-all"));
    Eigen::SimplicialLLT<SpMat> llt(S.V.gram());
    if (llt.info() != Eigen::Success)
      throw DataError("manufactured_study: stiffness is not positive definite");
    const Vec u = llt.solve(lumped_load(S, source));
    const ErrorNorms e = error_norms(S, u, exact, grad);
    ConvergenceRow r{n, 1.0 / n, e.h1, e.l2, 0.0, 0.0};
    if (!rows.empty()) {
      r.h1_ratio = rows.back().h1 / e.h1;
      r.l2_ratio = rows.back().l2 / e.l2;
    }
    rows.push_back(r);
  }
  return rows;
}

} // namespace qvhi
