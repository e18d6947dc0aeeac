#pragma once

#include <chrono>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qvhi/fem.hpp"
#include "qvhi/matrix_io.hpp"
#include "qvhi/solver.hpp"
#include "qvhi/vi.hpp"

namespace qvhi::csv {

/// First line of every CSV file; the only line allowed to differ between runs.
inline std::string timestamp_line() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << "# generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Fixed 17-significant-digit formatting so repeated runs are byte-identical.
inline std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

class Writer {
public:
  Writer(std::ostream &os, const std::vector<std::string> &columns, bool with_timestamp = true)
      : os_(os), ncol_(columns.size()) {
    if (with_timestamp)
      os_ << timestamp_line() << '\n';
    row_strings(columns);
  }

  template <class... Ts> void row(const Ts &...xs) {
    std::vector<std::string> cells{cell(xs)...};
    row_strings(cells);
  }

  void row_strings(const std::vector<std::string> &cells) {
    if (cells.size() != ncol_)
      throw DataError("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(ncol_));
    for (std::size_t i = 0; i < cells.size(); ++i)
      os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

private:
  static std::string cell(double x) { return num(x); }
  static std::string cell(int x) { return std::to_string(x); }
  static std::string cell(long x) { return std::to_string(x); }
  static std::string cell(long long x) { return std::to_string(x); }
  static std::string cell(std::size_t x) { return std::to_string(x); }
  static std::string cell(bool x) { return x ? "1" : "0"; }
  static std::string cell(const std::string &s) { return s; }
  static std::string cell(const char *s) { return s; }

  std::ostream &os_;
  std::size_t ncol_;
};

inline void write_history(std::ostream &os, const QVHISolution &s, bool with_timestamp = true) {
  Writer w(os, {"iteration", "outer_residual", "v_norm", "w_norm", "feasibility"}, with_timestamp);
  for (const auto &r : s.history)
    w.row(r.iteration, r.outer_residual, r.v_norm, r.w_norm, r.feasibility);
}

inline void write_perturbation(std::ostream &os, const PerturbationResult &res,
                               bool with_timestamp = true) {
  Writer w(os, {"n", "error", "iterations", "residual"}, with_timestamp);
  for (const auto &r : res.rows)
    w.row(r.n, r.error, r.iterations, r.residual);
}

/// x,y,value per mesh node; Dirichlet nodes carry zero.
inline void write_nodal(std::ostream &os, const FEMSpace &S, const Vector &u,
                        bool with_timestamp = true) {
  const Vec full = S.extend(u.coords);
  Writer w(os, {"x", "y", "value"}, with_timestamp);
  for (Index i = 0; i < S.mesh.n_nodes(); ++i) {
    const auto &p = S.mesh.nodes[std::size_t(i)];
    w.row(p.x(), p.y(), full[i]);
  }
}

/// Mesh as two coordinate-format matrices: node coordinates (n_nodes x 2),
/// then cell connectivity (n_cells x 3, vertex indices stored as doubles).
inline void write_mesh(std::ostream &os, const Mesh &mesh) {
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < mesh.n_nodes(); ++i)
    for (int d = 0; d < 2; ++d)
      t.emplace_back(i, d, mesh.nodes[std::size_t(i)][d]);
  SpMat nodes(mesh.n_nodes(), 2);
  nodes.setFromTriplets(t.begin(), t.end());
  nodes.prune(0.0);
  write_coordinate(os, nodes);
  t.clear();
  for (std::size_t e = 0; e < mesh.cells.size(); ++e)
    for (int k = 0; k < 3; ++k)
      t.emplace_back(Index(e), k, double(mesh.cells[e][std::size_t(k)]));
  SpMat cells(Index(mesh.cells.size()), 3);
  cells.setFromTriplets(t.begin(), t.end());
  cells.prune(0.0);
  write_coordinate(os, cells);
}

} // namespace qvhi::csv
