#pragma once

// Plain-text coordinate format for sparse matrices:
//
//   rows cols nnz
//   i j value        (nnz lines, 0-indexed)

#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "qvhi/hilbert.hpp"

namespace qvhi {

inline void write_coordinate(std::ostream &os, const SpMat &m) {
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  // Row-major order regardless of storage so output is canonical.
  Eigen::SparseMatrix<double, Eigen::RowMajor> rm = m;
  for (Index r = 0; r < rm.outerSize(); ++r)
    for (decltype(rm)::InnerIterator it(rm, r); it; ++it)
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

inline SpMat read_coordinate(std::istream &is) {
  long long rows = 0, cols = 0, nnz = 0;
  if (!(is >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
    throw DataError("coordinate matrix: bad header (expected 'rows cols nnz')");
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(is >> i >> j >> v))
      throw DataError("coordinate matrix: truncated at entry " +
                      std::to_string(k));
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      throw DataError("coordinate matrix: index out of range at entry " +
                      std::to_string(k));
    t.emplace_back(Index(i), Index(j), v);
  }
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

} // namespace qvhi
