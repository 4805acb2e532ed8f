// sparse.hpp — minimal CSR kernels for the propagators

#pragma once

#include <vector>

#include "ccgate/types.hpp"

namespace ccgate::sparse {

/// Compressed-sparse-row view of a dense complex matrix. The propagators
/// compile every Hamiltonian term and collapse operator to this form once;
/// the public API stays dense.
struct Csr {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<Complex> val;
  std::vector<int> active_rows;  // rows holding at least one entry

  static Csr from_dense(const Matrix& m, double drop_tol = 0.0);
  Matrix to_dense() const;
  int nnz() const { return static_cast<int>(val.size()); }

  /// out += scale * A * x
  void axpy(Complex scale, const Vector& x, Vector& out) const;
  /// out += scale * A * M   (column-major friendly: inner loop runs down columns)
  void left_apply(Complex scale, const Matrix& m, Matrix& out) const;
  /// out += scale * M * A^dagger
  void right_apply_dagger(Complex scale, const Matrix& m, Matrix& out) const;
};

}  // namespace ccgate::sparse
