#include "ccgate/sparse.hpp"

namespace ccgate::sparse {

Csr Csr::from_dense(const Matrix& m, double drop_tol) {
  Csr s;
  s.rows = static_cast<int>(m.rows());
  s.cols = static_cast<int>(m.cols());
  s.row_ptr.reserve(s.rows + 1);
  s.row_ptr.push_back(0);
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      const Complex v = m(r, c);
      if (std::abs(v) > drop_tol) {
        s.col.push_back(c);
        s.val.push_back(v);
      }
    }
    s.row_ptr.push_back(static_cast<int>(s.col.size()));
    if (s.row_ptr[r + 1] > s.row_ptr[r]) s.active_rows.push_back(r);
  }
  return s;
}

Matrix Csr::to_dense() const {
  Matrix m = Matrix::Zero(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int i = row_ptr[r]; i < row_ptr[r + 1]; ++i) m(r, col[i]) = val[i];
  }
  return m;
}

void Csr::axpy(Complex scale, const Vector& x, Vector& out) const {
  const Complex* xp = x.data();
  Complex* op = out.data();
  for (int r : active_rows) {
    Complex acc = 0.0;
    for (int i = row_ptr[r]; i < row_ptr[r + 1]; ++i) acc += val[i] * xp[col[i]];
    op[r] += scale * acc;
  }
}

void Csr::left_apply(Complex scale, const Matrix& m, Matrix& out) const {
  const int n = static_cast<int>(m.cols());
  const Complex* base = m.data();
  Complex* obase = out.data();
  const Eigen::Index stride = m.rows();
  for (int j = 0; j < n; ++j) {
    const Complex* mj = base + j * stride;
    Complex* oj = obase + j * stride;
    for (int r : active_rows) {
      Complex acc = 0.0;
      for (int i = row_ptr[r]; i < row_ptr[r + 1]; ++i) acc += val[i] * mj[col[i]];
      oj[r] += scale * acc;
    }
  }
}

void Csr::right_apply_dagger(Complex scale, const Matrix& m, Matrix& out) const {
  // out(:, r) += scale * conj(A(r, c)) * m(:, c) for every stored entry.
  const Complex* base = m.data();
  Complex* obase = out.data();
  const Eigen::Index stride = m.rows();
  const int n = static_cast<int>(m.rows());
  for (int r : active_rows) {
    Complex* oc = obase + r * stride;
    for (int i = row_ptr[r]; i < row_ptr[r + 1]; ++i) {
      const Complex s = scale * std::conj(val[i]);
      const Complex* mc = base + col[i] * stride;
      for (int k = 0; k < n; ++k) oc[k] += s * mc[k];
    }
  }
}

}  // namespace ccgate::sparse
