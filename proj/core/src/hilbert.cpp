#include "ccgate/hilbert.hpp"

#include <cmath>
#include <stdexcept>

#include "ccgate/errors.hpp"

namespace ccgate::hilbert {

ComplexOperator::ComplexOperator(Matrix m) : mat_(std::move(m)) {
  if (mat_.rows() != mat_.cols()) {
    throw std::invalid_argument("ComplexOperator requires a square matrix");
  }
}

ComplexOperator ComplexOperator::zero(int dim) { return ComplexOperator(Matrix::Zero(dim, dim)); }

ComplexOperator ComplexOperator::identity(int dim) {
  return ComplexOperator(Matrix::Identity(dim, dim));
}

bool ComplexOperator::is_hermitian(double tol) const {
  return (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

bool ComplexOperator::is_unitary(double tol) const {
  Matrix prod = mat_.adjoint() * mat_;
  return (prod - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff() <= tol;
}

ComplexOperator& ComplexOperator::operator+=(const ComplexOperator& o) {
  if (o.dim() != dim()) throw std::invalid_argument("operator dimension mismatch");
  mat_ += o.mat_;
  return *this;
}

ComplexOperator& ComplexOperator::operator-=(const ComplexOperator& o) {
  if (o.dim() != dim()) throw std::invalid_argument("operator dimension mismatch");
  mat_ -= o.mat_;
  return *this;
}

ComplexOperator operator*(const ComplexOperator& a, const ComplexOperator& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("operator dimension mismatch");
  return ComplexOperator(a.mat_ * b.mat_);
}

int SpaceLayout::site_dim(int site) const {
  switch (site) {
    case kSiteQdA:
    case kSiteQdB:
      return qd_levels;
    case kSiteMode1:
    case kSiteMode2:
      return n_max + 1;
    default:
      throw std::invalid_argument("site index out of range");
  }
}

int SpaceLayout::dim() const { return qd_levels * qd_levels * (n_max + 1) * (n_max + 1); }

int SpaceLayout::index(int a_level, int b_level, int n1, int n2) const {
  const int fock = n_max + 1;
  if (a_level < 0 || a_level >= qd_levels || b_level < 0 || b_level >= qd_levels || n1 < 0 ||
      n1 >= fock || n2 < 0 || n2 >= fock) {
    throw std::invalid_argument("basis labels out of range for layout");
  }
  return ((a_level * qd_levels + b_level) * fock + n1) * fock + n2;
}

StateVector StateVector::normalized() const {
  StateVector out{v};
  const double n = out.v.norm();
  if (n > 0) out.v /= n;
  return out;
}

double DensityMatrix::hermiticity_drift() const {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::min_eigenvalue() const {
  Matrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

DensityMatrix DensityMatrix::from_pure(const StateVector& psi) {
  return DensityMatrix{psi.v * psi.v.adjoint()};
}

DensityCheck check_density(const DensityMatrix& rho) {
  return DensityCheck{std::abs(rho.trace_real() - 1.0), rho.hermiticity_drift(),
                      rho.min_eigenvalue()};
}

ComplexOperator fock_annihilation(int n_max) {
  if (n_max < 1) throw std::invalid_argument("fock_annihilation requires n_max >= 1");
  Matrix a = Matrix::Zero(n_max + 1, n_max + 1);
  for (int k = 1; k <= n_max; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return ComplexOperator(std::move(a));
}

ComplexOperator fock_number(int n_max) {
  if (n_max < 1) throw std::invalid_argument("fock_number requires n_max >= 1");
  Matrix n = Matrix::Zero(n_max + 1, n_max + 1);
  for (int k = 0; k <= n_max; ++k) n(k, k) = static_cast<double>(k);
  return ComplexOperator(std::move(n));
}

ComplexOperator qd_sigma_plus(int qd_levels) {
  if (qd_levels < 3) {
    throw std::invalid_argument("qd_sigma_plus needs the excited level (qd_levels >= 3)");
  }
  Matrix s = Matrix::Zero(qd_levels, qd_levels);
  s(SpaceLayout::kLevelE, SpaceLayout::kLevelG) = 1.0;  // |e><g|; |f> untouched
  return ComplexOperator(std::move(s));
}

ComplexOperator qd_projector(int level, int qd_levels) {
  if (level < 0 || level >= qd_levels) throw std::invalid_argument("projector level out of range");
  Matrix p = Matrix::Zero(qd_levels, qd_levels);
  p(level, level) = 1.0;
  return ComplexOperator(std::move(p));
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

ComplexOperator embed(const ComplexOperator& op, int site, const SpaceLayout& layout) {
  if (site < 0 || site >= SpaceLayout::kNumSites) {
    throw std::invalid_argument("embed: site index out of range");
  }
  if (op.dim() != layout.site_dim(site)) {
    throw std::invalid_argument("embed: operator dimension does not match the site");
  }
  Matrix acc = Matrix::Identity(1, 1);
  for (int s = 0; s < SpaceLayout::kNumSites; ++s) {
    const int d = layout.site_dim(s);
    acc = (s == site) ? kron(acc, op.matrix()) : kron(acc, Matrix::Identity(d, d));
  }
  return ComplexOperator(std::move(acc));
}

StateVector coherent_state(Complex alpha, int n_max, CoherentInfo* info) {
  Vector v(n_max + 1);
  // c_n = e^{-|a|^2/2} a^n / sqrt(n!), built recursively.
  Complex c = std::exp(-0.5 * std::norm(alpha));
  v(0) = c;
  for (int n = 1; n <= n_max; ++n) {
    c *= alpha / std::sqrt(static_cast<double>(n));
    v(n) = c;
  }
  const double mass = v.squaredNorm();
  if (info) {
    info->untruncated_mass = mass;
    info->truncation_risky = std::norm(alpha) > 0.25 * n_max;
  }
  StateVector out{std::move(v)};
  return out.normalized();
}

StateVector basis_state(const SpaceLayout& layout, int a_level, int b_level, int n1, int n2) {
  Vector v = Vector::Zero(layout.dim());
  v(layout.index(a_level, b_level, n1, n2)) = 1.0;
  return StateVector{std::move(v)};
}

double fidelity_trace(const DensityMatrix& rho, const DensityMatrix& rho_prime) {
  if (rho.dim() != rho_prime.dim()) {
    throw std::invalid_argument("fidelity_trace: dimension mismatch");
  }
  // Tr(rho rho') = sum_ij rho_ij rho'_ji without forming the product.
  const Complex tr = rho.rho.cwiseProduct(rho_prime.rho.transpose()).sum();
  if (std::abs(tr.imag()) > 1e-10) {
    throw PreconditionError("fidelity_trace: imaginary residue above 1e-10 (" +
                            std::to_string(tr.imag()) + ")");
  }
  return tr.real();
}

double fidelity_against_pure(const DensityMatrix& rho, const StateVector& psi) {
  if (rho.dim() != psi.dim()) {
    throw std::invalid_argument("fidelity_against_pure: dimension mismatch");
  }
  const Complex val = psi.v.adjoint() * (rho.rho * psi.v);
  return val.real();
}

double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) throw std::invalid_argument("trace_distance: dimension mismatch");
  Matrix diff = rho.rho - sigma.rho;
  diff = Complex(0.5) * (diff + diff.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace ccgate::hilbert
