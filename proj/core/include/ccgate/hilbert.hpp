// hilbert.hpp — operator algebra on truncated tensor-product Hilbert spaces

#pragma once

#include <optional>
#include <vector>

#include "ccgate/types.hpp"

namespace ccgate::hilbert {

/// Dense complex operator with dimension metadata. Entries are dimensionless;
/// energy scales are carried separately (meV) by the model layer.
class ComplexOperator {
 public:
  ComplexOperator() = default;
  explicit ComplexOperator(Matrix m);
  static ComplexOperator zero(int dim);
  static ComplexOperator identity(int dim);

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Matrix& matrix() const { return mat_; }
  Matrix& matrix() { return mat_; }

  ComplexOperator dagger() const { return ComplexOperator(mat_.adjoint()); }

  // Hermiticity / unitarity are checkable predicates, never assumptions.
  bool is_hermitian(double tol = 1e-8) const;
  bool is_unitary(double tol = 1e-8) const;

  ComplexOperator& operator+=(const ComplexOperator& o);
  ComplexOperator& operator-=(const ComplexOperator& o);
  friend ComplexOperator operator+(ComplexOperator a, const ComplexOperator& b) { return a += b; }
  friend ComplexOperator operator-(ComplexOperator a, const ComplexOperator& b) { return a -= b; }
  friend ComplexOperator operator*(const ComplexOperator& a, const ComplexOperator& b);
  friend ComplexOperator operator*(Complex s, const ComplexOperator& a) {
    return ComplexOperator(s * a.mat_);
  }

 private:
  Matrix mat_;
};

/// Layout of the simulation space: two quantum dots followed by the two
/// delocalized cavity modes, site order QD_A ⊗ QD_B ⊗ mode1 ⊗ mode2.
///
/// Dot levels are ordered |f>, |g>, |e>. The default keeps all three levels;
/// qd_levels = 2 drops |e> for Hamiltonians that never populate it.
/// The sigma^- -coupled fourth dot level is never driven and is not modeled.
struct SpaceLayout {
  int qd_levels = 3;
  int n_max = 4;  // Fock cutoff per bosonic mode

  static constexpr int kSiteQdA = 0;
  static constexpr int kSiteQdB = 1;
  static constexpr int kSiteMode1 = 2;
  static constexpr int kSiteMode2 = 3;
  static constexpr int kNumSites = 4;

  static constexpr int kLevelF = 0;
  static constexpr int kLevelG = 1;
  static constexpr int kLevelE = 2;

  int site_dim(int site) const;
  int dim() const;  // qd_levels^2 * (n_max+1)^2
  bool has_excited_level() const { return qd_levels >= 3; }

  /// Flat basis index of |a_level, b_level> ⊗ |n1, n2>.
  int index(int a_level, int b_level, int n1, int n2) const;
};

/// Normalized pure state with dimension bookkeeping.
struct StateVector {
  Vector v;
  int dim() const { return static_cast<int>(v.size()); }
  double norm() const { return v.norm(); }
  StateVector normalized() const;
};

/// Density matrix plus the physicality diagnostics the integrators track.
struct DensityMatrix {
  Matrix rho;
  int dim() const { return static_cast<int>(rho.rows()); }
  double trace_real() const { return rho.trace().real(); }
  double hermiticity_drift() const;     // max |rho - rho^dag| entry
  double min_eigenvalue() const;        // of the Hermitian part
  static DensityMatrix from_pure(const StateVector& psi);
};

struct DensityCheck {
  double trace_error;
  double hermiticity_drift;
  double min_eigenvalue;
  bool ok(double trace_tol = 1e-6, double herm_tol = 1e-8, double eig_floor = -1e-6) const {
    return trace_error <= trace_tol && hermiticity_drift <= herm_tol && min_eigenvalue >= eig_floor;
  }
};
DensityCheck check_density(const DensityMatrix& rho);

// ---- elementary operators --------------------------------------------------

/// Lowering operator on an (n_max+1)-level Fock space: a|n> = sqrt(n)|n-1>.
/// Throws std::invalid_argument for n_max < 1.
ComplexOperator fock_annihilation(int n_max);

/// Number operator a^dag a = diag(0, 1, ..., n_max).
ComplexOperator fock_number(int n_max);

/// Raising operator |e><g| on a single dot. Annihilates |f> and |e>.
ComplexOperator qd_sigma_plus(int qd_levels = 3);

/// Projector |level><level| on a single dot.
ComplexOperator qd_projector(int level, int qd_levels = 3);

/// Kronecker-embed a single-site operator into the full space, identity on all
/// other sites. Throws std::invalid_argument on a local-dimension mismatch.
ComplexOperator embed(const ComplexOperator& op, int site, const SpaceLayout& layout);

/// Kronecker product in (left ⊗ right) site order.
Matrix kron(const Matrix& a, const Matrix& b);

// ---- states ----------------------------------------------------------------

struct CoherentInfo {
  double untruncated_mass;   // norm^2 before renormalization: truncated Poisson mass
  bool truncation_risky;     // |alpha|^2 > n_max/4
};

/// Normalized truncated coherent state D(alpha)|0>. No hard error on deep
/// truncation; `info` reports the risk instead.
StateVector coherent_state(Complex alpha, int n_max, CoherentInfo* info = nullptr);

/// Basis product state |a_level, b_level> ⊗ |n1, n2> on the layout.
StateVector basis_state(const SpaceLayout& layout, int a_level, int b_level, int n1, int n2);

// ---- metrics ---------------------------------------------------------------

/// F = Re Tr(rho rho'). Throws std::invalid_argument on dimension mismatch and
/// PreconditionError if the imaginary residue exceeds 1e-10.
double fidelity_trace(const DensityMatrix& rho, const DensityMatrix& rho_prime);

/// Same overlap for a mixed state against a pure reference: <psi|rho|psi>.
double fidelity_against_pure(const DensityMatrix& rho, const StateVector& psi);

/// Trace distance (1/2)||rho - sigma||_1 of two Hermitian matrices.
double trace_distance(const DensityMatrix& rho, const DensityMatrix& sigma);

}  // namespace ccgate::hilbert
