// model.hpp — physical parameters, effective couplings, Hamiltonian builders

#pragma once

#include <array>
#include <string>
#include <vector>

#include "ccgate/hilbert.hpp"
#include "ccgate/types.hpp"

namespace ccgate::model {

using hilbert::ComplexOperator;
using hilbert::SpaceLayout;

/// Physical configuration of the two driven dots in their coupled cavities.
/// All energies in meV. The cavity detuning of dot j is not independent:
/// it equals detuning_j + cavity_offset with one shared offset.
struct SystemParams {
  double g_a = 0.1;            // QD-cavity coupling, dot A
  double g_b = 0.08;           // QD-cavity coupling, dot B
  Complex rabi_a = 1.0;        // laser Rabi frequency Omega_A
  Complex rabi_b = 1.25;       // Omega_B
  Complex rabi_prime_a = 1.0;  // second-laser Rabi frequency Omega'_A
  Complex rabi_prime_b = 1.25;
  double detuning_a = 10.0;    // laser detuning Delta_A
  double detuning_b = 10.0;
  double detuning_prime_a = 10.0;  // Delta'_A
  double detuning_prime_b = 10.0;
  double cavity_offset = 1.0;  // delta: cavity minus laser detuning offset
  double hopping = 0.5;        // nu: photon tunneling rate between the cavities
  double gamma_a = 0.0;        // cavity photon decay rate, cavity A
  double gamma_b = 0.0;
  int n_max = 4;               // Fock cutoff per delocalized mode

  /// Mode splittings of the delocalized cavity modes: {delta+nu, delta-nu}.
  std::array<double, 2> mode_detunings() const {
    return {cavity_offset + hopping, cavity_offset - hopping};
  }
  SpaceLayout layout(int qd_levels = 3) const { return SpaceLayout{qd_levels, n_max}; }
};

/// Soft validity report for the adiabatic-elimination regime. Each condition
/// reports pass/fail; nothing is rejected so regime breakdown can be probed.
struct ValidityReport {
  bool stark_cancellation;  // Delta_j == Delta'_j and |Omega_j| == |Omega'_j|
  bool large_detuning;      // |Delta_j| >= detuning_ratio * max(|g_j|, |Omega_j|)
  bool drive_dominates;     // |Omega_j| >= drive_ratio * |g_j|
  std::vector<std::string> notes;
  bool all() const { return stark_cancellation && large_detuning && drive_dominates; }
};

ValidityReport check_validity(const SystemParams& p, double detuning_ratio = 10.0,
                              double drive_ratio = 5.0);

/// Effective cavity-drive couplings produced by virtual dot excitation.
/// Mode index 0 is the splitting delta+nu, index 1 is delta-nu.
struct EffectiveCouplings {
  std::array<Complex, 2> lambda_a;  // drive-through-A coupling per mode (meV)
  std::array<Complex, 2> lambda_b;
  std::array<double, 2> eta;        // mode detunings (meV), nonzero

  Complex lambda(int dot, int mode) const { return dot == 0 ? lambda_a[mode] : lambda_b[mode]; }
  /// vartheta_m: argument of lambda_A,m * conj(lambda_B,m).
  double vartheta(int mode) const;
  /// |lambda_A,m * lambda_B,m| (meV^2).
  double pair_magnitude(int mode) const;
  /// mu_m = |lambda_A,m lambda_B,m| / eta_m (meV, signed through eta).
  double mu(int mode) const { return pair_magnitude(mode) / eta[mode]; }
  /// Relative imbalance between the two mode pair magnitudes.
  double balance_imbalance() const;
};

/// Derive the effective couplings from the physical parameters.
/// Throws PreconditionError when a mode detuning or an adiabatic-elimination
/// denominator sits on resonance.
EffectiveCouplings effective_couplings(const SystemParams& p);

/// Solve for the dot-B laser detuning that balances the two mode pair
/// magnitudes exactly, |lambda_A1 lambda_B1| = |lambda_A2 lambda_B2|,
/// holding everything else fixed. The root lies on the red side of both
/// mode resonances. Throws PreconditionError if no root is bracketed.
double solve_balanced_detuning_b(const SystemParams& p);

// ---- Hamiltonians ------------------------------------------------------------

enum class GateModel {
  full,        // interaction-picture Hamiltonian with explicit drives, 3-level dots
  effective,   // adiabatically eliminated drive of the delocalized modes
  dispersive,  // time-independent Stark-shift limit of the effective model
};

const char* gate_model_name(GateModel m);

/// One harmonic piece of a Hamiltonian: amplitude * e^{i omega t} * op + h.c.
struct HarmonicTerm {
  Complex amplitude;
  double omega_rad_ps;
  Matrix op;
};

/// A Hamiltonian as a static part plus harmonic terms. The propagators compile
/// this to sparse form; assemble() gives the dense snapshot at one time.
struct TermList {
  int dim = 0;
  Matrix static_part;  // zero-size when absent
  std::vector<HarmonicTerm> terms;

  Matrix assemble(double t_ps) const;
  double max_rate() const;  // largest |omega| (rad/ps)
};

TermList interaction_terms(const SystemParams& p, const SpaceLayout& layout);
TermList effective_terms(const EffectiveCouplings& c, const SpaceLayout& layout);
TermList dispersive_terms(const EffectiveCouplings& c, const SpaceLayout& layout);

/// Full interaction-picture Hamiltonian at time t (ps). Requires a 3-level layout.
ComplexOperator hamiltonian_interaction(const SystemParams& p, double t_ps,
                                        const SpaceLayout& layout);

/// First effective Hamiltonian at time t: driven delocalized modes gated by
/// the |g><g| projector of each dot.
ComplexOperator hamiltonian_effective_1(const EffectiveCouplings& c, double t_ps,
                                        const SpaceLayout& layout);

/// Second effective Hamiltonian: time-independent Stark shifts, diagonal in the
/// dot product basis, identity on the cavity factors. `dispersive_warning`
/// (when provided) is set if |eta_m| < ratio * max|lambda| for some mode.
ComplexOperator hamiltonian_effective_2(const EffectiveCouplings& c, const SpaceLayout& layout,
                                        bool* dispersive_warning = nullptr,
                                        double dispersive_ratio = 10.0);

// ---- dissipation ---------------------------------------------------------------

struct CollapseOp {
  ComplexOperator op;
  double rate;  // meV
};

enum class CollapseBasis {
  bare,    // physical cavity channels, written on the delocalized-mode factors
  normal,  // one channel per delocalized mode; exact iff gamma_a == gamma_b
};

/// Cavity-loss collapse operators on the layout. Zero-rate channels are dropped.
/// In the bare basis the two physical channels are exact for any rates; the
/// normal basis assigns each delocalized mode the mean rate and is equivalent
/// as a superoperator only for equal rates.
std::vector<CollapseOp> collapse_operators(const SystemParams& p, const SpaceLayout& layout,
                                           CollapseBasis basis);

}  // namespace ccgate::model
