// phases.hpp — closed-form displacement trajectories, accumulated phases,
// commensurate gate schedules and the pi-phase tuner

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "ccgate/model.hpp"
#include "ccgate/types.hpp"

namespace ccgate::phases {

using model::EffectiveCouplings;
using model::SystemParams;

/// Logical branch of the two-dot register, in the fixed order used for every
/// 4x4 gate layout. Labels follow the diagonal-block convention of the
/// effective Hamiltonian: `fg` is the block driven through dot A
/// (dot A in |g>, dot B in |f>), `gf` the block driven through dot B,
/// `gg` both, `ff` neither (exactly stationary).
enum class Branch { ff = 0, fg = 1, gf = 2, gg = 3 };

inline constexpr std::array<Branch, 4> kBranches{Branch::ff, Branch::fg, Branch::gf, Branch::gg};
inline constexpr bool dot_a_in_g(Branch b) { return b == Branch::fg || b == Branch::gg; }
inline constexpr bool dot_b_in_g(Branch b) { return b == Branch::gf || b == Branch::gg; }
const char* branch_name(Branch b);

/// Phase-space position of delocalized mode `mode` on branch `branch` at time
/// t (ps). Zero for the ff branch at all times and for every branch at the
/// commensuration times 2*pi*k*hbar/eta_m.
Complex alpha_trajectory(const EffectiveCouplings& c, Branch branch, int mode, double t_ps);

/// Closed-form accumulated phases at time t: per-mode single-branch phases and
/// the two-dot cross term theta_m. phi_gg^m = phi_fg^m + phi_gf^m + theta_m.
struct AccumulatedPhases {
  std::array<double, 2> phi_fg;  // rad per mode
  std::array<double, 2> phi_gf;
  std::array<double, 2> theta;
  double branch_total(Branch b) const;  // sum over modes for one branch
};
AccumulatedPhases accumulated_phases(const EffectiveCouplings& c, double t_ps);

/// A commensurate gate schedule: the smallest time closing both phase-space
/// loops, its integer loop counts, the per-period gate phases, and the
/// equivalent Stark-limit phase rates.
struct GateSchedule {
  double t0_ps = 0.0;   // commensuration period
  long k1 = 0, k2 = 0;  // loop counts of modes 1 and 2 within t0
  double commensuration_residual = 0.0;

  // First-model phases accumulated over one period (rad).
  double Phi_fg = 0.0, Phi_gf = 0.0, Theta = 0.0;
  // Stark-limit phase rates (rad/ps).
  double phi_fg_rate = 0.0, phi_gf_rate = 0.0, phi_rate = 0.0;

  int loops = 1;  // periods executed per gate
  std::optional<int> odd_pi_index;  // l when tuned to |total_theta| = (2l+1)*pi

  double gate_time_ps() const { return loops * t0_ps; }
  double total_theta() const { return loops * Theta; }
  double total_phi_fg() const { return loops * Phi_fg; }
  double total_phi_gf() const { return loops * Phi_gf; }
};

/// Smallest t0 with eta_1 t0 = 2 pi k1 hbar and eta_2 t0 = 2 pi k2 hbar within
/// tolerance, via continued-fraction approximation of eta_1/eta_2 with
/// max(k1, k2) <= max_k. Mixed-sign detunings are rejected (PreconditionError);
/// failure to commensurate raises CommensurationError with the best candidate.
struct Commensuration {
  double t0_ps;
  long k1, k2;
  double residual;  // |eta_1 t0 / (2 pi hbar) - k1|
};
Commensuration gate_time(const EffectiveCouplings& c, long max_k = 512, double tol = 1e-9);

/// Per-period gate phases of a schedule (closed forms at the commensuration time).
struct GatePhases {
  double Phi_fg, Phi_gf, Theta;
};
GatePhases gate_phases(const EffectiveCouplings& c, const Commensuration& s);

/// Full schedule: commensuration + gate phases + Stark-limit rates.
GateSchedule make_schedule(const EffectiveCouplings& c, long max_k = 512, double tol = 1e-9);

/// Balanced-coupling shortcut for the gate phase,
///   Theta = t0 * 4 nu |lambda_A1 lambda_B1| cos(vartheta_1) / (delta^2 - nu^2),
/// with nu and delta recovered from the mode detunings. Requires the pair
/// magnitudes balanced within `balance_tol` (relative); throws
/// PreconditionError reporting the imbalance otherwise.
double theta_simplified(const EffectiveCouplings& c, double t0_ps, double balance_tol = 1e-6);

/// Stark-limit phase rates (rad/ps). -phi_rate * t0 equals Theta for any
/// commensurate schedule.
struct SecondModelPhases {
  double phi_fg_rate, phi_gf_rate, phi_rate;
};
SecondModelPhases second_model_phases(const EffectiveCouplings& c);

// ---- tuning --------------------------------------------------------------------

enum class TuneKnob {
  om_scale,     // uniform scale on all Rabi frequencies, fixed ratios; t0 unchanged
  delta_scale,  // uniform scale on all laser detunings; secondary knob
  t_loops,      // integer multiples of t0 only, couplings untouched
};

struct TuneResult {
  SystemParams params;      // adjusted parameters (continuous knobs) or the input
  GateSchedule schedule;    // schedule with loops / odd_pi_index resolved
  double achieved_theta;    // total gate phase actually reached (rad)
  double knob_scale = 1.0;  // scale applied by the continuous knob
};

/// Adjust the chosen knob until |total Theta| = (2l+1)*pi within `tol` rad.
/// The continuous knobs (om_scale, delta_scale) fix the loop count at the
/// nearest count that brings the per-period phase within reach and bisect the
/// scale; with t_loops only integer multiples are scanned and failure raises
/// TuningError carrying the closest phase achieved.
TuneResult tune_for_pi_phase(const SystemParams& p, int l, TuneKnob knob, double tol = 1e-6,
                             long max_loops = 100000);

// ---- operation-time surface -----------------------------------------------------

/// t0(nu, delta) for a target gate phase, from the balanced-coupling inversion
/// with the couplings re-derived at every grid point. Grid points on a mode
/// resonance are NaN sentinels, never dropped.
struct OperationTimeSurface {
  std::vector<double> nu;     // meV
  std::vector<double> delta;  // meV
  Eigen::MatrixXd t0_ps;      // row = nu index, col = delta index; NaN on resonance
  std::vector<std::string> sentinel_notes;
};
OperationTimeSurface operation_time_surface(const SystemParams& base,
                                            const std::vector<double>& nu_grid,
                                            const std::vector<double>& delta_grid,
                                            double theta_target = kPi);

/// Two candidate readings of the effective decay-time figure of merit.
/// The energy form gamma*eta_2^2/max|lambda|^2 carries meV and is
/// dimensionally inconsistent as a time; `consistent_ps` is the consistent
/// counterpart hbar*eta_2^2/(gamma*max|lambda|^2). Both are reported side by
/// side so the discrepancy stays visible.
struct DecayTimeEstimate {
  double energy_form_mev;
  double consistent_ps;
};
DecayTimeEstimate effective_decay_time(const EffectiveCouplings& c, double gamma_mev);

/// Closed-form which-path decoherence estimate for the equal-superposition
/// input: each branch pair loses coherence as exp(-gamma/(2 hbar) * integral
/// |alpha_b - alpha_b'|^2 dt), which integrates exactly over whole loops.
/// Depends only on the couplings, the decay rate, and the gate time; a uniform
/// rescaling of the drive strengths with the matching gate-time change leaves
/// it invariant.
struct ExposurePrediction {
  std::array<double, 6> pair_exponent;  // order: ff-fg ff-gf ff-gg fg-gf fg-gg gf-gg
  double predicted_fidelity;            // (4 + 2 sum exp(-Gamma)) / 16
};
ExposurePrediction decay_exposure_prediction(const EffectiveCouplings& c, double gamma_mev,
                                             double gate_time_ps);

}  // namespace ccgate::phases
