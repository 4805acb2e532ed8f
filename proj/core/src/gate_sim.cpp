#include <cmath>
#include <sstream>

#include "ccgate/dynamics.hpp"
#include "ccgate/errors.hpp"

namespace ccgate::dynamics {

namespace {

using hilbert::SpaceLayout;
using phases::Branch;
using phases::kBranches;

// Product state carrying a branch label: dot A in |g> for fg/gg, dot B in |g> for gf/gg.
std::pair<int, int> branch_levels(Branch b) {
  const int a = phases::dot_a_in_g(b) ? SpaceLayout::kLevelG : SpaceLayout::kLevelF;
  const int bl = phases::dot_b_in_g(b) ? SpaceLayout::kLevelG : SpaceLayout::kLevelF;
  return {a, bl};
}

Vector standard_initial_state(const SpaceLayout& layout) {
  Vector v = Vector::Zero(layout.dim());
  for (Branch b : kBranches) {
    const auto [la, lb] = branch_levels(b);
    v(layout.index(la, lb, 0, 0)) = 0.5;
  }
  return v;
}

// Mask of basis indices belonging to a branch sector. A dot flagged "in g"
// owns {|g>, |e>} so the virtually excited population stays with its branch.
std::vector<char> branch_mask(const SpaceLayout& layout, Branch b) {
  std::vector<char> mask(layout.dim(), 0);
  const int fock = layout.n_max + 1;
  for (int a = 0; a < layout.qd_levels; ++a) {
    const bool a_in_g = a != SpaceLayout::kLevelF;
    if (a_in_g != phases::dot_a_in_g(b)) continue;
    for (int bb = 0; bb < layout.qd_levels; ++bb) {
      const bool b_in_g = bb != SpaceLayout::kLevelF;
      if (b_in_g != phases::dot_b_in_g(b)) continue;
      for (int n1 = 0; n1 < fock; ++n1) {
        for (int n2 = 0; n2 < fock; ++n2) mask[layout.index(a, bb, n1, n2)] = 1;
      }
    }
  }
  return mask;
}

// Mean photon number of the branch-conditioned state.
double conditioned_photon_number(const SpaceLayout& layout, const std::vector<char>& mask,
                                 const Vector& psi) {
  const int fock = layout.n_max + 1;
  double weight = 0.0, photons = 0.0;
  for (int a = 0; a < layout.qd_levels; ++a) {
    for (int b = 0; b < layout.qd_levels; ++b) {
      for (int n1 = 0; n1 < fock; ++n1) {
        for (int n2 = 0; n2 < fock; ++n2) {
          const int idx = layout.index(a, b, n1, n2);
          if (!mask[idx]) continue;
          const double p = std::norm(psi(idx));
          weight += p;
          photons += p * (n1 + n2);
        }
      }
    }
  }
  return weight > 1e-300 ? photons / weight : 0.0;
}

double excited_population(const SpaceLayout& layout, const Vector& psi) {
  if (!layout.has_excited_level()) return 0.0;
  const int fock = layout.n_max + 1;
  double pop = 0.0;
  for (int a = 0; a < layout.qd_levels; ++a) {
    for (int b = 0; b < layout.qd_levels; ++b) {
      if (a != SpaceLayout::kLevelE && b != SpaceLayout::kLevelE) continue;
      for (int n1 = 0; n1 < fock; ++n1) {
        for (int n2 = 0; n2 < fock; ++n2) pop += std::norm(psi(layout.index(a, b, n1, n2)));
      }
    }
  }
  return pop;
}

// Poisson tail mass beyond the cutoff for a coherent state of size |alpha|^2.
double coherent_tail(double mean_photons, int n_max) {
  double term = std::exp(-mean_photons);
  double cdf = term;
  for (int k = 1; k <= n_max; ++k) {
    term *= mean_photons / k;
    cdf += term;
  }
  return std::max(0.0, 1.0 - cdf);
}

int choose_n_max(const SystemParams& p, const EffectiveCouplings& c,
                 const GateRunOptions& opts) {
  if (opts.force_n_max) return *opts.force_n_max;
  // Largest displacement over branches and modes; every branch must fit,
  // not only gg where sign cancellations can hide the worst case.
  double amax = 0.0;
  for (Branch b : kBranches) {
    for (int m = 0; m < 2; ++m) {
      Complex lam = 0.0;
      if (phases::dot_a_in_g(b)) lam += c.lambda_a[m];
      if (phases::dot_b_in_g(b)) lam += c.lambda_b[m];
      amax = std::max(amax, 2.0 * std::abs(lam) / std::abs(c.eta[m]));
    }
  }
  int n = std::max(p.n_max, 2);
  while (n < 24 && coherent_tail(amax * amax, n) > 1e-7) ++n;
  return n;
}

PropagationConfig make_config(const HarmonicHamiltonian& h, double t_final,
                              const GateRunOptions& opts) {
  PropagationConfig cfg;
  cfg.dt_ps = suggested_dt(h, opts.rad_per_step);
  cfg.t_final_ps = t_final;
  const long steps = std::max(1L, static_cast<long>(std::ceil(t_final / cfg.dt_ps)));
  cfg.sample_stride = std::max(1L, steps / std::max(1, opts.fidelity_samples));
  return cfg;
}

struct ReferenceRun {
  StateSeries series;
  std::array<double, 4> branch_phase;
  std::array<double, 4> residual_photon;
  double max_excited = 0.0;
};

ReferenceRun reference_run(const HarmonicHamiltonian& h, const SpaceLayout& layout,
                           const Vector& psi0, const PropagationConfig& cfg) {
  ReferenceRun out;
  out.series = propagate_state(h, hilbert::StateVector{psi0}, cfg);
  const Vector& final_psi = out.series.states.back();
  for (Branch b : kBranches) {
    const auto [la, lb] = branch_levels(b);
    const int idx = layout.index(la, lb, 0, 0);
    const Complex amp = final_psi(idx) / psi0(idx);
    out.branch_phase[static_cast<int>(b)] = std::arg(amp);
    out.residual_photon[static_cast<int>(b)] =
        conditioned_photon_number(layout, branch_mask(layout, b), final_psi);
  }
  for (const Vector& v : out.series.states) {
    out.max_excited = std::max(out.max_excited, excited_population(layout, v));
  }
  return out;
}

}  // namespace

Eigen::Matrix4cd ideal_gate(const GateSchedule& s, bool corrections) {
  Eigen::Matrix4cd u = Eigen::Matrix4cd::Zero();
  const double theta = s.total_theta();
  if (corrections) {
    Complex gg = std::polar(1.0, theta);
    if (s.odd_pi_index) {
      // A schedule tuned to an odd multiple of pi is the controlled-Z by
      // construction; pin the entry exactly.
      const double target = (2.0 * (*s.odd_pi_index) + 1.0) * kPi;
      if (std::abs(std::abs(theta) - target) < 1e-6) gg = -1.0;
    }
    u.diagonal() << 1.0, 1.0, 1.0, gg;
    return u;
  }
  const double pfg = s.total_phi_fg();
  const double pgf = s.total_phi_gf();
  u.diagonal() << 1.0, std::polar(1.0, pfg), std::polar(1.0, pgf),
      std::polar(1.0, pfg + pgf + theta);
  return u;
}

GateReport run_gate_simulation(const SystemParams& p, const GateSchedule& s, GateModel m,
                               bool decay, const GateRunOptions& opts) {
  const EffectiveCouplings c = model::effective_couplings(p);
  SpaceLayout layout;
  layout.qd_levels = (m == GateModel::full) ? 3 : 2;
  layout.n_max = choose_n_max(p, c, opts);

  const HarmonicHamiltonian h = build_hamiltonian(m, p, c, layout);
  const PropagationConfig cfg = make_config(h, s.gate_time_ps(), opts);
  const Vector psi0 = standard_initial_state(layout);
  const ReferenceRun ref = reference_run(h, layout, psi0, cfg);

  GateReport report;
  report.n_max_used = layout.n_max;
  report.branch_phase = ref.branch_phase;
  report.residual_photon = ref.residual_photon;
  report.max_excited_population = ref.max_excited;
  report.norm_drift = ref.series.norm_drift;
  report.realized = Eigen::Matrix4cd::Zero();
  for (int b = 0; b < 4; ++b) report.realized(b, b) = std::polar(1.0, ref.branch_phase[b]);

  if (decay) {
    const auto collapse = model::collapse_operators(p, layout, model::CollapseBasis::bare);
    const hilbert::DensityMatrix rho0{psi0 * psi0.adjoint()};
    std::size_t cursor = 0;
    double final_f = 1.0;
    DensityObserver observer = [&](double t, const Matrix& rho) {
      while (cursor + 1 < ref.series.times.size() &&
             std::abs(ref.series.times[cursor] - t) > 1e-9) {
        ++cursor;
      }
      const Vector& psi_ref = ref.series.states[cursor];
      const double f = (psi_ref.adjoint() * (rho * psi_ref)).value().real();
      report.fidelity_times.push_back(t);
      report.fidelity_values.push_back(f);
      final_f = f;
    };
    DensitySeries ds = propagate_lindblad(h, collapse, rho0, cfg, observer);
    report.diag = ds.diag;
    report.final_fidelity = final_f;
  } else {
    report.final_fidelity = 1.0;
  }

  if (opts.worst_case_over_basis && decay) {
    double worst = 1.0;
    for (Branch b : {Branch::fg, Branch::gf, Branch::gg}) {
      const auto [la, lb] = branch_levels(b);
      const Vector basis = hilbert::basis_state(layout, la, lb, 0, 0).v;
      const ReferenceRun bref = reference_run(h, layout, basis, cfg);
      const auto collapse = model::collapse_operators(p, layout, model::CollapseBasis::bare);
      const hilbert::DensityMatrix rho0{basis * basis.adjoint()};
      double f_final = 1.0;
      std::size_t cur = 0;
      DensityObserver obs = [&](double t, const Matrix& rho) {
        while (cur + 1 < bref.series.times.size() &&
               std::abs(bref.series.times[cur] - t) > 1e-9) {
          ++cur;
        }
        f_final = (bref.series.states[cur].adjoint() * (rho * bref.series.states[cur]))
                      .value()
                      .real();
      };
      propagate_lindblad(h, collapse, rho0, cfg, obs);
      worst = std::min(worst, f_final);
    }
    report.worst_basis_fidelity = worst;
  }

  if (opts.nmax_convergence) {
    GateRunOptions refined = opts;
    refined.nmax_convergence = false;
    refined.worst_case_over_basis = false;
    refined.force_n_max = layout.n_max + 1;
    const GateReport again = run_gate_simulation(p, s, m, decay, refined);
    if (decay) {
      report.nmax_convergence_delta = std::abs(again.final_fidelity - report.final_fidelity);
    } else {
      double dphi = 0.0;
      for (int b = 0; b < 4; ++b) {
        const double d = std::arg(std::polar(1.0, again.branch_phase[b]) *
                                  std::polar(1.0, -report.branch_phase[b]));
        dphi = std::max(dphi, std::abs(d));
      }
      report.nmax_convergence_delta = dphi;
    }
  }
  return report;
}

ModelDeviation compare_models(const EffectiveCouplings& c, int n_max, const GateSchedule& s,
                              GateModel model_a, GateModel model_b, const GateRunOptions& opts) {
  if (model_a == GateModel::full || model_b == GateModel::full) {
    throw std::invalid_argument(
        "compare_models on raw couplings supports the effective models only");
  }
  SpaceLayout layout{2, n_max};
  SystemParams dummy;  // not consulted by the effective builders
  const HarmonicHamiltonian ha = build_hamiltonian(model_a, dummy, c, layout);
  const HarmonicHamiltonian hb = build_hamiltonian(model_b, dummy, c, layout);

  GateRunOptions o = opts;
  PropagationConfig cfg_a = make_config(ha, s.gate_time_ps(), o);
  PropagationConfig cfg_b = make_config(hb, s.gate_time_ps(), o);
  const double dt = std::min(cfg_a.dt_ps, cfg_b.dt_ps);
  cfg_a.dt_ps = cfg_b.dt_ps = dt;
  const long steps = std::max(1L, static_cast<long>(std::ceil(s.gate_time_ps() / dt)));
  cfg_a.sample_stride = cfg_b.sample_stride =
      std::max(1L, steps / std::max(1, o.fidelity_samples));

  const Vector psi0 = standard_initial_state(layout);
  const StateSeries sa = propagate_state(ha, hilbert::StateVector{psi0}, cfg_a);
  const StateSeries sb = propagate_state(hb, hilbert::StateVector{psi0}, cfg_b);

  ModelDeviation dev;
  for (std::size_t i = 0; i < sa.times.size() && i < sb.times.size(); ++i) {
    double max_dphi = 0.0;
    for (Branch b : kBranches) {
      const auto [la, lb] = branch_levels(b);
      const int idx = layout.index(la, lb, 0, 0);
      const Complex amp_a = sa.states[i](idx);
      const Complex amp_b = sb.states[i](idx);
      if (std::abs(amp_a) < 1e-12 || std::abs(amp_b) < 1e-12) continue;
      max_dphi = std::max(max_dphi, std::abs(std::arg(amp_a * std::conj(amp_b))));
    }
    const double overlap = std::norm(sa.states[i].dot(sb.states[i]));
    dev.times.push_back(sa.times[i]);
    dev.phase_diff.push_back(max_dphi);
    dev.max_branch_phase_diff = std::max(dev.max_branch_phase_diff, max_dphi);
    dev.min_overlap = std::min(dev.min_overlap, overlap);
    dev.final_branch_phase_diff = max_dphi;
  }
  return dev;
}

ModelDeviation compare_models(const SystemParams& p, const GateSchedule& s, GateModel model_a,
                              GateModel model_b, const GateRunOptions& opts) {
  const EffectiveCouplings c = model::effective_couplings(p);
  if (model_a != GateModel::full && model_b != GateModel::full) {
    GateRunOptions o = opts;
    if (!o.force_n_max) o.force_n_max = choose_n_max(p, c, opts);
    return compare_models(c, *o.force_n_max, s, model_a, model_b, o);
  }

  SpaceLayout layout{3, choose_n_max(p, c, opts)};
  const HarmonicHamiltonian ha = build_hamiltonian(model_a, p, c, layout);
  const HarmonicHamiltonian hb = build_hamiltonian(model_b, p, c, layout);
  PropagationConfig cfg_a = make_config(ha, s.gate_time_ps(), opts);
  PropagationConfig cfg_b = make_config(hb, s.gate_time_ps(), opts);
  const double dt = std::min(cfg_a.dt_ps, cfg_b.dt_ps);
  cfg_a.dt_ps = cfg_b.dt_ps = dt;
  const long steps = std::max(1L, static_cast<long>(std::ceil(s.gate_time_ps() / dt)));
  cfg_a.sample_stride = cfg_b.sample_stride =
      std::max(1L, steps / std::max(1, opts.fidelity_samples));

  const Vector psi0 = standard_initial_state(layout);
  const StateSeries sa = propagate_state(ha, hilbert::StateVector{psi0}, cfg_a);
  const StateSeries sb = propagate_state(hb, hilbert::StateVector{psi0}, cfg_b);

  ModelDeviation dev;
  for (std::size_t i = 0; i < sa.times.size() && i < sb.times.size(); ++i) {
    double max_dphi = 0.0;
    for (Branch b : kBranches) {
      const auto [la, lb] = branch_levels(b);
      const int idx = layout.index(la, lb, 0, 0);
      const Complex amp_a = sa.states[i](idx);
      const Complex amp_b = sb.states[i](idx);
      if (std::abs(amp_a) < 1e-12 || std::abs(amp_b) < 1e-12) continue;
      max_dphi = std::max(max_dphi, std::abs(std::arg(amp_a * std::conj(amp_b))));
    }
    dev.times.push_back(sa.times[i]);
    dev.phase_diff.push_back(max_dphi);
    dev.max_branch_phase_diff = std::max(dev.max_branch_phase_diff, max_dphi);
    dev.min_overlap = std::min(dev.min_overlap, std::norm(sa.states[i].dot(sb.states[i])));
    dev.final_branch_phase_diff = max_dphi;
  }
  return dev;
}

}  // namespace ccgate::dynamics
