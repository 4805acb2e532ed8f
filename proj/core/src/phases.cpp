#include "ccgate/phases.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ccgate/errors.hpp"

namespace ccgate::phases {

namespace {

Complex branch_lambda(const EffectiveCouplings& c, Branch b, int mode) {
  Complex l = 0.0;
  if (dot_a_in_g(b)) l += c.lambda_a[mode];
  if (dot_b_in_g(b)) l += c.lambda_b[mode];
  return l;
}

// (tau - sin(eta*tau)/eta) with tau = t/hbar; the common envelope of all
// accumulated-phase closed forms.
double phase_envelope(double eta, double t_ps) {
  const double tau = t_ps / kHbar;
  return tau - std::sin(eta * tau) / eta;
}

}  // namespace

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::ff: return "ff";
    case Branch::fg: return "fg";
    case Branch::gf: return "gf";
    case Branch::gg: return "gg";
  }
  return "?";
}

Complex alpha_trajectory(const EffectiveCouplings& c, Branch branch, int mode, double t_ps) {
  if (branch == Branch::ff) return 0.0;  // undriven branch: stays at the origin
  const Complex lam = branch_lambda(c, branch, mode);
  const double eta = c.eta[mode];
  const double angle = eta * t_ps / kHbar;
  const Complex loop = std::exp(Complex(0.0, -angle)) - 1.0;
  return -(std::conj(lam) / eta) * loop;
}

AccumulatedPhases accumulated_phases(const EffectiveCouplings& c, double t_ps) {
  AccumulatedPhases out{};
  for (int m = 0; m < 2; ++m) {
    const double env = phase_envelope(c.eta[m], t_ps);
    out.phi_fg[m] = -(std::norm(c.lambda_a[m]) / c.eta[m]) * env;
    out.phi_gf[m] = -(std::norm(c.lambda_b[m]) / c.eta[m]) * env;
    out.theta[m] =
        -(2.0 * c.pair_magnitude(m) * std::cos(c.vartheta(m)) / c.eta[m]) * env;
  }
  return out;
}

double AccumulatedPhases::branch_total(Branch b) const {
  double total = 0.0;
  for (int m = 0; m < 2; ++m) {
    switch (b) {
      case Branch::ff: break;
      case Branch::fg: total += phi_fg[m]; break;
      case Branch::gf: total += phi_gf[m]; break;
      case Branch::gg: total += phi_fg[m] + phi_gf[m] + theta[m]; break;
    }
  }
  return total;
}

Commensuration gate_time(const EffectiveCouplings& c, long max_k, double tol) {
  const double e1 = c.eta[0];
  const double e2 = c.eta[1];
  if (e1 * e2 <= 0.0) {
    throw PreconditionError("gate_time: mode detunings of mixed sign never close together");
  }
  const double ratio = std::abs(e1 / e2);

  // Continued-fraction convergents of eta_1/eta_2.
  long h_prev = 1, k_prev = 0;  // h_{-1}/k_{-1}
  long h_pprev = 0, k_pprev = 1;
  double y = ratio;
  long best_k1 = 1, best_k2 = 1;
  double best_res = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < 64; ++iter) {
    const double a_f = std::floor(y);
    if (a_f > static_cast<double>(std::numeric_limits<long>::max() / 4)) break;
    const long a = static_cast<long>(a_f);
    const long h = a * h_prev + h_pprev;
    const long k = a * k_prev + k_pprev;
    if (h > max_k || k > max_k || h <= 0 || k <= 0) break;

    // Residual of mode 1 when t0 is pinned exactly to k loops of mode 2.
    const double res = std::abs(static_cast<double>(k) * ratio - static_cast<double>(h));
    if (res < best_res) {
      best_res = res;
      best_k1 = h;
      best_k2 = k;
    }
    if (res <= tol * std::max(1.0, static_cast<double>(h))) {
      const double t0 = 2.0 * kPi * static_cast<double>(k) * kHbar / std::abs(e2);
      return Commensuration{t0, h, k, res};
    }
    const double frac = y - a_f;
    if (frac < 1e-15) break;  // exact rational reached
    y = 1.0 / frac;
    h_pprev = h_prev;
    k_pprev = k_prev;
    h_prev = h;
    k_prev = k;
  }

  std::ostringstream msg;
  msg << "gate_time: no commensurate closure with k <= " << max_k << "; best " << best_k1 << "/"
      << best_k2 << " leaves residual " << best_res;
  throw CommensurationError(msg.str(), best_k1, best_k2, best_res);
}

GatePhases gate_phases(const EffectiveCouplings& c, const Commensuration& s) {
  // Closed forms at the commensuration time; the sine envelopes vanish there.
  const double sign = c.eta[0] > 0 ? 1.0 : -1.0;
  const std::array<double, 2> k = {static_cast<double>(s.k1), static_cast<double>(s.k2)};
  GatePhases g{0.0, 0.0, 0.0};
  for (int m = 0; m < 2; ++m) {
    const double eta2 = c.eta[m] * c.eta[m];
    g.Phi_fg -= sign * 2.0 * kPi * k[m] * std::norm(c.lambda_a[m]) / eta2;
    g.Phi_gf -= sign * 2.0 * kPi * k[m] * std::norm(c.lambda_b[m]) / eta2;
    g.Theta -=
        sign * 4.0 * kPi * k[m] * c.pair_magnitude(m) * std::cos(c.vartheta(m)) / eta2;
  }
  return g;
}

SecondModelPhases second_model_phases(const EffectiveCouplings& c) {
  SecondModelPhases r{0.0, 0.0, 0.0};
  for (int m = 0; m < 2; ++m) {
    r.phi_fg_rate += std::norm(c.lambda_a[m]) / c.eta[m] / kHbar;
    r.phi_gf_rate += std::norm(c.lambda_b[m]) / c.eta[m] / kHbar;
    r.phi_rate += 2.0 * c.mu(m) * std::cos(c.vartheta(m)) / kHbar;
  }
  return r;
}

GateSchedule make_schedule(const EffectiveCouplings& c, long max_k, double tol) {
  const Commensuration s = gate_time(c, max_k, tol);
  const GatePhases g = gate_phases(c, s);
  const SecondModelPhases r = second_model_phases(c);
  GateSchedule out;
  out.t0_ps = s.t0_ps;
  out.k1 = s.k1;
  out.k2 = s.k2;
  out.commensuration_residual = s.residual;
  out.Phi_fg = g.Phi_fg;
  out.Phi_gf = g.Phi_gf;
  out.Theta = g.Theta;
  out.phi_fg_rate = r.phi_fg_rate;
  out.phi_gf_rate = r.phi_gf_rate;
  out.phi_rate = r.phi_rate;
  return out;
}

double theta_simplified(const EffectiveCouplings& c, double t0_ps, double balance_tol) {
  const double imbalance = c.balance_imbalance();
  if (imbalance > balance_tol) {
    std::ostringstream msg;
    msg << "theta_simplified: pair magnitudes unbalanced by " << imbalance << " (tolerance "
        << balance_tol << ")";
    throw PreconditionError(msg.str());
  }
  const double nu = 0.5 * (c.eta[0] - c.eta[1]);
  const double delta_sq_minus_nu_sq = c.eta[0] * c.eta[1];
  return (t0_ps / kHbar) * 4.0 * nu * c.pair_magnitude(0) * std::cos(c.vartheta(0)) /
         delta_sq_minus_nu_sq;
}

TuneResult tune_for_pi_phase(const SystemParams& p, int l, TuneKnob knob, double tol,
                             long max_loops) {
  if (l < 0) throw std::invalid_argument("tune_for_pi_phase: l must be nonnegative");
  const double target = (2.0 * l + 1.0) * kPi;
  const EffectiveCouplings c0 = model::effective_couplings(p);
  GateSchedule base = make_schedule(c0);
  const double theta0 = std::abs(base.Theta);
  if (theta0 <= 0.0) {
    throw TuningError("tune_for_pi_phase: gate phase vanishes (no hopping asymmetry)", 0.0);
  }

  if (knob == TuneKnob::t_loops) {
    long best_loops = 1;
    double best_err = std::numeric_limits<double>::infinity();
    for (long n = 1; n <= max_loops; ++n) {
      const double err = std::abs(n * theta0 - target);
      if (err < best_err) {
        best_err = err;
        best_loops = n;
      }
      if (err <= tol) {
        TuneResult res{p, base, 0.0, 1.0};
        res.schedule.loops = static_cast<int>(n);
        res.schedule.odd_pi_index = l;
        res.achieved_theta = res.schedule.total_theta();
        return res;
      }
      if (n * theta0 > target + tol) break;  // overshoot; undershoot already recorded
    }
    std::ostringstream msg;
    msg << "tune_for_pi_phase: no integer loop count reaches (2l+1)pi within " << tol
        << " rad; closest " << best_loops << " loops miss by " << best_err;
    throw TuningError(msg.str(), best_loops * base.Theta);
  }

  // Continuous knobs: Theta grows with the squared drive and falls off with
  // the detunings, so pick the loop count that keeps the scale near one and
  // bisect on the monotone branch.
  const int loops = std::max(1L, std::lround(target / theta0));
  auto apply_knob = [&](double scale) {
    SystemParams q = p;
    if (knob == TuneKnob::om_scale) {
      q.rabi_a *= scale;
      q.rabi_b *= scale;
      q.rabi_prime_a *= scale;
      q.rabi_prime_b *= scale;
    } else {
      q.detuning_a *= scale;
      q.detuning_b *= scale;
      q.detuning_prime_a *= scale;
      q.detuning_prime_b *= scale;
    }
    return q;
  };
  auto theta_at = [&](double scale) {
    return std::abs(make_schedule(model::effective_couplings(apply_knob(scale))).Theta) * loops;
  };

  // om_scale increases the phase; delta_scale decreases it.
  const bool increasing = knob == TuneKnob::om_scale;
  auto theta_or_fail = [&](double s) {
    try {
      return theta_at(s);
    } catch (const PreconditionError&) {
      throw TuningError("tune_for_pi_phase: knob range blocked by a resonance",
                        theta0 * loops);
    }
  };
  double lo = 1.0, hi = 1.0;
  // Walk the strengthening direction until the target is straddled.
  for (int grow = 0; theta_or_fail(increasing ? hi : lo) < target; ++grow) {
    (increasing ? hi : lo) *= increasing ? 2.0 : 0.5;
    if (grow > 40) {
      throw TuningError("tune_for_pi_phase: scale range exhausted", theta0 * loops);
    }
  }
  for (int grow = 0; theta_or_fail(increasing ? lo : hi) > target; ++grow) {
    (increasing ? lo : hi) *= increasing ? 0.5 : 2.0;
    if (grow > 40) {
      throw TuningError("tune_for_pi_phase: scale range exhausted", theta0 * loops);
    }
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double th = theta_or_fail(mid);
    if (std::abs(th - target) <= 0.25 * tol) {
      lo = hi = mid;
      break;
    }
    const bool move_lo = (th < target) == increasing;
    (move_lo ? lo : hi) = mid;
  }
  const double scale = 0.5 * (lo + hi);

  TuneResult res{apply_knob(scale), GateSchedule{}, 0.0, scale};
  res.schedule = make_schedule(model::effective_couplings(res.params));
  res.schedule.loops = loops;
  res.schedule.odd_pi_index = l;
  res.achieved_theta = res.schedule.total_theta();
  if (std::abs(std::abs(res.achieved_theta) - target) > tol) {
    throw TuningError("tune_for_pi_phase: bisection failed to reach the target phase",
                      res.achieved_theta);
  }
  return res;
}

OperationTimeSurface operation_time_surface(const SystemParams& base,
                                            const std::vector<double>& nu_grid,
                                            const std::vector<double>& delta_grid,
                                            double theta_target) {
  OperationTimeSurface out;
  out.nu = nu_grid;
  out.delta = delta_grid;
  out.t0_ps = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nu_grid.size()),
                                    static_cast<Eigen::Index>(delta_grid.size()));
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t i = 0; i < nu_grid.size(); ++i) {
    for (std::size_t j = 0; j < delta_grid.size(); ++j) {
      SystemParams q = base;
      q.hopping = nu_grid[i];
      q.cavity_offset = delta_grid[j];
      std::ostringstream note;
      if (q.hopping <= 0.0) {
        out.t0_ps(i, j) = nan;
        note << "nu=" << q.hopping << " delta=" << q.cavity_offset << ": no hopping, no gate";
        out.sentinel_notes.push_back(note.str());
        continue;
      }
      try {
        const EffectiveCouplings c = model::effective_couplings(q);
        const double cos1 = std::abs(std::cos(c.vartheta(0)));
        const double pair = c.pair_magnitude(0);
        if (cos1 < 1e-12 || pair <= 0.0) {
          out.t0_ps(i, j) = nan;
          note << "nu=" << q.hopping << " delta=" << q.cavity_offset
               << ": orthogonal or vanishing drive phases";
          out.sentinel_notes.push_back(note.str());
          continue;
        }
        out.t0_ps(i, j) = std::abs(theta_target) * kHbar * std::abs(c.eta[0] * c.eta[1]) /
                          (4.0 * q.hopping * pair * cos1);
      } catch (const PreconditionError& e) {
        out.t0_ps(i, j) = nan;
        note << "nu=" << q.hopping << " delta=" << q.cavity_offset << ": " << e.what();
        out.sentinel_notes.push_back(note.str());
      }
    }
  }
  return out;
}

ExposurePrediction decay_exposure_prediction(const EffectiveCouplings& c, double gamma_mev,
                                             double gate_time_ps) {
  ExposurePrediction out{};
  int pair = 0;
  double sum = 0.0;
  for (int b1 = 0; b1 < 4; ++b1) {
    for (int b2 = b1 + 1; b2 < 4; ++b2) {
      double exponent = 0.0;
      for (int m = 0; m < 2; ++m) {
        const Complex d = branch_lambda(c, static_cast<Branch>(b1), m) -
                          branch_lambda(c, static_cast<Branch>(b2), m);
        const double ratio = std::abs(d) / std::abs(c.eta[m]);
        // time-average of |alpha_b - alpha_b'|^2 is 2 (|dlambda|/eta)^2
        exponent += (gamma_mev / kHbar) * ratio * ratio * gate_time_ps;
      }
      out.pair_exponent[pair++] = exponent;
      sum += std::exp(-exponent);
    }
  }
  out.predicted_fidelity = (4.0 + 2.0 * sum) / 16.0;
  return out;
}

DecayTimeEstimate effective_decay_time(const EffectiveCouplings& c, double gamma_mev) {
  double lambda_max = 0.0;
  for (int m = 0; m < 2; ++m) {
    lambda_max = std::max({lambda_max, std::abs(c.lambda_a[m]), std::abs(c.lambda_b[m])});
  }
  const double eta2_sq = c.eta[1] * c.eta[1];
  DecayTimeEstimate est{};
  est.energy_form_mev = gamma_mev * eta2_sq / (lambda_max * lambda_max);
  est.consistent_ps =
      gamma_mev > 0 ? kHbar * eta2_sq / (gamma_mev * lambda_max * lambda_max)
                    : std::numeric_limits<double>::infinity();
  return est;
}

}  // namespace ccgate::phases
