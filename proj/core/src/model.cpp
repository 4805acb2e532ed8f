#include "ccgate/model.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "ccgate/errors.hpp"

namespace ccgate::model {

namespace {

// Adiabatic-elimination weight of a drive pair detuned by (Delta + eta, Delta):
// the harmonic mean 1/(Delta+eta) + 1/Delta that sets the effective coupling.
double elimination_weight(double detuning, double eta) {
  const double scale = std::max({std::abs(detuning), std::abs(eta), 1.0});
  if (std::abs(detuning) < 1e-12 * scale || std::abs(detuning + eta) < 1e-12 * scale) {
    throw PreconditionError("adiabatic-elimination pole: laser detuning on resonance");
  }
  return 1.0 / (detuning + eta) + 1.0 / detuning;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

ValidityReport check_validity(const SystemParams& p, double detuning_ratio, double drive_ratio) {
  ValidityReport r{};
  const double eq_tol = 1e-9;

  const bool stark_a = std::abs(p.detuning_a - p.detuning_prime_a) <=
                           eq_tol * std::max(1.0, std::abs(p.detuning_a)) &&
                       std::abs(std::abs(p.rabi_a) - std::abs(p.rabi_prime_a)) <=
                           eq_tol * std::max(1.0, std::abs(p.rabi_a));
  const bool stark_b = std::abs(p.detuning_b - p.detuning_prime_b) <=
                           eq_tol * std::max(1.0, std::abs(p.detuning_b)) &&
                       std::abs(std::abs(p.rabi_b) - std::abs(p.rabi_prime_b)) <=
                           eq_tol * std::max(1.0, std::abs(p.rabi_b));
  r.stark_cancellation = stark_a && stark_b;
  if (!stark_a) r.notes.push_back("dot A: second laser does not cancel the Stark shift");
  if (!stark_b) r.notes.push_back("dot B: second laser does not cancel the Stark shift");

  const double need_a = detuning_ratio * std::max(std::abs(p.g_a), std::abs(p.rabi_a));
  const double need_b = detuning_ratio * std::max(std::abs(p.g_b), std::abs(p.rabi_b));
  const bool det_a = std::abs(p.detuning_a) >= need_a;
  const bool det_b = std::abs(p.detuning_b) >= need_b;
  r.large_detuning = det_a && det_b;
  if (!det_a) {
    r.notes.push_back("dot A: |detuning| " + fmt(std::abs(p.detuning_a)) + " < " + fmt(need_a) +
                      " (large-detuning margin)");
  }
  if (!det_b) {
    r.notes.push_back("dot B: |detuning| " + fmt(std::abs(p.detuning_b)) + " < " + fmt(need_b) +
                      " (large-detuning margin)");
  }

  const bool drv_a = std::abs(p.rabi_a) >= drive_ratio * std::abs(p.g_a);
  const bool drv_b = std::abs(p.rabi_b) >= drive_ratio * std::abs(p.g_b);
  r.drive_dominates = drv_a && drv_b;
  if (!drv_a) r.notes.push_back("dot A: laser drive does not dominate the cavity coupling");
  if (!drv_b) r.notes.push_back("dot B: laser drive does not dominate the cavity coupling");
  return r;
}

double EffectiveCouplings::vartheta(int mode) const {
  const Complex prod = lambda_a[mode] * std::conj(lambda_b[mode]);
  if (prod == Complex(0.0)) return 0.0;
  return std::arg(prod);
}

double EffectiveCouplings::pair_magnitude(int mode) const {
  return std::abs(lambda_a[mode] * lambda_b[mode]);
}

double EffectiveCouplings::balance_imbalance() const {
  const double p1 = pair_magnitude(0);
  const double p2 = pair_magnitude(1);
  const double denom = std::max({p1, p2, 1e-300});
  return std::abs(p1 - p2) / denom;
}

EffectiveCouplings effective_couplings(const SystemParams& p) {
  const auto eta = p.mode_detunings();
  const double scale = std::max({std::abs(p.cavity_offset), std::abs(p.hopping), 1e-12});
  for (int m = 0; m < 2; ++m) {
    if (std::abs(eta[m]) < 1e-12 * scale) {
      throw PreconditionError("mode resonance: cavity offset equals ±hopping (eta_" +
                              std::to_string(m + 1) + " = 0)");
    }
  }

  const Complex pref_a = p.g_a * std::conj(p.rabi_a) / 4.0;
  const Complex pref_b = p.g_b * std::conj(p.rabi_b) / 4.0;

  EffectiveCouplings c{};
  c.eta = eta;
  c.lambda_a[0] = pref_a * elimination_weight(p.detuning_a, eta[0]);
  c.lambda_a[1] = pref_a * elimination_weight(p.detuning_a, eta[1]);
  // Dot B couples to mode 1 with the opposite sign of the mode transform.
  c.lambda_b[0] = -pref_b * elimination_weight(p.detuning_b, eta[0]);
  c.lambda_b[1] = pref_b * elimination_weight(p.detuning_b, eta[1]);
  return c;
}

double solve_balanced_detuning_b(const SystemParams& p) {
  const auto eta = p.mode_detunings();
  const double eta_max = std::max(std::abs(eta[0]), std::abs(eta[1]));
  const double mag_a = std::abs(p.detuning_a);

  auto imbalance = [&](double detuning_b) {
    SystemParams q = p;
    q.detuning_b = detuning_b;
    q.detuning_prime_b = detuning_b;
    const EffectiveCouplings c = effective_couplings(q);
    return c.pair_magnitude(0) - c.pair_magnitude(1);
  };

  // The balancing root sits to the red of both mode poles at -eta_m.
  const double right = -(eta_max + std::max(0.5, 0.05 * mag_a));
  const double left = -(3.0 * mag_a + eta_max + 1.0);

  const int scan = 400;
  double prev_x = right;
  double prev_f = imbalance(prev_x);
  double lo = 0.0, hi = 0.0;
  bool bracketed = false;
  for (int i = 1; i <= scan; ++i) {
    const double x = right + (left - right) * static_cast<double>(i) / scan;
    const double f = imbalance(x);
    if (std::isfinite(f) && std::isfinite(prev_f) && f * prev_f <= 0.0) {
      lo = x;
      hi = prev_x;
      bracketed = true;
      break;
    }
    prev_x = x;
    prev_f = f;
  }
  if (!bracketed) {
    throw PreconditionError("no balanced dot-B detuning bracketed in [" + fmt(left) + ", " +
                            fmt(right) + "]");
  }
  double flo = imbalance(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = imbalance(mid);
    if (fm == 0.0 || std::abs(hi - lo) < 1e-14 * std::abs(mid)) return mid;
    if (fm * flo <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

// ---- term lists -----------------------------------------------------------------

Matrix TermList::assemble(double t_ps) const {
  Matrix h = static_part.size() > 0 ? static_part : Matrix::Zero(dim, dim);
  for (const auto& term : terms) {
    const Complex phase = term.amplitude * std::exp(Complex(0.0, term.omega_rad_ps * t_ps));
    h += phase * term.op;
    h += std::conj(phase) * term.op.adjoint();
  }
  return h;
}

double TermList::max_rate() const {
  double r = 0.0;
  for (const auto& term : terms) r = std::max(r, std::abs(term.omega_rad_ps));
  return r;
}

const char* gate_model_name(GateModel m) {
  switch (m) {
    case GateModel::full: return "full";
    case GateModel::effective: return "effective";
    case GateModel::dispersive: return "dispersive";
  }
  return "?";
}

TermList interaction_terms(const SystemParams& p, const SpaceLayout& layout) {
  if (!layout.has_excited_level()) {
    throw PreconditionError("the full interaction Hamiltonian needs 3-level dots");
  }
  using hilbert::embed;
  using hilbert::fock_annihilation;
  using hilbert::qd_sigma_plus;

  const Matrix c1 = embed(fock_annihilation(layout.n_max), SpaceLayout::kSiteMode1, layout).matrix();
  const Matrix c2 = embed(fock_annihilation(layout.n_max), SpaceLayout::kSiteMode2, layout).matrix();
  const Matrix sp_a = embed(qd_sigma_plus(layout.qd_levels), SpaceLayout::kSiteQdA, layout).matrix();
  const Matrix sp_b = embed(qd_sigma_plus(layout.qd_levels), SpaceLayout::kSiteQdB, layout).matrix();

  TermList tl;
  tl.dim = layout.dim();
  const double d = p.cavity_offset;
  const double nu = p.hopping;

  // Dot A: (g/2)(c2 e^{i(Delta+d-nu)t} + c1 e^{i(Delta+d+nu)t}) sigma+ plus drives.
  tl.terms.push_back({0.5 * p.g_a, angular_rate(p.detuning_a + d - nu), c2 * sp_a});
  tl.terms.push_back({0.5 * p.g_a, angular_rate(p.detuning_a + d + nu), c1 * sp_a});
  tl.terms.push_back({p.rabi_a, angular_rate(p.detuning_a), sp_a});
  tl.terms.push_back({p.rabi_prime_a, -angular_rate(p.detuning_prime_a), sp_a});

  // Dot B carries the opposite sign on the mode-1 component.
  tl.terms.push_back({0.5 * p.g_b, angular_rate(p.detuning_b + d - nu), c2 * sp_b});
  tl.terms.push_back({-0.5 * p.g_b, angular_rate(p.detuning_b + d + nu), c1 * sp_b});
  tl.terms.push_back({p.rabi_b, angular_rate(p.detuning_b), sp_b});
  tl.terms.push_back({p.rabi_prime_b, -angular_rate(p.detuning_prime_b), sp_b});
  return tl;
}

TermList effective_terms(const EffectiveCouplings& c, const SpaceLayout& layout) {
  using hilbert::embed;
  using hilbert::fock_annihilation;
  using hilbert::qd_projector;

  const Matrix proj_a =
      embed(qd_projector(SpaceLayout::kLevelG, layout.qd_levels), SpaceLayout::kSiteQdA, layout)
          .matrix();
  const Matrix proj_b =
      embed(qd_projector(SpaceLayout::kLevelG, layout.qd_levels), SpaceLayout::kSiteQdB, layout)
          .matrix();
  const std::array<Matrix, 2> modes = {
      embed(fock_annihilation(layout.n_max), SpaceLayout::kSiteMode1, layout).matrix(),
      embed(fock_annihilation(layout.n_max), SpaceLayout::kSiteMode2, layout).matrix()};

  TermList tl;
  tl.dim = layout.dim();
  for (int m = 0; m < 2; ++m) {
    const double omega = angular_rate(c.eta[m]);
    tl.terms.push_back({-c.lambda_a[m], omega, modes[m] * proj_a});
    tl.terms.push_back({-c.lambda_b[m], omega, modes[m] * proj_b});
  }
  return tl;
}

TermList dispersive_terms(const EffectiveCouplings& c, const SpaceLayout& layout) {
  using hilbert::embed;
  using hilbert::qd_projector;

  const Matrix proj_a =
      embed(qd_projector(SpaceLayout::kLevelG, layout.qd_levels), SpaceLayout::kSiteQdA, layout)
          .matrix();
  const Matrix proj_b =
      embed(qd_projector(SpaceLayout::kLevelG, layout.qd_levels), SpaceLayout::kSiteQdB, layout)
          .matrix();

  TermList tl;
  tl.dim = layout.dim();
  Matrix s = Matrix::Zero(tl.dim, tl.dim);
  for (int m = 0; m < 2; ++m) {
    s += (std::norm(c.lambda_a[m]) / c.eta[m]) * proj_a;
    s += (std::norm(c.lambda_b[m]) / c.eta[m]) * proj_b;
    s += (2.0 * c.mu(m) * std::cos(c.vartheta(m))) * (proj_a * proj_b);
  }
  tl.static_part = std::move(s);
  return tl;
}

ComplexOperator hamiltonian_interaction(const SystemParams& p, double t_ps,
                                        const SpaceLayout& layout) {
  if (t_ps < 0) throw std::invalid_argument("hamiltonian_interaction: t < 0");
  return ComplexOperator(interaction_terms(p, layout).assemble(t_ps));
}

ComplexOperator hamiltonian_effective_1(const EffectiveCouplings& c, double t_ps,
                                        const SpaceLayout& layout) {
  return ComplexOperator(effective_terms(c, layout).assemble(t_ps));
}

ComplexOperator hamiltonian_effective_2(const EffectiveCouplings& c, const SpaceLayout& layout,
                                        bool* dispersive_warning, double dispersive_ratio) {
  if (dispersive_warning) {
    double lambda_max = 0.0;
    for (int m = 0; m < 2; ++m) {
      lambda_max = std::max({lambda_max, std::abs(c.lambda_a[m]), std::abs(c.lambda_b[m])});
    }
    const double eta_min = std::min(std::abs(c.eta[0]), std::abs(c.eta[1]));
    *dispersive_warning = eta_min < dispersive_ratio * lambda_max;
  }
  return ComplexOperator(dispersive_terms(c, layout).assemble(0.0));
}

std::vector<CollapseOp> collapse_operators(const SystemParams& p, const SpaceLayout& layout,
                                           CollapseBasis basis) {
  using hilbert::embed;
  using hilbert::fock_annihilation;

  const Matrix c1 = embed(fock_annihilation(layout.n_max), SpaceLayout::kSiteMode1, layout).matrix();
  const Matrix c2 = embed(fock_annihilation(layout.n_max), SpaceLayout::kSiteMode2, layout).matrix();
  if (p.gamma_a < 0 || p.gamma_b < 0) {
    throw std::invalid_argument("cavity decay rates must be nonnegative");
  }

  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  std::vector<CollapseOp> out;
  if (basis == CollapseBasis::bare) {
    // Physical channels written on the delocalized-mode factors.
    if (p.gamma_a > 0) out.push_back({ComplexOperator((c1 + c2) * inv_sqrt2), p.gamma_a});
    if (p.gamma_b > 0) out.push_back({ComplexOperator((c2 - c1) * inv_sqrt2), p.gamma_b});
  } else {
    // One channel per delocalized mode at the mean rate; a superoperator
    // identity makes this exact when the two physical rates coincide.
    const double mean = 0.5 * (p.gamma_a + p.gamma_b);
    if (mean > 0) {
      out.push_back({ComplexOperator(c1), mean});
      out.push_back({ComplexOperator(c2), mean});
    }
  }
  return out;
}

}  // namespace ccgate::model
