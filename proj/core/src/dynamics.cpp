#include "ccgate/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "ccgate/errors.hpp"

namespace ccgate::dynamics {

namespace {

double gershgorin_abs(const Matrix& m) {
  double bound = 0.0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) bound = std::max(bound, m.row(r).cwiseAbs().sum());
  return bound;
}

}  // namespace

HarmonicHamiltonian::HarmonicHamiltonian(int dim) : dim_(dim) {}

HarmonicHamiltonian::HarmonicHamiltonian(const model::TermList& tl) : dim_(tl.dim) {
  if (tl.static_part.size() > 0) add_static(tl.static_part);
  // Terms sharing a drive frequency merge into one sparse operator.
  std::vector<std::pair<double, Matrix>> groups;
  for (const auto& t : tl.terms) {
    bool merged = false;
    for (auto& [omega, op] : groups) {
      if (omega == t.omega_rad_ps) {
        op += t.amplitude * t.op;
        merged = true;
        break;
      }
    }
    if (!merged) groups.emplace_back(t.omega_rad_ps, (t.amplitude * t.op).eval());
  }
  for (const auto& [omega, op] : groups) add_term(1.0, omega, op);
}

void HarmonicHamiltonian::add_static(const Matrix& s) {
  if (s.rows() != dim_ || s.cols() != dim_) {
    throw std::invalid_argument("HarmonicHamiltonian: static part dimension mismatch");
  }
  static_op_ = has_static_ ? sparse::Csr::from_dense(static_op_.to_dense() + s)
                           : sparse::Csr::from_dense(s);
  has_static_ = true;
  amp_bound_ = std::max(amp_bound_, gershgorin_abs(static_op_.to_dense()));
}

void HarmonicHamiltonian::add_term(Complex amplitude, double omega_rad_ps, const Matrix& op) {
  if (op.rows() != dim_ || op.cols() != dim_) {
    throw std::invalid_argument("HarmonicHamiltonian: term dimension mismatch");
  }
  if (amplitude == Complex(0.0)) return;
  Term t;
  t.amplitude = amplitude;
  t.omega = omega_rad_ps;
  t.op = sparse::Csr::from_dense(op);
  t.op_dagger = sparse::Csr::from_dense(op.adjoint());
  terms_.push_back(std::move(t));
  max_rate_ = std::max(max_rate_, std::abs(omega_rad_ps));
  amp_bound_ += 2.0 * std::abs(amplitude) * gershgorin_abs(op);
}

double HarmonicHamiltonian::stiffness() const { return max_rate_ + angular_rate(amp_bound_); }

Matrix HarmonicHamiltonian::assemble(double t_ps) const {
  Matrix h = Matrix::Zero(dim_, dim_);
  if (has_static_) h += static_op_.to_dense();
  for (const auto& t : terms_) {
    const Complex phase = t.amplitude * std::exp(Complex(0.0, t.omega * t_ps));
    h += phase * t.op.to_dense();
    h += std::conj(phase) * t.op_dagger.to_dense();
  }
  return h;
}

void HarmonicHamiltonian::apply(double t_ps, const Vector& psi, Vector& out) const {
  out.setZero();
  if (has_static_) static_op_.axpy(1.0, psi, out);
  for (const auto& t : terms_) {
    const Complex phase = t.amplitude * std::exp(Complex(0.0, t.omega * t_ps));
    t.op.axpy(phase, psi, out);
    t.op_dagger.axpy(std::conj(phase), psi, out);
  }
}

void HarmonicHamiltonian::accumulate_product(double t_ps, const Matrix& m, Matrix& out,
                                             Complex scale) const {
  if (has_static_) static_op_.left_apply(scale, m, out);
  for (const auto& t : terms_) {
    const Complex phase = t.amplitude * std::exp(Complex(0.0, t.omega * t_ps));
    t.op.left_apply(scale * phase, m, out);
    t.op_dagger.left_apply(scale * std::conj(phase), m, out);
  }
}

HarmonicHamiltonian build_hamiltonian(GateModel m, const SystemParams& p,
                                      const EffectiveCouplings& c, const SpaceLayout& layout) {
  switch (m) {
    case GateModel::full:
      return HarmonicHamiltonian(model::interaction_terms(p, layout));
    case GateModel::effective:
      return HarmonicHamiltonian(model::effective_terms(c, layout));
    case GateModel::dispersive:
      return HarmonicHamiltonian(model::dispersive_terms(c, layout));
  }
  throw std::invalid_argument("unknown gate model");
}

double suggested_dt(const HarmonicHamiltonian& h, double rad_per_step) {
  const double stiff = std::max(h.stiffness(), 1e-12);
  return std::min(rad_per_step, 0.1) / stiff;
}

namespace {

struct StepPlan {
  double dt;
  long steps;
};

StepPlan plan_steps(double dt_request, double t_final, double max_rate) {
  if (dt_request <= 0.0) throw ConfigError("propagation: dt must be positive");
  if (t_final < 0.0) throw ConfigError("propagation: t_final must be nonnegative");
  if (dt_request * max_rate > 0.1 * (1.0 + 1e-9)) {
    std::ostringstream msg;
    msg << "propagation: dt " << dt_request << " ps violates the phase guard dt*rate <= 0.1 rad"
        << " (rate " << max_rate << " rad/ps)";
    throw ConfigError(msg.str());
  }
  if (t_final == 0.0) return {dt_request, 0};
  const long steps = std::max(1L, static_cast<long>(std::ceil(t_final / dt_request - 1e-12)));
  return {t_final / static_cast<double>(steps), steps};
}

}  // namespace

namespace {

// One classic RK4 step of dy/dt = f(t, y); Stage must fill out = f(t, y).
template <typename State, typename Rhs>
void rk4_step(Rhs&& f, double t, double dt, const State& y, State& out, State& k1, State& k2,
              State& k3, State& k4, State& tmp) {
  f(t, y, k1);
  tmp = y + (0.5 * dt) * k1;
  f(t + 0.5 * dt, tmp, k2);
  tmp = y + (0.5 * dt) * k2;
  f(t + 0.5 * dt, tmp, k3);
  tmp = y + dt * k3;
  f(t + dt, tmp, k4);
  out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Step-doubling driver: advances y through [0, t_final], calling
// record(t, y) at every stride-th accepted step and at the endpoint.
template <typename State, typename Rhs, typename ErrNorm, typename Record>
void adaptive_drive(Rhs&& f, ErrNorm&& err_norm, Record&& record, State& y, State& scratch_full,
                    State& scratch_half, State& k1, State& k2, State& k3, State& k4, State& tmp,
                    double t_final, double dt_start, double dt_max, double tol, int stride) {
  double t = 0.0;
  double dt = std::min(dt_start, dt_max);
  long accepted = 0;
  while (t < t_final * (1.0 - 1e-15)) {
    const double step = std::min(dt, t_final - t);
    rk4_step(f, t, step, y, scratch_full, k1, k2, k3, k4, tmp);
    rk4_step(f, t, 0.5 * step, y, scratch_half, k1, k2, k3, k4, tmp);
    rk4_step(f, t + 0.5 * step, 0.5 * step, scratch_half, scratch_half, k1, k2, k3, k4, tmp);
    const double err = err_norm(scratch_full, scratch_half);
    if (err > tol && step > 1e-9) {
      dt = 0.5 * step;
      continue;
    }
    // Richardson extrapolation of the two half steps.
    y = scratch_half + (1.0 / 15.0) * (scratch_half - scratch_full);
    t += step;
    ++accepted;
    const bool at_end = t >= t_final * (1.0 - 1e-15);
    if (accepted % stride == 0 || at_end) record(t, y);
    if (err < 0.02 * tol) dt = std::min(2.0 * step, dt_max);
  }
}

}  // namespace

StateSeries propagate_state(const HarmonicHamiltonian& h, const StateVector& psi0,
                            const PropagationConfig& cfg) {
  if (psi0.dim() != h.dim()) throw std::invalid_argument("propagate_state: dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > 1e-8) {
    throw std::invalid_argument("propagate_state: initial state is not normalized");
  }
  const StepPlan plan = plan_steps(cfg.dt_ps, cfg.t_final_ps, h.max_rate());
  const int stride = std::max(1, cfg.sample_stride);
  const Complex minus_i_over_hbar(0.0, -1.0 / kHbar);

  StateSeries out;
  Vector psi = psi0.v;
  Vector k1(h.dim()), k2(h.dim()), k3(h.dim()), k4(h.dim()), tmp(h.dim());

  auto record = [&](double t, const Vector& v) {
    out.times.push_back(t);
    out.states.push_back(v);
    out.norm_drift = std::max(out.norm_drift, std::abs(v.norm() - 1.0));
  };
  auto rhs = [&](double t, const Vector& y, Vector& dy) {
    h.apply(t, y, dy);
    dy *= minus_i_over_hbar;
  };
  record(0.0, psi);

  if (cfg.method == StepMethod::rk4_adaptive) {
    Vector full(h.dim()), half(h.dim());
    const double dt_max = h.max_rate() > 0 ? 0.1 / h.max_rate() : cfg.t_final_ps;
    adaptive_drive(
        rhs, [](const Vector& a, const Vector& b) { return (a - b).norm(); }, record, psi, full,
        half, k1, k2, k3, k4, tmp, cfg.t_final_ps, plan.dt, dt_max, cfg.error_tolerance, stride);
  } else {
    const double dt = plan.dt;
    Vector next(h.dim());
    for (long n = 0; n < plan.steps; ++n) {
      rk4_step(rhs, n * dt, dt, psi, next, k1, k2, k3, k4, tmp);
      psi.swap(next);
      if ((n + 1) % stride == 0 || n + 1 == plan.steps) record((n + 1) * dt, psi);
    }
  }
  if (out.norm_drift > 1e-6) {
    throw IntegrationError("propagate_state: norm drift " + std::to_string(out.norm_drift) +
                           " exceeds 1e-6; reduce dt");
  }
  return out;
}

namespace {

struct CompiledCollapse {
  sparse::Csr op;
  sparse::Csr number;  // op^dagger * op
  double rate;
};

class LindbladRhs {
 public:
  LindbladRhs(const HarmonicHamiltonian& h, const std::vector<CollapseOp>& collapse)
      : h_(h), half_(h.dim(), h.dim()), tmp_(h.dim(), h.dim()) {
    for (const auto& c : collapse) {
      if (c.rate < 0) throw std::invalid_argument("collapse rate must be nonnegative");
      if (c.rate == 0) continue;
      CompiledCollapse cc;
      cc.op = sparse::Csr::from_dense(c.op.matrix());
      cc.number = sparse::Csr::from_dense(c.op.matrix().adjoint() * c.op.matrix());
      cc.rate = c.rate;
      compiled_.push_back(std::move(cc));
    }
  }

  // The generator output is Hermitian for Hermitian rho, so accumulate the
  // "left half" M = -(i/hbar) H rho + sum_c (r/2)(C rho C^+ - C^+C rho)
  // and return M + M^+.
  void operator()(double t, const Matrix& rho, Matrix& out) {
    half_.setZero();
    h_.accumulate_product(t, rho, half_, Complex(0.0, -1.0 / kHbar));
    for (const auto& c : compiled_) {
      const double r = c.rate / kHbar;
      tmp_.setZero();
      c.op.left_apply(1.0, rho, tmp_);                 // tmp = C rho
      c.op.right_apply_dagger(0.5 * r, tmp_, half_);   // += (r/2) C rho C^+
      c.number.left_apply(-0.5 * r, rho, half_);       // -= (r/2) C^+C rho
    }
    out = half_;
    out += half_.adjoint();
  }

 private:
  const HarmonicHamiltonian& h_;
  std::vector<CompiledCollapse> compiled_;
  Matrix half_, tmp_;
};

}  // namespace

DensitySeries propagate_lindblad(const HarmonicHamiltonian& h,
                                 const std::vector<CollapseOp>& collapse,
                                 const DensityMatrix& rho0, const PropagationConfig& cfg,
                                 const DensityObserver& observer) {
  if (rho0.dim() != h.dim()) throw std::invalid_argument("propagate_lindblad: dimension mismatch");
  {
    const auto chk = hilbert::check_density(rho0);
    if (!chk.ok()) {
      throw std::invalid_argument("propagate_lindblad: initial density matrix is not physical");
    }
  }
  const StepPlan plan = plan_steps(cfg.dt_ps, cfg.t_final_ps, h.max_rate());
  const int stride = std::max(1, cfg.sample_stride);

  LindbladRhs rhs(h, collapse);
  const int dim = h.dim();
  Matrix rho = rho0.rho;
  Matrix k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim), tmp(dim, dim);

  DensitySeries out;
  long samples_seen = 0;
  long eig_stride = 1;  // fixed after we know the sample count
  const long expected_samples = plan.steps / stride + 2;
  eig_stride = std::max(1L, expected_samples / 24);

  auto check_and_record = [&](double t, const Matrix& m) {
    const double tr = std::abs(m.trace().real() - 1.0);
    const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
    out.diag.max_trace_drift = std::max(out.diag.max_trace_drift, tr);
    out.diag.max_hermiticity_drift = std::max(out.diag.max_hermiticity_drift, herm);
    double min_eig = 0.0;
    const bool do_eig = (samples_seen % eig_stride == 0);
    if (do_eig) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(Complex(0.5) * (m + m.adjoint()),
                                               Eigen::EigenvaluesOnly);
      min_eig = es.eigenvalues().minCoeff();
      out.diag.min_eigenvalue = std::min(out.diag.min_eigenvalue, min_eig);
    }
    ++samples_seen;
    if (tr > 1e-6 || herm > 1e-8 || (do_eig && min_eig < -1e-6)) {
      std::ostringstream msg;
      msg << "propagate_lindblad: physicality violated at t=" << t << " ps (trace drift " << tr
          << ", hermiticity drift " << herm << ", min eigenvalue " << min_eig << ")";
      throw IntegrationError(msg.str());
    }
    if (observer) {
      observer(t, m);
    } else {
      out.times.push_back(t);
      out.rhos.push_back(m);
    }
  };

  check_and_record(0.0, rho);
  auto rhs_fn = [&](double t, const Matrix& y, Matrix& dy) { rhs(t, y, dy); };
  if (cfg.method == StepMethod::rk4_adaptive) {
    Matrix full(dim, dim), half(dim, dim);
    const double dt_max = h.max_rate() > 0 ? 0.1 / h.max_rate() : cfg.t_final_ps;
    adaptive_drive(
        rhs_fn,
        [](const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); },
        check_and_record, rho, full, half, k1, k2, k3, k4, tmp, cfg.t_final_ps, plan.dt, dt_max,
        cfg.error_tolerance, stride);
  } else {
    const double dt = plan.dt;
    Matrix next(dim, dim);
    for (long n = 0; n < plan.steps; ++n) {
      rk4_step(rhs_fn, n * dt, dt, rho, next, k1, k2, k3, k4, tmp);
      rho.swap(next);
      if ((n + 1) % stride == 0 || n + 1 == plan.steps) check_and_record((n + 1) * dt, rho);
    }
  }
  if (observer && out.times.empty()) {
    out.times.push_back(cfg.t_final_ps);  // keep the endpoint time visible
  }
  return out;
}

}  // namespace ccgate::dynamics
