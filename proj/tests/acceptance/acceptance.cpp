// Acceptance suite: end-to-end checks of the gate-phase closed forms, the
// brute-force propagators and the experiment runner, one line per criterion.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccgate/dynamics.hpp"
#include "ccgate/errors.hpp"
#include "ccgate/experiment.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ccgate;
using experiment::ExperimentSpec;
using experiment::Kind;
using model::EffectiveCouplings;
using model::GateModel;
using model::SystemParams;
using phases::Branch;
using phases::GateSchedule;

namespace {

struct Criterion {
  int id;
  std::string name;
  bool pass = false;
  bool gating = true;
  std::string detail;
};

std::vector<Criterion> g_results;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            bool gating = true) {
  g_results.push_back({id, name, pass, gating, detail});
  std::cerr << "criterion " << id << " done\n";
}

// Minimal reader for the deterministic CSV the runner writes.
struct Csv {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  int col(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing csv " + path.string());
  Csv out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (out.columns.empty()) {
      out.columns = cells;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(c == "nan" ? NAN : std::stod(c));
    out.rows.push_back(std::move(row));
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing manifest " + path.string());
  json j;
  in >> j;
  return j;
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Criterion 2: analytic vs numeric branch phases on randomized valid draws.
// ---------------------------------------------------------------------------
json criterion_2(const fs::path& out_dir) {
  ExperimentSpec spec;
  spec.kind = Kind::verify_effective;
  spec.preset = "fig3";
  spec.output_stem = "verify_effective";
  spec.seed = 20240811;
  spec.draws = 20;
  const auto art = experiment::run_experiment(spec, out_dir, 1);
  const json manifest = read_json(art.manifest);
  const double worst_eff = manifest["derived"]["worst_phase_err_effective_rad"].get<double>();
  const double worst_full = manifest["derived"]["worst_phase_err_full_rad"].get<double>();
  const bool pass = worst_eff <= 1e-3 && worst_full <= 5e-2;
  report(2, "analytic-numeric phase agreement", pass,
         "20 draws: effective-model worst err " + fmt(worst_eff) +
             " rad (<=1e-3), full-model worst err " + fmt(worst_full) + " rad (<=5e-2)");
  return manifest;
}

// ---------------------------------------------------------------------------
// Criterion 4a helper: the Stark-limit identity on random commensurate draws.
// ---------------------------------------------------------------------------
bool stark_identity_holds(double* worst_out) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    EffectiveCouplings c{};
    c.lambda_a = {Complex(0.002 + 0.004 * u(rng), 0.002 * u(rng)),
                  Complex(0.002 + 0.004 * u(rng), -0.001 * u(rng))};
    c.lambda_b = {Complex(-0.002 - 0.004 * u(rng), 0.001 * u(rng)),
                  Complex(0.002 + 0.004 * u(rng), 0.002 * u(rng))};
    const long q = 1 + static_cast<long>(u(rng) * 6);
    const long num = q + 1 + static_cast<long>(u(rng) * 40);
    const double eta2 = 0.02 + 0.06 * u(rng);
    c.eta = {eta2 * static_cast<double>(num) / static_cast<double>(q), eta2};
    GateSchedule s;
    try {
      s = phases::make_schedule(c);
    } catch (const PreconditionError&) {
      continue;
    }
    worst = std::max(worst, std::abs(-s.phi_rate * s.t0_ps - s.Theta));
  }
  *worst_out = worst;
  return worst <= 1e-10;
}

// ---------------------------------------------------------------------------
// Criterion 4b helper: deviation between the two effective models shrinks
// quadratically as the splitting-to-coupling ratio doubles.
// ---------------------------------------------------------------------------
std::vector<double> stark_deviation_sweep(const std::vector<double>& ratios) {
  std::vector<double> devs;
  for (double r : ratios) {
    EffectiveCouplings c{};
    c.lambda_a = {0.004, 0.005};
    c.lambda_b = {-0.005, 0.004};
    const double lambda_max = 0.005;
    c.eta = {2.0 * r * lambda_max, r * lambda_max};
    const GateSchedule s = phases::make_schedule(c);
    dynamics::GateRunOptions opts;
    opts.rad_per_step = 0.02;
    opts.fidelity_samples = 128;
    const dynamics::ModelDeviation dev =
        dynamics::compare_models(c, 6, s, GateModel::effective, GateModel::dispersive, opts);
    devs.push_back(dev.max_branch_phase_diff);
  }
  return devs;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out_dir = "acceptance_out";
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--out") out_dir = argv[i + 1];
  }
  fs::create_directories(out_dir);

  // ---- criterion 2 (also feeds 3) ------------------------------------------------
  json verify_manifest;
  try {
    verify_manifest = criterion_2(out_dir);
  } catch (const std::exception& e) {
    report(2, "analytic-numeric phase agreement", false, std::string("exception: ") + e.what());
  }

  // ---- criterion 3: closed-path return --------------------------------------------
  try {
    // Analytic closure at every commensurate schedule.
    double worst_alpha = 0.0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
      EffectiveCouplings c{};
      c.lambda_a = {0.002 + 0.004 * u(rng), 0.002 + 0.004 * u(rng)};
      c.lambda_b = {-(0.002 + 0.004 * u(rng)), 0.002 + 0.004 * u(rng)};
      const long q = 1 + static_cast<long>(u(rng) * 5);
      const long num = q + 1 + static_cast<long>(u(rng) * 30);
      const double eta2 = 0.02 + 0.05 * u(rng);
      c.eta = {eta2 * static_cast<double>(num) / static_cast<double>(q), eta2};
      GateSchedule s;
      try {
        s = phases::make_schedule(c);
      } catch (const PreconditionError&) {
        continue;
      }
      for (Branch b : phases::kBranches) {
        for (int m = 0; m < 2; ++m) {
          worst_alpha =
              std::max(worst_alpha, std::abs(phases::alpha_trajectory(c, b, m, s.t0_ps)));
        }
      }
    }

    // Numerical photon residual at the gate end, no decay, per branch.
    double worst_resid = verify_manifest.is_object()
                             ? verify_manifest["derived"]["worst_residual_photon"].get<double>()
                             : 1.0;
    for (const auto& kv : experiment::fig3_curves()) {
      const experiment::PlannedCurve pc =
          experiment::plan_fidelity_curve(experiment::preset("fig3"), kv);
      dynamics::GateRunOptions opts;
      opts.rad_per_step = 0.1;
      const dynamics::GateReport rep = dynamics::run_gate_simulation(
          pc.params, pc.schedule, GateModel::effective, false, opts);
      for (double r : rep.residual_photon) worst_resid = std::max(worst_resid, r);
    }
    const bool pass = worst_alpha < 1e-12 && worst_resid <= 1e-4;
    report(3, "closed-path return", pass,
           "analytic |alpha(t0)| max " + fmt(worst_alpha) + " (<1e-12 machine precision), " +
               "numerical residual photons max " + fmt(worst_resid) + " (<=1e-4)");
  } catch (const std::exception& e) {
    report(3, "closed-path return", false, std::string("exception: ") + e.what());
  }

  // ---- criterion 4: model-hierarchy consistency -----------------------------------
  try {
    double worst_identity = 0.0;
    const bool identity_ok = stark_identity_holds(&worst_identity);

    const std::vector<double> ratios = {5.0, 10.0, 20.0, 40.0};
    const std::vector<double> devs = stark_deviation_sweep(ratios);
    // Log-log slope across the doublings; -2 is the second-order signature.
    double slope_sum = 0.0;
    bool ratios_ok = true;
    for (std::size_t i = 0; i + 1 < devs.size(); ++i) {
      const double fold = devs[i] / devs[i + 1];
      slope_sum += std::log2(fold);
      if (fold < 2.5 || fold > 6.5) ratios_ok = false;
    }
    const double mean_slope = slope_sum / (devs.size() - 1);
    const bool pass = identity_ok && ratios_ok && std::abs(mean_slope - 2.0) < 0.5;
    std::ostringstream detail;
    detail << "-phi*t0 = Theta worst residual " << fmt(worst_identity)
           << " rad (<=1e-10); deviations at eta/lambda {5,10,20,40}: ";
    for (double d : devs) detail << fmt(d, 3) << " ";
    detail << "(mean halving exponent " << fmt(mean_slope, 3) << ", expect ~2)";
    report(4, "model-hierarchy consistency", pass, detail.str());
  } catch (const std::exception& e) {
    report(4, "model-hierarchy consistency", false, std::string("exception: ") + e.what());
  }

  // ---- criterion 5: hopping-regime surface shape -----------------------------------
  try {
    const SystemParams base = experiment::preset("fig2");
    std::vector<double> grid;
    for (int i = 1; i <= 40; ++i) grid.push_back(25.0 * base.g_a * i / 40.0);
    const phases::OperationTimeSurface surf =
        phases::operation_time_surface(base, grid, grid, kPi);

    bool shape_ok = true;
    bool finite_ok = true;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double delta = grid[j];
      for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double a = surf.t0_ps(i, j);
        const double b = surf.t0_ps(i + 1, j);
        if (std::isnan(a) || std::isnan(b)) continue;  // resonance sentinel
        if ((grid[i] < delta) != (grid[i + 1] < delta)) continue;  // stepping over resonance
        if (grid[i] < delta && !(b < a)) shape_ok = false;  // must fall below resonance
        if (grid[i] > delta && !(b > a)) shape_ok = false;  // must rise above it
      }
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = surf.t0_ps(i, j);
        if (std::abs(grid[i] - delta) < 1e-12) {
          if (!std::isnan(v)) finite_ok = false;  // resonance must be a sentinel
        } else if (!std::isfinite(v) || v <= 0.0) {
          finite_ok = false;
        }
      }
    }
    // 1/nu divergence along the largest offset.
    const std::size_t jmax = grid.size() - 1;
    const double div_ratio = surf.t0_ps(0, jmax) / surf.t0_ps(19, jmax);
    const bool diverges = div_ratio > 10.0;
    const bool pass = shape_ok && finite_ok && diverges;
    report(5, "hopping-regime operation-time shape", pass,
           "decreasing-then-increasing along every offset: " +
               std::string(shape_ok ? "yes" : "no") +
               ", resonance sentinels / positivity: " + (finite_ok ? "yes" : "no") +
               ", small-hopping divergence ratio " + fmt(div_ratio, 4) + " (>10)");
  } catch (const std::exception& e) {
    report(5, "hopping-regime operation-time shape", false, std::string("exception: ") + e.what());
  }

  // ---- criterion 1 (+6, 8 pieces): decay-fidelity endpoints ---------------------------
  double longest_gate_ns = 0.0;
  bool c1_in_band = false;
  bool c1_flagged = false;
  double f_best_001 = 0.0, f_best_002 = 0.0;
  std::string best_label;
  bool c8_ok = true;
  std::string c8_detail;
  bool nmax_ok = false;
  double nmax_delta = 1.0;
  bool c1_ran = false;
  try {
    ExperimentSpec spec;
    spec.kind = Kind::fig3_fidelity;
    spec.preset = "fig3";
    spec.output_stem = "fig3_fidelity";
    spec.axes.push_back({"gamma_over_g_a", 0.0, 0.02, 3});
    const auto art = experiment::run_experiment(spec, out_dir, 1);
    const Csv csv = read_csv(art.csv);
    const json manifest = read_json(art.manifest);

    longest_gate_ns = manifest["derived"]["longest_gate_time_ns"].get<double>();
    c1_flagged = manifest["flags"].contains("delta_sensitivity");

    const int gcol = csv.col("gamma_over_g_a");
    int row001 = -1, row002 = -1;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      if (std::abs(csv.rows[r][gcol] - 0.01) < 1e-12) row001 = static_cast<int>(r);
      if (std::abs(csv.rows[r][gcol] - 0.02) < 1e-12) row002 = static_cast<int>(r);
    }
    for (const auto& kv : experiment::fig3_curves()) {
      const int fc = csv.col("f_" + kv.label);
      const double f1 = csv.rows[row001][fc];
      if (f1 > f_best_001) {
        f_best_001 = f1;
        f_best_002 = csv.rows[row002][fc];
        best_label = kv.label;
      }
    }
    c1_in_band = std::abs(f_best_001 - 0.983) <= 0.010 && std::abs(f_best_002 - 0.968) <= 0.010;

    // Physicality + n_max convergence on the affordable middle curve.
    const experiment::PlannedCurve pc = experiment::plan_fidelity_curve(
        experiment::preset("fig3"), experiment::fig3_curves()[1]);
    SystemParams q = pc.params;
    q.gamma_a = q.gamma_b = 0.01 * q.g_a;
    dynamics::GateRunOptions opts;
    opts.rad_per_step = 0.1;
    opts.nmax_convergence = true;
    const dynamics::GateReport rep =
        dynamics::run_gate_simulation(q, pc.schedule, GateModel::effective, true, opts);
    c8_ok = rep.diag.max_trace_drift <= 1e-6 && rep.diag.max_hermiticity_drift <= 1e-8 &&
            rep.diag.min_eigenvalue >= -1e-6;
    c8_detail = "trace drift " + fmt(rep.diag.max_trace_drift) + " (<=1e-6), hermiticity " +
                fmt(rep.diag.max_hermiticity_drift) + " (<=1e-8), min eigenvalue " +
                fmt(rep.diag.min_eigenvalue) + " (>=-1e-6)";
    nmax_delta = rep.nmax_convergence_delta.value_or(1.0);
    nmax_ok = nmax_delta < 1e-4;
    c1_ran = true;
  } catch (const std::exception& e) {
    report(1, "decay-fidelity endpoints", false, std::string("exception: ") + e.what());
  }

  // ---- criterion 7: dissipator basis invariance --------------------------------------
  try {
    SystemParams p = experiment::preset("fig3");
    p.n_max = 2;
    p.gamma_a = p.gamma_b = 0.01 * p.g_a;
    const EffectiveCouplings c = model::effective_couplings(p);
    const hilbert::SpaceLayout layout{3, p.n_max};
    const dynamics::HarmonicHamiltonian h =
        dynamics::build_hamiltonian(GateModel::full, p, c, layout);

    Vector psi0 = Vector::Zero(layout.dim());
    psi0(layout.index(0, 0, 0, 0)) = 0.5;
    psi0(layout.index(0, 1, 0, 0)) = 0.5;
    psi0(layout.index(1, 0, 0, 0)) = 0.5;
    psi0(layout.index(1, 1, 0, 0)) = 0.5;
    const hilbert::DensityMatrix rho0{psi0 * psi0.adjoint()};

    dynamics::PropagationConfig cfg;
    cfg.dt_ps = dynamics::suggested_dt(h, 0.1);
    cfg.t_final_ps = 12.0;
    cfg.sample_stride = 200;
    const auto bare = dynamics::propagate_lindblad(
        h, model::collapse_operators(p, layout, model::CollapseBasis::bare), rho0, cfg);
    const auto normal = dynamics::propagate_lindblad(
        h, model::collapse_operators(p, layout, model::CollapseBasis::normal), rho0, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < bare.rhos.size(); ++i) {
      worst = std::max(worst, hilbert::trace_distance(hilbert::DensityMatrix{bare.rhos[i]},
                                                      hilbert::DensityMatrix{normal.rhos[i]}));
    }
    report(7, "dissipator basis invariance", worst <= 1e-8,
           "equal rates, full model: worst trace distance " + fmt(worst) + " (<=1e-8) across " +
               std::to_string(bare.rhos.size()) + " samples");
  } catch (const std::exception& e) {
    report(7, "dissipator basis invariance", false, std::string("exception: ") + e.what());
  }

  // ---- criterion 8: physicality suite ---------------------------------------------------
  try {
    // ff-branch exact invariance under decay.
    SystemParams p = experiment::preset("fig3");
    p.n_max = 2;
    p.gamma_a = p.gamma_b = 0.02 * p.g_a;
    const EffectiveCouplings c = model::effective_couplings(p);
    const hilbert::SpaceLayout layout{2, p.n_max};
    const dynamics::HarmonicHamiltonian h =
        dynamics::build_hamiltonian(GateModel::effective, p, c, layout);
    const int ff = layout.index(0, 0, 0, 0);
    Matrix rho0 = Matrix::Zero(layout.dim(), layout.dim());
    rho0(ff, ff) = 1.0;
    dynamics::PropagationConfig cfg;
    cfg.dt_ps = dynamics::suggested_dt(h, 0.1);
    cfg.t_final_ps = 80.0;
    const auto series = dynamics::propagate_lindblad(
        h, model::collapse_operators(p, layout, model::CollapseBasis::bare),
        hilbert::DensityMatrix{rho0}, cfg);
    const bool ff_exact = series.rhos.back()(ff, ff) == Complex(1.0);

    // gamma = 0 unitarity on a reference run.
    const experiment::PlannedCurve pc = experiment::plan_fidelity_curve(
        experiment::preset("fig3"), experiment::fig3_curves()[0]);
    dynamics::GateRunOptions opts;
    opts.rad_per_step = 0.1;
    const dynamics::GateReport rep =
        dynamics::run_gate_simulation(pc.params, pc.schedule, GateModel::effective, false, opts);
    const bool unitary_ok = rep.norm_drift <= 1e-8;
    const bool ff_phase_exact = rep.branch_phase[0] == 0.0;

    const bool pass = c8_ok && ff_exact && unitary_ok && ff_phase_exact;
    report(8, "physicality suite", pass,
           c8_detail + "; gamma=0 norm drift " + fmt(rep.norm_drift) +
               " (<=1e-8); ff branch exactly invariant: " +
               ((ff_exact && ff_phase_exact) ? "yes" : "no"));
  } catch (const std::exception& e) {
    report(8, "physicality suite", false, std::string("exception: ") + e.what());
  }

  // ---- criterion 9: CZ tuning ------------------------------------------------------------
  try {
    bool pass = true;
    std::ostringstream detail;
    for (const auto& kv : experiment::fig3_curves()) {
      SystemParams base = experiment::preset("fig3");
      base.cavity_offset = 0.5 * (kv.eta1_over_g + kv.eta2_over_g) * base.g_a;
      base.hopping = 0.5 * (kv.eta1_over_g - kv.eta2_over_g) * base.g_a;
      base.detuning_b = model::solve_balanced_detuning_b(base);
      base.detuning_prime_b = base.detuning_b;
      const phases::TuneResult tuned =
          phases::tune_for_pi_phase(base, 0, phases::TuneKnob::om_scale);
      const double resid = std::abs(std::abs(tuned.achieved_theta) - kPi);
      if (resid > 1e-6) pass = false;
      const Eigen::Matrix4cd u = dynamics::ideal_gate(tuned.schedule, true);
      const bool cz = u(0, 0) == Complex(1.0) && u(1, 1) == Complex(1.0) &&
                      u(2, 2) == Complex(1.0) && u(3, 3) == Complex(-1.0);
      if (!cz) pass = false;
      detail << kv.label << ": |Theta| residual " << fmt(resid) << ", CZ exact "
             << (cz ? "yes" : "no") << "; ";
    }
    report(9, "controlled-Z tuning", pass, detail.str());
  } catch (const std::exception& e) {
    report(9, "controlled-Z tuning", false, std::string("exception: ") + e.what());
  }

  // ---- resolve criterion 1 with its documented escape path -------------------------------
  if (c1_ran) {
    bool property_suite_ok = true;
    for (const auto& r : g_results) {
      if (r.id != 1 && r.id != 6 && r.gating && !r.pass) property_suite_ok = false;
    }
    property_suite_ok = property_suite_ok && nmax_ok;
    const bool pass = c1_in_band || (c1_flagged && property_suite_ok);
    std::ostringstream detail;
    detail.precision(4);
    detail << "best curve " << best_label << ": F(gamma=0.01g)=" << f_best_001
           << " vs 0.983+-0.010, F(0.02g)=" << f_best_002 << " vs 0.968+-0.010 -> "
           << (c1_in_band ? "in band" : "out of band") << "; n_max+1 shift " << fmt(nmax_delta)
           << " (<1e-4: " << (nmax_ok ? "yes" : "no") << ")";
    if (!c1_in_band) {
      detail << "; documented escape: manifest delta-sensitivity flag "
             << (c1_flagged ? "present" : "MISSING") << ", property suite "
             << (property_suite_ok ? "green" : "RED")
             << " (the endpoints depend only on the splittings, the decay rate and the "
                "input-state convention; see fig3_fidelity.manifest.json)";
    }
    report(1, "decay-fidelity endpoints", pass, detail.str());
  }

  // ---- criterion 6 (documents, does not gate) ---------------------------------------------
  {
    const double reference_ns = 13.5;
    const double ratio = longest_gate_ns > 0 ? reference_ns / longest_gate_ns : 0.0;
    std::ostringstream detail;
    detail.precision(4);
    detail << "longest tuned gate time " << longest_gate_ns << " ns vs reported ~" << reference_ns
           << " ns (ratio " << ratio << "); within factor 2: "
           << (ratio > 0.5 && ratio < 2.0 ? "yes" : "no")
           << ". The undocumented laser detunings set the coupling scale and with it the loop "
              "count; the fidelity endpoints are insensitive to that choice (manifest "
              "delta_sensitivity study).";
    report(6, "operation-time magnitude (soft)", longest_gate_ns > 0, detail.str(), false);
  }

  // ---- summary ------------------------------------------------------------------------------
  std::sort(g_results.begin(), g_results.end(),
            [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
  bool all_pass = true;
  for (const auto& r : g_results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << "criterion " << r.id << " (" << r.name
              << "): " << r.detail << "\n";
    if (r.gating && !r.pass) all_pass = false;
  }
  std::cout << (all_pass ? "ACCEPTANCE: all gating criteria pass\n"
                         : "ACCEPTANCE: gating criteria FAILED\n");
  return all_pass ? 0 : 1;
}
