#include "ccgate/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ccgate/dynamics.hpp"
#include "ccgate/errors.hpp"

namespace ccgate::experiment {

using json = nlohmann::ordered_json;
using model::EffectiveCouplings;
using model::GateModel;
using phases::GateSchedule;

namespace {

// ---- formatting -----------------------------------------------------------

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16g", v);
  return buf;
}

double angle_diff(double a, double b) { return std::arg(std::polar(1.0, a - b)); }

// ---- parameter field registry ----------------------------------------------

struct FieldDef {
  const char* name;
  const char* unit;
  std::function<double(const SystemParams&)> get;
  std::function<void(SystemParams&, double)> set;
};

const std::vector<FieldDef>& field_registry() {
  static const std::vector<FieldDef> fields = {
      {"g_a", "meV", [](const SystemParams& p) { return p.g_a; },
       [](SystemParams& p, double v) { p.g_a = v; }},
      {"g_b", "meV", [](const SystemParams& p) { return p.g_b; },
       [](SystemParams& p, double v) { p.g_b = v; }},
      {"rabi_a", "meV", [](const SystemParams& p) { return p.rabi_a.real(); },
       [](SystemParams& p, double v) { p.rabi_a = v; }},
      {"rabi_b", "meV", [](const SystemParams& p) { return p.rabi_b.real(); },
       [](SystemParams& p, double v) { p.rabi_b = v; }},
      {"rabi_prime_a", "meV", [](const SystemParams& p) { return p.rabi_prime_a.real(); },
       [](SystemParams& p, double v) { p.rabi_prime_a = v; }},
      {"rabi_prime_b", "meV", [](const SystemParams& p) { return p.rabi_prime_b.real(); },
       [](SystemParams& p, double v) { p.rabi_prime_b = v; }},
      {"detuning_a", "meV", [](const SystemParams& p) { return p.detuning_a; },
       [](SystemParams& p, double v) { p.detuning_a = v; }},
      {"detuning_b", "meV", [](const SystemParams& p) { return p.detuning_b; },
       [](SystemParams& p, double v) { p.detuning_b = v; }},
      {"detuning_prime_a", "meV", [](const SystemParams& p) { return p.detuning_prime_a; },
       [](SystemParams& p, double v) { p.detuning_prime_a = v; }},
      {"detuning_prime_b", "meV", [](const SystemParams& p) { return p.detuning_prime_b; },
       [](SystemParams& p, double v) { p.detuning_prime_b = v; }},
      {"cavity_offset", "meV", [](const SystemParams& p) { return p.cavity_offset; },
       [](SystemParams& p, double v) { p.cavity_offset = v; }},
      {"hopping", "meV", [](const SystemParams& p) { return p.hopping; },
       [](SystemParams& p, double v) { p.hopping = v; }},
      {"gamma_a", "meV", [](const SystemParams& p) { return p.gamma_a; },
       [](SystemParams& p, double v) { p.gamma_a = v; }},
      {"gamma_b", "meV", [](const SystemParams& p) { return p.gamma_b; },
       [](SystemParams& p, double v) { p.gamma_b = v; }},
      {"n_max", "", [](const SystemParams& p) { return static_cast<double>(p.n_max); },
       [](SystemParams& p, double v) { p.n_max = static_cast<int>(std::lround(v)); }},
      // Derived knobs.
      {"gamma_over_g_a", "",
       [](const SystemParams& p) { return p.g_a != 0.0 ? p.gamma_a / p.g_a : 0.0; },
       [](SystemParams& p, double v) { p.gamma_a = p.gamma_b = v * p.g_a; }},
      {"rabi_scale", "",
       [](const SystemParams&) { return 1.0; },
       [](SystemParams& p, double v) {
         p.rabi_a *= v;
         p.rabi_b *= v;
         p.rabi_prime_a *= v;
         p.rabi_prime_b *= v;
       }},
  };
  return fields;
}

const FieldDef* find_field(const std::string& name) {
  for (const auto& f : field_registry()) {
    if (name == f.name) return &f;
  }
  return nullptr;
}

void apply_overrides(SystemParams& p, const std::map<std::string, double>& overrides) {
  for (const auto& [name, value] : overrides) {
    const FieldDef* f = find_field(name);
    if (!f) throw ConfigError("unknown parameter '" + name + "'");
    f->set(p, value);
  }
}

// ---- tiny worker pool --------------------------------------------------------

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

// ---- spec parsing ----------------------------------------------------------------

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::phase_report: return "phase_report";
    case Kind::fig2_surface: return "fig2_surface";
    case Kind::fig3_fidelity: return "fig3_fidelity";
    case Kind::verify_effective: return "verify_effective";
    case Kind::tune_pi: return "tune_pi";
    case Kind::convergence: return "convergence";
  }
  return "?";
}

namespace {

Kind parse_kind(const std::string& s) {
  for (Kind k : {Kind::phase_report, Kind::fig2_surface, Kind::fig3_fidelity,
                 Kind::verify_effective, Kind::tune_pi, Kind::convergence}) {
    if (s == kind_name(k)) return k;
  }
  throw ConfigError("unknown experiment kind '" + s + "'");
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_number(const std::string& s, int line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line_no) + ": expected a number, got '" + s + "'");
  }
}

}  // namespace

ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin) {
  ExperimentSpec spec;
  bool have_kind = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;

    if (tokens.size() == 3 && tokens[1] == "=") {
      const std::string& key = tokens[0];
      const std::string& value = tokens[2];
      if (key == "kind") {
        spec.kind = parse_kind(value);
        have_kind = true;
      } else if (key == "preset") {
        spec.preset = value;
      } else if (key == "out") {
        spec.output_stem = value;
      } else if (key == "seed") {
        spec.seed = static_cast<std::uint64_t>(parse_number(value, line_no));
      } else if (key == "draws") {
        spec.draws = static_cast<int>(parse_number(value, line_no));
      } else if (key == "theta_target") {
        spec.theta_target = parse_number(value, line_no);
      } else if (key == "worst_case") {
        if (value == "on") {
          spec.worst_case_over_basis = true;
        } else if (value == "off") {
          spec.worst_case_over_basis = false;
        } else {
          throw ConfigError("line " + std::to_string(line_no) + ": worst_case must be on|off");
        }
      } else {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
      continue;
    }
    if (tokens[0] == "set" && tokens.size() == 3) {
      if (!find_field(tokens[1])) {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown parameter '" + tokens[1] +
                          "'");
      }
      spec.overrides[tokens[1]] = parse_number(tokens[2], line_no);
      continue;
    }
    if (tokens[0] == "sweep" && tokens.size() == 5) {
      SweepAxis axis;
      axis.name = tokens[1];
      if (!find_field(axis.name)) {
        throw ConfigError("line " + std::to_string(line_no) + ": unknown sweep axis '" +
                          axis.name + "'");
      }
      axis.min = parse_number(tokens[2], line_no);
      axis.max = parse_number(tokens[3], line_no);
      axis.points = static_cast<int>(parse_number(tokens[4], line_no));
      if (axis.points < 2) {
        throw ConfigError("line " + std::to_string(line_no) + ": sweep needs at least 2 points");
      }
      spec.axes.push_back(axis);
      continue;
    }
    throw ConfigError(origin + " line " + std::to_string(line_no) + ": cannot parse '" + line +
                      "'");
  }
  if (!have_kind) throw ConfigError(origin + ": missing required 'kind'");
  return spec;
}

ExperimentSpec parse_spec_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open spec file " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_spec_text(buffer.str(), file.string());
}

// ---- result tables ------------------------------------------------------------------

void ResultTable::add_provenance(const std::string& key, const std::string& value) {
  provenance.emplace_back(key, value);
}

int ResultTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

ResultTable report_units(const ResultTable& t) {
  ResultTable out = t;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (t.columns[i].unit == "ps") {
      out.columns.push_back({t.columns[i].name + "_ns", "ns"});
      for (std::size_t r = 0; r < out.rows.size(); ++r) out.rows[r].push_back(t.rows[r][i] / 1e3);
    } else if (t.columns[i].unit == "meV") {
      out.columns.push_back({t.columns[i].name + "_rad_ps", "rad/ps"});
      for (std::size_t r = 0; r < out.rows.size(); ++r) {
        out.rows[r].push_back(angular_rate(t.rows[r][i]));
      }
    }
  }
  return out;
}

void write_csv(const ResultTable& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# ccgate-csv v1\n";
  for (const auto& [k, v] : t.provenance) out << "# " << k << ": " << v << "\n";
  for (const auto& c : t.columns) {
    out << "# column " << c.name << (c.unit.empty() ? "" : " [" + c.unit + "]") << "\n";
  }
  for (const auto& note : t.sentinel_notes) out << "# sentinel " << note << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    out << t.columns[i].name << (i + 1 < t.columns.size() ? "," : "\n");
  }
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << fmt_double(row[i]) << (i + 1 < row.size() ? "," : "\n");
    }
  }
}

// ---- curve planning --------------------------------------------------------------------

PlannedCurve plan_fidelity_curve(SystemParams base, const FidelityCurve& kv) {
  PlannedCurve out;
  out.curve = kv;
  base.cavity_offset = 0.5 * (kv.eta1_over_g + kv.eta2_over_g) * base.g_a;
  base.hopping = 0.5 * (kv.eta1_over_g - kv.eta2_over_g) * base.g_a;
  base.detuning_b = model::solve_balanced_detuning_b(base);
  base.detuning_prime_b = base.detuning_b;
  const phases::TuneResult tuned = phases::tune_for_pi_phase(base, 0, phases::TuneKnob::om_scale);
  out.params = tuned.params;
  out.schedule = tuned.schedule;
  out.om_scale = tuned.knob_scale;
  return out;
}

// ---- manifest helpers ---------------------------------------------------------------------

namespace {

json params_json(const SystemParams& p) {
  json j;
  for (const auto& f : field_registry()) {
    if (std::string(f.name) == "rabi_scale") continue;  // write-only knob
    json entry;
    entry["value"] = f.get(p);
    if (f.unit[0] != '\0') entry["unit"] = f.unit;
    j[f.name] = entry;
  }
  j["rabi_a_imag"] = {{"value", p.rabi_a.imag()}, {"unit", "meV"}};
  j["rabi_b_imag"] = {{"value", p.rabi_b.imag()}, {"unit", "meV"}};
  return j;
}

json validity_json(const SystemParams& p) {
  const model::ValidityReport v = model::check_validity(p);
  json j;
  j["stark_cancellation"] = v.stark_cancellation;
  j["large_detuning"] = v.large_detuning;
  j["drive_dominates"] = v.drive_dominates;
  j["notes"] = v.notes;
  return j;
}

json schedule_json(const GateSchedule& s) {
  json j;
  j["t0_ps"] = s.t0_ps;
  j["k1"] = s.k1;
  j["k2"] = s.k2;
  j["loops"] = s.loops;
  j["gate_time_ps"] = s.gate_time_ps();
  j["gate_time_ns"] = s.gate_time_ps() / 1e3;
  j["Phi_fg_rad"] = s.Phi_fg;
  j["Phi_gf_rad"] = s.Phi_gf;
  j["Theta_rad"] = s.Theta;
  j["total_Theta_rad"] = s.total_theta();
  j["phi_fg_rate_rad_ps"] = s.phi_fg_rate;
  j["phi_gf_rate_rad_ps"] = s.phi_gf_rate;
  j["phi_rate_rad_ps"] = s.phi_rate;
  j["commensuration_residual"] = s.commensuration_residual;
  return j;
}

struct ManifestBuilder {
  json j;
  ManifestBuilder(const ExperimentSpec& spec, const SystemParams& params) {
    j["format"] = "ccgate-manifest-v1";
    j["tool_version"] = kVersion;
    j["kind"] = kind_name(spec.kind);
    j["preset"] = spec.preset.empty() ? "(none)" : spec.preset;
    j["seed"] = spec.seed;
    json overrides = json::object();
    for (const auto& [k, v] : spec.overrides) overrides[k] = v;
    j["overrides"] = overrides;
    j["params"] = params_json(params);
    j["validity"] = validity_json(params);
    j["tolerances"] = {
        {"commensuration_rel", 1e-9},       {"max_k", 512},
        {"pi_tuning_rad", 1e-6},            {"trace_drift", 1e-6},
        {"hermiticity_drift", 1e-8},        {"eigenvalue_floor", -1e-6},
        {"balance_rel", 1e-6},
    };
  }
  void write(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
  }
};

SystemParams resolve_params(const ExperimentSpec& spec) {
  SystemParams p = spec.preset.empty() ? SystemParams{} : preset(spec.preset);
  apply_overrides(p, spec.overrides);
  return p;
}

std::vector<double> axis_values(const SweepAxis& a) {
  std::vector<double> v(a.points);
  for (int i = 0; i < a.points; ++i) {
    v[i] = a.min + (a.max - a.min) * static_cast<double>(i) / (a.points - 1);
  }
  return v;
}

const SweepAxis* find_axis(const ExperimentSpec& spec, const std::string& name) {
  for (const auto& a : spec.axes) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

// ---- kind runners ------------------------------------------------------------------

ResultTable run_phase_report(const ExperimentSpec& spec, const SystemParams& p,
                             ManifestBuilder& mb) {
  const EffectiveCouplings c = model::effective_couplings(p);
  const GateSchedule s = phases::make_schedule(c);

  ResultTable t;
  auto add = [&](const std::string& name, const std::string& unit, double v) {
    t.columns.push_back({name, unit});
    if (t.rows.empty()) t.rows.emplace_back();
    t.rows[0].push_back(v);
  };
  add("eta1", "meV", c.eta[0]);
  add("eta2", "meV", c.eta[1]);
  for (int m = 0; m < 2; ++m) {
    add("lambda_a" + std::to_string(m + 1) + "_re", "meV", c.lambda_a[m].real());
    add("lambda_a" + std::to_string(m + 1) + "_im", "meV", c.lambda_a[m].imag());
    add("lambda_b" + std::to_string(m + 1) + "_re", "meV", c.lambda_b[m].real());
    add("lambda_b" + std::to_string(m + 1) + "_im", "meV", c.lambda_b[m].imag());
    add("vartheta" + std::to_string(m + 1), "rad", c.vartheta(m));
    add("mu" + std::to_string(m + 1), "meV", c.mu(m));
  }
  add("balance_imbalance", "", c.balance_imbalance());
  add("t0", "ps", s.t0_ps);
  add("k1", "", static_cast<double>(s.k1));
  add("k2", "", static_cast<double>(s.k2));
  add("Phi_fg", "rad", s.Phi_fg);
  add("Phi_gf", "rad", s.Phi_gf);
  add("Theta", "rad", s.Theta);
  add("phi_rate", "rad/ps", s.phi_rate);
  add("stark_identity_residual", "rad", std::abs(-s.phi_rate * s.t0_ps - s.Theta));

  double theta_eq_balanced = std::numeric_limits<double>::quiet_NaN();
  try {
    theta_eq_balanced = phases::theta_simplified(c, s.t0_ps, 1e-6);
  } catch (const PreconditionError&) {
    t.sentinel_notes.push_back("balanced-coupling shortcut skipped: pair magnitudes unbalanced");
  }
  add("theta_balanced_form", "rad", theta_eq_balanced);

  double alpha_closure = 0.0;
  for (phases::Branch b : phases::kBranches) {
    for (int m = 0; m < 2; ++m) {
      alpha_closure = std::max(alpha_closure, std::abs(phases::alpha_trajectory(c, b, m, s.t0_ps)));
    }
  }
  add("alpha_closure_residual", "", alpha_closure);

  const double gamma = std::max(p.gamma_a, p.gamma_b);
  const phases::DecayTimeEstimate dt_est = phases::effective_decay_time(c, gamma);
  add("decay_time_energy_form", "meV", dt_est.energy_form_mev);
  add("decay_time_consistent", "ps", dt_est.consistent_ps);
  mb.j["derived"]["schedule"] = schedule_json(s);
  mb.j["flags"]["decay_time_dimensional_inconsistency"] =
      "the energy-form decay figure of merit gamma*eta2^2/max|lambda|^2 carries meV, not time; "
      "the dimensionally consistent hbar*eta2^2/(gamma*max|lambda|^2) is reported alongside";
  (void)spec;
  return t;
}

ResultTable run_fig2_surface(const ExperimentSpec& spec, const SystemParams& p,
                             ManifestBuilder& mb, int threads) {
  SweepAxis nu_axis{"hopping", 0.625 * p.g_a, 25.0 * p.g_a, 40};
  SweepAxis delta_axis{"cavity_offset", 0.625 * p.g_a, 25.0 * p.g_a, 40};
  if (const SweepAxis* a = find_axis(spec, "hopping")) nu_axis = *a;
  if (const SweepAxis* a = find_axis(spec, "cavity_offset")) delta_axis = *a;
  const std::vector<double> nus = axis_values(nu_axis);
  const std::vector<double> deltas = axis_values(delta_axis);

  // The closed form is cheap; parallelism is not needed here.
  (void)threads;
  const phases::OperationTimeSurface surf =
      phases::operation_time_surface(p, nus, deltas, spec.theta_target);

  ResultTable t;
  t.columns = {{"nu", "meV"}, {"delta", "meV"}, {"nu_over_g_a", ""}, {"delta_over_g_a", ""},
               {"t0", "ps"},  {"resonance_sentinel", ""}};
  for (std::size_t i = 0; i < nus.size(); ++i) {
    for (std::size_t j = 0; j < deltas.size(); ++j) {
      const double t0 = surf.t0_ps(i, j);
      t.rows.push_back({nus[i], deltas[j], nus[i] / p.g_a, deltas[j] / p.g_a, t0,
                        std::isnan(t0) ? 1.0 : 0.0});
    }
  }
  t.sentinel_notes = surf.sentinel_notes;
  mb.j["derived"]["theta_target_rad"] = spec.theta_target;
  mb.j["derived"]["grid"] = {{"nu_points", nus.size()}, {"delta_points", deltas.size()}};
  mb.j["derived"]["sentinel_count"] = surf.sentinel_notes.size();
  return report_units(t);
}

json delta_sensitivity_flag(const SystemParams& base, double gamma_over_g) {
  // The exposure exponents depend on the detunings only through the tuned
  // couplings; rescaling detuning_a and re-balancing/re-tuning reproduces the
  // same predicted fidelity up to loop-count rounding.
  json scan = json::array();
  for (double scale : {0.5, 1.0, 2.0}) {
    SystemParams q = base;
    q.detuning_a *= scale;
    q.detuning_prime_a = q.detuning_a;
    q.detuning_b = model::solve_balanced_detuning_b(q);
    q.detuning_prime_b = q.detuning_b;
    const phases::TuneResult tuned = phases::tune_for_pi_phase(q, 0, phases::TuneKnob::om_scale);
    const EffectiveCouplings c = model::effective_couplings(tuned.params);
    const phases::ExposurePrediction pred = phases::decay_exposure_prediction(
        c, gamma_over_g * q.g_a, tuned.schedule.gate_time_ps());
    scan.push_back({{"detuning_a_scale", scale},
                    {"gate_time_ns", tuned.schedule.gate_time_ps() / 1e3},
                    {"loops", tuned.schedule.loops},
                    {"predicted_fidelity", pred.predicted_fidelity}});
  }
  json flag;
  flag["study"] = scan;
  flag["note"] =
      "final fidelity is set by (eta1, eta2, nu, gamma) and the input-state convention; the "
      "undocumented detunings rescale couplings and times but cancel out of the decay exposure, "
      "so detuning defaults cannot move the fidelity endpoints materially";
  return flag;
}

ResultTable run_fig3_fidelity(const ExperimentSpec& spec, const SystemParams& p,
                              ManifestBuilder& mb, int threads) {
  SweepAxis gamma_axis{"gamma_over_g_a", 0.0, 0.02, 9};
  if (const SweepAxis* a = find_axis(spec, "gamma_over_g_a")) gamma_axis = *a;
  const std::vector<double> gammas = axis_values(gamma_axis);

  const std::vector<FidelityCurve> curves = fig3_curves();
  std::vector<PlannedCurve> planned;
  planned.reserve(curves.size());
  for (const auto& kv : curves) planned.push_back(plan_fidelity_curve(p, kv));

  json curve_info = json::array();
  for (const auto& pc : planned) {
    const EffectiveCouplings c = model::effective_couplings(pc.params);
    json ci;
    ci["label"] = pc.curve.label;
    ci["eta1_over_g_a"] = pc.curve.eta1_over_g;
    ci["eta2_over_g_a"] = pc.curve.eta2_over_g;
    ci["detuning_b_balanced"] = pc.params.detuning_b;
    ci["om_scale"] = pc.om_scale;
    ci["schedule"] = schedule_json(pc.schedule);
    const phases::DecayTimeEstimate est = phases::effective_decay_time(c, 0.01 * p.g_a);
    ci["decay_time_consistent_ps_at_gamma_0p01g"] = est.consistent_ps;
    curve_info.push_back(ci);
  }

  struct Cell {
    double f = 1.0;
    double predicted = 1.0;
    double worst = 1.0;
  };
  std::vector<std::vector<Cell>> cells(curves.size(),
                                       std::vector<Cell>(gammas.size()));

  std::vector<std::pair<int, int>> jobs;
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
      jobs.emplace_back(static_cast<int>(ci), static_cast<int>(gi));
    }
  }
  parallel_for(static_cast<int>(jobs.size()), threads, [&](int j) {
    const auto [ci, gi] = jobs[j];
    const PlannedCurve& pc = planned[ci];
    const double gamma = gammas[gi] * pc.params.g_a;
    const EffectiveCouplings c = model::effective_couplings(pc.params);
    Cell& cell = cells[ci][gi];
    cell.predicted =
        phases::decay_exposure_prediction(c, gamma, pc.schedule.gate_time_ps()).predicted_fidelity;
    if (gamma <= 0.0) {
      cell.f = 1.0;  // reference equals itself
      return;
    }
    SystemParams q = pc.params;
    q.gamma_a = q.gamma_b = gamma;
    dynamics::GateRunOptions opts;
    opts.rad_per_step = 0.1;  // correlated reference cancels the step-phase error in F
    opts.worst_case_over_basis = spec.worst_case_over_basis;
    const dynamics::GateReport report =
        dynamics::run_gate_simulation(q, pc.schedule, GateModel::effective, true, opts);
    cell.f = report.final_fidelity;
    if (report.worst_basis_fidelity) cell.worst = *report.worst_basis_fidelity;
  });

  ResultTable t;
  t.columns.push_back({"gamma_over_g_a", ""});
  for (const auto& pc : planned) t.columns.push_back({"f_" + pc.curve.label, ""});
  for (const auto& pc : planned) t.columns.push_back({"pred_" + pc.curve.label, ""});
  if (spec.worst_case_over_basis) {
    for (const auto& pc : planned) t.columns.push_back({"worstf_" + pc.curve.label, ""});
  }
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    std::vector<double> row{gammas[gi]};
    for (std::size_t ci = 0; ci < curves.size(); ++ci) row.push_back(cells[ci][gi].f);
    for (std::size_t ci = 0; ci < curves.size(); ++ci) row.push_back(cells[ci][gi].predicted);
    if (spec.worst_case_over_basis) {
      for (std::size_t ci = 0; ci < curves.size(); ++ci) row.push_back(cells[ci][gi].worst);
    }
    t.rows.push_back(std::move(row));
  }

  double longest_ns = 0.0;
  for (const auto& pc : planned) longest_ns = std::max(longest_ns, pc.schedule.gate_time_ps() / 1e3);
  mb.j["derived"]["curves"] = curve_info;
  mb.j["derived"]["longest_gate_time_ns"] = longest_ns;
  mb.j["flags"]["delta_sensitivity"] = delta_sensitivity_flag(planned.back().params, 0.01);
  mb.j["flags"]["fidelity_convention"] =
      "fidelity uses the equal-superposition input over all four logical branches and is reported "
      "at the tuned pi-gate time; per-basis worst cases are available via worst_case = on";
  return t;
}

ResultTable run_verify_effective(const ExperimentSpec& spec, const SystemParams& base,
                                 ManifestBuilder& mb, int threads) {
  const int draws = std::max(1, spec.draws);

  struct DrawResult {
    double g_a, g_b, eta1, eta2;
    double k1, k2, t0;
    double err_effective = std::numeric_limits<double>::quiet_NaN();
    double resid_photon = std::numeric_limits<double>::quiet_NaN();
    double err_full = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<DrawResult> results(draws);

  // Deterministic per-draw substreams regardless of thread count.
  parallel_for(draws, threads, [&](int d) {
    std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + d + 1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    SystemParams p = base;
    phases::GateSchedule sched;
    EffectiveCouplings c{};
    for (int attempt = 0;; ++attempt) {
      if (attempt > 200) throw PreconditionError("verify_effective: draw generation stalled");
      const long q = 1 + static_cast<long>(uni(rng) * 5.0);
      const long num = q + 1 + static_cast<long>(uni(rng) * 7.0 * q);
      if (std::gcd(num, q) != 1) continue;
      const double eta2 = 0.02 + 0.04 * uni(rng);
      const double eta1 = eta2 * static_cast<double>(num) / static_cast<double>(q);
      if (eta1 > 0.5) continue;

      p = base;
      p.g_a = 0.05 + 0.1 * uni(rng);
      p.g_b = p.g_a * (0.85 + 0.3 * uni(rng));
      p.rabi_a = 10.0 * p.g_a;
      p.rabi_b = p.g_a * p.rabi_a.real() / p.g_b;
      p.rabi_prime_a = p.rabi_a;
      p.rabi_prime_b = p.rabi_b;
      p.detuning_a = (110.0 + 30.0 * uni(rng)) * p.g_a;
      p.detuning_prime_a = p.detuning_a;
      p.cavity_offset = 0.5 * (eta1 + eta2);
      p.hopping = 0.5 * (eta1 - eta2);
      try {
        p.detuning_b = model::solve_balanced_detuning_b(p);
      } catch (const PreconditionError&) {
        continue;
      }
      p.detuning_prime_b = p.detuning_b;
      if (!model::check_validity(p).all()) continue;

      c = model::effective_couplings(p);
      auto max_displacement = [](const EffectiveCouplings& cc) {
        double amax = 0.0;
        for (int m = 0; m < 2; ++m) {
          amax = std::max(amax, 2.0 * (std::abs(cc.lambda_a[m]) + std::abs(cc.lambda_b[m])) /
                                    std::abs(cc.eta[m]));
        }
        return amax;
      };
      const double amax = max_displacement(c);
      if (amax > 0.35) {
        const double s = 0.3 / amax;
        if (s < 0.55) continue;  // would break the drive-dominates margin
        p.rabi_a *= s;
        p.rabi_b *= s;
        p.rabi_prime_a *= s;
        p.rabi_prime_b *= s;
        if (!model::check_validity(p).all()) continue;
        c = model::effective_couplings(p);
      }
      // The pinned-regime variant used for the full-model check must respect
      // the same truncation budget.
      {
        SystemParams pinned = p;
        pinned.detuning_a = 100.0 * pinned.g_a;
        pinned.detuning_prime_a = pinned.detuning_a;
        pinned.detuning_b = pinned.detuning_a;
        pinned.detuning_prime_b = pinned.detuning_a;
        pinned.rabi_a = 10.0 * pinned.g_a;
        pinned.rabi_prime_a = pinned.rabi_a;
        pinned.rabi_b = pinned.rabi_a;
        pinned.rabi_prime_b = pinned.rabi_a;
        if (max_displacement(model::effective_couplings(pinned)) > 0.35) continue;
      }
      try {
        sched = phases::make_schedule(c);
      } catch (const PreconditionError&) {
        continue;
      }
      if (sched.t0_ps > 600.0) continue;
      break;
    }

    DrawResult& r = results[d];
    r.g_a = p.g_a;
    r.g_b = p.g_b;
    r.eta1 = c.eta[0];
    r.eta2 = c.eta[1];
    r.k1 = static_cast<double>(sched.k1);
    r.k2 = static_cast<double>(sched.k2);
    r.t0 = sched.t0_ps;

    const std::array<double, 4> expected = {0.0, sched.Phi_fg, sched.Phi_gf,
                                            sched.Phi_fg + sched.Phi_gf + sched.Theta};
    {
      dynamics::GateRunOptions opts;
      opts.rad_per_step = 0.02;
      const dynamics::GateReport rep =
          dynamics::run_gate_simulation(p, sched, GateModel::effective, false, opts);
      double err = 0.0, resid = 0.0;
      for (int b = 0; b < 4; ++b) {
        err = std::max(err, std::abs(angle_diff(rep.branch_phase[b], expected[b])));
        resid = std::max(resid, rep.residual_photon[b]);
      }
      r.err_effective = err;
      r.resid_photon = resid;
    }
    {
      // Full-model cross-check in the pinned strong-detuning regime:
      // every detuning at 100 g_A, every drive at 10 g_A.
      SystemParams pf = p;
      pf.detuning_a = 100.0 * pf.g_a;
      pf.detuning_prime_a = pf.detuning_a;
      pf.detuning_b = pf.detuning_a;
      pf.detuning_prime_b = pf.detuning_a;
      pf.rabi_a = 10.0 * pf.g_a;
      pf.rabi_prime_a = pf.rabi_a;
      pf.rabi_b = pf.rabi_a;
      pf.rabi_prime_b = pf.rabi_a;
      const EffectiveCouplings cf = model::effective_couplings(pf);
      const phases::GateSchedule sf = phases::make_schedule(cf);
      const std::array<double, 4> exp_f = {0.0, sf.Phi_fg, sf.Phi_gf,
                                           sf.Phi_fg + sf.Phi_gf + sf.Theta};
      dynamics::GateRunOptions opts;
      opts.rad_per_step = 0.05;
      const dynamics::GateReport rep =
          dynamics::run_gate_simulation(pf, sf, GateModel::full, false, opts);
      double err = 0.0;
      for (int b = 0; b < 4; ++b) {
        err = std::max(err, std::abs(angle_diff(rep.branch_phase[b], exp_f[b])));
      }
      r.err_full = err;
    }
  });

  ResultTable t;
  t.columns = {{"draw", ""},    {"g_a", "meV"},  {"g_b", "meV"},
               {"eta1", "meV"}, {"eta2", "meV"}, {"k1", ""},
               {"k2", ""},      {"t0", "ps"},    {"phase_err_effective", "rad"},
               {"residual_photon", ""},          {"phase_err_full", "rad"}};
  double worst_eff = 0.0, worst_full = 0.0, worst_resid = 0.0;
  for (int d = 0; d < draws; ++d) {
    const DrawResult& r = results[d];
    t.rows.push_back({static_cast<double>(d), r.g_a, r.g_b, r.eta1, r.eta2, r.k1, r.k2, r.t0,
                      r.err_effective, r.resid_photon, r.err_full});
    worst_eff = std::max(worst_eff, r.err_effective);
    worst_full = std::max(worst_full, r.err_full);
    worst_resid = std::max(worst_resid, r.resid_photon);
  }
  mb.j["derived"]["draws"] = draws;
  mb.j["derived"]["worst_phase_err_effective_rad"] = worst_eff;
  mb.j["derived"]["worst_phase_err_full_rad"] = worst_full;
  mb.j["derived"]["worst_residual_photon"] = worst_resid;
  return t;
}

ResultTable run_tune_pi(const ExperimentSpec& spec, const SystemParams& p, ManifestBuilder& mb) {
  (void)spec;
  const phases::TuneResult tuned = phases::tune_for_pi_phase(p, 0, phases::TuneKnob::om_scale);
  ResultTable t;
  t.columns = {{"l", ""},
               {"om_scale", ""},
               {"loops", ""},
               {"theta_per_loop", "rad"},
               {"total_theta", "rad"},
               {"pi_residual", "rad"},
               {"t0", "ps"},
               {"gate_time", "ps"}};
  t.rows.push_back({0.0, tuned.knob_scale, static_cast<double>(tuned.schedule.loops),
                    tuned.schedule.Theta, tuned.achieved_theta,
                    std::abs(std::abs(tuned.achieved_theta) - kPi), tuned.schedule.t0_ps,
                    tuned.schedule.gate_time_ps()});
  mb.j["derived"]["tuned_params"] = params_json(tuned.params);
  mb.j["derived"]["schedule"] = schedule_json(tuned.schedule);
  try {
    const phases::TuneResult loops = phases::tune_for_pi_phase(p, 0, phases::TuneKnob::t_loops);
    mb.j["derived"]["t_loops_knob"] = {{"loops", loops.schedule.loops},
                                       {"achieved_theta_rad", loops.achieved_theta}};
  } catch (const TuningError& e) {
    mb.j["derived"]["t_loops_knob"] = {{"error", e.what()},
                                       {"achieved_theta_rad", e.achieved_theta}};
  }
  return report_units(t);
}

ResultTable run_convergence(const ExperimentSpec& spec, const SystemParams& p,
                            ManifestBuilder& mb, int threads) {
  SweepAxis axis{"n_max", 3, 7, 5};
  if (const SweepAxis* a = find_axis(spec, "n_max")) axis = *a;
  const double gamma_over_g = p.g_a > 0 && p.gamma_a > 0 ? p.gamma_a / p.g_a : 0.01;

  // Middle decay-fidelity curve: cheap and representative.
  const PlannedCurve pc = plan_fidelity_curve(p, fig3_curves()[1]);
  std::vector<int> cutoffs;
  for (int i = 0; i < axis.points; ++i) {
    cutoffs.push_back(static_cast<int>(std::lround(
        axis.min + (axis.max - axis.min) * static_cast<double>(i) / (axis.points - 1))));
  }
  std::vector<double> fvals(cutoffs.size());
  parallel_for(static_cast<int>(cutoffs.size()), threads, [&](int i) {
    SystemParams q = pc.params;
    q.gamma_a = q.gamma_b = gamma_over_g * q.g_a;
    dynamics::GateRunOptions opts;
    opts.rad_per_step = 0.1;
    opts.force_n_max = cutoffs[i];
    fvals[i] =
        dynamics::run_gate_simulation(q, pc.schedule, GateModel::effective, true, opts)
            .final_fidelity;
  });

  ResultTable t;
  t.columns = {{"n_max", ""}, {"final_fidelity", ""}, {"delta_vs_prev", ""}};
  for (std::size_t i = 0; i < cutoffs.size(); ++i) {
    t.rows.push_back({static_cast<double>(cutoffs[i]), fvals[i],
                      i == 0 ? std::numeric_limits<double>::quiet_NaN()
                             : std::abs(fvals[i] - fvals[i - 1])});
  }
  mb.j["derived"]["curve"] = pc.curve.label;
  mb.j["derived"]["gamma_over_g_a"] = gamma_over_g;
  return t;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                            int threads) {
  const SystemParams params = resolve_params(spec);
  ManifestBuilder mb(spec, params);

  ResultTable table;
  switch (spec.kind) {
    case Kind::phase_report:
      table = run_phase_report(spec, params, mb);
      break;
    case Kind::fig2_surface:
      table = run_fig2_surface(spec, params, mb, threads);
      break;
    case Kind::fig3_fidelity:
      table = run_fig3_fidelity(spec, params, mb, threads);
      break;
    case Kind::verify_effective:
      table = run_verify_effective(spec, params, mb, threads);
      break;
    case Kind::tune_pi:
      table = run_tune_pi(spec, params, mb);
      break;
    case Kind::convergence:
      table = run_convergence(spec, params, mb, threads);
      break;
  }

  table.add_provenance("tool", std::string("ccgate ") + kVersion);
  table.add_provenance("kind", kind_name(spec.kind));
  table.add_provenance("preset", spec.preset.empty() ? "(none)" : spec.preset);
  table.add_provenance("seed", std::to_string(spec.seed));
  for (const auto& f : field_registry()) {
    if (std::string(f.name) == "rabi_scale") continue;
    table.add_provenance("param." + std::string(f.name),
                         fmt_double(f.get(params)) + (f.unit[0] ? std::string(" ") + f.unit : ""));
  }

  std::filesystem::create_directories(out_dir);
  RunArtifacts artifacts;
  artifacts.csv = out_dir / (spec.output_stem + ".csv");
  artifacts.manifest = out_dir / (spec.output_stem + ".manifest.json");
  mb.j["outputs"] = {{"csv", artifacts.csv.filename().string()}};
  if (!table.sentinel_notes.empty()) mb.j["sentinels"] = table.sentinel_notes;
  write_csv(table, artifacts.csv);
  mb.write(artifacts.manifest);
  return artifacts;
}

int run_spec_file(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir,
                  int threads, std::string* error_message) {
  try {
    const ExperimentSpec spec = parse_spec_file(spec_file);
    run_experiment(spec, out_dir, threads);
    return kExitOk;
  } catch (const ConfigError& e) {
    if (error_message) *error_message = e.what();
    return kExitParseError;
  } catch (const std::invalid_argument& e) {
    if (error_message) *error_message = e.what();
    return kExitParseError;
  } catch (const PreconditionError& e) {
    if (error_message) *error_message = e.what();
    return kExitPrecondition;
  } catch (const IntegrationError& e) {
    if (error_message) *error_message = e.what();
    return kExitIntegration;
  }
}

}  // namespace ccgate::experiment
