// experiment.hpp — configuration-driven experiment runner: spec files, sweeps,
// CSV tables with provenance headers and JSON run manifests

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ccgate/model.hpp"
#include "ccgate/phases.hpp"
#include "ccgate/types.hpp"

namespace ccgate::experiment {

using model::SystemParams;

enum class Kind {
  phase_report,      // couplings, schedule, phases, equivalence checks for one parameter set
  fig2_surface,      // operation-time surface over (nu, delta)
  fig3_fidelity,     // decay-fidelity curves versus gamma/g_A
  verify_effective,  // randomized analytic-vs-numeric phase validation
  tune_pi,           // pi-phase tuning report
  convergence,       // final fidelity versus Fock cutoff
};

const char* kind_name(Kind k);

struct SweepAxis {
  std::string name;  // a SystemParams field or a documented derived knob
  double min = 0.0;
  double max = 0.0;
  int points = 2;
};

struct ExperimentSpec {
  Kind kind = Kind::phase_report;
  std::string preset;                       // optional preset name
  std::map<std::string, double> overrides;  // SystemParams field overrides
  std::vector<SweepAxis> axes;
  std::string output_stem = "run";
  std::uint64_t seed = 0;
  bool worst_case_over_basis = false;
  int draws = 20;                           // verify_effective sample count
  double theta_target = kPi;                // fig2 target phase magnitude
};

/// Parse the declarative key-value spec format. Throws ConfigError with a
/// line-numbered message on malformed input.
ExperimentSpec parse_spec_file(const std::filesystem::path& file);
ExperimentSpec parse_spec_text(const std::string& text, const std::string& origin = "<string>");

// ---- presets ----------------------------------------------------------------

/// Named parameter sets for the bundled studies. Unstated values carry
/// documented defaults; the run manifest records every resolved field.
///   fig2        g_B = 0.8 g_A family, operation-time surface base point
///   fig3        g_B = 0.8 g_A family at the strong-hopping curve
///   fig3_alt_gB g_B = 0.08 g_A literal-caption variant
SystemParams preset(const std::string& name);
std::vector<std::string> preset_names();

/// The three (delta+nu, delta-nu) curve pairs of the decay-fidelity study,
/// in units of g_A.
struct FidelityCurve {
  double eta1_over_g;
  double eta2_over_g;
  std::string label;
};
std::vector<FidelityCurve> fig3_curves();

/// One decay-fidelity curve prepared for simulation: mode detunings applied,
/// dot-B detuning re-balanced, drive scale tuned so the total gate phase is
/// exactly pi over an integer number of loops.
struct PlannedCurve {
  FidelityCurve curve;
  SystemParams params;
  phases::GateSchedule schedule;
  double om_scale = 1.0;
};
PlannedCurve plan_fidelity_curve(SystemParams base, const FidelityCurve& kv);

// ---- result tables -----------------------------------------------------------

struct Column {
  std::string name;
  std::string unit;
};

struct ResultTable {
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> provenance;  // emitted as header comments
  std::vector<std::string> sentinel_notes;  // flagged resonance rows

  void add_provenance(const std::string& key, const std::string& value);
  int column_index(const std::string& name) const;  // -1 when absent
};

/// Append unit-converted companions: every ps column gains an ns column and
/// every meV rate column gains a rad/ps column.
ResultTable report_units(const ResultTable& t);

/// Deterministic CSV: structured-comment provenance header, then data.
/// Identical spec + seed produce byte-identical files.
void write_csv(const ResultTable& t, const std::filesystem::path& path);

// ---- runner -------------------------------------------------------------------

struct RunArtifacts {
  std::filesystem::path csv;
  std::filesystem::path manifest;
  int exit_code = 0;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitParseError = 2;
inline constexpr int kExitPrecondition = 3;
inline constexpr int kExitIntegration = 4;

/// Execute a parsed experiment. Writes <stem>.csv and <stem>.manifest.json
/// under out_dir; nothing is written when the run fails. Sweep points are
/// dispatched to `threads` workers with result order fixed by sweep index.
RunArtifacts run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir,
                            int threads = 1);

/// Spec-file front end used by the CLI: parse, run, map exceptions to exit codes.
int run_spec_file(const std::filesystem::path& spec_file, const std::filesystem::path& out_dir,
                  int threads, std::string* error_message = nullptr);

}  // namespace ccgate::experiment
