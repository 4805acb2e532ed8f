#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ccgate/errors.hpp"
#include "ccgate/experiment.hpp"

using namespace ccgate;
using namespace ccgate::experiment;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("ccgate_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("spec parser round trip") {
  const ExperimentSpec spec = parse_spec_text(
      "# demo\n"
      "kind = fig3_fidelity\n"
      "preset = fig3\n"
      "out = demo\n"
      "seed = 42\n"
      "worst_case = off\n"
      "set gamma_a 0.002\n"
      "sweep gamma_over_g_a 0 0.02 5\n");
  CHECK(spec.kind == Kind::fig3_fidelity);
  CHECK(spec.preset == "fig3");
  CHECK(spec.output_stem == "demo");
  CHECK(spec.seed == 42);
  CHECK(spec.overrides.at("gamma_a") == doctest::Approx(0.002));
  REQUIRE(spec.axes.size() == 1);
  CHECK(spec.axes[0].name == "gamma_over_g_a");
  CHECK(spec.axes[0].points == 5);
}

TEST_CASE("spec parser rejects malformed input") {
  CHECK_THROWS_AS(parse_spec_text("preset = fig3\n"), ConfigError);           // missing kind
  CHECK_THROWS_AS(parse_spec_text("kind = nope\n"), ConfigError);             // unknown kind
  CHECK_THROWS_AS(parse_spec_text("kind = tune_pi\nbogus line\n"), ConfigError);
  CHECK_THROWS_AS(parse_spec_text("kind = tune_pi\nset not_a_field 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_spec_text("kind = tune_pi\nsweep hopping 0 1 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_spec_text("kind = tune_pi\nseed = banana\n"), ConfigError);
}

TEST_CASE("presets resolve the documented parameter sets") {
  const SystemParams fig2 = preset("fig2");
  CHECK(fig2.g_a == doctest::Approx(0.1));
  CHECK(fig2.g_b == doctest::Approx(0.08));
  CHECK(fig2.rabi_a.real() == doctest::Approx(1.0));
  CHECK(fig2.rabi_b.real() == doctest::Approx(1.25));
  CHECK(fig2.detuning_a == doctest::Approx(10.0));
  CHECK(fig2.detuning_b < 0.0);  // balanced root sits red of both poles

  const SystemParams fig3 = preset("fig3");
  CHECK(fig3.cavity_offset + fig3.hopping == doctest::Approx(20.3 * fig3.g_a));
  CHECK(fig3.cavity_offset - fig3.hopping == doctest::Approx(0.3 * fig3.g_a));
  CHECK(model::effective_couplings(fig3).balance_imbalance() < 1e-10);

  const SystemParams alt = preset("fig3_alt_gB");
  CHECK(alt.g_b == doctest::Approx(0.008));
  CHECK(alt.rabi_b.real() == doctest::Approx(12.5));
  CHECK_FALSE(model::check_validity(alt).large_detuning);

  CHECK_THROWS_AS(preset("fig9"), ConfigError);

  const auto curves = fig3_curves();
  REQUIRE(curves.size() == 3);
  CHECK(curves[2].eta1_over_g == doctest::Approx(20.3));
  CHECK(curves[2].eta2_over_g == doctest::Approx(0.3));
}

TEST_CASE("unit conversion identities") {
  // hbar / E: 1/g_A at g_A = 0.1 meV is 6.582 ps.
  CHECK(kHbar / 0.1 == doctest::Approx(6.582119569).epsilon(1e-12));

  ResultTable t;
  t.columns = {{"t0", "ps"}, {"eta1", "meV"}, {"f", ""}};
  t.rows = {{1000.0, 0.1, 0.5}};
  const ResultTable u = report_units(t);
  const int ns = u.column_index("t0_ns");
  const int rate = u.column_index("eta1_rad_ps");
  REQUIRE(ns >= 0);
  REQUIRE(rate >= 0);
  CHECK(u.rows[0][ns] == doctest::Approx(1.0));
  CHECK(u.rows[0][rate] == doctest::Approx(0.1 / kHbar));
  CHECK(u.column_index("f_ns") == -1);
}

TEST_CASE("csv output is deterministic for identical spec and seed") {
  const ExperimentSpec spec = parse_spec_text(
      "kind = phase_report\n"
      "preset = fig3\n"
      "out = det\n"
      "seed = 7\n");
  const fs::path dir1 = temp_dir("det1");
  const fs::path dir2 = temp_dir("det2");
  const RunArtifacts a1 = run_experiment(spec, dir1, 1);
  const RunArtifacts a2 = run_experiment(spec, dir2, 1);
  CHECK(slurp(a1.csv) == slurp(a2.csv));
  CHECK(slurp(a1.manifest) == slurp(a2.manifest));
}

TEST_CASE("phase report emits manifest with resolved parameters and flags") {
  const ExperimentSpec spec = parse_spec_text(
      "kind = phase_report\n"
      "preset = fig3\n"
      "out = rep\n");
  const fs::path dir = temp_dir("rep");
  const RunArtifacts art = run_experiment(spec, dir, 1);
  const std::string manifest = slurp(art.manifest);
  CHECK(manifest.find("\"detuning_b\"") != std::string::npos);
  CHECK(manifest.find("decay_time_dimensional_inconsistency") != std::string::npos);
  CHECK(manifest.find("\"tool_version\"") != std::string::npos);
  const std::string csv = slurp(art.csv);
  CHECK(csv.find("# param.detuning_b:") != std::string::npos);
  CHECK(csv.find("decay_time_consistent") != std::string::npos);
}

TEST_CASE("surface run flags resonance rows instead of dropping them") {
  const ExperimentSpec spec = parse_spec_text(
      "kind = fig2_surface\n"
      "preset = fig2\n"
      "out = surf\n"
      "sweep hopping 0.05 0.25 5\n"
      "sweep cavity_offset 0.05 0.25 5\n");
  const fs::path dir = temp_dir("surf");
  const RunArtifacts art = run_experiment(spec, dir, 1);
  const std::string csv = slurp(art.csv);
  CHECK(csv.find("# sentinel") != std::string::npos);
  CHECK(csv.find("nan") != std::string::npos);
  // 5x5 grid: 25 data rows after the header line
  int rows = 0;
  std::istringstream is(csv);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(rows == 26);  // header + 25
}

TEST_CASE("malformed spec file exits 2 and writes nothing") {
  const fs::path dir = temp_dir("badspec");
  const fs::path spec_file = dir / "bad.spec";
  std::ofstream(spec_file) << "kind = phase_report\nbroken token line\n";
  const fs::path out = dir / "out";
  std::string err;
  const int code = run_spec_file(spec_file, out, 1, &err);
  CHECK(code == kExitParseError);
  CHECK_FALSE(err.empty());
  CHECK_FALSE(fs::exists(out / "run.csv"));
}

TEST_CASE("resonant parameters exit with the precondition code") {
  const fs::path dir = temp_dir("resonant");
  const fs::path spec_file = dir / "res.spec";
  // cavity_offset == hopping puts the slow mode exactly on resonance
  std::ofstream(spec_file) << "kind = phase_report\npreset = fig3\n"
                           << "set cavity_offset 0.5\nset hopping 0.5\n";
  std::string err;
  const int code = run_spec_file(spec_file, dir / "out", 1, &err);
  CHECK(code == kExitPrecondition);
  CHECK(err.find("resonance") != std::string::npos);
}

TEST_CASE("tune_pi experiment reports the drive scale and loop count") {
  const ExperimentSpec spec = parse_spec_text(
      "kind = tune_pi\n"
      "preset = fig3\n"
      "out = tune\n");
  const fs::path dir = temp_dir("tune");
  const RunArtifacts art = run_experiment(spec, dir, 1);
  const std::string csv = slurp(art.csv);
  CHECK(csv.find("om_scale") != std::string::npos);
  CHECK(csv.find("pi_residual") != std::string::npos);
  const std::string manifest = slurp(art.manifest);
  CHECK(manifest.find("t_loops_knob") != std::string::npos);
}
