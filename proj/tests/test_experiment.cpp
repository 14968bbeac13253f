#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "flushlab/errors.hpp"
#include "flushlab/experiment.hpp"
#include "flushlab/io.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace flushlab;
using namespace flushlab::experiment;
namespace fs = std::filesystem;

namespace {

std::string config_error(const std::string& text, Kind kind = Kind::flush) {
  try {
    parse_config_text(text, kind);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("flushlab_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

#ifdef FLUSHLAB_CLI
int cli(const std::string& args) {
  const std::string cmd = std::string(FLUSHLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}
#endif

}  // namespace

TEST_CASE("empty config gives the documented defaults") {
  Scenario s = parse_config_text("", Kind::flush);
  CHECK(s.scaling.eps == 0.1);
  CHECK(s.scaling.T == 3.0);
  CHECK(s.scaling.L == 1.0);
  CHECK(s.scaling.eta == 1e-3);
  CHECK(s.scaling.k == 2);
  CHECK(s.run.m == 1);
  CHECK(s.run.nx == 320);
  CHECK(s.run.ny == 128);
  CHECK(s.eps_list == std::vector<double>{0.2, 0.1, 0.05});
  CHECK(s.seed == 1u);
  Scenario t = parse_config_text("scaling:\n", Kind::decay);
  CHECK(t.kind == Kind::decay);
  CHECK(t.scaling.eps == 0.1);
}

TEST_CASE("values are read from every section") {
  const char* text = R"(scenario: ablate
seed: 7
scaling:
  eps: 0.05
  theta: 0.5
grid:
  nx: 160
  ny: 64
solver:
  cfl: 0.4
pipeline:
  m: 2
  ledger_samples: 31
datum:
  sigma: 0.1
ablate:
  eps_list: [0.3, 0.2]
  margin: 0.02
)";
  Scenario s = parse_config_text(text, Kind::ablate);
  CHECK(s.seed == 7u);
  CHECK(s.scaling.eps == 0.05);
  CHECK(s.scaling.theta == 0.5);
  CHECK(s.run.nx == 160);
  CHECK(s.run.ny == 64);
  CHECK(s.run.solver.cfl == 0.4);
  CHECK(s.run.m == 2);
  CHECK(s.run.ledger_samples == 31);
  CHECK(s.sigma == 0.1);
  CHECK(s.eps_list == std::vector<double>{0.3, 0.2});
  CHECK(s.margin == 0.02);
}

TEST_CASE("unknown key is named with its position") {
  const std::string e = config_error("scaling:\n  epsilonn: 0.1\n");
  CHECK(e.find("unknown key 'scaling.epsilonn'") != std::string::npos);
  CHECK(e.find("line 2, column 3") != std::string::npos);
  CHECK(config_error("bogus: 1\n").find("unknown key 'bogus'") != std::string::npos);
  CHECK(config_error("grid:\n  nx: 320\n  nz: 3\n").find("grid.nz") != std::string::npos);
}

TEST_CASE("range, type and parse errors") {
  CHECK(config_error("scaling:\n  eps: 1.5\n").find("range error") != std::string::npos);
  const std::string type = config_error("scaling:\n  eps: abc\n");
  CHECK(type.find("scaling.eps") != std::string::npos);
  CHECK(type.find("line 2") != std::string::npos);
  CHECK(config_error("ablate:\n  eps_list: 0.1\n").find("ablate.eps_list") != std::string::npos);
  const std::string parse = config_error("scaling: [1,\n");
  CHECK(parse.find("parse error at line") != std::string::npos);
  CHECK(config_error("scaling: 3\n").find("'scaling' must be a mapping") != std::string::npos);
  CHECK(config_error("grid:\n  nx: 123\n").size() > 0);
  CHECK(config_error("solver:\n  cfl: 2\n").find("range error") != std::string::npos);
  CHECK(config_error("workers: 0\n").find("workers") != std::string::npos);
  CHECK(config_error("scenario: decay\n", Kind::flush).find("scenario 'decay'") != std::string::npos);
  CHECK(config_error("scenario: nonsense\n").find("unknown scenario") != std::string::npos);
  CHECK_THROWS_AS(parse_config("/nonexistent/flushlab.yaml", Kind::flush), ConfigError);
}

TEST_CASE("echoed config lists every default") {
  Scenario s = parse_config_text("scaling:\n  eps: 0.2\n", Kind::radius);
  auto j = nlohmann::json::parse(scenario_json(s));
  CHECK(j["scenario"] == "radius");
  CHECK(j["scaling"]["eps"] == 0.2);
  CHECK(j["scaling"]["eta"] == 1e-3);
  for (const char* sec : {"scaling", "grid", "solver", "pipeline", "datum", "decay", "scale", "ablate", "radius", "flush"})
    CHECK(j.contains(sec));
  CHECK(j["pipeline"].size() == 11);
  // The echo parses back to the same scenario.
  std::string yaml;
  for (auto& [sec, val] : j.items()) {
    if (!val.is_object()) continue;
    yaml += sec + ":\n";
    for (auto& [k, v] : val.items()) yaml += "  " + k + ": " + v.dump() + "\n";
  }
  Scenario back = parse_config_text(yaml, Kind::radius);
  CHECK(scenario_json(back) == scenario_json(s));
}

TEST_CASE("recorder: every summary value is in values.csv") {
  const fs::path dir = scratch("recorder");
  Scenario s;
  Recorder rec(dir.string());
  rec.add({3, "one", true, "", {{"a", 1.5}, {"b", 1e-300}}});
  rec.add({4, "two", false, "", {{"c", -2.0}}});
  rec.finish(s);
  const std::string csv = slurp(dir / "values.csv");
  CHECK(csv.find("criterion,name,value") == 0);
  CHECK(csv.find("3,a,1.5") != std::string::npos);
  CHECK(csv.find("3,b," + io::format_number(1e-300)) != std::string::npos);
  CHECK(csv.find("4,c,-2") != std::string::npos);
  auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(j["pass"] == false);
  CHECK(j["criteria"].size() == 2);
  CHECK(j["config"]["scaling"]["eps"] == 0.1);
  const std::string txt = slurp(dir / "summary.txt");
  CHECK(txt.find("PASS  [3] one") != std::string::npos);
  CHECK(txt.find("FAIL  [4] two") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("fork_map keeps order and re-raises worker errors by category") {
  auto square = [](int i) { return std::to_string(i * i); };
  auto serial = fork_map(5, 1, square);
  auto forked = fork_map(5, 3, square);
  CHECK(serial == forked);
  CHECK(forked[4] == "16");
  auto bad = [](int i) -> std::string {
    if (i == 2) throw ConfigError("bad task");
    return "ok";
  };
  CHECK_THROWS_AS(fork_map(4, 2, bad), ConfigError);
  CHECK_THROWS_AS(fork_map(4, 1, bad), ConfigError);
  auto numeric = [](int) -> std::string { throw NanError("nan"); };
  CHECK_THROWS_AS(fork_map(2, 2, numeric), NumericError);
}

TEST_CASE("reruns produce byte-identical CSV artifacts") {
  Scenario s;
  s.random_designs = 3;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  {
    Recorder ra(a.string()), rb(b.string());
    auto ca = final_layer_scaling(s, ra);
    auto cb = final_layer_scaling(s, rb);
    CHECK(ca.pass);
    moment_transfer(s, ra);
    moment_transfer(s, rb);
  }
  CHECK(slurp(a / "final_layer.csv") == slurp(b / "final_layer.csv"));
  CHECK(slurp(a / "moment_identities.csv") == slurp(b / "moment_identities.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("moment transfer check on a few random designs") {
  Scenario s;
  s.random_designs = 4;
  const fs::path dir = scratch("moments");
  Recorder rec(dir.string());
  Criterion c = moment_transfer(s, rec);
  CHECK(c.pass);
  CHECK(c.id == 4);
  fs::remove_all(dir);
}

TEST_CASE("datum file must match the configured grid") {
  const fs::path dir = scratch("datum");
  fs::create_directories(dir);
  const auto g = testutil::band(40, 16);
  io::write_field((dir / "u.bin").string(), field::Field2D(g, 2));
  Scenario s;
  s.datum_file = (dir / "u.bin").string();
  Recorder rec((dir / "out").string());
  CHECK_THROWS_AS(flush_simulation(s, rec), ConfigError);
  fs::remove_all(dir);
}

#ifdef FLUSHLAB_CLI
TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "typo.yaml") << "scaling:\n  epsilonn: 0.1\n";
  std::ofstream(dir / "range.yaml") << "scaling:\n  eps: 1.5\n";
  std::ofstream(dir / "scale.yaml") << "scenario: scale\nscale:\n  trace_eps: [0.01]\n";
  CHECK(cli("flush --config " + (dir / "typo.yaml").string()) == 2);
  CHECK(cli("flush --config " + (dir / "range.yaml").string()) == 2);
  CHECK(cli("flush --config " + (dir / "missing.yaml").string()) == 2);
  CHECK(cli("nosuchcommand") == 2);
  CHECK(cli("") == 2);
  CHECK(cli("decay --print-config") == 0);
  CHECK(cli("scale --config " + (dir / "scale.yaml").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(fs::exists(dir / "out" / "final_layer.csv"));
  CHECK(fs::exists(dir / "out" / "config_echo.json"));
  fs::remove_all(dir);
}
#endif
