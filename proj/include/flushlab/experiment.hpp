#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "flushlab/ns.hpp"

namespace flushlab::experiment {

enum class Kind { decay, scale, flush, radius, ablate };

std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);  // throws ConfigError

struct Scenario {
  Kind kind = Kind::flush;
  ns::ScalingConfig scaling;
  ns::RunOptions run;  // grid, solver and pipeline options
  double sigma = 0.07;
  double amplitude = 0.05;
  std::string datum_file;  // optional field file replacing the bundled datum in the flush run

  // decay
  std::vector<int> m_list{0, 1, 2, 3};
  int random_designs = 20;
  // scale
  int layer_m = 3;
  std::vector<double> layer_eps{1e-1, 0.031622776601683794, 1e-2, 0.0031622776601683794, 1e-3};
  std::vector<double> trace_eps{1e-2, 1e-3, 1e-4};
  // ablate
  std::vector<double> eps_list{0.2, 0.1, 0.05};
  double margin = 0.01;  // relative drop required for "strictly decreasing"
  // radius
  double rho0_factor = 2.0;
  double rho0_low_factor = 0.5;
  // flush
  bool verify_solver = true;

  unsigned seed = 1;
  int workers = 1;
  std::string out_dir = "out";
};

// Strict YAML parsing: unknown keys and malformed values are ConfigErrors naming the key and
// its line/column. Missing keys keep the defaults above.
Scenario parse_config(const std::string& path, Kind kind);
Scenario parse_config_text(const std::string& text, Kind kind);
// Every setting, defaults included, as ordered JSON.
std::string scenario_json(const Scenario& s);

struct Value {
  std::string name;
  double value = 0;
};

struct Criterion {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
  std::vector<Value> values;
};

// Artifact sink rooted at a directory. Every number reported in a summary is also written to
// values.csv.
class Recorder {
 public:
  explicit Recorder(std::string dir);
  const std::string& dir() const { return dir_; }
  std::string path(const std::string& name) const;
  void csv(const std::string& name, const std::vector<std::string>& header,
           const std::vector<std::vector<double>>& columns) const;
  void text(const std::string& name, const std::string& body) const;
  void add(const Criterion& c);
  const std::vector<Criterion>& criteria() const { return criteria_; }
  // values.csv, summary.json, summary.txt
  void finish(const Scenario& s) const;

 private:
  std::string dir_;
  std::vector<Criterion> criteria_;
};

// Shared expensive state (designed h, profile, radius loss) for the scenario's m and T.
std::shared_ptr<ns::Context> context_for(const Scenario& s);

// The ten acceptance checks. Each writes its own CSV/JSON artifacts through the recorder.
Criterion heat_decay(const Scenario& s, Recorder& rec);          // 1
Criterion final_layer_scaling(const Scenario& s, Recorder& rec); // 2
Criterion radius_budget(const Scenario& s, Recorder& rec);       // 3
Criterion moment_transfer(const Scenario& s, Recorder& rec);     // 4
Criterion rescaling(const Scenario& s, Recorder& rec);           // 5
Criterion solver_verification(const Scenario& s, Recorder& rec); // 6
Criterion flushing(const Scenario& s, Recorder& rec);            // 7
Criterion eps_refinement(const Scenario& s, Recorder& rec);      // 8
Criterion radius_cointegration(const Scenario& s, Recorder& rec);// 9
Criterion phantom_ledger(const Scenario& s, Recorder& rec);      // 10

// Runs the criteria belonging to the scenario kind, writes artifacts and the summary.
std::vector<Criterion> run_scenario(const Scenario& s);

// Single flush simulation with its artifacts (diagnostics.csv, manifest.json).
ns::RunResult flush_simulation(const Scenario& s, Recorder& rec, const std::string& tag = "flush");

// Runs fn(i) for i < n, in up to `workers` forked processes. Results travel as JSON text.
// Errors raised in a worker are re-raised in the caller with their category.
std::vector<std::string> fork_map(int n, int workers, const std::function<std::string(int)>& fn);

}  // namespace flushlab::experiment
