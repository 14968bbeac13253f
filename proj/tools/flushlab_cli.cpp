#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "flushlab/errors.hpp"
#include "flushlab/experiment.hpp"

using namespace flushlab;

namespace {

enum Exit { ok = 0, criteria_failed = 1, config_failed = 2, numeric_failed = 3 };

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<unsigned> seed;
  std::optional<std::string> datum;
  bool echo = false;
};

int run(experiment::Kind kind, const Flags& f) {
  experiment::Scenario s = f.config.empty() ? experiment::parse_config_text("", kind)
                                            : experiment::parse_config(f.config, kind);
  if (f.out) s.out_dir = *f.out;
  if (f.workers) s.workers = *f.workers;
  if (f.seed) s.seed = *f.seed;
  if (f.datum) s.datum_file = *f.datum;
  if (f.echo) {
    std::cout << experiment::scenario_json(s) << "\n";
    return ok;
  }
  std::cout << "scenario " << experiment::kind_name(kind) << " -> " << s.out_dir << "\n" << std::flush;
  const auto criteria = experiment::run_scenario(s);
  bool all = true;
  for (const auto& c : criteria) {
    std::cout << (c.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.title << "\n";
    all = all && c.pass;
  }
  std::cout << "summary: " << s.out_dir << "/summary.txt\n";
  return all ? ok : criteria_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flushlab: boundary-layer flushing experiments"};
  app.set_version_flag("--version", std::string(FLUSHLAB_VERSION));
  app.require_subcommand(1);
  Flags f;
  std::optional<experiment::Kind> chosen;

  const std::pair<experiment::Kind, const char*> subs[] = {
      {experiment::Kind::decay, "heat-layer decay exponents and moment identities"},
      {experiment::Kind::scale, "final layer scaling and rescaled trace"},
      {experiment::Kind::flush, "solver verification, flushing, phantom ledger and one scaled run"},
      {experiment::Kind::radius, "radius budget and co-integrated radius"},
      {experiment::Kind::ablate, "epsilon refinement with and without the boundary control"},
  };
  for (const auto& [kind, help] : subs) {
    CLI::App* sub = app.add_subcommand(experiment::kind_name(kind), help);
    sub->add_option("-c,--config", f.config, "YAML config file");
    sub->add_option("-o,--out", f.out, "output directory (overrides config)");
    sub->add_option("-w,--workers", f.workers, "worker processes (overrides config)")->check(CLI::PositiveNumber);
    sub->add_option("-s,--seed", f.seed, "random seed (overrides config)");
    if (kind == experiment::Kind::flush)
      sub->add_option("--datum", f.datum, "initial field file (binary field layout) replacing the bundled datum");
    sub->add_flag("--print-config", f.echo, "print the resolved config as JSON and exit");
    sub->callback([&chosen, kind = kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_failed;
  }

  try {
    return run(*chosen, f);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.category()) {
      case Error::Category::config: return config_failed;
      case Error::Category::criteria: return criteria_failed;
      case Error::Category::numeric: return numeric_failed;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return numeric_failed;
}
