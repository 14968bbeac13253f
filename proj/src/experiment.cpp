#include "flushlab/experiment.hpp"

#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <yaml-cpp/yaml.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "flushlab/baseflow.hpp"
#include "flushlab/errors.hpp"
#include "flushlab/extension.hpp"
#include "flushlab/heat.hpp"
#include "flushlab/io.hpp"
#include "flushlab/norms.hpp"
#include "flushlab/transport.hpp"
#include "json.hpp"

namespace flushlab::experiment {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using field::Field2D;
using field::Grid;

// ---------------------------------------------------------------------------------------------
// Names

std::string kind_name(Kind k) {
  switch (k) {
    case Kind::decay: return "decay";
    case Kind::scale: return "scale";
    case Kind::flush: return "flush";
    case Kind::radius: return "radius";
    case Kind::ablate: return "ablate";
  }
  return "flush";
}

Kind kind_from_name(const std::string& name) {
  for (Kind k : {Kind::decay, Kind::scale, Kind::flush, Kind::radius, Kind::ablate})
    if (kind_name(k) == name) return k;
  throw ConfigError("unknown scenario '" + name + "' (expected decay, scale, flush, radius or ablate)");
}

// ---------------------------------------------------------------------------------------------
// Config

namespace {

std::string where(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  if (m.is_null()) return "";
  std::ostringstream os;
  os << " at line " << m.line + 1 << ", column " << m.column + 1;
  return os.str();
}

class Section {
 public:
  Section(const YAML::Node& node, std::string prefix)
      : node_(node), present_(node.IsDefined() && !node.IsNull()), prefix_(std::move(prefix)) {
    if (present_ && !node_.IsMap()) throw ConfigError("key '" + prefix_ + "' must be a mapping" + where(node_));
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!present_) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        out = v.as<bool>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.IsScalar()) throw YAML::Exception(v.Mark(), "");
        out = v.as<std::string>();
      } else if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<int>>) {
        if (!v.IsSequence() || v.size() == 0) throw YAML::Exception(v.Mark(), "");
        out = v.as<T>();
      } else {
        if (!v.IsScalar()) throw YAML::Exception(v.Mark(), "");
        out = v.as<T>();
      }
    } catch (const YAML::Exception&) {
      throw ConfigError("key '" + name(key) + "': expected " + expected<T>() + where(v));
    }
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    return Section(present_ ? node_[key] : YAML::Node(YAML::NodeType::Undefined), name(key));
  }

  // Unknown keys are errors.
  void finish() const {
    if (!present_) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!seen_.count(k)) throw ConfigError("unknown key '" + name(k) + "'" + where(kv.first));
    }
  }

 private:
  std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  template <class T>
  static std::string expected() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    if constexpr (std::is_same_v<T, int> || std::is_same_v<T, unsigned>) return "an integer";
    if constexpr (std::is_same_v<T, std::string>) return "a string";
    if constexpr (std::is_same_v<T, std::vector<double>>) return "a non-empty list of numbers";
    if constexpr (std::is_same_v<T, std::vector<int>>) return "a non-empty list of integers";
    return "a number";
  }

  YAML::Node node_;
  bool present_ = false;
  std::string prefix_;
  std::set<std::string> seen_;
};

void check_scenario(const Scenario& s) {
  s.scaling.validate();
  auto fail = [](const std::string& what) { throw ConfigError("range error: " + what); };
  field::make_grid(s.run.nx, s.run.ny, s.run.x_min, s.run.x_max, s.scaling.L);  // throws GridError
  if (!(s.run.solver.cfl > 0 && s.run.solver.cfl <= 1)) fail("solver.cfl must lie in (0, 1]");
  if (!(s.run.solver.dt_max > 0)) fail("solver.dt_max must be positive");
  if (!(s.run.solver.dealias > 0 && s.run.solver.dealias <= 1)) fail("solver.dealias must lie in (0, 1]");
  if (s.run.m < 0 || s.run.m > 6) fail("pipeline.m must lie in 0..6");
  if (!(s.run.tau > 0)) fail("pipeline.tau must be positive");
  if (s.run.rho_target < 0 || s.run.rho0 < 0) fail("pipeline.rho_target and pipeline.rho0 must be >= 0");
  if (!(s.run.output_dt > 0 && s.run.output_dt_late > 0)) fail("pipeline output spacings must be positive");
  if (s.run.ledger_samples < 2) fail("pipeline.ledger_samples must be >= 2");
  if (s.run.snapshot_stride < 0) fail("pipeline.snapshot_stride must be >= 0");
  if (!(s.sigma > 0 && s.sigma < 0.5 * s.scaling.L)) fail("datum.sigma must lie in (0, L/2)");
  if (!(s.amplitude > 0)) fail("datum.amplitude must be positive");
  for (int m : s.m_list)
    if (m < 0 || m > 6) fail("decay.m_list entries must lie in 0..6");
  if (s.random_designs < 1) fail("decay.random_designs must be >= 1");
  if (s.layer_m < 0 || s.layer_m > 6) fail("scale.m must lie in 0..6");
  for (double e : s.layer_eps)
    if (!(e > 0 && e < 1)) fail("scale.layer_eps entries must lie in (0, 1)");
  for (double e : s.trace_eps)
    if (!(e > 0 && e <= 1)) fail("scale.trace_eps entries must lie in (0, 1]");
  for (double e : s.eps_list)
    if (!(e > 0 && e < 1)) fail("ablate.eps_list entries must lie in (0, 1)");
  if (s.eps_list.size() < 2) fail("ablate.eps_list needs at least two values");
  if (!(s.margin >= 0 && s.margin < 1)) fail("ablate.margin must lie in [0, 1)");
  if (!(s.rho0_factor > 0 && s.rho0_low_factor > 0)) fail("radius factors must be positive");
  if (s.workers < 1) fail("workers must be >= 1");
  if (s.out_dir.empty()) fail("out must not be empty");
}

Scenario parse_node(const YAML::Node& root, Kind kind) {
  Scenario s;
  s.kind = kind;
  if (root && !root.IsNull() && !root.IsMap()) throw ConfigError("config must be a mapping of sections" + where(root));
  Section top(root, "");

  std::string scenario;
  top.get("scenario", scenario);
  if (!scenario.empty() && kind_from_name(scenario) != kind)
    throw ConfigError("config declares scenario '" + scenario + "' but '" + kind_name(kind) + "' was requested");
  top.get("seed", s.seed);
  top.get("workers", s.workers);
  top.get("out", s.out_dir);

  Section sc = top.sub("scaling");
  sc.get("eps", s.scaling.eps);
  sc.get("T", s.scaling.T);
  sc.get("L", s.scaling.L);
  sc.get("eta", s.scaling.eta);
  sc.get("k", s.scaling.k);
  sc.get("delta", s.scaling.delta);
  sc.get("theta", s.scaling.theta);
  sc.finish();

  Section gr = top.sub("grid");
  gr.get("nx", s.run.nx);
  gr.get("ny", s.run.ny);
  gr.get("x_min", s.run.x_min);
  gr.get("x_max", s.run.x_max);
  gr.finish();

  Section so = top.sub("solver");
  so.get("cfl", s.run.solver.cfl);
  so.get("dt_max", s.run.solver.dt_max);
  so.get("dealias", s.run.solver.dealias);
  so.finish();

  Section pl = top.sub("pipeline");
  pl.get("m", s.run.m);
  pl.get("regularize", s.run.regularize);
  pl.get("rho_target", s.run.rho_target);
  pl.get("tau", s.run.tau);
  pl.get("enforce_budget", s.run.enforce_budget);
  pl.get("rho0", s.run.rho0);
  pl.get("N", s.run.N);
  pl.get("output_dt", s.run.output_dt);
  pl.get("output_dt_late", s.run.output_dt_late);
  pl.get("snapshot_stride", s.run.snapshot_stride);
  pl.get("ledger_samples", s.run.ledger_samples);
  pl.finish();

  Section da = top.sub("datum");
  da.get("sigma", s.sigma);
  da.get("amplitude", s.amplitude);
  da.get("file", s.datum_file);
  da.finish();

  Section de = top.sub("decay");
  de.get("m_list", s.m_list);
  de.get("random_designs", s.random_designs);
  de.finish();

  Section sl = top.sub("scale");
  sl.get("m", s.layer_m);
  sl.get("layer_eps", s.layer_eps);
  sl.get("trace_eps", s.trace_eps);
  sl.finish();

  Section ab = top.sub("ablate");
  ab.get("eps_list", s.eps_list);
  ab.get("margin", s.margin);
  ab.finish();

  Section ra = top.sub("radius");
  ra.get("rho0_factor", s.rho0_factor);
  ra.get("rho0_low_factor", s.rho0_low_factor);
  ra.finish();

  Section fl = top.sub("flush");
  fl.get("verify_solver", s.verify_solver);
  fl.finish();

  top.finish();
  check_scenario(s);
  return s;
}

}  // namespace

Scenario parse_config_text(const std::string& text, Kind kind) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    std::ostringstream os;
    os << "parse error at line " << e.mark.line + 1 << ", column " << e.mark.column + 1 << ": " << e.msg;
    throw ConfigError(os.str());
  }
  return parse_node(root, kind);
}

Scenario parse_config(const std::string& path, Kind kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), kind);
}

std::string scenario_json(const Scenario& s) {
  json j;
  j["scenario"] = kind_name(s.kind);
  j["seed"] = s.seed;
  j["workers"] = s.workers;
  j["out"] = s.out_dir;
  const auto& c = s.scaling;
  j["scaling"] = {{"eps", c.eps}, {"T", c.T}, {"L", c.L}, {"eta", c.eta}, {"k", c.k}, {"delta", c.delta}, {"theta", c.theta}};
  const auto& o = s.run;
  j["grid"] = {{"nx", o.nx}, {"ny", o.ny}, {"x_min", o.x_min}, {"x_max", o.x_max}};
  j["solver"] = {{"cfl", o.solver.cfl}, {"dt_max", o.solver.dt_max}, {"dealias", o.solver.dealias}};
  j["pipeline"] = {{"m", o.m},
                   {"regularize", o.regularize},
                   {"rho_target", o.rho_target},
                   {"tau", o.tau},
                   {"enforce_budget", o.enforce_budget},
                   {"rho0", o.rho0},
                   {"N", o.N},
                   {"output_dt", o.output_dt},
                   {"output_dt_late", o.output_dt_late},
                   {"snapshot_stride", o.snapshot_stride},
                   {"ledger_samples", o.ledger_samples}};
  j["datum"] = {{"sigma", s.sigma}, {"amplitude", s.amplitude}, {"file", s.datum_file}};
  j["decay"] = {{"m_list", s.m_list}, {"random_designs", s.random_designs}};
  j["scale"] = {{"m", s.layer_m}, {"layer_eps", s.layer_eps}, {"trace_eps", s.trace_eps}};
  j["ablate"] = {{"eps_list", s.eps_list}, {"margin", s.margin}};
  j["radius"] = {{"rho0_factor", s.rho0_factor}, {"rho0_low_factor", s.rho0_low_factor}};
  j["flush"] = {{"verify_solver", s.verify_solver}};
  return j.dump(2);
}

// ---------------------------------------------------------------------------------------------
// Recorder

Recorder::Recorder(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) throw ConfigError("output directory '" + dir_ + "' is not writable");
}

std::string Recorder::path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

void Recorder::csv(const std::string& name, const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& columns) const {
  io::write_csv(path(name), header, columns);
}

void Recorder::text(const std::string& name, const std::string& body) const {
  std::ofstream os(path(name));
  if (!os) throw ConfigError("cannot write " + path(name));
  os << body;
  if (!body.empty() && body.back() != '\n') os << "\n";
}

void Recorder::add(const Criterion& c) { criteria_.push_back(c); }

void Recorder::finish(const Scenario& s) const {
  {
    std::ofstream os(path("values.csv"));
    if (!os) throw ConfigError("cannot write " + path("values.csv"));
    os << "criterion,name,value\n";
    for (const auto& c : criteria_)
      for (const auto& v : c.values) os << c.id << "," << v.name << "," << io::format_number(v.value) << "\n";
  }
  json j;
  j["scenario"] = kind_name(s.kind);
  j["config"] = json::parse(scenario_json(s));
  j["code_version"] = FLUSHLAB_VERSION;
  json cs = json::array();
  bool all = true;
  for (const auto& c : criteria_) {
    json v = json::object();
    for (const auto& x : c.values) v[x.name] = std::isfinite(x.value) ? json(x.value) : json(io::format_number(x.value));
    cs.push_back({{"id", c.id}, {"title", c.title}, {"pass", c.pass}, {"detail", c.detail}, {"values", v}});
    all = all && c.pass;
  }
  j["criteria"] = cs;
  j["pass"] = all;
  text("summary.json", j.dump(2));

  std::ostringstream os;
  os << "scenario " << kind_name(s.kind) << " (values in values.csv)\n";
  for (const auto& c : criteria_) {
    os << (c.pass ? "PASS" : "FAIL") << "  [" << c.id << "] " << c.title << "\n";
    if (!c.detail.empty()) os << "      " << c.detail << "\n";
    for (const auto& v : c.values) os << "      " << v.name << " = " << io::format_number(v.value) << "\n";
  }
  os << (all ? "all criteria passed\n" : "some criteria failed\n");
  text("summary.txt", os.str());
}

// ---------------------------------------------------------------------------------------------
// Shared state

namespace {

std::mutex cache_mutex;

const baseflow::BaseFlow& designed(double T, double L, int m) {
  static std::map<std::tuple<double, double, int>, baseflow::BaseFlow> cache;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto key = std::make_tuple(T, L, m);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, baseflow::design_base_flow(T, L, m)).first;
  return it->second;
}

// Tabulated profiles (needed for the loss integrand); lazy ones for pointwise queries.
std::shared_ptr<const heat::HalfLineProfile> profile(double T, double L, int m, bool tabulate) {
  static std::map<std::tuple<double, double, int, bool>, std::shared_ptr<const heat::HalfLineProfile>> cache;
  const auto& h = designed(T, L, m);
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto key = std::make_tuple(T, L, m, tabulate);
  auto it = cache.find(key);
  if (it == cache.end()) {
    heat::ProfileGrid g;
    g.tabulate = tabulate;
    it = cache.emplace(key, std::make_shared<heat::HalfLineProfile>(heat::solve_boundary_layer(h, g))).first;
  }
  return it->second;
}

Grid run_grid(const Scenario& s) { return field::make_grid(s.run.nx, s.run.ny, s.run.x_min, s.run.x_max, s.scaling.L); }

std::string tag_eps(double e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

bool strictly_decreasing(const std::vector<double>& v, double margin) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < (1 - margin) * v[i - 1])) return false;
  return true;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = a + (b - a) * i / (n - 1);
  return t;
}

void write_run(const Recorder& rec, const ns::RunResult& r, const std::string& tag) {
  ns::write_diagnostics_csv(rec.path("diagnostics_" + tag + ".csv"), r);
  rec.text("manifest_" + tag + ".json", ns::manifest_json(r));
  if (r.radius) {
    analytic::write_trace_csv(rec.path("radius_" + tag + ".csv"), *r.radius);
    analytic::write_trace_json(rec.path("radius_" + tag + ".json"), *r.radius);
  }
  if (!r.ledger_t.empty()) rec.csv("ledger_" + tag + ".csv", {"t", "phantom_hk"}, {r.ledger_t, r.ledger_hk});
}

std::string category_name(Error::Category c) {
  switch (c) {
    case Error::Category::config: return "config";
    case Error::Category::numeric: return "numeric";
    case Error::Category::criteria: return "criteria";
  }
  return "numeric";
}

}  // namespace

std::shared_ptr<ns::Context> context_for(const Scenario& s) {
  auto ctx = std::make_shared<ns::Context>();
  ctx->h = designed(s.scaling.T, s.scaling.L, s.run.m);
  auto V = profile(s.scaling.T, s.scaling.L, s.run.m, true);
  ctx->V = V;
  ctx->loss = heat::total_radius_loss(*V);
  ctx->ell = heat::loss_integrand(*V);
  return ctx;
}

// ---------------------------------------------------------------------------------------------
// Worker processes

std::vector<std::string> fork_map(int n, int workers, const std::function<std::string(int)>& fn) {
  std::vector<std::string> out(n);
  auto wrap = [&](int i) -> std::string {
    json j;
    try {
      j["ok"] = true;
      j["result"] = fn(i);
    } catch (const Error& e) {
      j = {{"ok", false}, {"category", category_name(e.category())}, {"what", e.what()}};
    } catch (const std::exception& e) {
      j = {{"ok", false}, {"category", "numeric"}, {"what", e.what()}};
    }
    return j.dump();
  };
  std::vector<std::string> raw(n);
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) raw[i] = wrap(i);
  } else {
    char tmpl[] = "/tmp/flushlab-work-XXXXXX";
    if (!mkdtemp(tmpl)) throw NumericError("fork_map: cannot create a work directory");
    const fs::path work(tmpl);
    std::map<pid_t, int> running;
    int next = 0;
    std::string crash;
    while (next < n || !running.empty()) {
      while (next < n && static_cast<int>(running.size()) < workers) {
        std::cout.flush();
        std::fflush(nullptr);
        const pid_t pid = fork();
        if (pid < 0) throw NumericError("fork_map: fork failed");
        if (pid == 0) {
          const std::string r = wrap(next);
          std::ofstream os(work / (std::to_string(next) + ".json"));
          os << r;
          os.close();
          _exit(os ? 0 : 1);
        }
        running[pid] = next++;
      }
      int status = 0;
      const pid_t done = waitpid(-1, &status, 0);
      if (done < 0) break;
      const int idx = running[done];
      running.erase(done);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) crash = "worker for task " + std::to_string(idx) + " died";
    }
    for (int i = 0; i < n && crash.empty(); ++i) {
      std::ifstream in(work / (std::to_string(i) + ".json"));
      if (!in) {
        crash = "missing result of task " + std::to_string(i);
        break;
      }
      std::stringstream ss;
      ss << in.rdbuf();
      raw[i] = ss.str();
    }
    std::error_code ec;
    fs::remove_all(work, ec);
    if (!crash.empty()) throw NumericError("fork_map: " + crash);
  }
  for (int i = 0; i < n; ++i) {
    json j = json::parse(raw[i]);
    if (!j["ok"].get<bool>()) {
      const std::string c = j["category"];
      const std::string what = j["what"];
      if (c == "config") throw ConfigError(what);
      if (c == "criteria") throw Error(Error::Category::criteria, what);
      throw NumericError(what);
    }
    out[i] = j["result"].get<std::string>();
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Criteria

Criterion heat_decay(const Scenario& s, Recorder& rec) {
  Criterion c{1, "heat decay exponents", false, "", {}};
  const double T = s.scaling.T, L = s.scaling.L;
  std::vector<double> ms, ps, theory;
  std::map<int, double> p;
  for (int m : s.m_list) {
    auto V = profile(T, L, m, false);
    auto series = heat::decay_series(*V, 10 * T, 1000 * T);
    std::vector<double> t, v;
    for (const auto& [a, b] : series) {
      t.push_back(a);
      v.push_back(b);
    }
    rec.csv("decay_m" + std::to_string(m) + ".csv", {"t", "V_l2"}, {t, v});
    p[m] = heat::fit_decay_exponent(series, {10 * T, 1000 * T});
    ms.push_back(m);
    ps.push_back(p[m]);
    theory.push_back(-(m + 1) - 0.75);
    c.values.push_back({"exponent_m" + std::to_string(m), p[m]});
  }
  rec.csv("decay_exponents.csv", {"m", "exponent", "leading_term"}, {ms, ps, theory});
  bool ok = p.count(0) && std::abs(p[0] + 1.75) <= 0.1;
  for (int m : {1, 2}) {
    if (!p.count(m) || !p.count(m - 1)) {
      ok = false;
      continue;
    }
    const double drop = p[m - 1] - p[m];
    c.values.push_back({"drop_m" + std::to_string(m), drop});
    ok = ok && std::abs(drop - 1.0) <= 0.15;
  }
  c.pass = ok;
  c.detail = "m = 0 exponent within -7/4 +- 0.1; drop 1 +- 0.15 for m = 1, 2";
  return c;
}

Criterion final_layer_scaling(const Scenario& s, Recorder& rec) {
  Criterion c{2, "final layer norm scaling", false, "", {}};
  auto V = profile(s.scaling.T, s.scaling.L, s.layer_m, false);
  std::vector<double> eps = s.layer_eps, norm, ratio, le, ln;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  for (double e : eps) {
    const double n = heat::l2_norm(*V, s.scaling.T / e);
    norm.push_back(n);
    ratio.push_back(n / (e * e * e));
    le.push_back(std::log(e));
    ln.push_back(std::log(n));
  }
  rec.csv("final_layer.csv", {"eps", "V_l2_at_T_over_eps", "ratio_to_eps3"}, {eps, norm, ratio});
  const double slope = ls_slope(le, ln);
  bool nonincreasing = true;
  for (std::size_t i = 1; i < ratio.size(); ++i) nonincreasing = nonincreasing && ratio[i] <= ratio[i - 1];
  c.values.push_back({"slope", slope});
  c.values.push_back({"ratio_first", ratio.front()});
  c.values.push_back({"ratio_last", ratio.back()});
  c.pass = slope >= 3.0 && nonincreasing;
  c.detail = "m = " + std::to_string(s.layer_m) + ", log-log slope >= 3 and ratio to eps^3 nonincreasing as eps decreases";
  return c;
}

Criterion radius_budget(const Scenario& s, Recorder& rec) {
  Criterion c{3, "radius budget finiteness", false, "", {}};
  const double T = s.scaling.T, L = s.scaling.L;
  bool ok = true;
  std::vector<double> ms, val, solved, tail, frac, expo, div;
  for (int m = 1; m <= 3; ++m) {
    auto V = profile(T, L, m, true);
    auto rl = heat::total_radius_loss(*V);
    auto ell = heat::loss_integrand(*V);
    std::vector<double> t, l;
    for (const auto& [a, b] : ell) {
      t.push_back(a);
      l.push_back(b);
    }
    rec.csv("loss_integrand_m" + std::to_string(m) + ".csv", {"t", "ell"}, {t, l});
    ms.push_back(m);
    val.push_back(rl.value);
    solved.push_back(rl.solved);
    tail.push_back(rl.tail);
    frac.push_back(rl.tail_fraction);
    expo.push_back(rl.exponent);
    div.push_back(rl.divergent ? 1 : 0);
    c.values.push_back({"loss_m" + std::to_string(m), rl.value});
    c.values.push_back({"tail_fraction_m" + std::to_string(m), rl.tail_fraction});
    ok = ok && !rl.divergent && rl.tail_fraction < 0.01 && std::isfinite(rl.value);
  }
  // m = 0 variant with nonzero integral: one positive lobe on (0, T/3).
  auto b = baseflow::bump_basis(0.0, T / 3, 1).front();
  auto lobe = heat::solve_boundary_layer(heat::from_functions([b](heat::real t) { return b.value(t); },
                                                              [b](heat::real t) { return b.derivative(t); },
                                                              {{b.a(), b.b()}}, T));
  auto rl = heat::total_radius_loss(lobe);
  ms.push_back(-1);
  val.push_back(rl.value);
  solved.push_back(rl.solved);
  tail.push_back(rl.tail);
  frac.push_back(rl.tail_fraction);
  expo.push_back(rl.exponent);
  div.push_back(rl.divergent ? 1 : 0);
  rec.csv("radius_loss.csv", {"m", "total", "solved", "tail", "tail_fraction", "exponent", "divergent"},
          {ms, val, solved, tail, frac, expo, div});
  c.values.push_back({"lobe_exponent", rl.exponent});
  c.values.push_back({"lobe_divergent", rl.divergent ? 1.0 : 0.0});
  c.pass = ok && rl.divergent && !rl.warning.empty();
  c.detail = "m = 1..3 tail fraction < 1%; nonzero-mean lobe (m = -1 row) raises the divergence warning";
  return c;
}

Criterion moment_transfer(const Scenario& s, Recorder& rec) {
  Criterion c{4, "moment transfer identities", false, "", {}};
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> uT(1.5, 4.0), uL(0.5, 1.5);
  std::uniform_int_distribution<int> um(0, 3);
  std::vector<double> Ts, Ls, Ms, e1, e3;
  double w1 = 0, w3 = 0;
  for (int i = 0; i < s.random_designs; ++i) {
    const double TT = uT(rng), L = uL(rng);
    const int m = um(rng);
    const auto h = baseflow::design_base_flow(TT, L, m);
    heat::ProfileGrid g;
    g.tabulate = false;
    auto V = heat::solve_boundary_layer(h, g);
    double err1 = 0, err3 = 0;
    for (double t : {0.5 * TT, TT, 1.5 * TT}) {
      // Oracles from exact bump integrals of h.
      const double a = std::min(t, TT);
      const double m0 = static_cast<double>(baseflow::t_moment(h, 0, 0, a));
      const double m1 = static_cast<double>(baseflow::t_moment(h, 1, 0, a));
      err1 = std::max(err1, std::abs(heat::z_moment(V, t, 1) - m0));
      err3 = std::max(err3, std::abs(heat::z_moment(V, t, 3) - 6 * (t * m0 - m1)));
    }
    Ts.push_back(TT);
    Ls.push_back(L);
    Ms.push_back(m);
    e1.push_back(err1);
    e3.push_back(err3);
    w1 = std::max(w1, err1);
    w3 = std::max(w3, err3);
  }
  rec.csv("moment_identities.csv", {"T", "L", "m", "first_moment_error", "third_moment_error"}, {Ts, Ls, Ms, e1, e3});
  c.values.push_back({"designs", static_cast<double>(s.random_designs)});
  c.values.push_back({"max_first_moment_error", w1});
  c.values.push_back({"max_third_moment_error", w3});
  c.pass = w1 <= 1e-8 && w3 <= 1e-7;
  c.detail = "int z V = int_0^t h to 1e-8, int z^3 V = 6 int_0^t (t-s) h to 1e-7 at t = T/2, T, 3T/2";
  return c;
}

Criterion rescaling(const Scenario& s, Recorder& rec) {
  Criterion c{5, "rescaled trace relation", false, "", {}};
  auto V = profile(s.scaling.T, s.scaling.L, 1, false);
  const double T = s.scaling.T;
  const double base = heat::l2_norm(*V, T);
  std::vector<double> eps, ratio, direct;
  bool ok = true;
  for (double e : s.trace_eps) {
    if (e > 1e-2) continue;
    const double r = heat::rescaled_trace_norm(*V, T, e) / (std::pow(e, 0.25) * base);
    // Independent: |V(T, (1 + y)/sqrt(eps))|_{L2(-1, 1)} in wall coordinates.
    const double se = std::sqrt(e);
    auto f = [&](double y) {
      const double v = static_cast<double>(V->value(T, (1 + y) / se));
      return v * v;
    };
    const double layer = 40 * std::sqrt(T) * se - 1;
    double acc = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -1.0, std::min(layer, 1.0), 12, 1e-13);
    if (layer < 1) acc += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, layer, 1.0, 12, 1e-13);
    const double d = std::sqrt(acc) / (std::pow(e, 0.25) * base);
    eps.push_back(e);
    ratio.push_back(r);
    direct.push_back(d);
    c.values.push_back({"ratio_eps_" + tag_eps(e), r});
    c.values.push_back({"wall_coordinate_ratio_eps_" + tag_eps(e), d});
    ok = ok && r >= 0.99 && r <= 1.01 && d >= 0.99 && d <= 1.01;
  }
  rec.csv("rescaled_trace.csv", {"eps", "ratio", "wall_coordinate_ratio"}, {eps, ratio, direct});
  c.pass = ok && !eps.empty();
  c.detail = "ratio in [0.99, 1.01] for every eps <= 1e-2 (m = 1, t = T), also recomputed by quadrature in y";
  return c;
}

Criterion solver_verification(const Scenario&, Recorder& rec) {
  Criterion c{6, "solver verification", false, "", {}};
  auto r = ns::manufactured_convergence(0.1);
  std::vector<double> ny(r.ny.begin(), r.ny.end());
  rec.csv("mms_space.csv", {"ny", "error"}, {ny, r.space_error});
  rec.csv("mms_time.csv", {"dt", "error"}, {r.dt, r.time_error});
  auto e = ns::energy_audit();
  rec.csv("energy.csv", {"t", "energy"}, {e.t, e.energy});
  c.values.push_back({"space_order", r.space_order});
  c.values.push_back({"time_order", r.time_order});
  c.values.push_back({"energy_max_increase", e.max_increase});
  c.pass = r.space_order >= 1.9 && r.time_order >= 1.9 && e.monotone;
  c.detail = "manufactured-solution orders >= 1.9 in y and t; unforced energy nonincreasing";
  return c;
}

Criterion flushing(const Scenario& s, Recorder& rec) {
  Criterion c{7, "flushing property", false, "", {}};
  const double T = s.scaling.T, L = s.scaling.L;
  Grid g = run_grid(s);
  auto ext = ns::bundled_datum(g, s.sigma, s.amplitude);
  transport::TransportProfile p(ext.psi, designed(T, L, s.run.m), baseflow::design_cutoff(T));
  const auto times = linspace(T / 3, 2 * T / 3, 31);
  std::vector<double> nrm;
  double worst = 0;
  for (double t : times) {
    const double v = field::l2(p.velocity(t), std::make_pair(0.0, L));
    nrm.push_back(v);
    worst = std::max(worst, v);
  }
  rec.csv("flushed_window.csv", {"t", "u1_l2_omega"}, {times, nrm});
  auto f = transport::sample_forces(p, linspace(0, T, 61));
  auto sup = transport::verify_support(f, {T / 3, 2 * T / 3, 2 * L, 5 * L}, 1e-8);
  // Tail bound the bundled extension is built with.
  const double tol = std::max(ext.tail, 1e-6 * field::l2(ext.u, std::make_pair(0.0, L)));
  c.values.push_back({"max_u1_l2_omega", worst});
  c.values.push_back({"extension_tail", ext.tail});
  c.values.push_back({"tolerance", tol});
  c.values.push_back({"force_leakage", sup.leakage});
  c.pass = worst <= tol && sup.within && sup.leakage <= 1e-8;
  c.detail = "|u1(t)|_Omega| <= max(extension tail, 1e-6 |u_star|_Omega|) on [T/3, 2T/3]; force inside [T/3, 2T/3] x [2L, 5L] to 1e-8";
  return c;
}

ns::RunResult flush_simulation(const Scenario& s, Recorder& rec, const std::string& tag) {
  Grid g = run_grid(s);
  Field2D u_star;
  if (s.datum_file.empty()) {
    u_star = ns::bundled_datum(g, s.sigma, s.amplitude).u;
  } else {
    u_star = io::read_field(s.datum_file);
    const Grid& f = u_star.grid();
    if (f.nx != g.nx || f.ny != g.ny || f.x_min != g.x_min || f.x_max != g.x_max || u_star.ncomp() != 2)
      throw ConfigError("datum.file '" + s.datum_file + "' does not match the configured grid (2 components, nx, ny, x range)");
  }
  io::write_field(rec.path("u_star_" + tag + ".bin"), u_star);
  auto r = ns::run_scaled(s.scaling, u_star, s.run, context_for(s));
  write_run(rec, r, tag);
  return r;
}

Criterion eps_refinement(const Scenario& s, Recorder& rec) {
  Criterion c{8, "epsilon refinement", false, "", {}};
  Grid g = run_grid(s);
  auto ext = ns::bundled_datum(g, s.sigma, s.amplitude);
  auto ctx = context_for(s);
  std::vector<double> eps = s.eps_list;
  std::sort(eps.begin(), eps.end(), std::greater<>());
  const int n = static_cast<int>(eps.size());
  auto res = fork_map(2 * n, s.workers, [&](int i) {
    Scenario si = s;
    si.scaling.eps = eps[i % n];
    si.run.flush = i < n;
    auto r = ns::run_scaled(si.scaling, ext.u, si.run, ctx);
    write_run(rec, r, std::string(si.run.flush ? "flush" : "ablate") + "_eps" + tag_eps(si.scaling.eps));
    return json({{"final_norm", r.final_norm}, {"final_ratio", r.final_ratio}, {"r_sup", r.r_sup}}).dump();
  });
  std::vector<double> fr, ar, fn, an, rs;
  for (int i = 0; i < 2 * n; ++i) {
    json j = json::parse(res[i]);
    (i < n ? fr : ar).push_back(j["final_ratio"].get<double>());
    (i < n ? fn : an).push_back(j["final_norm"].get<double>());
    if (i < n) rs.push_back(j["r_sup"].get<double>());
  }
  rec.csv("eps_study.csv", {"eps", "flush_final_norm", "flush_ratio", "flush_r_sup", "ablation_final_norm", "ablation_ratio"},
          {eps, fn, fr, rs, an, ar});
  for (int i = 0; i < n; ++i) {
    c.values.push_back({"flush_ratio_eps_" + tag_eps(eps[i]), fr[i]});
    c.values.push_back({"ablation_ratio_eps_" + tag_eps(eps[i]), ar[i]});
  }
  const bool flush_dec = strictly_decreasing(fr, s.margin);
  const bool abl_dec = strictly_decreasing(ar, s.margin);
  c.values.push_back({"flush_decreasing", flush_dec ? 1.0 : 0.0});
  c.values.push_back({"ablation_decreasing", abl_dec ? 1.0 : 0.0});
  bool below = true;
  for (int i = 0; i < n; ++i) below = below && ar[i] < fr[i];
  // Context only, not part of the pass rule.
  c.values.push_back({"ablation_below_flush", below ? 1.0 : 0.0});
  c.pass = flush_dec && !abl_dec;
  std::ostringstream os;
  os << "final |u(T/eps)|_Omega|/eps must drop by > " << 100 * s.margin
     << "% per refinement with flushing and fail to with h = 0";
  c.detail = os.str();
  return c;
}

Criterion radius_cointegration(const Scenario& s, Recorder& rec) {
  Criterion c{9, "radius co-integration", false, "", {}};
  Grid g = run_grid(s);
  auto ext = ns::bundled_datum(g, s.sigma, s.amplitude);
  auto ctx = context_for(s);
  const double loss = ctx->loss.value;
  const double factors[2] = {s.rho0_factor, s.rho0_low_factor};
  auto res = fork_map(2, s.workers, [&](int i) {
    ns::RunOptions o = s.run;
    o.flush = true;
    o.co_integrate = true;
    o.rho0 = factors[i] * loss;
    auto r = ns::run_scaled(s.scaling, ext.u, o, ctx);
    write_run(rec, r, i == 0 ? "radius_default" : "radius_halved");
    const auto& tr = *r.radius;
    return json({{"valid", tr.valid},
                 {"invalid_at", tr.invalid_at},
                 {"final_rho", tr.final_rho()},
                 {"N", tr.N},
                 {"b0", tr.b.empty() ? 0.0 : tr.b.front()},
                 {"cs", tr.cs_bound}})
        .dump();
  });
  json a = json::parse(res[0]), b = json::parse(res[1]);
  const double t_end = s.scaling.T / s.scaling.eps;
  c.values.push_back({"total_radius_loss", loss});
  c.values.push_back({"rho0_default", factors[0] * loss});
  c.values.push_back({"default_valid", a["valid"].get<bool>() ? 1.0 : 0.0});
  c.values.push_back({"default_invalid_at", a["invalid_at"].get<double>()});
  c.values.push_back({"default_final_rho", a["final_rho"].get<double>()});
  c.values.push_back({"default_N", a["N"].get<double>()});
  c.values.push_back({"default_b_at_0", a["b0"].get<double>()});
  c.values.push_back({"default_cauchy_schwarz", a["cs"].get<double>()});
  c.values.push_back({"rho0_halved", factors[1] * loss});
  c.values.push_back({"halved_valid", b["valid"].get<bool>() ? 1.0 : 0.0});
  c.values.push_back({"halved_invalid_at", b["invalid_at"].get<double>()});
  const bool keep = a["valid"].get<bool>();
  const bool drop = !b["valid"].get<bool>() && b["invalid_at"].get<double>() <= t_end;
  c.pass = keep && drop;
  c.detail = "rho stays positive to T/eps from 2x the loss; invalidity reported from half the loss";
  return c;
}

Criterion phantom_ledger(const Scenario& s, Recorder& rec) {
  Criterion c{10, "phantom ledger", false, "", {}};
  Grid g = run_grid(s);
  auto ext = ns::bundled_datum(g, s.sigma, s.amplitude);
  auto ctx = context_for(s);
  ns::RunOptions o = s.run;
  o.flush = true;
  o.enforce_budget = true;
  bool ok = true;

  auto check = [&](bool regularize, const std::string& tag) {
    ns::RunOptions oo = o;
    oo.regularize = regularize;
    auto ts = ns::build_transport(s.scaling, ext.u, oo, ctx.get());
    auto led = ns::phantom_ledger(s.scaling, ts.u1, oo.ledger_samples);
    rec.csv("ledger_" + tag + ".csv", {"t", "phantom_hk"}, {led.t, led.hk});
    c.values.push_back({tag + "_phantom_l1_hk", led.l1_hk});
    if (regularize) c.values.push_back({tag + "_cutoff_index", static_cast<double>(ts.cutoff_index)});
    bool fired = false;
    if (led.l1_hk > s.scaling.eta) {
      // Over budget: the pipeline must refuse to run.
      try {
        ns::run_scaled(s.scaling, ext.u, oo, ctx);
      } catch (const BudgetExceededError&) {
        fired = true;
      }
      ok = ok && fired;
    }
    c.values.push_back({tag + "_budget_error", fired ? 1.0 : 0.0});
    return led.l1_hk;
  };
  const double plain = check(false, "bundled");
  // Guard: the same pipeline under a budget below the realized norm.
  {
    ns::ScalingConfig tight = s.scaling;
    tight.eta = 0.5 * plain;
    bool fired = false;
    if (tight.eta > 0) {
      try {
        ns::run_scaled(tight, ext.u, o, ctx);
      } catch (const BudgetExceededError&) {
        fired = true;
      }
    }
    c.values.push_back({"guard_budget_error", fired ? 1.0 : 0.0});
    ok = ok && fired;
  }
  check(true, "regularized");
  c.values.push_back({"eta", s.scaling.eta});
  c.pass = ok;
  c.detail = "realized phantom L1(0,T;H^k) <= eta, otherwise the budget error fires (checked with and without regularization)";
  return c;
}

// ---------------------------------------------------------------------------------------------

std::vector<Criterion> run_scenario(const Scenario& s) {
  check_scenario(s);
  Recorder rec(s.out_dir);
  rec.text("config_echo.json", scenario_json(s));
  auto add = [&](Criterion c) { rec.add(c); };
  switch (s.kind) {
    case Kind::decay:
      add(heat_decay(s, rec));
      add(moment_transfer(s, rec));
      break;
    case Kind::scale:
      add(final_layer_scaling(s, rec));
      add(rescaling(s, rec));
      break;
    case Kind::radius:
      add(radius_budget(s, rec));
      add(radius_cointegration(s, rec));
      break;
    case Kind::ablate:
      add(eps_refinement(s, rec));
      break;
    case Kind::flush: {
      if (s.verify_solver) add(solver_verification(s, rec));
      add(flushing(s, rec));
      add(phantom_ledger(s, rec));
      auto r = flush_simulation(s, rec, "flush");
      Criterion c{0, "final ratio within theta", r.pass, "", {}};
      c.values.push_back({"final_norm", r.final_norm});
      c.values.push_back({"final_ratio", r.final_ratio});
      c.values.push_back({"theta", s.scaling.theta});
      c.values.push_back({"phantom_l1_hk", r.phantom_l1_hk});
      c.values.push_back({"steps", static_cast<double>(r.steps)});
      c.detail = "|u(T/eps)|_Omega| / eps <= theta (diagnostics_flush.csv, manifest_flush.json)";
      add(c);
      break;
    }
  }
  rec.finish(s);
  return rec.criteria();
}

}  // namespace flushlab::experiment
