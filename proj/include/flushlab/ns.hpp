#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flushlab/analytic.hpp"
#include "flushlab/baseflow.hpp"
#include "flushlab/extension.hpp"
#include "flushlab/field.hpp"
#include "flushlab/heat.hpp"
#include "flushlab/transport.hpp"

namespace flushlab::ns {

using field::Field2D;
using field::Grid;
using field::Spectrum;

struct ScalingConfig {
  double eps = 0.1;
  double T = 3.0;
  double L = 1.0;
  double eta = 1e-3;   // phantom budget
  int k = 2;           // Sobolev order of the phantom norm
  double delta = 0.1;  // vertical localization margin
  double theta = 1.0;  // smallness threshold on |u(T/eps)|_Omega| / eps

  void validate() const;  // throws ConfigError
};

// Normalized tanh transitions: lower(-1) = 1, lower(1) = 0, lower + upper = 1.
struct WallCutoffs {
  double width = 0.2;
  double lower(double y) const;
  double upper(double y) const { return lower(-y); }
};

struct AnsatzBundle {
  baseflow::BaseFlow h;
  std::shared_ptr<const heat::HalfLineProfile> V;  // null when h == 0
  transport::TransportProfile u1;
  WallCutoffs chi;
  double eps = 0.1;
};

// [h - chi_-(y) V(t, (1+y)/sqrt(eps)) - chi_+(y) V(t, (1-y)/sqrt(eps))] e_x + eps u1(t)
Field2D assemble_ansatz(const AnsatzBundle& b, double t);
// Layer part only (x-independent), one value per y node.
std::vector<double> layer_profile(const AnsatzBundle& b, double t);

// Body force f(t); an empty field (ncomp() == 0) means zero.
using ForceFn = std::function<Field2D(double)>;
// Uniform tangential forcing (a mean pressure gradient), given by its primitive P(t);
// a step from t0 to t1 adds P(t1) - P(t0) to the tangential velocity.
using DriveFn = std::function<double(double)>;

struct SolverOptions {
  double cfl = 0.5;
  double dt_max = 0.05;
  double dealias = 2.0 / 3.0;
};

// d_t u + (u.grad)u - eps Lap u + grad p = f on the periodic band with no-slip walls.
// Per tangential mode: vorticity and stream function, wall vorticity from an influence matrix,
// Crank-Nicolson diffusion and Heun advection. The mean flow is advanced as a velocity profile.
class Solver {
 public:
  Solver(const Grid& g, double eps, SolverOptions opt = {});

  void set_state(const Field2D& u, double t = 0.0);
  Field2D velocity() const;
  double time() const { return t_; }
  const Grid& grid() const { return grid_; }
  double eps() const { return eps_; }
  const SolverOptions& options() const { return opt_; }

  // Largest dt allowed by the CFL number on the current state.
  double cfl_dt(double cfl) const;
  // One step of exactly dt. Throws CflError when dt exceeds the CFL limit (cfl = 1).
  void step(double dt, const ForceFn& f = {}, const DriveFn& G = {});
  // One adaptive step, not past t_stop. Returns the dt used.
  double advance(double t_stop, const ForceFn& f = {}, const DriveFn& G = {});
  std::size_t steps() const { return steps_; }

 private:
  struct ModeOps;
  struct Nonlinear;
  struct Forcing;

  void rebuild(double dt, double wall);
  Nonlinear nonlinear(const Spectrum& psi, const Spectrum& om, const std::vector<double>& ub) const;
  Forcing forcing(double t, const ForceFn& f);
  void solve_mode(int k, std::vector<field::cplx>& rhs, Spectrum& om, Spectrum& psi) const;
  void do_step(double dt, const ForceFn& f, const DriveFn& G);

  Grid grid_;
  double eps_;
  SolverOptions opt_;
  int kc_ = 0;
  double dt_ops_ = -1;
  double wall_ops_ = 0;
  bool wall_fresh_ = true;  // wall vorticity not yet produced by a step
  std::vector<std::shared_ptr<ModeOps>> ops_;
  Spectrum psi_, om_;
  std::vector<double> ub_;
  double t_ = 0;
  std::size_t steps_ = 0;
  mutable std::shared_ptr<Nonlinear> nl_now_;
  std::shared_ptr<Forcing> force_cache_;
};

Field2D step_ns(const Field2D& state, double dt, double eps, const Field2D& force);

// Method of manufactured solutions: observed orders in y and in t.
struct ConvergenceReport {
  std::vector<int> ny;
  std::vector<double> space_error;
  double space_order = 0;
  std::vector<double> dt;
  std::vector<double> time_error;
  double time_order = 0;
};
ConvergenceReport manufactured_convergence(double eps = 0.1);

// Unforced energy history.
struct EnergyAudit {
  std::vector<double> t, energy;
  double max_increase = 0;   // max (E_{n+1} - E_n) / E_0
  double max_dt = 0;
  bool monotone = false;     // every increase <= dt^2 E_0
};
EnergyAudit energy_audit(double eps = 0.01, int steps = 200, int nx = 64, int ny = 64);

// Gaussian vortex in Omega = (0, L) x (-1, 1), extended to the band.
field::Extension bundled_datum(const Grid& g, double sigma = 0.07, double amplitude = 0.05);

struct RunOptions {
  int m = 1;                   // vanishing moments of h
  int nx = 320, ny = 128;
  double x_min = -4, x_max = 6;
  SolverOptions solver{};
  bool flush = true;           // false: h == 0 ablation, control-zone force only
  bool regularize = false;     // low-pass trim of u_star before the run
  double rho_target = 0;       // 0: 2 * total radius loss
  double tau = 0.5;            // regularizing ramp length
  bool enforce_budget = true;
  bool co_integrate = false;
  double rho0 = 0;             // 0: 2 * total radius loss
  int N = -1;                  // truncation for r_rho; -1: largest representable at rho0
  double output_dt = 0.05;     // diagnostics spacing for t <= 2T
  double output_dt_late = 0.25;
  int snapshot_stride = 0;     // keep every n-th diagnostic state (0: none)
  int ledger_samples = 301;
};

struct Diagnostic {
  double t = 0;
  double omega_norm = 0;  // |u|_{L2(Omega)}
  double r_norm = 0;      // |r|_{L2}
  double rho = 0;
  double ell = 0;
  double b = 0;
  double sigma = 0;       // d|r|/dt over the last interval
};

struct RemainderState {
  Field2D r;
  Field2D r_rho;
  double l2 = 0;
  double b = 0;  // eps |grad r_rho|_{B^0_{2,1}}
};

RemainderState extract_remainder(const Field2D& u_eps, const AnsatzBundle& b, double t, double rho = 0, int N = -1);

struct RunResult {
  ScalingConfig config;
  RunOptions options;
  std::vector<Diagnostic> diag;
  std::vector<Field2D> snapshots;
  double final_norm = 0;   // |u(T/eps)|_{L2(Omega)}
  double final_ratio = 0;  // final_norm / eps
  bool pass = false;       // final_ratio <= theta
  double phantom_l1_hk = 0;
  std::vector<double> ledger_t, ledger_hk;
  double residual_max = 0;
  double r_sup = 0;
  std::size_t steps = 0;
  double total_loss = 0;
  bool regularized = false;
  int cutoff_index = -1;
  std::optional<analytic::RadiusTrace> radius;
  std::vector<std::string> warnings;
};

// Cached pieces shared between runs with the same T, L, m.
struct Context {
  baseflow::BaseFlow h;
  std::shared_ptr<const heat::HalfLineProfile> V;
  heat::RadiusLoss loss;
  std::vector<std::pair<double, double>> ell;  // loss integrand table
};
std::shared_ptr<Context> make_context(const ScalingConfig& c, int m, bool with_profile = true);

// Transport profile of u_star for the run (h == 0 when opt.flush is false); with opt.regularize the
// trimmed tail is switched off by a ramp of length opt.tau.
struct TransportSetup {
  transport::TransportProfile u1;
  bool regularized = false;
  int cutoff_index = -1;
};
TransportSetup build_transport(const ScalingConfig& c, const Field2D& u_star, const RunOptions& opt,
                               const Context* ctx);

// Realized phantom force norm L1(0, T; H^k(Omega)) of the transport force.
struct PhantomLedger {
  std::vector<double> t, hk;
  double l1_hk = 0;
  double residual_max = 0;
};
PhantomLedger phantom_ledger(const ScalingConfig& c, const transport::TransportProfile& u1, int samples);

RunResult run_scaled(const ScalingConfig& c, const Field2D& u_star, const RunOptions& opt = {},
                     std::shared_ptr<Context> ctx = nullptr);
RunResult co_integrate(const ScalingConfig& c, const Field2D& u_star, RunOptions opt = {},
                       std::shared_ptr<Context> ctx = nullptr);

void write_diagnostics_csv(const std::string& path, const RunResult& r);
std::string manifest_json(const RunResult& r);

}  // namespace flushlab::ns
