#include <cmath>
#include <limits>
#include <memory>

#include "doctest.h"
#include "flushlab/errors.hpp"
#include "flushlab/norms.hpp"
#include "flushlab/ns.hpp"
#include "flushlab/operators.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace flushlab;
using namespace flushlab::field;
using namespace flushlab::ns;

namespace {

std::shared_ptr<Context> shared_context() {
  static auto ctx = make_context(ScalingConfig{}, 1, true);
  return ctx;
}

Field2D vortex_state(const Grid& g, double amp = 0.3) {
  Field2D psi = sample(g, 1, [&](int, double x, double y) {
    return amp * std::sin(g.dxi() * 2 * x) * (1 - y * y) * (1 - y * y) + 0.1 * amp * std::cos(g.dxi() * 3 * x + 1) * (1 - y * y) * (1 - y * y);
  });
  return perp_grad(psi);
}

AnsatzBundle bundle_for(const Grid& g, double eps, const Field2D& u_star) {
  auto ctx = shared_context();
  AnsatzBundle b;
  b.h = ctx->h;
  b.V = ctx->V;
  b.eps = eps;
  b.u1 = transport::TransportProfile(stream_function_of(u_star), b.h, baseflow::design_cutoff(3.0));
  return b;
}

}  // namespace

TEST_CASE("zero state and zero force stay zero") {
  Grid g = testutil::band(40, 16);
  Field2D z(g, 2);
  Field2D out = step_ns(z, 0.01, 0.1, Field2D());
  CHECK(out.max_abs() == 0.0);
  Solver s(g, 0.1);
  s.set_state(z);
  for (int i = 0; i < 5; ++i) s.advance(1.0);
  CHECK(s.velocity().max_abs() == 0.0);
}

TEST_CASE("manufactured solution converges at second order in y and t") {
  ConvergenceReport r = manufactured_convergence(0.1);
  REQUIRE(r.space_error.size() == 3);
  CHECK(r.space_error[0] > r.space_error[1]);
  CHECK(r.space_error[1] > r.space_error[2]);
  CHECK(r.space_order >= 1.9);
  CHECK(r.time_error[0] > r.time_error[1]);
  CHECK(r.time_error[1] > r.time_error[2]);
  CHECK(r.time_order >= 1.9);
}

TEST_CASE("unforced energy is nonincreasing") {
  EnergyAudit a = energy_audit(0.01, 150, 64, 48);
  CHECK(a.monotone);
  CHECK(a.energy.back() < a.energy.front());
  CHECK(a.max_increase <= 1e-12);
}

TEST_CASE("evolved state keeps the discrete divergence at round-off") {
  Grid g = testutil::band(40, 32);
  Solver s(g, 0.05);
  s.set_state(vortex_state(g));
  for (int i = 0; i < 20; ++i) {
    s.advance(std::numeric_limits<double>::infinity());
    Field2D u = s.velocity();
    CHECK(divergence_max(u, true) <= 1e-8);
  }
}

TEST_CASE("no-slip and impermeability hold after a step") {
  Grid g = testutil::band(40, 32);
  Solver s(g, 0.05);
  s.set_state(vortex_state(g));
  s.advance(0.2);
  Field2D u = s.velocity();
  for (int i = 0; i < g.nx; ++i)
    for (int c = 0; c < 2; ++c) {
      CHECK(std::abs(u.at(c, 0, i)) < 1e-12);
      CHECK(std::abs(u.at(c, g.ny, i)) < 1e-12);
    }
}

TEST_CASE("CFL violation and NaN guard") {
  Grid g = testutil::band(40, 32);
  Solver s(g, 0.05);
  s.set_state(vortex_state(g, 5.0));
  const double lim = s.cfl_dt(1.0);
  CHECK_THROWS_AS(s.step(2 * lim), CflError);
  CHECK_NOTHROW(s.step(0.5 * lim));

  Field2D bad = vortex_state(g);
  ForceFn f = [&](double) {
    Field2D v(g, 2);
    v.at(0, 5, 3) = std::numeric_limits<double>::quiet_NaN();
    return v;
  };
  Solver s2(g, 0.05);
  s2.set_state(bad);
  CHECK_THROWS_AS(s2.step(1e-3, f), NanError);
  CHECK_THROWS_AS(s2.step(-1.0), ConfigError);
}

TEST_CASE("uniform drive adds its exact increment to the mean flow") {
  Grid g = testutil::band(40, 64);
  Solver s(g, 0.1);
  s.set_state(Field2D(g, 2));
  DriveFn P = [](double t) { return std::sin(3 * t); };
  while (s.time() < 0.2) s.advance(0.2, {}, P);
  Field2D u = s.velocity();
  // Centre of the channel: the layers (width sqrt(0.02)) contribute ~erfc(3.5).
  CHECK(std::abs(u.at(0, g.ny / 2, 0) - std::sin(0.6)) <= 1e-6);
  CHECK(std::abs(u.at(1, g.ny / 2, 0)) < 1e-14);
}

TEST_CASE("scaling config ranges") {
  ScalingConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [](auto mutate) {
    ScalingConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](ScalingConfig& c) { c.eps = 1.5; });
  bad([](ScalingConfig& c) { c.eps = 0.0; });
  bad([](ScalingConfig& c) { c.T = -1; });
  bad([](ScalingConfig& c) { c.L = 0; });
  bad([](ScalingConfig& c) { c.eta = 0; });
  bad([](ScalingConfig& c) { c.delta = 1.0; });
  bad([](ScalingConfig& c) { c.theta = 0; });
  try {
    ScalingConfig e;
    e.eps = 1.5;
    e.validate();
  } catch (const ConfigError& err) {
    CHECK(std::string(err.what()).find("range error") != std::string::npos);
  }
}

TEST_CASE("wall cutoffs") {
  WallCutoffs chi;
  CHECK(chi.lower(-1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(chi.lower(1)) < 1e-15);
  for (double y = -1; y <= 1; y += 0.1) CHECK(chi.lower(y) + chi.upper(y) == doctest::Approx(1.0));
}

TEST_CASE("ansatz at t = 0 is eps u_star and the remainder starts at zero") {
  Grid g = testutil::band(320, 64);
  Extension ext = bundled_datum(g);
  const double eps = 0.1;
  AnsatzBundle b = bundle_for(g, eps, ext.u);
  Field2D a0 = assemble_ansatz(b, 0.0);
  Field2D e = eps * ext.u;
  CHECK(testutil::max_diff(a0, e) <= 1e-12 * std::max(1.0, e.max_abs()));
  RemainderState r0 = extract_remainder(e, b, 0.0);
  CHECK(r0.l2 <= 1e-10);
}

TEST_CASE("ansatz: wall trace, divergence, remainder consistency") {
  Grid g = testutil::band(320, 64);
  Extension ext = bundled_datum(g);
  const double eps = 0.05;
  AnsatzBundle b = bundle_for(g, eps, ext.u);
  for (double t : {0.2, 0.9, 1.7, 3.0, 6.0}) {
    Field2D a = assemble_ansatz(b, t);
    const double tol = 1e-8 + std::exp(-1 / (4 * std::sqrt(eps)));
    double trace = 0;
    for (int i = 0; i < g.nx; ++i) trace = std::max({trace, std::abs(a.at(0, 0, i) - eps * b.u1.velocity(t).at(0, 0, i)),
                                                     std::abs(a.at(0, g.ny, i) - eps * b.u1.velocity(t).at(0, g.ny, i))});
    CHECK(trace <= tol);
    // The layer part is x-independent and horizontal.
    Field2D layer = a - eps * b.u1.velocity(t);
    CHECK(divergence_max(layer, false) <= 1e-10);
    RemainderState r = extract_remainder(a, b, t);
    CHECK(r.r.max_abs() <= 1e-12 * std::max(1.0, a.max_abs()) / eps);
  }
}

TEST_CASE("after the transport window the ansatz on Omega is the layer only") {
  Grid g = testutil::band(320, 64);
  Extension ext = bundled_datum(g);
  const double eps = 0.1;
  AnsatzBundle b = bundle_for(g, eps, ext.u);
  const XWindow omega = std::make_pair(0.0, 1.0);
  for (double t : {3.0, 6.0}) {
    Field2D a = assemble_ansatz(b, t);
    Field2D layer(g, 2);
    const auto lp = layer_profile(b, t);
    for (int j = 0; j <= g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) layer.at(0, j, i) = lp[j];
    CHECK(l2(a - layer, omega) <= 1e-6 * eps);
  }
}

TEST_CASE("resolution guard") {
  Grid g = testutil::band(40, 16);
  ScalingConfig c;
  c.eps = 0.1;
  RunOptions o;
  o.flush = false;
  CHECK_THROWS_AS(run_scaled(c, Field2D(g, 2), o), ResolutionError);
}

TEST_CASE("zero datum without flushing stays zero") {
  Grid g = testutil::band(40, 48);
  ScalingConfig c;
  c.eps = 0.2;
  RunOptions o;
  o.flush = false;
  o.nx = 40;
  o.ny = 48;
  RunResult r = run_scaled(c, Field2D(g, 2), o);
  REQUIRE(!r.diag.empty());
  for (const auto& d : r.diag) {
    CHECK(d.omega_norm == 0.0);
    CHECK(d.r_norm == 0.0);
  }
  CHECK(r.final_norm == 0.0);
  CHECK(r.pass);
  CHECK(r.diag.back().t == doctest::Approx(c.T / c.eps));
}

TEST_CASE("co-integration with no feedback keeps rho0 minus the loss") {
  Grid g = testutil::band(40, 48);
  ScalingConfig c;
  c.eps = 0.2;
  RunOptions o;
  o.flush = false;
  o.rho0 = 5.0;
  o.nx = 40;
  o.ny = 48;
  RunResult r = co_integrate(c, Field2D(g, 2), o, shared_context());
  REQUIRE(r.radius);
  CHECK(r.radius->valid);
  CHECK(r.radius->final_rho() == doctest::Approx(5.0));
  CHECK(analytic::trace_consistency(*r.radius) <= 1e-12);
}

TEST_CASE("coarse flushing run: ledger, budget and manifest") {
  const int nx = 320, ny = 48;
  Grid g = testutil::band(nx, ny);
  Extension ext = bundled_datum(g);
  ScalingConfig c;
  c.eps = 0.2;
  RunOptions o;
  o.nx = nx;
  o.ny = ny;
  o.output_dt = 0.25;
  o.output_dt_late = 1.0;
  o.ledger_samples = 61;
  RunResult r = run_scaled(c, ext.u, o, shared_context());
  CHECK(r.phantom_l1_hk <= c.eta);
  CHECK(std::isfinite(r.final_ratio));
  CHECK(r.diag.front().r_norm <= 1e-10);
  CHECK(r.diag.back().t == doctest::Approx(c.T / c.eps));
  auto j = nlohmann::json::parse(manifest_json(r));
  CHECK(j["config"]["eps"] == 0.2);
  CHECK(j["options"]["ny"] == ny);
  CHECK(j["ledger"]["within_budget"] == true);
  CHECK(j.contains("code_version"));

  ScalingConfig tight = c;
  tight.eta = r.phantom_l1_hk / 2;
  CHECK_THROWS_AS(run_scaled(tight, ext.u, o, shared_context()), BudgetExceededError);
  RunOptions lax = o;
  lax.enforce_budget = false;
  lax.output_dt = 1.0;
  lax.output_dt_late = 5.0;
  CHECK_NOTHROW(run_scaled(tight, ext.u, lax, shared_context()));
}
