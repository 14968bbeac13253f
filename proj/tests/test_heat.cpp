#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "flushlab/baseflow.hpp"
#include "flushlab/errors.hpp"
#include "flushlab/heat.hpp"

using namespace flushlab;
using heat::real;

namespace {

constexpr double T = 3.0;

const baseflow::BaseFlow& design(int m) {
  static std::map<int, baseflow::BaseFlow> cache;
  auto it = cache.find(m);
  if (it == cache.end()) it = cache.emplace(m, baseflow::design_base_flow(T, 1.0, m)).first;
  return it->second;
}

const heat::HalfLineProfile& profile(int m) {
  static std::map<int, heat::HalfLineProfile> cache;
  auto it = cache.find(m);
  if (it == cache.end()) it = cache.emplace(m, heat::solve_boundary_layer(design(m))).first;
  return it->second;
}

heat::HalfLineProfile lazy(const heat::BoundaryData& d) {
  heat::ProfileGrid g;
  g.tabulate = false;
  return heat::solve_boundary_layer(d, g);
}

template <class F>
long double simpson(F&& f, long double a, long double b, int n = 60000) {
  const long double h = (b - a) / n;
  long double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0L : 2.0L) * f(a + i * h);
  return s * h / 3;
}

// One positive bump on (0, T/3): integral nonzero.
heat::BoundaryData single_lobe() {
  auto b = baseflow::bump_basis(0.0, T / 3, 1).front();
  return heat::from_functions([b](real t) { return b.value(t); }, [b](real t) { return b.derivative(t); },
                              {{b.a(), b.b()}}, T);
}

}  // namespace

TEST_CASE("zero data gives a zero profile") {
  auto d = heat::from_functions([](real) { return 0.0L; }, [](real) { return 0.0L; }, {{0.0L, 1.0L}}, 1.0L);
  auto V = lazy(d);
  CHECK(V.value(0.5, 0.3) == 0);
  CHECK(heat::l2_norm(V, 2.0) == 0);
  CHECK(heat::weighted_grad_norm(V, 2.0) == 0);
  CHECK(heat::z_moment(V, 2.0, 3) == 0);
  CHECK(heat::rescaled_trace_norm(V, 2.0, 0.01) == 0);
  heat::ProfileGrid g;
  g.support_points = 8;
  g.per_decade = 4;
  auto tab = heat::solve_boundary_layer(d, g);
  auto rl = heat::total_radius_loss(tab);
  CHECK(rl.value == 0);
  CHECK_FALSE(rl.divergent);
}

TEST_CASE("step data matches the erfc solution") {
  auto V = lazy(heat::step_data());
  CHECK(static_cast<double>(V.value(1, 2)) == doctest::Approx(0.15730).epsilon(1e-4));
  for (double t : {0.3, 1.0, 4.0})
    for (double z : {0.01, 0.5, 2.0, 5.0}) {
      CHECK(static_cast<double>(V.value(t, z)) == doctest::Approx(std::erfc(z / (2 * std::sqrt(t)))).epsilon(1e-10));
      CHECK(static_cast<double>(V.dz(t, z)) ==
            doctest::Approx(-std::exp(-z * z / (4 * t)) / std::sqrt(M_PI * t)).epsilon(1e-10));
    }
  CHECK(heat::weighted_grad_norm(V, 1.0) == doctest::Approx(std::sqrt(2 / (M_PI * M_E))).epsilon(1e-8));
  CHECK(heat::weighted_grad_norm(V, 1.0) == doctest::Approx(0.48394).epsilon(1e-4));
  // Maximum at z = sqrt(2t) for other times too.
  CHECK(heat::weighted_grad_norm(V, 5.0) == doctest::Approx(std::sqrt(2 / (M_PI * M_E))).epsilon(1e-8));
}

TEST_CASE("profile invariants for designed data") {
  const auto& V = profile(0);
  const auto& h = design(0);
  const double hmax = h.max_abs();
  CHECK(V.times().back() >= 1e4 * T);
  CHECK(V.times().front() == 0);
  for (const auto& s : V.slices()) {
    if (s.t == 0) {
      for (real v : s.V) CHECK(v == 0);
      continue;
    }
    CHECK(std::abs(static_cast<double>(s.V.back())) <= 1e-8 * hmax);
  }
  double trace = 0;
  for (int i = 1; i < 300; ++i) {
    const double t = T * i / 300.0;
    trace = std::max(trace, static_cast<double>(std::abs(V.value(t, 1e-9) - h.value(t))));
  }
  CHECK(trace <= 1e-6 * hmax);
}

TEST_CASE("quadrature and moment series agree past the switch") {
  const auto& fast = profile(1);
  heat::ProfileGrid g;
  g.tabulate = false;
  g.series_factor = 1e9;
  auto direct = heat::solve_boundary_layer(design(1), g);
  CHECK_FALSE(direct.uses_series(30));
  CHECK(fast.uses_series(30));
  for (double t : {7.0, 30.0})
    for (double z : {0.5, 3.0, 10.0}) {
      const double a = static_cast<double>(fast.value(t, z)), b = static_cast<double>(direct.value(t, z));
      CHECK(std::abs(a - b) <= 1e-9 * std::abs(b) + 1e-14);
      const double da = static_cast<double>(fast.dz(t, z)), db = static_cast<double>(direct.dz(t, z));
      CHECK(std::abs(da - db) <= 1e-9 * std::abs(db) + 1e-14);
    }
}

TEST_CASE("moment transfer identities") {
  const auto& h = design(0);
  const auto& V = profile(0);
  CHECK(std::abs(heat::z_moment(V, T, 1)) < 1e-8);
  const long double third = 6 * simpson([&](long double s) { return (T - s) * h.value(s); }, 0, T);
  CHECK(std::abs(heat::z_moment(V, T, 3) - static_cast<double>(third)) < 1e-7);
  CHECK(heat::z_moment(V, 0, 1) == 0);
  CHECK(heat::z_moment(V, 0, 5) == 0);
  for (double t : {0.5, 1.0, 1.5, 2.2, 5.0, 50.0}) {
    const long double oracle = simpson([&](long double s) { return h.value(s); }, 0, std::min(t, T));
    CHECK(std::abs(heat::z_moment(V, t, 1) - static_cast<double>(oracle)) < 1e-8);
  }
  CHECK_THROWS_AS(heat::z_moment(V, T, -1), ShapeError);
}

TEST_CASE("moment identities for random designs") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uT(1.5, 4.0), uL(0.5, 1.5);
  std::uniform_int_distribution<int> um(0, 3);
  for (int trial = 0; trial < 4; ++trial) {
    const double TT = uT(rng), L = uL(rng);
    const auto h = baseflow::design_base_flow(TT, L, um(rng));
    auto V = lazy(heat::from_base_flow(h));
    const double half = TT / 2;
    const long double first = simpson([&](long double s) { return h.value(s); }, 0, half);
    CHECK(std::abs(heat::z_moment(V, half, 1) - static_cast<double>(first)) < 1e-8);
    const long double third = 6 * simpson([&](long double s) { return (TT - s) * h.value(s); }, 0, TT);
    CHECK(std::abs(heat::z_moment(V, TT, 3) - static_cast<double>(third)) < 1e-7);
  }
}

TEST_CASE("fit_decay_exponent") {
  std::vector<std::pair<double, double>> s;
  for (int i = 0; i <= 20; ++i) {
    const double t = 10 * std::pow(100.0, i / 20.0);
    s.emplace_back(t, 2.5 * std::pow(t, -0.75));
  }
  CHECK(heat::fit_decay_exponent(s, {10, 1000}) == doctest::Approx(-0.75).epsilon(1e-12));
  CHECK_THROWS_AS(heat::fit_decay_exponent(s, {10, 50}), WindowError);
  CHECK_THROWS_AS(heat::fit_decay_exponent(s, {2000, 30000}), WindowError);
}

TEST_CASE("decay exponents drop by one per vanishing moment") {
  double prev = 0;
  for (int m = 0; m <= 3; ++m) {
    const auto series = heat::decay_series(profile(m), 10 * T, 1000 * T);
    const double p = heat::fit_decay_exponent(series, {10 * T, 1000 * T});
    // Leading low-frequency term: the (m+1)-th moment times a z-derivative of order 2m+3 of the heat kernel.
    const double theory = -(m + 1) - 0.75;
    CHECK(std::abs(p - theory) < 0.1);
    if (m == 0) CHECK(std::abs(p + 1.75) < 0.1);
    if (m > 0) {
      CHECK(std::abs((prev - p) - 1.0) < 0.15);
      CHECK(p <= prev - 0.85);
    }
    prev = p;
  }
}

TEST_CASE("radius loss") {
  for (int m = 1; m <= 3; ++m) {
    const auto& V = profile(m);
    auto ell = heat::loss_integrand(V);
    for (const auto& [t, l] : ell)
      if (t > 0) {
        CHECK(std::isfinite(l));
        CHECK(l > 0);
      }
    auto rl = heat::total_radius_loss(V);
    CHECK_FALSE(rl.divergent);
    CHECK(std::isfinite(rl.value));
    CHECK(rl.value > 0);
    CHECK(rl.tail_fraction < 0.01);
    CHECK(rl.exponent < -1.5);
  }
  heat::ProfileGrid g;
  auto lobe = heat::solve_boundary_layer(single_lobe(), g);
  auto rl = heat::total_radius_loss(lobe);
  CHECK(rl.divergent);
  CHECK(std::abs(rl.exponent + 1) < 0.05);
  CHECK_FALSE(rl.warning.empty());
}

TEST_CASE("maximum principle for nonnegative data") {
  auto V = heat::solve_boundary_layer(single_lobe());
  for (const auto& s : V.slices())
    for (real v : s.V) CHECK(static_cast<double>(v) >= -1e-10);
}

TEST_CASE("grid convergence of the final-time norm") {
  heat::ProfileGrid g;
  g.tabulate = false;
  auto coarse = heat::solve_boundary_layer(design(2), g);
  g.z_refine = 2;
  g.support_points *= 2;
  g.per_decade *= 2;
  auto fine = heat::solve_boundary_layer(design(2), g);
  const double a = heat::l2_norm(coarse, T), b = heat::l2_norm(fine, T);
  CHECK(std::abs(a - b) < 1e-3 * b);
}

TEST_CASE("rescaled trace norm") {
  const auto& V = profile(1);
  for (double eps : {1e-2, 3e-3, 1e-3, 1e-4}) {
    const double ratio = heat::rescaled_trace_norm(V, T, eps) / (std::pow(eps, 0.25) * heat::l2_norm(V, T));
    CHECK(ratio >= 0.99);
    CHECK(ratio <= 1.01);
  }
  // Amplitude 1/eps and width sqrt(eps): the trace norm scales like eps^{-3/4} ||V(T/eps)||.
  const auto& V3 = profile(3);
  for (double eps : {1e-2, 1e-3}) {
    const double t = T / eps;
    const double trace = heat::rescaled_trace_norm(V3, t, eps) / eps;
    const double rel = std::pow(eps, -0.75) * heat::l2_norm(V3, t);
    CHECK(trace == doctest::Approx(rel).epsilon(0.02));
  }
  CHECK_THROWS_AS(heat::rescaled_trace_norm(V, T, 0.0), ConfigError);
  CHECK_THROWS_AS(heat::rescaled_trace_norm(V, T, 2.0), ConfigError);
}
