#include <cmath>
#include <random>

#include "doctest.h"
#include "flushlab/baseflow.hpp"
#include "flushlab/errors.hpp"

using namespace flushlab;
using namespace flushlab::baseflow;

namespace {

// Composite Simpson on the raw evaluator: independent of the bump-variable quadrature
// used inside the library.
template <class F>
long double simpson(F&& f, long double a, long double b, int n = 60000) {
  if (n % 2) ++n;
  const long double h = (b - a) / n;
  long double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0L : 2.0L) * f(a + i * h);
  return s * h / 3;
}

long double integral(const BaseFlow& h, long double a, long double b, int k = 0) {
  return simpson([&](long double t) { return std::pow(t, k) * h.value(t); }, a, b);
}

}  // namespace

TEST_CASE("bump_basis examples") {
  auto b = bump_basis(0.0, 1.0, 1);
  REQUIRE(b.size() == 1);
  CHECK(b[0].a() == doctest::Approx(0.0));
  CHECK(b[0].b() == doctest::Approx(1.0));
  for (double t : {0.01, 0.25, 0.5, 0.75, 0.99}) CHECK(b[0].value(t) > 0);
  for (double t : {-0.5, 0.0, 1.0, 1.5}) CHECK(b[0].value(t) == 0);
  CHECK(std::abs(b[0].derivative(0.0)) == 0);
  CHECK(std::abs(b[0].derivative(1.0)) == 0);
  CHECK(std::abs(static_cast<double>(b[0].derivative(1e-3))) < 1e-100);
  const long double oracle = simpson([&](long double t) { return b[0].value(t); }, 0, 1);
  CHECK(b[0].integral() > 0);
  CHECK(static_cast<double>(std::abs(b[0].integral() - oracle)) < 1e-14);
  auto five = bump_basis(2.0, 3.0, 5);
  CHECK(five.size() == 5);
  CHECK(five.front().a() >= 2.0L - 1e-15L);
  CHECK(five.back().b() <= 3.0L + 1e-15L);
  CHECK_THROWS_AS(bump_basis(0, 1, 0), InfeasibleDesignError);
}

TEST_CASE("design_base_flow m = 0") {
  BaseFlow h = design_base_flow(3, 1, 0);
  CHECK(static_cast<double>(std::abs(integral(h, 0, 1) - 3)) < 1e-10);
  CHECK(static_cast<double>(std::abs(integral(h, 2, 3) + 3)) < 1e-10);
  CHECK(static_cast<double>(std::abs(integral(h, 0, 3))) < 1e-10);
  CHECK(h.bumps().size() >= 3);
}

TEST_CASE("design_base_flow m = 1..3 against the independent oracle") {
  for (int m = 1; m <= 3; ++m) {
    BaseFlow h = design_base_flow(3, 1, m);
    CHECK(h.bumps().size() >= static_cast<std::size_t>(m + 3));
    const double scale = h.max_abs();
    CHECK(static_cast<double>(std::abs(integral(h, 0, 1) - 3)) < 1e-10);
    CHECK(static_cast<double>(std::abs(integral(h, 2, 3) + 3)) < 1e-10);
    for (int k = 0; k <= m; ++k) CHECK(static_cast<double>(std::abs(integral(h, 0, 3, k))) < 1e-10 * std::max(1.0, scale));
    // The next moment is left free and should not vanish by accident.
    CHECK(static_cast<double>(std::abs(integral(h, 0, 3, m + 1))) > 1e-3);
  }
}

TEST_CASE("h vanishes on the middle third and outside the horizon") {
  BaseFlow h = design_base_flow(3, 1, 2);
  for (int i = 0; i <= 200; ++i) {
    const long double t = 1.0L + i / 200.0L;
    CHECK(h.value(t) == 0);
  }
  CHECK(h.value(-0.1L) == 0);
  CHECK(h.value(3.1L) == 0);
  CHECK(h.value(0) == 0);
  CHECK(h.value(3) == 0);
}

TEST_CASE("displacement checkpoints") {
  for (int m = 0; m <= 3; ++m) {
    BaseFlow h = design_base_flow(3, 1, m);
    CHECK(static_cast<double>(std::abs(h.displacement(1) - 3)) < 1e-8);
    CHECK(static_cast<double>(std::abs(h.displacement(1.5) - 3)) < 1e-8);
    CHECK(static_cast<double>(std::abs(h.displacement(2) - 3)) < 1e-8);
    CHECK(static_cast<double>(std::abs(h.displacement(3))) < 1e-8);
    for (double t : {0.3, 0.7, 2.4, 2.8}) {
      const long double oracle = integral(h, 0, t);
      CHECK(static_cast<double>(std::abs(h.displacement(t) - oracle)) < 1e-9);
    }
  }
}

TEST_CASE("t_moment examples") {
  BaseFlow h0 = design_base_flow(3, 1, 0);
  CHECK(static_cast<double>(std::abs(t_moment(h0, 0))) < 1e-10);
  CHECK(static_cast<double>(std::abs(t_moment(h0, 0, 0, 1) - 3)) < 1e-10);
  BaseFlow h1 = design_base_flow(3, 1, 1);
  CHECK(static_cast<double>(std::abs(t_moment(h1, 1))) < 1e-10);
  CHECK(static_cast<double>(std::abs(t_moment(h1, 2) - integral(h1, 0, 3, 2))) < 1e-9);
  CHECK_THROWS_AS(t_moment(h1, -1), InfeasibleDesignError);
}

TEST_CASE("design residual report and infeasible basis cap") {
  BaseFlow h = design_base_flow(3, 1, 3);
  DesignResidual r = h.residual();
  CHECK(std::abs(r.left_integral) < 1e-12);
  CHECK(std::abs(r.right_integral) < 1e-12);
  CHECK(r.max_moment < 1e-12);
  DesignOptions tight;
  tight.max_bumps = 4;
  CHECK_THROWS_AS(design_base_flow(3, 1, 3, tight), InfeasibleDesignError);
  CHECK_THROWS_AS(design_base_flow(-1, 1, 0), InfeasibleDesignError);
}

TEST_CASE("random designs meet their constraints") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uT(1.0, 5.0), uL(0.5, 2.0);
  std::uniform_int_distribution<int> um(0, 3);
  for (int trial = 0; trial < 8; ++trial) {
    const double T = uT(rng), L = uL(rng);
    const int m = um(rng);
    BaseFlow h = design_base_flow(T, L, m);
    const double scale = std::max(1.0, h.max_abs()) * std::pow(std::max(1.0, T), m);
    CHECK(static_cast<double>(std::abs(integral(h, 0, T / 3) - 3 * L)) < 1e-10 * std::max(1.0, L));
    CHECK(static_cast<double>(std::abs(integral(h, 2 * T / 3, T) + 3 * L)) < 1e-10 * std::max(1.0, L));
    for (int k = 0; k <= m; ++k) CHECK(static_cast<double>(std::abs(integral(h, 0, T, k))) < 1e-10 * scale);
  }
}

TEST_CASE("cutoff examples") {
  Cutoff b = design_cutoff(3);
  CHECK(b(0) == 1.0);
  CHECK(b(3) == 0.0);
  CHECK(b(1.5) > 0.0);
  CHECK(b(1.5) < 1.0);
  for (double t : {0.0, 0.5, 1.0, 2.0, 2.5, 3.0}) CHECK(b.derivative(t) == 0.0);
  double prev = 1.0;
  for (int i = 0; i <= 300; ++i) {
    const double t = 3.0 * i / 300;
    CHECK(b(t) <= prev + 1e-15);
    CHECK(b(t) >= 0.0);
    prev = b(t);
  }
  const double e = 1e-6;
  for (double t : {1.2, 1.5, 1.8}) CHECK(b.derivative(t) == doctest::Approx((b(t + e) - b(t - e)) / (2 * e)).epsilon(1e-6));
}
