#include <cmath>
#include <cstdio>
#include <numbers>

#include "doctest.h"
#include "flushlab/errors.hpp"
#include "flushlab/extension.hpp"
#include "flushlab/io.hpp"
#include "flushlab/norms.hpp"
#include "flushlab/operators.hpp"
#include "flushlab/spectral.hpp"
#include "helpers.hpp"

using namespace flushlab;
using namespace flushlab::field;
using testutil::band;
using testutil::max_diff;
constexpr double pi = std::numbers::pi;

TEST_CASE("make_grid examples") {
  Grid g = make_grid(64, 64, -4, 6, 1);
  CHECK(g.lx() == doctest::Approx(10.0));
  CHECK(g.dxi() == doctest::Approx(2 * pi / 10));
  CHECK(g.xi(3) == doctest::Approx(3 * 2 * pi / 10));
  CHECK_THROWS_AS(make_grid(63, 64, -4, 6, 1), GridError);
  CHECK_THROWS_AS(make_grid(6, 64, -4, 6, 1), GridError);
  CHECK_THROWS_AS(make_grid(64, 4, -4, 6, 1), GridError);
  CHECK_THROWS_AS(make_grid(64, 64, 0, 3, 1), GridError);
  CHECK(g.y(0) == -1.0);
  CHECK(g.y(g.ny) == doctest::Approx(1.0));
}

TEST_CASE("transform round trip") {
  Grid g = band(64, 16);
  for (unsigned seed = 1; seed <= 10; ++seed) {
    Field2D u = testutil::random_field(g, 2, seed);
    Field2D v = inverse(forward(u));
    CHECK(max_diff(u, v) <= 1e-12 * u.max_abs());
  }
}

TEST_CASE("Parseval") {
  Grid g = band(64, 16);
  Field2D u = testutil::random_field(g, 2, 3);
  Spectrum s = forward(u);
  auto w = ycol::weights(g.nodes_y(), g.dy());
  double spec = 0.0;
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j <= g.ny; ++j) {
      double row = std::norm(s.at(c, j, 0)) + std::norm(s.at(c, j, g.nk() - 1));
      for (int k = 1; k < g.nk() - 1; ++k) row += 2 * std::norm(s.at(c, j, k));
      spec += w[j] * g.lx() * row;
    }
  CHECK(std::abs(spec - l2_squared(u)) <= 1e-12 * spec);
}

TEST_CASE("curl2d examples") {
  Grid g = band(32, 16);
  Field2D shear = sample(g, 2, [](int c, double, double y) { return c == 0 ? -y : 0.0; });
  Field2D w = curl2d(shear);
  for (double v : w.comp(0)) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  Field2D zero(g, 2);
  CHECK(curl2d(zero).max_abs() == 0.0);
}

namespace {
// psi = sin(xi1 x) (1 - y^2)^2 ; u = (psi_y, -psi_x), curl u = -Laplace psi.
Field2D manufactured_u(const Grid& g) {
  const double k = g.dxi();
  return sample(g, 2, [k](int c, double x, double y) {
    const double q = 1 - y * y;
    return c == 0 ? std::sin(k * x) * (-4 * y * q) : -k * std::cos(k * x) * q * q;
  });
}
Field2D manufactured_w(const Grid& g) {
  const double k = g.dxi();
  return sample(g, 1, [k](int, double x, double y) {
    const double q = 1 - y * y;
    const double pyy = -4 * q + 8 * y * y;
    return -(-k * k * q * q + pyy) * std::sin(k * x);
  });
}
}  // namespace

TEST_CASE("curl2d matches symbolic curl to second order") {
  double e1 = max_diff(curl2d(manufactured_u(band(32, 16))), manufactured_w(band(32, 16)));
  double e2 = max_diff(curl2d(manufactured_u(band(32, 32))), manufactured_w(band(32, 32)));
  double e3 = max_diff(curl2d(manufactured_u(band(32, 64))), manufactured_w(band(32, 64)));
  CHECK(std::log2(e1 / e2) > 1.8);
  CHECK(std::log2(e2 / e3) > 1.8);
}

TEST_CASE("solve_div_curl examples") {
  Grid g = band(64, 32);
  Field2D zero(g, 1);
  CHECK(solve_div_curl(zero).max_abs() == 0.0);

  Field2D w = sample(g, 1, [&](int, double x, double y) { return std::sin(g.dxi() * x) * std::sin(pi * (1 + y) / 2); });
  Field2D u = solve_div_curl(w);
  CHECK(divergence_max(u, false) <= 1e-10);
  CHECK(u.divergence_free());
  for (int i = 0; i < g.nx; ++i) {
    CHECK(std::abs(u.at(1, 0, i)) <= 1e-14);
    CHECK(std::abs(u.at(1, g.ny, i)) <= 1e-14);
  }
}

TEST_CASE("solve_div_curl round trip converges at second order inside") {
  auto err = [](int ny) {
    Grid g = band(32, ny);
    Field2D u0 = manufactured_u(g);
    return max_diff(solve_div_curl(curl2d(u0)), u0, true);
  };
  double e1 = err(16), e2 = err(32), e3 = err(64);
  CHECK(e3 < 1e-2 * manufactured_u(band(32, 64)).max_abs());
  CHECK(std::log2(e1 / e2) > 1.8);
  CHECK(std::log2(e2 / e3) > 1.8);
}

TEST_CASE("curl of solve_div_curl reproduces smooth vorticity") {
  auto err = [](int ny) {
    Grid g = band(32, ny);
    Field2D w = manufactured_w(g);
    Field2D d = curl2d(solve_div_curl(w)) - w;
    double m = 0.0;
    for (int j = 2; j <= g.ny - 2; ++j)
      for (int i = 0; i < g.nx; ++i) m = std::max(m, std::abs(d.at(0, j, i)));
    return m;
  };
  CHECK(std::log2(err(32) / err(64)) > 1.8);
}

TEST_CASE("leray_project examples and properties") {
  Grid g = band(64, 32);
  SUBCASE("divergence-free input unchanged") {
    Field2D psi = testutil::random_smooth(g, 1, 7, true);
    Field2D u = perp_grad(psi);
    Field2D p = leray_project(u);
    CHECK(max_diff(p, u) <= 1e-10 * u.max_abs());
  }
  SUBCASE("mean shear flow unchanged") {
    Field2D u = sample(g, 2, [](int c, double, double y) { return c == 0 ? 1 - y * y : 0.0; });
    CHECK(max_diff(leray_project(u), u) <= 1e-14);
  }
  SUBCASE("continuous gradient projected to near zero") {
    const double k = g.dxi();
    Field2D v = sample(g, 2, [k](int c, double x, double y) {
      return c == 0 ? -k * std::sin(k * x) * std::cos(pi * y / 2) : -pi / 2 * std::cos(k * x) * std::sin(pi * y / 2);
    });
    CHECK(leray_project(v).max_abs() <= 5e-3 * v.max_abs());
  }
  SUBCASE("discrete gradients annihilated") {
    for (unsigned s = 1; s <= 5; ++s) {
      Field2D phi = testutil::random_smooth(g, 1, s);
      Field2D v = grad(phi);
      CHECK(leray_project(v).max_abs() <= 1e-10 * v.max_abs());
    }
  }
  SUBCASE("idempotent on random fields") {
    for (unsigned s = 1; s <= 5; ++s) {
      Field2D v = testutil::random_field(g, 2, s);
      Field2D p1 = leray_project(v);
      Field2D p2 = leray_project(p1);
      CHECK(max_diff(p1, p2) <= 1e-12 * std::max(1.0, p1.max_abs()));
      CHECK(divergence_max(p1, false) <= 1e-10 * std::max(1.0, v.max_abs()) / g.dy());
    }
  }
}

TEST_CASE("zero_mean examples") {
  Grid g = band(64, 32);
  CHECK(zero_mean(Field2D(g, 2)) == 0.0);
  Field2D one = sample(g, 2, [](int c, double, double) { return c == 0 ? 1.0 : 0.0; });
  CHECK(zero_mean(one) == doctest::Approx(2.0).epsilon(1e-12));
  for (unsigned s = 1; s <= 10; ++s) {
    Field2D psi = testutil::random_smooth(g, 1, s, true);
    CHECK(std::abs(zero_mean(perp_grad(psi))) <= 1e-12 * std::max(1.0, psi.max_abs()));
    Field2D w = testutil::random_field(g, 1, s);
    CHECK(std::abs(zero_mean(solve_div_curl(w))) <= 1e-12);
  }
}

TEST_CASE("norms examples") {
  Grid g = band(64, 32);
  NormReport z = norms(Field2D(g, 2), {0, 1, 2});
  CHECK(z.l2 == 0.0);
  CHECK(z.hk[2] == 0.0);
  Field2D s = sample(g, 2, [&](int c, double x, double) { return c == 0 ? std::sin(g.dxi() * x) : 0.0; });
  CHECK(l2(s) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));
  CHECK(l2(s, std::make_pair(-4.0, 6.0)) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));
  NormReport r = norms(s, {0, 1, 2, 3});
  CHECK(r.hk[0] == r.l2);
  CHECK(r.hk[1] == doctest::Approx(std::sqrt(10.0 * (1 + g.dxi() * g.dxi()))).epsilon(1e-10));
  for (unsigned seed = 1; seed <= 5; ++seed) {
    NormReport q = norms(testutil::random_smooth(g, 2, seed), {0, 1, 2, 3});
    CHECK(q.hk[0] <= q.hk[1]);
    CHECK(q.hk[1] <= q.hk[2]);
    CHECK(q.hk[2] <= q.hk[3]);
  }
}

TEST_CASE("window norm integrates the interpolant exactly") {
  Grid g = band(64, 16);
  const double k = g.dxi();
  Field2D s = sample(g, 1, [k](int, double x, double) { return std::cos(3 * k * x); });
  // int_a^b cos^2 = (b-a)/2 + (sin(2 c b) - sin(2 c a)) / (4c), times height 2.
  const double a = 0.1, b = 0.9, c = 3 * k;
  const double exact = 2 * ((b - a) / 2 + (std::sin(2 * c * b) - std::sin(2 * c * a)) / (4 * c));
  CHECK(l2_squared(s, std::make_pair(a, b)) == doctest::Approx(exact).epsilon(1e-12));
  CHECK(l1_time({0, 1, 2}, {1, 1, 3}) == doctest::Approx(3.0));
}

namespace {
// Stream function compactly supported inside the physical domain.
Field2D vortex_psi(const Grid& g) {
  return sample(g, 1, [](int, double x, double y) {
    const double r2 = ((x - 0.5) * (x - 0.5) + y * y) / 0.16;
    return r2 < 1 ? std::exp(-1 / (1 - r2)) : 0.0;
  });
}
}  // namespace

TEST_CASE("extend_initial_data examples") {
  Grid g = band(320, 64);
  SUBCASE("zero") {
    Extension e = extend_initial_data(Field2D(g, 2), 1e-6);
    CHECK(e.u.max_abs() == 0.0);
  }
  SUBCASE("compact vortex reproduced on the physical domain") {
    Field2D u = perp_grad(vortex_psi(g));
    // The spectral x-derivative of a compact stream function rings slightly outside its support.
    const double own_tail = l2(u, std::make_pair(2.0, 9.0)) / l2(u, std::make_pair(0.0, 1.0));
    Extension e = extend_initial_data(u, 1.0);
    double m = 0.0;
    for (int i = 0; i < g.nx; ++i) {
      if (g.x(i) < 0 || g.x(i) > 1) continue;
      for (int c = 0; c < 2; ++c)
        for (int j = 0; j <= g.ny; ++j) m = std::max(m, std::abs(e.u.at(c, j, i) - u.at(c, j, i)));
    }
    CHECK(m <= 1e-12 * u.max_abs());
    CHECK(e.ratio <= own_tail * (1 + 1e-9));
    CHECK(e.u.divergence_free());
    CHECK(divergence_max(e.u, false) <= 1e-10 * e.u.max_abs());
  }
  SUBCASE("resolved Gaussian vortex meets a tight tail bound") {
    Field2D psi = sample(g, 1, [](int, double x, double y) {
      return 0.05 * std::exp(-((x - 0.5) * (x - 0.5) + y * y) / (2 * 0.08 * 0.08)) * std::cos(pi * y / 2) * std::cos(pi * y / 2);
    });
    Field2D u = perp_grad(psi);
    Extension e = extend_initial_data(u, 1e-6);
    CHECK(e.ratio <= 1e-6);
    Field2D d = e.u - u;
    CHECK(l2(d, std::make_pair(0.0, 1.0)) <= 1e-6 * l2(u, std::make_pair(0.0, 1.0)));
  }
  SUBCASE("Poiseuille profile rejected") {
    Field2D u = sample(g, 2, [](int c, double, double y) { return c == 0 ? 1 - y * y : 0.0; });
    CHECK_THROWS_AS(extend_initial_data(u, 1e-6), NonzeroMeanError);
  }
  SUBCASE("non-compact data is continued smoothly") {
    Field2D psi = sample(g, 1, [](int, double x, double y) {
      return 0.2 * std::exp(-((x - 0.5) * (x - 0.5) + y * y) / (2 * 0.1 * 0.1)) * std::cos(pi * y / 2) * std::cos(pi * y / 2);
    });
    Field2D u = perp_grad(psi);
    Extension e = extend_initial_data(u, 1e-4);
    CHECK(std::abs(zero_mean(e.u)) <= 1e-12);
    Field2D d = e.u - u;
    CHECK(l2(d, std::make_pair(0.0, 1.0)) <= 1e-3 * l2(u, std::make_pair(0.0, 1.0)));
  }
}

TEST_CASE("field file round trip") {
  Grid g = band(32, 16);
  Field2D u = testutil::random_field(g, 2, 11);
  u.set_time(1.25);
  const std::string path = "test_field_roundtrip.bin";
  io::write_field(path, u);
  Field2D v = io::read_field(path);
  CHECK(v.grid() == g);
  CHECK(v.time() == 1.25);
  CHECK(max_diff(u, v) == 0.0);
  std::remove(path.c_str());
}
