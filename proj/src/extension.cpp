#include "flushlab/extension.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "flushlab/errors.hpp"
#include "flushlab/norms.hpp"
#include "flushlab/operators.hpp"

namespace flushlab::field {

namespace {

int node_of(const Grid& g, double x) {
  const double r = (x - g.x_min) / g.dx();
  const long n = std::lround(r);
  if (std::abs(r - n) > 1e-9) throw GridError("physical domain edges x = 0 and x = L must be grid nodes");
  return static_cast<int>(((n % g.nx) + g.nx) % g.nx);
}

struct OmegaSpan {
  int i0;       // node at x = 0
  int n_omega;  // cells across [0, L]
  int col(int m, int nx) const { return ((i0 + m) % nx + nx) % nx; }
};

OmegaSpan omega_span(const Grid& g) {
  OmegaSpan o{node_of(g, 0.0), static_cast<int>(std::lround(g.L / g.dx()))};
  if (o.n_omega < 8) throw GridError("physical domain must span at least 8 grid cells");
  return o;
}

// psi given on Omega columns; continued outside by its second-order Taylor polynomial at
// each edge times a flat cutoff that vanishes at distance L.
Field2D extend_columns(const Grid& g, const Field2D& psi_in) {
  const OmegaSpan o = omega_span(g);
  const double h = g.dx();
  const int reach = o.n_omega;
  Field2D psi(g, 1);
  auto col = [&](int m) { return o.col(m, g.nx); };
  for (int m = 0; m <= o.n_omega; ++m)
    for (int j = 0; j <= g.ny; ++j) psi.at(0, j, col(m)) = psi_in.at(0, j, col(m));
  for (int j = 0; j <= g.ny; ++j) {
    auto f = [&](int m) { return psi_in.at(0, j, col(m)); };
    // One-sided second-order derivatives at x = 0 (inward +) and x = L (inward -).
    const double l0 = f(0), l1 = (-3 * f(0) + 4 * f(1) - f(2)) / (2 * h),
                 l2 = (2 * f(0) - 5 * f(1) + 4 * f(2) - f(3)) / (h * h);
    const int n = o.n_omega;
    const double r0 = f(n), r1 = (3 * f(n) - 4 * f(n - 1) + f(n - 2)) / (2 * h),
                 r2 = (2 * f(n) - 5 * f(n - 1) + 4 * f(n - 2) - f(n - 3)) / (h * h);
    for (int s = 1; s < reach; ++s) {
      const double d = s * h;
      const double w = smooth_step(1.0 - static_cast<double>(s) / reach);
      psi.at(0, j, col(-s)) = w * (l0 - l1 * d + 0.5 * l2 * d * d);
      psi.at(0, j, col(n + s)) = w * (r0 + r1 * d + 0.5 * r2 * d * d);
    }
  }
  return psi;
}

}  // namespace

Field2D extend_stream_function(const Field2D& psi_in) {
  if (psi_in.ncomp() != 1) throw ShapeError("stream function must be scalar");
  return extend_columns(psi_in.grid(), psi_in);
}

Extension extend_initial_data(const Field2D& u_star, double tail_bound, const ExtensionOptions& opt) {
  if (u_star.ncomp() != 2) throw ShapeError("extend_initial_data expects a velocity field");
  const Grid& g = u_star.grid();
  const double L = g.L;
  const OmegaSpan o = omega_span(g);
  double umax = 0.0;
  for (int m = 0; m <= o.n_omega; ++m)
    for (int j = 0; j <= g.ny; ++j)
      umax = std::max({umax, std::abs(u_star.at(0, j, o.col(m, g.nx))), std::abs(u_star.at(1, j, o.col(m, g.nx)))});
  const double mean = zero_mean(u_star, 0.0, L);
  if (umax > 0.0 && std::abs(mean) > opt.mean_tolerance * 2.0 * L * umax) {
    std::ostringstream os;
    os << "nonzero-mean error: integral of u1 over the physical domain is " << mean;
    throw NonzeroMeanError(os.str());
  }
  Field2D psi_omega(g, 1);
  for (int m = 0; m <= o.n_omega; ++m) {
    const int i = o.col(m, g.nx);
    std::vector<double> u1(g.nodes_y());
    for (int j = 0; j <= g.ny; ++j) u1[j] = u_star.at(0, j, i);
    auto p = column_stream(g, u1);
    for (int j = 0; j <= g.ny; ++j) psi_omega.at(0, j, i) = p[j];
  }
  Extension e;
  e.psi = extend_columns(g, psi_omega);
  e.u = perp_grad(e.psi);
  e.u.set_divergence_free(true);
  e.u.set_time(u_star.time());
  const double base = l2(u_star, std::make_pair(0.0, L));
  e.tail = l2(e.u, std::make_pair(2.0 * L, g.lx() - L));
  e.ratio = base > 0.0 ? e.tail / base : 0.0;
  if (base > 0.0 && e.ratio > tail_bound) {
    std::ostringstream os;
    os << "extension tail " << e.ratio << " exceeds bound " << tail_bound;
    throw ExtensionTailError(os.str());
  }
  return e;
}

}  // namespace flushlab::field
