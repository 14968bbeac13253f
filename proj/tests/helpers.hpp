#pragma once

#include <cmath>
#include <random>

#include "flushlab/field.hpp"
#include "flushlab/grid.hpp"

namespace testutil {

inline flushlab::field::Grid band(int nx = 64, int ny = 32, double x_min = -4.0, double x_max = 6.0, double L = 1.0) {
  return flushlab::field::make_grid(nx, ny, x_min, x_max, L);
}

// Smooth random field built from a few low modes so discrete operators stay accurate.
inline flushlab::field::Field2D random_smooth(const flushlab::field::Grid& g, int ncomp, unsigned seed, bool zero_walls = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  double a[2][4][4];
  for (auto& c : a)
    for (auto& r : c)
      for (double& v : r) v = nd(rng);
  return flushlab::field::sample(g, ncomp, [&](int c, double x, double y) {
    double s = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q)
        s += a[c][p][q] * std::cos(p * g.dxi() * x + q) * std::cos(q * 1.3 * y + p);
    return zero_walls ? s * (1.0 - y * y) : s;
  });
}

// White-noise field (all modes populated).
inline flushlab::field::Field2D random_field(const flushlab::field::Grid& g, int ncomp, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  flushlab::field::Field2D u(g, ncomp);
  for (int c = 0; c < ncomp; ++c)
    for (double& v : u.comp(c)) v = nd(rng);
  return u;
}

inline double max_diff(const flushlab::field::Field2D& a, const flushlab::field::Field2D& b, bool interior = false) {
  double m = 0.0;
  const auto& g = a.grid();
  for (int c = 0; c < a.ncomp(); ++c)
    for (int j = interior ? 1 : 0; j <= (interior ? g.ny - 1 : g.ny); ++j)
      for (int i = 0; i < g.nx; ++i) m = std::max(m, std::abs(a.at(c, j, i) - b.at(c, j, i)));
  return m;
}

}  // namespace testutil
