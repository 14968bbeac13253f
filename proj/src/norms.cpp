#include "flushlab/norms.hpp"

#include <algorithm>
#include <cmath>

#include "flushlab/operators.hpp"
#include "flushlab/spectral.hpp"

namespace flushlab::field {

double l2_squared(const Field2D& u, const XWindow& win) {
  const Grid& g = u.grid();
  const auto w = ycol::weights(g.nodes_y(), g.dy());
  double sum = 0.0;
  if (!win) {
    for (int c = 0; c < u.ncomp(); ++c)
      for (int j = 0; j <= g.ny; ++j) {
        double row = 0.0;
        for (int i = 0; i < g.nx; ++i) row += u.at(c, j, i) * u.at(c, j, i);
        sum += w[j] * row * g.dx();
      }
    return sum;
  }
  std::vector<cplx> coef(g.nk());
  for (int c = 0; c < u.ncomp(); ++c)
    for (int j = 0; j <= g.ny; ++j) {
      forward_row(g.nx, u.comp(c).data() + static_cast<std::size_t>(j) * g.nx, coef.data());
      auto sq = square_row(g, coef.data());
      sum += w[j] * integrate_trig(g.lx(), g.x_min, 2 * g.nx, sq.data(), win->first, win->second);
    }
  return std::max(sum, 0.0);
}

double l2(const Field2D& u, const XWindow& w) { return std::sqrt(l2_squared(u, w)); }

double hk(const Field2D& u, int k, const XWindow& w) {
  if (k <= 0) return l2(u, w);
  double sum = 0.0;
  Spectrum s = forward(u);
  for (int a = 0; a <= k; ++a) {
    Field2D ux = a == 0 ? u : inverse(dx(s, a), u.time());
    for (int b = 0; a + b <= k; ++b) {
      if (b == 0)
        sum += l2_squared(ux, w);
      else
        sum += l2_squared(dy(ux, b), w);
    }
  }
  return std::sqrt(sum);
}

NormReport norms(const Field2D& u, const std::vector<int>& orders, const XWindow& w) {
  NormReport r;
  r.l2 = l2(u, w);
  for (int k : orders) r.hk[k] = k == 0 ? r.l2 : hk(u, k, w);
  return r;
}

double l1_time(const std::vector<double>& t, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t n = 1; n < t.size() && n < v.size(); ++n) s += 0.5 * (t[n] - t[n - 1]) * (v[n] + v[n - 1]);
  return s;
}

double max_outside(const Field2D& u, double a, double b) {
  const Grid& g = u.grid();
  double m = 0.0;
  for (int i = 0; i < g.nx; ++i) {
    double x = g.x(i);
    double xr = a + std::fmod(std::fmod(x - a, g.lx()) + g.lx(), g.lx());
    if (xr >= a && xr <= b) continue;
    for (int c = 0; c < u.ncomp(); ++c)
      for (int j = 0; j <= g.ny; ++j) m = std::max(m, std::abs(u.at(c, j, i)));
  }
  return m;
}

}  // namespace flushlab::field
