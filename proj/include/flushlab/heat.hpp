#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "flushlab/baseflow.hpp"

namespace flushlab::heat {

using real = long double;

// Dirichlet data for the half-line diffusion problem. The value is piecewise smooth:
// smooth on each support interval, with jumps listed separately.
struct BoundaryData {
  std::function<real(real)> value;
  std::function<real(real)> derivative;
  // Sorted disjoint intervals outside which value == 0. The last right end may be +inf.
  std::vector<std::pair<real, real>> support;
  // Interior points where value is not analytic (quadrature splits there).
  std::vector<real> breakpoints;
  // (time, jump in value) pairs.
  std::vector<std::pair<real, real>> jumps;
  // Optional exact moments int h(s) (s0 - s)^n ds. Filled by quadrature when empty.
  std::function<real(int, real)> moment;
  real horizon = 1;  // time scale used for the grids
  real max_abs = 1;

  bool compact() const { return !support.empty() && support.back().second < std::numeric_limits<real>::infinity(); }
};

BoundaryData from_base_flow(const baseflow::BaseFlow& h);
// Constant data `amplitude` switched on at t = 0 (test data; not smooth).
BoundaryData step_data(real amplitude = 1, real horizon = 1);
BoundaryData from_functions(std::function<real(real)> value, std::function<real(real)> derivative,
                            std::vector<std::pair<real, real>> support, real horizon,
                            std::vector<std::pair<real, real>> jumps = {});

struct ProfileGrid {
  int early_points = 8;        // geometric points in (0, 0.05 horizon]
  int support_points = 96;     // uniform points up to the series switch
  int per_decade = 24;         // geometric points per decade beyond that
  double t_max_factor = 1e4;   // last time = t_max_factor * horizon
  double zeta_max = 20;        // z range of a slice, in units of sqrt(t)
  double z_max = std::numeric_limits<double>::infinity();
  int z_refine = 1;            // panel subdivision factor
  double tolerance = 1e-12;    // relative quadrature tolerance
  double series_factor = 2;    // moment series once t >= series_factor * support end
  bool tabulate = true;        // fill the slice table at construction
};

// Values on one time level. z nodes are Gauss-Legendre points on graded panels.
struct ZSlice {
  real t = 0;
  std::vector<real> z, w, V, dzV;
};

class HalfLineProfile {
 public:
  HalfLineProfile(BoundaryData data, ProfileGrid grid);

  const BoundaryData& data() const { return data_; }
  const ProfileGrid& grid() const { return grid_; }
  const std::vector<real>& times() const { return times_; }
  const std::vector<ZSlice>& slices() const { return slices_; }

  real value(real t, real z) const;
  real dz(real t, real z) const;
  // Cached slice when t is a grid time, otherwise computed. z_cap truncates the z range.
  ZSlice slice(real t, real z_cap = std::numeric_limits<real>::infinity()) const;
  bool uses_series(real t) const;

 private:
  std::vector<real> breaks(real s1, real s2) const;
  real quad_value(real t, real z) const;
  real quad_dz(real t, real z) const;
  real series_eval(real t, real z, bool derivative) const;

  BoundaryData data_;
  ProfileGrid grid_;
  std::vector<real> times_;
  std::vector<ZSlice> slices_;
  real center_ = 0, series_from_ = std::numeric_limits<real>::infinity();
  std::vector<real> scaled_moments_;  // mu_n / n!
};

HalfLineProfile solve_boundary_layer(const BoundaryData& data, const ProfileGrid& grid = {});
HalfLineProfile solve_boundary_layer(const baseflow::BaseFlow& h, const ProfileGrid& grid = {});

double l2_norm(const HalfLineProfile& V, double t);
double weighted_grad_norm(const HalfLineProfile& V, double t);

struct RadiusLoss {
  double value = 0;      // solved part plus tail
  double solved = 0;
  double tail = 0;
  double tail_fraction = 0;
  double exponent = 0;   // fitted power of the integrand over the last decade
  bool divergent = false;
  std::string warning;
};
RadiusLoss total_radius_loss(const HalfLineProfile& V, double warn_margin = 0.05);
// (t, ||z dz V(t)||_inf) on the profile time grid.
std::vector<std::pair<double, double>> loss_integrand(const HalfLineProfile& V);

double z_moment(const HalfLineProfile& V, double t, int k);

// Least-squares slope of log(norm) against log(t) over samples inside the window.
double fit_decay_exponent(const std::vector<std::pair<double, double>>& series, std::pair<double, double> window);
// n log-spaced samples (t, ||V(t)||_L2) on [t1, t2].
std::vector<std::pair<double, double>> decay_series(const HalfLineProfile& V, double t1, double t2, int n = 31);

// eps^{1/4} ||V(t, .)||_{L2(0, 2/sqrt(eps))}
double rescaled_trace_norm(const HalfLineProfile& V, double t, double eps);

}  // namespace flushlab::heat
