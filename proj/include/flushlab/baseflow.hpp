#pragma once

#include <optional>
#include <utility>
#include <vector>

namespace flushlab::baseflow {

using real = long double;

// exp(-1/(1-s^2)) on |s| < 1, translated to `center` and scaled by `half_width`.
struct Bump {
  real center = 0;
  real half_width = 1;

  real a() const { return center - half_width; }
  real b() const { return center + half_width; }
  real value(real t) const;
  real derivative(real t) const;
  // Integral over the whole support.
  real integral() const;
  // Integral of (t - s0)^n times the bump.
  real moment(int n, real s0) const;
  // Integral from the left end of the support up to t.
  real cumulative(real t) const;
};

// `count` equally spaced bumps, centres a + (i+1) d, half-width d = (b - a)/(count + 1).
std::vector<Bump> bump_basis(double a, double b, int count);

struct DesignResidual {
  double left_integral = 0;   // int_0^{T/3} h - 3L
  double right_integral = 0;  // int_{2T/3}^T h + 3L
  double max_moment = 0;      // max_k |int (t - T/2)^k h|, k = 1..m
};

class BaseFlow {
 public:
  BaseFlow() = default;
  BaseFlow(double T, double L, int m, std::vector<Bump> bumps, std::vector<real> coef);

  double T() const { return T_; }
  double L() const { return L_; }
  int m() const { return m_; }
  const std::vector<Bump>& bumps() const { return bumps_; }
  const std::vector<real>& coefficients() const { return coef_; }

  real value(real t) const;
  real derivative(real t) const;
  double operator()(double t) const { return static_cast<double>(value(t)); }

  // X(t) = int_0^t h. Uses the stored full bump integrals past each support.
  real displacement(real t) const;

  // int (t - s0)^n h dt, exact bump-by-bump quadrature.
  real moment(int n, real s0) const;
  // Disjoint support intervals (merged bump supports), sorted.
  std::vector<std::pair<real, real>> support() const;
  double max_abs(int samples = 4001) const;

  DesignResidual residual() const;

 private:
  double T_ = 0, L_ = 0;
  int m_ = 0;
  std::vector<Bump> bumps_;
  std::vector<real> coef_;
  std::vector<real> full_;
};

struct DesignOptions {
  int min_bumps = 0;     // 0 means m + 3
  int max_bumps = 48;
  double tolerance = 1e-13;  // relative residual of the constraint system
};

// Minimum-norm bump coefficients meeting the lobe integrals and m vanishing moments.
BaseFlow design_base_flow(double T, double L, int m, const DesignOptions& opt = {});

// int t^k h over [0, T], or over [a, b] when given.
real t_moment(const BaseFlow& h, int k);
real t_moment(const BaseFlow& h, int k, real a, real b);

class Cutoff {
 public:
  Cutoff() = default;
  explicit Cutoff(double T) : T_(T) {}
  double T() const { return T_; }
  double value(double t) const;
  double derivative(double t) const;
  double operator()(double t) const { return value(t); }

 private:
  double T_ = 1;
};

Cutoff design_cutoff(double T);

}  // namespace flushlab::baseflow
