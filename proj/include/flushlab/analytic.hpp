#pragma once

#include <string>
#include <vector>

#include "flushlab/field.hpp"
#include "flushlab/transport.hpp"

namespace flushlab::analytic {

using field::Field2D;
using field::Spectrum;

// Exponent ceiling for e^{rho |xi|}.
inline constexpr double kMaxExponent = 700.0;

// Multiply each tangential mode by |xi|.
Field2D abs_dx(const Field2D& u);

// Modes with index <= N multiplied by e^{rho |xi|}, the rest zeroed.
// Throws OverflowGuardError when rho * xi_N > 700.
Field2D analytic_weight(const Field2D& u, double rho, int N);
Spectrum analytic_weight(const Spectrum& s, double rho, int N);

// Sharp tangential band 2^j <= |xi| < 2^{j+1}; j = -1 is |xi| < 1.
Field2D lp_block(const Field2D& u, int j);
// Largest j with a nonempty band on this grid.
int max_block(const field::Grid& g);
int block_of(double xi);

// L2 norm of each block, j = -1 .. max_block (index j + 1).
std::vector<double> block_norms(const Spectrum& s);
// L2 norm from the coefficients (trapezoid weights in y).
double spectral_l2(const Spectrum& s);

double besov_b021_norm(const Field2D& u);
double besov_b021_norm(const Spectrum& s);
// Norm of the stacked gradient (d_x u_c, d_y u_c).
double besov_grad_norm(const Field2D& u);
double besov_grad_norm(const Spectrum& s);

// max over x of the L2(-1, 1) norm of the column.
double linf_x_l2_y(const Field2D& u);

struct Regularized {
  Field2D field;          // kept modes
  Field2D tail;           // removed modes; field + tail == input
  int cutoff_index = 0;   // last kept mode
  double xi_cut = 0;
  bool trimmed = false;
  transport::Trajectory force;   // -tail / tau on [0, tau]
  std::vector<double> force_hk;  // H^k norm per sample
  double force_norm = 0;         // trapezoid L1 in time of force_hk
  int k = 2;
  double tau = 0;
};

// Trim the tangential tail above the largest cutoff for which e^{2 rho_target |xi|} stays
// representable, and realize the removal as a linear ramp of length tau.
// Throws InfeasibleRegularizationError when the ramp's L1(0,tau; H^k) norm exceeds eta.
Regularized low_pass_regularize(const Field2D& u_star, double rho_target, double eta, int k, double tau,
                                int samples = 9);
// Largest mode index with 2 rho xi_k <= 700, capped at nk - 1.
int representable_cutoff(const field::Grid& g, double rho_target);

struct RadiusTrace {
  std::vector<double> t, rho, ell, b;
  int N = 0;
  double eps = 0;
  double rho0 = 0;
  bool valid = true;
  double invalid_at = -1;   // first time with rho <= 0
  double loss = 0;          // int ell
  double feedback = 0;      // int b
  double cs_bound = 0;      // sqrt(T) (eps int |grad r_rho|^2)^{1/2}

  double final_rho() const { return rho.empty() ? rho0 : rho.back(); }
};

// Online trapezoid integration of rho' = -ell - b.
class RadiusIntegrator {
 public:
  RadiusIntegrator(double rho0, double eps, int N = 0);
  void push(double t, double ell, double b);
  double rho() const { return trace_.final_rho(); }
  bool valid() const { return trace_.valid; }
  const RadiusTrace& trace() const { return trace_; }

 private:
  RadiusTrace trace_;
  long double b2_ = 0;   // int b^2
};

RadiusTrace integrate_radius(double rho0, const std::vector<double>& t, const std::vector<double>& ell,
                             const std::vector<double>& b, double eps, int N = 0);

// Max |rho(t) - (rho0 - int_0^t (ell + b))| with the integral recomputed by trapezoid.
double trace_consistency(const RadiusTrace& r);

void write_trace_csv(const std::string& path, const RadiusTrace& r);
std::string trace_summary_json(const RadiusTrace& r);
void write_trace_json(const std::string& path, const RadiusTrace& r);

}  // namespace flushlab::analytic
