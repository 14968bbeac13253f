#pragma once

#include <optional>
#include <vector>

#include "flushlab/baseflow.hpp"
#include "flushlab/field.hpp"

namespace flushlab::transport {

using field::Field2D;
using field::Spectrum;

// beta(t) u_star(x - X(t), y), built on the stream function so every sample is divergence-free.
// An optional tail component of the stream function is switched off linearly over [0, tau].
class TransportProfile {
 public:
  TransportProfile() = default;
  TransportProfile(const Field2D& psi_star, baseflow::BaseFlow h, baseflow::Cutoff beta);

  // psi_star = psi_main + psi_tail; the tail is multiplied by max(0, 1 - t/tau).
  void set_tail(const Field2D& psi_tail, double tau);
  bool has_tail() const { return tau_ > 0; }
  double tau() const { return tau_; }

  const field::Grid& grid() const { return grid_; }
  const baseflow::BaseFlow& base_flow() const { return h_; }
  const baseflow::Cutoff& cutoff() const { return beta_; }

  double displacement(double t) const { return static_cast<double>(h_.displacement(t)); }
  double ramp(double t) const;
  double ramp_derivative(double t) const;

  Field2D stream(double t) const;
  Field2D velocity(double t) const;
  // beta'(t) times the shifted profile: the force of the transport equation.
  Field2D force(double t) const;
  // beta(t) ramp'(t) times the shifted tail (zero without a tail).
  Field2D tail_force(double t) const;
  Field2D total_force(double t) const { return force(t) + tail_force(t); }

 private:
  Spectrum shifted(const Spectrum& s, double t) const;
  Field2D velocity_of(const Spectrum& psi_shifted, double scale, double t) const;

  field::Grid grid_{};
  Spectrum psi_main_, psi_tail_;
  baseflow::BaseFlow h_;
  baseflow::Cutoff beta_;
  double tau_ = 0;
};

TransportProfile make_profile(const Field2D& u_star, const baseflow::BaseFlow& h, const baseflow::Cutoff& beta);

Field2D advect_profile(const Field2D& u_star, const baseflow::BaseFlow& h, const baseflow::Cutoff& beta, double t);
Field2D control_force(const Field2D& u_star, const baseflow::BaseFlow& h, const baseflow::Cutoff& beta, double t);

// || d_t u + h d_x u - f || in L2, with d_t by centred differences of step dt.
double transport_residual(const TransportProfile& p, double t, double dt);

struct Trajectory {
  std::vector<double> t;
  std::vector<Field2D> f;
};

Trajectory sample_forces(const TransportProfile& p, const std::vector<double>& times);

struct ForceSplit {
  Trajectory control;   // vanishes on [0, L] x [-1, 1]
  Trajectory phantom;   // inside [0, L] x [-1 + delta, 1 - delta]
  Trajectory residual;  // inside Omega, within delta of a wall; dropped when applied
  std::vector<double> phantom_hk;  // H^k(Omega) norm per sample
  double phantom_l1_hk = 0;        // trapezoid in time
  double residual_max = 0;
  double delta = 0.1;
  int k = 2;
};

// Vertical cutoff: 1 for |y| <= 1 - 2 delta, 0 for |y| >= 1 - delta.
double vertical_cutoff(double y, double delta);

struct SplitSample {
  Field2D control, phantom, residual;
  Field2D localized;  // chi_y f on the whole band
};
// Sharp [0, L] indicator in x, vertical cutoff in y.
SplitSample split_sample(const Field2D& f, double delta);

// control + phantom + residual == f at every node. Throws ResidualTooLargeError when the
// near-wall residual exceeds residual_tol * max|f|.
ForceSplit split_force(const Trajectory& f, double delta = 0.1, int k = 2, double residual_tol = 1e-6);

struct Box {
  double t0, t1, x0, x1, y0 = -1, y1 = 1;
};

struct SupportReport {
  double leakage = 0;  // max |f| outside the box
  double t = 0, x = 0, y = 0;
  bool within = true;
};

SupportReport verify_support(const Trajectory& f, const Box& box, double tolerance);

}  // namespace flushlab::transport
