#include "flushlab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "flushlab/errors.hpp"
#include "flushlab/norms.hpp"
#include "flushlab/operators.hpp"
#include "flushlab/smooth.hpp"
#include "flushlab/spectral.hpp"

namespace flushlab::transport {

namespace {

void axpy(Spectrum& y, double a, const Spectrum& x) {
  for (int c = 0; c < y.ncomp(); ++c)
    for (std::size_t i = 0; i < y.coef[c].size(); ++i) y.coef[c][i] += a * x.coef[c][i];
}

Field2D zero_velocity(const field::Grid& g, double t) {
  Field2D u(g, 2, t);
  u.set_divergence_free(true);
  return u;
}

constexpr double kEdge = 1e-12;

}  // namespace

TransportProfile::TransportProfile(const Field2D& psi_star, baseflow::BaseFlow h, baseflow::Cutoff beta)
    : grid_(psi_star.grid()), psi_main_(field::forward(psi_star)), h_(std::move(h)), beta_(beta) {
  if (psi_star.ncomp() != 1) throw ShapeError("transport profile needs a scalar stream function");
  psi_tail_ = field::make_spectrum(grid_, 1);
}

void TransportProfile::set_tail(const Field2D& psi_tail, double tau) {
  if (!(tau > 0)) throw ConfigError("tail ramp time must be positive");
  if (psi_tail.ncomp() != 1 || psi_tail.grid().nx != grid_.nx || psi_tail.grid().ny != grid_.ny)
    throw ShapeError("tail stream function does not match the profile grid");
  psi_tail_ = field::forward(psi_tail);
  axpy(psi_main_, -1.0, psi_tail_);
  tau_ = tau;
}

double TransportProfile::ramp(double t) const { return tau_ > 0 ? std::max(0.0, 1.0 - t / tau_) : 1.0; }

double TransportProfile::ramp_derivative(double t) const { return (tau_ > 0 && t > 0 && t < tau_) ? -1.0 / tau_ : 0.0; }

Spectrum TransportProfile::shifted(const Spectrum& s, double t) const { return field::shift(s, displacement(t)); }

Field2D TransportProfile::velocity_of(const Spectrum& psi_shifted, double scale, double t) const {
  Field2D u = field::inverse(field::perp_grad(psi_shifted), t);
  u *= scale;
  u.set_divergence_free(true);
  return u;
}

Field2D TransportProfile::stream(double t) const {
  const double b = beta_(t);
  if (b == 0) return Field2D(grid_, 1, t);
  Spectrum psi = psi_main_;
  if (tau_ > 0) axpy(psi, ramp(t), psi_tail_);
  Field2D out = field::inverse(shifted(psi, t), t);
  out *= b;
  return out;
}

Field2D TransportProfile::velocity(double t) const {
  const double b = beta_(t);
  if (b == 0) return zero_velocity(grid_, t);
  Spectrum psi = psi_main_;
  if (tau_ > 0) axpy(psi, ramp(t), psi_tail_);
  return velocity_of(shifted(psi, t), b, t);
}

Field2D TransportProfile::force(double t) const {
  const double db = beta_.derivative(t);
  if (db == 0) return zero_velocity(grid_, t);
  Spectrum psi = psi_main_;
  if (tau_ > 0) axpy(psi, ramp(t), psi_tail_);
  return velocity_of(shifted(psi, t), db, t);
}

Field2D TransportProfile::tail_force(double t) const {
  const double s = beta_(t) * ramp_derivative(t);
  if (s == 0) return zero_velocity(grid_, t);
  return velocity_of(shifted(psi_tail_, t), s, t);
}

TransportProfile make_profile(const Field2D& u_star, const baseflow::BaseFlow& h, const baseflow::Cutoff& beta) {
  return TransportProfile(field::stream_function_of(u_star), h, beta);
}

Field2D advect_profile(const Field2D& u_star, const baseflow::BaseFlow& h, const baseflow::Cutoff& beta, double t) {
  return make_profile(u_star, h, beta).velocity(t);
}

Field2D control_force(const Field2D& u_star, const baseflow::BaseFlow& h, const baseflow::Cutoff& beta, double t) {
  return make_profile(u_star, h, beta).force(t);
}

double transport_residual(const TransportProfile& p, double t, double dt) {
  Field2D r = p.velocity(t + dt) - p.velocity(t - dt);
  r *= 1.0 / (2 * dt);
  Field2D adv = field::dx(p.velocity(t));
  adv *= static_cast<double>(p.base_flow().value(t));
  r += adv;
  r -= p.total_force(t);
  return field::l2(r);
}

Trajectory sample_forces(const TransportProfile& p, const std::vector<double>& times) {
  Trajectory out;
  for (double t : times) {
    out.t.push_back(t);
    out.f.push_back(p.total_force(t));
  }
  return out;
}

double vertical_cutoff(double y, double delta) { return smooth_step((1.0 - delta - std::abs(y)) / delta); }

SplitSample split_sample(const Field2D& fn, double delta) {
  const field::Grid& g = fn.grid();
  SplitSample s{Field2D(g, fn.ncomp(), fn.time()), Field2D(g, fn.ncomp(), fn.time()), Field2D(g, fn.ncomp(), fn.time()),
                Field2D(g, fn.ncomp(), fn.time())};
  for (int c = 0; c < fn.ncomp(); ++c)
    for (int j = 0; j <= g.ny; ++j) {
      const double chi = vertical_cutoff(g.y(j), delta);
      for (int i = 0; i < g.nx; ++i) {
        const double v = fn.at(c, j, i), x = g.x(i);
        s.localized.at(c, j, i) = chi * v;
        if (x >= -kEdge && x <= g.L + kEdge) {
          s.phantom.at(c, j, i) = chi * v;
          s.residual.at(c, j, i) = v - chi * v;
        } else {
          s.control.at(c, j, i) = v;
        }
      }
    }
  return s;
}

ForceSplit split_force(const Trajectory& f, double delta, int k, double residual_tol) {
  if (!(delta > 0 && delta < 1)) throw ConfigError("vertical cutoff width must lie in (0, 1)");
  ForceSplit out;
  out.delta = delta;
  out.k = k;
  double fmax = 0;
  for (std::size_t n = 0; n < f.f.size(); ++n) {
    const Field2D& fn = f.f[n];
    auto [control, phantom, residual, localized] = split_sample(fn, delta);
    fmax = std::max(fmax, fn.max_abs());
    out.residual_max = std::max(out.residual_max, residual.max_abs());
    out.phantom_hk.push_back(phantom.max_abs() == 0 ? 0.0 : field::hk(localized, k, std::make_pair(0.0, fn.grid().L)));
    out.control.t.push_back(f.t[n]);
    out.phantom.t.push_back(f.t[n]);
    out.residual.t.push_back(f.t[n]);
    out.control.f.push_back(std::move(control));
    out.phantom.f.push_back(std::move(phantom));
    out.residual.f.push_back(std::move(residual));
  }
  out.phantom_l1_hk = out.phantom_hk.size() > 1 ? field::l1_time(f.t, out.phantom_hk) : 0.0;
  if (fmax > 0 && out.residual_max > residual_tol * fmax) {
    std::ostringstream os;
    os << "near-wall force inside the physical domain is " << out.residual_max << " (" << out.residual_max / fmax
       << " of max|f|), above the tolerance " << residual_tol;
    throw ResidualTooLargeError(os.str());
  }
  return out;
}

SupportReport verify_support(const Trajectory& f, const Box& box, double tolerance) {
  SupportReport r;
  for (std::size_t n = 0; n < f.f.size(); ++n) {
    const Field2D& fn = f.f[n];
    const field::Grid& g = fn.grid();
    const double t = f.t[n];
    const bool t_in = t >= box.t0 - kEdge && t <= box.t1 + kEdge;
    for (int c = 0; c < fn.ncomp(); ++c)
      for (int j = 0; j <= g.ny; ++j) {
        const double y = g.y(j);
        const bool y_in = y >= box.y0 - kEdge && y <= box.y1 + kEdge;
        for (int i = 0; i < g.nx; ++i) {
          const double x = g.x(i);
          if (t_in && y_in && x >= box.x0 - kEdge && x <= box.x1 + kEdge) continue;
          const double v = std::abs(fn.at(c, j, i));
          if (v > r.leakage) {
            r.leakage = v;
            r.t = t;
            r.x = x;
            r.y = y;
          }
        }
      }
  }
  r.within = r.leakage <= tolerance;
  return r;
}

}  // namespace flushlab::transport
