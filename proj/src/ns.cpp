#include "flushlab/ns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "detail/tridiag.hpp"
#include "flushlab/errors.hpp"
#include "flushlab/io.hpp"
#include "flushlab/norms.hpp"
#include "flushlab/operators.hpp"
#include "flushlab/spectral.hpp"
#include "json.hpp"

#ifndef FLUSHLAB_VERSION
#define FLUSHLAB_VERSION "unknown"
#endif

namespace flushlab::ns {

using detail::Tridiag;
using field::cplx;

void ScalingConfig::validate() const {
  auto fail = [](const std::string& what, double v) {
    std::ostringstream os;
    os << "range error: " << what << " (got " << v << ")";
    throw ConfigError(os.str());
  };
  if (!(eps > 0 && eps < 1)) fail("eps must lie in (0, 1)", eps);
  if (!(T > 0)) fail("T must be positive", T);
  if (!(L > 0)) fail("L must be positive", L);
  if (!(eta > 0)) fail("eta must be positive", eta);
  if (k < 0) fail("k must be >= 0", k);
  if (!(delta > 0 && delta < 1)) fail("delta must lie in (0, 1)", delta);
  if (!(theta > 0)) fail("theta must be positive", theta);
}

double WallCutoffs::lower(double y) const { return 0.5 * (1.0 - std::tanh(y / width) / std::tanh(1.0 / width)); }

// ---------------------------------------------------------------------------------------------
// Ansatz

std::vector<double> layer_profile(const AnsatzBundle& b, double t) {
  const Grid& g = b.u1.grid();
  const int n = g.nodes_y();
  const double hv = static_cast<double>(b.h.value(t));
  std::vector<double> out(n, hv);
  if (!b.V || t <= 0) return out;
  const double se = std::sqrt(b.eps);
  std::vector<double> v(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double z = (1.0 + g.y(j)) / se;
    if (z * z / (4 * t) > 60.0) break;
    v[j] = static_cast<double>(b.V->value(t, z));
  }
  for (int j = 0; j < n; ++j) {
    const double y = g.y(j);
    out[j] -= b.chi.lower(y) * v[j] + b.chi.upper(y) * v[n - 1 - j];
  }
  return out;
}

Field2D assemble_ansatz(const AnsatzBundle& b, double t) {
  if (t < 0) throw ConfigError("assemble_ansatz: t must be >= 0");
  const Grid& g = b.u1.grid();
  Field2D u = b.u1.velocity(t);
  u *= b.eps;
  const auto lay = layer_profile(b, t);
  for (int j = 0; j <= g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) u.at(0, j, i) += lay[j];
  u.set_time(t);
  u.set_divergence_free(true);
  return u;
}

// ---------------------------------------------------------------------------------------------
// Solver

struct Solver::ModeOps {
  Tridiag helm, pois;
  std::vector<double> w0, w1, p0, p1;
  double inv[4] = {0, 0, 0, 0};
};

struct Solver::Nonlinear {
  Spectrum N;
  std::vector<double> M;
  double u1max = 0, u2max = 0;
};

struct Solver::Forcing {
  double t = 0;
  bool zero = true;
  Spectrum curl;
  std::vector<double> mean;
};

namespace {

Tridiag constant_tridiag(int m, double off, double diag) {
  return Tridiag(std::vector<double>(m, off), std::vector<double>(m, diag), std::vector<double>(m, off));
}

// Left and right one-sided derivative of a column that vanishes at the walls (up to 2 dy).
double wall_b0(const double* p, int ny) {
  (void)ny;
  return 4 * p[1] - p[2];
}
double wall_b1(const double* p, int ny) { return 4 * p[ny - 1] - p[ny - 2]; }

}  // namespace

Solver::Solver(const Grid& g, double eps, SolverOptions opt) : grid_(g), eps_(eps), opt_(opt) {
  if (!(eps > 0)) throw ConfigError("solver: eps must be positive");
  if (!(opt.cfl > 0) || !(opt.dt_max > 0)) throw ConfigError("solver: cfl and dt_max must be positive");
  kc_ = static_cast<int>(std::floor(opt.dealias * (g.nx / 2)));
  psi_ = field::make_spectrum(g, 1);
  om_ = field::make_spectrum(g, 1);
  ub_.assign(g.nodes_y(), 0.0);
  ops_.resize(g.nk());
}

void Solver::rebuild(double dt, double wall) {
  const Grid& g = grid_;
  const int ny = g.ny, m = ny - 1;
  const double q = 1.0 / (g.dy() * g.dy()), a = 0.5 * eps_ * dt;
  for (int k = 0; k < g.nk() - 1; ++k) {
    const double xi = g.xi(k);
    auto op = std::make_shared<ModeOps>();
    op->helm = constant_tridiag(m, -a * q, 1 + 2 * a * q + a * xi * xi);
    if (k > 0) {
      op->pois = constant_tridiag(m, q, -2 * q - xi * xi);
      auto homog = [&](bool left, std::vector<double>& w, std::vector<double>& p) {
        w.assign(ny + 1, 0.0);
        p.assign(ny + 1, 0.0);
        std::vector<double> x(m, 0.0);
        x[left ? 0 : m - 1] = wall * a * q;
        op->helm.solve(x.data());
        for (int j = 1; j < ny; ++j) w[j] = x[j - 1];
        w[left ? 0 : ny] = 1.0;
        for (double& v : x) v = -v;
        op->pois.solve(x.data());
        for (int j = 1; j < ny; ++j) p[j] = x[j - 1];
      };
      homog(true, op->w0, op->p0);
      homog(false, op->w1, op->p1);
      const double m00 = wall_b0(op->p0.data(), ny), m01 = wall_b0(op->p1.data(), ny);
      const double m10 = wall_b1(op->p0.data(), ny), m11 = wall_b1(op->p1.data(), ny);
      const double det = m00 * m11 - m01 * m10;
      op->inv[0] = m11 / det;
      op->inv[1] = -m01 / det;
      op->inv[2] = -m10 / det;
      op->inv[3] = m00 / det;
    }
    ops_[k] = op;
  }
  dt_ops_ = dt;
  wall_ops_ = wall;
}

void Solver::solve_mode(int k, std::vector<cplx>& rhs, Spectrum& om, Spectrum& psi) const {
  const Grid& g = grid_;
  const int ny = g.ny, m = ny - 1, nk = g.nk();
  const ModeOps& op = *ops_[k];
  op.helm.solve(rhs.data());
  std::vector<cplx> pp(m);
  for (int i = 0; i < m; ++i) pp[i] = -rhs[i];
  op.pois.solve(pp.data());
  const cplx b0 = 4.0 * pp[0] - pp[1], b1 = 4.0 * pp[m - 1] - pp[m - 2];
  const cplx al = -(op.inv[0] * b0 + op.inv[1] * b1);
  const cplx be = -(op.inv[2] * b0 + op.inv[3] * b1);
  cplx* w = om.coef[0].data() + k;
  cplx* p = psi.coef[0].data() + k;
  w[0] = al;
  w[static_cast<std::size_t>(ny) * nk] = be;
  p[0] = 0.0;
  p[static_cast<std::size_t>(ny) * nk] = 0.0;
  for (int j = 1; j < ny; ++j) {
    w[static_cast<std::size_t>(j) * nk] = rhs[j - 1] + al * op.w0[j] + be * op.w1[j];
    p[static_cast<std::size_t>(j) * nk] = pp[j - 1] + al * op.p0[j] + be * op.p1[j];
  }
}

Solver::Nonlinear Solver::nonlinear(const Spectrum& psi, const Spectrum& om, const std::vector<double>& ub) const {
  const Grid& g = grid_;
  const int n = g.nodes_y(), nk = g.nk();
  const double dy = g.dy();
  const std::size_t s = nk;
  const cplx I(0.0, 1.0);
  Spectrum A = field::make_spectrum(g, 2), B = field::make_spectrum(g, 2), C = field::make_spectrum(g, 2);
  for (int k = 1; k < nk - 1; ++k) {
    const double xi = g.xi(k);
    const cplx* p = psi.coef[0].data() + k;
    const cplx* w = om.coef[0].data() + k;
    cplx* u1 = A.coef[0].data() + k;
    cplx* u2 = A.coef[1].data() + k;
    cplx* wx = B.coef[0].data() + k;
    cplx* wy = B.coef[1].data() + k;
    cplx* u1x = C.coef[0].data() + k;
    cplx* u1y = C.coef[1].data() + k;
    field::ycol::d1(p, u1, n, dy, s);
    field::ycol::d1(w, wy, n, dy, s);
    field::ycol::d1(static_cast<const cplx*>(u1), u1y, n, dy, s);
    for (int j = 0; j < n; ++j) {
      const std::size_t o = j * s;
      u2[o] = -I * xi * p[o];
      wx[o] = I * xi * w[o];
      u1x[o] = I * xi * u1[o];
    }
  }
  {
    std::vector<double> d(n), dd(n);
    field::ycol::d1(ub.data(), d.data(), n, dy);
    field::ycol::d2(ub.data(), dd.data(), n, dy);
    for (int j = 0; j < n; ++j) {
      A.at(0, j, 0) = ub[j];
      B.at(1, j, 0) = -dd[j];
      C.at(1, j, 0) = d[j];
    }
  }
  Field2D PA = field::inverse(A), PB = field::inverse(B), PC = field::inverse(C);
  Nonlinear out;
  Field2D Q(g, 2);
  const std::size_t sz = g.size();
  const auto& u1 = PA.comp(0);
  const auto& u2 = PA.comp(1);
  for (std::size_t i = 0; i < sz; ++i) {
    out.u1max = std::max(out.u1max, std::abs(u1[i]));
    out.u2max = std::max(out.u2max, std::abs(u2[i]));
    Q.comp(0)[i] = u1[i] * PB.comp(0)[i] + u2[i] * PB.comp(1)[i];
    Q.comp(1)[i] = u1[i] * PC.comp(0)[i] + u2[i] * PC.comp(1)[i];
  }
  Spectrum FQ = field::forward(Q);
  out.N = field::make_spectrum(g, 1);
  for (int j = 0; j < n; ++j)
    for (int k = 1; k <= std::min(kc_, nk - 2); ++k) out.N.at(0, j, k) = -FQ.at(0, j, k);
  out.M.resize(n);
  for (int j = 0; j < n; ++j) out.M[j] = -FQ.at(1, j, 0).real();
  return out;
}

Solver::Forcing Solver::forcing(double t, const ForceFn& f) {
  const Grid& g = grid_;
  const int n = g.nodes_y(), nk = g.nk();
  Forcing F;
  F.t = t;
  F.mean.assign(n, 0.0);
  if (!f) return F;
  Field2D fv = f(t);
  if (fv.ncomp() == 0) return F;
  if (fv.ncomp() != 2 || !(fv.grid() == g)) throw ShapeError("solver: force must be a 2-component field on the grid");
  F.zero = false;
  Spectrum fs = field::forward(fv);
  F.curl = field::make_spectrum(g, 1);
  const cplx I(0.0, 1.0);
  std::vector<cplx> col(n), d(n);
  for (int k = 1; k < nk - 1; ++k) {
    for (int j = 0; j < n; ++j) col[j] = fs.at(0, j, k);
    field::ycol::d1(col.data(), d.data(), n, g.dy());
    for (int j = 0; j < n; ++j) F.curl.at(0, j, k) = I * g.xi(k) * fs.at(1, j, k) - d[j];
  }
  for (int j = 0; j < n; ++j) F.mean[j] += fs.at(0, j, 0).real();
  return F;
}

void Solver::set_state(const Field2D& u, double t) {
  if (u.ncomp() != 2 || !(u.grid() == grid_)) throw ShapeError("solver: state must be a 2-component field on the grid");
  const Grid& g = grid_;
  const int n = g.nodes_y(), nk = g.nk();
  Spectrum s = field::forward(u);
  psi_ = field::make_spectrum(g, 1);
  om_ = field::make_spectrum(g, 1);
  const cplx I(0.0, 1.0);
  for (int k = 1; k < nk - 1; ++k) {
    const double xi = g.xi(k);
    for (int j = 1; j < n - 1; ++j) psi_.at(0, j, k) = I * s.at(1, j, k) / xi;
    // Discrete no-slip constraint.
    psi_.at(0, 1, k) = 0.25 * psi_.at(0, 2, k);
    psi_.at(0, n - 2, k) = 0.25 * psi_.at(0, n - 3, k);
    std::vector<cplx> col(n), dd(n);
    for (int j = 0; j < n; ++j) col[j] = psi_.at(0, j, k);
    field::ycol::d2(col.data(), dd.data(), n, g.dy());
    for (int j = 0; j < n; ++j) om_.at(0, j, k) = -(dd[j] - xi * xi * psi_.at(0, j, k));
  }
  for (int j = 0; j < n; ++j) ub_[j] = s.at(0, j, 0).real();
  ub_.front() = ub_.back() = 0.0;
  t_ = t;
  wall_fresh_ = true;
  nl_now_.reset();
  force_cache_.reset();
}

Field2D Solver::velocity() const {
  const Grid& g = grid_;
  const int n = g.nodes_y(), nk = g.nk();
  Spectrum S = field::make_spectrum(g, 2);
  const cplx I(0.0, 1.0);
  for (int k = 1; k < nk - 1; ++k) {
    field::ycol::d1(psi_.coef[0].data() + k, S.coef[0].data() + k, n, g.dy(), static_cast<std::size_t>(nk));
    for (int j = 0; j < n; ++j) S.at(1, j, k) = -I * g.xi(k) * psi_.at(0, j, k);
  }
  for (int j = 0; j < n; ++j) S.at(0, j, 0) = ub_[j];
  Field2D u = field::inverse(S, t_);
  u.set_divergence_free(true);
  return u;
}

double Solver::cfl_dt(double cfl) const {
  if (!nl_now_) nl_now_ = std::make_shared<Nonlinear>(nonlinear(psi_, om_, ub_));
  const double inf = std::numeric_limits<double>::infinity();
  const double a = nl_now_->u1max > 0 ? grid_.dx() / nl_now_->u1max : inf;
  const double b = nl_now_->u2max > 0 ? grid_.dy() / nl_now_->u2max : inf;
  return cfl * std::min(a, b);
}

void Solver::step(double dt, const ForceFn& f, const DriveFn& G) {
  if (!(dt > 0)) throw ConfigError("solver: dt must be positive");
  const double lim = cfl_dt(1.0);
  if (dt > lim * (1 + 1e-12)) {
    std::ostringstream os;
    os << "CFL violation: dt = " << dt << " exceeds the limit " << lim;
    throw CflError(os.str());
  }
  do_step(dt, f, G);
}

double Solver::advance(double t_stop, const ForceFn& f, const DriveFn& G) {
  const double left = t_stop - t_;
  if (!(left > 0)) return 0.0;
  double dt = std::min(opt_.dt_max, cfl_dt(opt_.cfl));
  if (!(dt > 0) || !std::isfinite(dt)) dt = opt_.dt_max;
  if (G) {
    // Velocity gained from the drive within the step.
    const double c = opt_.cfl * grid_.dx(), u = c / dt, p0 = G(t_);
    for (int it = 0; it < 4; ++it) {
      double gain = 0;
      for (double s : {0.25, 0.5, 0.75, 1.0}) gain = std::max(gain, std::abs(G(t_ + s * dt) - p0));
      if ((u + gain) * dt > c) dt = c / (u + gain);
    }
  }
  if (!std::isfinite(left)) {
    do_step(dt, f, G);
    return dt;
  }
  const double nsteps = std::ceil(left / dt * (1 - 1e-12));
  dt = left / std::max(nsteps, 1.0);
  do_step(dt, f, G);
  if (nsteps <= 1) t_ = t_stop;
  return dt;
}

void Solver::do_step(double dt, const ForceFn& f, const DriveFn& G) {
  const Grid& g = grid_;
  const int ny = g.ny, n = g.nodes_y(), nk = g.nk(), m = ny - 1;
  // First step: both halves of the wall coupling implicit.
  const double wall = wall_fresh_ ? 2.0 : 1.0;
  if (dt != dt_ops_ || wall != wall_ops_) rebuild(dt, wall);
  if (!nl_now_) nl_now_ = std::make_shared<Nonlinear>(nonlinear(psi_, om_, ub_));
  const double t1 = t_ + dt;
  Forcing F0 = (force_cache_ && force_cache_->t == t_) ? *force_cache_ : forcing(t_, f);
  Forcing F1 = forcing(t1, f);
  const double push = G ? G(t1) - G(t_) : 0.0;
  const double q = 1.0 / (g.dy() * g.dy()), a = 0.5 * eps_ * dt;

  // Explicit diffusion half and forcing, per mode (interior rows).
  std::vector<std::vector<cplx>> E(nk - 1, std::vector<cplx>(m));
  for (int k = 1; k < nk - 1; ++k) {
    const double xi = g.xi(k);
    for (int j = 1; j < ny; ++j) {
      const cplx wm = om_.at(0, j - 1, k), w0 = om_.at(0, j, k), wp = om_.at(0, j + 1, k);
      cplx v = w0 + a * ((wm - 2.0 * w0 + wp) * q - xi * xi * w0);
      if (wall_fresh_ && j == 1) v -= a * q * wm;
      if (wall_fresh_ && j == ny - 1) v -= a * q * wp;
      if (!F0.zero && !F0.curl.coef.empty()) v += 0.5 * dt * F0.curl.at(0, j, k);
      if (!F1.zero && !F1.curl.coef.empty()) v += 0.5 * dt * F1.curl.at(0, j, k);
      E[k][j - 1] = v;
    }
  }
  std::vector<double> E0(m);
  for (int j = 1; j < ny; ++j)
    E0[j - 1] = ub_[j] + a * (ub_[j - 1] - 2 * ub_[j] + ub_[j + 1]) * q + 0.5 * dt * (F0.mean[j] + F1.mean[j]) + push;

  auto solve_all = [&](const Nonlinear& A, const Nonlinear* B, Spectrum& om, Spectrum& psi, std::vector<double>& ub) {
    om = field::make_spectrum(g, 1);
    psi = field::make_spectrum(g, 1);
    std::vector<cplx> rhs(m);
    for (int k = 1; k < nk - 1; ++k) {
      for (int j = 1; j < ny; ++j) {
        cplx nl = A.N.at(0, j, k);
        if (B) nl = 0.5 * (nl + B->N.at(0, j, k));
        rhs[j - 1] = E[k][j - 1] + dt * nl;
      }
      solve_mode(k, rhs, om, psi);
    }
    std::vector<double> r0(m);
    for (int j = 1; j < ny; ++j) {
      double nl = A.M[j];
      if (B) nl = 0.5 * (nl + B->M[j]);
      r0[j - 1] = E0[j - 1] + dt * nl;
    }
    ops_[0]->helm.solve(r0.data());
    ub.assign(n, 0.0);
    for (int j = 1; j < ny; ++j) ub[j] = r0[j - 1];
  };

  Spectrum om_p, psi_p, om_c, psi_c;
  std::vector<double> ub_p, ub_c;
  solve_all(*nl_now_, nullptr, om_p, psi_p, ub_p);
  Nonlinear Np = nonlinear(psi_p, om_p, ub_p);
  solve_all(*nl_now_, &Np, om_c, psi_c, ub_c);

  om_ = std::move(om_c);
  psi_ = std::move(psi_c);
  ub_ = std::move(ub_c);
  t_ = t1;
  wall_fresh_ = false;
  ++steps_;
  nl_now_.reset();
  force_cache_ = std::make_shared<Forcing>(std::move(F1));

  for (double v : ub_)
    if (!std::isfinite(v)) throw NanError("solver: non-finite mean flow");
  for (const auto& v : psi_.coef[0])
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      std::ostringstream os;
      os << "solver: non-finite state at t = " << t_;
      throw NanError(os.str());
    }
}

Field2D step_ns(const Field2D& state, double dt, double eps, const Field2D& force) {
  Solver s(state.grid(), eps);
  s.set_state(state, state.time());
  ForceFn f;
  if (force.ncomp() > 0) f = [&](double) { return force; };
  s.step(dt, f);
  return s.velocity();
}

// ---------------------------------------------------------------------------------------------
// Verification helpers

namespace {

struct Manufactured {
  double eps, xi;
  static double A(double t) { return 0.5 * std::cos(t); }
  static double dA(double t) { return -0.5 * std::sin(t); }
  static double B(double t) { return 0.2 + 0.3 * std::sin(t); }
  static double dB(double t) { return 0.3 * std::cos(t); }

  // u1 = B(1-y^2) + A sin(xi x) g', u2 = -A xi cos(xi x) g, g = (1-y^2)^2.
  void eval(double t, double x, double y, double out_u[2], double out_f[2]) const {
    const double g = (1 - y * y) * (1 - y * y), g1 = -4 * y * (1 - y * y), g2 = -4 + 12 * y * y, g3 = 24 * y;
    const double s = std::sin(xi * x), c = std::cos(xi * x), a = A(t), b = B(t);
    const double ub = b * (1 - y * y), ub1 = -2 * b * y, ub2 = -2 * b;
    const double u1 = ub + a * s * g1, u2 = -a * xi * c * g;
    const double u1t = dB(t) * (1 - y * y) + dA(t) * s * g1, u2t = -dA(t) * xi * c * g;
    const double u1x = a * xi * c * g1, u1y = ub1 + a * s * g2;
    const double u2x = a * xi * xi * s * g, u2y = -a * xi * c * g1;
    const double lap1 = ub2 - a * xi * xi * s * g1 + a * s * g3;
    const double lap2 = a * xi * xi * xi * c * g - a * xi * c * g2;
    out_u[0] = u1;
    out_u[1] = u2;
    out_f[0] = u1t + u1 * u1x + u2 * u1y - eps * lap1;
    out_f[1] = u2t + u1 * u2x + u2 * u2y - eps * lap2;
  }
  Field2D velocity(const Grid& gr, double t) const {
    return field::sample(gr, 2, [&](int c, double x, double y) {
      double u[2], f[2];
      eval(t, x, y, u, f);
      return u[c];
    });
  }
  Field2D force(const Grid& gr, double t) const {
    return field::sample(gr, 2, [&](int c, double x, double y) {
      double u[2], f[2];
      eval(t, x, y, u, f);
      return f[c];
    });
  }
};

Field2D run_fixed(const Grid& g, double eps, const Manufactured& mf, double dt, double t_end) {
  Solver s(g, eps);
  s.set_state(mf.velocity(g, 0.0));
  ForceFn f = [&](double t) { return mf.force(g, t); };
  const int n = static_cast<int>(std::lround(t_end / dt));
  for (int i = 0; i < n; ++i) s.step(dt, f);
  return s.velocity();
}

}  // namespace

ConvergenceReport manufactured_convergence(double eps) {
  ConvergenceReport rep;
  const double t_end = 0.5;
  for (int ny : {16, 32, 64}) {
    Grid g = field::make_grid(32, ny, -4, 6, 1);
    Manufactured mf{eps, g.xi(2)};
    Field2D u = run_fixed(g, eps, mf, 5e-4, t_end);
    rep.ny.push_back(ny);
    rep.space_error.push_back(field::l2(u - mf.velocity(g, t_end)));
  }
  const std::size_t ns = rep.space_error.size();
  rep.space_order = std::log2(rep.space_error[ns - 2] / rep.space_error[ns - 1]);

  Grid g = field::make_grid(32, 32, -4, 6, 1);
  Manufactured mf{eps, g.xi(2)};
  const double t_end2 = 1.0;
  Field2D ref = run_fixed(g, eps, mf, 0.00125, t_end2);
  for (double dt : {0.04, 0.02, 0.01}) {
    rep.dt.push_back(dt);
    rep.time_error.push_back(field::l2(run_fixed(g, eps, mf, dt, t_end2) - ref));
  }
  const std::size_t nt = rep.time_error.size();
  rep.time_order = std::log2(rep.time_error[nt - 2] / rep.time_error[nt - 1]);
  return rep;
}

EnergyAudit energy_audit(double eps, int steps, int nx, int ny) {
  Grid g = field::make_grid(nx, ny, -4, 6, 1);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  double a[4][4];
  for (auto& r : a)
    for (double& v : r) v = nd(rng);
  Field2D psi = field::sample(g, 1, [&](int, double x, double y) {
    double s = 0;
    for (int p = 1; p < 4; ++p)
      for (int q = 0; q < 4; ++q) s += a[p][q] * std::cos(p * g.dxi() * x + q) * std::cos(q * 1.3 * y + p);
    return 0.3 * s * (1 - y * y) * (1 - y * y);
  });
  Solver s(g, eps);
  s.set_state(field::perp_grad(psi));
  EnergyAudit out;
  out.t.push_back(0.0);
  out.energy.push_back(field::l2_squared(s.velocity()));
  const double e0 = out.energy.front();
  out.monotone = true;
  for (int i = 0; i < steps; ++i) {
    const double dt = s.advance(std::numeric_limits<double>::infinity());
    out.max_dt = std::max(out.max_dt, dt);
    const double e = field::l2_squared(s.velocity());
    const double inc = e - out.energy.back();
    out.max_increase = std::max(out.max_increase, inc / e0);
    if (inc > dt * dt * e0) out.monotone = false;
    out.t.push_back(s.time());
    out.energy.push_back(e);
  }
  return out;
}

field::Extension bundled_datum(const Grid& g, double sigma, double amplitude) {
  const double xc = 0.5 * g.L;
  Field2D psi = field::sample(g, 1, [=](int, double x, double y) {
    const double c = std::cos(std::numbers::pi * y / 2);
    return amplitude * std::exp(-((x - xc) * (x - xc) + y * y) / (2 * sigma * sigma)) * c * c;
  });
  return field::extend_initial_data(field::perp_grad(psi), 1e-6);
}

// ---------------------------------------------------------------------------------------------
// Pipeline

RemainderState extract_remainder(const Field2D& u_eps, const AnsatzBundle& b, double t, double rho, int N) {
  RemainderState rs;
  rs.r = u_eps - assemble_ansatz(b, t);
  rs.r *= 1.0 / b.eps;
  rs.r.set_time(t);
  rs.l2 = field::l2(rs.r);
  if (N >= 0) {
    rs.r_rho = analytic::analytic_weight(rs.r, std::max(rho, 0.0), N);
    rs.b = b.eps * analytic::besov_grad_norm(rs.r_rho);
  }
  return rs;
}

std::shared_ptr<Context> make_context(const ScalingConfig& c, int m, bool with_profile) {
  auto ctx = std::make_shared<Context>();
  ctx->h = baseflow::design_base_flow(c.T, c.L, m);
  if (with_profile) {
    auto V = std::make_shared<heat::HalfLineProfile>(heat::solve_boundary_layer(ctx->h));
    ctx->loss = heat::total_radius_loss(*V);
    ctx->ell = heat::loss_integrand(*V);
    ctx->V = V;
  }
  return ctx;
}

namespace {

double ell_at(const Context& ctx, double t) {
  const auto& e = ctx.ell;
  if (e.empty() || t <= e.front().first) return e.empty() ? 0.0 : e.front().second;
  if (t >= e.back().first) return 0.0;
  auto it = std::lower_bound(e.begin(), e.end(), std::make_pair(t, -std::numeric_limits<double>::infinity()));
  const auto& [t1, v1] = *it;
  const auto& [t0, v0] = *(it - 1);
  return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
}

std::vector<double> output_times(const ScalingConfig& c, const RunOptions& o) {
  const double t_end = c.T / c.eps;
  std::vector<double> t;
  const double early = std::min(2 * c.T, t_end);
  const int n1 = std::max(1, static_cast<int>(std::ceil(early / o.output_dt - 1e-9)));
  for (int i = 0; i <= n1; ++i) t.push_back(early * i / n1);
  if (t_end > early) {
    const int n2 = std::max(1, static_cast<int>(std::ceil((t_end - early) / o.output_dt_late - 1e-9)));
    for (int i = 1; i <= n2; ++i) t.push_back(early + (t_end - early) * i / n2);
  }
  return t;
}

}  // namespace

TransportSetup build_transport(const ScalingConfig& c, const Field2D& u_star, const RunOptions& opt, const Context* ctx) {
  if ((opt.flush || opt.regularize) && !ctx) throw ConfigError("build_transport: a context is required");
  TransportSetup ts;
  baseflow::BaseFlow h = opt.flush ? ctx->h : baseflow::BaseFlow(c.T, c.L, opt.m, {}, {});
  ts.u1 = transport::TransportProfile(field::stream_function_of(u_star), h, baseflow::design_cutoff(c.T));
  if (opt.regularize) {
    const double rt = opt.rho_target > 0 ? opt.rho_target : 2 * ctx->loss.value;
    // The ramp is charged through the phantom ledger.
    auto reg = analytic::low_pass_regularize(u_star, rt, std::numeric_limits<double>::infinity(), c.k, opt.tau);
    ts.regularized = reg.trimmed;
    ts.cutoff_index = reg.cutoff_index;
    if (reg.trimmed) ts.u1.set_tail(field::stream_function_of(reg.tail), opt.tau);
  }
  return ts;
}

PhantomLedger phantom_ledger(const ScalingConfig& c, const transport::TransportProfile& u1, int samples) {
  PhantomLedger led;
  const int ns = std::max(samples, 2);
  for (int i = 0; i < ns; ++i) led.t.push_back(c.T * i / (ns - 1));
  auto split = transport::split_force(transport::sample_forces(u1, led.t), c.delta, c.k, 1e-6);
  led.hk = std::move(split.phantom_hk);
  led.l1_hk = split.phantom_l1_hk;
  led.residual_max = split.residual_max;
  return led;
}

RunResult run_scaled(const ScalingConfig& c, const Field2D& u_star, const RunOptions& opt, std::shared_ptr<Context> ctx) {
  c.validate();
  if (u_star.ncomp() != 2) throw ShapeError("run_scaled: u_star must have two components");
  const Grid& g = u_star.grid();
  if (std::abs(g.L - c.L) > 1e-12 * c.L) throw ConfigError("run_scaled: grid L differs from the configured L");
  if (g.dy() > std::sqrt(c.eps) / 8) {
    std::ostringstream os;
    os << "resolution error: dy = " << g.dy() << " exceeds sqrt(eps)/8 = " << std::sqrt(c.eps) / 8
       << "; use ny >= " << static_cast<int>(std::ceil(16 / std::sqrt(c.eps)));
    throw ResolutionError(os.str());
  }
  const bool need_ctx = opt.flush || opt.co_integrate || opt.regularize;
  if (!ctx && need_ctx) ctx = make_context(c, opt.m, true);

  RunResult res;
  res.config = c;
  res.options = opt;
  if (ctx) res.total_loss = ctx->loss.value;

  TransportSetup ts = build_transport(c, u_star, opt, ctx.get());
  const baseflow::BaseFlow h = ts.u1.base_flow();
  const baseflow::Cutoff beta = ts.u1.cutoff();
  AnsatzBundle bundle;
  bundle.h = h;
  bundle.V = opt.flush ? ctx->V : nullptr;
  bundle.u1 = std::move(ts.u1);
  bundle.eps = c.eps;
  res.regularized = ts.regularized;
  res.cutoff_index = ts.cutoff_index;

  {
    PhantomLedger led = phantom_ledger(c, bundle.u1, opt.ledger_samples);
    res.ledger_t = std::move(led.t);
    res.ledger_hk = std::move(led.hk);
    res.phantom_l1_hk = led.l1_hk;
    res.residual_max = led.residual_max;
  }
  if (!opt.flush) res.warnings.push_back("ablation: phantom part not applied, budget not enforced");
  if (opt.flush && opt.enforce_budget && res.phantom_l1_hk > c.eta) {
    std::ostringstream os;
    os << "budget exceeded: realized phantom L1(0,T;H^" << c.k << ") norm " << res.phantom_l1_hk << " > eta = " << c.eta;
    throw BudgetExceededError(os.str(), res.phantom_l1_hk, c.eta);
  }

  const double tail_end = bundle.u1.has_tail() ? bundle.u1.tau() : 0.0;
  ForceFn f = [&](double t) -> Field2D {
    if (t > c.T || (beta.derivative(t) == 0 && !(t < tail_end))) return Field2D();
    auto s = transport::split_sample(bundle.u1.total_force(t), c.delta);
    Field2D out = std::move(s.control);
    if (opt.flush) out += s.phantom;
    out *= c.eps;
    return out;
  };
  DriveFn G;
  if (opt.flush) G = [&](double t) { return static_cast<double>(h.value(t)); };

  std::optional<analytic::RadiusIntegrator> radius;
  int N = -1;
  if (opt.co_integrate) {
    const double rho0 = opt.rho0 > 0 ? opt.rho0 : 2 * ctx->loss.value;
    if (opt.N >= 0) {
      N = std::min(opt.N, g.nk() - 1);
    } else {
      N = std::min(g.nk() - 1, static_cast<int>(std::floor(analytic::kMaxExponent / (rho0 * g.dxi()))));
    }
    radius.emplace(rho0, c.eps, N);
  }

  Solver sol(g, c.eps, opt.solver);
  Field2D u0 = u_star;
  u0 *= c.eps;
  sol.set_state(u0, 0.0);

  const auto times = output_times(c, opt);
  const field::XWindow omega = std::make_pair(0.0, c.L);
  double prev_r = 0, prev_t = 0;
  for (std::size_t n = 0; n < times.size(); ++n) {
    const double td = times[n];
    while (sol.time() < td) sol.advance(td, f, G);
    Field2D u = sol.velocity();
    Diagnostic d;
    d.t = td;
    d.omega_norm = field::l2(u, omega);
    const double rho_now = radius ? radius->rho() : 0.0;
    auto rem = extract_remainder(u, bundle, td, rho_now, N);
    d.r_norm = rem.l2;
    d.ell = ctx && opt.flush ? ell_at(*ctx, td) : 0.0;
    d.b = rem.b;
    if (radius) {
      radius->push(td, d.ell, d.b);
      d.rho = radius->rho();
    }
    d.sigma = n > 0 ? (d.r_norm - prev_r) / (td - prev_t) : 0.0;
    prev_r = d.r_norm;
    prev_t = td;
    res.r_sup = std::max(res.r_sup, d.r_norm);
    if (opt.snapshot_stride > 0 && n % opt.snapshot_stride == 0) res.snapshots.push_back(u);
    res.diag.push_back(d);
    if (n + 1 == times.size()) res.final_norm = d.omega_norm;
  }
  res.final_ratio = res.final_norm / c.eps;
  res.pass = res.final_ratio <= c.theta;
  res.steps = sol.steps();
  if (radius) res.radius = radius->trace();
  return res;
}

RunResult co_integrate(const ScalingConfig& c, const Field2D& u_star, RunOptions opt, std::shared_ptr<Context> ctx) {
  opt.co_integrate = true;
  return run_scaled(c, u_star, opt, std::move(ctx));
}

void write_diagnostics_csv(const std::string& path, const RunResult& r) {
  std::vector<std::vector<double>> cols(7);
  for (const auto& d : r.diag) {
    cols[0].push_back(d.t);
    cols[1].push_back(d.omega_norm);
    cols[2].push_back(d.r_norm);
    cols[3].push_back(d.rho);
    cols[4].push_back(d.ell);
    cols[5].push_back(d.b);
    cols[6].push_back(d.sigma);
  }
  io::write_csv(path, {"t", "u_omega_l2", "r_l2", "rho", "ell", "b", "sigma"}, cols);
}

std::string manifest_json(const RunResult& r) {
  nlohmann::ordered_json j;
  j["code_version"] = FLUSHLAB_VERSION;
  const auto& c = r.config;
  j["config"] = {{"eps", c.eps}, {"T", c.T}, {"L", c.L}, {"eta", c.eta}, {"k", c.k}, {"delta", c.delta}, {"theta", c.theta}};
  const auto& o = r.options;
  j["options"] = {{"m", o.m},
                  {"nx", o.nx},
                  {"ny", o.ny},
                  {"x_min", o.x_min},
                  {"x_max", o.x_max},
                  {"cfl", o.solver.cfl},
                  {"dt_max", o.solver.dt_max},
                  {"dealias", o.solver.dealias},
                  {"flush", o.flush},
                  {"regularize", o.regularize},
                  {"rho_target", o.rho_target},
                  {"tau", o.tau},
                  {"enforce_budget", o.enforce_budget},
                  {"co_integrate", o.co_integrate},
                  {"rho0", o.rho0},
                  {"N", o.N},
                  {"output_dt", o.output_dt},
                  {"output_dt_late", o.output_dt_late},
                  {"ledger_samples", o.ledger_samples}};
  j["ledger"] = {{"phantom_l1_hk", r.phantom_l1_hk}, {"eta", c.eta}, {"within_budget", r.phantom_l1_hk <= c.eta},
                 {"near_wall_residual_max", r.residual_max}};
  j["result"] = {{"final_norm", r.final_norm}, {"final_ratio", r.final_ratio}, {"pass", r.pass}, {"r_sup", r.r_sup},
                 {"steps", r.steps}, {"total_radius_loss", r.total_loss}, {"regularized", r.regularized},
                 {"cutoff_index", r.cutoff_index}};
  if (r.radius) j["radius"] = nlohmann::ordered_json::parse(analytic::trace_summary_json(*r.radius));
  j["warnings"] = r.warnings;
  return j.dump(2);
}

}  // namespace flushlab::ns
