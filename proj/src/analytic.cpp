#include "flushlab/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "flushlab/errors.hpp"
#include "flushlab/io.hpp"
#include "flushlab/norms.hpp"
#include "flushlab/operators.hpp"
#include "flushlab/spectral.hpp"
#include "json.hpp"

namespace flushlab::analytic {

using field::cplx;
using field::Grid;

namespace {

template <class F>
Spectrum scale_modes(Spectrum s, F&& factor) {
  const Grid& g = s.grid;
  for (int c = 0; c < s.ncomp(); ++c)
    for (int j = 0; j <= g.ny; ++j)
      for (int k = 0; k < g.nk(); ++k) s.at(c, j, k) *= factor(k);
  return s;
}

double multiplicity(const Grid& g, int k) { return (k == 0 || 2 * k == g.nx) ? 1.0 : 2.0; }

}  // namespace

Field2D abs_dx(const Field2D& u) {
  const Grid& g = u.grid();
  Field2D r = field::inverse(scale_modes(field::forward(u), [&](int k) { return g.xi(k); }), u.time());
  r.set_divergence_free(false);
  return r;
}

Spectrum analytic_weight(const Spectrum& s, double rho, int N) {
  if (!(rho >= 0)) throw ConfigError("analytic weight: rho must be >= 0");
  if (N < 0) throw ConfigError("analytic weight: N must be >= 0");
  const Grid& g = s.grid;
  const int kmax = std::min(N, g.nk() - 1);
  if (rho * g.xi(kmax) > kMaxExponent) {
    std::ostringstream os;
    os << "overflow guard: rho * xi_max = " << rho * g.xi(kmax) << " exceeds " << kMaxExponent;
    throw OverflowGuardError(os.str());
  }
  return scale_modes(s, [&](int k) { return k <= kmax ? std::exp(rho * g.xi(k)) : 0.0; });
}

Field2D analytic_weight(const Field2D& u, double rho, int N) {
  Field2D r = field::inverse(analytic_weight(field::forward(u), rho, N), u.time());
  r.set_divergence_free(u.divergence_free());
  return r;
}

int block_of(double xi) {
  xi = std::abs(xi);
  if (xi < 1.0) return -1;
  int e = 0;
  std::frexp(xi, &e);  // xi = f 2^e, f in [0.5, 1)
  return e - 1;
}

int max_block(const Grid& g) { return block_of(g.xi(g.nk() - 1)); }

Field2D lp_block(const Field2D& u, int j) {
  if (j < -1) throw ConfigError("lp_block: j must be >= -1");
  const Grid& g = u.grid();
  Field2D r = field::inverse(scale_modes(field::forward(u), [&](int k) { return block_of(g.xi(k)) == j ? 1.0 : 0.0; }),
                             u.time());
  r.set_divergence_free(u.divergence_free());
  return r;
}

std::vector<double> block_norms(const Spectrum& s) {
  const Grid& g = s.grid;
  const auto w = field::ycol::weights(g.nodes_y(), g.dy());
  // long double: weighted coefficients can reach e^700.
  std::vector<long double> sq(max_block(g) + 2, 0.0L);
  for (int c = 0; c < s.ncomp(); ++c)
    for (int j = 0; j <= g.ny; ++j)
      for (int k = 0; k < g.nk(); ++k) {
        const long double a = std::abs(s.at(c, j, k));
        sq[block_of(g.xi(k)) + 1] += w[j] * g.lx() * multiplicity(g, k) * a * a;
      }
  std::vector<double> out(sq.size());
  for (std::size_t i = 0; i < sq.size(); ++i) out[i] = static_cast<double>(std::sqrt(sq[i]));
  return out;
}

double spectral_l2(const Spectrum& s) {
  long double sum = 0;
  for (long double b : block_norms(s)) sum += b * b;
  return static_cast<double>(std::sqrt(sum));
}

double besov_b021_norm(const Spectrum& s) {
  double sum = 0;
  for (double b : block_norms(s)) sum += b;
  return sum;
}

double besov_b021_norm(const Field2D& u) { return besov_b021_norm(field::forward(u)); }

double besov_grad_norm(const Spectrum& s) {
  Spectrum sx = field::dx(s, 1);
  Spectrum sy = field::dy(s, 1);
  Spectrum all = sx;
  for (auto& c : sy.coef) all.coef.push_back(std::move(c));
  return besov_b021_norm(all);
}

double besov_grad_norm(const Field2D& u) { return besov_grad_norm(field::forward(u)); }

double linf_x_l2_y(const Field2D& u) {
  const Grid& g = u.grid();
  const auto w = field::ycol::weights(g.nodes_y(), g.dy());
  double m = 0;
  for (int i = 0; i < g.nx; ++i) {
    double s = 0;
    for (int c = 0; c < u.ncomp(); ++c)
      for (int j = 0; j <= g.ny; ++j) s += w[j] * u.at(c, j, i) * u.at(c, j, i);
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

int representable_cutoff(const Grid& g, double rho_target) {
  if (!(rho_target > 0)) throw ConfigError("regularize: rho_target must be positive");
  double kf = kMaxExponent / (2.0 * rho_target * g.dxi());
  if (kf >= g.nk() - 1) return g.nk() - 1;
  return static_cast<int>(std::floor(kf));
}

Regularized low_pass_regularize(const Field2D& u_star, double rho_target, double eta, int k, double tau, int samples) {
  if (!(eta >= 0)) throw ConfigError("regularize: eta must be >= 0");
  if (!(tau > 0)) throw ConfigError("regularize: tau must be positive");
  if (k < 0) throw ConfigError("regularize: k must be >= 0");
  samples = std::max(samples, 2);
  const Grid& g = u_star.grid();
  const int K = representable_cutoff(g, rho_target);

  Regularized r;
  r.cutoff_index = K;
  r.xi_cut = g.xi(K);
  r.k = k;
  r.tau = tau;

  Spectrum s = field::forward(u_star);
  Spectrum high = scale_modes(s, [&](int q) { return q > K ? 1.0 : 0.0; });
  r.tail = field::inverse(high, u_star.time());
  // Round-off of an exactly band-limited input.
  const double floor = 64 * std::numeric_limits<double>::epsilon() * std::max(u_star.max_abs(), 1e-300);
  r.trimmed = r.tail.max_abs() > floor;
  if (!r.trimmed) {
    r.field = u_star;
    r.tail = Field2D(g, u_star.ncomp(), u_star.time());
  } else {
    r.field = field::inverse(scale_modes(s, [&](int q) { return q > K ? 0.0 : 1.0; }), u_star.time());
    r.field.set_divergence_free(u_star.divergence_free());
    r.tail.set_divergence_free(u_star.divergence_free());
  }

  Field2D rate = (-1.0 / tau) * r.tail;
  const double rate_hk = r.trimmed ? field::hk(rate, k) : 0.0;
  for (int n = 0; n < samples; ++n) {
    double t = tau * n / (samples - 1);
    Field2D f = rate;
    f.set_time(t);
    r.force.t.push_back(t);
    r.force.f.push_back(std::move(f));
    r.force_hk.push_back(rate_hk);
  }
  r.force_norm = field::l1_time(r.force.t, r.force_hk);

  if (r.force_norm > eta) {
    std::ostringstream os;
    os << "infeasible regularization: cutoff index " << K << " (xi = " << r.xi_cut << ") allowed by rho_target = "
       << rho_target << " leaves a ramp norm " << r.force_norm << " > eta = " << eta;
    throw InfeasibleRegularizationError(os.str(), K, r.force_norm);
  }
  return r;
}

RadiusIntegrator::RadiusIntegrator(double rho0, double eps, int N) {
  trace_.rho0 = rho0;
  trace_.eps = eps;
  trace_.N = N;
  trace_.valid = rho0 > 0;
  if (!trace_.valid) trace_.invalid_at = 0;
}

void RadiusIntegrator::push(double t, double ell, double b) {
  if (!(ell >= 0) || !(b >= 0)) throw NumericError("radius integrator: ell and b must be finite and >= 0");
  auto& r = trace_;
  if (r.t.empty()) {
    r.t.push_back(t);
    r.rho.push_back(r.rho0);
  } else {
    if (!(t > r.t.back())) throw ConfigError("radius integrator: times must increase");
    double h = t - r.t.back();
    double dl = 0.5 * h * (ell + r.ell.back());
    double db = 0.5 * h * (b + r.b.back());
    r.loss += dl;
    r.feedback += db;
    const long double b0 = r.b.back(), b1 = b;
    b2_ += 0.5L * h * (b1 * b1 + b0 * b0);
    r.t.push_back(t);
    r.rho.push_back(r.rho.back() - dl - db);
  }
  r.ell.push_back(ell);
  r.b.push_back(b);
  if (r.valid && r.rho.back() <= 0) {
    r.valid = false;
    r.invalid_at = t;
  }
  const double span = r.t.back() - r.t.front();
  r.cs_bound = r.eps > 0 ? static_cast<double>(std::sqrt(span * b2_ / r.eps)) : 0.0;
}

RadiusTrace integrate_radius(double rho0, const std::vector<double>& t, const std::vector<double>& ell,
                             const std::vector<double>& b, double eps, int N) {
  if (t.size() != ell.size() || t.size() != b.size())
    throw ConfigError("integrate_radius: t, ell and b must have the same length");
  RadiusIntegrator it(rho0, eps, N);
  for (std::size_t n = 0; n < t.size(); ++n) it.push(t[n], ell[n], b[n]);
  return it.trace();
}

double trace_consistency(const RadiusTrace& r) {
  double acc = 0, worst = 0;
  for (std::size_t n = 0; n < r.t.size(); ++n) {
    if (n > 0) acc += 0.5 * (r.t[n] - r.t[n - 1]) * (r.ell[n] + r.ell[n - 1] + r.b[n] + r.b[n - 1]);
    worst = std::max(worst, std::abs(r.rho[n] - (r.rho0 - acc)));
  }
  return worst;
}

void write_trace_csv(const std::string& path, const RadiusTrace& r) {
  io::write_csv(path, {"t", "rho", "ell", "b"}, {r.t, r.rho, r.ell, r.b});
}

std::string trace_summary_json(const RadiusTrace& r) {
  nlohmann::ordered_json j;
  j["valid"] = r.valid;
  j["rho0"] = r.rho0;
  j["final_rho"] = r.final_rho();
  j["invalid_at"] = r.valid ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.invalid_at);
  j["loss"] = r.loss;
  j["feedback"] = r.feedback;
  j["cauchy_schwarz_bound"] = r.cs_bound;
  j["eps"] = r.eps;
  j["N"] = r.N;
  j["samples"] = r.t.size();
  return j.dump(2);
}

void write_trace_json(const std::string& path, const RadiusTrace& r) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << trace_summary_json(r) << "\n";
}

}  // namespace flushlab::analytic
