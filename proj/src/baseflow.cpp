#include "flushlab/baseflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <sstream>

#include "flushlab/errors.hpp"
#include "flushlab/smooth.hpp"

namespace flushlab::baseflow {

namespace {

using boost::math::quadrature::tanh_sinh;

// integrate() is not const-qualified in this Boost release, so each thread owns an instance.
tanh_sinh<real>& integrator() {
  thread_local tanh_sinh<real> q(15);
  return q;
}

constexpr real kTol = 1e-18L;

real unit_bump(real s) {
  if (s <= -1 || s >= 1) return 0;
  return std::exp(-1 / (1 - s * s));
}

// Integral of g(u) * unit_bump(u) over [lo, hi] within [-1, 1].
template <class G>
real bump_quad(G&& g, real lo, real hi) {
  lo = std::max(lo, real(-1));
  hi = std::min(hi, real(1));
  if (hi <= lo) return 0;
  auto f = [&](real u) { return g(u) * unit_bump(u); };
  return integrator().integrate(f, lo, hi, kTol);
}

}  // namespace

real Bump::value(real t) const { return unit_bump((t - center) / half_width); }

real Bump::derivative(real t) const {
  const real s = (t - center) / half_width;
  if (s <= -1 || s >= 1) return 0;
  const real e = unit_bump(s);
  if (e == 0) return 0;
  const real q = 1 - s * s;
  return e * (-2 * s / (q * q)) / half_width;
}

real Bump::integral() const {
  return half_width * bump_quad([](real) { return real(1); }, -1, 1);
}

real Bump::moment(int n, real s0) const {
  const real off = center - s0;
  const real w = half_width;
  return w * bump_quad([&](real u) { return std::pow(off + w * u, n); }, -1, 1);
}

real Bump::cumulative(real t) const {
  if (t <= a()) return 0;
  if (t >= b()) return integral();
  return half_width * bump_quad([](real) { return real(1); }, -1, (t - center) / half_width);
}

std::vector<Bump> bump_basis(double a, double b, int count) {
  if (count < 1) throw InfeasibleDesignError("bump_basis needs count >= 1");
  if (!(a < b)) throw InfeasibleDesignError("bump_basis needs a < b");
  std::vector<Bump> out;
  const real d = (real(b) - real(a)) / (count + 1);
  for (int i = 0; i < count; ++i) out.push_back(Bump{real(a) + (i + 1) * d, d});
  return out;
}

BaseFlow::BaseFlow(double T, double L, int m, std::vector<Bump> bumps, std::vector<real> coef)
    : T_(T), L_(L), m_(m), bumps_(std::move(bumps)), coef_(std::move(coef)) {
  if (bumps_.size() != coef_.size()) throw InfeasibleDesignError("coefficient count does not match basis");
  full_.reserve(bumps_.size());
  for (const auto& b : bumps_) full_.push_back(b.integral());
}

real BaseFlow::value(real t) const {
  real s = 0;
  for (std::size_t i = 0; i < bumps_.size(); ++i)
    if (t > bumps_[i].a() && t < bumps_[i].b()) s += coef_[i] * bumps_[i].value(t);
  return s;
}

real BaseFlow::derivative(real t) const {
  real s = 0;
  for (std::size_t i = 0; i < bumps_.size(); ++i)
    if (t > bumps_[i].a() && t < bumps_[i].b()) s += coef_[i] * bumps_[i].derivative(t);
  return s;
}

real BaseFlow::displacement(real t) const {
  real s = 0;
  for (std::size_t i = 0; i < bumps_.size(); ++i) {
    if (t <= bumps_[i].a()) continue;
    s += coef_[i] * (t >= bumps_[i].b() ? full_[i] : bumps_[i].cumulative(t));
  }
  return s;
}

real BaseFlow::moment(int n, real s0) const {
  real s = 0;
  for (std::size_t i = 0; i < bumps_.size(); ++i) s += coef_[i] * bumps_[i].moment(n, s0);
  return s;
}

std::vector<std::pair<real, real>> BaseFlow::support() const {
  std::vector<std::pair<real, real>> iv;
  for (const auto& b : bumps_) iv.emplace_back(b.a(), b.b());
  std::sort(iv.begin(), iv.end());
  std::vector<std::pair<real, real>> out;
  for (const auto& p : iv) {
    if (!out.empty() && p.first <= out.back().second)
      out.back().second = std::max(out.back().second, p.second);
    else
      out.push_back(p);
  }
  return out;
}

double BaseFlow::max_abs(int samples) const {
  double m = 0;
  for (int i = 0; i < samples; ++i) {
    const real t = real(T_) * i / (samples - 1);
    m = std::max(m, static_cast<double>(std::abs(value(t))));
  }
  return m;
}

DesignResidual BaseFlow::residual() const {
  DesignResidual r;
  real left = 0, right = 0;
  for (std::size_t i = 0; i < bumps_.size(); ++i) {
    if (bumps_[i].b() <= real(T_) / 3 * (1 + 1e-15L))
      left += coef_[i] * full_[i];
    else if (bumps_[i].a() >= real(2 * T_) / 3 * (1 - 1e-15L))
      right += coef_[i] * full_[i];
  }
  r.left_integral = static_cast<double>(left - 3 * real(L_));
  r.right_integral = static_cast<double>(right + 3 * real(L_));
  for (int k = 1; k <= m_; ++k)
    r.max_moment = std::max(r.max_moment, static_cast<double>(std::abs(moment(k, real(T_) / 2))));
  return r;
}

BaseFlow design_base_flow(double T, double L, int m, const DesignOptions& opt) {
  if (!(T > 0) || !(L > 0) || m < 0) throw InfeasibleDesignError("design_base_flow needs T > 0, L > 0, m >= 0");
  using Mat = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<real, Eigen::Dynamic, 1>;
  const int rows = m + 2;
  const real s0 = real(T) / 2;
  real last_rel = 0;
  for (int n = std::max(opt.min_bumps, m + 3); n <= opt.max_bumps; ++n) {
    // Unequal lobe sizes keep the minimum-norm solution free of accidental symmetry.
    const int n_left = (n + 2) / 2;
    const int n_right = n - n_left;
    if (n_right < 1) continue;
    auto bl = bump_basis(0.0, T / 3, n_left);
    auto br = bump_basis(2 * T / 3, T, n_right);
    std::vector<Bump> bumps = bl;
    bumps.insert(bumps.end(), br.begin(), br.end());
    Mat A = Mat::Zero(rows, n);
    Vec rhs = Vec::Zero(rows);
    for (int i = 0; i < n; ++i) {
      const real I = bumps[i].integral();
      A(i < n_left ? 0 : 1, i) = I;
      for (int k = 1; k <= m; ++k) A(k + 1, i) = bumps[i].moment(k, s0);
    }
    rhs(0) = 3 * real(L);
    rhs(1) = -3 * real(L);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
    Vec c = cod.solve(rhs);
    const real rel = (A * c - rhs).cwiseAbs().maxCoeff() / (3 * real(L));
    last_rel = rel;
    if (cod.rank() == rows && rel <= real(opt.tolerance) && std::isfinite(static_cast<double>(rel))) {
      std::vector<real> coef(c.data(), c.data() + n);
      return BaseFlow(T, L, m, std::move(bumps), std::move(coef));
    }
  }
  std::ostringstream os;
  os << "infeasible-system error: no basis up to " << opt.max_bumps << " bumps meets the constraints (residual "
     << static_cast<double>(last_rel) << ")";
  throw InfeasibleDesignError(os.str());
}

real t_moment(const BaseFlow& h, int k) {
  if (k < 0) throw InfeasibleDesignError("moment order must be nonnegative");
  return h.moment(k, 0);
}

real t_moment(const BaseFlow& h, int k, real a, real b) {
  if (k < 0) throw InfeasibleDesignError("moment order must be nonnegative");
  real s = 0;
  const auto& bumps = h.bumps();
  const auto& coef = h.coefficients();
  for (std::size_t i = 0; i < bumps.size(); ++i) {
    const real w = bumps[i].half_width, c = bumps[i].center;
    const real lo = (std::max(a, bumps[i].a()) - c) / w;
    const real hi = (std::min(b, bumps[i].b()) - c) / w;
    if (hi <= lo) continue;
    s += coef[i] * w * bump_quad([&](real u) { return std::pow(c + w * u, k); }, lo, hi);
  }
  return s;
}

double Cutoff::value(double t) const { return 1.0 - smooth_step((t - T_ / 3) / (T_ / 3)); }

double Cutoff::derivative(double t) const { return -smooth_step_derivative((t - T_ / 3) / (T_ / 3)) * 3.0 / T_; }

Cutoff design_cutoff(double T) {
  if (!(T > 0)) throw InfeasibleDesignError("design_cutoff needs T > 0");
  return Cutoff(T);
}

}  // namespace flushlab::baseflow
