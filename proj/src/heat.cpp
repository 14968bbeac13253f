#include "flushlab/heat.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "flushlab/errors.hpp"

namespace flushlab::heat {

namespace {

using boost::math::quadrature::gauss;
using boost::math::quadrature::gauss_kronrod;

constexpr real kInf = std::numeric_limits<real>::infinity();
constexpr real kPi = std::numbers::pi_v<real>;
constexpr real kUCap = 9;  // erfc(9) ~ 4e-37
constexpr int kGaussOrder = 8;

// Recursive bisection on the 7/15-point Kronrod rule with an absolute error target.
template <class F>
real adapt(F& f, real a, real b, real atol, int depth, real& err_out) {
  real err = 0;
  const real r = gauss_kronrod<real, 31>::integrate(f, a, b, 0, 0, &err);
  if (err <= atol || depth == 0) {
    err_out += err;
    return r;
  }
  const real m = (a + b) / 2;
  const real child = atol * 0.7071067811865475244L;
  return adapt(f, a, m, child, depth - 1, err_out) + adapt(f, m, b, child, depth - 1, err_out);
}

template <class F>
real gk(F&& f, real a, real b, real atol, real rtol) {
  if (!(b > a)) return 0;
  if (b - a <= 1e3L * std::numeric_limits<real>::epsilon() * std::max(std::abs(a), std::abs(b)))
    return (b - a) * f((a + b) / 2);
  real err = 0, l1 = 0;
  std::size_t levels = 0;
  thread_local boost::math::quadrature::tanh_sinh<real> ts(12);
  const real r = ts.integrate(f, a, b, rtol, &err, &l1, &levels);
  if (!std::isfinite(static_cast<double>(r)) || err > 100 * atol + 1e-8L * l1) {
    std::ostringstream os;
    os << "kernel quadrature did not converge on [" << static_cast<double>(a) << ", " << static_cast<double>(b)
       << "], error estimate " << static_cast<double>(err);
    throw QuadratureError(os.str());
  }
  return r;
}

const std::vector<double>& zeta_edges() {
  static const std::vector<double> e = [] {
    return std::vector<double>{0, 0.002, 0.008, 0.03, 0.1, 0.25, 0.5, 1, 1.5, 2, 3, 4, 5, 6, 8, 10, 12.5, 15, 20, 25, 30, 40};
  }();
  return e;
}

// Gauss-Legendre nodes/weights on [-1, 1], ascending.
const std::pair<std::vector<real>, std::vector<real>>& gl_rule() {
  static const auto rule = [] {
    std::vector<real> x, w;
    const auto& a = gauss<real, kGaussOrder>::abscissa();
    const auto& ww = gauss<real, kGaussOrder>::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0) {
        x.push_back(0);
        w.push_back(ww[i]);
        continue;
      }
      x.push_back(-a[i]);
      w.push_back(ww[i]);
      x.push_back(a[i]);
      w.push_back(ww[i]);
    }
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<real> xs, ws;
    for (std::size_t i : idx) {
      xs.push_back(x[i]);
      ws.push_back(w[i]);
    }
    return std::make_pair(xs, ws);
  }();
  return rule;
}

real time_scale(real t, real horizon) { return std::sqrt(std::max(t, 1e-4L * horizon)); }

}  // namespace

BoundaryData from_base_flow(const baseflow::BaseFlow& h) {
  BoundaryData d;
  d.value = [h](real t) { return h.value(t); };
  d.derivative = [h](real t) { return h.derivative(t); };
  d.support = h.support();
  for (const auto& b : h.bumps()) {
    d.breakpoints.push_back(b.a());
    d.breakpoints.push_back(b.b());
  }
  std::sort(d.breakpoints.begin(), d.breakpoints.end());
  d.moment = [h](int n, real s0) { return (n % 2 ? -1.0L : 1.0L) * h.moment(n, s0); };
  d.horizon = h.T();
  d.max_abs = h.max_abs();
  return d;
}

BoundaryData step_data(real amplitude, real horizon) {
  BoundaryData d;
  d.value = [amplitude](real t) { return t > 0 ? amplitude : 0.0L; };
  d.derivative = [](real) { return 0.0L; };
  d.support = {{0, kInf}};
  d.jumps = {{0, amplitude}};
  d.horizon = horizon;
  d.max_abs = std::abs(amplitude);
  return d;
}

BoundaryData from_functions(std::function<real(real)> value, std::function<real(real)> derivative,
                            std::vector<std::pair<real, real>> support, real horizon,
                            std::vector<std::pair<real, real>> jumps) {
  BoundaryData d;
  d.value = std::move(value);
  d.derivative = std::move(derivative);
  d.support = std::move(support);
  d.jumps = std::move(jumps);
  d.horizon = horizon;
  real mx = 0;
  for (const auto& [a, b] : d.support) {
    const real hi = std::isfinite(static_cast<double>(b)) ? b : a + 10 * horizon;
    for (int i = 0; i <= 2000; ++i) mx = std::max(mx, std::abs(d.value(a + (hi - a) * i / 2000)));
  }
  d.max_abs = mx;
  return d;
}

HalfLineProfile::HalfLineProfile(BoundaryData data, ProfileGrid grid) : data_(std::move(data)), grid_(grid) {
  if (!data_.value || !data_.derivative) throw ConfigError("boundary data needs value and derivative");
  if (grid_.support_points < 4 || grid_.per_decade < 2 || grid_.early_points < 1 || grid_.z_refine < 1)
    throw ConfigError("profile grid too coarse");
  const real H = data_.horizon;

  if (data_.compact()) {
    const real a = data_.support.front().first, b = data_.support.back().second;
    center_ = (a + b) / 2;
    series_from_ = b + std::max<real>(1, static_cast<real>(grid_.series_factor) - 1) * (b - a);
    const real r = (b - a) / 2, q = r / (series_from_ - center_);
    int nmax = 80;
    if (q > 0 && q < 1) nmax = std::min(80, static_cast<int>(std::ceil(-60.0 / std::log(static_cast<double>(q)))) + 4);
    real fact = 1;
    for (int n = 0; n <= nmax; ++n) {
      if (n > 0) fact *= n;
      real mu;
      if (data_.moment) {
        mu = data_.moment(n, center_);
      } else {
        mu = 0;
        for (const auto& [s1, s2] : data_.support)
          mu += gk([&](real s) { return data_.value(s) * std::pow(center_ - s, n); }, s1, s2,
                   1e-16L * data_.max_abs * std::pow(r, n) * (s2 - s1), 1e-16L);
      }
      scaled_moments_.push_back(mu / fact);
    }
  }

  // Time grid.
  const real t_early = 0.05L * H;
  const real t_mid = data_.compact() ? std::max(series_from_, t_early * 2) : grid_.series_factor * H;
  const real t_end = static_cast<real>(grid_.t_max_factor) * H;
  times_.push_back(0);
  for (int i = 0; i < grid_.early_points; ++i)
    times_.push_back(t_early * std::pow(10.0L, -2.0L * (grid_.early_points - 1 - i) / std::max(1, grid_.early_points - 1)));
  for (int i = 1; i <= grid_.support_points; ++i) times_.push_back(t_early + (t_mid - t_early) * i / grid_.support_points);
  if (t_end > t_mid) {
    const int n = std::max(2, static_cast<int>(std::ceil(grid_.per_decade * std::log10(static_cast<double>(t_end / t_mid)))));
    for (int i = 1; i <= n; ++i) times_.push_back(t_mid * std::pow(t_end / t_mid, static_cast<real>(i) / n));
  }
  slices_.reserve(times_.size());
  if (grid_.tabulate)
    for (real t : times_) slices_.push_back(slice(t));
}

bool HalfLineProfile::uses_series(real t) const { return t >= series_from_; }

real HalfLineProfile::value(real t, real z) const {
  if (t <= 0) return 0;
  if (z < 0) throw ShapeError("negative z");
  if (uses_series(t)) return series_eval(t, z, false);
  return quad_value(t, z);
}

real HalfLineProfile::dz(real t, real z) const {
  if (t <= 0) return 0;
  if (z < 0) throw ShapeError("negative z");
  if (uses_series(t)) return series_eval(t, z, true);
  return quad_dz(t, z);
}

std::vector<real> HalfLineProfile::breaks(real s1, real s2) const {
  std::vector<real> b{s1};
  for (real p : data_.breakpoints)
    if (p > s1 && p < s2) b.push_back(p);
  b.push_back(s2);
  return b;
}

// V = (2/sqrt(pi)) int h(t - z^2/(4u^2)) exp(-u^2) du, u = z/(2 sqrt(t - s)).
real HalfLineProfile::quad_value(real t, real z) const {
  if (z == 0) return data_.value(t);
  const real rtol = static_cast<real>(grid_.tolerance), atol = rtol * data_.max_abs;
  real sum = 0;
  auto f = [&](real u) { return data_.value(t - (z / (2 * u)) * (z / (2 * u))) * std::exp(-u * u); };
  auto u_of = [&](real s) { return s < t ? std::min(kUCap, z / (2 * std::sqrt(t - s))) : kUCap; };
  for (const auto& [s1, s2] : data_.support) {
    if (s1 >= t) break;
    const auto sb = breaks(s1, std::min(s2, t));
    for (std::size_t p = 0; p + 1 < sb.size(); ++p) {
      real lo = u_of(sb[p]);
      const real ub = u_of(sb[p + 1]);
      while (lo < ub) {
        const real hi = std::min(ub, lo < 0.25L ? 4 * lo : 3 * lo);
        sum += gk(f, lo, hi, atol, rtol);
        lo = hi;
      }
    }
  }
  return 2 / std::sqrt(kPi) * sum;
}

// dzV = -(2/sqrt(pi)) int h'(t - w^2) exp(-z^2/(4w^2)) dw - sum_j J_j exp(-z^2/(4(t-s_j))) / sqrt(pi (t-s_j)).
real HalfLineProfile::quad_dz(real t, real z) const {
  const real rtol = static_cast<real>(grid_.tolerance), atol = rtol * data_.max_abs / std::sqrt(t);
  real sum = 0;
  auto f = [&](real w) {
    if (w == 0) return 0.0L;
    return data_.derivative(t - w * w) * (z == 0 ? 1.0L : std::exp(-(z / (2 * w)) * (z / (2 * w))));
  };
  for (const auto& [s1, s2] : data_.support) {
    if (s1 >= t) break;
    auto sb = breaks(s1, std::min(s2, t));
    std::vector<real> wb;
    for (real s : sb) wb.push_back(std::sqrt(t - s));
    // The Gaussian factor switches on near w ~ z/2.
    for (real br = z / 8; z > 0 && br < wb.front(); br *= 4)
      if (br > wb.back()) wb.push_back(br);
    std::sort(wb.begin(), wb.end());
    for (std::size_t p = 0; p + 1 < wb.size(); ++p) sum += gk(f, wb[p], wb[p + 1], atol, rtol);
  }
  real out = -2 / std::sqrt(kPi) * sum;
  for (const auto& [s, j] : data_.jumps) {
    if (s >= t) continue;
    const real tau = t - s;
    out -= j * std::exp(-z * z / (4 * tau)) / std::sqrt(kPi * tau);
  }
  return out;
}

// Expansion of the kernel about the support centre: with G the heat kernel and
// d^k G/dz^k = (-1)^k Q_k G, V = 2 G sum mu_n/n! Q_{2n+1}, dzV = -2 G sum mu_n/n! Q_{2n+2}.
real HalfLineProfile::series_eval(real t, real z, bool derivative) const {
  const real tau = t - center_;
  const real x = z / (2 * tau), inv = 1 / (2 * tau);
  const real G = std::exp(-z * z / (4 * tau)) / std::sqrt(4 * kPi * tau);
  real qm = 1, q = x;  // Q_{k-1}, Q_k with k = 1
  real sum = 0;
  int k = 1;
  const int target_offset = derivative ? 2 : 1;
  for (std::size_t n = 0; n < scaled_moments_.size(); ++n) {
    const int want = 2 * static_cast<int>(n) + target_offset;
    while (k < want) {
      const real qn = x * q - k * inv * qm;
      qm = q;
      q = qn;
      ++k;
    }
    sum += scaled_moments_[n] * q;
  }
  return (derivative ? -2 : 2) * G * sum;
}

ZSlice HalfLineProfile::slice(real t, real z_cap) const {
  const real scale = time_scale(t, data_.horizon);
  real zmax = std::min<real>(static_cast<real>(grid_.zeta_max) * scale, static_cast<real>(grid_.z_max));
  const bool capped = z_cap < zmax;
  zmax = std::min(zmax, z_cap);
  if (!capped && !slices_.empty()) {
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    const auto idx = static_cast<std::size_t>(it - times_.begin());
    if (it != times_.end() && *it == t && idx < slices_.size()) return slices_[idx];
  }
  ZSlice s;
  s.t = t;
  const auto& [gx, gw] = gl_rule();
  std::vector<real> edges;
  for (double e : zeta_edges()) {
    const real z = e * scale;
    if (z >= zmax) break;
    edges.push_back(z);
  }
  edges.push_back(zmax);
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    for (int r = 0; r < grid_.z_refine; ++r) {
      const real a = edges[p] + (edges[p + 1] - edges[p]) * r / grid_.z_refine;
      const real b = edges[p] + (edges[p + 1] - edges[p]) * (r + 1) / grid_.z_refine;
      for (std::size_t i = 0; i < gx.size(); ++i) {
        s.z.push_back((a + b) / 2 + (b - a) / 2 * gx[i]);
        s.w.push_back((b - a) / 2 * gw[i]);
      }
    }
  }
  s.V.resize(s.z.size());
  s.dzV.resize(s.z.size());
  for (std::size_t i = 0; i < s.z.size(); ++i) {
    s.V[i] = value(t, s.z[i]);
    s.dzV[i] = dz(t, s.z[i]);
  }
  return s;
}

HalfLineProfile solve_boundary_layer(const BoundaryData& data, const ProfileGrid& grid) {
  return HalfLineProfile(data, grid);
}

HalfLineProfile solve_boundary_layer(const baseflow::BaseFlow& h, const ProfileGrid& grid) {
  return HalfLineProfile(from_base_flow(h), grid);
}

double l2_norm(const HalfLineProfile& V, double t) {
  const ZSlice s = V.slice(t);
  real acc = 0;
  for (std::size_t i = 0; i < s.z.size(); ++i) acc += s.w[i] * s.V[i] * s.V[i];
  return static_cast<double>(std::sqrt(acc));
}

namespace {

double grad_norm_of(const HalfLineProfile& V, const ZSlice& s) {
  std::size_t best = 0;
  real g = 0;
  for (std::size_t i = 0; i < s.z.size(); ++i) {
    const real v = std::abs(s.z[i] * s.dzV[i]);
    if (v > g) {
      g = v;
      best = i;
    }
  }
  if (g == 0) return 0;
  const real lo = best == 0 ? 0.0L : s.z[best - 1];
  const real hi = best + 1 < s.z.size() ? s.z[best + 1] : s.z[best];
  auto neg = [&](real z) { return -std::abs(z * V.dz(s.t, z)); };
  const auto r = boost::math::tools::brent_find_minima(neg, lo, hi, 24);
  return static_cast<double>(std::max(g, -r.second));
}

}  // namespace

double weighted_grad_norm(const HalfLineProfile& V, double t) { return grad_norm_of(V, V.slice(t)); }

std::vector<std::pair<double, double>> loss_integrand(const HalfLineProfile& V) {
  std::vector<std::pair<double, double>> out;
  out.reserve(V.times().size());
  for (std::size_t i = 0; i < V.times().size(); ++i) {
    const real t = V.times()[i];
    out.emplace_back(static_cast<double>(t), grad_norm_of(V, i < V.slices().size() ? V.slices()[i] : V.slice(t)));
  }
  return out;
}

namespace {

// Slope and sample count of log y against log x over positive samples with x in [a, b].
std::pair<double, int> loglog_slope(const std::vector<std::pair<double, double>>& s, double a, double b) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& [x, y] : s) {
    if (x < a * (1 - 1e-12) || x > b * (1 + 1e-12) || !(y > 0) || !(x > 0)) continue;
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return {0.0, n};
  const double den = n * sxx - sx * sx;
  if (den <= 0) return {0.0, n};
  return {(n * sxy - sx * sy) / den, n};
}

}  // namespace

RadiusLoss total_radius_loss(const HalfLineProfile& V, double warn_margin) {
  const auto ell = loss_integrand(V);
  RadiusLoss r;
  for (std::size_t i = 1; i < ell.size(); ++i)
    r.solved += 0.5 * (ell[i].second + ell[i - 1].second) * (ell[i].first - ell[i - 1].first);
  const double t_end = ell.back().first, l_end = ell.back().second;
  if (l_end == 0) {
    r.value = r.solved;
    return r;
  }
  const auto [p, n] = loglog_slope(ell, t_end / 10, t_end);
  r.exponent = p;
  if (n < 3 || p >= -1 - warn_margin) {
    r.divergent = true;
    r.tail = std::numeric_limits<double>::infinity();
    r.value = r.tail;
    r.tail_fraction = 1;
    std::ostringstream os;
    os << "radius-loss integrand decays like t^" << p << " over the last decade; the time integral does not converge";
    r.warning = os.str();
    return r;
  }
  r.tail = l_end * t_end / (-p - 1);
  r.value = r.solved + r.tail;
  r.tail_fraction = r.tail / r.value;
  return r;
}

double z_moment(const HalfLineProfile& V, double t, int k) {
  if (k < 0) throw ShapeError("moment order must be nonnegative");
  if (t <= 0) return 0;
  const ZSlice s = V.slice(t);
  real acc = 0;
  for (std::size_t i = 0; i < s.z.size(); ++i) acc += s.w[i] * std::pow(s.z[i], k) * s.V[i];
  return static_cast<double>(acc);
}

double fit_decay_exponent(const std::vector<std::pair<double, double>>& series, std::pair<double, double> window) {
  const auto [t1, t2] = window;
  if (!(t1 > 0) || !(t2 >= 10 * t1 * (1 - 1e-12))) {
    std::ostringstream os;
    os << "decay window [" << t1 << ", " << t2 << "] must be positive and at least one decade wide";
    throw WindowError(os.str());
  }
  const auto [p, n] = loglog_slope(series, t1, t2);
  if (n < 3) throw WindowError("fewer than three positive samples inside the decay window");
  return p;
}

std::vector<std::pair<double, double>> decay_series(const HalfLineProfile& V, double t1, double t2, int n) {
  std::vector<std::pair<double, double>> out;
  for (int i = 0; i < n; ++i) {
    const double t = t1 * std::pow(t2 / t1, static_cast<double>(i) / std::max(1, n - 1));
    out.emplace_back(t, l2_norm(V, t));
  }
  return out;
}

double rescaled_trace_norm(const HalfLineProfile& V, double t, double eps) {
  if (!(eps > 0) || eps > 1) throw ConfigError("eps must lie in (0, 1]");
  if (t <= 0) return 0;
  const ZSlice s = V.slice(t, 2 / std::sqrt(static_cast<real>(eps)));
  real acc = 0;
  for (std::size_t i = 0; i < s.z.size(); ++i) acc += s.w[i] * s.V[i] * s.V[i];
  return std::pow(eps, 0.25) * static_cast<double>(std::sqrt(acc));
}

}  // namespace flushlab::heat
