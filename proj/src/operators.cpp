#include "flushlab/operators.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "detail/tridiag.hpp"
#include "flushlab/errors.hpp"
#include "flushlab/spectral.hpp"

namespace flushlab::field {

namespace ycol {

template <class T>
void d1(const T* f, T* out, int n, double dy, std::size_t s) {
  const double h2 = 0.5 / dy;
  out[0] = (-3.0 * f[0] + 4.0 * f[s] - f[2 * s]) * h2;
  for (int j = 1; j < n - 1; ++j) out[j * s] = (f[(j + 1) * s] - f[(j - 1) * s]) * h2;
  const std::size_t e = (n - 1) * s;
  out[e] = (3.0 * f[e] - 4.0 * f[e - s] + f[e - 2 * s]) * h2;
}

template <class T>
void d2(const T* f, T* out, int n, double dy, std::size_t s) {
  const double q = 1.0 / (dy * dy);
  out[0] = (2.0 * f[0] - 5.0 * f[s] + 4.0 * f[2 * s] - f[3 * s]) * q;
  for (int j = 1; j < n - 1; ++j) out[j * s] = (f[(j + 1) * s] - 2.0 * f[j * s] + f[(j - 1) * s]) * q;
  const std::size_t e = (n - 1) * s;
  out[e] = (2.0 * f[e] - 5.0 * f[e - s] + 4.0 * f[e - 2 * s] - f[e - 3 * s]) * q;
}

template <class T>
void dsbp(const T* f, T* out, int n, double dy, std::size_t s) {
  const double h2 = 0.5 / dy;
  out[0] = (f[s] - f[0]) / dy;
  for (int j = 1; j < n - 1; ++j) out[j * s] = (f[(j + 1) * s] - f[(j - 1) * s]) * h2;
  const std::size_t e = (n - 1) * s;
  out[e] = (f[e] - f[e - s]) / dy;
}

std::vector<double> weights(int n, double dy) {
  std::vector<double> w(n, dy);
  w[0] = w[n - 1] = 0.5 * dy;
  return w;
}

template void d1<double>(const double*, double*, int, double, std::size_t);
template void d1<cplx>(const cplx*, cplx*, int, double, std::size_t);
template void d2<double>(const double*, double*, int, double, std::size_t);
template void d2<cplx>(const cplx*, cplx*, int, double, std::size_t);
template void dsbp<double>(const double*, double*, int, double, std::size_t);
template void dsbp<cplx>(const cplx*, cplx*, int, double, std::size_t);

}  // namespace ycol

namespace {

template <class T, class Op>
void apply_columns(const std::vector<T>& in, std::vector<T>& out, int ncol, int n, double dy, Op op) {
  for (int i = 0; i < ncol; ++i) op(in.data() + i, out.data() + i, n, dy, static_cast<std::size_t>(ncol));
}

template <class T>
void dy_columns(const std::vector<T>& in, std::vector<T>& out, int ncol, int n, double dy, int order) {
  std::vector<T> cur = in;
  std::vector<T> tmp(in.size());
  int left = order;
  while (left >= 2) {
    apply_columns(cur, tmp, ncol, n, dy, ycol::d2<T>);
    std::swap(cur, tmp);
    left -= 2;
  }
  if (left == 1) {
    apply_columns(cur, tmp, ncol, n, dy, ycol::d1<T>);
    std::swap(cur, tmp);
  }
  out = std::move(cur);
}

// Per-wavenumber factorisations for the perp_grad normal equations on interior nodes.
class ModeSolvers {
 public:
  explicit ModeSolvers(const Grid& g) : g_(g) {
    const int n = g.nodes_y();
    const int m = n - 2;
    const double dy = g.dy();
    // Dsbp restricted to interior columns, trapezoid weights on rows.
    Eigen::SparseMatrix<double> D(n, m);
    std::vector<Eigen::Triplet<double>> trip;
    auto add = [&](int r, int col_node, double v) {
      if (col_node >= 1 && col_node <= n - 2) trip.emplace_back(r, col_node - 1, v);
    };
    add(0, 1, 1.0 / dy);
    add(0, 0, -1.0 / dy);
    for (int j = 1; j < n - 1; ++j) {
      add(j, j + 1, 0.5 / dy);
      add(j, j - 1, -0.5 / dy);
    }
    add(n - 1, n - 1, 1.0 / dy);
    add(n - 1, n - 2, -1.0 / dy);
    D.setFromTriplets(trip.begin(), trip.end());
    w_ = ycol::weights(n, dy);
    Eigen::SparseMatrix<double> H(n, n);
    for (int j = 0; j < n; ++j) H.insert(j, j) = w_[j];
    DtH_ = Eigen::SparseMatrix<double>(D.transpose() * H);
    Eigen::SparseMatrix<double> DtHD = DtH_ * D;
    solvers_.resize(g.nk());
    for (int k = 0; k < g.nk(); ++k) {
      Eigen::SparseMatrix<double> A = DtHD;
      const double xi2 = g.xi(k) * g.xi(k);
      for (int j = 0; j < m; ++j) A.coeffRef(j, j) += xi2 * w_[j + 1];
      solvers_[k] = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(A);
      if (solvers_[k]->info() != Eigen::Success) throw NumericError("singular-solve error in perp_grad normal equations");
    }
    // Centered Laplacian with Dirichlet walls, interior unknowns only.
    lap_.resize(g.nk());
    for (int k = 0; k < g.nk(); ++k) {
      const double xi2 = g.xi(k) * g.xi(k);
      std::vector<double> a(m, 1.0 / (dy * dy)), b(m, -2.0 / (dy * dy) - xi2), c(m, 1.0 / (dy * dy));
      lap_[k] = detail::Tridiag(a, b, c);
    }
  }

  // Least-squares psi (interior) for column data (v1, v2) of mode k.
  void normal_solve(int k, const cplx* v1, const cplx* v2, std::size_t stride, cplx* psi_out) const {
    const int n = g_.nodes_y();
    const int m = n - 2;
    const double xi = g_.xi(k);
    Eigen::VectorXcd a(n), rhs(m);
    for (int j = 0; j < n; ++j) a[j] = v1[j * stride];
    rhs = DtH_.cast<cplx>() * a;
    if (v2 != nullptr)
      for (int j = 0; j < m; ++j) rhs[j] += cplx(0.0, xi) * w_[j + 1] * v2[(j + 1) * stride];
    Eigen::VectorXd re = rhs.real(), im = rhs.imag();
    Eigen::VectorXd sr = solvers_[k]->solve(re);
    Eigen::VectorXd si = solvers_[k]->solve(im);
    psi_out[0] = 0.0;
    for (int j = 0; j < m; ++j) psi_out[(j + 1) * stride] = cplx(sr[j], si[j]);
    psi_out[(n - 1) * stride] = 0.0;
  }

  void laplace_solve(int k, cplx* col, std::size_t stride) const {
    const int n = g_.nodes_y();
    col[0] = 0.0;
    col[(n - 1) * stride] = 0.0;
    lap_[k].solve(col + stride, stride);
  }

 private:
  Grid g_;
  std::vector<double> w_;
  Eigen::SparseMatrix<double> DtH_;
  std::vector<std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>> solvers_;
  std::vector<detail::Tridiag> lap_;
};

std::shared_ptr<const ModeSolvers> mode_solvers(const Grid& g) {
  static std::mutex mu;
  static std::map<std::tuple<int, int, double>, std::shared_ptr<const ModeSolvers>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(g.nx, g.ny, g.lx());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto s = std::make_shared<const ModeSolvers>(g);
  cache[key] = s;
  return s;
}

void require_vector(const Field2D& u) {
  if (u.ncomp() != 2) throw ShapeError("operation requires a 2-component field");
}

void require_scalar(const Field2D& u) {
  if (u.ncomp() != 1) throw ShapeError("operation requires a scalar field");
}

}  // namespace

Spectrum dy(const Spectrum& s, int order) {
  Spectrum out = s;
  for (int c = 0; c < s.ncomp(); ++c) dy_columns(s.coef[c], out.coef[c], s.grid.nk(), s.grid.nodes_y(), s.grid.dy(), order);
  return out;
}

Field2D dy(const Field2D& u, int order) {
  Field2D out(u.grid(), u.ncomp(), u.time());
  for (int c = 0; c < u.ncomp(); ++c) dy_columns(u.comp(c), out.comp(c), u.grid().nx, u.grid().nodes_y(), u.grid().dy(), order);
  return out;
}

Field2D curl2d(const Field2D& u) {
  require_vector(u);
  const Grid& g = u.grid();
  Field2D w(g, 1, u.time());
  Spectrum s = forward(u);
  Spectrum d = dx(s, 1);
  Field2D dxu2(g, 1);
  {
    Spectrum one = make_spectrum(g, 1);
    one.coef[0] = d.coef[1];
    dxu2 = inverse(one);
  }
  std::vector<double> dyu1(g.size());
  apply_columns(u.comp(0), dyu1, g.nx, g.nodes_y(), g.dy(), ycol::d1<double>);
  for (std::size_t n = 0; n < g.size(); ++n) w.comp(0)[n] = dxu2.comp(0)[n] - dyu1[n];
  return w;
}

Field2D divergence(const Field2D& u) {
  require_vector(u);
  const Grid& g = u.grid();
  Spectrum s = forward(u);
  Spectrum one = make_spectrum(g, 1);
  Spectrum d = dx(s, 1);
  std::vector<cplx> dv(g.spectral_size());
  apply_columns(s.coef[1], dv, g.nk(), g.nodes_y(), g.dy(), ycol::dsbp<cplx>);
  for (std::size_t n = 0; n < g.spectral_size(); ++n) one.coef[0][n] = d.coef[0][n] + dv[n];
  return inverse(one, u.time());
}

double divergence_max(const Field2D& u, bool interior_only) {
  Field2D d = divergence(u);
  const Grid& g = u.grid();
  double m = 0.0;
  const int j0 = interior_only ? 1 : 0;
  const int j1 = interior_only ? g.ny - 1 : g.ny;
  for (int j = j0; j <= j1; ++j)
    for (int i = 0; i < g.nx; ++i) m = std::max(m, std::abs(d.at(0, j, i)));
  return m;
}

Spectrum perp_grad(const Spectrum& psi) {
  const Grid& g = psi.grid;
  Spectrum u = make_spectrum(g, 2);
  apply_columns(psi.coef[0], u.coef[0], g.nk(), g.nodes_y(), g.dy(), ycol::dsbp<cplx>);
  Spectrum d = dx(psi, 1);
  for (std::size_t n = 0; n < g.spectral_size(); ++n) u.coef[1][n] = -d.coef[0][n];
  return u;
}

Field2D perp_grad(const Field2D& psi) {
  require_scalar(psi);
  Field2D u = inverse(perp_grad(forward(psi)), psi.time());
  return u;
}

Field2D grad(const Field2D& phi) {
  require_scalar(phi);
  const Grid& g = phi.grid();
  Spectrum s = forward(phi);
  Spectrum u = make_spectrum(g, 2);
  u.coef[0] = dx(s, 1).coef[0];
  apply_columns(s.coef[0], u.coef[1], g.nk(), g.nodes_y(), g.dy(), ycol::dsbp<cplx>);
  return inverse(u, phi.time());
}

Field2D solve_stream_function(const Field2D& omega) {
  require_scalar(omega);
  const Grid& g = omega.grid();
  auto ms = mode_solvers(g);
  Spectrum s = forward(omega);
  const int nk = g.nk();
  for (auto& v : s.coef[0]) v = -v;
  for (int k = 0; k < nk; ++k) ms->laplace_solve(k, s.coef[0].data() + k, nk);
  for (int j = 0; j < g.nodes_y(); ++j) s.at(0, j, nk - 1) = 0.0;
  return inverse(s, omega.time());
}

Field2D solve_div_curl(const Field2D& omega) {
  Field2D u = perp_grad(solve_stream_function(omega));
  u.set_divergence_free(true);
  return u;
}

Field2D stream_function_of(const Field2D& u) {
  require_vector(u);
  const Grid& g = u.grid();
  auto ms = mode_solvers(g);
  Spectrum s = forward(u);
  Spectrum psi = make_spectrum(g, 1);
  const int nk = g.nk();
  for (int k = 0; k < nk - 1; ++k)
    ms->normal_solve(k, s.coef[0].data() + k, k == 0 ? nullptr : s.coef[1].data() + k, nk, psi.coef[0].data() + k);
  return inverse(psi, u.time());
}

Field2D leray_project(const Field2D& v) {
  require_vector(v);
  const Grid& g = v.grid();
  auto ms = mode_solvers(g);
  Spectrum s = forward(v);
  Spectrum psi = make_spectrum(g, 1);
  const int nk = g.nk();
  for (int k = 1; k < nk - 1; ++k)
    ms->normal_solve(k, s.coef[0].data() + k, s.coef[1].data() + k, nk, psi.coef[0].data() + k);
  Spectrum out = perp_grad(psi);
  // Mean mode: any wall-normal-free profile is admissible, the wall-normal part must vanish.
  for (int j = 0; j < g.nodes_y(); ++j) {
    out.at(0, j, 0) = s.at(0, j, 0);
    out.at(1, j, 0) = 0.0;
  }
  Field2D u = inverse(out, v.time());
  u.set_divergence_free(true);
  return u;
}

std::vector<double> column_stream(const Grid& g, const std::vector<double>& u1) {
  if (static_cast<int>(u1.size()) != g.nodes_y()) throw ShapeError("column length mismatch");
  auto ms = mode_solvers(g);
  std::vector<cplx> in(u1.begin(), u1.end()), out(u1.size());
  ms->normal_solve(0, in.data(), nullptr, 1, out.data());
  std::vector<double> psi(u1.size());
  for (std::size_t j = 0; j < psi.size(); ++j) psi[j] = out[j].real();
  return psi;
}

double zero_mean(const Field2D& u, double a, double b) {
  const Grid& g = u.grid();
  std::vector<cplx> row(g.nk());
  const auto w = ycol::weights(g.nodes_y(), g.dy());
  double sum = 0.0;
  for (int j = 0; j <= g.ny; ++j) {
    forward_row(g.nx, u.comp(0).data() + static_cast<std::size_t>(j) * g.nx, row.data());
    sum += w[j] * integrate_row(g, row.data(), a, b);
  }
  return sum;
}

double zero_mean(const Field2D& u) { return zero_mean(u, 0.0, u.grid().L); }

}  // namespace flushlab::field
