#include "flushlab/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace flushlab::field {

namespace {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuf = std::unique_ptr<double, FftwDeleter>;
using CplxBuf = std::unique_ptr<fftw_complex, FftwDeleter>;

RealBuf alloc_real(std::size_t n) { return RealBuf(fftw_alloc_real(n)); }
CplxBuf alloc_cplx(std::size_t n) { return CplxBuf(fftw_alloc_complex(n)); }

// Plans for `rows` contiguous transforms of length nx; executed with the new-array interface.
struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache c;
    return c;
  }

  PlanPair get(int nx, int rows) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(nx, rows);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    const int nk = nx / 2 + 1;
    auto rin = alloc_real(static_cast<std::size_t>(nx) * rows);
    auto cout = alloc_cplx(static_cast<std::size_t>(nk) * rows);
    int n[1] = {nx};
    PlanPair p;
    p.r2c = fftw_plan_many_dft_r2c(1, n, rows, rin.get(), nullptr, 1, nx, cout.get(), nullptr, 1, nk,
                                   FFTW_ESTIMATE);
    p.c2r = fftw_plan_many_dft_c2r(1, n, rows, cout.get(), nullptr, 1, nk, rin.get(), nullptr, 1, nx,
                                   FFTW_ESTIMATE);
    plans_[key] = p;
    return p;
  }

 private:
  std::mutex mu_;
  std::map<std::tuple<int, int>, PlanPair> plans_;
};

void forward_rows(int nx, int rows, const double* in, cplx* out) {
  const int nk = nx / 2 + 1;
  const std::size_t nr = static_cast<std::size_t>(nx) * rows;
  const std::size_t nc = static_cast<std::size_t>(nk) * rows;
  PlanPair p = PlanCache::instance().get(nx, rows);
  auto rin = alloc_real(nr);
  auto cout = alloc_cplx(nc);
  std::memcpy(rin.get(), in, nr * sizeof(double));
  fftw_execute_dft_r2c(p.r2c, rin.get(), cout.get());
  const double scale = 1.0 / nx;
  for (std::size_t n = 0; n < nc; ++n) out[n] = cplx(cout.get()[n][0] * scale, cout.get()[n][1] * scale);
}

void inverse_rows(int nx, int rows, const cplx* in, double* out) {
  const int nk = nx / 2 + 1;
  const std::size_t nr = static_cast<std::size_t>(nx) * rows;
  const std::size_t nc = static_cast<std::size_t>(nk) * rows;
  PlanPair p = PlanCache::instance().get(nx, rows);
  auto rout = alloc_real(nr);
  auto cin = alloc_cplx(nc);
  for (std::size_t n = 0; n < nc; ++n) {
    cin.get()[n][0] = in[n].real();
    cin.get()[n][1] = in[n].imag();
  }
  // The imaginary part of the mean and Nyquist modes is not representable for real data.
  for (int r = 0; r < rows; ++r) {
    cin.get()[static_cast<std::size_t>(r) * nk][1] = 0.0;
    cin.get()[static_cast<std::size_t>(r) * nk + nk - 1][1] = 0.0;
  }
  fftw_execute_dft_c2r(p.c2r, cin.get(), rout.get());
  std::memcpy(out, rout.get(), nr * sizeof(double));
}

}  // namespace

void forward_row(int nx, const double* in, cplx* out) { forward_rows(nx, 1, in, out); }
void inverse_row(int nx, const cplx* in, double* out) { inverse_rows(nx, 1, in, out); }

Spectrum forward(const Field2D& u) {
  const Grid& g = u.grid();
  Spectrum s = make_spectrum(g, u.ncomp());
  for (int c = 0; c < u.ncomp(); ++c) forward_rows(g.nx, g.nodes_y(), u.comp(c).data(), s.coef[c].data());
  return s;
}

Field2D inverse(const Spectrum& s, double time_tag) {
  const Grid& g = s.grid;
  Field2D u(g, s.ncomp(), time_tag);
  for (int c = 0; c < s.ncomp(); ++c) inverse_rows(g.nx, g.nodes_y(), s.coef[c].data(), u.comp(c).data());
  return u;
}

Spectrum dx(const Spectrum& s, int order) {
  Spectrum out = s;
  const Grid& g = s.grid;
  const int nk = g.nk();
  std::vector<cplx> mult(nk);
  for (int k = 0; k < nk; ++k) mult[k] = std::pow(cplx(0.0, g.xi(k)), order);
  if (order % 2 == 1) mult[nk - 1] = 0.0;
  for (auto& comp : out.coef)
    for (int j = 0; j < g.nodes_y(); ++j)
      for (int k = 0; k < nk; ++k) comp[static_cast<std::size_t>(j) * nk + k] *= mult[k];
  return out;
}

Field2D dx(const Field2D& u, int order) { return inverse(dx(forward(u), order), u.time()); }

Spectrum shift(const Spectrum& s, double a) {
  Spectrum out = s;
  const Grid& g = s.grid;
  const int nk = g.nk();
  std::vector<cplx> ph(nk);
  for (int k = 0; k < nk; ++k) ph[k] = std::polar(1.0, -g.xi(k) * a);
  // A real Nyquist mode cannot carry a phase; keep its cosine projection.
  ph[nk - 1] = cplx(std::cos(g.xi(nk - 1) * a), 0.0);
  for (auto& comp : out.coef)
    for (int j = 0; j < g.nodes_y(); ++j)
      for (int k = 0; k < nk; ++k) comp[static_cast<std::size_t>(j) * nk + k] *= ph[k];
  return out;
}

double integrate_trig(double lx, double x0, int n, const cplx* c, double a, double b) {
  const int nk = n / 2 + 1;
  const double dxi = 2.0 * std::numbers::pi / lx;
  double sum = c[0].real() * (b - a);
  for (int k = 1; k < nk; ++k) {
    const double xi = k * dxi;
    const cplx ea = std::polar(1.0, xi * (a - x0));
    const cplx eb = std::polar(1.0, xi * (b - x0));
    const cplx prim = (eb - ea) / cplx(0.0, xi);
    if (k == nk - 1)
      sum += c[k].real() * prim.real();
    else
      sum += 2.0 * (c[k] * prim).real();
  }
  return sum;
}

double integrate_row(const Grid& g, const cplx* row, double a, double b) {
  return integrate_trig(g.lx(), g.x_min, g.nx, row, a, b);
}

std::vector<cplx> square_row(const Grid& g, const cplx* row) {
  const int n2 = 2 * g.nx;
  const int nk = g.nk();
  std::vector<cplx> padded(n2 / 2 + 1, cplx(0.0, 0.0));
  for (int k = 0; k < nk; ++k) padded[k] = row[k];
  // Split the Nyquist coefficient symmetrically so the padded interpolant stays real.
  padded[nk - 1] = 0.5 * row[nk - 1].real();
  std::vector<double> phys(n2);
  // inverse_row is normalised for coefficient input: f_i = sum c_k e^{...}
  inverse_row(n2, padded.data(), phys.data());
  for (double& v : phys) v *= v;
  std::vector<cplx> sq(n2 / 2 + 1);
  forward_row(n2, phys.data(), sq.data());
  return sq;
}

}  // namespace flushlab::field
