#pragma once

#include <complex>
#include <vector>

#include "flushlab/grid.hpp"

namespace flushlab::field {

using cplx = std::complex<double>;

// Real samples, component-major, row-major within a component: [c][j*nx + i].
class Field2D {
 public:
  Field2D() = default;
  Field2D(const Grid& g, int ncomp, double time_tag = 0.0);

  const Grid& grid() const { return grid_; }
  int ncomp() const { return static_cast<int>(data_.size()); }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }
  bool divergence_free() const { return divfree_; }
  void set_divergence_free(bool f) { divfree_ = f; }

  double& at(int c, int j, int i) { return data_[c][static_cast<std::size_t>(j) * grid_.nx + i]; }
  double at(int c, int j, int i) const { return data_[c][static_cast<std::size_t>(j) * grid_.nx + i]; }
  std::vector<double>& comp(int c) { return data_[c]; }
  const std::vector<double>& comp(int c) const { return data_[c]; }

  double max_abs() const;
  bool all_finite() const;

  Field2D& operator+=(const Field2D& o);
  Field2D& operator-=(const Field2D& o);
  Field2D& operator*=(double s);

 private:
  Grid grid_{};
  std::vector<std::vector<double>> data_;
  double time_ = 0.0;
  bool divfree_ = false;
};

Field2D operator+(Field2D a, const Field2D& b);
Field2D operator-(Field2D a, const Field2D& b);
Field2D operator*(double s, Field2D a);

// Fill a field from a function of (x, y) per component.
template <class F>
Field2D sample(const Grid& g, int ncomp, F&& f) {
  Field2D u(g, ncomp);
  for (int c = 0; c < ncomp; ++c)
    for (int j = 0; j <= g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) u.at(c, j, i) = f(c, g.x(i), g.y(j));
  return u;
}

// Tangential Fourier coefficients, [c][j*nk + k], normalised so that
// f(x) = sum_k c_k exp(i xi_k (x - x_min)) over the Hermitian-completed set.
struct Spectrum {
  Grid grid{};
  std::vector<std::vector<cplx>> coef;

  int ncomp() const { return static_cast<int>(coef.size()); }
  cplx& at(int c, int j, int k) { return coef[c][static_cast<std::size_t>(j) * grid.nk() + k]; }
  cplx at(int c, int j, int k) const { return coef[c][static_cast<std::size_t>(j) * grid.nk() + k]; }
};

Spectrum make_spectrum(const Grid& g, int ncomp);

}  // namespace flushlab::field
