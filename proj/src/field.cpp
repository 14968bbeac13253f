#include "flushlab/field.hpp"

#include <algorithm>
#include <cmath>

#include "flushlab/errors.hpp"

namespace flushlab::field {

Field2D::Field2D(const Grid& g, int ncomp, double time_tag) : grid_(g), time_(time_tag) {
  if (ncomp < 1 || ncomp > 2) throw ShapeError("Field2D holds 1 or 2 components");
  data_.assign(ncomp, std::vector<double>(g.size(), 0.0));
}

double Field2D::max_abs() const {
  double m = 0.0;
  for (const auto& c : data_)
    for (double v : c) m = std::max(m, std::abs(v));
  return m;
}

bool Field2D::all_finite() const {
  for (const auto& c : data_)
    for (double v : c)
      if (!std::isfinite(v)) return false;
  return true;
}

static void check_same(const Field2D& a, const Field2D& b) {
  if (!(a.grid() == b.grid()) || a.ncomp() != b.ncomp()) throw ShapeError("field shape mismatch");
}

Field2D& Field2D::operator+=(const Field2D& o) {
  check_same(*this, o);
  for (int c = 0; c < ncomp(); ++c)
    for (std::size_t n = 0; n < data_[c].size(); ++n) data_[c][n] += o.data_[c][n];
  divfree_ = divfree_ && o.divfree_;
  return *this;
}

Field2D& Field2D::operator-=(const Field2D& o) {
  check_same(*this, o);
  for (int c = 0; c < ncomp(); ++c)
    for (std::size_t n = 0; n < data_[c].size(); ++n) data_[c][n] -= o.data_[c][n];
  divfree_ = divfree_ && o.divfree_;
  return *this;
}

Field2D& Field2D::operator*=(double s) {
  for (auto& c : data_)
    for (double& v : c) v *= s;
  return *this;
}

Field2D operator+(Field2D a, const Field2D& b) { return a += b; }
Field2D operator-(Field2D a, const Field2D& b) { return a -= b; }
Field2D operator*(double s, Field2D a) { return a *= s; }

Spectrum make_spectrum(const Grid& g, int ncomp) {
  Spectrum s;
  s.grid = g;
  s.coef.assign(ncomp, std::vector<cplx>(g.spectral_size(), cplx(0.0, 0.0)));
  return s;
}

}  // namespace flushlab::field
