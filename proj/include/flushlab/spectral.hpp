#pragma once

#include "flushlab/field.hpp"

namespace flushlab::field {

Spectrum forward(const Field2D& u);
Field2D inverse(const Spectrum& s, double time_tag = 0.0);

// 1D helpers on a single row (length nx real, nx/2+1 complex).
void forward_row(int nx, const double* in, cplx* out);
void inverse_row(int nx, const cplx* in, double* out);

// Multiply every mode by (i xi)^order. The Nyquist mode is dropped for odd orders.
Spectrum dx(const Spectrum& s, int order = 1);
Field2D dx(const Field2D& u, int order = 1);

// Phase shift by a: f(x) -> f(x - a).
Spectrum shift(const Spectrum& s, double a);

// Exact integral over [a, b] of a real trigonometric polynomial of period lx with n samples
// (n/2+1 coefficients, origin x0).
double integrate_trig(double lx, double x0, int n, const cplx* c, double a, double b);

// Exact integral over [a, b] of the trigonometric interpolant of one spectral row.
double integrate_row(const Grid& g, const cplx* row, double a, double b);

// Coefficients of the square of a row, computed on a 2x padded grid.
// Returns (nx + 1) complex coefficients on the padded wavenumber set of the same period.
std::vector<cplx> square_row(const Grid& g, const cplx* row);

}  // namespace flushlab::field
