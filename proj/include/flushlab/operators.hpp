#pragma once

#include <vector>

#include "flushlab/field.hpp"

namespace flushlab::field {

// Wall-normal difference operators on one column of n = ny+1 samples with stride.
namespace ycol {
// Second order everywhere: centered inside, one-sided three-point at the walls.
template <class T>
void d1(const T* f, T* out, int n, double dy, std::size_t stride = 1);
// Second order everywhere: centered inside, one-sided four-point at the walls.
template <class T>
void d2(const T* f, T* out, int n, double dy, std::size_t stride = 1);
// Summation-by-parts first derivative: centered inside, first order at the walls.
template <class T>
void dsbp(const T* f, T* out, int n, double dy, std::size_t stride = 1);
// Trapezoid weights paired with dsbp.
std::vector<double> weights(int n, double dy);
}  // namespace ycol

// d^order/dy^order of every component (repeated second-order d1; order 2 uses d2).
Field2D dy(const Field2D& u, int order = 1);
Spectrum dy(const Spectrum& s, int order = 1);

// omega = d_x u2 - d_y u1.
Field2D curl2d(const Field2D& u);

// Discrete divergence d_x u1 + Dsbp u2 at every node.
Field2D divergence(const Field2D& u);
// Max |div u| over interior nodes, relative to max |grad u| scale if requested.
double divergence_max(const Field2D& u, bool interior_only = true);

// u = (Dsbp psi, -d_x psi). Walls of psi are taken as given.
Field2D perp_grad(const Field2D& psi);
Spectrum perp_grad(const Spectrum& psi);
// Discrete gradient (d_x phi, Dsbp phi), the null space of leray_project.
Field2D grad(const Field2D& phi);

// Stream function psi with psi = 0 at walls, Laplace(psi) = -omega; u = perp_grad(psi).
Field2D solve_stream_function(const Field2D& omega);
Field2D solve_div_curl(const Field2D& omega);

// Orthogonal projection (trapezoid-weighted) onto discrete divergence-free wall-tangent fields.
Field2D leray_project(const Field2D& v);

// Least-squares inverse of perp_grad for a field in its range (psi = 0 at walls).
Field2D stream_function_of(const Field2D& u);

// Least-squares psi on one column with Dsbp psi ~ u1 and psi = 0 at both walls.
std::vector<double> column_stream(const Grid& g, const std::vector<double>& u1_column);

// Integral of u1 over [a, b] x [-1, 1].
double zero_mean(const Field2D& u, double a, double b);
double zero_mean(const Field2D& u);  // over the physical domain (0, L)

}  // namespace flushlab::field
