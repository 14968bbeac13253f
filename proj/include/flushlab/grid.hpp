#pragma once

#include <cstddef>

namespace flushlab::field {

// Periodic in x over [x_min, x_max), uniform nodes y_j = -1 + j*dy, j = 0..ny.
struct Grid {
  int nx = 0;
  int ny = 0;
  double x_min = 0.0;
  double x_max = 0.0;
  double L = 1.0;

  double lx() const { return x_max - x_min; }
  double dx() const { return lx() / nx; }
  double dy() const { return 2.0 / ny; }
  int nk() const { return nx / 2 + 1; }
  int nodes_y() const { return ny + 1; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * (ny + 1); }
  std::size_t spectral_size() const { return static_cast<std::size_t>(nk()) * (ny + 1); }
  double x(int i) const { return x_min + i * dx(); }
  double y(int j) const { return -1.0 + j * dy(); }
  double xi(int k) const;
  double dxi() const;

  bool operator==(const Grid& o) const {
    return nx == o.nx && ny == o.ny && x_min == o.x_min && x_max == o.x_max && L == o.L;
  }
};

Grid make_grid(int nx, int ny, double x_min, double x_max, double L);

}  // namespace flushlab::field
