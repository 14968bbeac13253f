#include "flushlab/grid.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "flushlab/errors.hpp"

namespace flushlab::field {

double Grid::dxi() const { return 2.0 * std::numbers::pi / lx(); }
double Grid::xi(int k) const { return k * dxi(); }

Grid make_grid(int nx, int ny, double x_min, double x_max, double L) {
  if (nx < 8 || nx % 2 != 0) {
    std::ostringstream os;
    os << "resolution error: nx must be even and >= 8 (got " << nx << ")";
    throw GridError(os.str());
  }
  if (ny < 8) {
    std::ostringstream os;
    os << "resolution error: ny must be >= 8 (got " << ny << ")";
    throw GridError(os.str());
  }
  if (!(L > 0.0)) throw GridError("domain length L must be positive");
  if (!(x_max - x_min > 7.0 * L)) {
    std::ostringstream os;
    os << "domain-too-small error: x_max - x_min = " << (x_max - x_min) << " must exceed 7L = " << 7.0 * L;
    throw GridError(os.str());
  }
  return Grid{nx, ny, x_min, x_max, L};
}

}  // namespace flushlab::field
