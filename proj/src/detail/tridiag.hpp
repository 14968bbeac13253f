#pragma once

#include <complex>
#include <vector>

namespace flushlab::detail {

// Factored real tridiagonal system; solves real or complex right-hand sides in place.
class Tridiag {
 public:
  Tridiag() = default;
  // a: sub-diagonal (a[0] unused), b: diagonal, c: super-diagonal (c[n-1] unused).
  Tridiag(std::vector<double> a, std::vector<double> b, std::vector<double> c)
      : a_(std::move(a)), cp_(std::move(c)), inv_(b.size()) {
    const std::size_t n = b.size();
    inv_[0] = 1.0 / b[0];
    cp_[0] *= inv_[0];
    for (std::size_t i = 1; i < n; ++i) {
      inv_[i] = 1.0 / (b[i] - a_[i] * cp_[i - 1]);
      if (i + 1 < n) cp_[i] *= inv_[i];
    }
  }

  std::size_t size() const { return inv_.size(); }

  template <class T>
  void solve(T* x, std::size_t stride = 1) const {
    const std::size_t n = inv_.size();
    x[0] *= inv_[0];
    for (std::size_t i = 1; i < n; ++i) x[i * stride] = (x[i * stride] - a_[i] * x[(i - 1) * stride]) * inv_[i];
    for (std::size_t i = n - 1; i-- > 0;) x[i * stride] -= cp_[i] * x[(i + 1) * stride];
  }

 private:
  std::vector<double> a_, cp_, inv_;
};

}  // namespace flushlab::detail
