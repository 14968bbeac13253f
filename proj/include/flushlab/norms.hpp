#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "flushlab/field.hpp"

namespace flushlab::field {

struct NormReport {
  double l2 = 0.0;
  std::map<int, double> hk;
  double l1_time_hk = 0.0;
};

// Tangential window [a, b]; nullopt means the whole period.
using XWindow = std::optional<std::pair<double, double>>;

// Squared L2 norm of all components over the window times [-1, 1].
double l2_squared(const Field2D& u, const XWindow& w = std::nullopt);
double l2(const Field2D& u, const XWindow& w = std::nullopt);

// Sobolev norm summing all mixed derivatives of total order <= k.
double hk(const Field2D& u, int k, const XWindow& w = std::nullopt);

NormReport norms(const Field2D& u, const std::vector<int>& orders, const XWindow& w = std::nullopt);

// Trapezoid rule in time.
double l1_time(const std::vector<double>& t, const std::vector<double>& values);

// Max |u| over samples with x outside [a, b] (periodic).
double max_outside(const Field2D& u, double a, double b);

}  // namespace flushlab::field
