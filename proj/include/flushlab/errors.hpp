#pragma once

#include <stdexcept>
#include <string>

namespace flushlab {

// Base of every library error. Category maps to the CLI exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { config, numeric, criteria };
  Error(Category c, const std::string& what) : std::runtime_error(what), category_(c) {}
  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

// Invalid grid parameters (resolution or domain size).
class GridError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(Category::numeric, what) {}
};

class ShapeError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonzeroMeanError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ExtensionTailError : public NumericError {
 public:
  using NumericError::NumericError;
};

class InfeasibleDesignError : public NumericError {
 public:
  using NumericError::NumericError;
};

class QuadratureError : public NumericError {
 public:
  using NumericError::NumericError;
};

class WindowError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ResidualTooLargeError : public NumericError {
 public:
  using NumericError::NumericError;
};

class OverflowGuardError : public NumericError {
 public:
  using NumericError::NumericError;
};

class InfeasibleRegularizationError : public NumericError {
 public:
  InfeasibleRegularizationError(const std::string& what, int k_frontier, double tail_frontier)
      : NumericError(what), k_frontier(k_frontier), tail_frontier(tail_frontier) {}
  int k_frontier;        // largest mode index allowed by the radius constraint
  double tail_frontier;  // smallest achievable tail norm on this grid
};

class CflError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NanError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ResolutionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class BudgetExceededError : public Error {
 public:
  BudgetExceededError(const std::string& what, double realized, double budget)
      : Error(Category::criteria, what), realized(realized), budget(budget) {}
  double realized;
  double budget;
};

}  // namespace flushlab
