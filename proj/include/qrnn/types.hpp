#pragma once

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace qrnn {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Numerical tolerances shared by validity checks, invariants and tests.
// Every comparison against one of these thresholds refers to the named
// constant, never to a repeated literal.
namespace tol {
inline constexpr double kHermitian = 1e-12;       // max entrywise |rho - rho^dag|
inline constexpr double kUnitTrace = 1e-12;       // |Tr rho - 1|
inline constexpr double kPsdEigenvalue = -1e-10;  // lower bound on min eigenvalue
inline constexpr double kTracePreserve = 1e-13;   // partial traces preserve Tr
inline constexpr double kUnitary = 1e-12;         // |U U^dag - I| for built operators
inline constexpr double kExpectationSlack = 1e-10;  // |<O>| <= 1 + slack
inline constexpr double kDegenerateProb = 1e-15;  // outcome distribution floor
}  // namespace tol

// Dimension / length mismatches between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid or inconsistent configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown at runtime (divergent integration, degenerate
// outcome distributions, non-finite objective values).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter shift aimed at a non-shiftable index (the bias) or at a
// malformed (block, parameter) combination.
class InvalidShiftError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EmptyDatasetError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace qrnn
