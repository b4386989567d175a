#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dampopt {

using Real = double;
using Complex = std::complex<double>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Index = Eigen::Index;

// Input matrices, dimensions, or configuration values violate a documented
// precondition.  Callers get the offending field in the message.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A shifted solve was requested too close to a pole of the closed loop; the
// factorization is unusable at this shift.
struct PoleProximityError : std::runtime_error {
  Complex shift;
  double rcond;
  PoleProximityError(Complex s, double rc);
};

// The transfer function is unbounded on the imaginary axis (a pole sits on it,
// within tolerance) or the descriptor pencil is numerically singular.
// omega_hint carries the frequency of the offending pole when known.
struct UnboundedModelError : std::runtime_error {
  double omega_hint;
  explicit UnboundedModelError(const std::string& what,
                               double omega = std::numeric_limits<double>::quiet_NaN());
};

// A gradient was requested in strict mode at a point where the smoothness
// diagnostics fail (coalescent singular values or tied peaks).
struct NonsmoothPointError : std::runtime_error {
  double singular_gap;
  double second_peak_gap;
  NonsmoothPointError(const std::string& what, double sg, double pg);
};

// Per-thread instrumentation.  Read/reset around a solver call to attribute
// costs to it; nested calls on the same thread accumulate into the same slots.
struct SolveCounters {
  long full_factorizations = 0;  // shifted n-by-n factorizations of a full-order model
  long full_norm_evals = 0;      // dense L-inf evaluations of a full-order realization
};

SolveCounters& solve_counters();

}  // namespace dampopt
