#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace uldp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A coefficient evaluator returned a non-finite value, or was fed one.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::string what, double t, Vec x)
      : std::runtime_error(std::move(what)), t(t), x(std::move(x)) {}
  double t;
  Vec x;
};

/// A simulated or optimized state left the overflow guard region.
class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(std::string what, int step, long traj_index)
      : std::runtime_error(std::move(what)), step(step), traj_index(traj_index) {}
  int step;
  long traj_index;
};

/// Bad configuration: incompatible grids, dimension mismatch, unknown keys.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The action minimizer could not make progress (persistent blow-up etc.).
class OptimizerError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline double sq(double x) { return x * x; }

}  // namespace uldp
