#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uldp/common.hpp"
#include "uldp/dynamics.hpp"
#include "uldp/model.hpp"

// The rate functional: half the squared L2 norm of the cheapest control
// steering the skeleton equation, infinity when no control works.

namespace uldp::action {

struct OptimizerOptions {
  double mu0 = 10.0;           // initial penalty weight
  double mu_factor = 10.0;     // geometric growth per outer stage
  double mu_max = 1e8;
  double endpoint_tol_rel = 1e-6;  // tol = rel * (1 + |target|)
  double grad_tol = 1e-8;
  int max_inner = 400;             // gradient steps per stage
  double ls_c1 = 1e-4;             // Armijo constant
  double ls_shrink = 0.5;
  int max_ls = 60;
  double fd_jac_step = 1e-7;       // fallback when analytic Jacobians are absent
};

struct OptimTelemetry {
  long iterations = 0;
  double grad_norm = 0.0;
  std::vector<double> mu_schedule;
  double mu_final = 0.0;
};

struct ActionResult {
  double rate = 0.0;  // in [0, +inf]
  std::optional<Control> control;
  // Feasibility residual: for path_rate the max dynamics defect
  // |sigma h - (v - b)| over cells, for the endpoint problem the terminal
  // mismatch |Z(T) - target|. rate == +inf iff it exceeded its tolerance.
  double residual = 0.0;
  std::optional<int> witness_cell;  // first infeasible cell (path_rate)
  OptimTelemetry telemetry;
};

/// Half the squared L2 norm of h (exact for piecewise-constant controls).
double action_of_control(const Control& h);

/// Recovers the minimal control along a path: per cell, the least-norm
/// solution of sigma(t_k, x_k) h = (x_{k+1}-x_k)/dt - b(t_k, x_k) via SVD
/// with relative threshold pinv_tol. Rate is +inf when the defect leaves
/// the range of sigma by more than feas_tol at some cell.
ActionResult path_rate(const CoefficientField& field, const Trajectory& path,
                       double pinv_tol = 1e-10, double feas_tol = 1e-6);

/// Minimizes 1/2 sum |h_k|^2 dt + (mu/2)|Z^h(T) - target|^2 over controls
/// on the integration grid (Z^h the euler skeleton), with the gradient
/// from the exact discrete adjoint, an Armijo line search, and geometric
/// continuation in mu until the endpoint tolerance is met. Returns
/// rate = +inf when the penalty loop exhausts without feasibility.
ActionResult min_action_endpoint(const CoefficientField& field, const Vec& x0, const Vec& target,
                                 int n_steps, const OptimizerOptions& opts = {});

/// Max relative error between the adjoint gradient and central finite
/// differences along random control directions.
double gradient_check(const CoefficientField& field, const Vec& x0, const Vec& target, int n_steps,
                      int probes, std::uint64_t seed);

/// JSON object {rate, residual, iterations, grad_norm, mu_final}.
std::string action_result_to_json(const ActionResult& result);

/// CSV with header "t,h1,...,hm", one row per control cell.
void write_control_csv(const Control& h, const std::string& path);

}  // namespace uldp::action
