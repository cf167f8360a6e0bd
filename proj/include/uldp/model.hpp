#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "uldp/common.hpp"

namespace uldp {

using DriftFn = std::function<Vec(double t, const Vec& x)>;
using DiffusionFn = std::function<Mat(double t, const Vec& x)>;
using DriftJacFn = std::function<Mat(double t, const Vec& x)>;
// Jacobian of x -> sigma(t,x)*h for a fixed control value h.
using DiffusionJacApplyFn = std::function<Mat(double t, const Vec& x, const Vec& h)>;
using ScalarFn = std::function<double(double)>;
using VFn = std::function<double(const Vec&)>;
using GradFn = std::function<Vec(const Vec&)>;
using HessFn = std::function<Mat(const Vec&)>;

/// Drift/diffusion pair of a small-noise SDE on [0, horizon].
/// Evaluators are pure and safe to share across threads.
struct CoefficientField {
  int dim_state = 0;  // d
  int dim_noise = 0;  // m
  double horizon = 1.0;
  std::string name;
  DriftFn drift;
  DiffusionFn diffusion;
  // Optional analytic Jacobians; the action minimizer falls back to
  // finite differences when they are absent.
  DriftJacFn drift_jac;
  DiffusionJacApplyFn diffusion_jac_apply;
};

/// Scalar increasing function on [domain_lo, domain_hi].
struct ModulusFunction {
  std::string label;
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  ScalarFn eval;

  bool in_domain(double s) const { return s >= domain_lo && s <= domain_hi; }
  double operator()(double s) const { return eval(s); }
};

/// Lyapunov data: V with derivatives, the drift/trace constants, the
/// weight functions on [0,T] and the two modulus families.
struct LyapunovSpec {
  VFn V;
  GradFn gradV;
  HessFn hessV;
  double theta = 1.0;
  double eta = 1.0;
  double bigM = 1.0;
  double bigK = 1.0;
  ScalarFn f_weight;
  ScalarFn g_weight;
  ScalarFn l_weight;
  ModulusFunction gamma;                                 // on [0, inf)
  std::function<ModulusFunction(double R)> eta_R;        // ball radius -> modulus
  double eps0 = 0.5;                                     // separation cap in (0,1)
};

/// Piecewise-constant control on a uniform grid over [0, horizon];
/// column k of `values` is the value on [t_k, t_{k+1}).
struct Control {
  double horizon = 1.0;
  Mat values;           // m x n_cells
  double squared_norm = 0.0;

  int dim() const { return static_cast<int>(values.rows()); }
  int n_cells() const { return static_cast<int>(values.cols()); }
  double cell_dt() const { return horizon / n_cells(); }

  /// Value on the integration step k of an n_steps grid (which the
  /// control grid must divide).
  Vec value_at_step(int step, int n_steps) const {
    const int stride = n_steps / n_cells();
    return values.col(step / stride);
  }

  bool in_sn(double N) const { return squared_norm <= N; }
};

Control make_control(Mat values, double horizon);
Control zero_control(int dim_noise, int n_cells, double horizon);
Control constant_control(const Vec& value, int n_cells, double horizon);
/// Split every cell into `factor` equal cells (same function, finer grid).
Control refine_control(const Control& h, int factor);

/// Evaluate (b, sigma) at (t, x) with finiteness checks on input and output.
std::pair<Vec, Mat> eval_field(const CoefficientField& field, double t, const Vec& x);

// Built-in modulus functions.
ModulusFunction modulus_identity();                       // s
ModulusFunction modulus_xlog(double R, double domain_hi); // R*s*log(1/s), 0 at 0
ModulusFunction gamma_identity();                         // s
ModulusFunction gamma_slog_monotone();                    // s*log(1+s)+s
ModulusFunction gamma_slog_literal();                     // s*log(s)+1 (decreasing near 0)
ModulusFunction gamma_square();                           // s^2 (ratio-bound counterexample)
/// Lookup by label: identity | slog-monotone | slog-literal | square.
ModulusFunction gamma_by_label(const std::string& label);

// Built-in systems.
std::pair<CoefficientField, LyapunovSpec> make_brownian_system(double sigma0, int dim);
std::pair<CoefficientField, LyapunovSpec> make_ou_system(double a, double sigma0, int dim);

struct HamiltonianOptions {
  std::string sigma_choice = "default";  // "default" (Hoelder) or "lipschitz"
  std::string gamma_label = "slog-monotone";
  double estimation_halfwidth = 6.0;     // square used to estimate theta/eta
  int estimation_points = 121;           // per axis
};

/// Double-well system on R^2: symplectic part of H(x) = x2^2/2 + x1^4/4 - x1^2/2
/// plus the dissipative pull -F0*grad(H), with a degenerate polynomial-growth
/// diffusion. Requires F0 > 1.
std::pair<CoefficientField, LyapunovSpec> make_hamiltonian_system(
    double F0, const HamiltonianOptions& opts = {});

/// Energy of the double-well system (exposed for tests and diagnostics).
double hamiltonian_energy(const Vec& x);

}  // namespace uldp
