#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uldp/common.hpp"
#include "uldp/model.hpp"

// Numerical audits of the integrability, monotonicity, Lyapunov and
// modulus-ratio conditions on sampled grids. These are falsification
// tools: a pass means "no violation found at the sampled points", never
// a proof.

namespace uldp::checker {

struct Witness {
  double t = 0.0;
  Vec x;
  std::optional<Vec> y;
};

struct CheckReport {
  std::string assumption_id;
  bool passed = false;
  double worst_margin = 0.0;  // most negative RHS - LHS over samples
  std::optional<Witness> witness;
  long samples_used = 0;
  std::string notes;
};

inline constexpr double kDefaultTolerance = 1e-9;
inline constexpr double kValueFloor = 1e-10;      // V(x) floor for the quotient term
inline constexpr double kIntegrandGuard = 1e290;  // integrability overflow guard

/// Audits the finiteness of int_0^T sup_{|x|<=R} (|b| + ||sigma||^2) ds by
/// maximizing over a quasi-random cloud (plus a deterministic boundary
/// shell) per time node and trapezoid quadrature over t_nodes.
CheckReport check_integrability(const CoefficientField& field, double R, int t_nodes,
                                int x_samples, std::uint64_t seed,
                                double tolerance = kDefaultTolerance);

/// Audits 2<x-y, b(s,x)-b(s,y)> + ||sigma(s,x)-sigma(s,y)||^2 <=
/// g(s)*eta_R(|x-y|^2) over sampled pairs with |x|v|y| <= R and
/// separations log-uniform in [sep_floor_frac*eps0, eps0].
CheckReport check_monotonicity(const CoefficientField& field, const LyapunovSpec& spec, double R,
                               int pair_samples, std::uint64_t seed,
                               double sep_floor_frac = 1e-3,
                               double tolerance = kDefaultTolerance);

/// Audits <b,gradV> + (theta/2)*Trace(sigma^T hessV sigma) +
/// |sigma^T gradV|^2/(eta V) <= f(s)*(1+gamma(V)). Where V < floor the
/// inequality is checked in multiplied form to avoid 0/0.
CheckReport check_lyapunov_drift(const CoefficientField& field, const LyapunovSpec& spec, double R,
                                 int samples, std::uint64_t seed,
                                 double tolerance = kDefaultTolerance);

/// Audits Trace(sigma^T hessV sigma) >= -l(s)*(M + K*gamma(V)).
CheckReport check_trace_lower(const CoefficientField& field, const LyapunovSpec& spec, double R,
                              int samples, std::uint64_t seed,
                              double tolerance = kDefaultTolerance);

/// Audits sup c*eta_R(s)/eta_R(c*s) and sup c*gamma(s)/gamma(c*s) over the
/// supplied grids against a finiteness threshold. eta_R is taken at the
/// reference radius R = 1 (the built-in families scale out of the ratio).
CheckReport check_ratio_bounds(const LyapunovSpec& spec, const std::vector<double>& c_grid,
                               const std::vector<double>& s_grid_eta,
                               const std::vector<double>& s_grid_gamma,
                               double threshold = 1e6);

enum class DivergenceMode { at_zero, at_infinity };

/// Heuristic divergence probe: integrates 1/modulus (at zero) or
/// 1/(modulus+1) (at infinity) over geometric windows and compares the
/// last dyadic block of increments against the previous one. The verdict
/// is "consistent with divergence", never a proof.
CheckReport check_divergence(const ModulusFunction& modulus, DivergenceMode mode,
                             int halvings = 40, double rho = 0.5);

/// JSON object with fields {assumption, passed, worst_margin, witness,
/// samples, notes}.
std::string check_report_to_json(const CheckReport& report);

// Log-spaced grid helper for ratio audits.
std::vector<double> log_grid(double lo, double hi, int count);

}  // namespace uldp::checker
