#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uldp/action.hpp"
#include "uldp/common.hpp"
#include "uldp/dynamics.hpp"
#include "uldp/model.hpp"

// Desk-scale empirical checks of the large deviation statement: rare-event
// Monte Carlo against minimized action, and convergence studies mirroring
// the two conditions of the weak-convergence criterion.

namespace uldp::verify {

struct EventSpec {
  enum class Kind { terminal_ball, tube, exit_ball };
  Kind kind = Kind::terminal_ball;
  Vec center;
  double radius = 1.0;
  // terminal_ball only: count |X(T)-center| > radius instead (half-space
  // style events are encoded as complements of large off-center balls).
  bool complement = false;
  std::optional<Trajectory> reference;  // tube events

  bool hit(const Trajectory& traj) const;
};

struct McReport {
  double epsilon = 0.0;
  long trials = 0;
  long hits = 0;
  long blow_ups = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // normal-approximation 95% interval
  double neg_eps_log_p = 0.0;       // +inf when hits == 0
  bool valid = true;                // false when blow-ups exceed 0.1% of trials
};

/// Plain Monte Carlo estimate of P(event) under the small-noise SDE.
/// Trials are keyed by traj_index, so hits are reproducible across any
/// worker count; `mc_rare_event_serial` is the reference loop.
McReport mc_rare_event(const CoefficientField& field, double epsilon, const Vec& x0,
                       const EventSpec& event, long trials, int n_steps, std::uint64_t seed);
McReport mc_rare_event_serial(const CoefficientField& field, double epsilon, const Vec& x0,
                              const EventSpec& event, long trials, int n_steps,
                              std::uint64_t seed);

struct LdpRow {
  double epsilon, p_hat, ci_lo, ci_hi, neg_eps_log_p, i_ref;
};

/// One row per epsilon: (p_hat, -eps*log(p_hat)) next to the action
/// reference I_ref. For terminal_ball events I_ref is the minimal action
/// to the projection of the free-flow endpoint onto the event set; for
/// tube events it is the path rate of the reference. exit_ball admits no
/// action reference here and is rejected.
std::vector<LdpRow> ldp_comparison(const CoefficientField& field, const Vec& x0,
                                   const EventSpec& event, const std::vector<double>& epsilons,
                                   long trials, int n_steps, std::uint64_t seed,
                                   const action::OptimizerOptions& opts = {});

struct QuantileRow {
  double epsilon = 0.0;
  int x_id = 0;
  double median = 0.0, q90 = 0.0;
};

/// Per (epsilon, x): quantiles over `repeats` seeds of the sup distance
/// between the controlled SDE and the skeleton. The same noise stream is
/// used across epsilons (coupled comparison).
std::vector<QuantileRow> condition_ii_study(const CoefficientField& field,
                                            const std::vector<double>& epsilons,
                                            const std::vector<Vec>& x_grid, const Control& h,
                                            int n_steps, int repeats, std::uint64_t seed);

struct ContinuityRow {
  double freq = 0.0;
  int x_id = 0;
  double distance = 0.0;
};

/// Skeleton continuity under weakly-null perturbations: h_n = h +
/// A*sin(2*pi*freq*t/T)*e sampled on the control grid, started from x_n;
/// emits the sup distance to the unperturbed skeleton from x. x_seq and
/// freqs are zipped, the shorter one repeating its last entry.
std::vector<ContinuityRow> condition_i_study(const CoefficientField& field, const Vec& x,
                                             const std::vector<Vec>& x_seq, const Control& h,
                                             const std::vector<double>& freqs, int n_steps,
                                             double amplitude = 1.0,
                                             std::optional<Vec> direction = {});

// CSV writers with the documented headers.
void write_ldp_csv(const std::vector<LdpRow>& rows, const std::string& path);
void write_quantile_csv(const std::vector<QuantileRow>& rows, const std::string& path);
void write_continuity_csv(const std::vector<ContinuityRow>& rows, const std::string& path);

}  // namespace uldp::verify
