#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uldp/common.hpp"
#include "uldp/model.hpp"

namespace uldp {

struct TrajectoryMeta {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  long traj_index = 0;
  std::string scheme = "euler";
};

/// Time-indexed states on the uniform grid t_k = k*horizon/n_steps.
struct Trajectory {
  double horizon = 1.0;
  int n_steps = 0;
  std::vector<Vec> states;  // n_steps + 1 entries
  TrajectoryMeta meta;

  double dt() const { return horizon / n_steps; }
  double time_at(int k) const { return horizon * k / n_steps; }
};

/// Brownian increments N(0, dt*I_m), addressable per (seed, traj, step).
struct NoisePath {
  double horizon = 1.0;
  int n_steps = 0;
  std::vector<Vec> increments;  // n_steps entries
};

/// The increment used by the integrators at `step` (single source of truth).
Vec noise_increment(std::uint64_t seed, long traj_index, int step, int dim_noise, double dt);
NoisePath make_noise_path(std::uint64_t seed, long traj_index, int dim_noise, int n_steps,
                          double horizon);

inline constexpr double kBlowUpGuard = 1e12;

/// Euler-Maruyama for dX = b dt + sqrt(eps) sigma dB. eps = 0 gives the
/// deterministic Euler flow.
Trajectory simulate_sde(const CoefficientField& field, double epsilon, const Vec& x0, int n_steps,
                        std::uint64_t seed, long traj_index);

/// Controlled equation dY = b dt + sigma h dt + sqrt(eps) sigma dB. Shares
/// the noise stream with simulate_sde at equal (seed, traj_index); with
/// eps = 0 the output is bit-identical to solve_skeleton in euler mode.
Trajectory simulate_controlled(const CoefficientField& field, double epsilon, const Vec& x0,
                               const Control& h, int n_steps, std::uint64_t seed, long traj_index);

enum class OdeScheme { euler, rk4 };

/// Deterministic skeleton dZ = b dt + sigma h dt.
Trajectory solve_skeleton(const CoefficientField& field, const Vec& x0, const Control& h,
                          int n_steps, OdeScheme scheme);

/// Uniform metric: max over grid nodes of the Euclidean distance.
double sup_distance(const Trajectory& a, const Trajectory& b);

/// CSV with header "t,x1,...,xd" plus a JSON sidecar <path>.meta.json.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

/// `count` independent SDE trajectories (traj_index = 0..count-1), OpenMP
/// parallel; `simulate_ensemble_serial` is the reference loop.
std::vector<Trajectory> simulate_ensemble(const CoefficientField& field, double epsilon,
                                          const Vec& x0, int n_steps, std::uint64_t seed,
                                          int count);
std::vector<Trajectory> simulate_ensemble_serial(const CoefficientField& field, double epsilon,
                                                 const Vec& x0, int n_steps, std::uint64_t seed,
                                                 int count);

}  // namespace uldp
