#include "uldp/dynamics.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "uldp/rng.hpp"

namespace uldp {

Vec noise_increment(std::uint64_t seed, long traj_index, int step, int dim_noise, double dt) {
  Vec dw(dim_noise);
  const double sqrt_dt = std::sqrt(dt);
  for (int j = 0; j < dim_noise; j += 2) {
    const auto z = rng::normal_pair(seed, static_cast<std::uint64_t>(traj_index),
                                    static_cast<std::uint32_t>(step),
                                    static_cast<std::uint32_t>(j / 2));
    dw[j] = sqrt_dt * z.z0;
    if (j + 1 < dim_noise) dw[j + 1] = sqrt_dt * z.z1;
  }
  return dw;
}

NoisePath make_noise_path(std::uint64_t seed, long traj_index, int dim_noise, int n_steps,
                          double horizon) {
  NoisePath path;
  path.horizon = horizon;
  path.n_steps = n_steps;
  path.increments.reserve(n_steps);
  const double dt = horizon / n_steps;
  for (int k = 0; k < n_steps; ++k)
    path.increments.push_back(noise_increment(seed, traj_index, k, dim_noise, dt));
  return path;
}

namespace {

void check_grids(const CoefficientField& field, const Control& h, int n_steps) {
  if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
  if (h.dim() != field.dim_noise) throw ConfigError("control dimension does not match dim_noise");
  if (std::abs(h.horizon - field.horizon) > 1e-12 * std::max(1.0, field.horizon))
    throw ConfigError("control horizon does not match field horizon");
  if (n_steps % h.n_cells() != 0)
    throw ConfigError("control grid must divide the integration grid");
}

void check_state(const Vec& x, int step, long traj_index) {
  if (!all_finite(x) || x.norm() > kBlowUpGuard)
    throw BlowUpError("trajectory left the overflow guard region", step, traj_index);
}

// Shared Euler kernel. The sigma input u_k is h_k*dt plus, when eps > 0,
// sqrt(eps)*dW_k; eps = 0 therefore executes the exact same floating-point
// sequence as the skeleton in euler mode.
Trajectory integrate_euler(const CoefficientField& field, double epsilon, const Vec& x0,
                           const Control& h, int n_steps, std::uint64_t seed, long traj_index,
                           const char* scheme_label) {
  check_grids(field, h, n_steps);
  if (epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
  if (x0.size() != field.dim_state) throw ConfigError("x0 dimension mismatch");

  Trajectory traj;
  traj.horizon = field.horizon;
  traj.n_steps = n_steps;
  traj.meta = {epsilon, seed, traj_index, scheme_label};
  traj.states.reserve(n_steps + 1);
  traj.states.push_back(x0);

  const double dt = traj.dt();
  const double sqrt_eps = std::sqrt(epsilon);
  const int stride = n_steps / h.n_cells();
  Vec x = x0;
  check_state(x, 0, traj_index);
  for (int k = 0; k < n_steps; ++k) {
    const double t = traj.time_at(k);
    auto [b, s] = eval_field(field, t, x);
    Vec u = h.values.col(k / stride) * dt;
    if (epsilon > 0.0)
      u += sqrt_eps * noise_increment(seed, traj_index, k, field.dim_noise, dt);
    x += dt * b + s * u;
    check_state(x, k + 1, traj_index);
    traj.states.push_back(x);
  }
  return traj;
}

}  // namespace

Trajectory simulate_sde(const CoefficientField& field, double epsilon, const Vec& x0, int n_steps,
                        std::uint64_t seed, long traj_index) {
  return integrate_euler(field, epsilon, x0, zero_control(field.dim_noise, 1, field.horizon),
                         n_steps, seed, traj_index, "euler-maruyama");
}

Trajectory simulate_controlled(const CoefficientField& field, double epsilon, const Vec& x0,
                               const Control& h, int n_steps, std::uint64_t seed,
                               long traj_index) {
  return integrate_euler(field, epsilon, x0, h, n_steps, seed, traj_index, "euler-maruyama");
}

Trajectory solve_skeleton(const CoefficientField& field, const Vec& x0, const Control& h,
                          int n_steps, OdeScheme scheme) {
  if (scheme == OdeScheme::euler)
    return integrate_euler(field, 0.0, x0, h, n_steps, 0, 0, "euler");

  check_grids(field, h, n_steps);
  if (x0.size() != field.dim_state) throw ConfigError("x0 dimension mismatch");
  Trajectory traj;
  traj.horizon = field.horizon;
  traj.n_steps = n_steps;
  traj.meta = {0.0, 0, 0, "rk4"};
  traj.states.reserve(n_steps + 1);
  traj.states.push_back(x0);

  const double dt = traj.dt();
  const int stride = n_steps / h.n_cells();
  Vec x = x0;
  check_state(x, 0, 0);
  for (int k = 0; k < n_steps; ++k) {
    const double t = traj.time_at(k);
    const Vec hk = h.values.col(k / stride);  // frozen over the step
    auto rhs = [&](double s, const Vec& z) {
      auto [b, sig] = eval_field(field, std::min(s, field.horizon), z);
      return Vec(b + sig * hk);
    };
    const Vec k1 = rhs(t, x);
    const Vec k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Vec k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Vec k4 = rhs(t + dt, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_state(x, k + 1, 0);
    traj.states.push_back(x);
  }
  return traj;
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (a.n_steps != b.n_steps || std::abs(a.horizon - b.horizon) > 1e-12 * std::max(1.0, a.horizon))
    throw ConfigError("sup_distance requires identical grids");
  double d = 0.0;
  for (int k = 0; k <= a.n_steps; ++k) d = std::max(d, (a.states[k] - b.states[k]).norm());
  return d;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  const int d = static_cast<int>(traj.states.front().size());
  out << "t";
  for (int j = 1; j <= d; ++j) out << ",x" << j;
  out << "\n";
  char buf[32];
  for (int k = 0; k <= traj.n_steps; ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.time_at(k));
    out << buf;
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", traj.states[k][j]);
      out << "," << buf;
    }
    out << "\n";
  }
  std::ofstream meta(path + ".meta.json");
  meta << "{\"epsilon\":" << traj.meta.epsilon << ",\"seed\":" << traj.meta.seed
       << ",\"traj_index\":" << traj.meta.traj_index << ",\"scheme\":\"" << traj.meta.scheme
       << "\",\"n_steps\":" << traj.n_steps << ",\"horizon\":" << traj.horizon << "}\n";
}

std::vector<Trajectory> simulate_ensemble(const CoefficientField& field, double epsilon,
                                          const Vec& x0, int n_steps, std::uint64_t seed,
                                          int count) {
  std::vector<Trajectory> out(count);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < count; ++i)
    out[i] = simulate_sde(field, epsilon, x0, n_steps, seed, i);
  return out;
}

std::vector<Trajectory> simulate_ensemble_serial(const CoefficientField& field, double epsilon,
                                                 const Vec& x0, int n_steps, std::uint64_t seed,
                                                 int count) {
  std::vector<Trajectory> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = simulate_sde(field, epsilon, x0, n_steps, seed, i);
  return out;
}

}  // namespace uldp
