#include "uldp/action.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "uldp/rng.hpp"

namespace uldp::action {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double control_energy(const Mat& h, double dt) {
  double s = 0.0;
  for (int k = 0; k < h.cols(); ++k) s += h.col(k).squaredNorm() * dt;
  return 0.5 * s;
}

struct Rollout {
  std::vector<Vec> z;  // n+1 states
  bool blew_up = false;
  int blow_step = 0;
};

// Euler rollout of the skeleton under the control matrix h (m x n).
// Blow-ups are reported, not thrown, so line-search trials can back off.
Rollout roll_forward(const CoefficientField& field, const Vec& x0, const Mat& h, double dt) {
  Rollout r;
  const int n = static_cast<int>(h.cols());
  r.z.reserve(n + 1);
  r.z.push_back(x0);
  Vec x = x0;
  for (int k = 0; k < n; ++k) {
    auto [b, s] = eval_field(field, k * dt, x);
    x += dt * b + s * (h.col(k) * dt);
    if (!all_finite(x) || x.norm() > kBlowUpGuard) {
      r.blew_up = true;
      r.blow_step = k + 1;
      return r;
    }
    r.z.push_back(x);
  }
  return r;
}

Mat drift_jacobian(const CoefficientField& field, double t, const Vec& x, double fd_step) {
  if (field.drift_jac) return field.drift_jac(t, x);
  const int d = field.dim_state;
  Mat j(d, d);
  for (int c = 0; c < d; ++c) {
    const double e = fd_step * (1.0 + std::abs(x[c]));
    Vec xp = x, xm = x;
    xp[c] += e;
    xm[c] -= e;
    j.col(c) = (field.drift(t, xp) - field.drift(t, xm)) / (2.0 * e);
  }
  return j;
}

Mat sigma_h_jacobian(const CoefficientField& field, double t, const Vec& x, const Vec& h,
                     double fd_step) {
  if (field.diffusion_jac_apply) return field.diffusion_jac_apply(t, x, h);
  const int d = field.dim_state;
  Mat j(d, d);
  for (int c = 0; c < d; ++c) {
    const double e = fd_step * (1.0 + std::abs(x[c]));
    Vec xp = x, xm = x;
    xp[c] += e;
    xm[c] -= e;
    j.col(c) = (field.diffusion(t, xp) * h - field.diffusion(t, xm) * h) / (2.0 * e);
  }
  return j;
}

struct Objective {
  double value = kInf;
  double gap = kInf;  // |z_n - target|
};

Objective eval_objective(const Rollout& r, const Mat& h, double dt, const Vec& target, double mu) {
  if (r.blew_up) return {};
  Objective o;
  o.gap = (r.z.back() - target).norm();
  o.value = control_energy(h, dt) + 0.5 * mu * o.gap * o.gap;
  return o;
}

// Exact gradient of the discrete objective: adjoint recursion of the Euler
// step map z_{k+1} = z_k + dt*b + dt*sigma*h_k.
Mat adjoint_gradient(const CoefficientField& field, const Rollout& r, const Mat& h, double dt,
                     const Vec& target, double mu, double fd_step) {
  const int n = static_cast<int>(h.cols());
  Mat grad(h.rows(), n);
  Vec lambda = mu * (r.z.back() - target);
  for (int k = n - 1; k >= 0; --k) {
    const double t = k * dt;
    const Vec& z = r.z[k];
    grad.col(k) = dt * h.col(k) + dt * (field.diffusion(t, z).transpose() * lambda);
    const Mat jb = drift_jacobian(field, t, z, fd_step);
    const Mat js = sigma_h_jacobian(field, t, z, h.col(k), fd_step);
    lambda += dt * ((jb + js).transpose() * lambda);
  }
  return grad;
}

}  // namespace

double action_of_control(const Control& h) { return 0.5 * h.squared_norm; }

ActionResult path_rate(const CoefficientField& field, const Trajectory& path, double pinv_tol,
                       double feas_tol) {
  const int n = path.n_steps;
  const int d = field.dim_state;
  if (n < 1 || static_cast<int>(path.states.size()) != n + 1)
    throw ConfigError("path_rate: malformed trajectory");
  if (path.states.front().size() != d) throw ConfigError("path_rate: dimension mismatch");
  const double dt = path.dt();

  Mat h(field.dim_noise, n);
  ActionResult res;
  res.residual = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = path.time_at(k);
    auto [b, s] = eval_field(field, t, path.states[k]);
    const Vec v = (path.states[k + 1] - path.states[k]) / dt;
    const Vec defect = v - b;
    Eigen::JacobiSVD<Mat> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(pinv_tol);
    h.col(k) = svd.solve(defect);
    const double cell_residual = (s * h.col(k) - defect).norm();
    if (cell_residual > feas_tol && !res.witness_cell) res.witness_cell = k;
    res.residual = std::max(res.residual, cell_residual);
  }

  if (res.witness_cell) {
    res.rate = kInf;
    return res;
  }
  res.control = make_control(std::move(h), path.horizon);
  res.rate = action_of_control(*res.control);
  return res;
}

ActionResult min_action_endpoint(const CoefficientField& field, const Vec& x0, const Vec& target,
                                 int n_steps, const OptimizerOptions& opts) {
  if (n_steps < 2) throw ConfigError("min_action_endpoint: n_steps must be >= 2");
  if (x0.size() != field.dim_state || target.size() != field.dim_state)
    throw ConfigError("min_action_endpoint: dimension mismatch");
  const double dt = field.horizon / n_steps;
  const double endpoint_tol = opts.endpoint_tol_rel * (1.0 + target.norm());

  Mat h = Mat::Zero(field.dim_noise, n_steps);
  ActionResult res;
  OptimTelemetry& tel = res.telemetry;

  Rollout roll = roll_forward(field, x0, h, dt);
  if (roll.blew_up)
    throw OptimizerError("uncontrolled flow blows up at step " + std::to_string(roll.blow_step));

  double alpha = 1.0;
  for (double mu = opts.mu0; mu <= opts.mu_max; mu *= opts.mu_factor) {
    tel.mu_schedule.push_back(mu);
    tel.mu_final = mu;
    Objective obj = eval_objective(roll, h, dt, target, mu);

    for (int it = 0; it < opts.max_inner; ++it) {
      const Mat grad = adjoint_gradient(field, roll, h, dt, target, mu, opts.fd_jac_step);
      tel.grad_norm = grad.norm();
      if (tel.grad_norm <= opts.grad_tol) break;

      // Backtracking Armijo search along -grad; blow-up trials are
      // rejected like any failed step and the step size halves.
      const double slope = grad.squaredNorm();
      bool accepted = false;
      int blown_trials = 0, trials = 0;
      double a = 2.0 * alpha;
      for (int ls = 0; ls < opts.max_ls; ++ls, a *= opts.ls_shrink) {
        const Mat h_trial = h - a * grad;
        Rollout trial = roll_forward(field, x0, h_trial, dt);
        ++trials;
        if (trial.blew_up) ++blown_trials;
        const Objective obj_trial = eval_objective(trial, h_trial, dt, target, mu);
        if (obj_trial.value <= obj.value - opts.ls_c1 * a * slope) {
          h = h_trial;
          roll = std::move(trial);
          obj = obj_trial;
          alpha = a;
          accepted = true;
          break;
        }
      }
      ++tel.iterations;
      if (!accepted) {
        if (blown_trials == trials)
          throw OptimizerError("persistent blow-up in line search (mu=" + std::to_string(mu) + ")");
        break;  // stagnated at this stage; grow mu
      }
    }

    if (obj.gap <= endpoint_tol) {
      res.control = make_control(h, field.horizon);
      res.rate = action_of_control(*res.control);
      res.residual = obj.gap;
      return res;
    }
  }

  // inf{empty} = inf: no feasible control found within the penalty budget.
  res.rate = kInf;
  res.residual = (roll.z.back() - target).norm();
  return res;
}

double gradient_check(const CoefficientField& field, const Vec& x0, const Vec& target, int n_steps,
                      int probes, std::uint64_t seed) {
  const double dt = field.horizon / n_steps;
  const double mu = 100.0;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Mat h(field.dim_noise, n_steps), dir(field.dim_noise, n_steps);
    for (int k = 0; k < n_steps; ++k) {
      for (int j = 0; j < field.dim_noise; ++j) {
        const auto z = rng::normal_pair(seed, p, k, j);
        h(j, k) = 0.3 * z.z0;
        dir(j, k) = z.z1;
      }
    }
    dir /= dir.norm();

    const Rollout roll = roll_forward(field, x0, h, dt);
    if (roll.blew_up) throw OptimizerError("gradient_check: probe control blows up");
    const Mat grad = adjoint_gradient(field, roll, h, dt, target, mu, 1e-7);
    const double directional = grad.cwiseProduct(dir).sum();

    const double step = 1e-6 * (1.0 + h.norm());
    const Objective plus =
        eval_objective(roll_forward(field, x0, Mat(h + step * dir), dt), h + step * dir, dt,
                       target, mu);
    const Objective minus =
        eval_objective(roll_forward(field, x0, Mat(h - step * dir), dt), h - step * dir, dt,
                       target, mu);
    const double fd = (plus.value - minus.value) / (2.0 * step);
    const double rel =
        std::abs(fd - directional) / std::max({std::abs(fd), std::abs(directional), 1e-12});
    worst = std::max(worst, rel);
  }
  return worst;
}

std::string action_result_to_json(const ActionResult& result) {
  auto num = [](double x) -> std::string {
    if (std::isinf(x)) return x > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
  };
  return "{\"rate\":" + num(result.rate) + ",\"residual\":" + num(result.residual) +
         ",\"iterations\":" + std::to_string(result.telemetry.iterations) +
         ",\"grad_norm\":" + num(result.telemetry.grad_norm) +
         ",\"mu_final\":" + num(result.telemetry.mu_final) + "}";
}

void write_control_csv(const Control& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << "t";
  for (int j = 1; j <= h.dim(); ++j) out << ",h" << j;
  out << "\n";
  char buf[32];
  for (int k = 0; k < h.n_cells(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", k * h.cell_dt());
    out << buf;
    for (int j = 0; j < h.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", h.values(j, k));
      out << "," << buf;
    }
    out << "\n";
  }
}

}  // namespace uldp::action
