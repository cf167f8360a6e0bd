#include "uldp/verify.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "uldp/rng.hpp"

namespace uldp::verify {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double w = pos - lo;
  return (1.0 - w) * v[lo] + w * v[lo + 1];
}

}  // namespace

bool EventSpec::hit(const Trajectory& traj) const {
  switch (kind) {
    case Kind::terminal_ball: {
      const bool inside = (traj.states.back() - center).norm() <= radius;
      return complement ? !inside : inside;
    }
    case Kind::tube: {
      if (!reference) throw ConfigError("tube event needs a reference trajectory");
      return sup_distance(traj, *reference) <= radius;
    }
    case Kind::exit_ball: {
      for (const Vec& x : traj.states)
        if ((x - center).norm() >= radius) return true;
      return false;
    }
  }
  return false;
}

namespace {

template <bool Parallel>
McReport mc_impl(const CoefficientField& field, double epsilon, const Vec& x0,
                 const EventSpec& event, long trials, int n_steps, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("mc_rare_event: trials must be >= 1");
  if (event.radius <= 0.0) throw ConfigError("mc_rare_event: radius must be positive");
  long hits = 0, blow_ups = 0;
#pragma omp parallel for schedule(static) reduction(+ : hits, blow_ups) if (Parallel)
  for (long i = 0; i < trials; ++i) {
    try {
      if (event.hit(simulate_sde(field, epsilon, x0, n_steps, seed, i))) ++hits;
    } catch (const BlowUpError&) {
      ++blow_ups;
    } catch (const EvaluationError&) {
      ++blow_ups;  // coefficient overflowed before the state guard tripped
    }
  }
  McReport rep;
  rep.epsilon = epsilon;
  rep.trials = trials;
  rep.hits = hits;
  rep.blow_ups = blow_ups;
  rep.p_hat = static_cast<double>(hits) / trials;
  const double se = std::sqrt(std::max(rep.p_hat * (1.0 - rep.p_hat) / trials, 0.0));
  rep.ci_lo = rep.p_hat - 1.96 * se;
  rep.ci_hi = rep.p_hat + 1.96 * se;
  rep.neg_eps_log_p = hits == 0 ? kInf : -epsilon * std::log(rep.p_hat);
  rep.valid = blow_ups * 1000 <= trials;
  return rep;
}

}  // namespace

McReport mc_rare_event(const CoefficientField& field, double epsilon, const Vec& x0,
                       const EventSpec& event, long trials, int n_steps, std::uint64_t seed) {
  return mc_impl<true>(field, epsilon, x0, event, trials, n_steps, seed);
}

McReport mc_rare_event_serial(const CoefficientField& field, double epsilon, const Vec& x0,
                              const EventSpec& event, long trials, int n_steps,
                              std::uint64_t seed) {
  return mc_impl<false>(field, epsilon, x0, event, trials, n_steps, seed);
}

namespace {

// Nearest point of the terminal event set from the free-flow endpoint;
// the action to that point is the comparison reference.
Vec terminal_target(const EventSpec& event, const Vec& flow_end) {
  const Vec offset = flow_end - event.center;
  const double dist = offset.norm();
  if (!event.complement) {
    if (dist <= event.radius) return flow_end;  // already inside, I_ref = 0
    return event.center + (event.radius / dist) * offset;
  }
  if (dist >= event.radius) return flow_end;
  if (dist < 1e-12) {
    Vec e = Vec::Zero(flow_end.size());
    e[0] = 1.0;
    return event.center + event.radius * e;
  }
  return event.center + (event.radius / dist) * offset;
}

}  // namespace

std::vector<LdpRow> ldp_comparison(const CoefficientField& field, const Vec& x0,
                                   const EventSpec& event, const std::vector<double>& epsilons,
                                   long trials, int n_steps, std::uint64_t seed,
                                   const action::OptimizerOptions& opts) {
  double i_ref = 0.0;
  switch (event.kind) {
    case EventSpec::Kind::terminal_ball: {
      const Trajectory flow = solve_skeleton(field, x0, zero_control(field.dim_noise, 1, field.horizon),
                                             n_steps, OdeScheme::euler);
      const Vec target = terminal_target(event, flow.states.back());
      if ((target - flow.states.back()).norm() < 1e-14) {
        i_ref = 0.0;
      } else {
        const auto res = action::min_action_endpoint(field, x0, target, n_steps, opts);
        i_ref = res.rate;
      }
      break;
    }
    case EventSpec::Kind::tube: {
      if (!event.reference) throw ConfigError("ldp_comparison: tube event needs a reference");
      i_ref = action::path_rate(field, *event.reference).rate;
      break;
    }
    case EventSpec::Kind::exit_ball:
      throw ConfigError("ldp_comparison: exit_ball admits no action reference");
  }

  std::vector<LdpRow> rows;
  rows.reserve(epsilons.size());
  for (std::size_t j = 0; j < epsilons.size(); ++j) {
    const McReport mc = mc_rare_event(field, epsilons[j], x0, event, trials, n_steps,
                                      rng::mix_seed(seed, j));
    rows.push_back({mc.epsilon, mc.p_hat, mc.ci_lo, mc.ci_hi, mc.neg_eps_log_p, i_ref});
  }
  return rows;
}

std::vector<QuantileRow> condition_ii_study(const CoefficientField& field,
                                            const std::vector<double>& epsilons,
                                            const std::vector<Vec>& x_grid, const Control& h,
                                            int n_steps, int repeats, std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("condition_ii_study: repeats must be >= 1");
  std::vector<QuantileRow> rows;
  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    for (std::size_t xi = 0; xi < x_grid.size(); ++xi) {
      const Trajectory skel = solve_skeleton(field, x_grid[xi], h, n_steps, OdeScheme::euler);
      // Noise is keyed by x only, so epsilons are compared on coupled paths.
      const std::uint64_t key = rng::mix_seed(seed, xi);
      std::vector<double> dist(repeats, 0.0);
#pragma omp parallel for schedule(static)
      for (int r = 0; r < repeats; ++r) {
        const Trajectory y = simulate_controlled(field, epsilons[e], x_grid[xi], h, n_steps, key, r);
        dist[r] = sup_distance(y, skel);
      }
      rows.push_back({epsilons[e], static_cast<int>(xi), quantile(dist, 0.5), quantile(dist, 0.9)});
    }
  }
  return rows;
}

std::vector<ContinuityRow> condition_i_study(const CoefficientField& field, const Vec& x,
                                             const std::vector<Vec>& x_seq, const Control& h,
                                             const std::vector<double>& freqs, int n_steps,
                                             double amplitude, std::optional<Vec> direction) {
  if (x_seq.empty() || freqs.empty()) throw ConfigError("condition_i_study: empty sequences");
  Vec e = direction.value_or([&] {
    Vec d = Vec::Zero(field.dim_noise);
    d[0] = 1.0;
    return d;
  }());
  if (e.norm() > 0.0) e /= e.norm();

  const Trajectory base = solve_skeleton(field, x, h, n_steps, OdeScheme::euler);
  const double T = field.horizon;
  const int n_cells = h.n_cells();
  const double dt_cell = h.cell_dt();

  std::vector<ContinuityRow> rows;
  const std::size_t count = std::max(x_seq.size(), freqs.size());
  for (std::size_t n = 0; n < count; ++n) {
    const Vec& xn = x_seq[std::min(n, x_seq.size() - 1)];
    const double f = freqs[std::min(n, freqs.size() - 1)];
    Mat values = h.values;
    for (int k = 0; k < n_cells; ++k)
      values.col(k) += amplitude * std::sin(2.0 * M_PI * f * (k * dt_cell) / T) * e;
    const Control hn = make_control(std::move(values), T);
    const Trajectory pert = solve_skeleton(field, xn, hn, n_steps, OdeScheme::euler);
    rows.push_back({f, static_cast<int>(n), sup_distance(pert, base)});
  }
  return rows;
}

namespace {

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << header << "\n";
  char buf[32];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (std::isinf(row[i]))
        std::snprintf(buf, sizeof(buf), row[i] > 0 ? "inf" : "-inf");
      else
        std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace

void write_ldp_csv(const std::vector<LdpRow>& rows, const std::string& path) {
  std::vector<std::vector<double>> data;
  for (const auto& r : rows)
    data.push_back({r.epsilon, r.p_hat, r.ci_lo, r.ci_hi, r.neg_eps_log_p, r.i_ref});
  write_csv(path, "epsilon,p_hat,ci_lo,ci_hi,neg_eps_log_p,i_ref", data);
}

void write_quantile_csv(const std::vector<QuantileRow>& rows, const std::string& path) {
  std::vector<std::vector<double>> data;
  for (const auto& r : rows)
    data.push_back({r.epsilon, static_cast<double>(r.x_id), r.median, r.q90});
  write_csv(path, "epsilon,x_id,median,q90", data);
}

void write_continuity_csv(const std::vector<ContinuityRow>& rows, const std::string& path) {
  std::vector<std::vector<double>> data;
  for (const auto& r : rows)
    data.push_back({r.freq, static_cast<double>(r.x_id), r.distance});
  write_csv(path, "freq,x_id,distance", data);
}

}  // namespace uldp::verify
