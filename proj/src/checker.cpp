#include "uldp/checker.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "uldp/rng.hpp"

namespace uldp::checker {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

double radical_inverse(int base, std::uint64_t i) {
  const double inv = 1.0 / base;
  double f = inv, r = 0.0;
  while (i) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

// Seed-shifted Halton sequence; coordinates are random-access, so sample
// sets are prefixes of each other under refinement.
struct QuasiSeq {
  int dim;
  double offset[12];
  QuasiSeq(int dim, std::uint64_t seed) : dim(dim) {
    for (int j = 0; j < dim; ++j) offset[j] = rng::uniform01(seed, 0x5eedu, j);
  }
  double coord(std::uint64_t k, int j) const {
    const double u = radical_inverse(kPrimes[j], k + 1) + offset[j];
    return u - std::floor(u);
  }
};

struct BallSamples {
  std::vector<double> times;  // in [0, T]
  std::vector<Vec> points;    // |x| <= R
};

// First `shells` deterministic boundary-shell points (worst cases of
// polynomial inequalities sit at radius extremes), then a quasi-random
// cloud of `count` points in the ball.
BallSamples sample_ball(int d, double R, double T, int count, std::uint64_t seed) {
  BallSamples out;
  const QuasiSeq dir_seq(d, rng::mix_seed(seed, 101));
  const QuasiSeq cloud_seq(d + 1, rng::mix_seed(seed, 202));
  const double fractions[] = {0.25, 0.5, 0.75, 1.0};
  const int dirs_per_shell = d == 1 ? 2 : 32;

  for (const double frac : fractions) {
    int accepted = 0;
    for (std::uint64_t k = 0; accepted < dirs_per_shell; ++k) {
      Vec y(d);
      if (d == 1) {
        y[0] = accepted == 0 ? 1.0 : -1.0;
      } else {
        for (int j = 0; j < d; ++j) y[j] = 2.0 * dir_seq.coord(k, j) - 1.0;
        const double n = y.norm();
        if (n < 1e-6 || n > 1.0) continue;
        y /= n;
      }
      out.points.push_back(frac * R * y);
      out.times.push_back(T * (accepted + 0.5) / dirs_per_shell);
      ++accepted;
    }
  }
  int accepted = 0;
  for (std::uint64_t k = 0; accepted < count; ++k) {
    Vec y(d);
    for (int j = 0; j < d; ++j) y[j] = 2.0 * cloud_seq.coord(k, j) - 1.0;
    if (y.norm() > 1.0) continue;
    out.points.push_back(R * y);
    out.times.push_back(T * cloud_seq.coord(k, d));
    ++accepted;
  }
  return out;
}

struct MarginSweep {
  std::vector<double> margins;
  std::exception_ptr first_error;
  long first_error_index = -1;
};

// Evaluate one margin per sample in parallel; exceptions are captured and
// the lowest-index one is rethrown so results do not depend on scheduling.
template <typename F>
MarginSweep sweep(long n, F&& margin_of) {
  MarginSweep s;
  s.margins.assign(n, kInf);
  std::vector<std::exception_ptr> errs(n);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    try {
      s.margins[i] = margin_of(i);
    } catch (...) {
      errs[i] = std::current_exception();
    }
  }
  for (long i = 0; i < n; ++i) {
    if (errs[i]) {
      s.first_error = errs[i];
      s.first_error_index = i;
      break;
    }
  }
  return s;
}

long argmin(const std::vector<double>& v) {
  long best = 0;
  for (long i = 1; i < static_cast<long>(v.size()); ++i)
    if (v[i] < v[best]) best = i;  // ties keep the lexicographically first
  return best;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

}  // namespace

CheckReport check_integrability(const CoefficientField& field, double R, int t_nodes,
                                int x_samples, std::uint64_t seed, double tolerance) {
  if (R <= 0.0) throw ConfigError("check_integrability: R must be positive");
  if (t_nodes < 2) throw ConfigError("check_integrability: need at least two time nodes");
  const auto ball = sample_ball(field.dim_state, R, field.horizon, x_samples, seed);
  const long np = static_cast<long>(ball.points.size());
  const long total = static_cast<long>(t_nodes) * np;

  // One row of integrand values per time node; non-finite evaluations are
  // recorded as -inf margins instead of propagating (a blow-up is exactly
  // what this audit exists to report).
  std::vector<double> node_max(t_nodes, 0.0);
  std::vector<double> margins(total, kInf);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < t_nodes; ++i) {
    const double t = field.horizon * i / (t_nodes - 1);
    double m = 0.0;
    for (long j = 0; j < np; ++j) {
      double val;
      try {
        auto [b, s] = eval_field(field, t, ball.points[j]);
        val = b.norm() + s.squaredNorm();
      } catch (const EvaluationError&) {
        val = kInf;
      }
      margins[i * np + j] = kIntegrandGuard - val;
      m = std::max(m, val);
    }
    node_max[i] = m;
  }

  double estimate = 0.0;
  const double dt = field.horizon / (t_nodes - 1);
  for (int i = 0; i + 1 < t_nodes; ++i) estimate += 0.5 * (node_max[i] + node_max[i + 1]) * dt;

  CheckReport rep;
  rep.assumption_id = "integrability";
  rep.samples_used = total;
  const long worst = argmin(margins);
  rep.worst_margin = margins[worst];
  rep.passed = rep.worst_margin >= -tolerance && std::isfinite(estimate);
  rep.witness = Witness{field.horizon * (worst / np) / (t_nodes - 1), ball.points[worst % np], {}};
  rep.notes = "integral_estimate=" + fmt(estimate) + "; sup_integrand=" +
              fmt(kIntegrandGuard - rep.worst_margin);
  return rep;
}

CheckReport check_monotonicity(const CoefficientField& field, const LyapunovSpec& spec, double R,
                               int pair_samples, std::uint64_t seed, double sep_floor_frac,
                               double tolerance) {
  if (R <= 0.0) throw ConfigError("check_monotonicity: R must be positive");
  const ModulusFunction eta = spec.eta_R(R);
  const double eps0 = spec.eps0;
  const double sep_lo = sep_floor_frac * eps0;
  const double sep_hi = 0.999 * eps0;
  const int d = field.dim_state;
  const double T = field.horizon;

  struct Pair {
    double t;
    Vec x, y;
  };
  std::vector<Pair> pairs;
  pairs.reserve(pair_samples);
  long skipped = 0;
  const QuasiSeq seq(2 * d + 2, rng::mix_seed(seed, 303));
  for (std::uint64_t k = 0; static_cast<int>(pairs.size()) < pair_samples; ++k) {
    Vec x(d), dir(d);
    for (int j = 0; j < d; ++j) x[j] = 2.0 * seq.coord(k, j) - 1.0;
    if (x.norm() > 1.0) continue;
    x *= R;
    for (int j = 0; j < d; ++j) dir[j] = 2.0 * seq.coord(k, d + j) - 1.0;
    const double dn = dir.norm();
    if (dn < 1e-6 || dn > 1.0) continue;
    dir /= dn;
    const double sep = sep_lo * std::exp(seq.coord(k, 2 * d) * std::log(sep_hi / sep_lo));
    Vec y = x + sep * dir;
    if (y.norm() > R) continue;
    if (!eta.in_domain((x - y).squaredNorm())) {
      ++skipped;
      continue;
    }
    pairs.push_back({T * seq.coord(k, 2 * d + 1), std::move(x), std::move(y)});
  }

  std::vector<double> ratios(pairs.size(), 0.0);
  auto sweep_result = sweep(static_cast<long>(pairs.size()), [&](long i) {
    const auto& p = pairs[i];
    auto [bx, sx] = eval_field(field, p.t, p.x);
    auto [by, sy] = eval_field(field, p.t, p.y);
    const double lhs = 2.0 * (p.x - p.y).dot(bx - by) + (sx - sy).squaredNorm();
    const double rhs = spec.g_weight(p.t) * eta((p.x - p.y).squaredNorm());
    if (rhs > 0.0) ratios[i] = lhs / rhs;
    return rhs - lhs;
  });
  if (sweep_result.first_error) std::rethrow_exception(sweep_result.first_error);

  CheckReport rep;
  rep.assumption_id = "monotonicity";
  rep.samples_used = static_cast<long>(pairs.size());
  const long worst = argmin(sweep_result.margins);
  rep.worst_margin = pairs.empty() ? 0.0 : sweep_result.margins[worst];
  rep.passed = rep.worst_margin >= -tolerance;
  if (!pairs.empty()) rep.witness = Witness{pairs[worst].t, pairs[worst].x, pairs[worst].y};
  const double c_star = ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end());
  rep.notes = "c_star=" + fmt(c_star) + "; skipped_out_of_domain=" + fmt((double)skipped) +
              "; sep_range=[" + fmt(sep_lo) + "," + fmt(sep_hi) + "]";
  return rep;
}

namespace {

CheckReport lyapunov_audit(const CoefficientField& field, const LyapunovSpec& spec, double R,
                           int samples, std::uint64_t seed, double tolerance, bool drift_form) {
  if (R <= 0.0) throw ConfigError("lyapunov audit: R must be positive");
  const auto ball = sample_ball(field.dim_state, R, field.horizon, samples, seed);
  const long n = static_cast<long>(ball.points.size());

  auto sweep_result = sweep(n, [&](long i) {
    const double t = ball.times[i];
    const Vec& x = ball.points[i];
    auto [b, s] = eval_field(field, t, x);
    const double v = spec.V(x);
    const Vec grad = spec.gradV(x);
    const Mat hess = spec.hessV(x);
    const double trace = (s.transpose() * hess * s).trace();
    if (!drift_form) return trace + spec.l_weight(t) * (spec.bigM + spec.bigK * spec.gamma(v));
    const double quot_num = (s.transpose() * grad).squaredNorm();
    const double rest = b.dot(grad) + 0.5 * spec.theta * trace;
    const double rhs = spec.f_weight(t) * (1.0 + spec.gamma(v));
    if (v >= kValueFloor) return rhs - (rest + quot_num / (spec.eta * v));
    return v * rhs - (v * rest + quot_num / spec.eta);
  });
  if (sweep_result.first_error) std::rethrow_exception(sweep_result.first_error);

  CheckReport rep;
  rep.assumption_id = drift_form ? "lyapunov_drift" : "trace_lower";
  rep.samples_used = n;
  const long worst = argmin(sweep_result.margins);
  rep.worst_margin = sweep_result.margins[worst];
  rep.passed = rep.worst_margin >= -tolerance;
  rep.witness = Witness{ball.times[worst], ball.points[worst], {}};
  if (drift_form)
    rep.notes = "theta=" + fmt(spec.theta) + "; eta=" + fmt(spec.eta) +
                "; value_floor=" + fmt(kValueFloor);
  else
    rep.notes = "M=" + fmt(spec.bigM) + "; K=" + fmt(spec.bigK);
  return rep;
}

}  // namespace

CheckReport check_lyapunov_drift(const CoefficientField& field, const LyapunovSpec& spec, double R,
                                 int samples, std::uint64_t seed, double tolerance) {
  return lyapunov_audit(field, spec, R, samples, seed, tolerance, true);
}

CheckReport check_trace_lower(const CoefficientField& field, const LyapunovSpec& spec, double R,
                              int samples, std::uint64_t seed, double tolerance) {
  return lyapunov_audit(field, spec, R, samples, seed, tolerance, false);
}

CheckReport check_ratio_bounds(const LyapunovSpec& spec, const std::vector<double>& c_grid,
                               const std::vector<double>& s_grid_eta,
                               const std::vector<double>& s_grid_gamma, double threshold) {
  if (c_grid.empty() || s_grid_eta.empty() || s_grid_gamma.empty())
    throw ConfigError("check_ratio_bounds: grids must be nonempty");
  const ModulusFunction eta = spec.eta_R(1.0);

  struct Sup {
    double value = 0.0;
    double c = 0.0, s = 0.0;
    long skipped = 0;
  };
  auto scan = [&](const ModulusFunction& m, const std::vector<double>& s_grid) {
    Sup sup;
    for (const double c : c_grid) {
      for (const double s : s_grid) {
        if (!m.in_domain(s) || !m.in_domain(c * s)) {
          ++sup.skipped;
          continue;
        }
        const double denom = m(c * s);
        if (std::abs(denom) < 1e-300) {
          ++sup.skipped;
          continue;
        }
        const double r = c * m(s) / denom;
        if (r > sup.value) sup = {r, c, s, sup.skipped};
      }
    }
    return sup;
  };
  const Sup sup_eta = scan(eta, s_grid_eta);
  const Sup sup_gamma = scan(spec.gamma, s_grid_gamma);

  CheckReport rep;
  rep.assumption_id = "ratio_bounds";
  rep.samples_used = static_cast<long>(c_grid.size() * (s_grid_eta.size() + s_grid_gamma.size()));
  const bool gamma_worse = sup_gamma.value > sup_eta.value;
  const Sup& worst = gamma_worse ? sup_gamma : sup_eta;
  rep.worst_margin = threshold - std::max(sup_eta.value, sup_gamma.value);
  rep.passed = rep.worst_margin >= 0.0;
  Vec s_at(1);
  s_at[0] = worst.s;
  rep.witness = Witness{worst.c, s_at, {}};
  rep.notes = std::string("worst_family=") + (gamma_worse ? "gamma" : "eta_R") +
              "; sup_eta=" + fmt(sup_eta.value) + "; sup_gamma=" + fmt(sup_gamma.value) +
              "; skipped=" + fmt((double)(sup_eta.skipped + sup_gamma.skipped));
  return rep;
}

CheckReport check_divergence(const ModulusFunction& modulus, DivergenceMode mode, int halvings,
                             double rho) {
  if (halvings < 20) throw ConfigError("check_divergence: need at least 20 windows");
  const bool at_zero = mode == DivergenceMode::at_zero;

  // Window integrals in log space; windows halve toward 0 or double toward
  // infinity, so the integrand is resolved at every scale.
  auto window_integral = [&](double lo, double hi) {
    const int nodes = 33;
    const double ulo = std::log(lo), uhi = std::log(hi);
    double acc = 0.0, prev = 0.0;
    for (int i = 0; i < nodes; ++i) {
      const double u = ulo + (uhi - ulo) * i / (nodes - 1);
      const double x = std::exp(u);
      const double den = at_zero ? modulus(x) : modulus(x) + 1.0;
      const double val = den > 0.0 ? x / den : kInf;  // x from the log substitution
      if (i > 0) acc += 0.5 * (prev + val) * (uhi - ulo) / (nodes - 1);
      prev = val;
    }
    return acc;
  };

  std::vector<double> increments;
  increments.reserve(halvings);
  double edge = at_zero ? std::min(0.5, 0.9 * modulus.domain_hi) : 1.0;
  for (int k = 0; k < halvings; ++k) {
    const double next = at_zero ? edge * 0.5 : edge * 2.0;
    increments.push_back(at_zero ? window_integral(next, edge) : window_integral(edge, next));
    edge = next;
  }

  // Cauchy-condensation style comparison: the tail dyadic block of window
  // increments must not collapse relative to the previous block.
  auto block = [&](int from, int to) {
    double s = 0.0;
    for (int k = from; k < to; ++k) s += increments[k];
    return s;
  };
  const double b_prev = block(halvings / 4, halvings / 2);
  const double b_last = block(halvings / 2, halvings);

  CheckReport rep;
  rep.assumption_id = at_zero ? "divergence_at_zero" : "divergence_at_infinity";
  rep.samples_used = halvings;
  rep.worst_margin = b_last - rho * b_prev;
  rep.passed = rep.worst_margin >= 0.0;
  rep.notes = std::string(rep.passed ? "consistent with divergence"
                                     : "saturation detected; inconsistent with divergence") +
              " (heuristic, not a proof); tail_block=" + fmt(b_last) +
              "; prev_block=" + fmt(b_prev) + "; partial_integral=" + fmt(block(0, halvings));
  return rep;
}

namespace {

std::string json_number(double x) {
  if (std::isinf(x)) return x > 0 ? "\"inf\"" : "\"-inf\"";
  if (std::isnan(x)) return "\"nan\"";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string json_vec(const Vec& v) {
  std::string s = "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += json_number(v[i]);
  }
  return s + "]";
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string check_report_to_json(const CheckReport& report) {
  std::string w = "null";
  if (report.witness) {
    w = "{\"t\":" + json_number(report.witness->t) + ",\"x\":" + json_vec(report.witness->x);
    if (report.witness->y) w += ",\"y\":" + json_vec(*report.witness->y);
    w += "}";
  }
  return "{\"assumption\":\"" + json_escape(report.assumption_id) + "\"," +
         "\"passed\":" + (report.passed ? "true" : "false") + "," +
         "\"worst_margin\":" + json_number(report.worst_margin) + "," + "\"witness\":" + w + "," +
         "\"samples\":" + std::to_string(report.samples_used) + "," + "\"notes\":\"" +
         json_escape(report.notes) + "\"}";
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (count < 2 || lo <= 0.0 || hi <= lo) throw ConfigError("log_grid: bad range");
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = lo * std::exp(std::log(hi / lo) * i / (count - 1));
  return g;
}

}  // namespace uldp::checker
