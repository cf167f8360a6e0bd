#include "uldp/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace uldp {

Control make_control(Mat values, double horizon) {
  if (horizon <= 0.0) throw ConfigError("control horizon must be positive");
  if (values.cols() < 1) throw ConfigError("control needs at least one cell");
  Control h;
  h.horizon = horizon;
  h.values = std::move(values);
  const double dt = h.horizon / h.n_cells();
  double sum = 0.0;
  for (int k = 0; k < h.n_cells(); ++k) sum += h.values.col(k).squaredNorm() * dt;
  h.squared_norm = sum;
  return h;
}

Control zero_control(int dim_noise, int n_cells, double horizon) {
  return make_control(Mat::Zero(dim_noise, n_cells), horizon);
}

Control constant_control(const Vec& value, int n_cells, double horizon) {
  Mat v(value.size(), n_cells);
  v.colwise() = value;
  return make_control(std::move(v), horizon);
}

Control refine_control(const Control& h, int factor) {
  if (factor < 1) throw ConfigError("refinement factor must be >= 1");
  Mat v(h.dim(), h.n_cells() * factor);
  for (int k = 0; k < h.n_cells(); ++k)
    for (int j = 0; j < factor; ++j) v.col(k * factor + j) = h.values.col(k);
  return make_control(std::move(v), h.horizon);
}

std::pair<Vec, Mat> eval_field(const CoefficientField& field, double t, const Vec& x) {
  if (t < 0.0 || t > field.horizon)
    throw EvaluationError("time outside [0,T]", t, x);
  if (x.size() != field.dim_state)
    throw ConfigError("state dimension mismatch in eval_field");
  if (!all_finite(x)) throw EvaluationError("non-finite state", t, x);
  Vec b = field.drift(t, x);
  Mat s = field.diffusion(t, x);
  if (s.rows() != field.dim_state || s.cols() != field.dim_noise)
    throw ConfigError("diffusion shape mismatch for field '" + field.name + "'");
  if (!all_finite(b) || !all_finite(s))
    throw EvaluationError("non-finite coefficient value", t, x);
  return {std::move(b), std::move(s)};
}

ModulusFunction modulus_identity() {
  return {"identity", 0.0, 1.0, [](double s) { return s; }};
}

ModulusFunction modulus_xlog(double R, double domain_hi) {
  // R*s*log(1/s) extended by continuity with value 0 at s=0; increasing
  // up to 1/e, so the domain is capped there.
  const double hi = std::min(domain_hi, std::exp(-1.0));
  return {"xlog", 0.0, hi, [R](double s) { return s <= 0.0 ? 0.0 : R * s * std::log(1.0 / s); }};
}

ModulusFunction gamma_identity() {
  return {"identity", 0.0, std::numeric_limits<double>::infinity(), [](double s) { return s; }};
}

ModulusFunction gamma_slog_monotone() {
  return {"slog-monotone", 0.0, std::numeric_limits<double>::infinity(),
          [](double s) { return s * std::log1p(s) + s; }};
}

ModulusFunction gamma_slog_literal() {
  return {"slog-literal", 0.0, std::numeric_limits<double>::infinity(),
          [](double s) { return s <= 0.0 ? 1.0 : s * std::log(s) + 1.0; }};
}

ModulusFunction gamma_square() {
  return {"square", 0.0, std::numeric_limits<double>::infinity(),
          [](double s) { return s * s; }};
}

ModulusFunction gamma_by_label(const std::string& label) {
  if (label == "identity") return gamma_identity();
  if (label == "slog-monotone") return gamma_slog_monotone();
  if (label == "slog-literal") return gamma_slog_literal();
  if (label == "square") return gamma_square();
  throw ConfigError("unknown gamma label '" + label + "'");
}

namespace {

ScalarFn const_weight(double c) {
  return [c](double) { return c; };
}

LyapunovSpec quadratic_lyapunov(double sigma0, int dim, const std::string& gamma_label) {
  LyapunovSpec spec;
  spec.V = [](const Vec& x) { return x.squaredNorm(); };
  spec.gradV = [](const Vec& x) { return Vec(2.0 * x); };
  spec.hessV = [dim](const Vec&) { return Mat(2.0 * Mat::Identity(dim, dim)); };
  spec.theta = 1.0;
  spec.eta = 1.0;
  spec.bigM = 1.0;
  spec.bigK = 1.0;
  // <b, gradV> <= 0, so f only has to absorb the trace and quotient terms.
  spec.f_weight = const_weight(sigma0 * sigma0 * (dim + 4.0) + 1.0);
  spec.g_weight = const_weight(1.0);
  spec.l_weight = const_weight(1.0);
  spec.gamma = gamma_by_label(gamma_label);
  spec.eta_R = [](double) { return modulus_identity(); };
  spec.eps0 = 0.5;
  return spec;
}

}  // namespace

std::pair<CoefficientField, LyapunovSpec> make_brownian_system(double sigma0, int dim) {
  if (sigma0 <= 0.0) throw ConfigError("brownian: sigma0 must be positive");
  if (dim < 1) throw ConfigError("brownian: dim must be >= 1");
  CoefficientField f;
  f.dim_state = f.dim_noise = dim;
  f.name = "brownian";
  f.drift = [dim](double, const Vec&) { return Vec(Vec::Zero(dim)); };
  f.diffusion = [sigma0, dim](double, const Vec&) { return Mat(sigma0 * Mat::Identity(dim, dim)); };
  f.drift_jac = [dim](double, const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  f.diffusion_jac_apply = [dim](double, const Vec&, const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  return {std::move(f), quadratic_lyapunov(sigma0, dim, "identity")};
}

std::pair<CoefficientField, LyapunovSpec> make_ou_system(double a, double sigma0, int dim) {
  if (a < 0.0) throw ConfigError("ou: a must be nonnegative");
  if (sigma0 <= 0.0) throw ConfigError("ou: sigma0 must be positive");
  if (dim < 1) throw ConfigError("ou: dim must be >= 1");
  CoefficientField f;
  f.dim_state = f.dim_noise = dim;
  f.name = "ou";
  f.drift = [a](double, const Vec& x) { return Vec(-a * x); };
  f.diffusion = [sigma0, dim](double, const Vec&) { return Mat(sigma0 * Mat::Identity(dim, dim)); };
  f.drift_jac = [a, dim](double, const Vec&) { return Mat(-a * Mat::Identity(dim, dim)); };
  f.diffusion_jac_apply = [dim](double, const Vec&, const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  return {std::move(f), quadratic_lyapunov(sigma0, dim, "identity")};
}

double hamiltonian_energy(const Vec& x) {
  return 0.5 * sq(x[1]) + 0.25 * sq(sq(x[0])) - 0.5 * sq(x[0]);
}

namespace {

Vec dw_gradH(const Vec& x) {
  Vec g(2);
  g[0] = x[0] * x[0] * x[0] - x[0];
  g[1] = x[1];
  return g;
}

Mat dw_sigma_default(const Vec& x) {
  Mat s = Mat::Zero(2, 2);
  s(0, 0) = x[0] * x[0];
  s(1, 1) = std::cbrt(x[1] * x[1]);  // |x2|^{2/3}
  return s;
}

Mat dw_sigma_lipschitz(const Vec& x) {
  Mat s = Mat::Zero(2, 2);
  s(0, 0) = x[0] * x[0];
  s(1, 1) = std::cbrt(x[1] * x[1] + 1.0);
  return s;
}

}  // namespace

std::pair<CoefficientField, LyapunovSpec> make_hamiltonian_system(double F0,
                                                                  const HamiltonianOptions& opts) {
  if (F0 <= 1.0) throw ConfigError("hamiltonian-dw: F0 must exceed 1");
  const bool lipschitz = opts.sigma_choice == "lipschitz";
  if (!lipschitz && opts.sigma_choice != "default")
    throw ConfigError("hamiltonian-dw: unknown sigma_choice '" + opts.sigma_choice + "'");
  // Both choices satisfy ||sigma(x)||^2 <= c1*(x1^4 + |x2|^{4/3} + 1) with c1 = 1.
  const double c1 = 1.0;

  CoefficientField f;
  f.dim_state = f.dim_noise = 2;
  f.name = "hamiltonian-dw";
  f.drift = [F0](double, const Vec& x) {
    const Vec g = dw_gradH(x);
    Vec b(2);
    b[0] = g[1] - F0 * g[0];   // dH/dx2 - F0 * dH/dx1
    b[1] = -g[0] - F0 * g[1];  // -dH/dx1 - F0 * dH/dx2
    return b;
  };
  f.diffusion = lipschitz ? DiffusionFn([](double, const Vec& x) { return dw_sigma_lipschitz(x); })
                          : DiffusionFn([](double, const Vec& x) { return dw_sigma_default(x); });
  f.drift_jac = [F0](double, const Vec& x) {
    const double q = 3.0 * x[0] * x[0] - 1.0;
    Mat j(2, 2);
    j(0, 0) = -F0 * q;
    j(0, 1) = 1.0;
    j(1, 0) = -q;
    j(1, 1) = -F0;
    return j;
  };
  f.diffusion_jac_apply = [lipschitz](double, const Vec& x, const Vec& h) {
    Mat j = Mat::Zero(2, 2);
    j(0, 0) = 2.0 * x[0] * h[0];
    if (lipschitz) {
      const double w = x[1] * x[1] + 1.0;
      j(1, 1) = (2.0 / 3.0) * x[1] * std::pow(w, -2.0 / 3.0) * h[1];
    } else if (x[1] != 0.0) {
      // |x2|^{2/3} is not differentiable at 0; use 0 there (subgradient).
      j(1, 1) = (2.0 / 3.0) * (x[1] > 0 ? 1.0 : -1.0) * std::pow(std::abs(x[1]), -1.0 / 3.0) * h[1];
    }
    return j;
  };

  LyapunovSpec spec;
  spec.V = [](const Vec& x) { return hamiltonian_energy(x) + 0.25; };
  spec.gradV = [](const Vec& x) { return dw_gradH(x); };
  spec.hessV = [](const Vec& x) {
    Mat h = Mat::Zero(2, 2);
    h(0, 0) = 3.0 * x[0] * x[0] - 1.0;
    h(1, 1) = 1.0;
    return h;
  };
  spec.bigM = 4.0 * c1;
  spec.bigK = 8.0 * c1;
  spec.gamma = gamma_by_label(opts.gamma_label);
  spec.eps0 = 0.3;
  spec.eta_R = [eps0 = spec.eps0](double R) { return modulus_xlog(std::max(R, 1.0), eps0 * eps0); };
  spec.f_weight = const_weight(2.0);
  spec.g_weight = const_weight(16.0);
  spec.l_weight = const_weight(1.0);

  // theta = 1/d1 and eta = 2*d2 where d1, d2 dominate
  //   Trace(sigma^T hessV sigma) <= d1 (|gradH|^2 + 1)
  //   |sigma^T gradV|^2 / V      <= d2 (|gradH|^2 + 1)
  // on the estimation square; estimated by grid maximization with headroom.
  const DiffusionFn& sig = f.diffusion;
  double d1 = 0.0, d2 = 0.0;
  const int np = std::max(opts.estimation_points, 3);
  const double hw = opts.estimation_halfwidth;
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < np; ++j) {
      Vec x(2);
      x[0] = -hw + 2.0 * hw * i / (np - 1);
      x[1] = -hw + 2.0 * hw * j / (np - 1);
      const Mat s = sig(0.0, x);
      const Vec g = dw_gradH(x);
      const double denom = g.squaredNorm() + 1.0;
      const Mat hess = spec.hessV(x);
      const double trace = (s.transpose() * hess * s).trace();
      d1 = std::max(d1, trace / denom);
      const double v = spec.V(x);
      if (v > 1e-8) d2 = std::max(d2, (s.transpose() * g).squaredNorm() / (v * denom));
    }
  }
  d1 = 1.05 * std::max(d1, 1e-6);
  d2 = 1.05 * std::max(d2, 1e-6);
  spec.theta = 1.0 / d1;
  spec.eta = 2.0 * d2;

  return {std::move(f), std::move(spec)};
}

}  // namespace uldp
