#include "radstab/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "radstab/errors.hpp"
#include "radstab/parallel.hpp"

namespace radstab {

// ---------------------------------------------------------------------------
// ScalingModel

ScalingModel ScalingModel::power(double p) {
  if (!(p > 1.0)) throw DomainError("power model: p must exceed 1");
  return ScalingModel(Kind::Power, p);
}

ScalingModel ScalingModel::exponential() { return ScalingModel(Kind::Exponential, INFINITY); }

ScalingModel ScalingModel::from_q(double q) {
  if (q == 1.0) return exponential();
  if (!(q > 1.0)) throw DomainError("model exponent q must be at least 1");
  return power(q / (q - 1.0));
}

double ScalingModel::q() const noexcept { return kind_ == Kind::Power ? p_ / (p_ - 1.0) : 1.0; }

std::string ScalingModel::describe() const {
  if (kind_ == Kind::Exponential) return "e^v";
  std::ostringstream os;
  os.precision(17);
  os << "v^" << p_;
  return os.str();
}

double ScalingModel::value(double v) const {
  if (kind_ == Kind::Exponential) return std::exp(v);
  return v < 0.0 ? -std::pow(-v, p_) : std::pow(v, p_);
}

double ScalingModel::derivative(double v) const {
  if (kind_ == Kind::Exponential) return std::exp(v);
  return p_ * std::pow(std::abs(v), p_ - 1.0);
}

double ScalingModel::second_derivative(double v) const {
  if (kind_ == Kind::Exponential) return std::exp(v);
  const double s = p_ * (p_ - 1.0) * std::pow(std::abs(v), p_ - 2.0);
  return v < 0.0 ? -s : s;
}

double ScalingModel::difference(double v, double d) const {
  if (kind_ == Kind::Exponential) return std::exp(v) * std::expm1(d);
  if (v > 0.0 && v + d > 0.0) return std::pow(v, p_) * std::expm1(p_ * std::log1p(d / v));
  return Reaction::difference(v, d);
}

bool ScalingModel::in_domain(double v) const noexcept {
  return kind_ == Kind::Exponential ? std::isfinite(v) : (v > 0.0 && std::isfinite(v));
}

double ScalingModel::G(double v) const {
  if (!in_domain(v)) throw DomainError("G: argument outside the model domain");
  if (kind_ == Kind::Exponential) return std::exp(-v);
  return std::pow(v, 1.0 - p_) / (p_ - 1.0);
}

double ScalingModel::G_inv(double x) const {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("G^{-1}: argument must be positive");
  if (kind_ == Kind::Exponential) return -std::log(x);
  return std::pow((p_ - 1.0) * x, -1.0 / (p_ - 1.0));
}

// ---------------------------------------------------------------------------
// Samples and transforms

SampledProfile sample(const RadialProfile& profile) {
  SampledProfile s;
  for (const auto& n : profile.trajectory().nodes()) {
    s.r.push_back(n.r);
    s.u.push_back(n.y[0] + n.ylo[0]);
    s.du.push_back(n.v[0] + n.vlo[0]);
    s.ddu.push_back(n.a[0]);
  }
  return s;
}

SampledProfile sample(const RadialProfile& profile, const std::vector<double>& radii) {
  SampledProfile s;
  for (double r : radii) {
    const auto p = profile.trajectory().at(r);
    s.r.push_back(r);
    s.u.push_back(p.y[0]);
    s.du.push_back(p.v[0]);
    s.ddu.push_back(p.a[0]);
  }
  return s;
}

SampledProfile push_forward(const NonlinearitySpec& spec, const SampledProfile& u,
                            const ScalingModel& model, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("push_forward: lambda must be positive");
  SampledProfile v;
  const double l2 = lambda * lambda;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = u.u[i];
    if (!(x >= spec.domain_floor())) throw DomainError("push_forward: u must be positive");
    const double f = spec.value(x), f1 = spec.derivative(x);
    const double vi = model.G_inv(spec.tail(x) / l2);
    const double g = model.value(vi), g1 = model.derivative(vi);
    const double dv = g * u.du[i] / (lambda * f);
    const double ddv =
        g1 * dv * u.du[i] / (lambda * f) + g * u.ddu[i] / f - g * f1 * u.du[i] * u.du[i] / (f * f);
    v.r.push_back(u.r[i] / lambda);
    v.u.push_back(vi);
    v.du.push_back(dv);
    v.ddu.push_back(ddv);
  }
  return v;
}

SampledProfile pull_back(const NonlinearitySpec& spec, const SampledProfile& v,
                         const ScalingModel& model, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("pull_back: lambda must be positive");
  SampledProfile u;
  const double l2 = lambda * lambda;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double y = v.u[i];
    const double g = model.value(y), g1 = model.derivative(y);
    const double ui = invert_F(spec, l2 * model.G(y));
    const double f = spec.value(ui), f1 = spec.derivative(ui);
    const double du = lambda * f * v.du[i] / g;
    const double ddu =
        lambda * f1 * du * v.du[i] / g + f * v.ddu[i] / g - f * g1 * v.du[i] * v.du[i] / (g * g);
    u.r.push_back(lambda * v.r[i]);
    u.u.push_back(ui);
    u.du.push_back(du);
    u.ddu.push_back(ddu);
  }
  return u;
}

double transform_invariant_defect(const NonlinearitySpec& spec, const SampledProfile& u,
                                  const ScalingModel& model, const SampledProfile& v) {
  if (u.size() != v.size()) throw DomainError("transform_invariant_defect: sample counts differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double f = spec.value(u.u[i]), g = model.value(v.u[i]);
    const double a = u.du[i] * u.du[i] / (f * f * spec.tail(u.u[i]));
    const double b = v.du[i] * v.du[i] / (g * g * model.G(v.u[i]));
    const double scale = std::max(a, b);
    if (scale > 0.0) worst = std::max(worst, std::abs(a - b) / scale);
  }
  return worst;
}

double perturbed_model_defect(const NonlinearitySpec& spec, int N, const SampledProfile& u,
                              const ScalingModel& model, const SampledProfile& v) {
  if (u.size() != v.size()) throw DomainError("perturbed_model_defect: sample counts differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v.r[i] > 0.0)) continue;
    const double g = model.value(v.u[i]);
    const double extra = (q_of(spec, u.u[i]) - model.q()) * v.du[i] * v.du[i] /
                         (g * model.G(v.u[i]));
    const double damp = (N - 1) / v.r[i] * v.du[i];
    const double scale = std::max({std::abs(v.ddu[i]), std::abs(damp), std::abs(g), std::abs(extra)});
    worst = std::max(worst, std::abs(v.ddu[i] + damp + g + extra) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Model references

double ModelReference::value(double r) const {
  if (kind_ == ScalingModel::Kind::Exponential) return -2.0 * std::log(r) + level_;
  return level_ * std::pow(r, -2.0 / (p_ - 1.0));
}

double ModelReference::slope(double r) const {
  if (kind_ == ScalingModel::Kind::Exponential) return -2.0 / r;
  const double m = 2.0 / (p_ - 1.0);
  return -m * level_ * std::pow(r, -m - 1.0);
}

double ModelReference::second(double r) const {
  if (kind_ == ScalingModel::Kind::Exponential) return 2.0 / (r * r);
  const double m = 2.0 / (p_ - 1.0);
  return m * (m + 1.0) * level_ * std::pow(r, -m - 2.0);
}

ModelReference singular_power_reference(double p, int N) {
  if (!(p > 1.0)) throw DomainError("singular_power_reference: p must exceed 1");
  const double m = 2.0 / (p - 1.0);
  const double base = m * (N - 2.0 - m);
  if (!(base > 0.0)) throw DomainError("singular_power_reference: need N - 2 - 2/(p-1) > 0");
  return ModelReference(ScalingModel::Kind::Power, N, p, std::pow(base, 1.0 / (p - 1.0)));
}

ModelReference model_reference(const ScalingModel& model, int N) {
  if (model.kind() == ScalingModel::Kind::Exponential) {
    if (N < 10) throw DomainError("model_reference: the exponential bound needs N >= 10");
    return ModelReference(ScalingModel::Kind::Exponential, N, INFINITY, std::log(2.0 * N - 4.0));
  }
  const auto e = critical_exponents(N);
  if (!e.p_JL || model.p() < *e.p_JL * (1.0 - 1e-12)) {
    std::ostringstream os;
    os.precision(17);
    os << "model_reference: need N >= 11 and p >= p_JL (N = " << N << ", p = " << model.p() << ")";
    throw DomainError(os.str());
  }
  return singular_power_reference(model.p(), N);
}

// ---------------------------------------------------------------------------
// Model bounds

namespace {

struct GapSample {
  double r;
  double gap;  // (W - w)/W for the power model, Z - w for the exponential model
};

// Gap samples along the regular model solution w(., sigma) on (0, r_max].
std::vector<GapSample> model_gaps(const ScalingModel& model, const ModelReference& ref, int N,
                                  double sigma, const SolverConfig& cfg) {
  const bool power = model.kind() == ScalingModel::Kind::Power;
  const double m = power ? 2.0 / (model.p() - 1.0) : 0.0;
  const double L = ref.level();

  // Matching radius: W(r1) = 10 sigma, resp. Z(r1) = sigma + 2.
  double r1 = power ? std::pow(L / (10.0 * sigma), 1.0 / m)
                    : std::sqrt((2.0 * N - 4.0) * std::exp(-sigma - 2.0));
  r1 = std::min(r1, cfg.r_max);

  SolverConfig inner = cfg;
  inner.r_max = r1;
  const RadialProfile w = solve_ivp(model, N, sigma, inner);
  if (w.first_zero()) throw ConsistencyError("model solution vanished before the matching radius");

  std::vector<GapSample> out;
  auto direct = [&](double r, double wr) {
    return power ? -std::expm1(std::log(wr) + m * std::log(r) - std::log(L)) : ref.value(r) - wr;
  };
  const auto& tw = w.trajectory();
  const auto& nodes = tw.nodes();
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double mid = 0.5 * (nodes[i].r + nodes[i + 1].r);
    if (nodes[i].r > 0.0) out.push_back({nodes[i].r, direct(nodes[i].r, tw.at(nodes[i].r).y[0])});
    out.push_back({mid, direct(mid, tw.interpolate(i, mid).y[0])});
  }
  if (!(r1 < cfg.r_max)) {
    out.push_back({r1, direct(r1, tw.at(r1).y[0])});
    return out;
  }

  // Emden-Fowler variables, t = log r.
  const auto [w1, dw1] = w.evaluate(r1);
  double eta0, deta0;
  ode::StepOptions opt;
  opt.rtol = cfg.rtol;
  opt.atol = 1e-300;
  opt.radial = false;
  std::vector<GapSample> tail;
  auto record = [&](const ode::Trajectory<1>& t) -> ode::Control {
    const auto& n = t.nodes();
    const std::size_t i = n.size() - 2;
    const double mid = 0.5 * (n[i].r + n[i + 1].r);
    const double scale = power ? 1.0 / L : 1.0;
    tail.push_back({std::exp(mid), t.interpolate(i, mid).y[0] * scale});
    tail.push_back({std::exp(n[i + 1].r), (n[i + 1].y[0] + n[i + 1].ylo[0]) * scale});
    return {};
  };
  const double t1 = std::log(r1), t2 = std::log(cfg.r_max);
  if (power) {
    // y = r^m w solves y'' + a y' - b y + y^p = 0 with b = L^{p-1}; eta = L - y.
    const double p = model.p();
    const double a = N - 2.0 - 2.0 * m, b = m * (N - 2.0 - m);
    const double Lp = std::pow(L, p);
    const double rm = std::pow(r1, m);
    eta0 = L - rm * w1;
    deta0 = -rm * (m * w1 + r1 * dw1);
    auto accel = [=](double, const ode::Vec<1>& e, const ode::Vec<1>& de) {
      return ode::Vec<1>{-a * de[0] + b * e[0] + Lp * std::expm1(p * std::log1p(-e[0] / L))};
    };
    ode::integrate<1>(accel, ode::Node<1>{t1, {eta0}, {deta0}, {}}, t2, 1e-3, opt, {true}, record);
  } else {
    // y = w + 2 log r solves y'' + (N-2) y' - 2(N-2) + e^y = 0; eta = Z - w.
    const double c = N - 2.0;
    eta0 = ref.value(r1) - w1;
    deta0 = -2.0 - r1 * dw1;
    auto accel = [=](double, const ode::Vec<1>& e, const ode::Vec<1>& de) {
      return ode::Vec<1>{-c * de[0] + 2.0 * c * std::expm1(-e[0])};
    };
    ode::integrate<1>(accel, ode::Node<1>{t1, {eta0}, {deta0}, {}}, t2, 1e-3, opt, {true}, record);
  }
  out.push_back({r1, power ? eta0 / L : eta0});
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

}  // namespace

ModelBoundReport verify_model_bounds(const ScalingModel& model, int N,
                                     const std::vector<double>& sigma_grid,
                                     const SolverConfig& cfg) {
  const ModelReference ref = model_reference(model, N);
  const bool power = model.kind() == ScalingModel::Kind::Power;
  ModelBoundReport rep{N, model.describe(), {}, true};
  for (double sigma : sigma_grid) {
    if (!model.in_domain(sigma)) throw DomainError("verify_model_bounds: sigma outside the domain");
    const auto gaps = model_gaps(model, ref, N, sigma, cfg);
    ModelBoundRow row{sigma, INFINITY, 0.0, INFINITY, 0.0, true};
    for (const auto& g : gaps) {
      // G(w)/G(W) - 1, with G(W) = r^2/(2N - 4q) exactly.
      const double lower =
          power ? std::expm1((1.0 - model.p()) * std::log1p(-g.gap)) : std::expm1(g.gap);
      if (g.gap < row.reference_margin) {
        row.reference_margin = g.gap;
        row.reference_margin_at = g.r;
      }
      if (lower < row.lower_bound_margin) {
        row.lower_bound_margin = lower;
        row.lower_bound_margin_at = g.r;
      }
    }
    row.pass = row.reference_margin > 0.0 && row.lower_bound_margin > 0.0;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Convergence studies

double beta_of_alpha(const NonlinearitySpec& spec, const ScalingModel& model, double sigma,
                     double alpha) {
  if (!(alpha > 0.0)) throw DomainError("beta_of_alpha: alpha must be positive");
  if (sigma == 1.0) return alpha;
  return invert_F(spec, eval_F(spec, alpha) * model.G(sigma) / model.G(1.0));
}

double lambda_of_alpha(const NonlinearitySpec& spec, const ScalingModel& model, double alpha) {
  return std::sqrt(eval_F(spec, alpha) / model.G(1.0));
}

bool ConvergenceStudy::strictly_decreasing() const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].sup_error < rows[i - 1].sup_error)) return false;
  return true;
}

ConvergenceStudy convergence_study(const NonlinearitySpec& spec, int N, const ScalingModel& model,
                                   double sigma, const std::vector<double>& alphas, double S,
                                   const SolverConfig& cfg, const ConvergenceOptions& opts) {
  if (opts.grid_points < 2) throw DomainError("convergence_study: need at least two grid points");
  const RadialProfile z = solve_ivp(model, N, sigma, cfg);
  ConvergenceStudy study;
  study.sigma = sigma;
  study.s0 = z.first_zero();
  if (!(S > 0.0)) S = study.s0 ? 0.5 * *study.s0 : opts.S_default;
  if (study.s0 && S >= *study.s0)
    throw PreconditionError("convergence_study: S must lie below the first zero of z(., sigma)");
  if (S > z.r_end()) throw PreconditionError("convergence_study: S exceeds the solved range");
  study.S = S;

  std::vector<double> grid(opts.grid_points);
  for (int i = 0; i < opts.grid_points; ++i) grid[i] = S * i / (opts.grid_points - 1);
  std::vector<double> zs(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) zs[i] = z.evaluate(grid[i]).first;

  study.rows.resize(alphas.size());
  parallel_for(alphas.size(), opts.threads, [&](std::size_t k) {
    const double alpha = alphas[k];
    const double beta = beta_of_alpha(spec, model, sigma, alpha);
    const double lambda = lambda_of_alpha(spec, model, alpha);
    SolverConfig c = cfg;
    c.r_max = 1.01 * lambda * S;
    const RadialProfile u = solve_ivp(spec, N, beta, c);
    if (u.first_zero())
      throw PreconditionError("convergence_study: u(., beta) vanishes inside [0, lambda S]");
    double err = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double ui = u.evaluate(lambda * grid[i]).first;
      const double vi = model.G_inv(spec.tail(ui) / (lambda * lambda));
      err = std::max(err, std::abs(vi - zs[i]));
    }
    study.rows[k] = {alpha, beta, lambda, err};
  });
  return study;
}

std::vector<double> model_intersections(const ScalingModel& model, int N, double sigma1,
                                        double sigma2, double r_max, const SolverConfig& cfg) {
  if (!(sigma1 > sigma2)) throw DomainError("model_intersections: need sigma1 > sigma2");
  if (model.kind() == ScalingModel::Kind::Power && !(sigma2 > 0.0))
    throw DomainError("model_intersections: initial values must be positive");
  SolverConfig c = cfg;
  c.r_max = r_max;
  return solve_pair(model, N, sigma1, sigma2, c).crossings();
}

int count_model_intersections(const ScalingModel& model, int N, double sigma1, double sigma2,
                              double r_max, const SolverConfig& cfg) {
  return static_cast<int>(model_intersections(model, N, sigma1, sigma2, r_max, cfg).size());
}

}  // namespace radstab
