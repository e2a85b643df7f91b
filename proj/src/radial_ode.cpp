#include "radstab/radial_ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "radstab/errors.hpp"
#include "radstab/format.hpp"

namespace radstab {

namespace {

void check_config(int N, const SolverConfig& cfg) {
  if (N < 3) throw DomainError("dimension N must be at least 3");
  if (!(cfg.rtol > 0.0 && cfg.atol > 0.0)) throw DomainError("tolerances must be positive");
  if (!(cfg.r_max > 0.0)) throw DomainError("r_max must be positive");
  if (!(cfg.event_tol > 0.0)) throw DomainError("event_tol must be positive");
}

ode::StepOptions step_options(const SolverConfig& cfg) {
  ode::StepOptions o;
  o.rtol = cfg.rtol;
  o.atol = cfg.atol;
  return o;
}

// Absolute tolerances in the natural units of the profile: u ~ alpha and
// u' ~ alpha / l with l = sqrt(alpha / f(alpha)), the radial adjustment
// applying below r = l.  Only ever tightens them, so small-alpha profiles that
// stay below the plain atol are still resolved.
ode::StepOptions step_options(const SolverConfig& cfg, const Reaction& f, double alpha) {
  ode::StepOptions o = step_options(cfg);
  if (!f.has_zero_event()) return o;
  const double fa = f.value(alpha);
  o.atol = cfg.atol * std::min(1.0, alpha);
  const double l = fa > 0.0 ? std::sqrt(alpha / fa) : 1.0;
  if (l > 1.0 && std::isfinite(l)) {
    o.atol_v_factor = 1.0 / l;
    o.radial_scale = l;
  }
  return o;
}

double event_width(const SolverConfig& cfg, double r) { return cfg.event_tol * std::max(1.0, r); }

// Sign change of g(y) inside the newest segment.
template <std::size_t M>
std::optional<double> newest_root(const ode::Trajectory<M>& t, double tol,
                                  double (*g)(const ode::Vec<M>&)) {
  const auto& n = t.nodes();
  const std::size_t i = n.size() - 2;
  const double g0 = g(t.interpolate(i, n[i].r).y), g1 = g(t.interpolate(i, n[i + 1].r).y);
  if (g1 == 0.0) return n[i + 1].r;
  if (g0 == 0.0 || (g0 > 0.0) == (g1 > 0.0)) return std::nullopt;
  return ode::bisect([&](double r) { return g(t.interpolate(i, r).y); }, n[i].r, n[i + 1].r,
                     tol);
}

}  // namespace

// ---------------------------------------------------------------------------
// Series start

double SeriesStart::value(double r) const {
  const double s = r * r;
  return c0 + s * (c2 + s * (c4 + s * c6));
}

double SeriesStart::deviation(double r) const {
  const double s = r * r;
  return s * (c2 + s * (c4 + s * c6));
}

double SeriesStart::slope(double r) const {
  const double s = r * r;
  return r * (2 * c2 + s * (4 * c4 + s * 6 * c6));
}

SeriesStart series_start(const Reaction& f, int N, double alpha) {
  const double f0 = f.value(alpha), f1 = f.derivative(alpha), f2 = f.second_derivative(alpha);
  SeriesStart s{alpha, 0, 0, 0};
  s.c2 = -f0 / (2.0 * N);
  s.c4 = -f1 * s.c2 / (4.0 * (N + 2));
  s.c6 = -(f1 * s.c4 + 0.5 * f2 * s.c2 * s.c2) / (6.0 * (N + 4));
  return s;
}

double start_radius(const Reaction& f, double alpha) {
  return std::min(1e-4, 1e-2 / std::sqrt(std::abs(f.derivative(alpha)) + 1.0));
}

// ---------------------------------------------------------------------------
// RadialProfile

RadialProfile::RadialProfile(int N, double alpha, SolverConfig cfg, ode::Trajectory<1> traj,
                             std::optional<double> first_zero)
    : N_(N), alpha_(alpha), cfg_(cfg), traj_(std::move(traj)), first_zero_(first_zero) {}

std::pair<double, double> RadialProfile::evaluate(double r) const {
  const auto p = traj_.at(r);
  return {p.y[0], p.v[0]};
}

double RadialProfile::second(double r) const { return traj_.at(r).a[0]; }

RadialProfile solve_ivp(const Reaction& f, int N, double alpha, const SolverConfig& cfg) {
  check_config(N, cfg);
  if (f.has_zero_event() && !(alpha > 0.0)) throw DomainError("solve_ivp: alpha must be positive");
  const SeriesStart s = series_start(f, N, alpha);
  const double r0 = std::min(start_radius(f, alpha), 0.5 * cfg.r_max);

  auto accel = [&f, N](double r, const ode::Vec<1>& y, const ode::Vec<1>& v) {
    return ode::Vec<1>{-(N - 1) / r * v[0] - f.value(y[0])};
  };

  const ode::Node<1> origin{0.0, {alpha}, {0.0}, {2.0 * s.c2}};
  ode::Node<1> start{r0, {alpha}, {s.slope(r0)}, {0.0}};
  ode::detail::two_sum(alpha, s.deviation(r0), start.y[0], start.ylo[0]);

  std::optional<double> zero;
  auto on_step = [&](const ode::Trajectory<1>& t) -> ode::Control {
    if (!f.has_zero_event()) return {};
    const double rr = t.r_end();
    auto root = newest_root<1>(t, event_width(cfg, rr), [](const ode::Vec<1>& y) { return y[0]; });
    if (!root) return {};
    zero = *root;
    return {true, *root};
  };
  auto tail = ode::integrate<1>(accel, start, cfg.r_max, r0, step_options(cfg, f, alpha), {false}, on_step);

  ode::Trajectory<1> traj;
  traj.push(origin);
  for (const auto& n : tail.nodes()) traj.push(n);
  return RadialProfile(N, alpha, cfg, std::move(traj), zero);
}

// ---------------------------------------------------------------------------
// Diagnostics

double scaled_residual(const Reaction& f, int N, double r, double u, double du, double ddu,
                       const SolverConfig& cfg) {
  const double damp = (N - 1) / r * du;
  const double src = f.value(u);
  const double scale =
      cfg.atol + cfg.rtol * std::max({std::abs(ddu), std::abs(damp), std::abs(src)});
  return std::abs(ddu + damp + src) / scale;
}

double max_midpoint_residual(const Reaction& f, const RadialProfile& profile, double r_from) {
  const auto& n = profile.trajectory().nodes();
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < n.size(); ++i) {
    const double r = 0.5 * (n[i].r + n[i + 1].r);
    if (r < r_from) continue;
    const auto p = profile.trajectory().interpolate(i, r);
    worst = std::max(worst,
                     scaled_residual(f, profile.N(), r, p.y[0], p.v[0], p.a[0], profile.config()));
  }
  return worst;
}

double verify_mass_identity(const RadialProfile& profile, const Reaction& f) {
  const auto& t = profile.trajectory();
  const auto& n = t.nodes();
  const int N = profile.N();
  double mass = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < n.size(); ++i) {
    auto integrand = [&](double s) {
      return std::pow(s, N - 1) * f.value(t.interpolate(i, s).y[0]);
    };
    mass += boost::math::quadrature::gauss<double, 10>::integrate(integrand, n[i].r, n[i + 1].r);
    const double r = n[i + 1].r;
    const double lhs = -n[i + 1].v[0] * std::pow(r, N - 1);
    const double scale = std::max(std::abs(lhs), std::abs(mass));
    if (scale > 0.0) worst = std::max(worst, std::abs(lhs - mass) / scale);
  }
  return worst;
}

double verify_F_lower_bound(const RadialProfile& profile, const NonlinearitySpec& spec) {
  if (profile.first_zero())
    throw PreconditionError("verify_F_lower_bound: profile has a finite first zero");
  const auto& t = profile.trajectory();
  const auto& n = t.nodes();
  const double twoN = 2.0 * profile.N();
  double margin = spec.tail(profile.alpha());
  auto check = [&](double r, double u) {
    if (!(u > 0.0)) throw PreconditionError("verify_F_lower_bound: profile not positive");
    margin = std::min(margin, spec.tail(u) - r * r / twoN);
  };
  for (std::size_t i = 0; i + 1 < n.size(); ++i) {
    check(n[i].r, t.at(n[i].r).y[0]);
    const double mid = 0.5 * (n[i].r + n[i + 1].r);
    check(mid, t.interpolate(i, mid).y[0]);
  }
  check(n.back().r, t.at(n.back().r).y[0]);
  return margin;
}

// ---------------------------------------------------------------------------
// Linearization

LinearizedProfile::LinearizedProfile(int N, double alpha, ode::Trajectory<2> traj,
                                     std::vector<double> zeros)
    : N_(N), alpha_(alpha), traj_(std::move(traj)), zeros_(std::move(zeros)) {}

std::pair<double, double> LinearizedProfile::evaluate(double r) const {
  const auto p = traj_.at(r);
  return {p.y[1], p.v[1]};
}

LinearizedProfile solve_linearized(const Reaction& f, const RadialProfile& base,
                                   const SolverConfig& cfg) {
  const int N = base.N();
  const double alpha = base.alpha();
  check_config(N, cfg);
  const SeriesStart s = series_start(f, N, alpha);
  const double f1 = f.derivative(alpha), f2 = f.second_derivative(alpha);
  const double b2 = -f1 / (2.0 * N);
  const double b4 = -(f1 * b2 + f2 * s.c2) / (4.0 * (N + 2));
  const double r_end = base.r_end();
  const double r0 = std::min(start_radius(f, alpha), 0.5 * r_end);

  auto accel = [&f, N](double r, const ode::Vec<2>& y, const ode::Vec<2>& v) {
    return ode::Vec<2>{-(N - 1) / r * v[0] - f.value(y[0]),
                       -(N - 1) / r * v[1] - f.derivative(y[0]) * y[1]};
  };
  const double q = r0 * r0;
  const ode::Node<2> origin{0.0, {alpha, 1.0}, {0.0, 0.0}, {2.0 * s.c2, 2.0 * b2}};
  ode::Node<2> start{r0, {}, {s.slope(r0), r0 * (2 * b2 + 4 * b4 * q)}, {}};
  ode::detail::two_sum(alpha, s.deviation(r0), start.y[0], start.ylo[0]);
  ode::detail::two_sum(1.0, q * (b2 + q * b4), start.y[1], start.ylo[1]);

  std::vector<double> zeros;
  auto on_step = [&](const ode::Trajectory<2>& t) -> ode::Control {
    auto root =
        newest_root<2>(t, event_width(cfg, t.r_end()), [](const ode::Vec<2>& y) { return y[1]; });
    if (root) zeros.push_back(*root);
    return {};
  };
  auto tail =
      ode::integrate<2>(accel, start, r_end, r0, step_options(cfg), {false, false}, on_step);

  ode::Trajectory<2> traj;
  traj.push(origin);
  for (const auto& n : tail.nodes()) traj.push(n);
  return LinearizedProfile(N, alpha, std::move(traj), std::move(zeros));
}

// ---------------------------------------------------------------------------
// Pairs

PairProfile::PairProfile(int N, double alpha, double beta, ode::Trajectory<2> traj,
                         std::vector<double> crossings, std::optional<double> zero_a,
                         std::optional<double> zero_b)
    : N_(N),
      alpha_(alpha),
      beta_(beta),
      traj_(std::move(traj)),
      crossings_(std::move(crossings)),
      zero_a_(zero_a),
      zero_b_(zero_b) {}

PairProfile::Values PairProfile::evaluate(double r) const {
  const auto p = traj_.at(r);
  return {p.y[0], p.y[0] + p.y[1], p.y[1]};
}

PairProfile solve_pair(const Reaction& f, int N, double alpha, double beta,
                       const SolverConfig& cfg) {
  check_config(N, cfg);
  if (alpha == beta) throw DomainError("solve_pair: identical initial values");
  if (f.has_zero_event() && !(alpha > 0.0 && beta > 0.0))
    throw DomainError("solve_pair: initial values must be positive");
  const SeriesStart sa = series_start(f, N, alpha);
  const SeriesStart sb = series_start(f, N, beta);
  const double d0 = beta - alpha;
  const double d2 = -f.difference(alpha, d0) / (2.0 * N);
  const double d4 = sb.c4 - sa.c4, d6 = sb.c6 - sa.c6;
  const double r0 =
      std::min({start_radius(f, alpha), start_radius(f, beta), 0.5 * cfg.r_max});
  const double q = r0 * r0;

  auto accel = [&f, N](double r, const ode::Vec<2>& y, const ode::Vec<2>& v) {
    return ode::Vec<2>{-(N - 1) / r * v[0] - f.value(y[0]),
                       -(N - 1) / r * v[1] - f.difference(y[0], y[1])};
  };
  const ode::Node<2> origin{0.0, {alpha, d0}, {0.0, 0.0}, {2.0 * sa.c2, 2.0 * d2}};
  ode::Node<2> start{r0, {}, {sa.slope(r0), r0 * (2 * d2 + q * (4 * d4 + q * 6 * d6))}, {}};
  ode::detail::two_sum(alpha, sa.deviation(r0), start.y[0], start.ylo[0]);
  ode::detail::two_sum(d0, q * (d2 + q * (d4 + q * d6)), start.y[1], start.ylo[1]);

  std::vector<double> crossings;
  std::optional<double> zero_a, zero_b;
  auto on_step = [&](const ode::Trajectory<2>& t) -> ode::Control {
    const double tol = event_width(cfg, t.r_end());
    std::optional<double> za, zb;
    if (f.has_zero_event()) {
      za = newest_root<2>(t, tol, [](const ode::Vec<2>& y) { return y[0]; });
      zb = newest_root<2>(t, tol, [](const ode::Vec<2>& y) { return y[0] + y[1]; });
    }
    const double stop = std::min(za.value_or(INFINITY), zb.value_or(INFINITY));
    auto zd = newest_root<2>(t, tol, [](const ode::Vec<2>& y) { return y[1]; });
    if (zd && *zd < stop) crossings.push_back(*zd);
    if (std::isfinite(stop)) {
      if (za && *za <= stop) zero_a = *za;
      if (zb && *zb <= stop) zero_b = *zb;
      return {true, stop};
    }
    return {};
  };
  auto tail =
      ode::integrate<2>(accel, start, cfg.r_max, r0, step_options(cfg, f, std::min(alpha, beta)),
                        {false, true}, on_step);

  ode::Trajectory<2> traj;
  traj.push(origin);
  for (const auto& n : tail.nodes()) traj.push(n);
  return PairProfile(N, alpha, beta, std::move(traj), std::move(crossings), zero_a, zero_b);
}

// ---------------------------------------------------------------------------
// Export

std::string profile_csv(const RadialProfile& profile) {
  std::string out = "r,u,du\n";
  for (const auto& n : profile.trajectory().nodes())
    out += fmt17(n.r) + "," + fmt17(n.y[0] + n.ylo[0]) + "," + fmt17(n.v[0] + n.vlo[0]) + "\n";
  return out;
}

std::string linearized_csv(const LinearizedProfile& profile) {
  std::string out = "r,phi,dphi\n";
  for (const auto& n : profile.trajectory().nodes())
    out += fmt17(n.r) + "," + fmt17(n.y[1] + n.ylo[1]) + "," + fmt17(n.v[1] + n.vlo[1]) + "\n";
  return out;
}

nlohmann::json profile_json(const RadialProfile& profile) {
  nlohmann::json j;
  j["N"] = profile.N();
  j["alpha"] = profile.alpha();
  j["rtol"] = profile.config().rtol;
  j["atol"] = profile.config().atol;
  j["r_max"] = profile.config().r_max;
  j["r_end"] = profile.r_end();
  j["first_zero"] = profile.first_zero() ? nlohmann::json(*profile.first_zero()) : nlohmann::json();
  j["nodes"] = profile.trajectory().nodes().size();
  return j;
}

}  // namespace radstab
