#include "radstab/singular.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "radstab/errors.hpp"
#include "radstab/parallel.hpp"

namespace radstab {

namespace {

std::string num(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

}  // namespace

SingularProfile approximate_singular(const NonlinearitySpec& spec, int N,
                                     const std::vector<double>& alpha_ladder,
                                     const SolverConfig& cfg, const SingularOptions& opts) {
  if (!opts.override_structure && opts.structure != StructureType::II) {
    throw PreconditionError(
        "approximate_singular: the increasing limit is a singular solution only under type II "
        "(structure " +
        (opts.structure ? to_string(*opts.structure) : std::string("unknown")) + ")");
  }
  if (alpha_ladder.size() < 2) throw DomainError("approximate_singular: ladder needs two members");
  for (std::size_t k = 0; k < alpha_ladder.size(); ++k) {
    if (!(alpha_ladder[k] > 0.0) || (k > 0 && !(alpha_ladder[k] > alpha_ladder[k - 1])))
      throw DomainError("approximate_singular: ladder must be positive and increasing");
  }
  if (!(opts.r_min > 0.0 && opts.r_min < cfg.r_max))
    throw DomainError("approximate_singular: need 0 < r_min < r_max");

  SingularProfile out;
  out.N = N;
  out.ladder = alpha_ladder;
  out.r = log_grid(opts.r_min, cfg.r_max, opts.points_per_decade);
  const std::size_t K = alpha_ladder.size(), M = out.r.size();
  out.members.assign(K, std::vector<double>(M));
  out.increments.assign(K - 1, std::vector<double>(M));
  out.defects.assign(K - 1, 0.0);

  // Tasks 0..K-1 solve members; tasks K..2K-2 solve consecutive pairs.
  std::optional<RadialProfile> top;
  parallel_for(2 * K - 1, opts.threads, [&](std::size_t task) {
    if (task < K) {
      RadialProfile p = solve_ivp(spec, N, alpha_ladder[task], cfg);
      if (p.first_zero()) {
        throw ConsistencyError("u(., " + num(alpha_ladder[task]) + ") vanishes at r = " +
                               num(*p.first_zero()) + "; the family is not of type II");
      }
      for (std::size_t i = 0; i < M; ++i) out.members[task][i] = p.evaluate(out.r[i]).first;
      if (task == K - 1) top.emplace(std::move(p));
      return;
    }
    const std::size_t k = task - K;
    const PairProfile pair = solve_pair(spec, N, alpha_ladder[k + 1], alpha_ladder[k], cfg);
    if (!pair.crossings().empty()) {
      throw ConsistencyError("u(., " + num(alpha_ladder[k]) + ") crosses u(., " +
                             num(alpha_ladder[k + 1]) + ") at r = " +
                             num(pair.crossings().front()) +
                             "; the ladder is not increasing, reclassify the structure");
    }
    if (pair.zero_a() || pair.zero_b()) {
      throw ConsistencyError("a ladder member vanishes at r = " +
                             num(std::min(pair.zero_a().value_or(INFINITY),
                                          pair.zero_b().value_or(INFINITY))));
    }
    for (std::size_t i = 0; i < M; ++i) out.increments[k][i] = -pair.evaluate(out.r[i]).d;
  });

  out.min_increment = INFINITY;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    for (std::size_t i = 0; i < M; ++i) {
      const double inc = out.increments[k][i];
      out.min_increment = std::min(out.min_increment, inc);
      if (inc < -cfg.event_tol) {
        throw ConsistencyError("u(., " + num(alpha_ladder[k + 1]) + ") < u(., " +
                               num(alpha_ladder[k]) + ") at r = " + num(out.r[i]));
      }
      out.defects[k] = std::max(out.defects[k], std::abs(inc) / out.members[k + 1][i]);
    }
  }
  out.error_estimate = out.defects.back();

  out.u = out.members.back();
  out.du.resize(M);
  for (std::size_t i = 0; i < M; ++i) out.du[i] = top->evaluate(out.r[i]).second;

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < M && out.r[i] <= 10.0 * opts.r_min * (1 + 1e-12); ++i) {
    lx.push_back(std::log(out.r[i]));
    ly.push_back(std::log(out.u[i]));
  }
  out.decay_exponent = ls_slope(lx, ly);
  out.residual_max = max_midpoint_residual(spec, *top, 2.0 * opts.r_min);

  out.F_lower_margin = INFINITY;
  for (std::size_t i = 0; i < M; ++i) {
    const double bound = out.r[i] * out.r[i] / (2.0 * N);
    out.F_lower_margin = std::min(out.F_lower_margin, (eval_F(spec, out.u[i]) - bound) / bound);
  }
  return out;
}

std::vector<double> reference_distances(const SingularProfile& profile,
                                        const std::function<double(double)>& ref, double lo,
                                        double hi) {
  std::vector<double> out(profile.members.size(), 0.0);
  for (std::size_t k = 0; k < profile.members.size(); ++k) {
    for (std::size_t i = 0; i < profile.r.size(); ++i) {
      const double r = profile.r[i];
      if (r < lo * (1 - 1e-12) || r > hi * (1 + 1e-12)) continue;
      const double w = ref(r);
      out[k] = std::max(out[k], std::abs(profile.members[k][i] - w) / w);
    }
  }
  return out;
}

DecayReport verify_decay_bounds(const SingularProfile& profile, const NonlinearitySpec& spec,
                                const CriticalExponents& exponents, double fit_tol, double cap,
                                double large_from) {
  const int N = exponents.N;
  DecayReport rep;
  rep.decay_exponent = profile.decay_exponent;
  rep.exponent_bound = -(N - 2.0) / 2.0;
  rep.fit_tol = fit_tol;
  rep.exponent_ok = profile.decay_exponent >= rep.exponent_bound - fit_tol;
  rep.q_S = exponents.q_S;

  const auto grid = log_grid(spec.domain_floor(), cap, 20);
  std::vector<double> q(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) q[k] = q_of(spec, grid[k]);
  constexpr double slack = 1e-9;
  if (q.back() > rep.q_S * (1 + slack)) {
    throw HypothesisError("f'(u)F(u) = " + num(q.back()) + " exceeds q_S = " + num(rep.q_S) +
                          " at u = " + num(grid.back()));
  }
  std::size_t k0 = grid.size() - 1;
  while (k0 > 0 && q[k0 - 1] <= rep.q_S * (1 + slack) && grid[k0 - 1] >= large_from) --k0;
  rep.u0 = grid[k0];
  const double F0 = eval_F(spec, rep.u0);
  rep.C = spec.value(rep.u0) * std::pow(F0, rep.q_S);

  const double e = 4.0 / (N - 2.0);
  rep.bound_ratio = 0.0;
  rep.scaled_sup = 0.0;
  for (std::size_t k = k0; k < grid.size(); ++k) {
    const double u = grid[k];
    const double F = eval_F(spec, u);
    const double B =
        std::pow(std::pow(F0, 1.0 - rep.q_S) + (rep.q_S - 1.0) * (u - rep.u0) / rep.C,
                 -1.0 / (rep.q_S - 1.0));
    rep.bound_ratio = std::max(rep.bound_ratio, F / B);
    rep.scaled_sup = std::max(rep.scaled_sup, F * std::pow(u, e));
  }
  rep.bound_ok = rep.bound_ratio <= 1.0 + 1e-9;
  rep.pass = rep.exponent_ok && rep.bound_ok;
  return rep;
}

HardyReport singular_hardy_check(const SingularProfile& profile, const Reaction& f, int N) {
  HardyReport rep;
  rep.bound = (N - 2.0) * (N - 2.0) / 4.0;
  rep.min_margin = INFINITY;
  for (std::size_t i = 0; i < profile.r.size(); ++i) {
    const double r = profile.r[i];
    const double m = rep.bound - r * r * f.derivative(profile.u[i]);
    if (m < rep.min_margin) {
      rep.min_margin = m;
      rep.at = r;
    }
  }
  rep.certified = rep.min_margin >= 0.0;
  return rep;
}

}  // namespace radstab
