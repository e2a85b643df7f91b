#include "radstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
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

int noisy_sign(double d, double noise) {
  if (std::abs(d) <= noise) return 0;
  return d > 0.0 ? 1 : -1;
}

}  // namespace

std::string to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Unstable: return "Unstable";
    case VerdictKind::StableCertified: return "StableCertified";
    case VerdictKind::OrderedUpTo: return "OrderedUpTo";
    case VerdictKind::Inconclusive: return "Inconclusive";
  }
  return "?";
}

std::string to_string(Mechanism m) {
  return m == Mechanism::Barrier ? "barrier" : "exponent-criterion";
}

std::string to_string(StructureType t) {
  switch (t) {
    case StructureType::I: return "I";
    case StructureType::II: return "II";
    case StructureType::III: return "III";
    case StructureType::Undetermined: return "Undetermined";
  }
  return "?";
}

std::string to_string(Prediction p) {
  switch (p) {
    case Prediction::TypeI: return "I";
    case Prediction::TypeIIorIII: return "II or III";
    case Prediction::TypeIII: return "III";
    case Prediction::None: return "none";
  }
  return "?";
}

void Thm12Hypotheses::validate(int N) const {
  const auto e = critical_exponents(N);
  std::ostringstream os;
  os.precision(17);
  if (!(q1 >= 1.0 && q1 <= q2)) {
    os << "need 1 <= q1 <= q2 (q1 = " << q1 << ", q2 = " << q2 << ")";
  } else if (!(ell > 0.0)) {
    os << "ell must be positive";
  } else if (!e.q_JL || q1 > *e.q_JL) {
    os << "q1 = " << q1 << " exceeds q_JL (N = " << N << ")";
  } else if (q2 * (2.0 * N - 4.0 * q1) > (N - 2.0) * (N - 2.0) / 4.0) {
    os << "q2 (2N - 4 q1) = " << q2 * (2.0 * N - 4.0 * q1) << " exceeds (N-2)^2/4 = "
       << (N - 2.0) * (N - 2.0) / 4.0;
  } else {
    return;
  }
  throw HypothesisError(os.str());
}

// ---------------------------------------------------------------------------
// Intersections

std::vector<double> intersection_test(const RadialProfile& a, const RadialProfile& b) {
  if (a.N() != b.N()) throw DomainError("intersection_test: profiles have different N");
  if (a.alpha() == b.alpha()) throw DomainError("intersection_test: identical initial values");
  double R = std::min(a.r_end(), b.r_end());
  if (a.first_zero()) R = std::min(R, *a.first_zero());
  if (b.first_zero()) R = std::min(R, *b.first_zero());

  std::vector<double> radii;
  for (const auto& n : a.trajectory().nodes())
    if (n.r <= R) radii.push_back(n.r);
  for (const auto& n : b.trajectory().nodes())
    if (n.r <= R) radii.push_back(n.r);
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  const auto& ca = a.config();
  const auto& cb = b.config();
  const double rtol = std::max(ca.rtol, cb.rtol), atol = std::max(ca.atol, cb.atol);
  const double umax = std::max(std::abs(a.alpha()), std::abs(b.alpha()));
  const double noise = 10.0 * (atol + rtol * umax);
  auto diff = [&](double r) { return b.evaluate(r).first - a.evaluate(r).first; };

  std::vector<double> out;
  int last_sign = 0;
  double last_r = 0.0;
  for (double r : radii) {
    const double ua = a.evaluate(r).first, ub = b.evaluate(r).first;
    if (!(ua > 0.0 && ub > 0.0)) break;
    const int s = noisy_sign(ub - ua, noise);
    if (s == 0) continue;
    if (last_sign != 0 && s != last_sign)
      out.push_back(ode::bisect(diff, last_r, r, std::max(ca.event_tol, 1e-15) * std::max(1.0, r)));
    last_sign = s;
    last_r = r;
  }
  return out;
}

StabilityVerdict unstable_by_intersection(const Reaction& f, int N, double alpha,
                                          const SolverConfig& cfg,
                                          const IntersectionOptions& opts) {
  if (!(alpha > 0.0)) throw DomainError("unstable_by_intersection: alpha must be positive");
  StabilityVerdict v;
  v.alpha = alpha;
  double R = cfg.r_max;
  for (double delta : opts.deltas) {
    const double beta = alpha * (1.0 - delta);
    const PairProfile pair = solve_pair(f, N, alpha, beta, cfg);
    // d = u_beta - u_alpha starts negative; the first sign change is the overtaking.
    for (double r : pair.crossings()) {
      const auto val = pair.evaluate(r);
      if (!(val.u_a > 0.0 && val.u_b > 0.0)) continue;
      v.kind = VerdictKind::Unstable;
      v.witness = CrossingWitness{r, alpha, beta, val.u_a, val.u_b};
      v.details = "u(., " + num(beta) + ") overtakes u(., " + num(alpha) + ") at r = " + num(r);
      return v;
    }
    R = std::min(R, pair.r_end());
  }
  v.kind = VerdictKind::OrderedUpTo;
  v.ordered_up_to = R;
  v.details = "no crossing up to r = " + num(R);
  return v;
}

// ---------------------------------------------------------------------------
// Barrier certificate

namespace {

void check_q_bounds(const NonlinearitySpec& spec, const Thm12Hypotheses& hyp,
                    const BarrierOptions& opts) {
  const double hi = std::min(hyp.ell, 1e12);
  if (!(hi > spec.domain_floor())) return;
  for (double u : log_grid(spec.domain_floor(), hi, opts.q_points_per_decade)) {
    const double q = q_of(spec, u);
    if (q < hyp.q1 * (1.0 - opts.q_slack) || q > hyp.q2 * (1.0 + opts.q_slack)) {
      std::ostringstream os;
      os.precision(17);
      os << "f'(u)F(u) = " << q << " outside [" << hyp.q1 << ", " << hyp.q2 << "] at u = " << u;
      throw HypothesisError(os.str());
    }
  }
}

}  // namespace

StabilityVerdict barrier_certificate(const NonlinearitySpec& spec, int N,
                                     const Thm12Hypotheses& hyp, double alpha,
                                     const SolverConfig& cfg, const BarrierOptions& opts) {
  if (N < 11) throw PreconditionError("barrier_certificate: needs N >= 11");
  hyp.validate(N);
  if (!(alpha > 0.0 && alpha < hyp.ell))
    throw PreconditionError("barrier_certificate: need 0 < alpha < ell");
  check_q_bounds(spec, hyp, opts);

  StabilityVerdict v;
  v.alpha = alpha;
  v.kind = VerdictKind::Inconclusive;
  auto fail = [&](const std::string& why) {
    v.details = why;
    return v;
  };

  const ScalingModel model = ScalingModel::from_q(hyp.q1);
  const double V0 = std::isinf(hyp.ell) ? 2.0 * alpha : std::sqrt(alpha * hyp.ell);
  const double alpha0 = model.G_inv(eval_F(spec, V0));
  const double v0 = invert_F(spec, model.G(alpha0));
  if (std::abs(v0 - V0) > 1e-9 * V0) return fail("barrier does not start at its target value");

  const RadialProfile w = solve_ivp(model, N, alpha0, cfg);
  const RadialProfile u = solve_ivp(spec, N, alpha, cfg);
  if (u.first_zero()) return fail("u(., alpha) vanishes at r = " + num(*u.first_zero()));

  // With f'F == q1 the barrier is itself the regular solution u(., V0); the
  // ordering is then read off a pair solve, which resolves gaps far below |u|.
  std::optional<PairProfile> pair;
  if (hyp.q2 - hyp.q1 <= 1e-12 * hyp.q1) {
    SolverConfig c = cfg;
    c.r_max = std::min(cfg.r_max, u.r_end());
    pair = solve_pair(spec, N, V0, alpha, c);
    if (!pair->crossings().empty())
      return fail("u(., alpha) reaches the barrier at r = " + num(pair->crossings().front()));
  }

  const double hardy = (N - 2.0) * (N - 2.0) / 4.0;
  // Below r_lo, r^2 f'(v) <= r_lo^2 f'(V0) = 1e-6 (N-2)^2/4 since v <= V0.
  const double r_hi = std::min({cfg.r_max, w.r_end(), u.r_end()});
  const double r_lo =
      std::min(1e-3 * (N - 2.0) / (2.0 * std::sqrt(spec.derivative(V0))), 1e-3 * r_hi);

  double worst_hardy = 0.0, worst_hardy_at = 0.0;
  double min_gap = INFINITY;
  double prev_w = alpha0;
  for (double r : log_grid(r_lo, r_hi, opts.points_per_decade)) {
    const double wr = w.evaluate(r).first;
    if (!model.in_domain(wr)) return fail("model solution left its domain at r = " + num(r));
    double vr;
    try {
      vr = invert_F(spec, model.G(wr));
    } catch (const RangeError&) {
      return fail("barrier left the inversion range at r = " + num(r));
    }
    const double h = r * r * spec.derivative(vr);
    if (h > worst_hardy) {
      worst_hardy = h;
      worst_hardy_at = r;
    }
    if (h > hardy * (1.0 + opts.hardy_tol))
      return fail("r^2 f'(v) = " + num(h) + " exceeds (N-2)^2/4 at r = " + num(r));
    // v = F^{-1}(G(w)) is increasing in w; w may only rise by solver noise.
    if (wr > prev_w + 10.0 * (cfg.atol + cfg.rtol * std::abs(wr)))
      return fail("barrier not decreasing at r = " + num(r));
    prev_w = std::min(prev_w, wr);
    const double ur = u.evaluate(r).first;
    if (!(ur > 0.0)) return fail("u(., alpha) not positive at r = " + num(r));
    double gap;
    if (pair && r <= pair->r_end()) {
      gap = -pair->evaluate(r).d;
      if (!(gap > 0.0)) return fail("u(., alpha) reaches the barrier at r = " + num(r));
    } else {
      gap = vr - ur;
      if (gap <= 10.0 * (cfg.atol + cfg.rtol * vr))
        return fail("u(., alpha) reaches the barrier at r = " + num(r));
    }
    min_gap = std::min(min_gap, gap / vr);
  }
  v.kind = VerdictKind::StableCertified;
  v.mechanism = Mechanism::Barrier;
  std::ostringstream os;
  os.precision(10);
  os << "model " << model.describe() << ", barrier value " << V0 << " at r = 0"
     << ", max r^2 f'(v) = " << worst_hardy << " at r = " << worst_hardy_at << " (bound " << hardy
     << "), min relative gap " << min_gap;
  v.details = os.str();
  return v;
}

std::optional<Thm12Hypotheses> fit_hypotheses(const NonlinearitySpec& spec, int N, double eps,
                                              double cap, int points_per_decade) {
  const auto e = critical_exponents(N);
  if (!e.q_JL) return std::nullopt;
  const auto grid = log_grid(spec.domain_floor(), cap, points_per_decade);
  std::vector<double> q(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) q[k] = q_of(spec, grid[k]);

  auto fit = [&](double margin) {
    double mn = INFINITY, mx = -INFINITY;
    std::optional<Thm12Hypotheses> best;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      mn = std::min(mn, q[k]);
      mx = std::max(mx, q[k]);
      double q1 = (1.0 - margin) * mn;
      if (q1 < 1.0) {
        if (mn < 1.0) break;
        q1 = 1.0;
      }
      const double q2 = (1.0 + margin) * mx;
      if (q1 > *e.q_JL || q2 * (2.0 * N - 4.0 * q1) > (N - 2.0) * (N - 2.0) / 4.0) break;
      best = Thm12Hypotheses{q1, q2, grid[k]};
      best_k = k;
    }
    if (best && best_k + 1 == grid.size()) {
      LimitOptions lo;
      lo.cap = cap;
      if (estimate_limits(spec, lo).q_inf.value) best->ell = INFINITY;
    }
    return best;
  };

  // A smaller margin is tried only when it extends the fitted range.
  auto best = fit(eps);
  for (double margin = eps / 10.0; margin >= eps / 100.0; margin /= 10.0) {
    if (best && std::isinf(best->ell)) break;
    auto next = fit(margin);
    if (next && (!best || next->ell > best->ell)) best = next;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Criteria and classification

PredictionReport criteria_from_limits(const LimitEstimates& limits,
                                      const CriticalExponents& exponents) {
  PredictionReport r;
  if (!exponents.q_JL) {
    r.prediction = Prediction::TypeI;
    r.reason = "N <= 10: every bounded stable radial solution is constant";
    return r;
  }
  const double qjl = *exponents.q_JL;
  if (!limits.q0.value) {
    r.reason = "q0 undetermined";
    return r;
  }
  const double q0 = *limits.q0.value;
  const double tol = std::max(limits.q0.uncertainty, 1e-9);
  if (q0 > qjl + tol) {
    r.prediction = Prediction::TypeI;
    r.reason = "q0 = " + num(q0) + " > q_JL = " + num(qjl);
    return r;
  }
  if (!(q0 > 1.0 + tol && q0 < qjl - tol)) {
    r.reason = "q0 = " + num(q0) + " is not strictly between 1 and q_JL = " + num(qjl);
    return r;
  }
  if (limits.q_inf.value &&
      *limits.q_inf.value > qjl + std::max(limits.q_inf.uncertainty, 1e-9)) {
    r.prediction = Prediction::TypeIII;
    r.reason = "1 < q0 = " + num(q0) + " < q_JL = " + num(qjl) + " < q_inf = " +
               num(*limits.q_inf.value);
    return r;
  }
  r.prediction = Prediction::TypeIIorIII;
  r.reason = "1 < q0 = " + num(q0) + " < q_JL = " + num(qjl);
  return r;
}

namespace {

// f'F constant at q <= q_JL: the bounds hold with q1 = q2 = q and ell = infinity.
bool constant_q_below_jl(const NonlinearitySpec& spec, const LimitEstimates& limits,
                         const CriticalExponents& e) {
  if (!e.q_JL || !limits.q0.value || !limits.q_inf.value) return false;
  const double q = *limits.q0.value;
  if (std::abs(*limits.q_inf.value - q) > 1e-9 * q || q > *e.q_JL || q < 1.0) return false;
  for (double u : log_grid(spec.domain_floor(), 1e12, 4))
    if (std::abs(q_of(spec, u) - q) > 1e-9 * q) return false;
  return true;
}

}  // namespace

StructureClassification classify_structure(const NonlinearitySpec& spec, int N,
                                           const ClassifyConfig& cfg) {
  StructureClassification out;
  out.exponents = critical_exponents(N);
  if (N <= 10) {
    out.type = StructureType::I;
    out.prediction = {Prediction::TypeI, "N <= 10"};
    out.summary = "N <= 10: every bounded stable radial solution is constant, so all are unstable";
    return out;
  }
  const auto hyp_report = check_hypotheses(spec);
  if (!hyp_report.pass) {
    std::string msg = "standing hypotheses fail:";
    for (const auto& v : hyp_report.violations) msg += " " + v + ";";
    throw HypothesisError(msg);
  }
  out.limits = estimate_limits(spec);
  out.prediction = criteria_from_limits(out.limits, out.exponents);

  bool exponent_criterion = false;
  if (cfg.use_barrier) {
    out.hypotheses = cfg.hypotheses ? cfg.hypotheses : fit_hypotheses(spec, N);
    if (out.hypotheses) out.hypotheses->validate(N);
  } else {
    exponent_criterion = constant_q_below_jl(spec, out.limits, out.exponents);
  }

  // Sweep.
  std::vector<double> alphas;
  const int n = std::max(1, cfg.alpha_count);
  for (int i = 0; i < n; ++i)
    alphas.push_back(n == 1 ? cfg.alpha_lo
                            : cfg.alpha_lo * std::pow(cfg.alpha_hi / cfg.alpha_lo,
                                                      static_cast<double>(i) / (n - 1)));
  out.evidence.resize(alphas.size());
  parallel_for(alphas.size(), cfg.threads, [&](std::size_t i) {
    const double alpha = alphas[i];
    StabilityVerdict v = unstable_by_intersection(spec, N, alpha, cfg.solver, cfg.intersection);
    StabilityVerdict cert;
    cert.alpha = alpha;
    if (exponent_criterion) {
      cert.kind = VerdictKind::StableCertified;
      cert.mechanism = Mechanism::ExponentCriterion;
      cert.details = "f'F is constant at q = " + num(*out.limits.q0.value) + " <= q_JL";
    } else if (out.hypotheses && alpha < out.hypotheses->ell) {
      cert = barrier_certificate(spec, N, *out.hypotheses, alpha, cfg.solver, cfg.barrier);
    }
    if (cert.certified()) {
      if (v.unstable()) {
        throw ConsistencyError("alpha = " + num(alpha) + " is certified stable but " + v.details);
      }
      out.evidence[i] = cert;
    } else {
      if (!cert.details.empty()) v.details += "; barrier: " + cert.details;
      out.evidence[i] = v;
    }
  });

  // Monotone verdicts: nothing unstable below a certified alpha.
  const auto& ev = out.evidence;
  std::optional<std::size_t> first_unstable;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (ev[i].unstable() && !first_unstable) first_unstable = i;
    if (ev[i].certified() && first_unstable) {
      throw ConsistencyError("unstable alpha = " + num(ev[*first_unstable].alpha) +
                             " lies below certified alpha = " + num(ev[i].alpha));
    }
  }
  const bool any_certified =
      std::any_of(ev.begin(), ev.end(), [](const StabilityVerdict& v) { return v.certified(); });
  const bool all_certified =
      std::all_of(ev.begin(), ev.end(), [](const StabilityVerdict& v) { return v.certified(); });
  if (out.prediction.prediction == Prediction::TypeI && any_certified) {
    throw ConsistencyError("limits predict type I (" + out.prediction.reason +
                           ") but a stable alpha was certified");
  }

  const bool global_certificate =
      exponent_criterion || (out.hypotheses && std::isinf(out.hypotheses->ell));

  if (out.prediction.prediction == Prediction::TypeI) {
    out.type = StructureType::I;
    out.summary = "type I: " + out.prediction.reason;
    return out;
  }
  if (!first_unstable) {
    if (global_certificate && all_certified) {
      out.type = StructureType::II;
      out.summary = "type II: bounds on f'F hold on (0, infinity) and every swept alpha is "
                    "certified stable";
    } else {
      out.summary = "undetermined: no instability found, but no global certificate";
    }
    return out;
  }
  const std::size_t iu = *first_unstable;
  const bool stable_side = iu > 0 && (ev[iu - 1].certified() ||
                                      ev[iu - 1].kind == VerdictKind::OrderedUpTo);
  const bool theory = out.prediction.prediction == Prediction::TypeIII ||
                      out.prediction.prediction == Prediction::TypeIIorIII;
  if (!stable_side || !(any_certified || theory)) {
    out.summary = "undetermined: instability found without stable-side support below it";
    return out;
  }

  // Bisection for alpha* between the last stable-side and the first unstable alpha.
  double lo = ev[iu - 1].alpha, hi = ev[iu].alpha;
  StabilityVerdict lo_ev = ev[iu - 1], hi_ev = ev[iu];
  for (int it = 0; it < 200 && hi - lo > cfg.bisection_rtol * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    StabilityVerdict v = unstable_by_intersection(spec, N, mid, cfg.solver, cfg.intersection);
    if (v.unstable()) {
      hi = mid;
      hi_ev = v;
    } else {
      lo = mid;
      lo_ev = v;
    }
  }
  out.type = StructureType::III;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.alpha_star = std::sqrt(lo * hi);
  out.bracket_lo_evidence = lo_ev;
  out.bracket_hi_evidence = hi_ev;
  out.summary = "type III: alpha* in [" + num(lo) + ", " + num(hi) + "]";
  return out;
}

OrderedReport ordered_family_check(const Reaction& f, int N, const std::vector<double>& alpha_grid,
                                   double R, const SolverConfig& cfg) {
  for (std::size_t i = 1; i < alpha_grid.size(); ++i)
    if (!(alpha_grid[i] > alpha_grid[i - 1]))
      throw DomainError("ordered_family_check: alpha grid must be strictly increasing");
  OrderedReport rep;
  SolverConfig c = cfg;
  c.r_max = R;
  for (std::size_t i = 1; i < alpha_grid.size(); ++i) {
    // d = u(., lower) - u(., upper) must stay negative.
    const PairProfile pair = solve_pair(f, N, alpha_grid[i], alpha_grid[i - 1], c);
    if (!pair.crossings().empty()) {
      rep.ordered = false;
      const double r = pair.crossings().front();
      if (!rep.violation_at || r < *rep.violation_at) {
        rep.violation_at = r;
        rep.violation = "u(., " + num(alpha_grid[i - 1]) + ") crosses u(., " +
                        num(alpha_grid[i]) + ") at r = " + num(r);
      }
    }
    if (pair.zero_a() || pair.zero_b()) {
      rep.ordered = false;
      const double r = std::min(pair.zero_a().value_or(INFINITY), pair.zero_b().value_or(INFINITY));
      if (!rep.violation_at || r < *rep.violation_at) {
        rep.violation_at = r;
        rep.violation = "a profile vanishes at r = " + num(r);
      }
    }
    const auto& t = pair.trajectory();
    const auto& nodes = t.nodes();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double gap = -(nodes[k].y[1] + nodes[k].ylo[1]);
      if (gap < rep.min_gap) {
        rep.min_gap = gap;
        rep.min_gap_at = nodes[k].r;
      }
      if (k + 1 < nodes.size()) {
        const double mid = 0.5 * (nodes[k].r + nodes[k + 1].r);
        const double g = -t.interpolate(k, mid).y[1];
        if (g < rep.min_gap) {
          rep.min_gap = g;
          rep.min_gap_at = mid;
        }
      }
    }
  }
  if (rep.ordered && !(rep.min_gap > 0.0)) {
    rep.ordered = false;
    rep.violation_at = rep.min_gap_at;
    rep.violation = "profiles touch at r = " + num(rep.min_gap_at);
  }
  return rep;
}

}  // namespace radstab
