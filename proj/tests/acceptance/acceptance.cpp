// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "radstab/nonlinearity.hpp"
#include "radstab/radial_ode.hpp"
#include "radstab/scaling.hpp"
#include "radstab/singular.hpp"
#include "radstab/stability.hpp"

using namespace radstab;

namespace {

// Collects sub-checks of one criterion; the criterion passes when all do.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failed_.push_back(what);
    ++count_;
  }
  bool pass() const { return failed_.empty(); }
  std::string detail() const {
    std::ostringstream os;
    os << (count_ - failed_.size()) << "/" << count_ << " checks";
    for (const auto& f : failed_) os << "; FAILED " << f;
    return os.str();
  }

 private:
  std::vector<std::string> failed_;
  std::size_t count_ = 0;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// Crossing verified by a pair solve: u(., beta) - u(., alpha) changes sign at
// r* from negative to positive with both profiles positive.
bool witness_holds(const Reaction& f, int N, const CrossingWitness& w, const SolverConfig& cfg) {
  if (!(w.beta < w.alpha)) return false;
  const auto pr = solve_pair(f, N, w.alpha, w.beta, cfg);
  const double h = 1e-2 * w.r_star;
  if (pr.r_end() <= w.r_star + h) return false;
  const auto at = pr.evaluate(w.r_star);
  return at.u_a > 0.0 && at.u_b > 0.0 && pr.evaluate(w.r_star - h).d < 0.0 &&
         pr.evaluate(w.r_star + h).d > 0.0;
}

double sup_abs(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> uniform(double lo, double hi, int n) {
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) r[i] = lo + (hi - lo) * i / (n - 1);
  return r;
}

Checks exponent_arithmetic() {
  Checks c;
  for (int N = 11; N <= 15; ++N) {
    const auto e = critical_exponents(N);
    const double s = std::sqrt(N - 1.0);
    const double pS = (N + 2.0) / (N - 2.0);
    const double pJL = 1.0 + 4.0 / (N - 4.0 - 2.0 * s);
    const double qJL = (N - 2.0 * s) / 4.0;
    c.expect(std::abs(e.p_S - pS) <= 1e-12 * pS, "p_S at N = " + std::to_string(N));
    c.expect(std::abs(e.q_S - pS / (pS - 1)) <= 1e-12 * e.q_S, "q_S at N = " + std::to_string(N));
    c.expect(e.p_JL && std::abs(*e.p_JL - pJL) <= 1e-12 * pJL, "p_JL at N = " + std::to_string(N));
    c.expect(e.q_JL && std::abs(*e.q_JL - qJL) <= 1e-12 * qJL, "q_JL at N = " + std::to_string(N));
    const double bound = (N - 2.0) * (N - 2.0) / 4.0;
    c.expect(std::abs(qJL * (2.0 * N - 4.0 * qJL) - bound) <= 1e-10, "gate equality (oracle)");
    c.expect(std::abs(jl_gate(N, qJL)) <= 1e-10, "gate equality at N = " + std::to_string(N));
    for (double t : {0.0, 0.25, 0.5, 0.9, 0.999}) {
      const double q = 1.0 + t * (qJL - 1.0);
      c.expect(jl_gate(N, q) < 0.0 && q * (2.0 * N - 4.0 * q) < bound,
               "strict gate at q = " + num(q));
    }
  }
  return c;
}

Checks power_supercritical() {
  Checks c;
  const int N = 12;
  const auto f = NonlinearitySpec::power(5);
  const SolverConfig cfg;  // r_max = 1e3
  const std::vector<double> alphas{0.5, 1.0, 2.0, 4.0};
  std::vector<RadialProfile> us;
  for (double a : alphas) us.push_back(solve_ivp(f, N, a, cfg));
  for (std::size_t i = 0; i < us.size(); ++i)
    for (std::size_t j = i + 1; j < us.size(); ++j)
      c.expect(intersection_test(us[i], us[j]).empty(),
               "no crossing " + num(alphas[i]) + " / " + num(alphas[j]));
  const Thm12Hypotheses hyp{1.25, 1.25, INFINITY};
  for (double a : alphas)
    c.expect(barrier_certificate(f, N, hyp, a, cfg).certified(), "barrier at alpha = " + num(a));
  const auto mb = verify_model_bounds(ScalingModel::power(5), N, {0.5, 1.0, 2.0}, cfg);
  for (const auto& row : mb.rows) {
    c.expect(row.reference_margin > 0.0, "w < W at sigma = " + num(row.sigma));
    c.expect(row.lower_bound_margin > 0.0, "G(w) lower bound at sigma = " + num(row.sigma));
  }
  for (std::size_t i = 0; i < us.size(); ++i) {
    const double m = verify_F_lower_bound(us[i], f);
    c.expect(m >= -1e-9, "F lower bound at alpha = " + num(alphas[i]) + " (" + num(m) + ")");
  }
  return c;
}

Checks power_below_jl() {
  Checks c;
  const int N = 12;
  const auto f = NonlinearitySpec::power(2);
  const SolverConfig cfg;
  for (double a : {0.1, 1.0, 10.0}) {
    const auto v = unstable_by_intersection(f, N, a, cfg);
    c.expect(v.unstable() && v.witness && witness_holds(f, N, *v.witness, cfg),
             "verified crossing at alpha = " + num(a));
  }
  const int n2 = count_model_intersections(ScalingModel::power(2), N, 1.0, 0.5, 1e3, cfg);
  c.expect(n2 >= 3, "p = 2 zero count " + std::to_string(n2) + " >= 3");
  const int nS = count_model_intersections(ScalingModel::power(1.4), N, 1.0, 0.5, 1e3, cfg);
  c.expect(nS == 1, "p = p_S zero count " + std::to_string(nS) + " == 1");
  return c;
}

Checks power_sum_example() {
  Checks c;
  const int N = 12;
  const double q1 = 1.2, q2 = 1.3;
  const auto f = NonlinearitySpec::power_sum(q1 / (q1 - 1), q2 / (q2 - 1));
  std::vector<double> us(200);
  for (int i = 0; i < 200; ++i) us[i] = std::pow(10.0, -6.0 + 12.0 * i / 199.0);
  double cr_lo = INFINITY, cr_hi = -INFINITY, q_lo = INFINITY, q_hi = -INFINITY, cr_at = 0, q_at = 0;
  for (double u : us) {
    const double cr = curvature_ratio(f, u), q = q_of(f, u);
    if (cr < cr_lo) cr_lo = cr, cr_at = u;
    cr_hi = std::max(cr_hi, cr);
    if (q < q_lo) q_lo = q, q_at = u;
    q_hi = std::max(q_hi, q);
  }
  const double tol = 1e-9;
  c.expect(cr_lo >= q1 * (1 - tol), "curvature ratio >= q1 (min " + num(cr_lo) + " at u = " + num(cr_at) + ")");
  c.expect(cr_hi <= q2 * (1 + tol), "curvature ratio <= q2 (max " + num(cr_hi) + ")");
  c.expect(q_lo >= q1 * (1 - tol), "f'F >= q1 (min " + num(q_lo) + " at u = " + num(q_at) + ")");
  c.expect(q_hi <= q2 * (1 + tol), "f'F <= q2 (max " + num(q_hi) + ")");
  const auto cls = classify_structure(f, N);
  c.expect(cls.type == StructureType::II, "type II (got " + to_string(cls.type) + ")");
  return c;
}

Checks rational_example(std::optional<double>* alpha_star_out) {
  Checks c;
  const int N = 12;
  const auto f = NonlinearitySpec::power_rational(5, 3);
  const auto lim = estimate_limits(f);
  c.expect(lim.q0.value && std::abs(*lim.q0.value - 1.25) <= 1e-3, "q0 = 1.25");
  c.expect(lim.q_inf.value && std::abs(*lim.q_inf.value - 2.0) <= 1e-3, "q_inf = 2");
  ClassifyConfig cfg;
  const auto cls = classify_structure(f, N, cfg);
  c.expect(cls.type == StructureType::III, "type III (got " + to_string(cls.type) + ")");
  const bool bracket = cls.bracket_lo && cls.bracket_hi && cls.alpha_star;
  c.expect(bracket, "alpha* bracket present");
  if (bracket) {
    const double width = (*cls.bracket_hi - *cls.bracket_lo) / *cls.alpha_star;
    c.expect(width <= 1e-2, "relative bracket width " + num(width));
    c.expect(cls.bracket_lo_evidence && !cls.bracket_lo_evidence->unstable(),
             "stable-side evidence below alpha*");
    c.expect(cls.bracket_hi_evidence && cls.bracket_hi_evidence->witness &&
                 witness_holds(f, N, *cls.bracket_hi_evidence->witness, cfg.solver),
             "verified unstable witness above alpha*");
    *alpha_star_out = cls.alpha_star;
  }
  return c;
}

Checks scaling_transforms() {
  Checks c;
  const int N = 12;
  {
    const auto f = NonlinearitySpec::power_sum(3, 2);
    const auto model = ScalingModel::power(2);
    const auto u = solve_ivp(f, N, 1.0, {1e-10, 1e-12, 30.0, 1e-12});
    const auto su = sample(u);
    for (double lambda : {0.1, 1.0, 10.0}) {
      const auto v = push_forward(f, su, model, lambda);
      c.expect(sup_abs(pull_back(f, v, model, lambda).u, su.u) <= 1e-8, "round trip lambda = " + num(lambda));
      c.expect(transform_invariant_defect(f, su, model, v) <= 1e-7, "invariant lambda = " + num(lambda));
    }
  }
  {
    const auto f = NonlinearitySpec::power_rational(5, 3);
    const auto model = ScalingModel::power(5);
    const auto u = solve_ivp(f, N, 2.0, {1e-10, 1e-12, 30.0, 1e-12});
    const auto su = sample(u);
    const auto v = push_forward(f, su, model, 2.0);
    c.expect(sup_abs(pull_back(f, v, model, 2.0).u, su.u) <= 1e-8, "round trip, rational family");
    c.expect(transform_invariant_defect(f, su, model, v) <= 1e-7, "invariant, rational family");
  }
  for (double p : {3.0, 5.0}) {
    const auto f = NonlinearitySpec::power(p);
    const double lambda = 3.0, k = std::pow(lambda, 2.0 / (p - 1.0));
    const auto u = solve_ivp(f, N, 1.0, {1e-10, 1e-12, 30.0, 1e-12});
    std::vector<double> xs;
    for (double s : uniform(0.0, 10.0, 201)) xs.push_back(lambda * s);
    const auto v = push_forward(f, sample(u, xs), ScalingModel::power(p), lambda);
    // Classical scaling solved directly at the scaled initial value.
    const auto w = solve_ivp(f, N, k, {1e-10, 1e-12, 10.0, 1e-12});
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v.u[i] - w.evaluate(v.r[i]).first));
    c.expect(m <= 1e-6, "classical scaling p = " + num(p) + " (" + num(m) + ")");
  }
  return c;
}

Checks convergence(std::vector<double>* errors_out) {
  Checks c;
  const int N = 12;
  const auto model = ScalingModel::power(2);
  const auto a = convergence_study(NonlinearitySpec::power_rational(5, 3), N, model, 1.0,
                                   {1e1, 1e2, 1e3, 1e4}, -1.0);
  c.expect(a.strictly_decreasing(), "rational family, alpha -> inf");
  const auto b = convergence_study(NonlinearitySpec::power_sum(3, 2), N, model, 1.0,
                                   {1e-1, 1e-2, 1e-3, 1e-4}, -1.0);
  c.expect(b.strictly_decreasing(), "power sum, alpha -> 0");
  for (const auto& r : a.rows) errors_out->push_back(r.sup_error);
  return c;
}

Checks singular_power() {
  Checks c;
  const int N = 12;
  const auto f = NonlinearitySpec::power(5);
  const SolverConfig cfg{1e-10, 1e-12, 100.0, 1e-12};
  SingularOptions opts;
  opts.structure = classify_structure(f, N).type;
  const auto s = approximate_singular(f, N, {1e1, 1e2, 1e3, 1e4, 1e5, 1e6}, cfg, opts);
  c.expect(s.min_increment > -cfg.event_tol, "ladder increasing (min increment " + num(s.min_increment) + ")");
  const double L = std::pow(0.5 * (N - 2 - 0.5), 0.25);
  const auto d = reference_distances(s, [L](double r) { return L / std::sqrt(r); }, 1.0, 10.0);
  c.expect(!d.empty() && d.back() <= 1e-2, "top within 1% of W (" + num(d.back()) + ")");
  const auto h = singular_hardy_check(s, f, N);
  c.expect(std::abs(h.min_margin - 1.25) <= 1e-6, "Hardy margin 1.25 (" + num(h.min_margin) + ")");
  return c;
}

Checks solver_hygiene(std::optional<double> alpha_star, const std::vector<double>& errors) {
  Checks c;
  const SolverConfig cfg, half = cfg.halved();
  const auto p2 = NonlinearitySpec::power(2);
  for (double a : {0.5, 1.0, 2.0}) {
    const auto u = solve_ivp(p2, 3, a, cfg), v = solve_ivp(p2, 3, a, half);
    const bool ok = u.first_zero() && v.first_zero() &&
                    std::abs(*u.first_zero() - *v.first_zero()) <= 10 * cfg.rtol * *u.first_zero();
    c.expect(ok, "first zero at alpha = " + num(a));
  }
  // Crossing radii as reported: the witnesses of the intersection verdicts.
  for (double a : {0.1, 1.0, 10.0}) {
    const auto x = unstable_by_intersection(p2, 12, a, cfg), y = unstable_by_intersection(p2, 12, a, half);
    const bool ok = x.witness && y.witness && x.witness->beta == y.witness->beta &&
                    std::abs(x.witness->r_star - y.witness->r_star) <= 10 * cfg.rtol * x.witness->r_star;
    c.expect(ok, "witness radius at alpha = " + num(a));
  }
  if (alpha_star) {
    ClassifyConfig cc;
    cc.solver = half;
    const auto cls = classify_structure(NonlinearitySpec::power_rational(5, 3), 12, cc);
    c.expect(cls.alpha_star && std::abs(*cls.alpha_star - *alpha_star) <= 10 * cc.bisection_rtol * *alpha_star,
             "alpha*");
  } else {
    c.expect(false, "alpha* unavailable from criterion 5");
  }
  {
    const auto st = convergence_study(NonlinearitySpec::power_rational(5, 3), 12, ScalingModel::power(2), 1.0,
                                      {1e1, 1e2, 1e3, 1e4}, -1.0, half);
    bool ok = st.rows.size() == errors.size();
    // z(., 1) is decreasing from 1, so max |z| = 1.
    for (std::size_t i = 0; ok && i < errors.size(); ++i) ok = std::abs(st.rows[i].sup_error - errors[i]) <= 10 * cfg.rtol;
    c.expect(ok, "sup-errors");
  }
  double worst = 0.0;
  const std::vector<NonlinearitySpec> specs{NonlinearitySpec::power(5), NonlinearitySpec::power(2),
                                            NonlinearitySpec::power_rational(5, 3),
                                            NonlinearitySpec::power_sum(6, 13.0 / 3.0)};
  for (const auto& f : specs)
    for (int N : {3, 12})
      for (double a : {1e-3, 1e-1, 1.0, 1e1, 1e3}) {
        const auto u = solve_ivp(f, N, a, cfg);
        worst = std::max(worst, verify_mass_identity(u, f));
      }
  c.expect(worst <= 1e-6, "mass identity (worst " + num(worst) + ")");
  return c;
}

}  // namespace

int main() {
  std::optional<double> alpha_star;
  std::vector<double> errors;
  const std::vector<std::pair<std::string, std::function<Checks()>>> criteria{
      {"exponent arithmetic", exponent_arithmetic},
      {"power supercritical regime", power_supercritical},
      {"power below the JL exponent", power_below_jl},
      {"power-sum example", power_sum_example},
      {"rational example", [&] { return rational_example(&alpha_star); }},
      {"scaling transforms", scaling_transforms},
      {"convergence to the model", [&] { return convergence(&errors); }},
      {"singular power solution", singular_power},
      {"solver hygiene", [&] { return solver_hygiene(alpha_star, errors); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
      const Checks c = criteria[i].second();
      pass = c.pass();
      detail = c.detail();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu (%s) [%.1fs]: %s\n", pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), secs, detail.c_str());
    std::fflush(stdout);
    failed += pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
