#include <doctest.h>

#include <cmath>

#include "radstab/errors.hpp"
#include "radstab/nonlinearity.hpp"
#include "radstab/radial_ode.hpp"
#include "radstab/stability.hpp"

using namespace radstab;

namespace {

// Independent witness check: the lower profile is strictly below the higher
// one just before r*, strictly above just past it, and both are positive.  The
// difference comes from a pair solve so that it is resolved even when tiny.
void check_witness(const Reaction& f, int N, const CrossingWitness& w, const SolverConfig& cfg) {
  REQUIRE(w.beta < w.alpha);
  const auto pr = solve_pair(f, N, w.alpha, w.beta, cfg);
  const double h = 1e-2 * w.r_star;
  REQUIRE(pr.r_end() > w.r_star + h);
  const auto at = pr.evaluate(w.r_star);
  CHECK(at.u_a > 0.0);
  CHECK(at.u_b > 0.0);
  CHECK(pr.evaluate(w.r_star - h).d < 0.0);
  CHECK(pr.evaluate(w.r_star + h).d > 0.0);
}

LimitEstimates limits(std::optional<double> q0, std::optional<double> qi) {
  LimitEstimates l;
  l.q0.value = q0;
  l.q_inf.value = qi;
  return l;
}

}  // namespace

TEST_CASE("intersection test") {
  const auto f2 = NonlinearitySpec::power(2);
  const auto a = solve_ivp(f2, 12, 1.0), b = solve_ivp(f2, 12, 2.0);
  const auto xs = intersection_test(a, b);
  REQUIRE_FALSE(xs.empty());
  for (double r : xs) {
    CHECK(a.evaluate(r).first > 0.0);
    CHECK(std::abs(a.evaluate(r).first - b.evaluate(r).first) <= 1e-8);
  }
  const auto f5 = NonlinearitySpec::power(5);
  CHECK(intersection_test(solve_ivp(f5, 12, 1.0), solve_ivp(f5, 12, 2.0)).empty());
  CHECK_THROWS_AS(intersection_test(a, a), DomainError);
}

TEST_CASE("instability by intersection") {
  const SolverConfig cfg;
  const auto f2 = NonlinearitySpec::power(2);
  const auto v2 = unstable_by_intersection(f2, 12, 1.0, cfg);
  REQUIRE(v2.unstable());
  REQUIRE(v2.witness);
  check_witness(f2, 12, *v2.witness, cfg);

  const auto v5 = unstable_by_intersection(NonlinearitySpec::power(5), 12, 1.0, cfg);
  CHECK(v5.kind == VerdictKind::OrderedUpTo);
  CHECK(v5.ordered_up_to > 0.0);
  CHECK_FALSE(v5.witness);

  const auto fr = NonlinearitySpec::power_rational(5, 3);
  const auto vr = unstable_by_intersection(fr, 12, 1e3, cfg);
  REQUIRE(vr.unstable());
  check_witness(fr, 12, *vr.witness, cfg);

  // Subcritical: finite first zero, crossing inside it.
  const auto vs = unstable_by_intersection(NonlinearitySpec::power(2), 3, 1.0, cfg);
  CHECK(vs.unstable());
  CHECK_THROWS_AS(unstable_by_intersection(f2, 12, 0.0, cfg), DomainError);
}

TEST_CASE("hypothesis gate") {
  CHECK_NOTHROW((Thm12Hypotheses{1.25, 1.25, INFINITY}.validate(12)));
  // 1.25 (24 - 5) = 23.75 <= 25; 1.4 (24 - 5) = 26.6 > 25.
  CHECK_THROWS_AS((Thm12Hypotheses{1.25, 1.4, INFINITY}.validate(12)), HypothesisError);
  CHECK_THROWS_AS((Thm12Hypotheses{1.3, 1.2, INFINITY}.validate(12)), HypothesisError);
  CHECK_THROWS_AS((Thm12Hypotheses{1.25, 1.25, INFINITY}.validate(10)), HypothesisError);
  const double qjl = *critical_exponents(12).q_JL;
  CHECK_NOTHROW((Thm12Hypotheses{qjl, qjl, INFINITY}.validate(12)));
  const double above = qjl * (1 + 1e-9);
  CHECK_THROWS_AS((Thm12Hypotheses{above, above, INFINITY}.validate(12)), HypothesisError);
}

TEST_CASE("barrier certificate for the pure power") {
  const auto f = NonlinearitySpec::power(5);
  const Thm12Hypotheses hyp{1.25, 1.25, INFINITY};
  for (double alpha : {0.5, 1.0, 10.0}) {
    const auto v = barrier_certificate(f, 12, hyp, alpha);
    CHECK(v.certified());
    CHECK(v.mechanism == Mechanism::Barrier);
  }
  // Gate fails before any solve.
  CHECK_THROWS_AS((barrier_certificate(f, 12, {1.25, 1.4, INFINITY}, 1.0)), HypothesisError);
  // Sampled q = 1.25 violates q1 = 1.3.
  CHECK_THROWS_AS((barrier_certificate(f, 12, {1.3, 1.3, INFINITY}, 1.0)), HypothesisError);
  CHECK_THROWS_AS((barrier_certificate(f, 12, {1.25, 1.25, 2.0}, 3.0)), PreconditionError);
}

TEST_CASE("barrier certificate for a power sum with fitted bounds") {
  const auto f = NonlinearitySpec::power_sum(6, 13.0 / 3.0);
  const auto hyp = fit_hypotheses(f, 12);
  REQUIRE(hyp);
  CHECK(hyp->q2 <= 1.3 * (1 + 1e-3));
  CHECK(std::isinf(hyp->ell));
  CHECK_NOTHROW(hyp->validate(12));
  for (double alpha : {0.1, 10.0}) CHECK(barrier_certificate(f, 12, *hyp, alpha).certified());
}

TEST_CASE("predictions from the limits") {
  const auto e = critical_exponents(12);
  CHECK(criteria_from_limits(limits(2.0, 2.0), e).prediction == Prediction::TypeI);
  CHECK(criteria_from_limits(limits(1.25, 2.0), e).prediction == Prediction::TypeIII);
  CHECK(criteria_from_limits(limits(1.25, 1.25), e).prediction == Prediction::TypeIIorIII);
  CHECK(criteria_from_limits(limits(std::nullopt, 1.25), e).prediction == Prediction::None);
}

TEST_CASE("structure of the power family") {
  const auto c5 = classify_structure(NonlinearitySpec::power(5), 12);
  CHECK(c5.type == StructureType::II);
  const auto c2 = classify_structure(NonlinearitySpec::power(2), 12);
  CHECK(c2.type == StructureType::I);
  CHECK(classify_structure(NonlinearitySpec::power(5), 10).type == StructureType::I);

  // Verdicts are monotone along the sweep.
  for (const auto& c : {c5, c2}) {
    bool seen_unstable = false;
    for (const auto& v : c.evidence) {
      if (v.unstable()) seen_unstable = true;
      CHECK_FALSE((seen_unstable && v.certified()));
    }
  }
}

TEST_CASE("structure of the rational family") {
  const auto f = NonlinearitySpec::power_rational(5, 3);
  ClassifyConfig cfg;
  const auto c = classify_structure(f, 12, cfg);
  REQUIRE(c.type == StructureType::III);
  REQUIRE(c.alpha_star);
  REQUIRE(c.bracket_lo);
  REQUIRE(c.bracket_hi);
  CHECK(*c.bracket_lo <= *c.alpha_star);
  CHECK(*c.alpha_star <= *c.bracket_hi);
  CHECK(*c.bracket_hi - *c.bracket_lo <= cfg.bisection_rtol * *c.bracket_hi);
  REQUIRE(c.bracket_hi_evidence);
  REQUIRE(c.bracket_hi_evidence->witness);
  check_witness(f, 12, *c.bracket_hi_evidence->witness, cfg.solver);
  REQUIRE(c.bracket_lo_evidence);
  CHECK_FALSE(c.bracket_lo_evidence->unstable());
}

TEST_CASE("ordered families") {
  const auto r5 = ordered_family_check(NonlinearitySpec::power(5), 12, {0.5, 1, 2, 4}, 1e2);
  CHECK(r5.ordered);
  CHECK(r5.min_gap > 0.0);
  const auto r2 = ordered_family_check(NonlinearitySpec::power(2), 12, {1, 2}, 1e2);
  CHECK_FALSE(r2.ordered);
  CHECK(r2.violation_at);
  CHECK(ordered_family_check(NonlinearitySpec::power(2), 12, {1}, 1e2).ordered);
  CHECK_THROWS_AS(ordered_family_check(NonlinearitySpec::power(2), 12, {2, 1}, 1e2), DomainError);
}
