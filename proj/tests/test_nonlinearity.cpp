#include <doctest.h>

#include <cmath>
#include <functional>

#include "radstab/errors.hpp"
#include "radstab/nonlinearity.hpp"

using namespace radstab;

namespace {

// Composite Simpson on [a, b] with n (even) panels.
double simpson(const std::function<double(double)>& g, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = g(a) + g(b);
  for (int i = 1; i < n; ++i) s += g(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// F for u^3 + u^2 by s = 1/t: the integrand becomes t / (1 + t) on (0, 1/u].
double power_sum_32_F_simpson(double u, int n) {
  return simpson([](double t) { return t / (1.0 + t); }, 0.0, 1.0 / u, n);
}

// 1/u - log(1 + 1/u); the alternating series sum_{k>=2} (-x)^k / k avoids the
// cancellation for small x = 1/u.
double power_sum_32_F_exact(double u) {
  const double x = 1.0 / u;
  if (x > 0.1) return x - std::log1p(x);
  double s = 0.0, t = -x;
  for (int k = 2; k < 30; ++k) {
    t *= -x;
    s += t / k;
  }
  return s;
}

// p with p (2/(p-1)) (N-2-2/(p-1)) = (N-2)^2/4, found by bisection on (p_S, 1e6).
double jl_root(int N) {
  auto h = [N](double p) {
    const double m = 2.0 / (p - 1.0);
    return p * m * (N - 2.0 - m) - (N - 2.0) * (N - 2.0) / 4.0;
  };
  double lo = (N + 2.0) / (N - 2.0) + 1e-9, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("derivatives of the built-in families") {
  const auto d = eval_derivatives(NonlinearitySpec::power(3), 2.0);
  CHECK(d.f == doctest::Approx(8.0).epsilon(1e-15));
  CHECK(d.df == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(d.ddf == doctest::Approx(12.0).epsilon(1e-15));

  const auto s = eval_derivatives(NonlinearitySpec::power_sum(3, 2), 1.0);
  CHECK(s.f == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.df == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(s.ddf == doctest::Approx(8.0).epsilon(1e-15));

  const auto r = eval_derivatives(NonlinearitySpec::power_rational(5, 3), 1.0);
  CHECK(r.f == doctest::Approx(1.0 / 8.0).epsilon(1e-15));
  CHECK(r.df == doctest::Approx(7.0 / 16.0).epsilon(1e-15));
  // f'' = ((p1-p2)(p1-p2-1)u^2 + 2 p1 (p1-p2-1) u + p1 (p1-1)) u^{p1-2} / (1+u)^{p2+2}
  CHECK(r.ddf == doctest::Approx((2.0 + 10.0 + 20.0) / 32.0).epsilon(1e-14));
}

TEST_CASE("derivative errors") {
  CHECK_THROWS_AS(eval_derivatives(NonlinearitySpec::power(3), 0.0), DomainError);
  CHECK_THROWS_AS(eval_derivatives(NonlinearitySpec::power(3), -1.0), DomainError);
  Custom c{[](double u) { return u - 1.0; }, [](double) { return 1.0; }, [](double) { return 0.0; },
           [](double) { return 1.0; }};
  CHECK_THROWS_AS(eval_derivatives(NonlinearitySpec::custom(c), 0.5), HypothesisError);
  CHECK_THROWS_AS(NonlinearitySpec::power(1.0), DomainError);
  CHECK_THROWS_AS(NonlinearitySpec::power_sum(2, 3), DomainError);
  CHECK_THROWS_AS(NonlinearitySpec::power_rational(4, 3), DomainError);
}

TEST_CASE("F for the power family is the closed form") {
  const auto f = NonlinearitySpec::power(3);
  CHECK(eval_F(f, 2.0) == doctest::Approx(0.125).epsilon(1e-15));
  double prev = INFINITY;
  for (double u : log_grid(1.0, 1e12, 2)) {
    const double F = eval_F(f, u);
    CHECK(F < prev);
    prev = F;
  }
  CHECK(prev < 1e-24);
}

TEST_CASE("F by quadrature matches a brute-force Simpson oracle") {
  const auto f = NonlinearitySpec::power_sum(3, 2);
  const double coarse = power_sum_32_F_simpson(1.0, 2000), fine = power_sum_32_F_simpson(1.0, 4000);
  REQUIRE(std::abs(coarse - fine) <= 1e-10 * fine);
  CHECK(std::abs(eval_F(f, 1.0) - fine) <= 1e-10 * fine);
  CHECK(std::abs(eval_F(f, 1.0) - (1.0 - std::log(2.0))) <= 1e-13);
  for (double u : {1e-3, 0.1, 10.0, 1e3, 1e6}) {
    const double exact = power_sum_32_F_exact(u);
    CHECK(std::abs(eval_F(f, u) - exact) <= 1e-11 * exact);
  }
}

TEST_CASE("F of a custom family is cached and accurate") {
  Custom c{[](double u) { return u * u * u + u * u; },
           [](double u) { return 3 * u * u + 2 * u; },
           [](double u) { return 6 * u + 2; },
           {},
           "u^3 + u^2"};
  const auto f = NonlinearitySpec::custom(c);
  for (double u : log_grid(1e-6, 1e9, 3)) {
    const double exact = power_sum_32_F_exact(u);
    CHECK(std::abs(eval_F(f, u) - exact) <= 1e-9 * exact);
  }
}

TEST_CASE("F' = -1/f by central differences") {
  for (const auto& f : {NonlinearitySpec::power(5), NonlinearitySpec::power_sum(3, 2),
                        NonlinearitySpec::power_rational(5, 3)}) {
    for (double u : {1e-3, 0.1, 1.0, 10.0, 1e3}) {
      const double h = 1e-4 * u;
      const double d = (eval_F(f, u + h) - eval_F(f, u - h)) / (2 * h);
      CHECK(std::abs(d * f.value(u) + 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("inverse of F") {
  const auto p3 = NonlinearitySpec::power(3);
  CHECK(invert_F(p3, 0.125) == doctest::Approx(2.0).epsilon(1e-14));
  for (const auto& f : {NonlinearitySpec::power(3), NonlinearitySpec::power_sum(3, 2),
                        NonlinearitySpec::power_rational(5, 3)}) {
    for (double u : {0.1, 1.0, 10.0}) CHECK(std::abs(invert_F(f, eval_F(f, u)) - u) <= 1e-9 * u);
  }
  const auto ps = NonlinearitySpec::power_sum(3, 2);
  for (double x : log_grid(1e-3, 1e3, 2)) {
    const double u = invert_F(ps, x);
    CHECK(std::abs(power_sum_32_F_exact(u) - x) <= 1e-9 * std::max(1.0, x));
  }
  CHECK_THROWS_AS(invert_F(p3, 1e30), RangeError);
  CHECK_THROWS_AS(invert_F(p3, 1e-30), RangeError);
}

TEST_CASE("q and the curvature ratio") {
  const auto p5 = NonlinearitySpec::power(5);
  for (double u : log_grid(1e-6, 1e6, 1)) {
    CHECK(q_of(p5, u) == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(curvature_ratio(p5, u) == doctest::Approx(1.25).epsilon(1e-12));
  }
  for (double p : {1.5, 2.0, 3.0, 7.0}) {
    const auto f = NonlinearitySpec::power(p);
    for (double u : {1e-3, 1.0, 1e3}) CHECK(curvature_ratio(f, u) == doctest::Approx(p / (p - 1)).epsilon(1e-12));
  }
  // The upper bound of the sandwich holds for the power-sum family.
  const double q1 = 1.2, q2 = 1.3;
  const auto ps = NonlinearitySpec::power_sum(q1 / (q1 - 1), q2 / (q2 - 1));
  for (double u : log_grid(1e-6, 1e6, 16)) {
    CHECK(curvature_ratio(ps, u) <= q2 * (1 + 1e-12));
    CHECK(curvature_ratio(ps, u) > 1.19);
  }
}

TEST_CASE("limit estimates") {
  const auto p5 = estimate_limits(NonlinearitySpec::power(5));
  REQUIRE(p5.q0.value);
  REQUIRE(p5.q_inf.value);
  CHECK(*p5.q0.value == doctest::Approx(1.25).epsilon(1e-9));
  CHECK(*p5.q_inf.value == doctest::Approx(1.25).epsilon(1e-9));

  const auto pr = estimate_limits(NonlinearitySpec::power_rational(5, 3));
  REQUIRE(pr.q0.value);
  REQUIRE(pr.q_inf.value);
  CHECK(std::abs(*pr.q0.value - 1.25) <= 1e-3);
  CHECK(std::abs(*pr.q_inf.value - 2.0) <= 1e-3);
  // Hoelder conjugates of p0 = 5 and p_inf = 2.
  CHECK(std::abs(1.0 / 5.0 + 1.0 / *pr.q0.value - 1.0) <= 1e-3);

  const auto ps = estimate_limits(NonlinearitySpec::power_sum(3, 2));
  REQUIRE(ps.q0.value);
  REQUIRE(ps.q_inf.value);
  CHECK(std::abs(*ps.q0.value - 2.0) <= 1e-3);
  CHECK(std::abs(*ps.q_inf.value - 1.5) <= 1e-3);
  CHECK(*ps.q0.value >= 1.0);
  CHECK(*ps.q_inf.value >= 1.0);
}

TEST_CASE("critical exponents") {
  const auto e3 = critical_exponents(3);
  CHECK(e3.p_S == doctest::Approx(5.0));
  CHECK(e3.q_S == doctest::Approx(1.25));
  CHECK_FALSE(e3.p_JL);
  CHECK_FALSE(critical_exponents(10).p_JL);
  CHECK_THROWS_AS(critical_exponents(2), DomainError);

  const auto e11 = critical_exponents(11);
  CHECK(*e11.p_JL == doctest::Approx(6.9215).epsilon(1e-4));
  CHECK(*e11.q_JL == doctest::Approx(1.16886).epsilon(1e-5));
  CHECK(*critical_exponents(12).q_JL == doctest::Approx((12 - 2 * std::sqrt(11.0)) / 4).epsilon(1e-15));

  for (int N = 11; N <= 40; ++N) {
    const auto e = critical_exponents(N);
    CHECK(std::abs(*e.p_JL - jl_root(N)) <= 1e-9 * *e.p_JL);
    CHECK(1.0 / *e.p_JL + 1.0 / *e.q_JL == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(*e.q_JL < e.q_S);
    CHECK(std::abs(jl_gate(N, *e.q_JL)) <= 1e-10);
    CHECK(jl_gate(N, 0.999 * *e.q_JL) < 0.0);
  }
}

TEST_CASE("standing hypotheses") {
  CHECK(check_hypotheses(NonlinearitySpec::power(3)).pass);
  CHECK(check_hypotheses(NonlinearitySpec::power_rational(5, 3)).pass);
  Custom lin{[](double u) { return u; }, [](double) { return 1.0; }, [](double) { return 1e-300; },
             {}, "u"};
  const auto rep = check_hypotheses(NonlinearitySpec::custom(lin));
  CHECK_FALSE(rep.pass);
  CHECK_FALSE(rep.tail_integrable);
}
