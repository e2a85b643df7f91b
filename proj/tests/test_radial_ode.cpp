#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "radstab/errors.hpp"
#include "radstab/nonlinearity.hpp"
#include "radstab/radial_ode.hpp"

using namespace radstab;

namespace {

// f = c > 0: u = alpha - c r^2 / (2N) exactly, and f' = 0.
class ConstantSource final : public Reaction {
 public:
  explicit ConstantSource(double c) : c_(c) {}
  double value(double) const override { return c_; }
  double derivative(double) const override { return 0.0; }
  double second_derivative(double) const override { return 0.0; }

 private:
  double c_;
};

double sup_diff(const RadialProfile& a, const RadialProfile& b, double r_hi) {
  double m = 0.0;
  for (const auto& n : a.trajectory().nodes()) {
    if (n.r > r_hi) break;
    m = std::max(m, std::abs(n.y[0] - b.evaluate(n.r).first));
  }
  return m;
}

}  // namespace

TEST_CASE("series start matches u''(0) = -f(alpha)/N") {
  const auto f = NonlinearitySpec::power(3);
  const auto s = series_start(f, 12, 1.0);
  CHECK(s.c0 == 1.0);
  CHECK(s.c2 == doctest::Approx(-1.0 / 24.0).epsilon(1e-15));
  const auto u = solve_ivp(f, 12, 1.0);
  CHECK(std::abs(u.evaluate(0.01).first - (1.0 - 1e-4 / 24.0)) <= 1e-9);
  const auto [u0, du0] = u.evaluate(0.0);
  CHECK(u0 == 1.0);
  CHECK(du0 == 0.0);
}

TEST_CASE("constant source is reproduced exactly") {
  const ConstantSource f(2.0);
  const int N = 5;
  const double alpha = 3.0;
  const auto u = solve_ivp(f, N, alpha);
  REQUIRE(u.first_zero());
  CHECK(*u.first_zero() == doctest::Approx(std::sqrt(N * alpha)).epsilon(1e-11));
  for (double r : {0.1, 0.5, 1.0, 2.0, 3.5}) {
    CHECK(std::abs(u.evaluate(r).first - (alpha - r * r / N)) <= 1e-10);
    CHECK(std::abs(u.evaluate(r).second + 2.0 * r / N) <= 1e-10);
  }
  const auto phi = solve_linearized(f, u);
  CHECK(phi.zeros().empty());
  for (const auto& n : phi.trajectory().nodes()) CHECK(std::abs(n.y[1] - 1.0) <= 1e-12);
}

TEST_CASE("evaluation at nodes and out of range") {
  const auto u = solve_ivp(NonlinearitySpec::power(5), 12, 1.0, {1e-10, 1e-12, 50.0, 1e-12});
  for (const auto& n : u.trajectory().nodes()) {
    const auto [v, dv] = u.evaluate(n.r);
    CHECK(v == n.y[0]);
    CHECK(dv == n.v[0]);
  }
  CHECK_THROWS_AS(u.evaluate(51.0), RangeError);
  CHECK_THROWS_AS(u.evaluate(-1.0), RangeError);
  CHECK_THROWS_AS(solve_ivp(NonlinearitySpec::power(5), 12, -1.0), DomainError);
  CHECK_THROWS_AS(solve_ivp(NonlinearitySpec::power(5), 2, 1.0), DomainError);
}

TEST_CASE("subcritical profile has a finite first zero") {
  const auto u = solve_ivp(NonlinearitySpec::power(2), 3, 1.0);
  REQUIRE(u.first_zero());
  CHECK(std::abs(u.evaluate(*u.first_zero()).first) <= 1e-9);
  CHECK(u.r_end() == doctest::Approx(*u.first_zero()));
}

TEST_CASE("supercritical profile is positive, decreasing and self-convergent") {
  const auto f = NonlinearitySpec::power(5);
  const SolverConfig cfg;
  const auto u = solve_ivp(f, 12, 1.0, cfg);
  CHECK_FALSE(u.first_zero());
  CHECK(u.r_end() == cfg.r_max);
  const auto& nodes = u.trajectory().nodes();
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    CHECK(nodes[i].y[0] > 0.0);
    CHECK(nodes[i].v[0] < 0.0);
  }
  SolverConfig tight{cfg.rtol / 10, cfg.atol / 10, cfg.r_max, cfg.event_tol / 10};
  const auto ref = solve_ivp(f, 12, 1.0, tight);
  CHECK(sup_diff(u, ref, cfg.r_max) <= 1e-7);
  CHECK(max_midpoint_residual(f, u) <= 10.0);
}

TEST_CASE("mass identity") {
  for (auto [p, N, alpha] : {std::tuple{5.0, 12, 2.0}, std::tuple{2.0, 3, 1.0},
                             std::tuple{3.0, 12, 1e3}, std::tuple{5.0, 12, 1e-3}}) {
    const auto f = NonlinearitySpec::power(p);
    const auto u = solve_ivp(f, N, alpha);
    CHECK(verify_mass_identity(u, f) <= 1e-6);
    // Leading order near r = 0: -u' ~ f(alpha) r / N.
    const double r = 1e-4 / std::sqrt(f.derivative(alpha) + 1.0);
    CHECK(-u.evaluate(r).second / (f.value(alpha) * r / N) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("F lower bound along entire solutions") {
  const auto f = NonlinearitySpec::power(5);
  for (double alpha : {0.1, 1.0, 10.0, 1e3}) {
    const auto u = solve_ivp(f, 12, alpha);
    REQUIRE_FALSE(u.first_zero());
    CHECK(verify_F_lower_bound(u, f) >= -1e-9);
    CHECK(verify_F_lower_bound(u, f) <= eval_F(f, alpha));
  }
  const auto g = NonlinearitySpec::power_sum(6, 13.0 / 3.0);
  const auto v = solve_ivp(g, 12, 1.0, {1e-10, 1e-12, 100.0, 1e-12});
  REQUIRE_FALSE(v.first_zero());
  CHECK(verify_F_lower_bound(v, g) >= -1e-9);
  const auto w = solve_ivp(NonlinearitySpec::power(2), 3, 1.0);
  CHECK_THROWS_AS(verify_F_lower_bound(w, NonlinearitySpec::power(2)), PreconditionError);
}

TEST_CASE("classical scaling of the power nonlinearity") {
  const double p = 3.0, lambda = 2.0, alpha = 1.0;
  const auto f = NonlinearitySpec::power(p);
  const SolverConfig cfg{1e-10, 1e-12, 40.0, 1e-12};
  const auto u = solve_ivp(f, 12, alpha, cfg);
  const double k = std::pow(lambda, 2.0 / (p - 1.0));
  const auto v = solve_ivp(f, 12, k * alpha, {cfg.rtol, cfg.atol, cfg.r_max / lambda, cfg.event_tol});
  double m = 0.0;
  for (const auto& n : v.trajectory().nodes())
    m = std::max(m, std::abs(n.y[0] - k * u.evaluate(lambda * n.r).first));
  CHECK(m <= 1e-6);
}

TEST_CASE("singular power solution satisfies the equation") {
  const int N = 12;
  for (double p : {3.0, 5.0, 9.0}) {
    const double m = 2.0 / (p - 1.0);
    const double L = std::pow(m * (N - 2.0 - m), 1.0 / (p - 1.0));
    double worst = 0.0;
    for (double r = 0.1; r <= 10.0; r *= 1.1) {
      const double W = L * std::pow(r, -m);
      const double dW = -m * W / r, ddW = m * (m + 1) * W / (r * r);
      const double terms[] = {ddW, (N - 1) / r * dW, std::pow(W, p)};
      const double scale = std::max({std::abs(terms[0]), std::abs(terms[1]), terms[2]});
      worst = std::max(worst, std::abs(terms[0] + terms[1] + terms[2]) / scale);
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("linearized solutions") {
  const SolverConfig cfg;
  const auto f2 = NonlinearitySpec::power(2);
  const auto u2 = solve_ivp(f2, 12, 1.0, cfg);
  REQUIRE_FALSE(u2.first_zero());
  const auto phi2 = solve_linearized(f2, u2, cfg);
  CHECK_FALSE(phi2.zeros().empty());
  const auto [phi0, dphi0] = phi2.evaluate(0.0);
  CHECK(phi0 == 1.0);
  CHECK(dphi0 == 0.0);
  for (double z : phi2.zeros()) CHECK(std::abs(phi2.evaluate(z).first) <= 1e-8);

  const auto f5 = NonlinearitySpec::power(5);
  const auto u5 = solve_ivp(f5, 12, 1.0, cfg);
  const auto phi5 = solve_linearized(f5, u5, cfg);
  CHECK(phi5.zeros().empty());

  // phi = du/dalpha: compare with a centered difference of two solves.
  const double h = 1e-4;
  const auto up = solve_ivp(f2, 12, 1.0 + h, cfg), um = solve_ivp(f2, 12, 1.0 - h, cfg);
  for (double r : {0.5, 2.0, 5.0}) {
    const double fd = (up.evaluate(r).first - um.evaluate(r).first) / (2 * h);
    CHECK(phi2.evaluate(r).first == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("halving tolerances barely moves the first zero") {
  const auto f = NonlinearitySpec::power(2);
  const SolverConfig cfg;
  const auto a = solve_ivp(f, 3, 1.0, cfg), b = solve_ivp(f, 3, 1.0, cfg.halved());
  REQUIRE(a.first_zero());
  REQUIRE(b.first_zero());
  CHECK(std::abs(*a.first_zero() - *b.first_zero()) <= 10 * cfg.rtol * *a.first_zero());
}

TEST_CASE("pair solve resolves tiny differences") {
  const auto f = NonlinearitySpec::power(5);
  const auto pr = solve_pair(f, 12, 1.0, 1.0 + 1e-9, {1e-10, 1e-12, 100.0, 1e-12});
  CHECK(pr.crossings().empty());
  for (double r : {1.0, 10.0, 100.0}) CHECK(pr.evaluate(r).d > 0.0);

  const auto g = NonlinearitySpec::power(2);
  const auto q = solve_pair(g, 12, 1.0, 1.1, {});
  REQUIRE_FALSE(q.crossings().empty());
  const double r = q.crossings().front();
  const auto u = solve_ivp(g, 12, 1.0), v = solve_ivp(g, 12, 1.1);
  CHECK(std::abs(u.evaluate(r).first - v.evaluate(r).first) <= 1e-8);
}

TEST_CASE("exports") {
  const auto u = solve_ivp(NonlinearitySpec::power(2), 3, 1.0);
  const auto csv = profile_csv(u);
  CHECK(csv.rfind("r,u,du\n", 0) == 0);
  const auto j = profile_json(u);
  CHECK(j["N"] == 3);
  CHECK(j["alpha"] == 1.0);
  CHECK(j["first_zero"].get<double>() == *u.first_zero());
  const auto phi = solve_linearized(NonlinearitySpec::power(2), u);
  CHECK(linearized_csv(phi).rfind("r,phi,dphi\n", 0) == 0);
}
