#pragma once

/**
 * @file nonlinearity.hpp
 * @brief Nonlinearities f and the scalar functionals built from them.
 *
 * Every f handled here is positive, increasing and convex on (0, inf) with
 * 1/f integrable at infinity, so that
 *
 *     F(u) = int_u^inf ds / f(s)
 *
 * is finite, strictly decreasing and blows up as u -> 0.  The quantity
 * q(u) = f'(u) F(u) and its limits at 0 and infinity decide which side of the
 * Joseph-Lundgren threshold a nonlinearity sits on.
 */

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace radstab {

/// Source term of a radial equation u'' + (N-1)/r u' + f(u) = 0.
///
/// Implementations evaluate the odd extension for negative arguments so that
/// trial stages of an integrator may cross u = 0.
class Reaction {
 public:
  virtual ~Reaction() = default;

  virtual double value(double u) const = 0;
  virtual double derivative(double u) const = 0;
  virtual double second_derivative(double u) const = 0;

  /// f(u + d) - f(u) without cancellation when |d| << |u|.
  virtual double difference(double u, double d) const;

  /// False for reactions defined on the whole line (e^u); such profiles have
  /// no "first zero".
  virtual bool has_zero_event() const { return true; }
};

struct Power {
  double p;
};

struct PowerSum {
  double p1;
  double p2;
};

struct PowerRational {
  double p1;
  double p2;
};

struct Custom {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> ddf;
  std::function<double(double)> F;  // optional closed form of int_u^inf 1/f
  std::string name = "custom";
};

using Family = std::variant<Power, PowerSum, PowerRational, Custom>;

struct Derivatives {
  double f;
  double df;
  double ddf;
};

class TailCache;

/// Immutable description of f.  Safe to share across threads: the F cache of
/// a Custom family is built in the constructor.
class NonlinearitySpec final : public Reaction {
 public:
  static constexpr double kDefaultFloor = 1e-12;

  explicit NonlinearitySpec(Family family, double domain_floor = kDefaultFloor);

  static NonlinearitySpec power(double p);
  static NonlinearitySpec power_sum(double p1, double p2);
  static NonlinearitySpec power_rational(double p1, double p2);
  static NonlinearitySpec custom(Custom c, double domain_floor = kDefaultFloor);

  const Family& family() const noexcept { return family_; }
  double domain_floor() const noexcept { return floor_; }
  std::string describe() const;

  /// Bracketing range used by invert_F.
  std::pair<double, double> inversion_range() const noexcept { return range_; }
  NonlinearitySpec with_inversion_range(double lo, double hi) const;

  double value(double u) const override;
  double derivative(double u) const override;
  double second_derivative(double u) const override;
  double difference(double u, double d) const override;

  /// F(u); no domain checks (callers go through eval_F).
  double tail(double u) const;

  /// True when F has a closed form for this family.
  bool closed_form_tail() const noexcept;

 private:
  double raw_value(double u) const;
  double raw_derivative(double u) const;
  double raw_second(double u) const;

  Family family_;
  double floor_;
  std::pair<double, double> range_{1e-12, 1e12};
  std::shared_ptr<const TailCache> cache_;
};

/// int_u^inf ds / f(s) by adaptive Gauss-Kronrod in log s.  Exposed for
/// reactions other than NonlinearitySpec.
double tail_quadrature(const Reaction& f, double u);

Derivatives eval_derivatives(const NonlinearitySpec& spec, double u);
double eval_F(const NonlinearitySpec& spec, double u);
double invert_F(const NonlinearitySpec& spec, double x);

/// f'(u) F(u).
double q_of(const NonlinearitySpec& spec, double u);
/// f'(u)^2 / (f(u) f''(u)).
double curvature_ratio(const NonlinearitySpec& spec, double u);

struct LimitEstimate {
  std::optional<double> value;
  double uncertainty = 0.0;
  std::vector<double> grid;     // sample points, ordered towards the limit
  std::vector<double> samples;  // q_of at grid
};

struct LimitEstimates {
  LimitEstimate q0;
  LimitEstimate q_inf;
};

struct LimitOptions {
  double cap = 1e12;
  int window = 4;
  double agreement = 1e-3;
};

LimitEstimates estimate_limits(const NonlinearitySpec& spec,
                               const LimitOptions& opts = {});

struct CriticalExponents {
  int N;
  double p_S;
  double q_S;
  std::optional<double> p_JL;  // empty means +infinity
  std::optional<double> q_JL;
};

CriticalExponents critical_exponents(int N);

/// q (2N - 4q) compared against (N-2)^2/4; negative when q < q_JL.
double jl_gate(int N, double q);

struct HypothesisReport {
  bool pass = true;
  bool tail_integrable = true;
  double tail_slope = 0.0;
  std::vector<std::string> violations;
};

HypothesisReport check_hypotheses(const NonlinearitySpec& spec, double cap = 1e12,
                                  int points_per_decade = 20);

/// Log-spaced grid lo, ..., hi with the given density (both ends included).
std::vector<double> log_grid(double lo, double hi, int points_per_decade);

}  // namespace radstab
