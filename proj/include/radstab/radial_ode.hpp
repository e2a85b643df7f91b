#pragma once

/**
 * @file radial_ode.hpp
 * @brief Shooting for u'' + (N-1)/r u' + f(u) = 0, u(0) = alpha, u'(0) = 0.
 *
 * The coordinate singularity at r = 0 is stepped over with a Taylor series in
 * r^2 up to a start radius r_start; from there the adaptive integrator of
 * ode.hpp takes over.  Profiles stop at the first zero of u or at r_max.
 */

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "radstab/nonlinearity.hpp"
#include "radstab/ode.hpp"

namespace radstab {

struct SolverConfig {
  double rtol = 1e-10;
  double atol = 1e-12;
  double r_max = 1e3;
  double event_tol = 1e-12;  // zero refinement width in r

  SolverConfig halved() const { return {rtol / 2, atol / 2, r_max, event_tol / 2}; }
};

/// Even Taylor coefficients of the regular solution: u = c0 + c2 r^2 + c4 r^4 + c6 r^6.
struct SeriesStart {
  double c0, c2, c4, c6;
  double value(double r) const;
  double deviation(double r) const;  // value(r) - c0
  double slope(double r) const;
};

SeriesStart series_start(const Reaction& f, int N, double alpha);
double start_radius(const Reaction& f, double alpha);

class RadialProfile {
 public:
  RadialProfile(int N, double alpha, SolverConfig cfg, ode::Trajectory<1> traj,
                std::optional<double> first_zero);

  int N() const noexcept { return N_; }
  double alpha() const noexcept { return alpha_; }
  const SolverConfig& config() const noexcept { return cfg_; }
  /// Radius of the first zero, or empty when u > 0 on [0, r_end()].
  const std::optional<double>& first_zero() const noexcept { return first_zero_; }
  double r_end() const { return traj_.r_end(); }
  const ode::Trajectory<1>& trajectory() const noexcept { return traj_; }

  /// (u, u') at r by dense output.
  std::pair<double, double> evaluate(double r) const;
  /// u'' at r from the dense output.
  double second(double r) const;

 private:
  int N_;
  double alpha_;
  SolverConfig cfg_;
  ode::Trajectory<1> traj_;
  std::optional<double> first_zero_;
};

RadialProfile solve_ivp(const Reaction& f, int N, double alpha, const SolverConfig& cfg = {});

/// |u'' + (N-1)/r u' + f(u)| in units of atol + rtol * (largest term).
double scaled_residual(const Reaction& f, int N, double r, double u, double du, double ddu,
                       const SolverConfig& cfg);

/// Largest scaled residual over the midpoints of the accepted steps beyond r_from.
double max_midpoint_residual(const Reaction& f, const RadialProfile& profile, double r_from = 0.0);

/// Largest relative defect of -u'(r) r^{N-1} = int_0^r s^{N-1} f(u(s)) ds over the nodes.
double verify_mass_identity(const RadialProfile& profile, const Reaction& f);

/// min over nodes and midpoints of F(u(r)) - r^2/(2N); requires a profile without a zero.
double verify_F_lower_bound(const RadialProfile& profile, const NonlinearitySpec& spec);

class LinearizedProfile {
 public:
  LinearizedProfile(int N, double alpha, ode::Trajectory<2> traj, std::vector<double> zeros);

  int N() const noexcept { return N_; }
  double alpha() const noexcept { return alpha_; }
  const std::vector<double>& zeros() const noexcept { return zeros_; }
  double r_end() const { return traj_.r_end(); }
  const ode::Trajectory<2>& trajectory() const noexcept { return traj_; }
  /// (phi, phi') at r.
  std::pair<double, double> evaluate(double r) const;

 private:
  int N_;
  double alpha_;
  ode::Trajectory<2> traj_;
  std::vector<double> zeros_;
};

/// phi'' + (N-1)/r phi' + f'(u) phi = 0, phi(0) = 1, integrated jointly with the
/// base equation over the base profile's range.
LinearizedProfile solve_linearized(const Reaction& f, const RadialProfile& base,
                                   const SolverConfig& cfg = {});

/// Two regular solutions solved as (u_a, d = u_b - u_a) so that the sign of the
/// difference is resolved to relative accuracy even when d << u.
class PairProfile {
 public:
  PairProfile(int N, double alpha, double beta, ode::Trajectory<2> traj,
              std::vector<double> crossings, std::optional<double> zero_a,
              std::optional<double> zero_b);

  int N() const noexcept { return N_; }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  double r_end() const { return traj_.r_end(); }
  /// Sign changes of u_b - u_a while both are positive.
  const std::vector<double>& crossings() const noexcept { return crossings_; }
  const std::optional<double>& zero_a() const noexcept { return zero_a_; }
  const std::optional<double>& zero_b() const noexcept { return zero_b_; }
  const ode::Trajectory<2>& trajectory() const noexcept { return traj_; }

  struct Values {
    double u_a, u_b, d;
  };
  Values evaluate(double r) const;

 private:
  int N_;
  double alpha_, beta_;
  ode::Trajectory<2> traj_;
  std::vector<double> crossings_;
  std::optional<double> zero_a_, zero_b_;
};

/// Integrates until r_max or the first zero of either solution.
PairProfile solve_pair(const Reaction& f, int N, double alpha, double beta,
                       const SolverConfig& cfg = {});

/// CSV with header r,u,du over the accepted nodes.
std::string profile_csv(const RadialProfile& profile);
/// CSV with header r,phi,dphi.
std::string linearized_csv(const LinearizedProfile& profile);
nlohmann::json profile_json(const RadialProfile& profile);

}  // namespace radstab
