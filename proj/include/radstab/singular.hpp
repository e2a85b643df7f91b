#pragma once

/**
 * @file singular.hpp
 * @brief The singular solution u* as the increasing limit of u(., alpha).
 *
 * u* is only represented on [r_min, r_max] with r_min > 0.  The error
 * estimate is the last ladder increment, which bounds the true distance to
 * u* from below only.
 */

#include <functional>
#include <optional>
#include <vector>

#include "radstab/nonlinearity.hpp"
#include "radstab/radial_ode.hpp"
#include "radstab/stability.hpp"

namespace radstab {

struct SingularOptions {
  double r_min = 1e-2;
  int points_per_decade = 64;
  /// Structure type established by classify_structure; the ladder limit is
  /// only a singular solution under type II.
  std::optional<StructureType> structure;
  bool override_structure = false;
  int threads = 1;
};

struct SingularProfile {
  int N = 0;
  std::vector<double> ladder;
  std::vector<double> r;
  std::vector<double> u;   // top ladder member
  std::vector<double> du;
  /// u(r_i, ladder[k]) for every member.
  std::vector<std::vector<double>> members;
  /// increments[k][i] = u(r_i, ladder[k+1]) - u(r_i, ladder[k]), from pair solves.
  std::vector<std::vector<double>> increments;
  /// sup_i increments[k][i] / u(r_i, ladder[k+1]).
  std::vector<double> defects;
  double error_estimate = 0.0;  // last defect; a lower bound on the distance to u*
  double min_increment = 0.0;   // min over k, i of increments[k][i]
  /// Least-squares slope of log u against log r on [r_min, 10 r_min].
  double decay_exponent = 0.0;
  /// Largest scaled residual of the top member on [2 r_min, r_max].
  double residual_max = 0.0;
  /// min over r of (F(u*) - r^2/(2N)) / (r^2/(2N)).
  double F_lower_margin = 0.0;
};

/// Solves the ladder, checks u(., ladder[k+1]) > u(., ladder[k]) on
/// [r_min, r_max] and returns the top member as the approximation.
///
/// Throws PreconditionError unless the structure is type II (or overridden),
/// ConsistencyError when the ladder is not increasing or a member vanishes.
SingularProfile approximate_singular(const NonlinearitySpec& spec, int N,
                                     const std::vector<double>& alpha_ladder,
                                     const SolverConfig& cfg = {},
                                     const SingularOptions& opts = {});

/// sup over r in [lo, hi] of |u(r, ladder[k]) - ref(r)| / ref(r) for each member.
std::vector<double> reference_distances(const SingularProfile& profile,
                                        const std::function<double(double)>& ref, double lo,
                                        double hi);

struct DecayReport {
  double decay_exponent = 0.0;
  double exponent_bound = 0.0;  // -(N-2)/2
  double fit_tol = 0.05;
  bool exponent_ok = false;
  /// Smallest sampled u >= large_from above which f'F <= q_S on the whole
  /// sampled tail.
  double u0 = 0.0;
  double q_S = 0.0;
  /// f(u0) F(u0)^{q_S}.
  double C = 0.0;
  /// max over sampled u >= u0 of F(u) / B(u) with
  /// B(u) = (F(u0)^{1-q_S} + (q_S - 1)(u - u0)/C)^{-1/(q_S-1)}.
  double bound_ratio = 0.0;
  bool bound_ok = false;
  /// sup over sampled u >= u0 of F(u) u^{4/(N-2)}.
  double scaled_sup = 0.0;
  bool pass = false;
};

/// Decay of u* near r_min against -(N-2)/2, and F(u) <= C u^{-4/(N-2)} for
/// large u.  Throws HypothesisError when f'F <= q_S fails at the sampled tail.
DecayReport verify_decay_bounds(const SingularProfile& profile, const NonlinearitySpec& spec,
                                const CriticalExponents& exponents, double fit_tol = 0.05,
                                double cap = 1e12, double large_from = 1e2);

struct HardyReport {
  double min_margin = 0.0;  // min over r of (N-2)^2/4 - r^2 f'(u*(r))
  double at = 0.0;
  double bound = 0.0;       // (N-2)^2/4
  /// A nonnegative margin certifies the quadratic form on the covered annulus;
  /// a negative one does not disprove stability.
  bool certified = false;
};

HardyReport singular_hardy_check(const SingularProfile& profile, const Reaction& f, int N);

}  // namespace radstab
