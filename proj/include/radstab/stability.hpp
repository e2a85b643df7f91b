#pragma once

/**
 * @file stability.hpp
 * @brief Per-alpha stability verdicts and the global structure type.
 *
 * Verdicts are asymmetric.  Unstable carries a verified crossing of two
 * positive profiles.  StableCertified needs a barrier (or a constant
 * f'F = q <= q_JL, for which the barrier is the solution family itself).
 * OrderedUpTo only records that no crossing was seen up to R.
 */

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "radstab/nonlinearity.hpp"
#include "radstab/radial_ode.hpp"
#include "radstab/scaling.hpp"

namespace radstab {

struct CrossingWitness {
  double r_star;
  double alpha;  // the profile shown unstable
  double beta;   // the lower initial value whose profile overtakes
  double u_alpha;
  double u_beta;
};

enum class VerdictKind { Unstable, StableCertified, OrderedUpTo, Inconclusive };
enum class Mechanism { Barrier, ExponentCriterion };

struct StabilityVerdict {
  VerdictKind kind = VerdictKind::Inconclusive;
  double alpha = 0.0;
  std::optional<CrossingWitness> witness;  // Unstable
  std::optional<Mechanism> mechanism;      // StableCertified
  double ordered_up_to = 0.0;              // OrderedUpTo
  std::string details;

  bool unstable() const noexcept { return kind == VerdictKind::Unstable; }
  bool certified() const noexcept { return kind == VerdictKind::StableCertified; }
};

std::string to_string(VerdictKind k);
std::string to_string(Mechanism m);

/// Bounds q1 <= f'(u)F(u) <= q2 on (0, ell); ell = infinity allowed.
struct Thm12Hypotheses {
  double q1;
  double q2;
  double ell;

  /// Throws HypothesisError unless 1 <= q1 <= q2, q1 <= q_JL and
  /// q2 (2N - 4 q1) <= (N-2)^2/4.
  void validate(int N) const;
};

/// Crossings of u_b - u_a on the range where both independent profiles are
/// positive.  Differences within ten times the solver noise are treated as
/// zero and never produce a crossing.
std::vector<double> intersection_test(const RadialProfile& a, const RadialProfile& b);

struct IntersectionOptions {
  std::vector<double> deltas{0.5, 0.1, 0.01};
};

/// Unstable if u(., alpha (1 - delta)) overtakes u(., alpha) while both are
/// positive for some delta on the ladder; OrderedUpTo(r_max) otherwise.
StabilityVerdict unstable_by_intersection(const Reaction& f, int N, double alpha,
                                          const SolverConfig& cfg = {},
                                          const IntersectionOptions& opts = {});

struct BarrierOptions {
  int points_per_decade = 64;
  double hardy_tol = 1e-9;
  /// Density of the sampled check of q1 <= f'F <= q2 on (floor, ell).
  int q_points_per_decade = 20;
  double q_slack = 1e-9;
};

/// Hardy-type barrier v(r) = F^{-1}(G(w(r, alpha0))) with w a model solution.
/// StableCertified when r^2 f'(v) <= (N-2)^2/4 and 0 < u(., alpha) < v on the
/// check grid; Inconclusive otherwise.
StabilityVerdict barrier_certificate(const NonlinearitySpec& spec, int N,
                                     const Thm12Hypotheses& hyp, double alpha,
                                     const SolverConfig& cfg = {},
                                     const BarrierOptions& opts = {});

/// Bounds fitted from sampled f'F: q1 = (1-eps) inf, q2 = (1+eps) sup on the
/// longest initial stretch (floor, ell) where the gate still holds.  Empty
/// when no stretch qualifies.
std::optional<Thm12Hypotheses> fit_hypotheses(const NonlinearitySpec& spec, int N,
                                              double eps = 1e-3, double cap = 1e12,
                                              int points_per_decade = 20);

enum class StructureType { I, II, III, Undetermined };
std::string to_string(StructureType t);

enum class Prediction { TypeI, TypeIIorIII, TypeIII, None };
std::string to_string(Prediction p);

struct PredictionReport {
  Prediction prediction = Prediction::None;
  std::string reason;
};

PredictionReport criteria_from_limits(const LimitEstimates& limits,
                                      const CriticalExponents& exponents);

struct ClassifyConfig {
  SolverConfig solver;
  double alpha_lo = 1e-3;
  double alpha_hi = 1e3;
  int alpha_count = 13;
  double bisection_rtol = 1e-3;
  bool use_barrier = true;
  std::optional<Thm12Hypotheses> hypotheses;  // fitted when empty
  IntersectionOptions intersection;
  BarrierOptions barrier;
  int threads = 1;
};

struct StructureClassification {
  StructureType type = StructureType::Undetermined;
  std::optional<double> alpha_star;
  std::optional<double> bracket_lo;  // stable-side end
  std::optional<double> bracket_hi;  // unstable end
  std::optional<StabilityVerdict> bracket_lo_evidence;
  std::optional<StabilityVerdict> bracket_hi_evidence;
  std::vector<StabilityVerdict> evidence;  // sorted by alpha
  PredictionReport prediction;
  LimitEstimates limits;
  CriticalExponents exponents;
  std::optional<Thm12Hypotheses> hypotheses;
  std::string summary;
};

StructureClassification classify_structure(const NonlinearitySpec& spec, int N,
                                           const ClassifyConfig& cfg = {});

struct OrderedReport {
  bool ordered = true;
  double min_gap = INFINITY;  // min over r in [0, R] of u(r, next) - u(r, prev)
  double min_gap_at = 0.0;
  std::optional<double> violation_at;
  std::string violation;
};

/// Strict pointwise ordering of consecutive profiles of an increasing alpha grid on [0, R].
OrderedReport ordered_family_check(const Reaction& f, int N, const std::vector<double>& alpha_grid,
                                   double R, const SolverConfig& cfg = {});

}  // namespace radstab
