#pragma once

/**
 * @file scaling.hpp
 * @brief Generalized scaling between u'' + (N-1)/r u' + f(u) = 0 and the model
 *        equations with g(v) = v^p or g(v) = e^v.
 *
 * The transform is F(u(x)) = lambda^2 G(v(y)) with x = lambda y.  It maps the
 * f-equation to the model equation plus a first-order perturbation whose
 * coefficient is f'(u)F(u) - q, so it is exact when f'F is constant.
 */

#include <optional>
#include <string>
#include <vector>

#include "radstab/nonlinearity.hpp"
#include "radstab/radial_ode.hpp"

namespace radstab {

/// Model nonlinearity g with closed-form G and G^{-1}.
class ScalingModel final : public Reaction {
 public:
  enum class Kind { Power, Exponential };

  static ScalingModel power(double p);
  static ScalingModel exponential();
  /// Power with p = q/(q-1) for q > 1, Exponential for q == 1.
  static ScalingModel from_q(double q);

  Kind kind() const noexcept { return kind_; }
  /// Exponent p; infinity for the exponential model.
  double p() const noexcept { return p_; }
  /// g'(v)G(v), constant: p/(p-1) or 1.
  double q() const noexcept;
  std::string describe() const;

  double value(double v) const override;
  double derivative(double v) const override;
  double second_derivative(double v) const override;
  double difference(double v, double d) const override;
  bool has_zero_event() const override { return kind_ == Kind::Power; }

  /// True when v lies in the model's domain ((0, inf) or all reals).
  bool in_domain(double v) const noexcept;
  double G(double v) const;
  double G_inv(double x) const;

 private:
  ScalingModel(Kind kind, double p) : kind_(kind), p_(p) {}
  Kind kind_;
  double p_;
};

/// Radial samples (r, u, u', u'') on an increasing grid.
struct SampledProfile {
  std::vector<double> r;
  std::vector<double> u;
  std::vector<double> du;
  std::vector<double> ddu;

  std::size_t size() const noexcept { return r.size(); }
};

/// Samples a solved profile at its accepted nodes.
SampledProfile sample(const RadialProfile& profile);
/// Samples a solved profile on the given radii.
SampledProfile sample(const RadialProfile& profile, const std::vector<double>& radii);

/// v(s) = G^{-1}(lambda^{-2} F(u(lambda s))) with v' and v'' by the chain rule.
SampledProfile push_forward(const NonlinearitySpec& spec, const SampledProfile& u,
                            const ScalingModel& model, double lambda);

/// u(x) = F^{-1}(lambda^2 G(v(x / lambda))); inverse of push_forward.
SampledProfile pull_back(const NonlinearitySpec& spec, const SampledProfile& v,
                         const ScalingModel& model, double lambda);

/// Largest relative mismatch of |u'|^2/(f^2 F) and |v'|^2/(g^2 G) over
/// corresponding samples of a pushed-forward pair.
double transform_invariant_defect(const NonlinearitySpec& spec, const SampledProfile& u,
                                  const ScalingModel& model, const SampledProfile& v);

/// Pointwise defect of the perturbed model equation
/// v'' + (N-1)/s v' + g(v) + (f'(u)F(u) - q) v'^2 / (g(v)G(v)) = 0, scaled by
/// the largest term.  u and v must be corresponding samples.
double perturbed_model_defect(const NonlinearitySpec& spec, int N, const SampledProfile& u,
                              const ScalingModel& model, const SampledProfile& v);

/// Closed-form singular model solution: W(r) = L r^{-2/(p-1)} or
/// Z(r) = -2 log r + log(2N - 4).
class ModelReference {
 public:
  ScalingModel::Kind kind() const noexcept { return kind_; }
  int N() const noexcept { return N_; }
  double p() const noexcept { return p_; }
  /// L for the power model; log(2N-4) for the exponential model.
  double level() const noexcept { return level_; }

  double value(double r) const;
  double slope(double r) const;
  double second(double r) const;

 private:
  friend ModelReference model_reference(const ScalingModel& model, int N);
  friend ModelReference singular_power_reference(double p, int N);
  ModelReference(ScalingModel::Kind kind, int N, double p, double level)
      : kind_(kind), N_(N), p_(p), level_(level) {}
  ScalingModel::Kind kind_;
  int N_;
  double p_;
  double level_;
};

/// Requires N >= 11 and p >= p_JL (power) or N >= 10 (exponential).
ModelReference model_reference(const ScalingModel& model, int N);
/// W for any p with N - 2 - 2/(p-1) > 0, without the stability hypotheses.
ModelReference singular_power_reference(double p, int N);

struct ModelBoundRow {
  double sigma;
  /// min over r of (W - w)/W (power) or Z - w (exponential).
  double reference_margin;
  double reference_margin_at;
  /// min over r of G(w) / (r^2/(2N - 4q)) - 1.
  double lower_bound_margin;
  double lower_bound_margin_at;
  bool pass;
};

struct ModelBoundReport {
  int N;
  std::string model;
  std::vector<ModelBoundRow> rows;
  bool pass = true;
};

/// Checks w(r, sigma) < W(r) (resp. Z) and G(w) > r^2/(2N - 4q) on (0, r_max].
///
/// Beyond a matching radius the gap to W is integrated directly in
/// Emden-Fowler variables with relative error control, so the margins stay
/// resolved where W - w falls far below |w|.
ModelBoundReport verify_model_bounds(const ScalingModel& model, int N,
                                     const std::vector<double>& sigma_grid,
                                     const SolverConfig& cfg = {});

/// beta with F(beta)/F(alpha) = G(sigma)/G(1).
double beta_of_alpha(const NonlinearitySpec& spec, const ScalingModel& model, double sigma,
                     double alpha);

/// lambda = sqrt(F(alpha)/G(1)).
double lambda_of_alpha(const NonlinearitySpec& spec, const ScalingModel& model, double alpha);

struct ConvergenceRow {
  double alpha;
  double beta;
  double lambda;
  double sup_error;
};

struct ConvergenceStudy {
  double sigma;
  std::optional<double> s0;  // first zero of z(., sigma); empty if none up to r_max
  double S;
  std::vector<ConvergenceRow> rows;

  bool strictly_decreasing() const;
};

struct ConvergenceOptions {
  int grid_points = 512;
  /// Window used when z(., sigma) has no zero and no S is given.
  double S_default = 10.0;
  /// Parallel workers over the alpha sequence.
  int threads = 1;
};

/// sup over [0, S] of |v(s, alpha) - z(s, sigma)| for each alpha.  A
/// nonpositive or NaN S selects 0.5 s0(sigma), or S_default when s0 is infinite.
ConvergenceStudy convergence_study(const NonlinearitySpec& spec, int N, const ScalingModel& model,
                                   double sigma, const std::vector<double>& alphas, double S,
                                   const SolverConfig& cfg = {},
                                   const ConvergenceOptions& opts = {});

/// Sign changes of z(., sigma1) - z(., sigma2) on (0, r_max].
std::vector<double> model_intersections(const ScalingModel& model, int N, double sigma1,
                                        double sigma2, double r_max, const SolverConfig& cfg = {});
int count_model_intersections(const ScalingModel& model, int N, double sigma1, double sigma2,
                              double r_max, const SolverConfig& cfg = {});

}  // namespace radstab
