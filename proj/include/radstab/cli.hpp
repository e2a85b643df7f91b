#pragma once

/**
 * @file cli.hpp
 * @brief Batch front end: validated run configs dispatched to the modules.
 *
 * A run produces report.json, summary.txt and command-specific CSV files.
 * Exit codes: 0 success, 1 invalid config or input, 2 hypothesis violation,
 * 3 consistency error, 4 numerical failure.
 */

#include <exception>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "radstab/radial_ode.hpp"
#include "radstab/report.hpp"
#include "radstab/scaling.hpp"
#include "radstab/stability.hpp"

namespace radstab {

enum class Command { Exponents, Solve, Scan, Classify, Transform, Singular, VerifyExamples };

std::string to_string(Command c);

struct NonlinearityConfig {
  std::string family;  // power | power_sum | power_rational
  double p = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double domain_floor = NonlinearitySpec::kDefaultFloor;

  NonlinearitySpec build() const;
};

struct ModelConfig {
  std::string kind;  // power | exponential
  double p = 0.0;

  ScalingModel build() const;
};

struct RunConfig {
  Command command = Command::Exponents;
  int N = 0;
  std::optional<NonlinearityConfig> nonlinearity;
  std::optional<double> alpha;
  std::vector<double> alpha_grid;
  std::vector<double> alpha_ladder{1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  std::optional<ModelConfig> model;
  std::optional<double> sigma;
  std::vector<double> sigma_grid;
  double S = 0.0;  // nonpositive: 0.5 s0(sigma)
  SolverConfig solver;
  int threads = 1;
  std::string out = "radstab-out";

  // classify
  double alpha_lo = 1e-3;
  double alpha_hi = 1e3;
  int alpha_count = 13;
  double bisection_rtol = 1e-3;
  bool use_barrier = true;
  std::optional<Thm12Hypotheses> hypotheses;

  // singular
  double r_min = 1e-2;
  std::optional<StructureType> structure;  // skips the classification run
  bool override_structure = false;

  // verify-examples
  double example_q1 = 1.2;
  double example_q2 = 1.3;
  double example_p1 = 5.0;
  double example_p2 = 3.0;

  /// Canonical JSON form; its SHA-256 is the config hash.
  Json canonical() const;
};

/// Validates a config object.  Unknown keys, wrong types and missing required
/// fields raise ConfigError.
RunConfig parse_config(const Json& j);

struct RunResult {
  int exit_code = 0;
  Json report;
  std::string summary;
  /// (file name, content) pairs besides report.json and summary.txt.
  std::vector<std::pair<std::string, std::string>> artifacts;
};

/// Exit code for an exception escaping a run.
int exit_code_for(const std::exception& e);

/// Executes the command.  Errors are caught and serialized into the report.
RunResult run(const RunConfig& cfg);

/// Writes report.json, summary.txt and the artifacts into dir (created if needed).
void write_artifacts(const RunResult& result, const std::string& dir);

}  // namespace radstab
