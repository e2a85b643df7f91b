#include "radstab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "radstab/errors.hpp"
#include "radstab/format.hpp"
#include "radstab/parallel.hpp"
#include "radstab/singular.hpp"

namespace radstab {

namespace {

const std::map<std::string, Command> kCommands{
    {"exponents", Command::Exponents},   {"solve", Command::Solve},
    {"scan", Command::Scan},             {"classify", Command::Classify},
    {"transform", Command::Transform},   {"singular", Command::Singular},
    {"verify-examples", Command::VerifyExamples}};

std::string num(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

// ---------------------------------------------------------------------------
// Schema helpers

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

double get_number(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError("'" + key + "' must be finite");
  return x;
}

double get_positive(const Json& j, const std::string& key) {
  const double x = get_number(j, key);
  if (!(x > 0.0)) throw ConfigError("'" + key + "' must be positive");
  return x;
}

int get_int(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return v.get<int>();
}

bool get_bool(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError("'" + key + "' must be a boolean");
  return v.get<bool>();
}

std::string get_string(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> get_increasing(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError("'" + key + "' must be a nonempty array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number() || !(x.get<double>() > 0.0) || !std::isfinite(x.get<double>()))
      throw ConfigError("'" + key + "' entries must be positive finite numbers");
    out.push_back(x.get<double>());
    if (out.size() > 1 && !(out.back() > out[out.size() - 2]))
      throw ConfigError("'" + key + "' must be strictly increasing");
  }
  return out;
}

Json array_of(const std::vector<double>& xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(x);
  return a;
}

// ---------------------------------------------------------------------------
// Commands

SolverConfig solver_of(const RunConfig& cfg) { return cfg.solver; }

NonlinearitySpec spec_of(const RunConfig& cfg) {
  if (!cfg.nonlinearity) throw ConfigError("'nonlinearity' is required for this command");
  return cfg.nonlinearity->build();
}

double required(const std::optional<double>& x, const char* key) {
  if (!x) throw ConfigError(std::string("'") + key + "' is required for this command");
  return *x;
}

void cmd_exponents(const RunConfig& cfg, RunResult& res) {
  const auto e = critical_exponents(cfg.N);
  res.report["exponents"] = to_json(e);
  std::ostringstream s;
  s << "N = " << cfg.N << "\n"
    << "p_S = " << fmt17(e.p_S) << ", q_S = " << fmt17(e.q_S) << "\n";
  if (e.q_JL) {
    const double g = jl_gate(cfg.N, *e.q_JL);
    res.report["gate_at_q_JL"] = g;
    s << "p_JL = " << fmt17(*e.p_JL) << ", q_JL = " << fmt17(*e.q_JL) << "\n"
      << "q(2N-4q) - (N-2)^2/4 at q_JL = " << fmt17(g) << "\n";
  } else {
    s << "p_JL = inf (N <= 10)\n";
  }
  res.summary += s.str();
  res.report["headline"] = "exponents for N = " + std::to_string(cfg.N);
}

void cmd_solve(const RunConfig& cfg, RunResult& res) {
  const auto spec = spec_of(cfg);
  const double alpha = required(cfg.alpha, "alpha");
  const auto profile = solve_ivp(spec, cfg.N, alpha, solver_of(cfg));
  Json j = profile_json(profile);
  j["residual_max"] = max_midpoint_residual(spec, profile);
  j["mass_defect"] = verify_mass_identity(profile, spec);
  if (!profile.first_zero()) j["F_lower_margin"] = verify_F_lower_bound(profile, spec);
  const auto lin = solve_linearized(spec, profile, solver_of(cfg));
  j["linearized_zeros"] = array_of(lin.zeros());
  res.report["profile"] = j;
  res.artifacts.emplace_back("profile.csv", profile_csv(profile));
  res.artifacts.emplace_back("linearized.csv", linearized_csv(lin));
  std::ostringstream s;
  s << "u(0) = " << num(alpha) << ", f = " << spec.describe() << ", N = " << cfg.N << "\n"
    << "first zero: "
    << (profile.first_zero() ? num(*profile.first_zero()) : "none up to r = " + num(profile.r_end()))
    << "\n"
    << "linearized zeros: " << lin.zeros().size() << "\n";
  res.summary += s.str();
  res.report["headline"] = profile.first_zero() ? "first zero at r = " + fmt17(*profile.first_zero())
                                                : std::string("positive on the solved range");
}

void cmd_scan(const RunConfig& cfg, RunResult& res) {
  const auto spec = spec_of(cfg);
  if (cfg.alpha_grid.empty()) throw ConfigError("'alpha_grid' is required for scan");
  std::vector<StabilityVerdict> verdicts(cfg.alpha_grid.size());
  std::vector<std::optional<double>> zeros(cfg.alpha_grid.size());
  parallel_for(cfg.alpha_grid.size(), cfg.threads, [&](std::size_t i) {
    verdicts[i] = unstable_by_intersection(spec, cfg.N, cfg.alpha_grid[i], solver_of(cfg));
    zeros[i] = solve_ivp(spec, cfg.N, cfg.alpha_grid[i], solver_of(cfg)).first_zero();
  });
  Json rows = Json::array();
  std::string csv = "alpha,first_zero,verdict,r_star\n";
  std::size_t unstable = 0;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    Json row = to_json(verdicts[i]);
    row["first_zero"] = zeros[i] ? Json(*zeros[i]) : Json();
    rows.push_back(row);
    unstable += verdicts[i].unstable();
    csv += fmt17(cfg.alpha_grid[i]) + "," + (zeros[i] ? fmt17(*zeros[i]) : "") + "," +
           to_string(verdicts[i].kind) + "," +
           (verdicts[i].witness ? fmt17(verdicts[i].witness->r_star) : "") + "\n";
  }
  res.report["scan"] = rows;
  const auto ordered = ordered_family_check(spec, cfg.N, cfg.alpha_grid, cfg.solver.r_max, solver_of(cfg));
  res.report["ordered"] = to_json(ordered);
  res.artifacts.emplace_back("scan.csv", csv);
  res.summary += "f = " + spec.describe() + ", N = " + std::to_string(cfg.N) + "\n" +
                 std::to_string(unstable) + " of " + std::to_string(verdicts.size()) +
                 " alpha values unstable\n" + "ordered on [0, " + num(cfg.solver.r_max) +
                 "]: " + (ordered.ordered ? "yes" : "no (" + ordered.violation + ")") + "\n";
  res.report["headline"] =
      std::to_string(unstable) + "/" + std::to_string(verdicts.size()) + " unstable";
}

ClassifyConfig classify_config(const RunConfig& cfg) {
  ClassifyConfig cc;
  cc.solver = solver_of(cfg);
  cc.alpha_lo = cfg.alpha_lo;
  cc.alpha_hi = cfg.alpha_hi;
  cc.alpha_count = cfg.alpha_count;
  cc.bisection_rtol = cfg.bisection_rtol;
  cc.use_barrier = cfg.use_barrier;
  cc.hypotheses = cfg.hypotheses;
  cc.threads = cfg.threads;
  return cc;
}

std::string evidence_csv(const StructureClassification& c) {
  std::string csv = "alpha,verdict,r_star\n";
  for (const auto& v : c.evidence)
    csv += fmt17(v.alpha) + "," + to_string(v.kind) + "," + (v.witness ? fmt17(v.witness->r_star) : "") +
           "\n";
  return csv;
}

void cmd_classify(const RunConfig& cfg, RunResult& res) {
  const auto spec = spec_of(cfg);
  const auto c = classify_structure(spec, cfg.N, classify_config(cfg));
  res.report["classification"] = to_json(c);
  res.artifacts.emplace_back("evidence.csv", evidence_csv(c));
  std::ostringstream s;
  s << "f = " << spec.describe() << ", N = " << cfg.N << "\n"
    << "prediction from limits: " << to_string(c.prediction.prediction) << " ("
    << c.prediction.reason << ")\n"
    << c.summary << "\n";
  for (const auto& v : c.evidence) s << "  alpha = " << num(v.alpha) << ": " << to_string(v.kind) << "\n";
  res.summary += s.str();
  res.report["headline"] = "type " + to_string(c.type);
}

void cmd_transform(const RunConfig& cfg, RunResult& res) {
  const auto spec = spec_of(cfg);
  if (!cfg.model) throw ConfigError("'model' is required for transform");
  if (cfg.alpha_grid.empty()) throw ConfigError("'alpha_grid' is required for transform");
  const double sigma = required(cfg.sigma, "sigma");
  const auto model = cfg.model->build();
  ConvergenceOptions co;
  co.threads = cfg.threads;
  const auto study = convergence_study(spec, cfg.N, model, sigma, cfg.alpha_grid, cfg.S, solver_of(cfg), co);
  res.report["convergence"] = to_json(study);

  std::string conv_csv = "alpha,beta,lambda,sup_error\n";
  for (const auto& r : study.rows)
    conv_csv += fmt17(r.alpha) + "," + fmt17(r.beta) + "," + fmt17(r.lambda) + "," + fmt17(r.sup_error) + "\n";
  res.artifacts.emplace_back("convergence.csv", conv_csv);

  // Pointwise transform checks on the last alpha.
  const auto& last = study.rows.back();
  SolverConfig c = solver_of(cfg);
  c.r_max = 1.01 * last.lambda * study.S;
  const auto u = solve_ivp(spec, cfg.N, last.beta, c);
  std::vector<double> radii;
  for (const auto& n : u.trajectory().nodes())
    if (n.r <= last.lambda * study.S) radii.push_back(n.r);
  const auto us = sample(u, radii);
  const auto vs = push_forward(spec, us, model, last.lambda);
  const auto back = pull_back(spec, vs, model, last.lambda);
  double roundtrip = 0.0;
  for (std::size_t i = 0; i < us.size(); ++i)
    roundtrip = std::max(roundtrip, std::abs(back.u[i] - us.u[i]) / std::abs(us.u[i]));
  res.report["transform"] = {{"alpha", last.alpha},
                             {"beta", last.beta},
                             {"lambda", last.lambda},
                             {"roundtrip_error", roundtrip},
                             {"invariant_defect", transform_invariant_defect(spec, us, model, vs)},
                             {"perturbed_model_defect", perturbed_model_defect(spec, cfg.N, us, model, vs)}};
  std::string csv = "s,v,dv\n";
  for (std::size_t i = 0; i < vs.size(); ++i)
    csv += fmt17(vs.r[i]) + "," + fmt17(vs.u[i]) + "," + fmt17(vs.du[i]) + "\n";
  res.artifacts.emplace_back("transform.csv", csv);

  if (!cfg.sigma_grid.empty())
    res.report["model_bounds"] = to_json(verify_model_bounds(model, cfg.N, cfg.sigma_grid, solver_of(cfg)));

  std::ostringstream s;
  s << "f = " << spec.describe() << ", model " << model.describe() << ", sigma = " << num(sigma)
    << ", S = " << num(study.S) << "\n";
  for (const auto& r : study.rows) s << "  alpha = " << num(r.alpha) << ": sup error " << num(r.sup_error) << "\n";
  s << "sup error strictly decreasing: " << (study.strictly_decreasing() ? "yes" : "no") << "\n";
  res.summary += s.str();
  res.report["headline"] =
      std::string("sup error ") + (study.strictly_decreasing() ? "decreasing" : "not decreasing");
}

void cmd_singular(const RunConfig& cfg, RunResult& res) {
  const auto spec = spec_of(cfg);
  SingularOptions so;
  so.r_min = cfg.r_min;
  so.override_structure = cfg.override_structure;
  so.threads = cfg.threads;
  so.structure = cfg.structure;
  if (!so.structure && !so.override_structure) {
    const auto c = classify_structure(spec, cfg.N, classify_config(cfg));
    so.structure = c.type;
    res.report["classification"] = to_json(c);
  }
  const auto prof = approximate_singular(spec, cfg.N, cfg.alpha_ladder, solver_of(cfg), so);
  const auto exps = critical_exponents(cfg.N);
  const auto decay = verify_decay_bounds(prof, spec, exps);
  const auto hardy = singular_hardy_check(prof, spec, cfg.N);
  Json j = to_json(prof);
  j["hardy_margin"] = hardy.min_margin;
  j["hardy"] = to_json(hardy);
  j["decay"] = to_json(decay);
  j["note"] =
      "the ladder increment is a lower bound on the distance to the limit; a nonnegative Hardy "
      "margin certifies the quadratic form only for test functions supported in the covered "
      "annulus";
  if (const auto* p = std::get_if<Power>(&spec.family()); p && cfg.N - 2.0 - 2.0 / (p->p - 1.0) > 0.0) {
    const auto W = singular_power_reference(p->p, cfg.N);
    const double lo = std::max(1.0, prof.r.front()), hi = std::min(10.0, prof.r.back());
    j["reference"] = {{"L", W.level()},
                      {"window", array_of({lo, hi})},
                      {"distances", array_of(reference_distances(prof, [&](double r) { return W.value(r); }, lo, hi))}};
  }
  res.report["singular"] = j;
  res.artifacts.emplace_back("singular.csv", singular_csv(prof));
  std::ostringstream s;
  s << "f = " << spec.describe() << ", N = " << cfg.N << "\n"
    << "last ladder increment (lower bound on the error): " << num(prof.error_estimate) << "\n"
    << "decay exponent near r_min: " << num(prof.decay_exponent) << "\n"
    << "Hardy margin: " << num(hardy.min_margin) << " at r = " << num(hardy.at) << "\n";
  res.summary += s.str();
  res.report["headline"] = "Hardy margin " + fmt17(hardy.min_margin);
}

void cmd_verify_examples(const RunConfig& cfg, RunResult& res) {
  const int N = cfg.N;
  if (N < 11) throw ConfigError("verify-examples needs N >= 11");
  const auto e = critical_exponents(N);
  const double qjl = *e.q_JL;
  struct Row {
    std::string name;
    bool pass;
    std::string detail;
  };
  std::vector<Row> rows;
  auto add = [&](std::string name, bool pass, std::string detail) {
    rows.push_back({std::move(name), pass, std::move(detail)});
  };

  const SolverConfig sc = solver_of(cfg);
  const ClassifyConfig cc = classify_config(cfg);

  // Power-sum example.
  {
    const double q1 = cfg.example_q1, q2 = cfg.example_q2;
    const double p1 = q1 / (q1 - 1.0), p2 = q2 / (q2 - 1.0);
    const auto spec = NonlinearitySpec::power_sum(p1, p2);
    const double lhs = q2 * (2.0 * N - 4.0 * q1), rhs = (N - 2.0) * (N - 2.0) / 4.0;
    add("power_sum: q2(2N-4q1) <= (N-2)^2/4", lhs <= rhs, num(lhs) + " vs " + num(rhs));
    add("power_sum: q1 < q2 <= q_JL", 1.0 < q1 && q1 < q2 && q2 <= qjl,
        "q_JL = " + num(qjl));
    add("exponent gate: q(2N-4q) - (N-2)^2/4 = 0 at q_JL",
        std::abs(jl_gate(N, qjl)) <= 1e-10 * rhs, fmt17(jl_gate(N, qjl)));
    add("exponent gate: negative at q1", jl_gate(N, q1) < 0.0, fmt17(jl_gate(N, q1)));

    double cmin = INFINITY, cmax = -INFINITY, cmin_at = 0.0, qmin = INFINITY, qmax = -INFINITY,
           qmin_at = 0.0;
    std::vector<double> grid(200);
    for (int i = 0; i < 200; ++i) grid[i] = std::pow(10.0, -6.0 + 12.0 * i / 199.0);
    for (double u : grid) {
      const double c = curvature_ratio(spec, u), q = q_of(spec, u);
      if (c < cmin) cmin = c, cmin_at = u;
      cmax = std::max(cmax, c);
      if (q < qmin) qmin = q, qmin_at = u;
      qmax = std::max(qmax, q);
    }
    add("power_sum: q1 <= f'^2/(f f'') <= q2 on [1e-6, 1e6]",
        cmin >= q1 * (1 - 1e-12) && cmax <= q2 * (1 + 1e-12),
        "range [" + fmt17(cmin) + ", " + fmt17(cmax) + "], min at u = " + num(cmin_at));
    add("power_sum: q1 <= f'F <= q2 on [1e-6, 1e6]",
        qmin >= q1 * (1 - 1e-9) && qmax <= q2 * (1 + 1e-9),
        "range [" + fmt17(qmin) + ", " + fmt17(qmax) + "], min at u = " + num(qmin_at));

    const auto c = classify_structure(spec, N, cc);
    add("power_sum: type II", c.type == StructureType::II, c.summary);
    res.report["power_sum_classification"] = to_json(c);

    const auto bounds = verify_model_bounds(ScalingModel::power(p1), N, {0.5, 1.0, 2.0}, sc);
    add("power_sum: model bounds w < W and G(w) > r^2/(2N-4q)", bounds.pass, bounds.model);
    double worst = INFINITY;
    for (double a : {0.1, 1.0, 10.0})
      worst = std::min(worst, verify_F_lower_bound(solve_ivp(spec, N, a, sc), spec));
    add("power_sum: F(u) >= r^2/(2N)", worst >= -1e-9, "min margin " + fmt17(worst));
  }

  // Rational example.
  {
    const double p1 = cfg.example_p1, p2 = cfg.example_p2;
    const auto spec = NonlinearitySpec::power_rational(p1, p2);
    const double q0 = p1 / (p1 - 1.0), qinf = (p1 - p2) / (p1 - p2 - 1.0);
    const auto lim = estimate_limits(spec);
    const bool lim_ok = lim.q0.value && lim.q_inf.value && std::abs(*lim.q0.value - q0) <= 1e-3 &&
                        std::abs(*lim.q_inf.value - qinf) <= 1e-3;
    add("power_rational: limits q0 and q_inf", lim_ok,
        "q0 = " + (lim.q0.value ? fmt17(*lim.q0.value) : std::string("?")) +
            ", q_inf = " + (lim.q_inf.value ? fmt17(*lim.q_inf.value) : std::string("?")));
    const auto pred = criteria_from_limits(lim, e);
    add("power_rational: limits predict type III", pred.prediction == Prediction::TypeIII, pred.reason);
    const auto c = classify_structure(spec, N, cc);
    add("power_rational: type III", c.type == StructureType::III, c.summary);
    res.report["power_rational_classification"] = to_json(c);
    const auto bounds = verify_model_bounds(ScalingModel::power(p1), N, {0.5, 1.0, 2.0}, sc);
    add("power_rational: model bounds w < W and G(w) > r^2/(2N-4q)", bounds.pass, bounds.model);
    const double worst = verify_F_lower_bound(solve_ivp(spec, N, 0.1, sc), spec);
    add("power_rational: F(u) >= r^2/(2N)", worst >= -1e-9, "min margin " + fmt17(worst));
  }

  Json matrix = Json::array();
  std::string failing;
  std::ostringstream s;
  for (const auto& r : rows) {
    matrix.push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    s << (r.pass ? "PASS  " : "FAIL  ") << r.name << "  [" << r.detail << "]\n";
    if (!r.pass) failing += (failing.empty() ? "" : "; ") + r.name;
  }
  res.report["matrix"] = matrix;
  res.summary += s.str();
  res.report["headline"] = failing.empty() ? "all rows pass" : "failing: " + failing;
  if (!failing.empty()) throw ConsistencyError("failing rows: " + failing);
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const HypothesisError*>(&e)) return "HypothesisError";
  if (dynamic_cast<const PreconditionError*>(&e)) return "PreconditionError";
  if (dynamic_cast<const ConsistencyError*>(&e)) return "ConsistencyError";
  if (dynamic_cast<const AccuracyError*>(&e)) return "AccuracyError";
  if (dynamic_cast<const StiffnessError*>(&e)) return "StiffnessError";
  if (dynamic_cast<const RangeError*>(&e)) return "RangeError";
  return "Error";
}

}  // namespace

std::string to_string(Command c) {
  for (const auto& [name, cmd] : kCommands)
    if (cmd == c) return name;
  return "?";
}

NonlinearitySpec NonlinearityConfig::build() const {
  if (family == "power") return NonlinearitySpec(Power{p}, domain_floor);
  if (family == "power_sum") return NonlinearitySpec(PowerSum{p1, p2}, domain_floor);
  if (family == "power_rational") return NonlinearitySpec(PowerRational{p1, p2}, domain_floor);
  throw ConfigError("unknown nonlinearity family '" + family + "'");
}

ScalingModel ModelConfig::build() const {
  if (kind == "power") return ScalingModel::power(p);
  if (kind == "exponential") return ScalingModel::exponential();
  throw ConfigError("unknown model kind '" + kind + "'");
}

Json RunConfig::canonical() const {
  Json j{{"command", to_string(command)},
         {"N", N},
         {"rtol", solver.rtol},
         {"atol", solver.atol},
         {"event_tol", solver.event_tol},
         {"r_max", solver.r_max}};
  if (nonlinearity) {
    Json n{{"family", nonlinearity->family}, {"domain_floor", nonlinearity->domain_floor}};
    if (nonlinearity->family == "power")
      n["p"] = nonlinearity->p;
    else
      n["p1"] = nonlinearity->p1, n["p2"] = nonlinearity->p2;
    j["nonlinearity"] = n;
  }
  switch (command) {
    case Command::Exponents:
      break;
    case Command::Solve:
      if (alpha) j["alpha"] = *alpha;
      break;
    case Command::Scan:
      j["alpha_grid"] = array_of(alpha_grid);
      break;
    case Command::Transform:
      j["alpha_grid"] = array_of(alpha_grid);
      if (model) j["model"] = {{"kind", model->kind}, {"p", model->p}};
      if (sigma) j["sigma"] = *sigma;
      j["sigma_grid"] = array_of(sigma_grid);
      j["S"] = S;
      break;
    case Command::Singular:
      j["alpha_ladder"] = array_of(alpha_ladder);
      j["r_min"] = r_min;
      j["override_structure"] = override_structure;
      if (structure) j["structure"] = radstab::to_string(*structure);
      [[fallthrough]];
    case Command::Classify:
    case Command::VerifyExamples:
      j["alpha_lo"] = alpha_lo;
      j["alpha_hi"] = alpha_hi;
      j["alpha_count"] = alpha_count;
      j["bisection_rtol"] = bisection_rtol;
      j["use_barrier"] = use_barrier;
      if (hypotheses) j["hypotheses"] = to_json(*hypotheses);
      if (command == Command::VerifyExamples)
        j["examples"] = {{"q1", example_q1}, {"q2", example_q2}, {"p1", example_p1}, {"p2", example_p2}};
      break;
  }
  return j;
}

RunConfig parse_config(const Json& j) {
  reject_unknown(j,
                 {"command", "N", "nonlinearity", "alpha", "alpha_grid", "alpha_ladder", "model",
                  "sigma", "sigma_grid", "S", "r_max", "rtol", "atol", "event_tol", "threads",
                  "out", "alpha_lo", "alpha_hi", "alpha_count", "bisection_rtol", "use_barrier",
                  "hypotheses", "r_min", "structure", "override_structure", "examples"},
                 "config");
  RunConfig c;
  try {
    if (!j.contains("command")) throw ConfigError("'command' is required");
    const auto name = get_string(j, "command");
    const auto it = kCommands.find(name);
    if (it == kCommands.end()) throw ConfigError("unknown command '" + name + "'");
    c.command = it->second;
    if (!j.contains("N")) throw ConfigError("'N' is required");
    c.N = get_int(j, "N");
    if (c.N < 3) throw ConfigError("'N' must be at least 3");

    if (j.contains("nonlinearity")) {
      const Json& n = j.at("nonlinearity");
      reject_unknown(n, {"family", "p", "p1", "p2", "domain_floor"}, "nonlinearity");
      NonlinearityConfig nc;
      nc.family = get_string(n, "family");
      if (nc.family == "power") {
        if (!n.contains("p") || n.contains("p1") || n.contains("p2"))
          throw ConfigError("power takes exactly 'p'");
        nc.p = get_number(n, "p");
      } else if (nc.family == "power_sum" || nc.family == "power_rational") {
        if (!n.contains("p1") || !n.contains("p2") || n.contains("p"))
          throw ConfigError(nc.family + " takes exactly 'p1' and 'p2'");
        nc.p1 = get_number(n, "p1");
        nc.p2 = get_number(n, "p2");
      } else {
        throw ConfigError("unknown nonlinearity family '" + nc.family + "'");
      }
      if (n.contains("domain_floor")) nc.domain_floor = get_positive(n, "domain_floor");
      c.nonlinearity = nc;
    }
    if (j.contains("model")) {
      const Json& m = j.at("model");
      reject_unknown(m, {"kind", "p"}, "model");
      ModelConfig mc;
      mc.kind = get_string(m, "kind");
      if (mc.kind == "power") {
        if (!m.contains("p")) throw ConfigError("power model needs 'p'");
        mc.p = get_number(m, "p");
        if (!(mc.p > 1.0)) throw ConfigError("model 'p' must exceed 1");
      } else if (mc.kind == "exponential") {
        if (m.contains("p")) throw ConfigError("exponential model takes no 'p'");
      } else {
        throw ConfigError("unknown model kind '" + mc.kind + "'");
      }
      c.model = mc;
    }
    if (j.contains("alpha")) c.alpha = get_positive(j, "alpha");
    if (j.contains("alpha_grid")) c.alpha_grid = get_increasing(j, "alpha_grid");
    if (j.contains("alpha_ladder")) c.alpha_ladder = get_increasing(j, "alpha_ladder");
    if (j.contains("sigma")) c.sigma = get_number(j, "sigma");
    if (j.contains("sigma_grid")) {
      const Json& g = j.at("sigma_grid");
      if (!g.is_array() || g.empty()) throw ConfigError("'sigma_grid' must be a nonempty array");
      for (const auto& x : g) {
        if (!x.is_number()) throw ConfigError("'sigma_grid' entries must be numbers");
        c.sigma_grid.push_back(x.get<double>());
      }
    }
    if (j.contains("S")) c.S = get_number(j, "S");
    if (j.contains("r_max")) c.solver.r_max = get_positive(j, "r_max");
    if (j.contains("rtol")) c.solver.rtol = get_positive(j, "rtol");
    if (j.contains("atol")) c.solver.atol = get_positive(j, "atol");
    if (j.contains("event_tol")) c.solver.event_tol = get_positive(j, "event_tol");
    if (j.contains("threads")) {
      c.threads = get_int(j, "threads");
      if (c.threads < 1) throw ConfigError("'threads' must be at least 1");
    }
    if (j.contains("out")) c.out = get_string(j, "out");
    if (j.contains("alpha_lo")) c.alpha_lo = get_positive(j, "alpha_lo");
    if (j.contains("alpha_hi")) c.alpha_hi = get_positive(j, "alpha_hi");
    if (!(c.alpha_hi >= c.alpha_lo)) throw ConfigError("'alpha_hi' must not be below 'alpha_lo'");
    if (j.contains("alpha_count")) {
      c.alpha_count = get_int(j, "alpha_count");
      if (c.alpha_count < 1) throw ConfigError("'alpha_count' must be at least 1");
    }
    if (j.contains("bisection_rtol")) c.bisection_rtol = get_positive(j, "bisection_rtol");
    if (j.contains("use_barrier")) c.use_barrier = get_bool(j, "use_barrier");
    if (j.contains("hypotheses")) {
      const Json& h = j.at("hypotheses");
      reject_unknown(h, {"q1", "q2", "ell"}, "hypotheses");
      if (!h.contains("q1") || !h.contains("q2")) throw ConfigError("hypotheses need 'q1' and 'q2'");
      Thm12Hypotheses hyp{get_number(h, "q1"), get_number(h, "q2"), INFINITY};
      if (h.contains("ell") && !h.at("ell").is_null()) hyp.ell = get_positive(h, "ell");
      c.hypotheses = hyp;
    }
    if (j.contains("r_min")) c.r_min = get_positive(j, "r_min");
    if (j.contains("structure")) {
      const auto s = get_string(j, "structure");
      if (s == "I") c.structure = StructureType::I;
      else if (s == "II") c.structure = StructureType::II;
      else if (s == "III") c.structure = StructureType::III;
      else throw ConfigError("'structure' must be one of I, II, III");
    }
    if (j.contains("override_structure")) c.override_structure = get_bool(j, "override_structure");
    if (j.contains("examples")) {
      const Json& x = j.at("examples");
      reject_unknown(x, {"q1", "q2", "p1", "p2"}, "examples");
      if (x.contains("q1")) c.example_q1 = get_number(x, "q1");
      if (x.contains("q2")) c.example_q2 = get_number(x, "q2");
      if (x.contains("p1")) c.example_p1 = get_number(x, "p1");
      if (x.contains("p2")) c.example_p2 = get_number(x, "p2");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  switch (c.command) {
    case Command::Exponents:
    case Command::VerifyExamples:
      break;
    case Command::Solve:
      if (!c.nonlinearity || !c.alpha) throw ConfigError("solve needs 'nonlinearity' and 'alpha'");
      break;
    case Command::Scan:
      if (!c.nonlinearity || c.alpha_grid.empty())
        throw ConfigError("scan needs 'nonlinearity' and 'alpha_grid'");
      break;
    case Command::Classify:
    case Command::Singular:
      if (!c.nonlinearity) throw ConfigError(to_string(c.command) + " needs 'nonlinearity'");
      break;
    case Command::Transform:
      if (!c.nonlinearity || !c.model || !c.sigma || c.alpha_grid.empty())
        throw ConfigError("transform needs 'nonlinearity', 'model', 'sigma' and 'alpha_grid'");
      break;
  }
  return c;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 1;
  if (dynamic_cast<const HypothesisError*>(&e) || dynamic_cast<const PreconditionError*>(&e))
    return 2;
  if (dynamic_cast<const ConsistencyError*>(&e)) return 3;
  return 4;
}

RunResult run(const RunConfig& cfg) {
  RunResult res;
  const Json canon = cfg.canonical();
  res.report["command"] = to_string(cfg.command);
  res.report["config"] = canon;
  res.report["config_hash"] = sha256_hex(dump_json(canon, 0));
  res.report["tolerances"] = {{"rtol", cfg.solver.rtol},
                              {"atol", cfg.solver.atol},
                              {"event_tol", cfg.solver.event_tol},
                              {"r_max", cfg.solver.r_max}};
  try {
    switch (cfg.command) {
      case Command::Exponents: cmd_exponents(cfg, res); break;
      case Command::Solve: cmd_solve(cfg, res); break;
      case Command::Scan: cmd_scan(cfg, res); break;
      case Command::Classify: cmd_classify(cfg, res); break;
      case Command::Transform: cmd_transform(cfg, res); break;
      case Command::Singular: cmd_singular(cfg, res); break;
      case Command::VerifyExamples: cmd_verify_examples(cfg, res); break;
    }
    res.exit_code = 0;
  } catch (const std::exception& e) {
    res.exit_code = exit_code_for(e);
    res.report["error"] = {{"kind", error_kind(e)}, {"message", e.what()}};
    res.summary += "error (" + error_kind(e) + "): " + e.what() + "\n";
    if (!res.report.contains("headline")) res.report["headline"] = error_kind(e);
  }
  res.report["exit_code"] = res.exit_code;
  return res;
}

void write_artifacts(const RunResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
    f << content;
  };
  put("report.json", dump_json(result.report) + "\n");
  put("summary.txt", result.summary);
  for (const auto& [name, content] : result.artifacts) put(name, content);
}

}  // namespace radstab
