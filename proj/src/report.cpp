#include "radstab/report.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <sstream>

#include "radstab/format.hpp"

namespace radstab {

namespace {

Json number(double x) {
  if (std::isfinite(x)) return x;
  return fmt17(x);
}

Json optional_number(const std::optional<double>& x) { return x ? number(*x) : Json(); }

void write(std::ostringstream& os, const Json& j, int indent, int depth) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  const char* colon = indent > 0 ? ": " : ":";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << '{' << nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted keys
        if (!first) os << ',' << nl;
        first = false;
        os << pad << Json(it.key()).dump() << colon;
        write(os, it.value(), indent, depth + 1);
      }
      os << nl << close << '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << '[' << nl;
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ',' << nl;
        os << pad;
        write(os, j[i], indent, depth + 1);
      }
      os << nl << close << ']';
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      if (std::isfinite(x))
        os << fmt17(x);
      else
        os << '"' << fmt17(x) << '"';
      return;
    }
    default:
      os << j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j, int indent) {
  std::ostringstream os;
  write(os, j, indent, 0);
  return os.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

Json to_json(const CriticalExponents& e) {
  return {{"N", e.N},
          {"p_S", number(e.p_S)},
          {"q_S", number(e.q_S)},
          {"p_JL", e.p_JL ? number(*e.p_JL) : Json("inf")},
          {"q_JL", e.q_JL ? number(*e.q_JL) : Json()}};
}

Json to_json(const LimitEstimates& l) {
  auto one = [](const LimitEstimate& e) {
    return Json{{"value", optional_number(e.value)}, {"uncertainty", number(e.uncertainty)}};
  };
  return {{"q0", one(l.q0)}, {"q_inf", one(l.q_inf)}};
}

Json to_json(const StabilityVerdict& v) {
  Json j{{"alpha", number(v.alpha)}, {"verdict", to_string(v.kind)}, {"details", v.details}};
  if (v.witness) {
    j["witness"] = {{"r_star", number(v.witness->r_star)},
                    {"alpha", number(v.witness->alpha)},
                    {"beta", number(v.witness->beta)},
                    {"u_alpha", number(v.witness->u_alpha)},
                    {"u_beta", number(v.witness->u_beta)}};
  }
  if (v.mechanism) j["mechanism"] = to_string(*v.mechanism);
  if (v.kind == VerdictKind::OrderedUpTo) j["ordered_up_to"] = number(v.ordered_up_to);
  return j;
}

Json to_json(const Thm12Hypotheses& h) {
  return {{"q1", number(h.q1)}, {"q2", number(h.q2)}, {"ell", number(h.ell)}};
}

Json to_json(const StructureClassification& c) {
  Json j{{"type", to_string(c.type)},
         {"summary", c.summary},
         {"prediction", {{"type", to_string(c.prediction.prediction)},
                         {"reason", c.prediction.reason}}},
         {"exponents", to_json(c.exponents)},
         {"limits", to_json(c.limits)},
         {"evidence", Json::array()}};
  for (const auto& v : c.evidence) j["evidence"].push_back(to_json(v));
  if (c.hypotheses) j["hypotheses"] = to_json(*c.hypotheses);
  if (c.alpha_star) {
    j["alpha_star"] = number(*c.alpha_star);
    j["bracket"] = {{"lo", number(*c.bracket_lo)},
                    {"hi", number(*c.bracket_hi)},
                    {"lo_evidence", to_json(*c.bracket_lo_evidence)},
                    {"hi_evidence", to_json(*c.bracket_hi_evidence)}};
  }
  return j;
}

Json to_json(const OrderedReport& r) {
  Json j{{"ordered", r.ordered}, {"min_gap", number(r.min_gap)}, {"min_gap_at", number(r.min_gap_at)}};
  if (r.violation_at) {
    j["violation_at"] = number(*r.violation_at);
    j["violation"] = r.violation;
  }
  return j;
}

Json to_json(const ModelBoundReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"sigma", number(row.sigma)},
                    {"reference_margin", number(row.reference_margin)},
                    {"reference_margin_at", number(row.reference_margin_at)},
                    {"lower_bound_margin", number(row.lower_bound_margin)},
                    {"lower_bound_margin_at", number(row.lower_bound_margin_at)},
                    {"pass", row.pass}});
  }
  return {{"N", r.N}, {"model", r.model}, {"rows", rows}, {"pass", r.pass}};
}

Json to_json(const ConvergenceStudy& s) {
  Json rows = Json::array();
  for (const auto& row : s.rows) {
    rows.push_back({{"alpha", number(row.alpha)},
                    {"beta", number(row.beta)},
                    {"lambda", number(row.lambda)},
                    {"sup_error", number(row.sup_error)}});
  }
  return {{"sigma", number(s.sigma)},
          {"s0", optional_number(s.s0)},
          {"S", number(s.S)},
          {"rows", rows},
          {"strictly_decreasing", s.strictly_decreasing()}};
}

Json to_json(const SingularProfile& p) {
  Json ladder = Json::array(), defects = Json::array();
  for (double a : p.ladder) ladder.push_back(number(a));
  for (double d : p.defects) defects.push_back(number(d));
  return {{"N", p.N},
          {"ladder", ladder},
          {"defects", defects},
          {"error_estimate", number(p.error_estimate)},
          {"min_increment", number(p.min_increment)},
          {"decay_exponent", number(p.decay_exponent)},
          {"residual_max", number(p.residual_max)},
          {"F_lower_margin", number(p.F_lower_margin)},
          {"r_min", number(p.r.front())},
          {"r_max", number(p.r.back())}};
}

Json to_json(const DecayReport& d) {
  return {{"decay_exponent", number(d.decay_exponent)},
          {"exponent_bound", number(d.exponent_bound)},
          {"fit_tol", number(d.fit_tol)},
          {"exponent_ok", d.exponent_ok},
          {"u0", number(d.u0)},
          {"q_S", number(d.q_S)},
          {"C", number(d.C)},
          {"bound_ratio", number(d.bound_ratio)},
          {"bound_ok", d.bound_ok},
          {"scaled_sup", number(d.scaled_sup)},
          {"pass", d.pass}};
}

Json to_json(const HardyReport& h) {
  return {{"min_margin", number(h.min_margin)},
          {"at", number(h.at)},
          {"bound", number(h.bound)},
          {"certified", h.certified}};
}

std::string singular_csv(const SingularProfile& p) {
  std::string out = "r,u,du\n";
  for (std::size_t i = 0; i < p.r.size(); ++i)
    out += fmt17(p.r[i]) + "," + fmt17(p.u[i]) + "," + fmt17(p.du[i]) + "\n";
  return out;
}

}  // namespace radstab
