#pragma once

/**
 * @file report.hpp
 * @brief JSON views of module results and the deterministic serializer.
 *
 * Objects are emitted with sorted keys and floats with 17 significant digits,
 * so equal inputs give byte-identical reports.  Non-finite floats become the
 * strings "inf", "-inf" and "nan".
 */

#include <string>

#include <json.hpp>

#include "radstab/nonlinearity.hpp"
#include "radstab/scaling.hpp"
#include "radstab/singular.hpp"
#include "radstab/stability.hpp"

namespace radstab {

using Json = nlohmann::json;

std::string dump_json(const Json& j, int indent = 2);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(const std::string& data);

Json to_json(const CriticalExponents& e);
Json to_json(const LimitEstimates& l);
Json to_json(const StabilityVerdict& v);
Json to_json(const Thm12Hypotheses& h);
Json to_json(const StructureClassification& c);
Json to_json(const OrderedReport& r);
Json to_json(const ModelBoundReport& r);
Json to_json(const ConvergenceStudy& s);
Json to_json(const SingularProfile& p);
Json to_json(const DecayReport& d);
Json to_json(const HardyReport& h);

/// Header r,u,du followed by one row per sample.
std::string singular_csv(const SingularProfile& p);

}  // namespace radstab
