#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>

#include "pst/baselines.hpp"
#include "pst/basis.hpp"
#include "pst/posthoc.hpp"
#include "pst/pst_test.hpp"

namespace pst::report {

inline constexpr int schema_version = 1;

// p-values below the representable tail mass are reported as the interval
// sentinel "<1e-300" instead of a silent zero.
nlohmann::json p_value_field(double p);

nlohmann::json test_report(const PstResult& result, const Basis& basis);
nlohmann::json baseline_report(const std::string& method,
                               const TestOutcome& outcome);
nlohmann::json aspu_report(const AspuResult& result);
nlohmann::json adaptive_report(const AdaptiveResult& result);
nlohmann::json posthoc_summary(const PosthocResult& result);

void write_json(const std::string& path, const nlohmann::json& body);

}  // namespace pst::report
