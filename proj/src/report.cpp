#include "pst/report.hpp"

#include <fstream>

#include "pst/errors.hpp"

namespace pst::report {

nlohmann::json p_value_field(double p) {
  if (p < 1e-300) return "<1e-300";  // includes underflow to exact zero
  return p;
}

nlohmann::json test_report(const PstResult& result, const Basis& basis) {
  nlohmann::json body;
  body["schema_version"] = schema_version;
  body["method"] = pst_method_name(result.method);
  body["statistic"] = result.statistic;
  body["df"] = result.df;
  body["p_value"] = p_value_field(result.p_value);
  body["basis"] = {{"kind", basis_kind_name(basis.kind)}, {"r", basis.r()}};
  return body;
}

nlohmann::json baseline_report(const std::string& method,
                               const TestOutcome& outcome) {
  nlohmann::json body;
  body["schema_version"] = schema_version;
  body["method"] = method;
  body["statistic"] = outcome.statistic;
  if (outcome.df > 0) body["df"] = outcome.df;
  body["p_value"] = p_value_field(outcome.p_value);
  return body;
}

nlohmann::json aspu_report(const AspuResult& result) {
  nlohmann::json body;
  body["schema_version"] = schema_version;
  body["method"] = "aspu";
  body["min_p_statistic"] = result.min_p_statistic;
  body["p_value"] = p_value_field(result.p_value);
  nlohmann::json per_gamma = nlohmann::json::array();
  for (const auto& [gamma, p] : result.per_gamma_p) {
    per_gamma.push_back({{"gamma", gamma == spu_infinity
                                       ? nlohmann::json("inf")
                                       : nlohmann::json(gamma)},
                         {"p_value", p_value_field(p)}});
  }
  body["per_gamma"] = per_gamma;
  return body;
}

nlohmann::json adaptive_report(const AdaptiveResult& result) {
  nlohmann::json body;
  body["schema_version"] = schema_version;
  body["method"] = "adaptive_pca";
  body["alpha_star"] = result.alpha_star;
  body["selected_r"] = result.selected_r;
  body["overall_reject"] = result.overall_reject;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& step : result.per_step) {
    steps.push_back({{"r", step.r},
                     {"statistic", step.statistic},
                     {"p_value", p_value_field(step.p_value)},
                     {"rejected", step.rejected}});
  }
  body["steps"] = steps;
  return body;
}

nlohmann::json posthoc_summary(const PosthocResult& result) {
  nlohmann::json body;
  body["schema_version"] = schema_version;
  body["threshold_c"] = result.threshold_c;
  body["alpha"] = result.alpha;
  body["b"] = result.b;
  body["seed"] = result.seed;
  body["rejections"] = result.rejected_locations().size();
  body["undefined_locations"] = result.undefined_locations.size();
  return body;
}

void write_json(const std::string& path, const nlohmann::json& body) {
  std::ofstream file(path);
  if (!file) throw ValidationError("cannot write file: " + path);
  file << body.dump(2) << "\n";
}

}  // namespace pst::report
