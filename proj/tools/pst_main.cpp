// pst: projected score testing from CSV inputs.
//
// Commands: test, exact, adaptive, posthoc, simulate, refine.
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pst/baselines.hpp"
#include "pst/basis.hpp"
#include "pst/csv.hpp"
#include "pst/errors.hpp"
#include "pst/parallel.hpp"
#include "pst/posthoc.hpp"
#include "pst/pst_test.hpp"
#include "pst/report.hpp"
#include "pst/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct CommonOptions {
  std::string y_path, x_path, g_path;
  std::string family = "gaussian";
  bool no_intercept = false;
  bool center = false;

  std::string basis = "pca";
  int r = 10;
  std::string basis_file, partition_file;

  double alpha = 0.05;
  int b = 10000;
  int b_perm = 1000;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 0;
  std::string out_dir;
};

void add_data_options(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--y", opts.y_path, "outcome CSV (one named column)")
      ->required();
  cmd->add_option("--g", opts.g_path, "predictor block CSV")->required();
  cmd->add_option("--x", opts.x_path,
                  "nuisance design CSV (default: intercept only)");
  cmd->add_flag("--no-intercept", opts.no_intercept,
                "empty nuisance design when --x is absent");
  cmd->add_option("--family", opts.family, "gaussian or binomial")
      ->check(CLI::IsMember({"gaussian", "binomial"}));
  cmd->add_flag("--center", opts.center, "column-center G after loading");
  cmd->add_option("--threads", opts.threads,
                  "worker threads (default: PST_THREADS or hardware)");
  cmd->add_option("--out", opts.out_dir, "output directory")->required();
  cmd->add_option("--seed", opts.seed, "root RNG seed")
      ->each([&](const std::string&) { opts.seed_given = true; });
}

void add_basis_options(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--basis", opts.basis, "pca, weighted-pca, partition, custom")
      ->check(CLI::IsMember({"pca", "weighted-pca", "partition", "custom"}));
  cmd->add_option("--r", opts.r, "basis dimension (pca / weighted-pca)");
  cmd->add_option("--basis-file", opts.basis_file, "custom basis CSV (p x r)");
  cmd->add_option("--partition-file", opts.partition_file,
                  "partition CSV (index,group)");
}

void add_config_option(CLI::App* cmd, std::string& config_path) {
  cmd->add_option("--config", config_path,
                  "key=value config file; command-line flags override");
}

pst::Dataset load_dataset(const CommonOptions& opts) {
  pst::Dataset data;
  data.family = pst::parse_family(opts.family);
  data.y = pst::io::read_vector_csv(opts.y_path);
  const pst::io::NamedMatrix g = pst::io::read_matrix_csv(opts.g_path);
  data.g = g.values;
  if (!opts.x_path.empty()) {
    data.x = pst::io::read_matrix_csv(opts.x_path).values;
  } else if (opts.no_intercept) {
    data.x.resize(data.y.size(), 0);
  } else {
    data.x = Eigen::MatrixXd::Ones(data.y.size(), 1);
  }
  if (data.x.rows() != data.y.size() || data.g.rows() != data.y.size()) {
    std::ostringstream what;
    what << "dimension mismatch: " << opts.y_path << " has " << data.y.size()
         << " rows, "
         << (opts.x_path.empty() ? std::string("<intercept>") : opts.x_path)
         << " has " << data.x.rows() << ", " << opts.g_path << " has "
         << data.g.rows();
    throw pst::ValidationError(what.str());
  }
  if (opts.center) {
    data.g.rowwise() -= data.g.colwise().mean();
  }
  pst::validate(data);
  return data;
}

pst::Basis make_basis(const CommonOptions& opts, const pst::Dataset& data,
                      const pst::NullFit& fit) {
  if (opts.basis == "pca") return pst::pca_basis(data, opts.r);
  if (opts.basis == "weighted-pca") {
    return pst::weighted_pca_basis(data, fit, opts.r);
  }
  if (opts.basis == "partition") {
    if (opts.partition_file.empty()) {
      throw pst::ValidationError("--partition-file is required for the "
                                 "partition basis");
    }
    return pst::partition_basis(
        pst::io::read_partition_csv(opts.partition_file, data.p()), data.p());
  }
  if (opts.basis_file.empty()) {
    throw pst::ValidationError("--basis-file is required for the custom basis");
  }
  const Eigen::MatrixXd raw = pst::io::read_numeric_csv(opts.basis_file);
  if (raw.rows() != data.p()) {
    std::ostringstream what;
    what << opts.basis_file << " has " << raw.rows() << " rows but G has "
         << data.p() << " predictors";
    throw pst::ValidationError(what.str());
  }
  return pst::custom_basis(raw);
}

std::uint64_t resolve_seed(CommonOptions& opts) {
  if (!opts.seed_given) {
    std::random_device device;
    opts.seed = (static_cast<std::uint64_t>(device()) << 32) ^ device();
  }
  return opts.seed;
}

void write_config_used(const CommonOptions& opts, const std::string& command,
                       const std::vector<std::pair<std::string, std::string>>&
                           extras = {}) {
  std::ostringstream body;
  body << "command = " << command << "\n";
  body << "y = " << opts.y_path << "\n";
  body << "x = " << (opts.x_path.empty()
                         ? (opts.no_intercept ? "<none>" : "<intercept>")
                         : opts.x_path)
       << "\n";
  body << "g = " << opts.g_path << "\n";
  body << "family = " << opts.family << "\n";
  body << "center = " << (opts.center ? "true" : "false") << "\n";
  body << "basis = " << opts.basis << "\n";
  body << "r = " << opts.r << "\n";
  if (!opts.basis_file.empty()) body << "basis_file = " << opts.basis_file << "\n";
  if (!opts.partition_file.empty()) {
    body << "partition_file = " << opts.partition_file << "\n";
  }
  body << "alpha = " << pst::io::format_double(opts.alpha) << "\n";
  body << "b = " << opts.b << "\n";
  body << "b_perm = " << opts.b_perm << "\n";
  body << "seed = " << opts.seed << "\n";
  for (const auto& [key, value] : extras) {
    body << key << " = " << value << "\n";
  }
  pst::io::write_text_file((fs::path(opts.out_dir) / "config_used.cfg").string(),
                           body.str());
}

void write_posthoc_outputs(const pst::PosthocResult& posthoc,
                           const std::string& out_dir) {
  Eigen::MatrixXd table(posthoc.projected.size(), 5);
  for (Eigen::Index j = 0; j < posthoc.projected.size(); ++j) {
    table(j, 0) = static_cast<double>(j + 1);
    table(j, 1) = posthoc.projected[j];
    table(j, 2) = posthoc.standardized[j];
    table(j, 3) = posthoc.p_values[j];
    table(j, 4) = posthoc.rejected(j) ? 1.0 : 0.0;
  }
  pst::io::write_matrix_csv(
      (fs::path(out_dir) / "posthoc.csv").string(),
      {"location", "projected", "standardized", "p_value", "rejected"}, table);
  pst::report::write_json((fs::path(out_dir) / "posthoc.json").string(),
                          pst::report::posthoc_summary(posthoc));
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

// ---- scenario config -------------------------------------------------

std::map<std::string, std::string> parse_key_values(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw pst::ValidationError("cannot open scenario file: " + path);
  std::map<std::string, std::string> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    const auto trim = [](std::string text) {
      const auto begin = text.find_first_not_of(" \t\r");
      const auto end = text.find_last_not_of(" \t\r");
      return begin == std::string::npos
                 ? std::string()
                 : text.substr(begin, end - begin + 1);
    };
    if (trim(line).empty()) continue;
    const auto equals = line.find('=');
    if (equals == std::string::npos) {
      std::ostringstream what;
      what << path << ":" << line_no << ": expected key = value";
      throw pst::ValidationError(what.str());
    }
    entries[trim(line.substr(0, equals))] = trim(line.substr(equals + 1));
  }
  return entries;
}

// Fills in subcommand options from a key=value config file; explicit
// command-line flags keep precedence. Unknown keys report the valid set.
std::vector<std::string> merge_config(const CLI::App& app,
                                      std::vector<std::string> tokens) {
  std::string config_path;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == "--config" && i + 1 < tokens.size()) {
      config_path = tokens[i + 1];
    } else if (tokens[i].rfind("--config=", 0) == 0) {
      config_path = tokens[i].substr(9);
    }
  }
  if (config_path.empty() || tokens.empty()) return tokens;

  const CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(tokens[0]);
  } catch (const CLI::Error&) {
    return tokens;  // parse() will report the unknown subcommand
  }

  std::vector<std::string> valid;
  for (const CLI::Option* option : sub->get_options()) {
    for (const std::string& name : option->get_lnames()) {
      if (name != "help" && name != "config") valid.push_back(name);
    }
  }
  std::sort(valid.begin(), valid.end());

  for (const auto& [key, value] : parse_key_values(config_path)) {
    if (std::find(valid.begin(), valid.end(), key) == valid.end()) {
      std::ostringstream what;
      what << config_path << ": unknown key '" << key << "'; valid keys:";
      for (const auto& name : valid) what << " " << name;
      throw pst::ValidationError(what.str());
    }
    const std::string flag = "--" + key;
    const bool already_given =
        std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
          return t == flag || t.rfind(flag + "=", 0) == 0;
        });
    if (!already_given) tokens.push_back(flag + "=" + value);
  }
  return tokens;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream stream(text);
  std::string part;
  while (std::getline(stream, part, ',')) {
    const auto begin = part.find_first_not_of(" \t");
    const auto end = part.find_last_not_of(" \t");
    if (begin != std::string::npos) {
      parts.push_back(part.substr(begin, end - begin + 1));
    }
  }
  return parts;
}

pst::sim::CovKind parse_cov_kind(const std::string& text) {
  if (text == "identity") return pst::sim::CovKind::identity;
  if (text == "ar1") return pst::sim::CovKind::ar1;
  if (text == "exchangeable") return pst::sim::CovKind::exchangeable;
  throw pst::ValidationError("unknown covariance kind '" + text +
                             "' (identity, ar1, exchangeable)");
}

struct ScenarioConfig {
  pst::sim::Scenario scenario;
  std::vector<pst::sim::MethodSpec> methods;
  std::string canonical_text;
};

ScenarioConfig load_scenario(const std::string& path) {
  static const std::vector<std::string> valid_keys = {
      "n", "p", "replicates", "seed", "betas",
      "neg_start", "neg_size", "neg_kind", "neg_rho", "neg_scale",
      "pos_start", "pos_size", "pos_kind", "pos_rho", "pos_scale",
      "null_kind", "null_rho", "null_scale",
      "coef_mode", "alpha0", "center", "alpha", "b", "b_perm",
      "calibration_replicates", "truth_quantile", "methods"};

  const auto entries = parse_key_values(path);
  for (const auto& [key, value] : entries) {
    if (std::find(valid_keys.begin(), valid_keys.end(), key) ==
        valid_keys.end()) {
      std::ostringstream what;
      what << path << ": unknown key '" << key << "'; valid keys:";
      for (const auto& valid : valid_keys) what << " " << valid;
      throw pst::ValidationError(what.str());
    }
  }

  const auto get = [&](const std::string& key) -> const std::string* {
    const auto found = entries.find(key);
    return found == entries.end() ? nullptr : &found->second;
  };
  const auto parse_int = [&](const std::string& key, int fallback) {
    const std::string* raw = get(key);
    if (!raw) return fallback;
    try {
      return std::stoi(*raw);
    } catch (const std::exception&) {
      throw pst::ValidationError(path + ": cannot parse integer for '" + key +
                                 "'");
    }
  };
  const auto parse_real = [&](const std::string& key, double fallback) {
    const std::string* raw = get(key);
    if (!raw) return fallback;
    try {
      return std::stod(*raw);
    } catch (const std::exception&) {
      throw pst::ValidationError(path + ": cannot parse number for '" + key +
                                 "'");
    }
  };

  ScenarioConfig config;
  pst::sim::Scenario& s = config.scenario;
  s.n = parse_int("n", s.n);
  s.p = parse_int("p", s.p);
  s.replicates = parse_int("replicates", s.replicates);
  if (const std::string* raw = get("seed")) s.seed = std::stoull(*raw);
  if (const std::string* raw = get("betas")) {
    s.betas.clear();
    for (const std::string& beta : split_list(*raw)) {
      s.betas.push_back(std::stod(beta));
    }
    if (s.betas.empty()) {
      throw pst::ValidationError(path + ": 'betas' must list at least one value");
    }
  }
  // region starts are 1-based in the file
  s.neg.start = parse_int("neg_start", s.neg.start + 1) - 1;
  s.neg.size = parse_int("neg_size", s.neg.size);
  if (const std::string* raw = get("neg_kind")) s.neg.cov.kind = parse_cov_kind(*raw);
  s.neg.cov.rho = parse_real("neg_rho", s.neg.cov.rho);
  s.neg.cov.scale = parse_real("neg_scale", s.neg.cov.scale);
  s.pos.start = parse_int("pos_start", s.pos.start + 1) - 1;
  s.pos.size = parse_int("pos_size", s.pos.size);
  if (const std::string* raw = get("pos_kind")) s.pos.cov.kind = parse_cov_kind(*raw);
  s.pos.cov.rho = parse_real("pos_rho", s.pos.cov.rho);
  s.pos.cov.scale = parse_real("pos_scale", s.pos.cov.scale);
  if (const std::string* raw = get("null_kind")) s.null_cov.kind = parse_cov_kind(*raw);
  s.null_cov.rho = parse_real("null_rho", s.null_cov.rho);
  s.null_cov.scale = parse_real("null_scale", s.null_cov.scale);
  if (const std::string* raw = get("coef_mode")) {
    if (*raw == "constant") s.coef_mode = pst::sim::CoefMode::constant;
    else if (*raw == "uniform") s.coef_mode = pst::sim::CoefMode::uniform;
    else throw pst::ValidationError(path + ": coef_mode must be constant or uniform");
  }
  s.alpha0 = parse_real("alpha0", s.alpha0);
  if (const std::string* raw = get("center")) {
    if (*raw == "true") s.center = true;
    else if (*raw == "false") s.center = false;
    else throw pst::ValidationError(path + ": center must be true or false");
  }
  s.alpha = parse_real("alpha", s.alpha);
  s.mc_draws = parse_int("b", s.mc_draws);
  s.permutations = parse_int("b_perm", s.permutations);
  s.calibration_replicates =
      parse_int("calibration_replicates", s.calibration_replicates);
  s.truth_quantile = parse_real("truth_quantile", s.truth_quantile);

  std::string methods_text = "pca:10";
  if (const std::string* raw = get("methods")) methods_text = *raw;
  for (const std::string& name : split_list(methods_text)) {
    config.methods.push_back(pst::sim::parse_method(name));
  }
  if (config.methods.empty()) {
    throw pst::ValidationError(path + ": 'methods' must list at least one method");
  }

  std::ostringstream canonical;
  for (const auto& [key, value] : entries) {
    canonical << key << "=" << value << "\n";
  }
  config.canonical_text = canonical.str();
  return config;
}

// ---- commands ----------------------------------------------------------

int run_test_command(CommonOptions& opts, bool exact) {
  fs::create_directories(opts.out_dir);
  resolve_seed(opts);
  const pst::Dataset data = load_dataset(opts);
  const pst::NullFit fit = pst::fit_null(data);
  const pst::Basis basis = make_basis(opts, data, fit);
  const pst::ScoreModel scores = pst::compute_scores(data, fit);

  const pst::PstResult result = exact
                                    ? pst::pst_exact_normal(data, basis)
                                    : pst::pst_statistic(scores, basis);
  json body = pst::report::test_report(result, basis);
  body["n"] = data.n();
  body["m"] = data.m();
  body["p"] = data.p();
  body["seed"] = opts.seed;
  pst::report::write_json((fs::path(opts.out_dir) / "result.json").string(),
                          body);
  write_config_used(opts, exact ? "exact" : "test");
  std::cout << "statistic " << result.statistic << "  df " << result.df
            << "  p " << result.p_value << "\n";
  return 0;
}

int run_adaptive_command(CommonOptions& opts, const std::string& chunk_text,
                         bool with_posthoc) {
  fs::create_directories(opts.out_dir);
  resolve_seed(opts);
  const pst::Dataset data = load_dataset(opts);
  const pst::NullFit fit = pst::fit_null(data);

  std::vector<Eigen::Index> chunks;
  for (const std::string& part : split_list(chunk_text)) {
    chunks.push_back(std::stoll(part));
  }
  const pst::AdaptiveResult result =
      pst::adaptive_pca_test(data, fit, opts.alpha, chunks);
  json body = pst::report::adaptive_report(result);
  body["n"] = data.n();
  body["m"] = data.m();
  body["p"] = data.p();
  body["seed"] = opts.seed;
  pst::report::write_json((fs::path(opts.out_dir) / "result.json").string(),
                          body);

  if (with_posthoc) {
    const pst::ScoreModel scores = pst::compute_scores(data, fit);
    const Eigen::Index first_chunk =
        result.per_step.empty() ? 1 : result.per_step.front().r;
    const Eigen::Index r_use = std::min(
        result.basis.r(), std::max(result.selected_r, first_chunk));
    pst::Basis basis;
    basis.q = result.basis.q.leftCols(r_use);
    basis.kind = pst::BasisKind::weighted_pca;
    const pst::PosthocResult posthoc = pst::posthoc_inference(
        scores, basis, opts.alpha, opts.b, opts.seed, opts.threads);
    write_posthoc_outputs(posthoc, opts.out_dir);
  }
  write_config_used(opts, "adaptive",
                    {{"chunks", chunk_text.empty() ? "default" : chunk_text},
                     {"posthoc", with_posthoc ? "true" : "false"}});
  std::cout << "selected_r " << result.selected_r << "  overall_reject "
            << (result.overall_reject ? "yes" : "no") << "\n";
  return 0;
}

int run_posthoc_command(CommonOptions& opts) {
  fs::create_directories(opts.out_dir);
  resolve_seed(opts);
  const pst::Dataset data = load_dataset(opts);
  const pst::NullFit fit = pst::fit_null(data);
  const pst::Basis basis = make_basis(opts, data, fit);
  const pst::ScoreModel scores = pst::compute_scores(data, fit);

  const pst::PstResult test = pst::pst_statistic(scores, basis);
  json body = pst::report::test_report(test, basis);
  body["n"] = data.n();
  body["m"] = data.m();
  body["p"] = data.p();
  body["seed"] = opts.seed;
  pst::report::write_json((fs::path(opts.out_dir) / "result.json").string(),
                          body);

  const pst::PosthocResult posthoc = pst::posthoc_inference(
      scores, basis, opts.alpha, opts.b, opts.seed, opts.threads);
  write_posthoc_outputs(posthoc, opts.out_dir);
  write_config_used(opts, "posthoc");
  std::cout << "threshold_c " << posthoc.threshold_c << "  rejections "
            << posthoc.rejected_locations().size() << "\n";
  return 0;
}

int run_simulate_command(const std::string& scenario_path,
                         const std::string& methods_override,
                         int replicates_override, int draws_override,
                         CommonOptions& opts) {
  fs::create_directories(opts.out_dir);
  ScenarioConfig config = load_scenario(scenario_path);
  if (opts.seed_given) config.scenario.seed = opts.seed;
  if (opts.threads > 0) config.scenario.threads = opts.threads;
  if (replicates_override > 0) config.scenario.replicates = replicates_override;
  if (draws_override > 0) config.scenario.mc_draws = draws_override;
  if (!methods_override.empty()) {
    config.methods.clear();
    for (const std::string& name : split_list(methods_override)) {
      config.methods.push_back(pst::sim::parse_method(name));
    }
  }

  const pst::sim::StudyReport report =
      pst::sim::run_study(config.scenario, config.methods);

  std::ofstream table((fs::path(opts.out_dir) / "study.csv").string());
  if (!table) {
    throw pst::ValidationError("cannot write study.csv in " + opts.out_dir);
  }
  table << "method,beta,replicates_used,failures,reject_rate,reject_se,"
           "proj_fwer,proj_fwer_se,proj_fdr,proj_power,unproj_fwer,"
           "unproj_fdr,unproj_hit_rate,loc_type1_rate\n";
  for (const auto& row : report.rows) {
    table << row.method << "," << pst::io::format_double(row.beta) << ","
          << row.replicates_used << "," << row.failures << ","
          << pst::io::format_double(row.reject_rate) << ","
          << pst::io::format_double(row.reject_se) << ","
          << pst::io::format_double(row.proj_fwer) << ","
          << pst::io::format_double(row.proj_fwer_se) << ","
          << pst::io::format_double(row.proj_fdr) << ","
          << pst::io::format_double(row.proj_power) << ","
          << pst::io::format_double(row.unproj_fwer) << ","
          << pst::io::format_double(row.unproj_fdr) << ","
          << pst::io::format_double(row.unproj_hit_rate) << ","
          << pst::io::format_double(row.loc_type1_rate) << "\n";
  }
  table.close();

  json manifest;
  manifest["schema_version"] = pst::report::schema_version;
  manifest["version"] = kVersion;
  manifest["config_hash"] =
      fnv1a(config.canonical_text + methods_override);
  manifest["seed"] = config.scenario.seed;
  manifest["replicates"] = config.scenario.replicates;
  manifest["failure_messages"] = report.failure_messages;
  manifest["generated_at"] = []() {
    const std::time_t now = std::time(nullptr);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ",
                  std::gmtime(&now));
    return std::string(buffer);
  }();
  pst::report::write_json((fs::path(opts.out_dir) / "manifest.json").string(),
                          manifest);

  std::ostringstream frozen;
  frozen << "command = simulate\nscenario = " << scenario_path
         << "\nseed = " << config.scenario.seed << "\n"
         << config.canonical_text;
  pst::io::write_text_file(
      (fs::path(opts.out_dir) / "config_used.cfg").string(), frozen.str());
  std::cout << "study rows " << report.rows.size() << "\n";
  return 0;
}

int run_refine_command(CommonOptions& opts, int n, const std::string& grids,
                       int r, int harmonics, int replicates) {
  fs::create_directories(opts.out_dir);
  resolve_seed(opts);
  pst::sim::GridStudyConfig config;
  config.n = n;
  config.r = r;
  config.harmonics = harmonics;
  config.replicates = replicates;
  config.seed = opts.seed;
  config.threads = opts.threads;
  if (!grids.empty()) {
    config.grid_sizes.clear();
    for (const std::string& part : split_list(grids)) {
      config.grid_sizes.push_back(std::stoi(part));
    }
  }
  const pst::sim::GridStudyReport report =
      pst::sim::grid_refinement_study(config);

  std::vector<std::string> header;
  header.reserve(report.grid_sizes.size());
  for (const int grid : report.grid_sizes) {
    header.push_back("p" + std::to_string(grid));
  }
  pst::io::write_matrix_csv((fs::path(opts.out_dir) / "refine.csv").string(),
                            header, report.statistics);

  json summary;
  summary["schema_version"] = pst::report::schema_version;
  summary["grid_sizes"] = report.grid_sizes;
  summary["median_rel_change"] = report.median_rel_change;
  summary["seed"] = opts.seed;
  pst::report::write_json((fs::path(opts.out_dir) / "refine.json").string(),
                          summary);

  std::ostringstream frozen;
  frozen << "command = refine\nn = " << n << "\nr = " << r
         << "\nharmonics = " << harmonics << "\nreplicates = " << replicates
         << "\nseed = " << opts.seed << "\ngrids = ";
  for (std::size_t i = 0; i < report.grid_sizes.size(); ++i) {
    frozen << (i ? "," : "") << report.grid_sizes[i];
  }
  frozen << "\n";
  pst::io::write_text_file(
      (fs::path(opts.out_dir) / "config_used.cfg").string(), frozen.str());
  std::cout << "final median relative change "
            << report.median_rel_change.back() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"projected score testing toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions opts;
  std::string config_path;

  CLI::App* test_cmd =
      app.add_subcommand("test", "chi-squared projected score test");
  add_data_options(test_cmd, opts);
  add_basis_options(test_cmd, opts);
  test_cmd->add_option("--alpha", opts.alpha, "test level");
  add_config_option(test_cmd, config_path);

  CLI::App* exact_cmd = app.add_subcommand(
      "exact", "finite-sample normal-model test (gaussian family)");
  add_data_options(exact_cmd, opts);
  add_basis_options(exact_cmd, opts);
  exact_cmd->add_option("--alpha", opts.alpha, "test level");
  add_config_option(exact_cmd, config_path);

  CLI::App* adaptive_cmd = app.add_subcommand(
      "adaptive", "sequential weighted-pca dimension selection");
  add_data_options(adaptive_cmd, opts);
  adaptive_cmd->add_option("--alpha", opts.alpha, "overall level");
  std::string chunk_text;
  adaptive_cmd->add_option("--chunks", chunk_text,
                           "comma-separated block sizes (default 5,1,1,...)");
  bool adaptive_posthoc = false;
  adaptive_cmd->add_flag("--posthoc", adaptive_posthoc,
                         "run posthoc inference with the selected basis");
  adaptive_cmd->add_option("--b", opts.b, "posthoc Monte Carlo draws");
  add_config_option(adaptive_cmd, config_path);

  CLI::App* posthoc_cmd = app.add_subcommand(
      "posthoc", "maxT localization of the projected scores");
  add_data_options(posthoc_cmd, opts);
  add_basis_options(posthoc_cmd, opts);
  posthoc_cmd->add_option("--alpha", opts.alpha, "familywise level");
  posthoc_cmd->add_option("--b", opts.b, "Monte Carlo draws");
  add_config_option(posthoc_cmd, config_path);

  CLI::App* simulate_cmd =
      app.add_subcommand("simulate", "desk-scale operating characteristics");
  std::string scenario_path, methods_override;
  int replicates_override = 0, draws_override = 0;
  simulate_cmd->add_option("--scenario", scenario_path, "scenario config file")
      ->required();
  simulate_cmd->add_option("--methods", methods_override,
                           "override the scenario's method list");
  simulate_cmd->add_option("--replicates", replicates_override,
                           "override the scenario's replicate count");
  simulate_cmd->add_option("--b", draws_override,
                           "override the scenario's Monte Carlo draws");
  simulate_cmd->add_option("--seed", opts.seed, "override the scenario seed")
      ->each([&](const std::string&) { opts.seed_given = true; });
  simulate_cmd->add_option("--threads", opts.threads, "worker threads");
  simulate_cmd->add_option("--out", opts.out_dir, "output directory")
      ->required();
  add_config_option(simulate_cmd, config_path);

  CLI::App* refine_cmd =
      app.add_subcommand("refine", "nested-grid convergence study");
  int refine_n = 40, refine_r = 3, refine_harmonics = 12,
      refine_replicates = 100;
  std::string refine_grids;
  refine_cmd->add_option("--n", refine_n, "sample size");
  refine_cmd->add_option("--grids", refine_grids,
                         "comma-separated nested grid sizes");
  refine_cmd->add_option("--r", refine_r, "basis dimension");
  refine_cmd->add_option("--harmonics", refine_harmonics,
                         "latent field harmonics");
  refine_cmd->add_option("--replicates", refine_replicates, "replicates");
  refine_cmd->add_option("--seed", opts.seed, "root RNG seed")
      ->each([&](const std::string&) { opts.seed_given = true; });
  refine_cmd->add_option("--threads", opts.threads, "worker threads");
  refine_cmd->add_option("--out", opts.out_dir, "output directory")->required();
  add_config_option(refine_cmd, config_path);

  try {
    std::vector<std::string> tokens(argv + 1, argv + argc);
    tokens = merge_config(app, std::move(tokens));
    std::reverse(tokens.begin(), tokens.end());
    app.parse(tokens);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? 0 : 2;
  } catch (const pst::ValidationError& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(test_cmd)) return run_test_command(opts, false);
    if (app.got_subcommand(exact_cmd)) return run_test_command(opts, true);
    if (app.got_subcommand(adaptive_cmd)) {
      return run_adaptive_command(opts, chunk_text, adaptive_posthoc);
    }
    if (app.got_subcommand(posthoc_cmd)) return run_posthoc_command(opts);
    if (app.got_subcommand(simulate_cmd)) {
      return run_simulate_command(scenario_path, methods_override,
                                  replicates_override, draws_override, opts);
    }
    if (app.got_subcommand(refine_cmd)) {
      return run_refine_command(opts, refine_n, refine_grids, refine_r,
                                refine_harmonics, refine_replicates);
    }
  } catch (const pst::ValidationError& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 2;
  } catch (const pst::NumericError& error) {
    std::cerr << "numerical failure: " << error.what() << "\n";
    return 3;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 2;
  }
  return 2;
}
