#ifndef QSC_HARNESS_HPP
#define QSC_HARNESS_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsc/collapse.hpp"
#include "qsc/errors.hpp"
#include "qsc/observer.hpp"
#include "qsc/protocol.hpp"

namespace qsc::harness {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

struct CalibrationSettings {
  double tolerance = 0.05;
  std::size_t max_runs = 20'000;
  std::size_t pilot_runs = 500;
};

struct Sweep {
  std::string param;  // dotted path, e.g. "collapse.t_c_mean"
  std::vector<json> values;
};

// A validated configuration. `source` keeps the document as written (minus
// the sweep block) so sweep points can be re-derived from it.
struct HarnessConfig {
  ExperimentConfig experiment;
  CalibrationSettings calibration;
  std::optional<Sweep> sweep;
  json source;
  json document;  // as loaded, sweep included
};

namespace detail {

using Schema = std::map<std::string, std::set<std::string>>;

inline const Schema& schema() {
  static const Schema s{
      {"", {"schema_version", "master_seed", "n_trials", "priors", "input_p1", "device_baseline",
            "qsc_margin", "collapse", "observer", "scenario", "rule", "calibration", "sweep"}},
      {"collapse", {"model", "t_c_mean", "gamma", "epsilon", "dt", "energy", "kappa"}},
      {"observer", {"t_p", "jitter_sigma", "resolution"}},
      {"scenario", {"tag", "r"}},
      {"rule", {"kind", "threshold_time", "batch_n", "no_change_guess"}},
      {"calibration", {"tolerance", "max_runs", "pilot_runs"}},
      {"sweep", {"param", "values"}},
  };
  return s;
}

[[noreturn]] inline void invalid(const std::string& path, const std::string& message) {
  throw ConfigError(ConfigError::Reason::Validation, path, message);
}

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline const json* child(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

inline void check_keys(const json& obj, const std::string& path) {
  if (!obj.is_object()) invalid(path, "expected an object");
  const auto& allowed = schema().at(path);
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) invalid(join(path, item.key()), "unknown key");
  }
}

inline std::optional<double> get_number(const json& obj, const std::string& path,
                                        const std::string& key) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_number()) invalid(join(path, key), "expected a number");
  const double d = v->get<double>();
  if (!std::isfinite(d)) invalid(join(path, key), "must be finite");
  return d;
}

inline std::optional<std::uint64_t> get_unsigned(const json& obj, const std::string& path,
                                                 const std::string& key) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  if (v->is_number_unsigned()) return v->get<std::uint64_t>();
  if (v->is_number_integer()) {
    const auto i = v->get<std::int64_t>();
    if (i < 0) invalid(join(path, key), "must be >= 0");
    return static_cast<std::uint64_t>(i);
  }
  invalid(join(path, key), "expected a non-negative integer");
}

inline std::optional<bool> get_bool(const json& obj, const std::string& path,
                                    const std::string& key) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_boolean()) invalid(join(path, key), "expected true or false");
  return v->get<bool>();
}

template <typename Enum>
std::optional<Enum> get_enum(const json& obj, const std::string& path, const std::string& key,
                             const std::vector<std::pair<std::string, Enum>>& names) {
  const json* v = child(obj, key);
  if (!v) return std::nullopt;
  if (!v->is_string()) invalid(join(path, key), "expected a string");
  const auto s = v->get<std::string>();
  std::string options;
  for (const auto& [name, value] : names) {
    if (name == s) return value;
    options += (options.empty() ? "" : ", ") + name;
  }
  invalid(join(path, key), "unknown value \"" + s + "\" (expected one of " + options + ")");
}

inline const json& section(const json& root, const std::string& key) {
  static const json empty = json::object();
  const json* v = child(root, key);
  if (!v) return empty;
  check_keys(*v, key);
  return *v;
}

// Runs a component validate() and re-labels FieldError with the full path.
template <typename T>
void validate_section(const T& value, const std::string& prefix) {
  try {
    value.validate();
  } catch (const FieldError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    invalid(join(prefix, e.field()), colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
}

inline ExperimentConfig parse_experiment(const json& root) {
  ExperimentConfig cfg;

  const auto seed = get_unsigned(root, "", "master_seed");
  if (!seed) invalid("master_seed", "required");
  cfg.master_seed = *seed;
  const auto n = get_unsigned(root, "", "n_trials");
  if (!n) invalid("n_trials", "required");
  if (*n < 1) invalid("n_trials", "must be >= 1");
  cfg.n_trials = static_cast<std::size_t>(*n);
  if (auto v = get_number(root, "", "priors")) {
    if (!(*v >= 0.0 && *v <= 1.0)) invalid("priors", "must lie in [0, 1]");
    cfg.priors = *v;
  }
  if (auto v = get_number(root, "", "input_p1")) {
    if (!(*v >= 0.0 && *v <= 1.0)) invalid("input_p1", "must lie in [0, 1]");
    cfg.input_p1 = *v;
  }
  if (auto v = get_bool(root, "", "device_baseline")) cfg.device_baseline = *v;
  if (auto v = get_number(root, "", "qsc_margin")) {
    if (!(*v >= 1.0)) invalid("qsc_margin", "must be >= 1");
    cfg.qsc_margin = *v;
  }

  const json& c = section(root, "collapse");
  if (auto m = get_enum<CollapseModel>(c, "collapse", "model",
                                       {{"jump_exponential", CollapseModel::JumpExponential},
                                        {"diffusion", CollapseModel::Diffusion},
                                        {"deterministic_time", CollapseModel::DeterministicTime}})) {
    cfg.collapse.model = *m;
  }
  if (auto v = get_number(c, "collapse", "kappa")) cfg.collapse.kappa = *v;
  cfg.collapse.energy = get_number(c, "collapse", "energy");
  if (auto v = get_number(c, "collapse", "t_c_mean")) {
    cfg.collapse.t_c_mean = *v;
  } else if (cfg.collapse.energy && *cfg.collapse.energy > 0.0) {
    cfg.collapse.t_c_mean = cfg.collapse.kappa / *cfg.collapse.energy;
  }
  cfg.collapse.gamma = get_number(c, "collapse", "gamma");
  if (auto v = get_number(c, "collapse", "epsilon")) cfg.collapse.epsilon = *v;
  cfg.collapse.dt = get_number(c, "collapse", "dt");
  validate_section(cfg.collapse, "collapse");

  const json& o = section(root, "observer");
  if (auto v = get_number(o, "observer", "t_p")) cfg.observer.t_p = *v;
  if (auto v = get_number(o, "observer", "jitter_sigma")) cfg.observer.jitter_sigma = *v;
  if (auto v = get_number(o, "observer", "resolution")) cfg.observer.resolution = *v;
  validate_section(cfg.observer, "observer");

  using Tag = PerceptionScenario::Tag;
  const json& sc = section(root, "scenario");
  const Tag tag = get_enum<Tag>(sc, "scenario", "tag",
                                {{"post_collapse_only", Tag::PostCollapseOnly},
                                 {"distinct_percept", Tag::DistinctPercept},
                                 {"fixed_c1", Tag::FixedC1},
                                 {"fixed_c2", Tag::FixedC2},
                                 {"random_percept", Tag::RandomPercept}})
                      .value_or(Tag::PostCollapseOnly);
  const auto r = get_number(sc, "scenario", "r");
  if (tag == Tag::RandomPercept) {
    if (!r) invalid("scenario.r", "required for random_percept");
    if (!(*r >= 0.0 && *r <= 1.0)) invalid("scenario.r", "must lie in [0, 1]");
    cfg.scenario = PerceptionScenario::random_percept(*r);
  } else {
    if (r) invalid("scenario.r", "only allowed for random_percept");
    switch (tag) {
      case Tag::PostCollapseOnly: cfg.scenario = PerceptionScenario::post_collapse_only(); break;
      case Tag::DistinctPercept: cfg.scenario = PerceptionScenario::distinct_percept(); break;
      case Tag::FixedC1: cfg.scenario = PerceptionScenario::fixed_c1(); break;
      case Tag::FixedC2: cfg.scenario = PerceptionScenario::fixed_c2(); break;
      case Tag::RandomPercept: break;
    }
  }

  const json& ru = section(root, "rule");
  using RuleKind = DecisionRule::Kind;
  if (auto k = get_enum<RuleKind>(ru, "rule", "kind",
                                  {{"timing_threshold", RuleKind::TimingThreshold},
                                   {"change_detection", RuleKind::ChangeDetection},
                                   {"combined", RuleKind::Combined}})) {
    cfg.rule.kind = *k;
  }
  cfg.rule.threshold_time = get_number(ru, "rule", "threshold_time");
  if (auto v = get_unsigned(ru, "rule", "batch_n")) {
    if (*v < 1) invalid("rule.batch_n", "must be >= 1");
    cfg.rule.batch_n = static_cast<std::size_t>(*v);
  }
  if (auto g = get_enum<InputKind>(ru, "rule", "no_change_guess",
                                   {{"definite", InputKind::Definite},
                                    {"superposition", InputKind::Superposition}})) {
    cfg.rule.no_change_guess = *g;
  }
  validate_section(cfg.rule, "rule");
  return cfg;
}

inline std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  return parts;
}

// Settable leaf paths: "section.key" for sectioned keys, "key" for top-level
// scalars.
inline bool is_leaf_path(const std::string& dotted) {
  const auto parts = split_path(dotted);
  const auto& s = schema();
  if (parts.size() == 1) {
    return s.at("").count(parts[0]) && !s.count(parts[0]) && parts[0] != "schema_version";
  }
  if (parts.size() == 2) {
    return parts[0] != "sweep" && s.count(parts[0]) && s.at(parts[0]).count(parts[1]);
  }
  return false;
}

inline json with_value(json doc, const std::string& dotted, const json& value) {
  json* node = &doc;
  const auto parts = split_path(dotted);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->contains(parts[i]) || (*node)[parts[i]].is_null()) (*node)[parts[i]] = json::object();
    node = &(*node)[parts[i]];
  }
  (*node)[parts.back()] = value;
  return doc;
}

}  // namespace detail

// Parses and validates a configuration document. Errors name the offending
// field path.
inline HarnessConfig parse_config(const json& doc) {
  detail::check_keys(doc, "");
  if (const json* v = detail::child(doc, "schema_version")) {
    if (!v->is_number_integer() || v->get<long long>() != kSchemaVersion) {
      detail::invalid("schema_version", "unsupported (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }
  HarnessConfig cfg;
  cfg.document = doc;
  cfg.source = doc;
  cfg.source.erase("sweep");
  cfg.experiment = detail::parse_experiment(doc);

  const json& cal = detail::section(doc, "calibration");
  if (auto v = detail::get_number(cal, "calibration", "tolerance")) {
    if (!(*v > 0.0)) detail::invalid("calibration.tolerance", "must be > 0");
    cfg.calibration.tolerance = *v;
  }
  if (auto v = detail::get_unsigned(cal, "calibration", "max_runs")) {
    if (*v < 2) detail::invalid("calibration.max_runs", "must be >= 2");
    cfg.calibration.max_runs = static_cast<std::size_t>(*v);
  }
  if (auto v = detail::get_unsigned(cal, "calibration", "pilot_runs")) {
    if (*v < 2) detail::invalid("calibration.pilot_runs", "must be >= 2");
    cfg.calibration.pilot_runs = static_cast<std::size_t>(*v);
  }

  if (const json* sw = detail::child(doc, "sweep")) {
    detail::check_keys(*sw, "sweep");
    const json* param = detail::child(*sw, "param");
    if (!param || !param->is_string()) detail::invalid("sweep.param", "expected a string");
    const auto path = param->get<std::string>();
    if (!detail::is_leaf_path(path)) detail::invalid("sweep.param", "unknown parameter \"" + path + "\"");
    if (path == "master_seed") detail::invalid("sweep.param", "master_seed cannot be swept");
    const json* values = detail::child(*sw, "values");
    if (!values || !values->is_array()) detail::invalid("sweep.values", "expected an array");
    if (values->empty()) detail::invalid("sweep.values", "must not be empty");
    Sweep sweep{path, {}};
    for (std::size_t k = 0; k < values->size(); ++k) {
      const json& value = (*values)[k];
      // Type-check each point against the targeted field.
      try {
        detail::parse_experiment(detail::with_value(cfg.source, path, value));
      } catch (const ConfigError& e) {
        detail::invalid("sweep.values[" + std::to_string(k) + "]", e.what());
      }
      sweep.values.push_back(value);
    }
    std::stable_sort(sweep.values.begin(), sweep.values.end());
    cfg.sweep = std::move(sweep);
  }
  return cfg;
}

inline HarnessConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(ConfigError::Reason::MissingFile, "", "cannot open config file " + path);
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(ConfigError::Reason::Parse, "", std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return parse_config(doc);
}

struct SweepPoint {
  json value;
  ExperimentConfig experiment;
};

inline std::vector<SweepPoint> expand_sweep(const HarnessConfig& cfg) {
  if (!cfg.sweep) throw MisuseError("expand_sweep: configuration has no sweep");
  std::vector<SweepPoint> points;
  for (const auto& value : cfg.sweep->values) {
    auto doc = detail::with_value(cfg.source, cfg.sweep->param, value);
    points.push_back({value, detail::parse_experiment(doc)});
  }
  return points;
}

// Fully resolved parameter set, defaults filled in.
inline json to_json(const ExperimentConfig& c) {
  json collapse = {{"model", to_string(c.collapse.model)},
                   {"t_c_mean", c.collapse.t_c_mean},
                   {"epsilon", c.collapse.epsilon},
                   {"dt", c.collapse.step()},
                   {"kappa", c.collapse.kappa}};
  collapse["gamma"] = c.collapse.gamma ? json(*c.collapse.gamma) : json(nullptr);
  collapse["energy"] = c.collapse.energy ? json(*c.collapse.energy) : json(nullptr);
  json scenario = {{"tag", to_string(c.scenario.tag())}};
  if (c.scenario.r()) scenario["r"] = *c.scenario.r();
  json rule = {{"kind", to_string(c.rule.kind)},
               {"batch_n", c.rule.batch_n},
               {"no_change_guess", to_string(c.rule.no_change_guess)}};
  rule["threshold_time"] = c.rule.uses_timing() ? json(c.rule.resolved_threshold(c.observer))
                                                : json(nullptr);
  return {{"schema_version", kSchemaVersion},
          {"master_seed", c.master_seed},
          {"n_trials", c.n_trials},
          {"priors", c.priors},
          {"input_p1", c.input_p1},
          {"device_baseline", c.device_baseline},
          {"qsc_margin", c.qsc_margin},
          {"collapse", collapse},
          {"observer",
           {{"t_p", c.observer.t_p},
            {"jitter_sigma", c.observer.jitter_sigma},
            {"resolution", c.observer.resolution}}},
          {"scenario", scenario},
          {"rule", rule}};
}

inline json proportion_json(const stats::Proportion& p) {
  return {{"successes", p.successes},
          {"trials", p.trials},
          {"estimate", std::isnan(p.estimate) ? json(nullptr) : json(p.estimate)},
          {"ci95", {p.lo, p.hi}}};
}

inline json to_json(const ExperimentSummary& s) {
  auto number_or_null = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
  json j = {{"n_trials", s.n_trials},
            {"accuracy_definite", proportion_json(s.accuracy_definite)},
            {"accuracy_superposition", proportion_json(s.accuracy_superposition)},
            {"accuracy_overall", proportion_json(s.overall)},
            {"mean_report_time_definite", number_or_null(s.mean_report_time_definite)},
            {"mean_report_time_superposition", number_or_null(s.mean_report_time_superposition)},
            {"threshold_time", s.threshold_time},
            {"qsc_satisfied", s.qsc_satisfied}};
  if (s.device) {
    j["device"] = {{"success", proportion_json(s.device->success)}, {"bound", s.device->bound}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "sweep_param", "sweep_value", "n_trials",
      "acc_definite", "acc_definite_lo", "acc_definite_hi",
      "acc_superposition", "acc_superposition_lo", "acc_superposition_hi",
      "acc_overall", "acc_overall_lo", "acc_overall_hi",
      "device_success", "device_bound",
      "mean_report_time_definite", "mean_report_time_superposition",
      "master_seed", "resolved_params"};
  return cols;
}

// Shortest round-trip representation; identical bytes for identical doubles.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string csv_header() {
  std::string line;
  for (const auto& c : csv_columns()) line += (line.empty() ? "" : ",") + c;
  return line + "\n";
}

inline std::string csv_row(const std::string& sweep_param, const std::string& sweep_value,
                           const ExperimentConfig& cfg, const ExperimentSummary& s) {
  std::vector<std::string> f;
  f.push_back(sweep_param);
  f.push_back(sweep_value);
  f.push_back(std::to_string(s.n_trials));
  for (const auto* p : {&s.accuracy_definite, &s.accuracy_superposition, &s.overall}) {
    f.push_back(format_number(p->estimate));
    f.push_back(format_number(p->lo));
    f.push_back(format_number(p->hi));
  }
  f.push_back(s.device ? format_number(s.device->success.estimate) : "");
  f.push_back(s.device ? format_number(s.device->bound) : "");
  f.push_back(format_number(s.mean_report_time_definite));
  f.push_back(format_number(s.mean_report_time_superposition));
  f.push_back(std::to_string(cfg.master_seed));
  f.push_back(csv_quote(to_json(cfg).dump()));
  std::string line;
  for (std::size_t i = 0; i < f.size(); ++i) line += (i ? "," : "") + f[i];
  return line + "\n";
}

// ---------------------------------------------------------------------------
// Commands (library side; the CLI adds I/O)

struct RunOutput {
  ExperimentSummary summary;
  std::string csv;
};

inline RunOutput run(const HarnessConfig& cfg, unsigned threads) {
  RunOutput out;
  out.summary = run_experiment(cfg.experiment, threads);
  out.csv = csv_header() + csv_row("", "", cfg.experiment, out.summary);
  return out;
}

struct SweepOutput {
  std::vector<std::pair<json, ExperimentSummary>> rows;
  std::string csv;
};

inline SweepOutput sweep(const HarnessConfig& cfg, unsigned threads) {
  if (!cfg.sweep) throw ConfigError(ConfigError::Reason::Validation, "sweep", "required for sweep");
  SweepOutput out;
  out.csv = csv_header();
  for (const auto& point : expand_sweep(cfg)) {
    auto summary = run_experiment(point.experiment, threads);
    out.csv += csv_row(cfg.sweep->param, point.value.dump(), point.experiment, summary);
    out.rows.emplace_back(point.value, std::move(summary));
  }
  return out;
}

struct CalibrateOutput {
  CalibrationResult result;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  json updated_source;  // input document with collapse.gamma filled in
};

inline CalibrateOutput calibrate(const HarnessConfig& cfg, unsigned threads) {
  const auto& c = cfg.experiment.collapse;
  if (c.model != CollapseModel::Diffusion) {
    throw MisuseError("calibrate: collapse.model is " + std::string(to_string(c.model)) +
                      ", calibration applies to diffusion only");
  }
  CalibrationOptions opts;
  opts.dt = c.step();
  opts.max_runs = cfg.calibration.max_runs;
  opts.pilot_runs = cfg.calibration.pilot_runs;
  opts.threads = threads;
  CalibrateOutput out;
  out.result = calibrate_gamma(c.t_c_mean, cfg.experiment.input_p1, c.epsilon,
                               cfg.calibration.tolerance, cfg.experiment.master_seed, opts);
  out.ci_lo = out.result.achieved_mean - stats::kZ95 * out.result.achieved_sem;
  out.ci_hi = out.result.achieved_mean + stats::kZ95 * out.result.achieved_sem;
  out.updated_source = detail::with_value(cfg.document, "collapse.gamma", out.result.gamma);
  return out;
}

}  // namespace qsc::harness

#endif  // QSC_HARNESS_HPP
