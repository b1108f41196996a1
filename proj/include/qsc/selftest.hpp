#ifndef QSC_SELFTEST_HPP
#define QSC_SELFTEST_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qsc/collapse.hpp"
#include "qsc/core.hpp"
#include "qsc/harness.hpp"
#include "qsc/observer.hpp"
#include "qsc/protocol.hpp"
#include "qsc/stats.hpp"

// The acceptance criteria as executable checks. scale = 1 runs every
// criterion at its stated sample size and tolerance; smaller scales shrink
// sample sizes and widen each tolerance by sqrt(N_full / N), which keeps the
// same number of standard errors.
namespace qsc::selftest {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  double scale = 1.0;
  unsigned threads = 1;
  std::uint64_t seed = 20011017;
};

namespace detail {

using clock = std::chrono::steady_clock;

inline double elapsed(clock::time_point since) {
  return std::chrono::duration<double>(clock::now() - since).count();
}

inline std::size_t scaled(double n_full, double scale, std::size_t floor = 1000) {
  return std::max<std::size_t>(floor, static_cast<std::size_t>(std::llround(n_full * scale)));
}

inline double widen(double tol_full, double n_full, std::size_t n) {
  return tol_full * std::sqrt(std::max(1.0, n_full / static_cast<double>(n)));
}

class Log {
 public:
  void check(bool ok, const std::string& what) {
    passed_ = passed_ && ok;
    out_ << (out_.tellp() > 0 ? "; " : "") << (ok ? "" : "FAILED ") << what;
  }
  bool passed() const { return passed_; }
  std::string str() const { return out_.str(); }

 private:
  bool passed_ = true;
  std::ostringstream out_;
};

inline std::string fmt(double x, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

// Branch-1 count over n collapses, drawn in chunks of 1000 per stream.
inline std::size_t count_b1(const InputState& s, const CollapseParams& p, std::size_t n,
                            std::uint64_t seed, std::uint32_t channel_id, unsigned threads) {
  constexpr std::size_t kChunk = 1000;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const auto counts = parallel_map(chunks, threads, [&](std::size_t c) {
    Stream rng(seed, c, channel_id);
    std::size_t hits = 0;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      hits += collapse_for_input(s, p, rng)->outcome == Branch::B1;
    }
    return hits;
  });
  std::size_t total = 0;
  for (auto h : counts) total += h;
  return total;
}

// Frequency of change_detected among n superposition perceptions.
inline double change_frequency(const PerceptionScenario& sc, double p1, std::size_t n,
                               std::uint64_t seed, std::uint32_t channel_id, unsigned threads) {
  CollapseParams cp;
  cp.t_c_mean = 1.0;
  ObserverParams op;
  const InputState s = make_input_state(InputKind::Superposition, p1);
  constexpr std::size_t kChunk = 1000;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  const auto counts = parallel_map(chunks, threads, [&](std::size_t c) {
    Stream rng(seed, c, channel_id);
    std::size_t hits = 0;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      hits += perceive_superposition(op, sc, collapse_for_input(s, cp, rng), rng).change_detected;
    }
    return hits;
  });
  std::size_t total = 0;
  for (auto h : counts) total += h;
  return static_cast<double>(total) / static_cast<double>(n);
}

inline ExperimentConfig qsc_regime(std::uint64_t seed, std::size_t n) {
  ExperimentConfig cfg;
  cfg.master_seed = seed;
  cfg.n_trials = n;
  cfg.collapse.model = CollapseModel::JumpExponential;
  cfg.collapse.t_c_mean = 180.0;
  cfg.observer = {0.001, 0.0002, 0.01};
  cfg.rule.batch_n = 1;
  return cfg;
}

// Sweep of t_c over t_p + k * resolution with deterministic collapse times.
inline harness::json delta_t_sweep_doc(std::uint64_t seed, std::size_t n) {
  const double t_p = 0.001, resolution = 0.01;
  harness::json values = harness::json::array();
  for (double k : {0.0, 0.5, 1.0, 2.0, 5.0, 10.0}) values.push_back(t_p + k * resolution);
  return {{"schema_version", 1},
          {"master_seed", seed},
          {"n_trials", n},
          {"collapse", {{"model", "deterministic_time"}, {"t_c_mean", t_p}}},
          {"observer", {{"t_p", t_p}, {"jitter_sigma", 0.0002}, {"resolution", resolution}}},
          {"rule", {{"kind", "timing_threshold"}, {"batch_n", 1}}},
          {"sweep", {{"param", "collapse.t_c_mean"}, {"values", values}}}};
}

}  // namespace detail

inline CriterionResult born_rule(const Options& opt) {
  using namespace detail;
  const auto start = clock::now();
  Log log;
  const std::size_t n = scaled(1e5, opt.scale);
  CollapseParams jump;
  jump.model = CollapseModel::JumpExponential;
  jump.t_c_mean = 1.0;
  // Coarse step keeps 3 x 1e5 diffusion runs cheap; kick gamma sqrt(dt) = 0.3.
  CollapseParams diffusion;
  diffusion.model = CollapseModel::Diffusion;
  diffusion.t_c_mean = 1.0;
  diffusion.gamma = 3.0;
  diffusion.dt = 0.01;
  std::uint32_t case_id = 100;
  for (const auto* model : {&jump, &diffusion}) {
    for (double p1 : {0.1, 0.5, 0.9}) {
      const auto s = make_input_state(InputKind::Superposition, p1);
      const auto hits = count_b1(s, *model, n, opt.seed, case_id++, opt.threads);
      const double f = static_cast<double>(hits) / static_cast<double>(n);
      const double bound = 3.0 * stats::binomial_sigma(p1, n);
      const double pv = stats::chi_square_two_cell_p_value(hits, n, p1);
      log.check(std::abs(f - p1) <= bound && pv > 0.001,
                std::string(to_string(model->model)) + " p1=" + fmt(p1) + ": f=" + fmt(f) +
                    " (+-" + fmt(bound, 3) + ") chi2 p=" + fmt(pv, 3));
    }
  }
  const double secs = elapsed(start);
  log.check(secs < 10.0, "runtime " + fmt(secs, 3) + " s < 10 s");
  return {1, "Born-rule conformance", log.passed(), log.str(), secs};
}

inline CriterionResult collapse_time_law(const Options& opt) {
  using namespace detail;
  const auto start = clock::now();
  Log log;
  const double t_c = 2.0;
  const std::size_t n = scaled(1e6, opt.scale, 10'000);
  constexpr std::size_t kChunk = 10'000;
  CollapseParams p;
  p.model = CollapseModel::JumpExponential;
  p.t_c_mean = t_c;
  const auto chunks = parallel_map((n + kChunk - 1) / kChunk, opt.threads, [&](std::size_t c) {
    Stream rng(opt.seed, c, 200);
    std::vector<double> xs;
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) xs.push_back(sample_collapse_time(p, rng));
    return xs;
  });
  std::vector<double> all;
  all.reserve(n);
  for (const auto& xs : chunks) all.insert(all.end(), xs.begin(), xs.end());
  const auto m = stats::moments(all);
  const double root_n = std::sqrt(static_cast<double>(n));
  // Exponential: sd(mean) = t_c / sqrt(n); sd(sample variance) = sqrt(8) t_c^2 / sqrt(n).
  const double mean_bound = 3.0 * t_c / root_n;
  const double var_bound = 3.0 * std::sqrt(8.0) * t_c * t_c / root_n;
  log.check(std::abs(m.mean - t_c) <= mean_bound,
            "exp mean " + fmt(m.mean) + " vs " + fmt(t_c) + " +-" + fmt(mean_bound, 3));
  log.check(std::abs(m.variance - t_c * t_c) <= var_bound,
            "exp var " + fmt(m.variance) + " vs " + fmt(t_c * t_c) + " +-" + fmt(var_bound, 3));
  const double exp_secs = elapsed(start);
  log.check(exp_secs < 5.0, "exponential runtime " + fmt(exp_secs, 3) + " s < 5 s");

  const double target = 1.0;
  CalibrationOptions copts;
  copts.threads = opt.threads;
  const auto cal = calibrate_gamma(target, 0.5, kDefaultEpsilon, 0.05, opt.seed, copts);
  const std::size_t n_verify = scaled(1e4, opt.scale);
  const auto verify = estimate_hitting_time(0.5, cal.gamma, kDefaultEpsilon,
                                            target / kDefaultStepsPerMean, n_verify, opt.seed,
                                            kDiffusionStepLimit, opt.threads,
                                            channel::kVerification);
  log.check(!verify.too_slow && std::abs(verify.mean - target) <= 0.05 * target,
            "calibrated gamma=" + fmt(cal.gamma) + " fresh mean over " +
                std::to_string(n_verify) + " runs " + fmt(verify.mean) + " within 5% of 1");
  return {2, "Collapse-time law", log.passed(), log.str(), elapsed(start)};
}

inline CriterionResult case_two_probability(const Options& opt) {
  using namespace detail;
  const auto start = clock::now();
  Log log;
  const auto sc = PerceptionScenario::fixed_c1();
  const std::size_t n = scaled(1e5, opt.scale);
  const double f = change_frequency(sc, 0.5, n, opt.seed, 300, opt.threads);
  const double tol = widen(0.0047, 1e5, n);
  log.check(std::abs(f - 0.5) <= tol, "FixedC1 p1=0.5 change freq " + fmt(f) + " (0.5 +-" + fmt(tol, 3) + ")");

  const std::size_t n_each = scaled(1e4, opt.scale);
  bool closed_ok = true;
  bool empirical_ok = true;
  std::uint32_t case_id = 310;
  for (int k = 1; k <= 9; ++k) {
    const double p1 = 0.1 * k;
    // Enumerate the two outcomes; a change happens when c1 != C(outcome).
    double enumerated = 0.0;
    for (Branch b : {Branch::B1, Branch::B2}) {
      const double pb = b == Branch::B1 ? p1 : 1.0 - p1;
      if (percept_for(b) != Percept::C1) enumerated += pb;
    }
    const double closed = awareness_probability(sc, p1);
    closed_ok = closed_ok && std::abs(closed - enumerated) <= 1e-15;
    const double fe = change_frequency(sc, p1, n_each, opt.seed, case_id++, opt.threads);
    empirical_ok = empirical_ok && std::abs(fe - closed) <= 3.0 * stats::binomial_sigma(closed, n_each);
  }
  log.check(closed_ok, "awareness_probability equals outcome enumeration for p1=0.1..0.9");
  log.check(empirical_ok, "simulated frequency within 3 sigma of awareness_probability at every p1");
  return {3, "Case-(2) probability", log.passed(), log.str(), elapsed(start)};
}

inline CriterionResult qsc_separation(const Options& opt) {
  using namespace detail;
  const auto start = clock::now();
  Log log;
  const std::size_t n = scaled(1e4, opt.scale);

  auto timing = qsc_regime(opt.seed, n);
  timing.scenario = PerceptionScenario::post_collapse_only();
  timing.rule.kind = DecisionRule::Kind::TimingThreshold;
  timing.device_baseline = true;
  const auto a = run_experiment(timing, opt.threads);
  log.check(a.overall.estimate >= 0.999,
            "PostCollapseOnly/TimingThreshold accuracy " + fmt(a.overall.estimate) + " >= 0.999");

  auto change = qsc_regime(opt.seed, n);
  change.scenario = PerceptionScenario::distinct_percept();
  change.rule.kind = DecisionRule::Kind::ChangeDetection;
  const auto b = run_experiment(change, opt.threads);
  log.check(b.overall.estimate >= 0.999,
            "DistinctPercept/ChangeDetection accuracy " + fmt(b.overall.estimate) + " >= 0.999");

  const double device = a.device->success.estimate;
  const double tol = widen(0.015, 1e4, n);
  log.check(std::abs(device - 0.75) <= tol, "device success " + fmt(device) + " (0.75 +-" + fmt(tol, 3) + ")");
  log.check(device <= a.device->bound && std::abs(a.device->bound - 0.8535533905932737) < 1e-12,
            "device <= optimal bound " + fmt(a.device->bound));
  const double secs = elapsed(start);
  log.check(secs < 30.0, "runtime " + fmt(secs, 3) + " s < 30 s");
  return {4, "QSC separation", log.passed(), log.str(), secs};
}

inline CriterionResult qsc_failure_mode(const Options& opt) {
  using namespace detail;
  const auto start = clock::now();
  Log log;
  const std::size_t n = scaled(1e4, opt.scale);
  const auto cfg = harness::parse_config(delta_t_sweep_doc(opt.seed, n));
  const auto out = harness::sweep(cfg, opt.threads);
  const auto& rows = out.rows;
  const double chance = rows.front().second.overall.estimate;
  const double tol = widen(0.02, 1e4, n);
  log.check(std::abs(chance - 0.5) <= tol, "dt=0 accuracy " + fmt(chance) + " (0.5 +-" + fmt(tol, 3) + ")");
  bool monotone = true;
  std::string series;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& p = rows[i].second.overall;
    series += (i ? " " : "") + fmt(p.estimate, 4);
    if (i == 0) continue;
    const auto& q = rows[i - 1].second.overall;
    const double sigma = std::hypot(stats::binomial_sigma(p.estimate, p.trials),
                                    stats::binomial_sigma(q.estimate, q.trials));
    monotone = monotone && p.estimate >= q.estimate - 2.0 * sigma;
  }
  log.check(monotone, "accuracy over dt/resolution {0,0.5,1,2,5,10}: " + series + " nondecreasing within 2 sigma");
  return {5, "QSC failure mode", log.passed(), log.str(), elapsed(start)};
}

inline CriterionResult batching(const Options& opt) {
  using namespace detail;
  const auto start = clock::now();
  Log log;
  ExperimentConfig cfg;
  cfg.master_seed = opt.seed;
  cfg.n_trials = scaled(1e5, opt.scale);
  cfg.priors = 0.0;
  cfg.input_p1 = 0.5;
  cfg.scenario = PerceptionScenario::fixed_c1();
  cfg.rule.kind = DecisionRule::Kind::ChangeDetection;
  cfg.rule.batch_n = 5;
  const auto s = run_experiment(cfg, opt.threads);
  const double rate = s.accuracy_superposition.estimate;
  const double tol = widen(0.005, 1e5, cfg.n_trials);
  log.check(std::abs(rate - 0.96875) <= tol,
            "batch_n=5 detection " + fmt(rate) + " (0.96875 +-" + fmt(tol, 3) + ")");

  harness::json doc = {{"master_seed", opt.seed},
                       {"n_trials", scaled(1e4, opt.scale)},
                       {"priors", 0.0},
                       {"input_p1", 0.5},
                       {"scenario", {{"tag", "fixed_c1"}}},
                       {"rule", {{"kind", "change_detection"}}},
                       {"sweep", {{"param", "rule.batch_n"}, {"values", {1, 2, 3, 5, 8}}}}};
  const auto out = harness::sweep(harness::parse_config(doc), opt.threads);
  for (const auto& [value, summary] : out.rows) {
    const int k = value.get<int>();
    const double expected = 1.0 - std::pow(2.0, -k);
    const auto& p = summary.accuracy_superposition;
    const double bound = 3.0 * stats::binomial_sigma(expected, p.trials);
    log.check(std::abs(p.estimate - expected) <= bound,
              "n=" + std::to_string(k) + " " + fmt(p.estimate) + " vs " + fmt(expected));
  }
  return {6, "Batching", log.passed(), log.str(), elapsed(start)};
}

inline CriterionResult reproducibility(const Options& opt) {
  using namespace detail;
  const auto start = clock::now();
  Log log;
  auto doc = delta_t_sweep_doc(opt.seed, 2000);
  const auto sweep_cfg = harness::parse_config(doc);
  const auto s1 = harness::sweep(sweep_cfg, 1).csv;
  const auto s2 = harness::sweep(sweep_cfg, 1).csv;
  const auto s4 = harness::sweep(sweep_cfg, 4).csv;
  log.check(s1 == s2, "sweep CSV byte-identical on rerun");
  log.check(s1 == s4, "sweep CSV identical for --threads 1 and 4");

  doc.erase("sweep");
  doc["collapse"] = {{"model", "jump_exponential"}, {"t_c_mean", 180.0}};
  doc["device_baseline"] = true;
  const auto run_cfg = harness::parse_config(doc);
  const auto r1 = harness::run(run_cfg, 1).csv;
  log.check(r1 == harness::run(run_cfg, 1).csv && r1 == harness::run(run_cfg, 4).csv,
            "run CSV identical across reruns and thread counts");

  harness::json cal_doc = {{"master_seed", opt.seed},
                           {"n_trials", 1},
                           {"collapse", {{"model", "diffusion"}, {"t_c_mean", 1.0}, {"dt", 0.002}}},
                           {"calibration", {{"tolerance", 0.1}, {"max_runs", 5000}}}};
  const auto cal_cfg = harness::parse_config(cal_doc);
  const double g1 = harness::calibrate(cal_cfg, 1).result.gamma;
  const double g4 = harness::calibrate(cal_cfg, 4).result.gamma;
  log.check(g1 == g4, "calibrated gamma identical across thread counts (" + fmt(g1, 17) + ")");
  return {7, "Reproducibility", log.passed(), log.str(), elapsed(start)};
}

inline std::vector<std::function<CriterionResult(const Options&)>> criteria() {
  return {born_rule,      collapse_time_law, case_two_probability, qsc_separation,
          qsc_failure_mode, batching,       reproducibility};
}

// Runs criteria 1-7; exceptions count as failures.
inline std::vector<CriterionResult> run_all(const Options& opt,
                                            const std::function<void(const CriterionResult&)>& on_result = {}) {
  std::vector<CriterionResult> results;
  int id = 1;
  for (const auto& criterion : criteria()) {
    CriterionResult r;
    try {
      r = criterion(opt);
    } catch (const std::exception& e) {
      r = {id, "criterion " + std::to_string(id), false, std::string("exception: ") + e.what(), 0.0};
    }
    if (on_result) on_result(r);
    results.push_back(std::move(r));
    ++id;
  }
  return results;
}

inline std::string format_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "[PASS] " : "[FAIL] ") << "criterion " << r.id << " (" << r.name << ", "
     << detail::fmt(r.seconds, 3) << " s): " << r.detail;
  return os.str();
}

}  // namespace qsc::selftest

#endif  // QSC_SELFTEST_HPP
