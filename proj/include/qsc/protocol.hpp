#ifndef QSC_PROTOCOL_HPP
#define QSC_PROTOCOL_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsc/collapse.hpp"
#include "qsc/core.hpp"
#include "qsc/errors.hpp"
#include "qsc/observer.hpp"
#include "qsc/random.hpp"
#include "qsc/stats.hpp"

namespace qsc {

// Default timing threshold sits this many noise scales past t_p.
inline constexpr double kThresholdNoiseScales = 5.0;

struct DecisionRule {
  enum class Kind { TimingThreshold, ChangeDetection, Combined };

  Kind kind = Kind::TimingThreshold;
  // Unset means t_p + 5 max(jitter_sigma, resolution); see resolved_threshold.
  std::optional<double> threshold_time;
  std::size_t batch_n = 5;
  InputKind no_change_guess = InputKind::Definite;

  bool uses_timing() const { return kind != Kind::ChangeDetection; }

  double resolved_threshold(const ObserverParams& o) const {
    if (threshold_time) return *threshold_time;
    return o.t_p + kThresholdNoiseScales * std::max(o.jitter_sigma, o.resolution);
  }

  void validate() const {
    if (batch_n < 1) throw FieldError("batch_n", "must be >= 1");
    if (threshold_time && !(*threshold_time > 0.0)) {
      throw FieldError("threshold_time", "must be > 0");
    }
  }

  // Copy with the threshold pinned for the given observer.
  DecisionRule resolved(const ObserverParams& o) const {
    DecisionRule r = *this;
    if (r.uses_timing()) r.threshold_time = resolved_threshold(o);
    return r;
  }
};

inline std::string_view to_string(DecisionRule::Kind k) {
  switch (k) {
    case DecisionRule::Kind::TimingThreshold: return "timing_threshold";
    case DecisionRule::Kind::ChangeDetection: return "change_detection";
    case DecisionRule::Kind::Combined: return "combined";
  }
  return "?";
}

struct TrialRecord {
  InputKind true_input = InputKind::Definite;
  double input_p1 = 1.0;
  std::optional<CollapseEvent> collapse;
  PerceptionReport report;
  InputKind guess = InputKind::Definite;
  bool correct = false;
};

// Single-report decision. The rule must carry a threshold when it uses
// timing (see DecisionRule::resolved).
inline InputKind classify_single(const PerceptionReport& report, const DecisionRule& rule) {
  using Kind = DecisionRule::Kind;
  const auto timing_fires = [&] {
    if (!rule.threshold_time) throw MisuseError("classify_single: threshold_time unset");
    return report.first_percept_time > *rule.threshold_time;
  };
  switch (rule.kind) {
    case Kind::TimingThreshold:
      return timing_fires() ? InputKind::Superposition : InputKind::Definite;
    case Kind::ChangeDetection:
      return report.change_detected ? InputKind::Superposition : rule.no_change_guess;
    case Kind::Combined:
      return report.change_detected || timing_fires() ? InputKind::Superposition
                                                      : InputKind::Definite;
  }
  return InputKind::Definite;
}

// Both detectors are one-sided, so a batch is called a superposition as soon
// as any member is. Jitter false positives add up across the batch.
inline InputKind classify_batch(std::span<const PerceptionReport> reports,
                                const DecisionRule& rule) {
  if (reports.empty()) throw DomainError("classify_batch: empty batch");
  for (const auto& r : reports) {
    if (classify_single(r, rule) == InputKind::Superposition) return InputKind::Superposition;
  }
  return InputKind::Definite;
}

inline TrialRecord run_trial(InputKind true_input, double p1, const CollapseParams& collapse,
                             const ObserverParams& observer, const PerceptionScenario& scenario,
                             const DecisionRule& rule, Stream& rng) {
  TrialRecord rec;
  rec.true_input = true_input;
  rec.input_p1 = true_input == InputKind::Definite ? 1.0 : p1;
  const InputState state = make_input_state(true_input, rec.input_p1);
  rec.collapse = collapse_for_input(state, collapse, rng);
  rec.report = rec.collapse ? perceive_superposition(observer, scenario, rec.collapse, rng)
                            : perceive_definite(observer, rng);
  rec.guess = classify_single(rec.report, rule.resolved(observer));
  rec.correct = rec.guess == true_input;
  return rec;
}

struct BatchRecord {
  InputKind true_input = InputKind::Definite;
  std::vector<TrialRecord> trials;
  InputKind guess = InputKind::Definite;
  bool correct = false;
};

// batch_n identically prepared single states, one decision.
inline BatchRecord run_batch(InputKind true_input, double p1, const CollapseParams& collapse,
                             const ObserverParams& observer, const PerceptionScenario& scenario,
                             const DecisionRule& rule, Stream& rng) {
  const DecisionRule pinned = rule.resolved(observer);
  BatchRecord batch;
  batch.true_input = true_input;
  batch.trials.reserve(rule.batch_n);
  std::vector<PerceptionReport> reports;
  reports.reserve(rule.batch_n);
  for (std::size_t k = 0; k < rule.batch_n; ++k) {
    batch.trials.push_back(run_trial(true_input, p1, collapse, observer, scenario, pinned, rng));
    reports.push_back(batch.trials.back().report);
  }
  batch.guess = classify_batch(reports, pinned);
  batch.correct = batch.guess == true_input;
  return batch;
}

struct DeviceTrial {
  Branch outcome = Branch::B1;
  InputKind guess = InputKind::Definite;
  bool correct = false;
};

// Projective measurement in the {y1, y2} basis with no timing channel. Only
// outcome B2 is conclusive.
inline DeviceTrial device_trial(InputKind true_input, double p1, Stream& rng,
                                InputKind no_change_guess = InputKind::Definite) {
  const InputState state =
      make_input_state(true_input, true_input == InputKind::Definite ? 1.0 : p1);
  DeviceTrial t;
  t.outcome = sample_outcome(born_probability(state), rng);
  t.guess = t.outcome == Branch::B2 ? InputKind::Superposition : no_change_guess;
  t.correct = t.guess == true_input;
  return t;
}

// Best equal-prior single-copy success for two states with the given
// fidelity: (1 + sqrt(1 - F)) / 2.
inline double optimal_device_bound(double fidelity) {
  if (!(fidelity >= 0.0 && fidelity <= 1.0)) {
    throw DomainError("optimal_device_bound: fidelity outside [0, 1]");
  }
  return 0.5 * (1.0 + std::sqrt(1.0 - fidelity));
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  std::size_t n_trials = 1000;
  double priors = 0.5;  // P(Definite input)
  double input_p1 = 0.5;
  CollapseParams collapse;
  ObserverParams observer;
  PerceptionScenario scenario = PerceptionScenario::post_collapse_only();
  DecisionRule rule;
  bool device_baseline = false;
  double qsc_margin = 5.0;
};

struct DeviceSummary {
  stats::Proportion success;
  double bound = 0.0;
};

struct ExperimentSummary {
  std::size_t n_trials = 0;
  stats::Proportion accuracy_definite;
  stats::Proportion accuracy_superposition;
  stats::Proportion overall;
  double mean_report_time_definite = std::numeric_limits<double>::quiet_NaN();
  double mean_report_time_superposition = std::numeric_limits<double>::quiet_NaN();
  std::optional<DeviceSummary> device;
  double threshold_time = 0.0;
  bool qsc_satisfied = false;
};

namespace detail {

struct TrialTally {
  InputKind input = InputKind::Definite;
  bool correct = false;
  double report_time_sum = 0.0;
  std::size_t reports = 0;
  bool device_correct = false;
};

}  // namespace detail

// Trial i (a batch of rule.batch_n single states) draws everything from
// stream (master_seed, i); the device baseline uses a separate channel.
// The fold runs in index order, so the summary is identical for any number
// of threads.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, unsigned threads = 1) {
  if (cfg.n_trials < 1) throw DomainError("run_experiment: n_trials must be >= 1");
  if (!(cfg.priors >= 0.0 && cfg.priors <= 1.0)) {
    throw DomainError("run_experiment: priors outside [0, 1]");
  }
  cfg.collapse.validate();
  cfg.observer.validate();
  cfg.rule.validate();
  // Fails early on an unusable p1 instead of inside a worker.
  const InputState superposed = make_input_state(InputKind::Superposition, cfg.input_p1);
  const DecisionRule rule = cfg.rule.resolved(cfg.observer);

  const auto tallies = parallel_map(cfg.n_trials, threads, [&](std::size_t i) {
    Stream rng(cfg.master_seed, i, channel::kTrial);
    detail::TrialTally tally;
    tally.input = rng.uniform() < cfg.priors ? InputKind::Definite : InputKind::Superposition;
    const BatchRecord batch = run_batch(tally.input, cfg.input_p1, cfg.collapse, cfg.observer,
                                        cfg.scenario, rule, rng);
    tally.correct = batch.correct;
    for (const auto& t : batch.trials) tally.report_time_sum += t.report.first_percept_time;
    tally.reports = batch.trials.size();
    if (cfg.device_baseline) {
      Stream device_rng(cfg.master_seed, i, channel::kDevice);
      tally.device_correct =
          device_trial(tally.input, cfg.input_p1, device_rng, rule.no_change_guess).correct;
    }
    return tally;
  });

  std::size_t n_def = 0, ok_def = 0, n_sup = 0, ok_sup = 0, ok_device = 0;
  double time_def = 0.0, time_sup = 0.0;
  std::size_t reports_def = 0, reports_sup = 0;
  for (const auto& t : tallies) {
    if (t.input == InputKind::Definite) {
      ++n_def;
      ok_def += t.correct;
      time_def += t.report_time_sum;
      reports_def += t.reports;
    } else {
      ++n_sup;
      ok_sup += t.correct;
      time_sup += t.report_time_sum;
      reports_sup += t.reports;
    }
    ok_device += t.device_correct;
  }

  ExperimentSummary s;
  s.n_trials = cfg.n_trials;
  s.accuracy_definite = stats::wilson(ok_def, n_def);
  s.accuracy_superposition = stats::wilson(ok_sup, n_sup);
  s.overall = stats::wilson(ok_def + ok_sup, cfg.n_trials);
  if (reports_def) s.mean_report_time_definite = time_def / static_cast<double>(reports_def);
  if (reports_sup) s.mean_report_time_superposition = time_sup / static_cast<double>(reports_sup);
  if (cfg.device_baseline) {
    const double fidelity =
        state_fidelity(make_input_state(InputKind::Definite, 1.0), superposed);
    s.device = DeviceSummary{stats::wilson(ok_device, cfg.n_trials),
                             optimal_device_bound(fidelity)};
  }
  s.threshold_time = rule.resolved_threshold(cfg.observer);
  s.qsc_satisfied = qsc_condition_satisfied(cfg.observer, cfg.collapse, cfg.qsc_margin);
  return s;
}

}  // namespace qsc

#endif  // QSC_PROTOCOL_HPP
