#ifndef QSC_OBSERVER_HPP
#define QSC_OBSERVER_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "qsc/collapse.hpp"
#include "qsc/core.hpp"
#include "qsc/errors.hpp"
#include "qsc/random.hpp"

namespace qsc {

struct ObserverParams {
  double t_p = 0.001;            // perception latency for a definite state, s
  double jitter_sigma = 0.0002;  // report-time noise, s
  double resolution = 0.01;      // smallest identifiable time difference, s

  void validate() const {
    if (!(t_p > 0.0) || !std::isfinite(t_p)) throw FieldError("t_p", "must be > 0");
    if (!(jitter_sigma >= 0.0) || !std::isfinite(jitter_sigma)) {
      throw FieldError("jitter_sigma", "must be >= 0");
    }
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
      throw FieldError("resolution", "must be > 0");
    }
  }
};

// C0 is the observer's initial percept. It names the pre-measurement state
// and never appears in a report.
enum class Percept { C0, C1, C2, Distinct };

inline std::string_view to_string(Percept p) {
  switch (p) {
    case Percept::C0: return "c0";
    case Percept::C1: return "c1";
    case Percept::C2: return "c2";
    case Percept::Distinct: return "distinct";
  }
  return "?";
}

inline Percept percept_for(Branch b) { return b == Branch::B1 ? Percept::C1 : Percept::C2; }

// What the observer experiences while the joint state is still superposed.
class PerceptionScenario {
 public:
  enum class Tag { PostCollapseOnly, DistinctPercept, FixedC1, FixedC2, RandomPercept };

  static PerceptionScenario post_collapse_only() { return PerceptionScenario(Tag::PostCollapseOnly); }
  static PerceptionScenario distinct_percept() { return PerceptionScenario(Tag::DistinctPercept); }
  static PerceptionScenario fixed_c1() { return PerceptionScenario(Tag::FixedC1); }
  static PerceptionScenario fixed_c2() { return PerceptionScenario(Tag::FixedC2); }
  // r is the chance that the pre-collapse percept is c1.
  static PerceptionScenario random_percept(double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw FieldError("r", "must lie in [0, 1]");
    return PerceptionScenario(Tag::RandomPercept, r);
  }

  Tag tag() const { return tag_; }
  std::optional<double> r() const { return r_; }

 private:
  explicit PerceptionScenario(Tag tag, std::optional<double> r = std::nullopt)
      : tag_(tag), r_(r) {}

  Tag tag_;
  std::optional<double> r_;
};

inline std::string_view to_string(PerceptionScenario::Tag t) {
  using Tag = PerceptionScenario::Tag;
  switch (t) {
    case Tag::PostCollapseOnly: return "post_collapse_only";
    case Tag::DistinctPercept: return "distinct_percept";
    case Tag::FixedC1: return "fixed_c1";
    case Tag::FixedC2: return "fixed_c2";
    case Tag::RandomPercept: return "random_percept";
  }
  return "?";
}

struct PerceptionReport {
  double first_percept_time = 0.0;
  Percept first_percept = Percept::C1;
  bool change_detected = false;
  std::optional<double> change_time;
  Percept final_percept = Percept::C1;
};

namespace detail {

// Latency plus Gaussian jitter, clamped at zero. No draw when sigma = 0.
inline double jittered(double t, const ObserverParams& o, Stream& rng) {
  if (o.jitter_sigma == 0.0) return t;
  return std::max(0.0, t + o.jitter_sigma * rng.normal());
}

}  // namespace detail

inline PerceptionReport perceive_definite(const ObserverParams& o, Stream& rng) {
  PerceptionReport r;
  r.first_percept_time = detail::jittered(o.t_p, o, rng);
  r.first_percept = Percept::C1;
  r.final_percept = Percept::C1;
  return r;
}

// Post-collapse percepts appear one perception latency after the collapse
// instant, matching the definite path.
inline PerceptionReport perceive_superposition(const ObserverParams& o,
                                               const PerceptionScenario& sc,
                                               const std::optional<CollapseEvent>& ev,
                                               Stream& rng) {
  using Tag = PerceptionScenario::Tag;
  if (!ev) {
    throw MisuseError("perceive_superposition: no collapse event (definite input)");
  }
  const Percept after = percept_for(ev->outcome);
  PerceptionReport r;
  if (sc.tag() == Tag::PostCollapseOnly) {
    r.first_percept_time = detail::jittered(ev->time + o.t_p, o, rng);
    r.first_percept = after;
    r.final_percept = after;
    return r;
  }

  Percept before = Percept::Distinct;
  switch (sc.tag()) {
    case Tag::DistinctPercept: before = Percept::Distinct; break;
    case Tag::FixedC1: before = Percept::C1; break;
    case Tag::FixedC2: before = Percept::C2; break;
    case Tag::RandomPercept: before = rng.uniform() < *sc.r() ? Percept::C1 : Percept::C2; break;
    case Tag::PostCollapseOnly: break;
  }
  r.first_percept_time = detail::jittered(o.t_p, o, rng);
  r.first_percept = before;
  r.final_percept = after;
  r.change_detected = before != after;
  if (r.change_detected) r.change_time = detail::jittered(ev->time + o.t_p, o, rng);
  return r;
}

// Closed-form P(change_detected) for a superposition with branch-1 weight p1.
inline double awareness_probability(const PerceptionScenario& sc, double p1) {
  using Tag = PerceptionScenario::Tag;
  if (!(p1 >= 0.0 && p1 <= 1.0)) throw DomainError("awareness_probability: p1 outside [0, 1]");
  switch (sc.tag()) {
    case Tag::PostCollapseOnly: return 0.0;
    case Tag::DistinctPercept: return 1.0;
    case Tag::FixedC1: return 1.0 - p1;
    case Tag::FixedC2: return p1;
    case Tag::RandomPercept: {
      const double r = *sc.r();
      return r * (1.0 - p1) + (1.0 - r) * p1;
    }
  }
  return 0.0;
}

// True iff t_c - t_p exceeds margin * max(resolution, jitter_sigma).
inline bool qsc_condition_satisfied(const ObserverParams& o, const CollapseParams& c,
                                    double margin) {
  if (!(margin >= 1.0)) throw DomainError("qsc_condition_satisfied: margin must be >= 1");
  const double delta_t = c.t_c_mean - o.t_p;
  return delta_t > margin * std::max(o.resolution, o.jitter_sigma);
}

}  // namespace qsc

#endif  // QSC_OBSERVER_HPP
