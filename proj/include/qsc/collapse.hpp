#ifndef QSC_COLLAPSE_HPP
#define QSC_COLLAPSE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsc/core.hpp"
#include "qsc/errors.hpp"
#include "qsc/random.hpp"

namespace qsc {

enum class CollapseModel { JumpExponential, Diffusion, DeterministicTime };

inline std::string_view to_string(CollapseModel m) {
  switch (m) {
    case CollapseModel::JumpExponential: return "jump_exponential";
    case CollapseModel::Diffusion: return "diffusion";
    case CollapseModel::DeterministicTime: return "deterministic_time";
  }
  return "?";
}

// Parameter-level validation failure. field() is relative to the owning
// parameter block ("t_c_mean", "epsilon", ...).
class FieldError : public DomainError {
 public:
  FieldError(std::string field, const std::string& message)
      : DomainError(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline constexpr double kDefaultEpsilon = 1e-3;
inline constexpr double kDefaultKappa = 1.0;
inline constexpr double kDefaultStepsPerMean = 1e4;
inline constexpr std::size_t kDiffusionStepLimit = 1'000'000;

struct CollapseParams {
  CollapseModel model = CollapseModel::JumpExponential;
  double t_c_mean = 180.0;  // seconds
  // Diffusion strength in 1/sqrt(s). Required only by the diffusion model.
  std::optional<double> gamma;
  double epsilon = kDefaultEpsilon;
  // Euler-Maruyama step; defaults to t_c_mean / 1e4 when unset.
  std::optional<double> dt;
  // When set, t_c_mean must equal kappa / energy.
  std::optional<double> energy;
  double kappa = kDefaultKappa;

  double step() const { return dt ? *dt : t_c_mean / kDefaultStepsPerMean; }

  void validate() const {
    if (!(t_c_mean > 0.0) || !std::isfinite(t_c_mean)) {
      throw FieldError("t_c_mean", "must be > 0, got " + std::to_string(t_c_mean));
    }
    if (!(epsilon > 0.0 && epsilon < 0.5)) {
      throw FieldError("epsilon", "must lie in (0, 0.5), got " + std::to_string(epsilon));
    }
    if (dt) {
      if (!(*dt > 0.0)) throw FieldError("dt", "must be > 0");
      if (*dt > t_c_mean / 100.0) {
        throw FieldError("dt", "must be <= t_c_mean / 100 (" +
                                   std::to_string(t_c_mean / 100.0) + "), got " +
                                   std::to_string(*dt));
      }
    }
    if (gamma && !(*gamma > 0.0 && std::isfinite(*gamma))) {
      throw FieldError("gamma", "must be > 0");
    }
    if (!(kappa > 0.0)) throw FieldError("kappa", "must be > 0");
    if (energy) {
      if (!(*energy > 0.0)) throw FieldError("energy", "must be > 0");
      const double implied = kappa / *energy;
      if (std::abs(implied - t_c_mean) > 1e-9 * implied) {
        throw FieldError("t_c_mean", "inconsistent with kappa / energy = " +
                                         std::to_string(implied));
      }
    }
  }

  // Collapse time fixed by the perception energy: t_c = kappa / energy.
  static CollapseParams from_energy(CollapseModel model, double energy,
                                    double kappa = kDefaultKappa) {
    if (!(energy > 0.0)) throw FieldError("energy", "must be > 0");
    CollapseParams p;
    p.model = model;
    p.energy = energy;
    p.kappa = kappa;
    p.t_c_mean = kappa / energy;
    p.validate();
    return p;
  }
};

struct TrajectoryPoint {
  double time;
  double weight;  // branch-1 weight w(t)
};

struct CollapseEvent {
  double time = 0.0;
  Branch outcome = Branch::B1;
  std::optional<std::vector<TrajectoryPoint>> trajectory;
};

inline double sample_collapse_time(const CollapseParams& p, Stream& rng) {
  switch (p.model) {
    case CollapseModel::DeterministicTime: return p.t_c_mean;
    case CollapseModel::JumpExponential: return rng.exponential(p.t_c_mean);
    case CollapseModel::Diffusion:
      throw MisuseError(
          "sample_collapse_time: diffusion collapse times come from "
          "simulate_diffusion_collapse");
  }
  return p.t_c_mean;
}

inline Branch sample_outcome(double p1, Stream& rng) {
  if (!(p1 >= 0.0 && p1 <= 1.0)) {
    throw DomainError("sample_outcome: p1 = " + std::to_string(p1) + " outside [0, 1]");
  }
  return rng.uniform() < p1 ? Branch::B1 : Branch::B2;
}

// Euler-Maruyama on the branch weight, dw = gamma w (1 - w) dW, until w enters
// [0, epsilon] or [1 - epsilon, 1]. w is a martingale, so P(B1) = p1.
inline CollapseEvent simulate_diffusion_collapse(double p1, const CollapseParams& p, Stream& rng,
                                                 bool record_trajectory,
                                                 std::size_t step_limit = kDiffusionStepLimit) {
  if (p.model != CollapseModel::Diffusion) {
    throw MisuseError("simulate_diffusion_collapse: model is " + std::string(to_string(p.model)));
  }
  if (!p.gamma) {
    throw MisuseError("simulate_diffusion_collapse: gamma unset (calibrate first)");
  }
  if (!(p1 > 0.0 && p1 < 1.0)) {
    throw MisuseError("simulate_diffusion_collapse: p1 = " + std::to_string(p1) +
                      " has no superposition to collapse");
  }
  const double dt = p.step();
  const double kick = *p.gamma * std::sqrt(dt);
  const double lo = p.epsilon;
  const double hi = 1.0 - p.epsilon;

  CollapseEvent ev;
  if (record_trajectory) ev.trajectory.emplace();
  double w = p1;
  std::size_t steps = 0;
  if (ev.trajectory) ev.trajectory->push_back({0.0, w});
  while (w > lo && w < hi) {
    if (steps == step_limit) {
      throw TimeoutError("simulate_diffusion_collapse: no absorption after " +
                         std::to_string(step_limit) + " steps (t = " +
                         std::to_string(static_cast<double>(steps) * dt) +
                         ", w = " + std::to_string(w) + ", gamma = " +
                         std::to_string(*p.gamma) + ", dt = " + std::to_string(dt) + ")");
    }
    w += kick * w * (1.0 - w) * rng.normal();
    w = std::clamp(w, 0.0, 1.0);
    ++steps;
    if (ev.trajectory) ev.trajectory->push_back({static_cast<double>(steps) * dt, w});
  }
  ev.time = static_cast<double>(steps) * dt;
  ev.outcome = w >= hi ? Branch::B1 : Branch::B2;
  return ev;
}

// Continuum-limit mean absorption time of the weight diffusion started at
// p1 with band width epsilon: 2 (h(eps) - h(p1)) / gamma^2 where
// h(y) = (2y - 1) ln(y / (1 - y)). Used to seed calibration.
inline double diffusion_mean_time_continuum(double p1, double gamma, double epsilon) {
  const auto h = [](double y) { return (2.0 * y - 1.0) * std::log(y / (1.0 - y)); };
  return 2.0 * (h(epsilon) - h(p1)) / (gamma * gamma);
}

// Returns no event for a definite input: nothing to collapse.
inline std::optional<CollapseEvent> collapse_for_input(const InputState& s,
                                                       const CollapseParams& p, Stream& rng) {
  if (s.is_definite()) return std::nullopt;
  const double p1 = born_probability(s);
  if (p.model == CollapseModel::Diffusion) {
    return simulate_diffusion_collapse(p1, p, rng, false);
  }
  CollapseEvent ev;
  ev.time = sample_collapse_time(p, rng);
  ev.outcome = sample_outcome(p1, rng);
  return ev;
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationOptions {
  std::optional<double> dt;           // default target / 1e4
  std::size_t max_runs = 20'000;      // run budget per evaluation
  std::size_t pilot_runs = 500;
  std::size_t max_evaluations = 64;
  unsigned threads = 1;
};

struct CalibrationResult {
  double gamma = 0.0;
  double achieved_mean = 0.0;  // Monte Carlo mean at gamma
  double achieved_sem = 0.0;   // its standard error
  std::size_t runs = 0;        // runs per evaluation
  int evaluations = 0;
};

struct HittingTimeEstimate {
  bool too_slow = false;  // some run exceeded the per-run time cap
  double mean = 0.0;
  double sem = 0.0;
  double cv = 0.0;  // sample sd / mean
};

// Monte Carlo mean first-passage time. Run i draws from stream
// (seed, i, calibration channel), so evaluations at different gamma share
// random numbers and the estimate is reproducible for any thread count.
inline HittingTimeEstimate estimate_hitting_time(double p1, double gamma, double epsilon,
                                                 double dt, std::size_t runs,
                                                 std::uint64_t seed, std::size_t step_cap,
                                                 unsigned threads,
                                                 std::uint32_t stream_channel =
                                                     channel::kCalibration) {
  CollapseParams p;
  p.model = CollapseModel::Diffusion;
  p.gamma = gamma;
  p.epsilon = epsilon;
  p.dt = dt;
  const auto times = parallel_map(runs, threads, [&](std::size_t i) {
    Stream rng(seed, i, stream_channel);
    try {
      return simulate_diffusion_collapse(p1, p, rng, false, step_cap).time;
    } catch (const TimeoutError&) {
      return -1.0;
    }
  });
  HittingTimeEstimate est;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double t : times) {
    if (t < 0.0) {
      est.too_slow = true;
      return est;
    }
    sum += t;
    sum_sq += t * t;
  }
  const double n = static_cast<double>(runs);
  est.mean = sum / n;
  const double var = runs > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0)) : 0.0;
  est.sem = std::sqrt(var / n);
  est.cv = est.mean > 0.0 ? std::sqrt(var) / est.mean : 0.0;
  return est;
}

// Finds gamma whose Monte Carlo mean first-passage time is within
// `tolerance` (relative) of t_c_target, by bisection on log(gamma) over
// [1e-6, 1e6]; mean hitting time decreases strictly in gamma.
//
// Budget rule: the run count per evaluation is chosen so that the relative
// standard error is at most tolerance / 5, i.e. n = ceil((5 cv / tolerance)^2)
// with cv measured by a pilot. If n exceeds options.max_runs the request is
// rejected with CalibrationError rather than returning an unsupported gamma.
inline CalibrationResult calibrate_gamma(double t_c_target, double p1, double epsilon,
                                         double tolerance, std::uint64_t seed,
                                         const CalibrationOptions& options = {}) {
  if (!(t_c_target > 0.0)) throw DomainError("calibrate_gamma: t_c_target must be > 0");
  if (!(p1 > 0.0 && p1 < 1.0)) throw DomainError("calibrate_gamma: p1 must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw DomainError("calibrate_gamma: epsilon must lie in (0, 0.5)");
  }
  if (!(tolerance > 0.0)) throw DomainError("calibrate_gamma: tolerance must be > 0");
  if (p1 <= epsilon || p1 >= 1.0 - epsilon) {
    throw CalibrationError("calibrate_gamma: p1 starts inside the absorbing band");
  }

  constexpr double kGammaMin = 1e-6;
  constexpr double kGammaMax = 1e6;
  const double dt = options.dt ? *options.dt : t_c_target / kDefaultStepsPerMean;
  if (!(dt > 0.0) || dt > t_c_target / 100.0) {
    throw DomainError("calibrate_gamma: dt must lie in (0, t_c_target / 100]");
  }
  const auto step_cap = static_cast<std::size_t>(
      std::min<double>(kDiffusionStepLimit, std::ceil(50.0 * t_c_target / dt)));

  CalibrationResult result;
  auto evaluate = [&](double gamma, std::size_t runs) {
    ++result.evaluations;
    if (result.evaluations > static_cast<int>(options.max_evaluations)) {
      throw CalibrationError("calibrate_gamma: no convergence after " +
                             std::to_string(options.max_evaluations) + " evaluations");
    }
    return estimate_hitting_time(p1, gamma, epsilon, dt, runs, seed, step_cap, options.threads);
  };

  // Seed from the continuum scaling mean ~ 1/gamma^2, then refine once with
  // a pilot so the bracket starts tight.
  double guess = std::sqrt(diffusion_mean_time_continuum(p1, 1.0, epsilon) / t_c_target);
  guess = std::clamp(guess, kGammaMin, kGammaMax);
  const std::size_t pilot_runs = std::min(options.pilot_runs, options.max_runs);
  auto pilot = evaluate(guess, pilot_runs);
  if (pilot.too_slow || !(pilot.mean > 0.0)) {
    throw CalibrationError("calibrate_gamma: pilot at gamma = " + std::to_string(guess) +
                           " did not produce a usable mean");
  }
  const double required =
      std::ceil(std::pow(5.0 * std::max(pilot.cv, 0.1) / tolerance, 2.0));
  if (required > static_cast<double>(options.max_runs)) {
    throw CalibrationError("calibrate_gamma: tolerance " + std::to_string(tolerance) +
                           " needs about " + std::to_string(static_cast<long long>(required)) +
                           " runs per evaluation, budget is " +
                           std::to_string(options.max_runs));
  }
  const std::size_t runs = std::max<std::size_t>(static_cast<std::size_t>(required), pilot_runs);
  result.runs = runs;
  guess = std::clamp(guess * std::sqrt(pilot.mean / t_c_target), kGammaMin, kGammaMax);

  const double accept = tolerance / 5.0;
  auto done = [&](const HittingTimeEstimate& e, double gamma) {
    if (!e.too_slow && std::abs(e.mean - t_c_target) <= accept * t_c_target) {
      result.gamma = gamma;
      result.achieved_mean = e.mean;
      result.achieved_sem = e.sem;
      return true;
    }
    return false;
  };

  // Bracket: mean(lo) > target > mean(hi).
  double lo = guess / 1.05;
  double hi = guess * 1.05;
  auto at_lo = evaluate(lo, runs);
  if (done(at_lo, lo)) return result;
  while (!at_lo.too_slow && at_lo.mean < t_c_target) {
    hi = lo;
    lo /= 2.0;
    if (lo < kGammaMin) throw CalibrationError("calibrate_gamma: no bracket in [1e-6, 1e6]");
    at_lo = evaluate(lo, runs);
    if (done(at_lo, lo)) return result;
  }
  auto at_hi = evaluate(hi, runs);
  if (done(at_hi, hi)) return result;
  while (at_hi.too_slow || at_hi.mean > t_c_target) {
    lo = hi;
    hi *= 2.0;
    if (hi > kGammaMax) throw CalibrationError("calibrate_gamma: no bracket in [1e-6, 1e6]");
    at_hi = evaluate(hi, runs);
    if (done(at_hi, hi)) return result;
  }

  for (;;) {
    const double mid = std::sqrt(lo * hi);
    const auto at_mid = evaluate(mid, runs);
    if (done(at_mid, mid)) return result;
    if (at_mid.too_slow || at_mid.mean > t_c_target) {
      lo = mid;
    } else {
      hi = mid;
    }
    // Bracket narrower than the statistical resolution: accept the midpoint.
    if (hi / lo < 1.0 + accept / 4.0) {
      const double g = std::sqrt(lo * hi);
      const auto final_est = evaluate(g, runs);
      if (final_est.too_slow ||
          std::abs(final_est.mean - t_c_target) > tolerance * t_c_target) {
        throw CalibrationError("calibrate_gamma: bracket collapsed at gamma = " +
                               std::to_string(g) + " without reaching tolerance");
      }
      result.gamma = g;
      result.achieved_mean = final_est.mean;
      result.achieved_sem = final_est.sem;
      return result;
    }
  }
}

}  // namespace qsc

#endif  // QSC_COLLAPSE_HPP
