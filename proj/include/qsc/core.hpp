#ifndef QSC_CORE_HPP
#define QSC_CORE_HPP

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <string_view>

#include "qsc/errors.hpp"

namespace qsc {

// Which of the two candidate inputs was prepared (or guessed).
enum class InputKind { Definite, Superposition };

// Collapse outcome: B1 pairs with y1/c1, B2 with y2/c2.
enum class Branch { B1, B2 };

inline std::string_view to_string(InputKind k) {
  return k == InputKind::Definite ? "definite" : "superposition";
}

inline std::string_view to_string(Branch b) { return b == Branch::B1 ? "B1" : "B2"; }

// Weights below this count as zero when classifying a state as definite.
inline constexpr double kDefiniteTolerance = 1e-12;
inline constexpr double kNormTolerance = 1e-12;

// A normalized two-level state a1|y1> + a2|y2>. Immutable after construction.
class InputState {
 public:
  using amplitude = std::complex<double>;

  InputState(amplitude a1, amplitude a2) : a1_(a1), a2_(a2) {
    const double norm = std::norm(a1) + std::norm(a2);
    if (!(std::abs(norm - 1.0) <= kNormTolerance)) {
      throw DomainError("InputState: |a1|^2 + |a2|^2 = " + std::to_string(norm) +
                        ", expected 1");
    }
    // One ulp of 1.0 of slack so that weights computed as 1 - p1 land on the
    // intended side of the tolerance.
    kind_ = std::norm(a2) < kDefiniteTolerance + std::numeric_limits<double>::epsilon()
                ? InputKind::Definite
                : InputKind::Superposition;
  }

  amplitude a1() const { return a1_; }
  amplitude a2() const { return a2_; }
  InputKind kind() const { return kind_; }
  bool is_definite() const { return kind_ == InputKind::Definite; }

 private:
  amplitude a1_;
  amplitude a2_;
  InputKind kind_;
};

// Builds the state with |a1|^2 = p1 and real nonnegative amplitudes. The
// Superposition tag with p1 = 0.5 is the normalized y1 + y2.
inline InputState make_input_state(InputKind kind, double p1) {
  if (!(p1 >= 0.0 && p1 <= 1.0)) {
    throw DomainError("make_input_state: p1 = " + std::to_string(p1) + " outside [0, 1]");
  }
  const double p2 = 1.0 - p1;
  if (kind == InputKind::Definite &&
      !(p2 < kDefiniteTolerance + std::numeric_limits<double>::epsilon())) {
    throw InconsistencyError("make_input_state: Definite input requires p1 = 1, got " +
                             std::to_string(p1));
  }
  return InputState(std::sqrt(p1), std::sqrt(p2));
}

// Probability of collapsing onto B1.
inline double born_probability(const InputState& s) { return std::norm(s.a1()); }

// |<a|b>|^2.
inline double state_fidelity(const InputState& a, const InputState& b) {
  const auto overlap = std::conj(a.a1()) * b.a1() + std::conj(a.a2()) * b.a2();
  const double f = std::norm(overlap);
  return f > 1.0 ? 1.0 : f;
}

}  // namespace qsc

#endif  // QSC_CORE_HPP
