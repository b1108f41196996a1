// Acceptance suite: every criterion at its stated sample size and
// tolerance, one PASS/FAIL line each. Exit status is nonzero if any fails.

#include <chrono>
#include <iostream>

#include "qsc/selftest.hpp"

int main() {
  using namespace qsc::selftest;
  bool ok = true;
  Options full;
  full.scale = 1.0;
  for (const auto& r : run_all(full, [](const CriterionResult& r) {
         std::cout << format_line(r) << std::endl;
       })) {
    ok = ok && r.passed;
  }

  // Criterion 8: the reduced-size selftest passes in under a minute.
  Options reduced;
  reduced.scale = 0.1;
  const auto start = std::chrono::steady_clock::now();
  bool selftest_ok = true;
  for (const auto& r : run_all(reduced)) selftest_ok = selftest_ok && r.passed;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool c8 = selftest_ok && secs < 60.0;
  std::cout << (c8 ? "[PASS] " : "[FAIL] ") << "criterion 8 (Selftest, " << secs
            << " s): reduced-size criteria 1-7 " << (selftest_ok ? "pass" : "FAIL") << " in < 60 s"
            << std::endl;
  ok = ok && c8;
  return ok ? 0 : 1;
}
