#ifndef QSC_STATS_HPP
#define QSC_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace qsc::stats {

inline constexpr double kZ95 = 1.959963984540054;

// Binomial proportion with its Wilson score interval.
struct Proportion {
  std::size_t successes = 0;
  std::size_t trials = 0;
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double lo = 0.0;
  double hi = 1.0;
};

inline Proportion wilson(std::size_t successes, std::size_t trials, double z = kZ95) {
  Proportion p;
  p.successes = successes;
  p.trials = trials;
  if (trials == 0) return p;
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  p.estimate = phat;
  p.lo = successes == 0 ? 0.0 : std::max(0.0, center - half);
  p.hi = successes == trials ? 1.0 : std::min(1.0, center + half);
  return p;
}

// Standard deviation of a binomial frequency.
inline double binomial_sigma(double p, std::size_t n) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

// Pearson chi-square p-value for two-category counts against probability p.
inline double chi_square_two_cell_p_value(std::size_t count_first, std::size_t n, double p) {
  const double expected1 = p * static_cast<double>(n);
  const double expected2 = (1.0 - p) * static_cast<double>(n);
  const double observed1 = static_cast<double>(count_first);
  const double observed2 = static_cast<double>(n - count_first);
  const double chi2 = (observed1 - expected1) * (observed1 - expected1) / expected1 +
                      (observed2 - expected2) * (observed2 - expected2) / expected2;
  // One degree of freedom: P(X > chi2) = erfc(sqrt(chi2 / 2)).
  return std::erfc(std::sqrt(chi2 / 2.0));
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};

template <typename Range>
Moments moments(const Range& xs) {
  // Welford
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double x : xs) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  return {mean, n > 1 ? m2 / static_cast<double>(n - 1) : 0.0};
}

}  // namespace qsc::stats

#endif  // QSC_STATS_HPP
