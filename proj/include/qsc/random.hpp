#ifndef QSC_RANDOM_HPP
#define QSC_RANDOM_HPP

#include <algorithm>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

namespace qsc {

// Independent random stream for one unit of work. Streams are addressed by
// (master seed, index, channel) and seeded through std::seed_seq, whose
// output is fixed by the standard, so the stream a trial sees does not
// depend on which worker runs it.
class Stream {
 public:
  using engine_type = std::mt19937_64;

  explicit Stream(std::uint64_t master_seed, std::uint64_t index = 0,
                  std::uint32_t channel = 0)
      : engine_(make_engine(master_seed, index, channel)) {}

  engine_type& engine() { return engine_; }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double normal() { return normal_(engine_); }

  double exponential(double mean) {
    return std::exponential_distribution<double>(1.0 / mean)(engine_);
  }

  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }

 private:
  static engine_type make_engine(std::uint64_t seed, std::uint64_t index,
                                 std::uint32_t channel) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32), channel};
    return engine_type(seq);
  }

  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Stream channels, so one trial index can own several independent streams.
namespace channel {
inline constexpr std::uint32_t kTrial = 0;
inline constexpr std::uint32_t kDevice = 1;
inline constexpr std::uint32_t kCalibration = 2;
inline constexpr std::uint32_t kVerification = 3;
}  // namespace channel

// Evaluates fn(i) for i in [0, n) on up to `threads` workers and returns the
// results in index order. fn must be safe to call concurrently.
template <typename Fn>
auto parallel_map(std::size_t n, unsigned threads, Fn&& fn) {
  using Result = decltype(fn(std::size_t{0}));
  std::vector<Result> out(n);
  const unsigned workers =
      static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads, n)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  // Failures are kept per index and the lowest one rethrown, so the error a
  // caller sees does not depend on scheduling.
  std::vector<std::exception_ptr> failures(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          out[i] = fn(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

}  // namespace qsc

#endif  // QSC_RANDOM_HPP
