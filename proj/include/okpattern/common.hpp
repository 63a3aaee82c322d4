#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace okpattern {

// Invalid input or configuration. The CLI maps this to exit code 2.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed field file.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solver breakdown (eigen-solve failure, stalled flow where it is fatal).
// The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double pi = std::numbers::pi;

// Modica-Mortola surface tension for W(s) = (s^2-1)^2 with gradient weight eps:
// 2 * int_{-1}^{1} (1 - s^2) ds.
inline constexpr double sigma_mm = 8.0 / 3.0;

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

inline int thread_count() { return detail::thread_setting().load(); }
inline void set_thread_count(int n) { detail::thread_setting().store(std::max(1, n)); }

// Static block partition; every index is handled by exactly one worker and the
// result of f(i) must not depend on which worker runs it.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (nt <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      const std::size_t lo = n * t / nt, hi = n * (t + 1) / nt;
      for (std::size_t i = lo; i < hi; ++i) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

// Wrap into [-1/2, 1/2).
inline double periodic_offset(double d) { return d - std::floor(d + 0.5); }

inline double frac(double x) { return x - std::floor(x); }

}  // namespace okpattern
