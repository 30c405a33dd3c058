#pragma once

// Shared primitives: error taxonomy, axis-aligned boxes, compensated
// summation, exponent arithmetic with infinities, and a small worker pool.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace embedkit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Construction-time or input validation failure (bad parameters, bad JSON).
struct InvalidSpec : Error {
  using Error::Error;
};

// Weight evaluated exactly on its singular set with a negative exponent.
struct SingularPoint : Error {
  using Error::Error;
};

// Adaptive quadrature could not reach the requested tolerance in budget.
// `divergent` is set when the refinement diagnosed a non-integrable blow-up
// rather than slow convergence.
struct QuadratureFailure : Error {
  bool divergent = false;
  double value = kNaN;
  double error = kNaN;
  QuadratureFailure(const std::string& msg, bool div, double v, double e)
      : Error(msg), divergent(div), value(v), error(e) {}
};

// The dual weight w^{-1/(p-1)} is not locally integrable.
struct NonIntegrableDual : Error {
  using Error::Error;
};

struct WindowTooLarge : Error {
  using Error::Error;
};

struct DegenerateAbscissa : Error {
  using Error::Error;
};

struct ResolutionTooLow : Error {
  using Error::Error;
};

struct AtomOutsideDomain : Error {
  using Error::Error;
};

struct UnsupportedQuery : Error {
  using Error::Error;
};

struct DivisionByZero : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

// 1/p with the convention 1/inf = 0 (exponent arithmetic allows p = inf).
inline double reciprocal(double p) {
  if (std::isinf(p)) return 0.0;
  return 1.0 / p;
}

inline bool nearly_equal(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Neumaier-compensated accumulator: deterministic reductions over large
// term sets must not depend on summation order noise.
class NeumaierSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

template <typename T>
std::string join(const std::vector<T>& v, const char* sep = ",") {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << sep;
    os << v[i];
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Axis-aligned box
// ---------------------------------------------------------------------------

struct Box {
  std::vector<double> lo, hi;

  Box() = default;
  Box(std::vector<double> l, std::vector<double> h) : lo(std::move(l)), hi(std::move(h)) {
    if (lo.size() != hi.size() || lo.empty())
      throw InvalidSpec("Box: lo/hi must be non-empty and of equal dimension");
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw InvalidSpec("Box: lo[i] <= hi[i] required");
  }

  int dim() const { return static_cast<int>(lo.size()); }
  double side(int i) const { return hi[i] - lo[i]; }
  double center(int i) const { return 0.5 * (lo[i] + hi[i]); }
  std::vector<double> center() const {
    std::vector<double> c(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) c[i] = center(static_cast<int>(i));
    return c;
  }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= side(i);
    return v;
  }
  double max_side() const {
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) s = std::max(s, side(i));
    return s;
  }
  bool contains(std::span<const double> x, double pad = 0.0) const {
    for (int i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - pad || x[i] > hi[i] + pad) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

// Worker count: EMBEDKIT_THREADS caps it; 0 or unset means hardware default.
inline int worker_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("EMBEDKIT_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<int>(std::min<long>(v, hw));
  }
  return static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Results must be written to pre-sized slots so
// the outcome is independent of scheduling. Exceptions are rethrown once.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
  if (threads <= 0) threads = worker_count();
  threads = static_cast<int>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load(std::memory_order_relaxed)) return;
      try {
        fn(i);
      } catch (...) {
        std::scoped_lock lk(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace embedkit
