#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <stdexcept>
#include <string>
#include <vector>

namespace twh {

// Error taxonomy. Configuration problems are kept separate from numerical
// failures so the CLI can map them onto distinct exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PipelineOrderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergenceError : NumericError {
  using NumericError::NumericError;
};
struct SingularJacobianError : NumericError {
  using NumericError::NumericError;
};
struct NonHyperbolicError : NumericError {
  using NumericError::NumericError;
};
struct CertificationError : NumericError {
  using NumericError::NumericError;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
}

// Evaluate sum c_k u^k by Horner's rule.
inline double poly_eval(const std::vector<double>& c, double u) {
  double r = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * u + *it;
  return r;
}

inline std::vector<double> poly_derivative(const std::vector<double>& c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(double(k) * c[k]);
  return d;
}

// Antiderivative with P(0) = 0.
inline std::vector<double> poly_antiderivative(const std::vector<double>& c) {
  std::vector<double> p(c.size() + 1, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) p[k + 1] = c[k] / double(k + 1);
  return p;
}

// Adaptive Simpson quadrature on [a,b].
namespace detail {
inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}
inline double adapt(const std::function<double(double)>& f, double a, double b, double fa,
                    double fm, double fb, double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(f, a, m, fa, flm, fm);
  double right = simpson(f, m, b, fm, frm, fb);
  if (depth <= 0) return left + right;
  if (std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                 double tol = 1e-10) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = detail::simpson(f, a, b, fa, fm, fb);
  return detail::adapt(f, a, b, fa, fm, fb, whole, tol, 40);
}

// C-infinity switch: 0 for s <= 0, 1 for s >= 1, smooth in between.
inline double smooth_step(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double q0 = std::exp(-1.0 / s);
  double q1 = std::exp(-1.0 / (1.0 - s));
  return q0 / (q0 + q1);
}

inline double smooth_step_derivative(double s) {
  if (s <= 0.0 || s >= 1.0) return 0.0;
  double q0 = std::exp(-1.0 / s);
  double q1 = std::exp(-1.0 / (1.0 - s));
  double d0 = q0 / (s * s);
  double d1 = -q1 / ((1.0 - s) * (1.0 - s));
  double den = q0 + q1;
  return (d0 * den - q0 * (d0 + d1)) / (den * den);
}

// FNV-1a, used for config and file content hashes in run manifests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 14695981039346656037ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fnv1a_hex(const std::string& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
  return std::string(buf);
}

// Ordered parallel map: results are collected by task index, so the output is
// independent of scheduling.
template <typename T>
std::vector<T> parallel_map(std::size_t count, unsigned threads,
                            const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(count);
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<void>> futs;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      out[i] = fn(i);
    }
  };
  unsigned n = std::min<unsigned>(threads, static_cast<unsigned>(count));
  futs.reserve(n);
  for (unsigned t = 0; t < n; ++t) futs.push_back(std::async(std::launch::async, worker));
  for (auto& f : futs) f.get();
  return out;
}

}  // namespace twh
