#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>

namespace polyquant::detail {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
inline Vec<N> axpy(const Vec<N>& a, double s, const Vec<N>& b) {
  Vec<N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + s * b[i];
  return r;
}

struct RombergOptions {
  double abs_tol = 1e-10;  // per unit length of the panel
  double rel_tol = 1e-13;
  int min_levels = 3;
  int max_levels = 22;
};

/// Romberg integration (trapezoid + Richardson) of a vector-valued integrand over [a, b].
/// Convergence is declared when every component of two successive diagonal entries
/// agrees to max(abs_tol * (b - a), rel_tol * |value|).
template <std::size_t N, class F>
Vec<N> romberg(F&& f, double a, double b, const RombergOptions& opt) {
  Vec<N> zero{};
  if (!(b > a)) return zero;
  constexpr int kMax = 30;
  const int levels = std::min(opt.max_levels, kMax);
  std::array<Vec<N>, kMax> prev{};
  std::array<Vec<N>, kMax> cur{};

  const double h0 = b - a;
  {
    const Vec<N> fa = f(a);
    const Vec<N> fb = f(b);
    for (std::size_t i = 0; i < N; ++i) prev[0][i] = 0.5 * h0 * (fa[i] + fb[i]);
  }
  double h = h0;
  long long intervals = 1;
  for (int k = 1; k < levels; ++k) {
    h *= 0.5;
    Vec<N> mid{};
    for (long long j = 0; j < intervals; ++j) {
      const Vec<N> v = f(a + (2 * j + 1) * h);
      for (std::size_t i = 0; i < N; ++i) mid[i] += v[i];
    }
    intervals *= 2;
    for (std::size_t i = 0; i < N; ++i) cur[0][i] = 0.5 * prev[0][i] + h * mid[i];
    double factor = 1.0;
    for (int m = 1; m <= k; ++m) {
      factor *= 4.0;
      for (std::size_t i = 0; i < N; ++i) {
        cur[m][i] = cur[m - 1][i] + (cur[m - 1][i] - prev[m - 1][i]) / (factor - 1.0);
      }
    }
    if (k >= opt.min_levels) {
      bool done = true;
      for (std::size_t i = 0; i < N; ++i) {
        const double diff = std::abs(cur[k][i] - prev[k - 1][i]);
        const double tol = std::max(opt.abs_tol * h0, opt.rel_tol * std::abs(cur[k][i]));
        if (!(diff <= tol)) {
          done = false;
          break;
        }
      }
      if (done) return cur[k];
    }
    std::swap(prev, cur);
  }
  return prev[levels - 1];
}

/// Relative tolerance used when comparing an atom location with a query energy.
inline double location_tolerance(double x) { return 1e-12 * std::max(1.0, std::abs(x)); }

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

}  // namespace polyquant::detail
