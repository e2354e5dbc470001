#pragma once

// Small numeric utilities shared across the toolkit: mathematical
// constants, log-space factorials, Gauss-Legendre rules, stable summation,
// locale-independent float formatting, and a tiny least-squares fit.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qhplasma/errors.hpp"

namespace qhp {

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double euler_gamma = 0.577215664901532860606512090082402431;

// log(n!) without overflow for any nonnegative n.
inline double log_factorial(long long n) {
  if (n < 0) throw domain_error("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature on [-1, 1], nodes by Newton iteration on the
// Legendre recurrence.  Deterministic and accurate to ~1e-15 for n <= 64.
// ---------------------------------------------------------------------------
struct QuadratureRule {
  std::vector<double> nodes;    // in (-1, 1)
  std::vector<double> weights;  // positive, sum to 2
};

inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw domain_error("gauss_legendre: order must be positive");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.weights[i] = w;
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

// Integrate f over [a, b] with an n-point Gauss-Legendre rule.
template <class F>
double integrate_gl(F&& f, double a, double b, const QuadratureRule& rule) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

// Kahan-compensated accumulator for long sums.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

// Least-squares slope and intercept of y against x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw domain_error("fit_line: need at least two matched points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw domain_error("fit_line: degenerate abscissae");
  LineFit f;
  f.slope = (n * sxy - sx * sy) / denom;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

// Shortest round-trip decimal representation, locale independent.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

// FNV-1a 64-bit hash, used for run-manifest config fingerprints.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Smallest power of two >= x, clamped to [lo, hi].
inline std::size_t next_pow2_clamped(double x, std::size_t lo, std::size_t hi) {
  std::size_t n = lo;
  while (n < hi && static_cast<double>(n) < x) n <<= 1;
  return std::min(n, hi);
}

}  // namespace qhp
