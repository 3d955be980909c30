#ifndef CTC_MATH_HPP
#define CTC_MATH_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "ctc/errors.hpp"

namespace ctc {

using Complex = std::complex<double>;
inline constexpr Complex kI{0.0, 1.0};

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [lo, hi].
inline QuadratureRule gauss_legendre(std::size_t n, double lo = -1.0, double hi = 1.0) {
  if (n == 0) throw ValidationError("gauss_legendre: need at least one node");
  QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / static_cast<double>(k);
      }
      dp = static_cast<double>(n) * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = rule.weights[n - 1 - i] = half * w;
  }
  return rule;
}

// Cubic Hermite interpolation on [0, h] from values and derivatives at both ends.
template <class T>
inline T hermite(double s, double h, const T& f0, const T& d0, const T& f1, const T& d1) {
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * f0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * f1 + (s3 - s2) * h * d1;
}

// (e^{xt} - 1) / (xt), equal to 1 at x = 0.
inline double m_func(double x, double t) {
  const double y = x * t;
  if (std::abs(y) < 1e-12) return 1.0 + 0.5 * y;
  return std::expm1(y) / y;
}

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

// Complex complementary error function.
inline Complex erfc(Complex z) {
  if (z.real() < 0.0) return 2.0 - erfc(-z);
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  if (z.real() < 1.5 && std::abs(z) < 20.0) {
    // Maclaurin series of erf; cancellation is mild while Re z is small.
    const Complex mz2 = -z * z;
    Complex term = z, sum = z;
    for (int n = 1; n < 2000; ++n) {
      term *= mz2 / static_cast<double>(n);
      const Complex add = term / static_cast<double>(2 * n + 1);
      sum += add;
      if (std::abs(add) < 1e-17 * std::abs(sum)) break;
    }
    return 1.0 - 2.0 * inv_sqrt_pi * sum;
  }
  // Laplace continued fraction, modified Lentz.
  const double tiny = 1e-300;
  Complex f = z, c = z, d = 0.0;
  for (int n = 1; n < 5000; ++n) {
    const double a = 0.5 * n;
    d = z + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = z + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const Complex delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-z * z) * inv_sqrt_pi / f;
}

// Solves a tridiagonal system in place (Thomas algorithm); rhs becomes the solution.
inline void solve_tridiagonal(std::vector<double> lower, std::vector<double> diag, std::vector<double> upper,
                              std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

}  // namespace ctc

#endif
