// Independent reference computations used only by the tests.
#ifndef CTC_TESTS_ORACLES_HPP
#define CTC_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using cd = std::complex<double>;

template <class T, class F>
T simpson_step(F& f, double a, double b, T fa, T fm, T fb, T whole, double tol, int depth) {
  const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const T flm = f(lm), frm = f(rm);
  const T left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const T right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const T diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return simpson_step<T>(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step<T>(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson over [a, b], split into `pieces` panels first.
template <class T, class F>
T integrate(F f, double a, double b, double tol = 1e-13, int pieces = 64) {
  T total{};
  const double h = (b - a) / pieces;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * h, hi = lo + h, m = 0.5 * (lo + hi);
    const T fa = f(lo), fm = f(m), fb = f(hi);
    const T whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson_step<T>(f, lo, hi, fa, fm, fb, whole, tol / pieces, 40);
  }
  return total;
}

// int_0^inf g(y) C e^{-lambda y} y^{-1-Y} dy with g(y) = O(y^2) at 0, after y = t^10
// (smooth at t = 0 for Y < 2).
inline cd levy_half_line(const std::function<cd(double)>& g, double C, double lambda, double Y) {
  constexpr double p = 10.0;
  const double tmax = std::pow(60.0 / lambda, 1.0 / p);
  auto f = [&](double t) -> cd {
    if (t <= 0) return 0.0;
    const double y = std::pow(t, p);
    return g(y) * C * std::exp(-lambda * y) * std::pow(y, -1.0 - Y) * p * std::pow(t, p - 1);
  };
  return integrate<cd>(f, 0.0, tmax, 1e-13, 256);
}

// e^{iz} - 1 - iz without cancellation for small |z|.
inline cd expm1_comp(cd z) {
  const cd i(0, 1);
  if (std::abs(z) > 1e-2) return std::exp(i * z) - 1.0 - i * z;
  const cd iz = i * z;
  cd term = iz * iz / 2.0, sum = term;
  for (int k = 3; k < 12; ++k) {
    term *= iz / double(k);
    sum += term;
  }
  return sum;
}

// Compensated CGMY exponent by direct integration of the Levy measure.
inline cd cgmy_quadrature(double C, double G, double M, double Y, cd m) {
  auto pos = [&](double y) { return expm1_comp(m * y); };
  auto neg = [&](double y) { return expm1_comp(-m * y); };
  return levy_half_line(pos, C, M, Y) + levy_half_line(neg, C, G, Y);
}

// log E[exp(i m J - i x J^u)] where J^u jumps by -dJ on the negative jumps of J.
inline cd cojump_quadrature(double C, double G, double M, double Y, cd m, cd x) {
  auto pos = [&](double y) { return expm1_comp(m * y); };
  // A negative jump -y contributes i m (-y) - i x (y) = -i (m + x) y.
  auto neg = [&](double y) { return expm1_comp(-(m + x) * y); };
  return levy_half_line(pos, C, M, Y) + levy_half_line(neg, C, G, Y);
}

// Textbook Heston chf of ln(S_t / F_t) with variance v: E[exp(i m X_t)].
inline cd heston_chf(double kappa, double theta, double sigma, double rho, double v0, double t, cd m) {
  const cd i(0, 1);
  const cd beta = kappa - rho * sigma * i * m;
  const cd d = std::sqrt(beta * beta + sigma * sigma * (i * m + m * m));
  const cd g = (beta - d) / (beta + d);
  const cd e = std::exp(-d * t);
  const cd D = (beta - d) / (sigma * sigma) * (1.0 - e) / (1.0 - g * e);
  const cd C = kappa * theta / (sigma * sigma) * ((beta - d) * t - 2.0 * std::log((1.0 - g * e) / (1.0 - g)));
  return std::exp(C + D * v0);
}

// CIR bond-price formula: E[exp(-l int_0^t x ds)].
inline double cir_bond(double kappa, double theta, double sigma, double x0, double t, double l) {
  const double h = std::sqrt(kappa * kappa + 2 * sigma * sigma * l);
  const double den = 2 * h + (kappa + h) * (std::exp(h * t) - 1);
  const double A = std::pow(2 * h * std::exp(0.5 * (kappa + h) * t) / den, 2 * kappa * theta / (sigma * sigma));
  const double B = 2 * (std::exp(h * t) - 1) / den;
  return A * std::exp(-B * l * x0);
}

// Non-central chi-square density as a Poisson mixture of central ones.
inline double ncx2_pdf(double x, double df, double lambda) {
  if (x <= 0) return 0.0;
  double total = 0;
  for (int j = 0; j < 2000; ++j) {
    const double k = 0.5 * df + j;
    const double lw = -0.5 * lambda + j * std::log(0.5 * lambda) - std::lgamma(j + 1.0);
    const double term = std::exp(lw + (k - 1) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k));
    total += term;
    if (j > 0.5 * lambda + 10 && term < 1e-18 * total) break;
  }
  return total;
}

// E[(sqrt(a u_T + b) - K)^+] for a CIR u by quadrature over the exact transition density.
inline double cir_sqrt_call(double kappa, double theta, double sigma, double u0, double T, double a, double b, double K) {
  const double e = std::exp(-kappa * T);
  const double c = sigma * sigma * (1 - e) / (4 * kappa);
  const double df = 4 * kappa * theta / (sigma * sigma), lambda = u0 * e / c;
  const double lo = std::max(0.0, (K * K - b) / (a * c));
  const double mean = df + lambda, sd = std::sqrt(2 * (df + 2 * lambda));
  const double hi = lo + mean + 60 * sd;
  auto f = [&](double x) { return std::max(std::sqrt(a * c * x + b) - K, 0.0) * ncx2_pdf(x, df, lambda); };
  return integrate<double>(f, lo, hi, 1e-12, 512);
}

// Fine Euler path of a CIR process; returns (x_T, int_0^T x dt) with trapezoid integration.
template <class Rng>
std::pair<double, double> euler_cir(double kappa, double theta, double sigma, double x0, double T, int steps, Rng& rng) {
  std::normal_distribution<double> nd;
  const double dt = T / steps;
  double x = x0, integral = 0;
  for (int i = 0; i < steps; ++i) {
    const double xp = std::max(x, 0.0);
    const double xn = x + kappa * (theta - xp) * dt + sigma * std::sqrt(xp * dt) * nd(rng);
    integral += 0.5 * (xp + std::max(xn, 0.0)) * dt;
    x = xn;
  }
  return {std::max(x, 0.0), integral};
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

// 1% critical value of the two-sample KS statistic.
inline double ks_critical_1pct(std::size_t n, std::size_t m) {
  return 1.628 * std::sqrt(double(n + m) / (double(n) * double(m)));
}

inline double mean(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / x.size();
}

inline double variance(const std::vector<double>& x) {
  const double mu = mean(x);
  double s = 0;
  for (double v : x) s += (v - mu) * (v - mu);
  return s / (x.size() - 1);
}

}  // namespace oracle

#endif
