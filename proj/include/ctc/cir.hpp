#ifndef CTC_CIR_HPP
#define CTC_CIR_HPP

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ctc/errors.hpp"
#include "ctc/rng.hpp"

namespace ctc {

// dx = kappa (theta - x) dt + sigma sqrt(x) dW
struct CirParams {
  double kappa = 0.0, theta = 0.0, sigma = 0.0;
};

inline double cir_mean(const CirParams& p, double x0, double t) {
  return p.theta + (x0 - p.theta) * std::exp(-p.kappa * t);
}

inline double cir_variance(const CirParams& p, double x0, double t) {
  const double e = std::exp(-p.kappa * t);
  const double s2 = p.sigma * p.sigma;
  return x0 * s2 / p.kappa * (e - e * e) + p.theta * s2 / (2 * p.kappa) * (1 - e) * (1 - e);
}

// First and second order coefficients of the integrated process transform:
// E[int_0^t x] = b1 x0 + c1, Var[int_0^t x] = 2 (b2 x0 + c2).
struct IntegratedCirCoefficients {
  double b1, c1, b2, c2;
};

inline IntegratedCirCoefficients integrated_cir_coefficients(const CirParams& p, double t) {
  const double k = p.kappa, s2 = p.sigma * p.sigma, kt = k * p.theta;
  const double e1 = std::exp(-k * t), e2 = std::exp(-2 * k * t);
  IntegratedCirCoefficients r{};
  r.b1 = -std::expm1(-k * t) / k;
  r.c1 = kt * (t - r.b1) / k;
  r.b2 = s2 / (2 * k * k) * ((1 - e2) / k - 2 * t * e1);
  r.c2 = kt * s2 / (2 * k * k) * ((t - (1 - e2) / (2 * k)) / k - 2 * (1 - e1 * (1 + k * t)) / (k * k));
  return r;
}

inline double cir_integrated_mean(const CirParams& p, double x0, double t) {
  const auto c = integrated_cir_coefficients(p, t);
  return c.b1 * x0 + c.c1;
}

inline double cir_integrated_variance(const CirParams& p, double x0, double t) {
  const auto c = integrated_cir_coefficients(p, t);
  return 2 * (c.b2 * x0 + c.c2);
}

// Exact draw of x_t given x_0 (scaled non-central chi-square as a Poisson mixture of Gammas).
template <class Rng>
double sample_cir_terminal(const CirParams& p, double x0, double t, Rng& rng) {
  if (t <= 0) return x0;
  if (p.sigma == 0.0) return cir_mean(p, x0, t);
  const double e = std::exp(-p.kappa * t);
  const double c = p.sigma * p.sigma * (1 - e) / (4 * p.kappa);
  const double df = 4 * p.kappa * p.theta / (p.sigma * p.sigma);
  const double nc = x0 * e / c;
  long long n = 0;
  if (nc > 0) n = std::poisson_distribution<long long>(0.5 * nc)(rng);
  const double shape = 0.5 * df + static_cast<double>(n);
  if (shape <= 0) return 0.0;
  return 2 * c * std::gamma_distribution<double>(shape, 1.0)(rng);
}

// I_{nu+1}(z) / I_nu(z).
inline double bessel_i_ratio(double nu, double z) {
  if (z <= 0) return 0.0;
  if (z > 1e4) return z / (nu + 0.5 + std::sqrt(z * z + (nu + 1.5) * (nu + 1.5)));
  // 1 / (b_1 + 1 / (b_2 + ...)) with b_k = 2 (nu + k) / z, modified Lentz.
  const double tiny = 1e-300;
  double f = 2 * (nu + 1) / z, c = f, d = 0.0;
  if (f == 0.0) f = c = tiny;
  for (int k = 2; k < 200000; ++k) {
    const double b = 2 * (nu + k) / z;
    d = b + d;
    if (std::abs(d) < tiny) d = tiny;
    c = b + 1 / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1) < 1e-15) break;
  }
  return 1 / f;
}

struct BesselMoments {
  double mean, variance;
};

// Moments of the Bessel(nu, z) law P(n) ~ (z/2)^{2n+nu} / (n! Gamma(n+nu+1)).
inline BesselMoments bessel_moments(double nu, double z) {
  if (z <= 0) return {0.0, 0.0};
  const double r0 = bessel_i_ratio(nu, z), r1 = bessel_i_ratio(nu + 1, z);
  const double m = 0.5 * z * r0;
  const double second = 0.25 * z * z * r0 * r1 + m;
  return {m, std::max(0.0, second - m * m)};
}

// Draw from Bessel(nu, z) by inversion over a window around the mode.
template <class Rng>
long long sample_bessel(double nu, double z, Rng& rng) {
  if (z <= 0) return 0;
  const double mode_real = (std::sqrt(z * z + nu * nu) - nu) / 2;
  const long long mode = static_cast<long long>(std::floor(std::max(0.0, mode_real)));
  const double q = 0.25 * z * z;
  thread_local std::vector<double> up, down;
  up.clear();
  down.clear();
  double w = 1.0, total = 1.0;
  for (long long n = mode; ; ++n) {
    w *= q / ((n + 1.0) * (n + nu + 1.0));
    if (w < 1e-17 * total) break;
    up.push_back(w);
    total += w;
  }
  w = 1.0;
  for (long long n = mode; n > 0; --n) {
    w *= n * (n + nu) / q;
    if (w < 1e-17 * total) break;
    down.push_back(w);
    total += w;
  }
  double target = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * total;
  for (std::size_t i = down.size(); i-- > 0;) {
    target -= down[i];
    if (target <= 0) return mode - static_cast<long long>(i) - 1;
  }
  target -= 1.0;
  if (target <= 0) return mode;
  for (std::size_t i = 0; i < up.size(); ++i) {
    target -= up[i];
    if (target <= 0) return mode + static_cast<long long>(i) + 1;
  }
  return mode + static_cast<long long>(up.size());
}

// Draws int_0^T x dt conditional on x_0 and x_T (gamma expansion), truncated after
// `terms` series terms with moment-matched Gamma remainders.
class IntegratedCirSampler {
 public:
  IntegratedCirSampler(const CirParams& p, double T, int terms = 10) : p_(p), T_(T), K_(terms) {
    if (!(T > 0)) throw ValidationError("integrated CIR sampler needs T > 0");
    if (terms < 1) throw ValidationError("gamma expansion needs at least one term");
    if (p.sigma == 0.0) return;
    const double s2 = p.sigma * p.sigma, kT = p.kappa * T, pi2 = std::numbers::pi * std::numbers::pi;
    delta_ = 4 * p.kappa * p.theta / s2;
    nu_ = 0.5 * delta_ - 1;
    z_scale_ = 2 * p.kappa / (s2 * std::sinh(0.5 * kT));
    auto gamma_n = [&](double n) { return (kT * kT + 4 * pi2 * n * n) / (2 * s2 * T * T); };
    auto lambda_n = [&](double n) { return 16 * pi2 * n * n / (s2 * T * (kT * kT + 4 * pi2 * n * n)); };
    for (int n = 1; n <= K_; ++n) {
      gam_.push_back(gamma_n(n));
      lam_.push_back(lambda_n(n));
    }
    // Tail sums over n > K, direct summation followed by an integral tail.
    const int extra = 20000;
    double s1 = 0, s2t = 0, r1 = 0, r2 = 0;
    for (int n = K_ + extra; n > K_; --n) {
      const double g = gamma_n(n), l = lambda_n(n);
      s1 += l / g;
      s2t += l / (g * g);
      r1 += 1 / g;
      r2 += 1 / (g * g);
    }
    const double N = K_ + extra + 0.5;
    s1 += 2 * T / (pi2 * N);
    r1 += 2 * s2 * T * T / (4 * pi2 * N);
    tail_ = {s1, s2t, r1, r2};
    head_ = {0, 0, 0, 0};
    for (int i = 0; i < K_; ++i) {
      head_.s1 += lam_[i] / gam_[i];
      head_.s2 += lam_[i] / (gam_[i] * gam_[i]);
      head_.r1 += 1 / gam_[i];
      head_.r2 += 1 / (gam_[i] * gam_[i]);
    }
  }

  // Exact conditional mean and variance of the integral.
  BesselMoments conditional_moments(double x0, double xT) const {
    if (p_.sigma == 0.0) return {deterministic(x0), 0.0};
    const Sums all{head_.s1 + tail_.s1, head_.s2 + tail_.s2, head_.r1 + tail_.r1, head_.r2 + tail_.r2};
    const auto eta = bessel_moments(nu_, z_scale_ * std::sqrt(x0 * xT));
    const double mean = (x0 + xT) * all.s1 + 0.5 * delta_ * all.r1 + eta.mean * 2 * all.r1;
    const double var =
        2 * (x0 + xT) * all.s2 + 0.5 * delta_ * all.r2 + eta.mean * 2 * all.r2 + eta.variance * 4 * all.r1 * all.r1;
    return {mean, var};
  }

  template <class Rng>
  double sample(double x0, double xT, Rng& rng) const {
    if (p_.sigma == 0.0) return deterministic(x0);
    const double z = z_scale_ * std::sqrt(std::max(0.0, x0 * xT));
    if (!std::isfinite(z) || z > 1e6) return fallback(x0, xT, rng);
    const long long eta = sample_bessel(nu_, z, rng);
    double total = 0.0;
    const double sum_x = x0 + xT;
    for (int i = 0; i < K_; ++i) {
      double shape = 0.5 * delta_ + 2.0 * static_cast<double>(eta);
      if (sum_x > 0) shape += static_cast<double>(std::poisson_distribution<long long>(sum_x * lam_[i])(rng));
      if (shape > 0) total += std::gamma_distribution<double>(shape, 1.0)(rng) / gam_[i];
    }
    // Remainders: X1 tail, X2 tail and eta copies of the Z tail.
    if (sum_x > 0) total += gamma(sum_x * tail_.s1 * tail_.s1 / (2 * tail_.s2), 2 * tail_.s2 / tail_.s1, rng);
    const double r_shape = tail_.r1 * tail_.r1 / tail_.r2, r_scale = tail_.r2 / tail_.r1;
    total += gamma((0.5 * delta_ + 2.0 * static_cast<double>(eta)) * r_shape, r_scale, rng);
    if (!std::isfinite(total)) return fallback(x0, xT, rng);
    return total;
  }

  double horizon() const { return T_; }

 private:
  struct Sums {
    double s1, s2, r1, r2;
  };

  double deterministic(double x0) const { return cir_integrated_mean(p_, x0, T_); }

  template <class Rng>
  static double gamma(double shape, double scale, Rng& rng) {
    if (!(shape > 0) || !(scale > 0)) return 0.0;
    return std::gamma_distribution<double>(shape, scale)(rng);
  }

  template <class Rng>
  double fallback(double x0, double xT, Rng& rng) const {
    const auto m = conditional_moments(x0, xT);
    if (!(m.variance > 0)) return m.mean;
    return gamma(m.mean * m.mean / m.variance, m.variance / m.mean, rng);
  }

  CirParams p_;
  double T_;
  int K_;
  double delta_ = 0, nu_ = 0, z_scale_ = 0;
  std::vector<double> gam_, lam_;
  Sums head_{}, tail_{};
};

template <class Rng>
double sample_integrated_cir_conditional(const CirParams& p, double x0, double xT, double T, int terms, Rng& rng) {
  return IntegratedCirSampler(p, T, terms).sample(x0, xT, rng);
}

}  // namespace ctc

#endif
