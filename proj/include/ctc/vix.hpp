#ifndef CTC_VIX_HPP
#define CTC_VIX_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include "ctc/chf.hpp"
#include "ctc/cir.hpp"
#include "ctc/errors.hpp"
#include "ctc/levy.hpp"
#include "ctc/math.hpp"
#include "ctc/riccati.hpp"

namespace ctc {

inline constexpr double kVixTenor = 30.0 / 365.0;

// M_bar = 2 (Psi(-i) - E[J_1]) = -2 E[L_1].
inline double vix_multiplier(const ModelSpec& spec) { return -2.0 * base_mean(spec); }

struct VixLinear {
  double a_coef = 0, b_coef = 0, m_u = 0;
};

// VIX_t^2 = a u_t + b for ordinary models.
inline VixLinear vix_linear(const ModelSpec& spec, double tau = kVixTenor) {
  const double mbar = vix_multiplier(spec), mu = u_mean_rate(spec);
  const double kt = spec.u.kappa * spec.u.theta;
  VixLinear r;
  r.m_u = mu;
  r.a_coef = mbar * m_func(mu, tau);
  // kappa theta / m_u (M - 1) has the finite limit kappa theta tau / 2 as m_u -> 0.
  const double y = mu * tau;
  const double m_minus_1_over_mu = std::abs(y) < 1e-8 ? 0.5 * tau * (1 + y / 3) : (m_func(mu, tau) - 1) / mu;
  r.b_coef = mbar * kt * m_minus_1_over_mu;
  return r;
}

inline double vix_spot_ordinary(const ModelSpec& spec, double u) {
  if (!spec.degenerate_v()) throw ValidationError("vix_spot_ordinary needs V_t = t");
  const VixLinear l = vix_linear(spec);
  const double x = l.a_coef * u + l.b_coef;
  if (x < 0) throw ValidationError("negative VIX^2 for the given state");
  return std::sqrt(x);
}

// VIX_t^2 = A(v) u + B v + C(v) for composite models; also handles V_t = t.
class VixAffine {
 public:
  VixAffine(const ModelSpec& spec, const SolverConfig& cfg = {}, double tau = kVixTenor)
      : tau_(tau), mbar_(vix_multiplier(spec)), mu_(u_mean_rate(spec)), kt_u_(spec.u.kappa * spec.u.theta) {
    if (spec.rho_v != 0.0) throw ValidationError("VixAffine requires rho_v = 0");
    if (spec.v) {
      composite_ = true;
      const CirParams p{spec.v->kappa, spec.v->theta, spec.v->sigma};
      kv_ = p.kappa;
      ktv_ = p.kappa * p.theta;
      coef_ = integrated_cir_coefficients(p, tau);
      // phi_V(-i m_u; tau) = exp(b v + c): the V Riccati with i omega = m_u is real.
      const RiccatiSolution sol = solve_V(spec, Complex(0.0, -mu_), cfg, tau, spec.v0);
      bt_ = sol.b(tau).real();
      ct_ = sol.c(tau).real();
    }
  }

  double tau() const { return tau_; }

  double A(double v) const {
    const Moments m = moments(v);
    if (series(m)) return mbar_ * (m.e1 + 0.5 * mu_ * m.e2) / tau_;
    return mbar_ * std::expm1(log_phi(v)) / (mu_ * tau_);
  }

  double B() const {
    if (!composite_) return 0.0;
    return -mbar_ * kt_u_ * m_func(-kv_, tau_) / mu_;
  }

  double C(double v) const {
    if (!composite_) {
      const Moments m = moments(v);
      return bv_plus_c(v, m);
    }
    const double mv = -kv_;
    return mbar_ * (-kt_u_ * ktv_ * (m_func(mv, tau_) - 1) / (mu_ * mv) +
                    kt_u_ * std::expm1(log_phi(v)) / (mu_ * mu_ * tau_));
  }

  // A(v) u + B v + C(v), continuous through m_u = 0.
  double radicand(double u, double v) const {
    const Moments m = moments(v);
    return A(v) * u + bv_plus_c(v, m);
  }

  double vix(double u, double v) const {
    const double x = radicand(u, v);
    if (x < 0) throw DomainError("VIX radicand is negative for state (u, v)");
    return std::sqrt(x);
  }

 private:
  struct Moments {
    double e1, e2;  // E[dV], E[dV^2] given v
  };

  Moments moments(double v) const {
    if (!composite_) return {tau_, tau_ * tau_};
    const double e1 = coef_.b1 * v + coef_.c1;
    return {e1, 2 * (coef_.b2 * v + coef_.c2) + e1 * e1};
  }

  bool series(const Moments& m) const { return std::abs(mu_) * m.e1 < 1e-6; }

  double log_phi(double v) const { return composite_ ? bt_ * v + ct_ : mu_ * tau_; }

  double bv_plus_c(double v, const Moments& m) const {
    if (series(m)) return mbar_ * kt_u_ * (0.5 * m.e2 + mu_ * m.e2 * m.e1 / 6.0) / tau_;
    if (!composite_) return mbar_ * kt_u_ / mu_ * (std::expm1(mu_ * tau_) / (mu_ * tau_) - 1);
    return B() * v + C(v);
  }

  double tau_, mbar_, mu_, kt_u_;
  bool composite_ = false;
  double kv_ = 0, ktv_ = 0, bt_ = 0, ct_ = 0;
  IntegratedCirCoefficients coef_{};
};

inline double vix_spot_ctc(const ModelSpec& spec, double u, double v, const SolverConfig& cfg = {}) {
  return VixAffine(spec, cfg).vix(u, v);
}

// VIX^2 from the Laplace transform of the time-changed increment (central difference at l = 0).
inline double vix_squared_laplace(const ModelSpec& spec, double u, double v, const SolverConfig& cfg = {},
                                  double tau = kVixTenor, double dl = 1e-5) {
  const double up = laplace_UV_increment(spec, dl, u, v, tau, cfg);
  const double dn = laplace_UV_increment(spec, -dl, u, v, tau, cfg);
  const double mean_increment = -(up - dn) / (2 * dl);
  return vix_multiplier(spec) * mean_increment / tau;
}

struct VixFourierConfig {
  double contour_shift = 0.0;  // Re z > 0; 0 selects a value below the moment-explosion bound
  double tolerance = 1e-6;
  int max_panels = 40000;
  SolverConfig solver;
};

namespace detail {

// Largest tried z with E[exp(z u_T)] finite, halved once more for margin.
inline double safe_contour_shift(const ModelSpec& spec, double T, double start, const SolverConfig& cfg) {
  double z = start;
  for (int i = 0; i < 200; ++i) {
    try {
      SolverConfig c = cfg;
      c.blowup = 1e6;
      const RiccatiSolution sol = solve_u_terminal(spec, Complex(z), c, T);
      if (std::abs(sol.b(T)) < 1e4) return 0.5 * z;
    } catch (const MomentExplosion&) {
    }
    z *= 0.5;
  }
  throw NumericalError("no admissible contour shift found");
}

}  // namespace detail

// Discounted E[(VIX_T - K)^+] for ordinary models, by the erfc contour integral against E[exp(z u_T)].
inline double vix_call_fourier_ordinary(const ModelSpec& spec, double strike, double maturity, double rate = 0.0,
                                        const VixFourierConfig& cfg = {}) {
  validate(spec);
  if (!spec.degenerate_v()) throw ValidationError("vix_call_fourier_ordinary needs V_t = t");
  if (!(maturity > 0)) throw ValidationError("maturity must be positive");
  if (!(strike >= 0)) throw ValidationError("strike must be non-negative");
  const VixLinear lin = vix_linear(spec);
  const double a = lin.a_coef, b = lin.b_coef, K = strike;
  const double zr = cfg.contour_shift > 0
                        ? cfg.contour_shift
                        : detail::safe_contour_shift(spec, maturity, std::min(50.0, a / std::max(K * K, 1e-6)),
                                                     cfg.solver);
  const bool jump = spec.cojump() && spec.u.eta > 0;
  auto integrand = [&](double zi) {
    const Complex z(zr, zi);
    const Complex phi = jump ? solve_u_terminal(spec, z, cfg.solver, maturity).transform(maturity)
                             : cir_transform(spec.u.kappa, spec.u.theta, spec.u.sigma, spec.u0, maturity, z);
    const Complex q = std::sqrt(z / a);
    return (std::exp(z * b / a) * phi * erfc(K * q) / (q * q * q)).real();
  };
  const QuadratureRule g16 = gauss_legendre(16), g24 = gauss_legendre(24);
  auto panel = [&](double lo, double hi, double& coarse) {
    const double h = 0.5 * (hi - lo), m = 0.5 * (hi + lo);
    double s16 = 0, s24 = 0;
    for (std::size_t q = 0; q < 16; ++q) s16 += g16.weights[q] * integrand(m + h * g16.nodes[q]);
    for (std::size_t q = 0; q < 24; ++q) s24 += g24.weights[q] * integrand(m + h * g24.nodes[q]);
    coarse += h * s16;
    return h * s24;
  };
  const double scale = std::exp(-rate * maturity) / (2 * a * std::sqrt(std::numbers::pi));
  // Asymptotically the integrand oscillates like exp(i z_I (b - K^2) / a).
  const double omega = std::abs(b - K * K) / a;
  const double half_period = omega > 1e-4 ? std::numbers::pi / omega : 0.0;
  double fine = 0, coarse = 0;
  // Graded panels resolve the peak near z_I = 0.
  double lo = 0, hi = std::min(zr, half_period > 0 ? half_period : zr);
  const double first = half_period > 0 ? half_period : 64 * zr;
  while (lo < first) {
    fine += panel(lo, hi, coarse);
    lo = hi;
    hi = std::min(2 * hi, first);
  }
  std::vector<double> partial{fine};
  double step = half_period > 0 ? half_period : first;
  for (int p = 0; p < cfg.max_panels; ++p) {
    const double h = half_period > 0 ? step : lo;  // geometric growth without oscillation
    fine += panel(lo, lo + h, coarse);
    lo += h;
    partial.push_back(fine);
    if (partial.size() < 12) continue;
    // Wynn epsilon on the last partial sums.
    const std::size_t n = std::min<std::size_t>(partial.size(), 21) | 1u;
    std::vector<double> e0(partial.end() - n, partial.end()), e1(n, 0.0), e2;
    std::vector<double> best;
    for (std::size_t col = 1; col < n; ++col) {
      e2.assign(n - col, 0.0);
      bool ok = true;
      for (std::size_t i = 0; i + col < n; ++i) {
        const double d = e0[i + 1] - e0[i];
        if (d == 0.0) { ok = false; break; }
        e2[i] = (col == 1 ? 0.0 : e1[i + 1]) + 1.0 / d;
      }
      if (!ok) break;
      if (col % 2 == 0) best.assign(e2.end() - 2, e2.end());
      e1 = e0;
      e0 = e2;
    }
    double est = fine, est_prev = partial[partial.size() - 2];
    if (best.size() == 2) {
      est = best[1];
      est_prev = best[0];
    }
    if (std::abs(est - est_prev) * scale < 0.1 * cfg.tolerance && p > 12) {
      const double residual = std::abs(fine - coarse) * scale;
      if (residual > cfg.tolerance) throw IntegrationError("VIX Fourier quadrature not converged", residual);
      return std::max(0.0, est * scale);
    }
  }
  throw IntegrationError("VIX Fourier integral did not converge", std::abs(fine - coarse) * scale);
}

// ---- small-tenor diagnostics -------------------------------------------------

struct SmallTauReport {
  std::vector<double> tau, vix2, leading, difference;
  double slope = 0, intercept = 0, r_squared = 0;
  double first_order_slope = 0;  // predicted d(VIX^2 - leading)/d tau at 0
  double vvix2_leading = 0;      // 2r + kappa_v + kappa_u v + (sigma_v^2 - 2 kappa_v theta_v)/(2v) + ...
};

inline SmallTauReport smalltau_diagnostics(const ModelSpec& spec, double u, double v, const std::vector<double>& taus,
                                           double rate = 0.0, const SolverConfig& cfg = {}) {
  if (spec.kind != ModelKind::CompositeHeston && spec.kind != ModelKind::Heston)
    throw ValidationError("smalltau_diagnostics covers the Heston kinds");
  if (taus.size() < 3) throw ValidationError("smalltau_diagnostics needs at least three tenors");
  const double vv = spec.v ? v : 1.0;
  const double mbar = vix_multiplier(spec);
  SmallTauReport r;
  for (double t : taus) {
    const double x = VixAffine(spec, cfg, t).radicand(u, vv);
    const double lead = mbar * u * vv;
    r.tau.push_back(t);
    r.vix2.push_back(x);
    r.leading.push_back(lead);
    r.difference.push_back(x - lead);
  }
  const double n = static_cast<double>(taus.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    sx += r.tau[i];
    sy += r.difference[i];
    sxx += r.tau[i] * r.tau[i];
    sxy += r.tau[i] * r.difference[i];
    syy += r.difference[i] * r.difference[i];
  }
  const double cxx = sxx - sx * sx / n, cxy = sxy - sx * sy / n, cyy = syy - sy * sy / n;
  r.slope = cxy / cxx;
  r.intercept = (sy - r.slope * sx) / n;
  r.r_squared = cyy > 0 ? cxy * cxy / (cxx * cyy) : 1.0;
  // First-order term -E[L_1] (u A^v I(v) + v^2 A^u I(u)) with A I(x) = kappa (theta - x).
  const double gen_v = spec.v ? spec.v->kappa * (spec.v->theta - vv) : 0.0;
  const double gen_u = spec.u.kappa * (spec.u.theta - u);
  r.first_order_slope = 0.5 * mbar * (u * gen_v + vv * vv * gen_u);
  const double sv2 = spec.v ? spec.v->sigma * spec.v->sigma : 0.0;
  const double kv = spec.v ? spec.v->kappa : 0.0, ktv = spec.v ? spec.v->kappa * spec.v->theta : 0.0;
  r.vvix2_leading = 2 * rate + kv + spec.u.kappa * vv + (sv2 - 2 * ktv) / (2 * vv) +
                    (spec.u.sigma * spec.u.sigma - 2 * spec.u.kappa * spec.u.theta) / (2 * u) * vv;
  return r;
}

}  // namespace ctc

#endif
