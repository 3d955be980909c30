#ifndef CTC_RICCATI_HPP
#define CTC_RICCATI_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include "ctc/errors.hpp"
#include "ctc/levy.hpp"
#include "ctc/math.hpp"

namespace ctc {

struct SolverConfig {
  double step = 1.0 / 2000.0;
  double blowup = 1e8;
  bool closed_form = false;  // closed-form CIR-type layers (V, and U without co-jumps) instead of RK4
};

// b, c and their time derivatives on the grid 0, h, ..., n h.
class RiccatiSolution {
 public:
  RiccatiSolution() = default;
  RiccatiSolution(double step, std::vector<Complex> b, std::vector<Complex> db, std::vector<Complex> c,
                  std::vector<Complex> dc, Complex argument, double initial_state)
      : h_(step), b_(std::move(b)), db_(std::move(db)), c_(std::move(c)), dc_(std::move(dc)),
        argument_(argument), x0_(initial_state) {}

  double step() const { return h_; }
  std::size_t size() const { return b_.size(); }
  double horizon() const { return h_ * static_cast<double>(b_.size() - 1); }
  Complex argument() const { return argument_; }
  double initial_state() const { return x0_; }

  Complex b_node(std::size_t i) const { return b_[i]; }
  Complex c_node(std::size_t i) const { return c_[i]; }

  Complex b(double t) const { return interp(t, b_, db_); }
  Complex c(double t) const { return interp(t, c_, dc_); }

  Complex transform(double t, double state) const { return std::exp(b(t) * state + c(t)); }
  Complex transform(double t) const { return transform(t, x0_); }

  void write_csv(std::ostream& os) const {
    os << "t,b_re,b_im,c_re,c_im\n";
    for (std::size_t i = 0; i < b_.size(); ++i)
      os << h_ * i << ',' << b_[i].real() << ',' << b_[i].imag() << ',' << c_[i].real() << ',' << c_[i].imag() << '\n';
  }

 private:
  Complex interp(double t, const std::vector<Complex>& f, const std::vector<Complex>& d) const {
    const double tol = 1e-12 * std::max(1.0, horizon());
    if (t < -tol || t > horizon() + tol) throw GridExtensionError("Riccati solution queried beyond its horizon");
    if (t <= 0) return f.front();
    if (t >= horizon()) return f.back();
    const double x = t / h_;
    std::size_t i = static_cast<std::size_t>(x);
    if (i >= f.size() - 1) i = f.size() - 2;
    const double s = x - static_cast<double>(i);
    if (s == 0.0) return f[i];
    return hermite(s, h_, f[i], d[i], f[i + 1], d[i + 1]);
  }

  double h_ = 0.0;
  std::vector<Complex> b_, db_, c_, dc_;
  Complex argument_{};
  double x0_ = 0.0;
};

// Integrates b' = rhs(b), c' = kappa_theta * b from (b0, 0) with fixed-step RK4.
template <class Rhs>
RiccatiSolution integrate_riccati(Rhs&& rhs, double kappa_theta, Complex b0, double horizon, const SolverConfig& cfg,
                                  Complex argument, double initial_state) {
  if (!(cfg.step > 0)) throw ValidationError("Riccati step must be positive");
  if (!(horizon >= 0) || !std::isfinite(horizon)) throw ValidationError("Riccati horizon must be finite and >= 0");
  const std::size_t n = static_cast<std::size_t>(std::ceil(horizon / cfg.step - 1e-9));
  const double h = cfg.step;
  std::vector<Complex> b(n + 1), db(n + 1), c(n + 1), dc(n + 1);
  b[0] = b0;
  c[0] = 0.0;
  db[0] = rhs(b0);
  dc[0] = kappa_theta * b0;
  for (std::size_t i = 0; i < n; ++i) {
    const Complex y = b[i];
    const Complex k1 = db[i];
    const Complex k2 = rhs(y + 0.5 * h * k1);
    const Complex k3 = rhs(y + 0.5 * h * k2);
    const Complex k4 = rhs(y + h * k3);
    const Complex yn = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // c' depends only on b, so its RK4 update uses the stage values of b.
    c[i + 1] = c[i] + kappa_theta * h / 6.0 * (y + 2.0 * (y + 0.5 * h * k1) + 2.0 * (y + 0.5 * h * k2) + (y + h * k3));
    if (!(std::abs(yn) <= cfg.blowup)) throw MomentExplosion("Riccati solution exploded", h * (i + 1));
    b[i + 1] = yn;
    db[i + 1] = rhs(yn);
    dc[i + 1] = kappa_theta * yn;
  }
  return RiccatiSolution(h, std::move(b), std::move(db), std::move(c), std::move(dc), argument, initial_state);
}

// Time-changed U layer under the measure induced by m:
// b' = psiL - kappa^Q b + sigma_u^2/2 b^2 + psi^Q_{J^u}(i eta_u b), kappa^Q = kappa_u - i rho_u sigma_u sigma m.
inline RiccatiSolution solve_U(const ModelSpec& spec, Complex psiL, Complex m, const SolverConfig& cfg, double horizon) {
  const Complex kq = spec.u.kappa - kI * spec.rho_u * spec.u.sigma * spec.brownian_scale() * m;
  const double half_s2 = 0.5 * spec.u.sigma * spec.u.sigma;
  const double eta = spec.u.eta;
  const auto* cj = spec.cojump();
  const double kt = spec.u.kappa * spec.u.theta;
  if (cj && eta > 0) {
    const CoJumpKernel jump(*cj, m);
    auto rhs = [&](Complex b) { return psiL - kq * b + half_s2 * b * b + jump(kI * eta * b); };
    return integrate_riccati(rhs, kt, 0.0, horizon, cfg, m, spec.u0);
  }
  auto rhs = [&](Complex b) { return psiL - kq * b + half_s2 * b * b; };
  return integrate_riccati(rhs, kt, 0.0, horizon, cfg, m, spec.u0);
}

inline RiccatiSolution solve_U(const ModelSpec& spec, Complex m, const SolverConfig& cfg, double horizon) {
  return solve_U(spec, psi_base(spec, m), m, cfg, horizon);
}

// Closed form of b' = psiL - kq b + sigma^2/2 b^2, c' = kt b from (0, 0).
class HestonRiccati {
 public:
  HestonRiccati(Complex psiL, Complex kq, double sigma, double kt) : psi_(psiL), kq_(kq), s2_(sigma * sigma), kt_(kt) {
    if (s2_ > 0) {
      d_ = std::sqrt(kq * kq - 2.0 * s2_ * psiL);
      g_ = (kq - d_) / (kq + d_);
      r_ = (kq - d_) / s2_;
      log1g_ = std::log(1.0 - g_);
    }
  }

  // (b(s), c(s))
  std::pair<Complex, Complex> operator()(double s) const {
    if (s2_ == 0.0) {
      if (kq_ == Complex(0.0)) return {psi_ * s, kt_ * psi_ * s * s / 2.0};
      const Complex e = std::exp(-kq_ * s);
      return {psi_ * (1.0 - e) / kq_, kt_ * psi_ / kq_ * (s - (1.0 - e) / kq_)};
    }
    const Complex e = std::exp(-d_ * s);
    const Complex q = 1.0 - g_ * e;
    return {r_ * (1.0 - e) / q, kt_ * (r_ * s - 2.0 / s2_ * (std::log(q) - log1g_))};
  }

 private:
  Complex psi_, kq_;
  double s2_, kt_;
  Complex d_{}, g_{}, r_{}, log1g_{};
};

inline std::pair<Complex, Complex> heston_riccati(Complex psiL, Complex kq, double sigma, double kt, double s) {
  return HestonRiccati(psiL, kq, sigma, kt)(s);
}

inline bool u_has_closed_form(const ModelSpec& spec) { return !(spec.cojump() && spec.u.eta > 0); }

// U layer in closed form; requires u_has_closed_form(spec).
inline HestonRiccati u_riccati_closed(const ModelSpec& spec, Complex psiL, Complex m) {
  const Complex kq = spec.u.kappa - kI * spec.rho_u * spec.u.sigma * spec.brownian_scale() * m;
  return HestonRiccati(psiL, kq, spec.u.sigma, spec.u.kappa * spec.u.theta);
}

// Exponent of a jump component of v. The model catalog uses the zero exponent.
using VJumpHook = std::function<Complex(Complex)>;

// V layer: b' = i omega - kappa_v b + sigma_v^2/2 b^2 + hook(b), c' = kappa_v theta_v b.
// The transform exp(b(t) v + c(t)) equals E[exp(i omega (V_t - V_0))].
inline RiccatiSolution solve_V(const ModelSpec& spec, Complex omega, const SolverConfig& cfg, double horizon,
                               double v_init, const VJumpHook& hook = {}) {
  if (!spec.v) throw ValidationError("solve_V needs a V layer");
  const VLayer& v = *spec.v;
  const Complex iw = kI * omega;
  const double half_s2 = 0.5 * v.sigma * v.sigma;
  if (hook) {
    auto rhs = [&](Complex b) { return iw - v.kappa * b + half_s2 * b * b + hook(b); };
    return integrate_riccati(rhs, v.kappa * v.theta, 0.0, horizon, cfg, omega, v_init);
  }
  auto rhs = [&](Complex b) { return iw - v.kappa * b + half_s2 * b * b; };
  return integrate_riccati(rhs, v.kappa * v.theta, 0.0, horizon, cfg, omega, v_init);
}

// Transform of u itself at internal time s under P: E[exp(z u_s)] = exp(b(s) u0 + c(s)), b(0) = z.
// Large |z| makes the equation stiff, so the step is capped by the local Jacobian.
inline RiccatiSolution solve_u_terminal(const ModelSpec& spec, Complex z, const SolverConfig& cfg, double horizon) {
  const double half_s2 = 0.5 * spec.u.sigma * spec.u.sigma;
  const double eta = spec.u.eta, kappa = spec.u.kappa;
  const auto* cj = spec.cojump();
  auto run = [&](auto&& rhs) {
    const double eps = 1e-6 * std::max(1.0, std::abs(z));
    const double lambda = std::abs(rhs(z + eps) - rhs(z)) / eps;
    SolverConfig c = cfg;
    if (lambda * c.step > 0.5) c.step = 0.5 / lambda;
    if (horizon > 0 && c.step < cfg.step) c.step = horizon / std::ceil(horizon / c.step);
    return integrate_riccati(rhs, kappa * spec.u.theta, z, horizon, c, -kI * z, spec.u0);
  };
  if (cj && eta > 0) {
    const CoJumpKernel jump(*cj, 0.0);
    return run([&](Complex b) { return -kappa * b + half_s2 * b * b + jump(kI * eta * b); });
  }
  return run([&](Complex b) { return -kappa * b + half_s2 * b * b; });
}

// E[exp(z x_t)] for a CIR process in closed form; requires Re(1 - 2 c z) > 0.
inline Complex cir_transform(double kappa, double theta, double sigma, double x0, double t, Complex z) {
  if (sigma == 0.0) return std::exp(z * (theta + (x0 - theta) * std::exp(-kappa * t)));
  const double e = std::exp(-kappa * t);
  const double c = sigma * sigma * (1 - e) / (4 * kappa);
  const double df = 4 * kappa * theta / (sigma * sigma);
  const Complex d = 1.0 - 2.0 * c * z;
  if (!(d.real() > 0)) throw MomentExplosion("CIR transform beyond its explosion bound", t);
  return std::pow(d, -0.5 * df) * std::exp(x0 * e * z / d);
}

}  // namespace ctc

#endif
