#ifndef CTC_COS_HPP
#define CTC_COS_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

#include "ctc/chf.hpp"
#include "ctc/errors.hpp"
#include "ctc/levy.hpp"
#include "ctc/math.hpp"

namespace ctc {

struct CosConfig {
  int N = 256;                 // cosine terms in log-price
  int M_terms = 256;           // cosine terms of the V density
  int D = 200;                 // quadrature nodes over [0, c_v]
  std::optional<double> c_v;   // V support bound; default E[V_T] + cv_width * sd
  double cv_width = 12.0;
  double L = 10.0;             // truncation width in cumulant units
  std::optional<double> a, b;  // fixed range [a, b] in ln S_T; overrides cumulants
  SolverConfig solver;

  VQuadrature quad() const { return {M_terms, D, c_v.value_or(0.0), cv_width}; }
};

enum class OptionSide { Call, Put };

struct EuropeanOption {
  double strike = 0.0;
  double maturity = 0.0;
  OptionSide side = OptionSide::Call;
};

struct MarketFrame {
  double spot = 100.0;
  double rate = 0.0;
  double discount(double t) const { return std::exp(-rate * t); }
  double forward(double t) const { return spot * std::exp(rate * t); }
};

// chi_k = int_c^d e^y cos(k pi (y - a)/(b - a)) dy
inline double cos_chi(int k, double a, double b, double c, double d) {
  const double w = k * std::numbers::pi / (b - a);
  const double ed = std::exp(d), ec = std::exp(c);
  return (std::cos(w * (d - a)) * ed - std::cos(w * (c - a)) * ec + w * std::sin(w * (d - a)) * ed -
          w * std::sin(w * (c - a)) * ec) /
         (1 + w * w);
}

// psi_k = int_c^d cos(k pi (y - a)/(b - a)) dy
inline double cos_psi(int k, double a, double b, double c, double d) {
  if (k == 0) return d - c;
  const double w = k * std::numbers::pi / (b - a);
  return (std::sin(w * (d - a)) - std::sin(w * (c - a))) / w;
}

// Payoff coefficients on [a, b] (log-price units, ln S_T).
inline std::vector<double> fk_coeffs(const EuropeanOption& opt, double a, double b, int N) {
  if (!(opt.strike > 0)) throw ValidationError("fk_coeffs: strike must be positive");
  const double lk = std::log(opt.strike);
  if (lk < a || lk > b) throw TruncationError("fk_coeffs: strike outside the truncation range");
  std::vector<double> f(N);
  const double s = 2.0 / (b - a);
  for (int k = 0; k < N; ++k) {
    if (opt.side == OptionSide::Call)
      f[k] = s * (cos_chi(k, a, b, lk, b) - opt.strike * cos_psi(k, a, b, lk, b));
    else
      f[k] = s * (-cos_chi(k, a, b, a, lk) + opt.strike * cos_psi(k, a, b, a, lk));
  }
  return f;
}

struct LogPriceRange {
  double a, b;
};

struct Cumulants {
  double c1, c2, c4;
};

// Cumulants of X_T from finite differences of log chf at the origin.
inline Cumulants cumulants_from_law(const ModelSpec& spec, const VLaw& law, const SolverConfig& cfg) {
  auto stencil = [&](double h) {
    const auto phi = chf_at_maturity(spec, law, {Complex(h), Complex(2 * h)}, cfg);
    const Complex f1 = std::log(phi[0]), f2 = std::log(phi[1]);
    Cumulants c{};
    c.c1 = (8 * f1.imag() - f2.imag()) / (6 * h);
    c.c2 = -(16 * f1.real() - f2.real()) / (6 * h * h);
    c.c4 = -2 * (4 * f1.real() - f2.real()) / (h * h * h * h);
    return c;
  };
  Cumulants c = stencil(0.5);
  if (c.c2 > 0) c = stencil(std::min(0.5, 0.3 / std::sqrt(c.c2)));
  if (!(c.c2 > 0) || !std::isfinite(c.c1)) throw NumericalError("cumulant estimate failed");
  return c;
}

inline LogPriceRange range_from_cumulants(const Cumulants& c, const MarketFrame& frame, double T, double L) {
  const double centre = std::log(frame.spot) + frame.rate * T + c.c1;
  const double half = L * std::sqrt(c.c2 + std::sqrt(std::max(0.0, c.c4)));
  return {centre - half, centre + half};
}

inline LogPriceRange cumulant_range(const ModelSpec& spec, const MarketFrame& frame, double T, const CosConfig& cfg) {
  const VLaw law = VLaw::make(spec, T, cfg.quad(), cfg.solver, spec.v0);
  return range_from_cumulants(cumulants_from_law(spec, law, cfg.solver), frame, T, cfg.L);
}

namespace detail {

inline void check_pricing_inputs(const ModelSpec& spec, const MarketFrame& frame, const CosConfig& cfg) {
  validate(spec);
  if (spec.rho_v != 0.0) throw ValidationError("COS pricing requires rho_v = 0");
  if (!(frame.spot > 0)) throw ValidationError("spot must be positive");
  auto pow2 = [](int n) { return n >= 2 && (n & (n - 1)) == 0; };
  if (!pow2(cfg.N) || !pow2(cfg.M_terms)) throw ValidationError("COS needs N and M_terms to be powers of two");
  if (cfg.D < 64) throw ValidationError("COS needs D >= 64");
}

}  // namespace detail

// Prices all options; one chf evaluation per maturity, O(N) work per strike.
// Puts come from the COS sum, calls from put-call parity.
inline std::vector<double> price_surface(const ModelSpec& spec, const MarketFrame& frame,
                                         const std::vector<EuropeanOption>& options, const CosConfig& cfg) {
  detail::check_pricing_inputs(spec, frame, cfg);
  std::map<double, std::vector<std::size_t>> by_maturity;
  for (std::size_t i = 0; i < options.size(); ++i) {
    const auto& o = options[i];
    if (!(o.maturity > 0)) throw ValidationError("option maturity must be positive");
    if (!(o.strike >= 0) || !std::isfinite(o.strike)) throw ValidationError("option strike must be non-negative");
    if (cfg.solver.step > o.maturity / 16) throw ValidationError("Riccati step must not exceed maturity / 16");
    by_maturity[o.maturity].push_back(i);
  }
  std::vector<double> prices(options.size());
  for (const auto& [T, idx] : by_maturity) {
    const VLaw law = VLaw::make(spec, T, cfg.quad(), cfg.solver, spec.v0);
    LogPriceRange r{};
    if (cfg.a && cfg.b) {
      r = {*cfg.a, *cfg.b};
    } else {
      r = range_from_cumulants(cumulants_from_law(spec, law, cfg.solver), frame, T, cfg.L);
    }
    const double a = r.a, b = r.b;
    std::vector<Complex> freqs(cfg.N);
    for (int k = 0; k < cfg.N; ++k) freqs[k] = k * std::numbers::pi / (b - a);
    const std::vector<Complex> phi = chf_at_maturity(spec, law, freqs, cfg.solver);
    // Re[phi_Y(w_k) e^{-i w_k a}] with Y = ln S_T = X_T + ln S0 + r T.
    const double shift = std::log(frame.spot) + frame.rate * T - a;
    std::vector<double> re(cfg.N);
    for (int k = 0; k < cfg.N; ++k) re[k] = (phi[k] * std::exp(kI * freqs[k].real() * shift)).real();
    re[0] *= 0.5;
    const double disc = frame.discount(T);
    for (std::size_t i : idx) {
      const EuropeanOption& o = options[i];
      double put = 0.0;
      if (o.strike > 0 && std::log(o.strike) > a) {
        if (std::log(o.strike) >= b) {
          // Entire support below the strike: the put is the forward intrinsic.
          put = disc * o.strike - frame.spot;
        } else {
          const auto f = fk_coeffs({o.strike, T, OptionSide::Put}, a, b, cfg.N);
          double s = 0.0;
          for (int k = 0; k < cfg.N; ++k) s += re[k] * f[k];
          put = disc * s;
        }
      }
      put = std::clamp(put, std::max(0.0, disc * o.strike - frame.spot), disc * o.strike);
      prices[i] = o.side == OptionSide::Put ? put : put + frame.spot - disc * o.strike;
    }
  }
  return prices;
}

inline double price_european(const ModelSpec& spec, const MarketFrame& frame, const EuropeanOption& opt,
                             const CosConfig& cfg) {
  return price_surface(spec, frame, {opt}, cfg).front();
}

// ---- Black-Scholes ---------------------------------------------------------

inline double black_scholes(const MarketFrame& frame, const EuropeanOption& o, double vol) {
  const double T = o.maturity, F = frame.forward(T), D = frame.discount(T), K = o.strike;
  const double sd = vol * std::sqrt(T);
  if (!(sd > 0) || !(K > 0)) {
    const double intr = o.side == OptionSide::Call ? std::max(F - K, 0.0) : std::max(K - F, 0.0);
    return D * intr;
  }
  const double d1 = std::log(F / K) / sd + 0.5 * sd, d2 = d1 - sd;
  if (o.side == OptionSide::Call) return D * (F * norm_cdf(d1) - K * norm_cdf(d2));
  return D * (K * norm_cdf(-d2) - F * norm_cdf(-d1));
}

inline double black_scholes_vega(const MarketFrame& frame, const EuropeanOption& o, double vol) {
  const double T = o.maturity, F = frame.forward(T), sd = vol * std::sqrt(T);
  const double d1 = std::log(F / o.strike) / sd + 0.5 * sd;
  return frame.discount(T) * F * norm_pdf(d1) * std::sqrt(T);
}

// Safeguarded Newton with bisection fallback on [1e-4, 5].
inline double implied_vol(double price, const MarketFrame& frame, const EuropeanOption& o) {
  const double lo_vol = 1e-4, hi_vol = 5.0;
  if (!std::isfinite(price)) throw NoSolutionError("implied_vol: price is not finite");
  if (!(o.strike > 0) || !(o.maturity > 0)) throw ValidationError("implied_vol: bad option");
  const double tol = 1e-10 * frame.spot;
  double lo = lo_vol, hi = hi_vol;
  const double plo = black_scholes(frame, o, lo), phi = black_scholes(frame, o, hi);
  if (price < plo - tol || price > phi + tol) throw NoSolutionError("implied_vol: price outside the attainable range");
  if (std::abs(price - plo) <= tol) return lo;
  double x = std::sqrt(2 * std::abs(std::log(frame.forward(o.maturity) / o.strike)) / o.maturity);
  x = std::clamp(std::max(x, 0.2), lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double diff = black_scholes(frame, o, x) - price;
    if (std::abs(diff) <= 1e-3 * tol) return x;
    if (diff > 0) hi = x; else lo = x;
    const double vega = black_scholes_vega(frame, o, x);
    double nx = vega > 0 ? x - diff / vega : 0.5 * (lo + hi);
    if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
    if (hi - lo < 1e-15) return nx;
    x = nx;
  }
  if (std::abs(black_scholes(frame, o, x) - price) <= tol) return x;
  throw NoSolutionError("implied_vol: no convergence");
}

}  // namespace ctc

#endif
