#ifndef CTC_CHF_HPP
#define CTC_CHF_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ctc/cir.hpp"
#include "ctc/errors.hpp"
#include "ctc/levy.hpp"
#include "ctc/math.hpp"
#include "ctc/riccati.hpp"

namespace ctc {

struct VQuadrature {
  int M_terms = 256;    // cosine terms in the density expansion
  int D = 200;          // Gauss-Legendre nodes on [0, c_v]
  double c_v = 0.0;     // truncation of the V_t support; 0 selects E[V_t] + width * sd
  double width = 12.0;
};

struct ChfRequest {
  ModelSpec spec;
  std::vector<double> maturities;
  std::vector<Complex> frequencies;
  double contour_shift = 0.0;  // only used by density_V_contour
  VQuadrature quad;
  SolverConfig solver;
};

inline CirParams v_params(const ModelSpec& spec) {
  if (!spec.v) throw ValidationError("model has no V layer");
  return {spec.v->kappa, spec.v->theta, spec.v->sigma};
}

inline double auto_cv(const ModelSpec& spec, double t, double width, double v_init) {
  const CirParams p = v_params(spec);
  return cir_integrated_mean(p, v_init, t) + width * std::sqrt(std::max(0.0, cir_integrated_variance(p, v_init, t)));
}

// Density of V_t on Gauss-Legendre nodes, clipped at zero and normalised to unit mass.
class VDensity {
 public:
  VDensity() = default;
  VDensity(double c_v, std::vector<double> nodes, std::vector<double> weights, std::vector<double> values,
           double raw_mass, double clipped_mass)
      : c_v_(c_v), nodes_(std::move(nodes)), weights_(std::move(weights)), values_(std::move(values)),
        raw_mass_(raw_mass), clipped_mass_(clipped_mass) {}

  double c_v() const { return c_v_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& values() const { return values_; }
  double raw_mass() const { return raw_mass_; }
  double clipped_mass() const { return clipped_mass_; }

  template <class F>
  auto expect(F&& f) const {
    using R = decltype(f(0.0));
    R acc{};
    for (std::size_t j = 0; j < nodes_.size(); ++j) acc += (weights_[j] * values_[j]) * f(nodes_[j]);
    return acc;
  }

 private:
  double c_v_ = 0;
  std::vector<double> nodes_, weights_, values_;
  double raw_mass_ = 0, clipped_mass_ = 0;
};

inline VDensity density_V(const ModelSpec& spec, double t, double c_v, int terms, int nodes, const SolverConfig& cfg,
                          double v_init) {
  if (!(t > 0)) throw ValidationError("density_V needs t > 0");
  if (!(c_v > 0)) throw ValidationError("density_V needs c_v > 0");
  if (terms < 2 || nodes < 2) throw ValidationError("density_V needs at least two terms and nodes");
  std::vector<double> coef(terms);
  for (int l = 0; l < terms; ++l) {
    const double w = l * std::numbers::pi / c_v;
    Complex phi;
    if (cfg.closed_form) {
      const VLayer& v = *spec.v;
      const auto [b, c] = heston_riccati(kI * w, v.kappa, v.sigma, v.kappa * v.theta, t);
      phi = std::exp(b * v_init + c);
    } else {
      phi = solve_V(spec, w, cfg, t, v_init).transform(t);
    }
    coef[l] = 2.0 / c_v * phi.real() * (l == 0 ? 0.5 : 1.0);
  }
  QuadratureRule rule = gauss_legendre(nodes, 0.0, c_v);
  std::vector<double> vals(nodes);
  double fmax = 0, fmin = 0, clipped = 0, mass = 0;
  for (int j = 0; j < nodes; ++j) {
    // cos(l x) by the Chebyshev recurrence.
    const double x = std::numbers::pi * rule.nodes[j] / c_v, c1 = std::cos(x);
    double cm1 = 1.0, cl = c1, f = coef[0];
    if (terms > 1) f += coef[1] * c1;
    for (int l = 2; l < terms; ++l) {
      const double cn = 2 * c1 * cl - cm1;
      cm1 = cl;
      cl = cn;
      f += coef[l] * cn;
    }
    fmax = std::max(fmax, f);
    fmin = std::min(fmin, f);
    if (f < 0) {
      clipped -= rule.weights[j] * f;
      f = 0;
    }
    vals[j] = f;
    mass += rule.weights[j] * f;
  }
  if (fmin < -1e-6 * std::max(fmax, 1.0))
    warn("density_V: negative density values clipped (min " + std::to_string(fmin) + ")");
  if (!(std::abs(1 - mass) <= 1e-3))
    throw TruncationError("density_V: mass on [0, c_v] is " + std::to_string(mass) + "; enlarge c_v or terms");
  for (auto& f : vals) f /= mass;
  // The constant term always integrates to one, so aliasing from a short support shows up in the mean instead.
  double mean = 0;
  for (int j = 0; j < nodes; ++j) mean += rule.weights[j] * vals[j] * rule.nodes[j];
  const double exact = cir_integrated_mean(v_params(spec), v_init, t);
  if (!(std::abs(mean - exact) <= 1e-3 * exact))
    throw TruncationError("density_V: mean on [0, c_v] is " + std::to_string(mean) + " against " +
                          std::to_string(exact) + "; enlarge c_v or terms");
  return VDensity(c_v, std::move(rule.nodes), std::move(rule.weights), std::move(vals), mass, clipped);
}

inline VDensity density_V(const ModelSpec& spec, double t, const VQuadrature& q, const SolverConfig& cfg,
                          double v_init) {
  const double c_v = q.c_v > 0 ? q.c_v : auto_cv(spec, t, q.width, v_init);
  return density_V(spec, t, c_v, q.M_terms, q.D, cfg, v_init);
}

// Density of V_t at points s by inverting E[exp(z V_t)] along Re z = shift.
inline std::vector<double> density_V_contour(const ModelSpec& spec, double t, const std::vector<double>& s,
                                             double shift, const SolverConfig& cfg, double v_init,
                                             double panel = 20.0, int max_panels = 2000) {
  const QuadratureRule rule = gauss_legendre(16, 0.0, panel);
  std::vector<double> out(s.size(), 0.0);
  for (int p = 0; p < max_panels; ++p) {
    double peak = 0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const Complex z(shift, p * panel + rule.nodes[q]);
      const Complex phi = solve_V(spec, -kI * z, cfg, t, v_init).transform(t);
      peak = std::max(peak, std::abs(phi));
      for (std::size_t i = 0; i < s.size(); ++i)
        out[i] += rule.weights[q] * (std::exp(-z * s[i]) * phi).real() / std::numbers::pi;
    }
    if (peak < 1e-13) return out;
  }
  throw IntegrationError("density_V_contour: transform did not decay", 1.0);
}

// Law of V at a horizon: point mass (degenerate or sigma_v = 0) or a cosine density.
class VLaw {
 public:
  static VLaw make(const ModelSpec& spec, double t, const VQuadrature& q, const SolverConfig& cfg, double v_init) {
    VLaw law;
    if (!spec.v) {
      law.point_ = t;
    } else if (spec.v->sigma == 0.0) {
      law.point_ = cir_integrated_mean(v_params(spec), v_init, t);
    } else {
      law.density_ = density_V(spec, t, q, cfg, v_init);
      law.is_point_ = false;
    }
    return law;
  }

  bool is_point() const { return is_point_; }
  double horizon() const { return is_point_ ? point_ : density_.c_v(); }
  const VDensity& density() const { return density_; }

  template <class F>
  Complex expect(F&& f) const {
    if (is_point_) return f(point_);
    return density_.expect(f);
  }

 private:
  bool is_point_ = true;
  double point_ = 0;
  VDensity density_;
};

// chf of X_T at each frequency, sharing one V law across frequencies.
inline std::vector<Complex> chf_at_maturity(const ModelSpec& spec, const VLaw& law, const std::vector<Complex>& freqs,
                                            const SolverConfig& cfg) {
  std::vector<Complex> out(freqs.size());
  for (std::size_t k = 0; k < freqs.size(); ++k) {
    if (freqs[k] == Complex(0.0)) {
      out[k] = 1.0;
      continue;
    }
    if (cfg.closed_form && u_has_closed_form(spec)) {
      const HestonRiccati ric = u_riccati_closed(spec, psi_base(spec, freqs[k]), freqs[k]);
      out[k] = law.expect([&](double v) {
        const auto [b, c] = ric(v);
        return std::exp(b * spec.u0 + c);
      });
      continue;
    }
    const RiccatiSolution sol = solve_U(spec, freqs[k], cfg, law.horizon());
    out[k] = law.expect([&](double v) { return sol.transform(v); });
  }
  return out;
}

// Rows are maturities, columns frequencies. One U solve per frequency serves all maturities.
inline std::vector<std::vector<Complex>> chf_X(const ChfRequest& req) {
  validate(req.spec);
  if (req.spec.rho_v != 0.0) throw ValidationError("chf_X requires rho_v = 0");
  if (req.quad.D < 64) throw ValidationError("chf_X needs at least 64 quadrature nodes");
  std::vector<VLaw> laws;
  double horizon = 0;
  for (double t : req.maturities) {
    if (!(t > 0)) throw ValidationError("maturities must be positive");
    if (req.solver.step > t / 16) throw ValidationError("Riccati step must not exceed maturity / 16");
    laws.push_back(VLaw::make(req.spec, t, req.quad, req.solver, req.spec.v0));
    horizon = std::max(horizon, laws.back().horizon());
  }
  std::vector<std::vector<Complex>> out(laws.size(), std::vector<Complex>(req.frequencies.size()));
  for (std::size_t k = 0; k < req.frequencies.size(); ++k) {
    const Complex m = req.frequencies[k];
    if (m == Complex(0.0)) {
      for (auto& row : out) row[k] = 1.0;
      continue;
    }
    const RiccatiSolution sol = solve_U(req.spec, m, req.solver, horizon);
    for (std::size_t i = 0; i < laws.size(); ++i) out[i][k] = laws[i].expect([&](double v) { return sol.transform(v); });
  }
  return out;
}

// E[exp(-l (U_{V_{t+tau}} - U_{V_t})) | u_t, v_t] under P. Small negative l is allowed.
inline double laplace_UV_increment(const ModelSpec& spec, double l, double u_state, double v_state, double tau,
                                   const SolverConfig& cfg, const VQuadrature& q = {}) {
  if (!std::isfinite(l)) throw ValidationError("laplace_UV_increment needs a finite l");
  if (!(tau > 0)) throw ValidationError("laplace_UV_increment needs tau > 0");
  auto value = [&](const VQuadrature& qq) {
    const VLaw law = VLaw::make(spec, tau, qq, cfg, v_state);
    const RiccatiSolution sol = solve_U(spec, Complex(-l), Complex(0.0), cfg, law.horizon());
    return law.expect([&](double v) { return sol.transform(v, u_state); }).real();
  };
  const double full = value(q);
  if (spec.v && spec.v->sigma > 0) {
    VQuadrature half = q;
    half.D = std::max(2, q.D / 2);
    const double residual = std::abs(full - value(half));
    if (residual > 1e-7) throw IntegrationError("laplace_UV_increment: V quadrature not converged", residual);
  }
  return full;
}

}  // namespace ctc

#endif
