#ifndef CTC_SIMULATION_HPP
#define CTC_SIMULATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ctc/chf.hpp"
#include "ctc/cir.hpp"
#include "ctc/cos.hpp"
#include "ctc/errors.hpp"
#include "ctc/levy.hpp"
#include "ctc/rng.hpp"
#include "ctc/vix.hpp"

namespace ctc {

struct SimPlan {
  std::size_t paths = 100000;
  std::uint64_t seed = 20240101;
  double euler_step = 1e-4;
  int gamma_terms = 10;
};

struct McEstimate {
  double value = 0, std_error = 0;
};

// Deterministic pairwise sum.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 16) {
    double s = 0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t h = x.size() / 2;
  return pairwise_sum(x.first(h)) + pairwise_sum(x.subspan(h));
}

inline McEstimate mc_estimate(const std::vector<double>& samples) {
  const double n = static_cast<double>(samples.size());
  if (samples.size() < 2) throw ValidationError("need at least two samples");
  const double mean = pairwise_sum(samples) / n;
  std::vector<double> dev(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) dev[i] = (samples[i] - mean) * (samples[i] - mean);
  return {mean, std::sqrt(pairwise_sum(dev) / (n - 1) / n)};
}

// ---- Euler scheme (layered: v, then u on the V clock, then L on the U clock) -----

struct TerminalState {
  double v = 0, V = 0, u = 0, U = 0, x = 0;  // x = ln(S_T / S_0) - r T
};

namespace detail {

inline void check_euler(const ModelSpec& spec, const SimPlan& plan) {
  validate(spec);
  if (spec.cojump()) throw ValidationError("Euler simulation supports the Brownian base only");
  if (spec.rho_v != 0.0) throw ValidationError("Euler simulation requires rho_v = 0");
  if (!(plan.euler_step > 0)) throw ValidationError("Euler step must be positive");
  if (plan.euler_step > 1e-3) warn("Euler step above 1e-3 years; discretisation bias may dominate");
  if (plan.paths < 2) throw ValidationError("need at least two paths");
}

// Simulates one path and calls record(i, state) at each sorted maturity.
template <class Rng, class Record>
void euler_path(const ModelSpec& spec, const std::vector<double>& maturities, double step, Rng& rng, Record&& record) {
  std::normal_distribution<double> nd;
  const double sigma = spec.brownian_scale();
  const double rho = spec.rho_u, rho_c = std::sqrt(std::max(0.0, 1 - rho * rho));
  const ULayer& ul = spec.u;
  TerminalState s{spec.v ? spec.v0 : 1.0, 0.0, spec.u0, 0.0, 0.0};
  double t = 0, I = 0, J = 0;
  for (std::size_t m = 0; m < maturities.size(); ++m) {
    const double T = maturities[m];
    const long n = std::max(1L, std::lround((T - t) / step));
    const double dt = (T - t) / static_cast<double>(n);
    for (long i = 0; i < n; ++i) {
      double dV = dt;
      if (spec.v) {
        const double vp = std::max(s.v, 0.0);
        dV = vp * dt;
        s.v += spec.v->kappa * (spec.v->theta - vp) * dt + spec.v->sigma * std::sqrt(vp * dt) * nd(rng);
      }
      const double up = std::max(s.u, 0.0);
      const double sd = std::sqrt(up * dV);
      const double z = nd(rng);
      s.u += ul.kappa * (ul.theta - up) * dV + ul.sigma * sd * z;
      s.V += dV;
      s.U += up * dV;
      I += up * dV;
      J += sd * z;
    }
    t = T;
    // L over the business-time increment I, correlated with the u shocks through rho_u.
    s.x += -0.5 * sigma * sigma * I + sigma * (rho * J + rho_c * std::sqrt(I) * nd(rng));
    I = J = 0;
    record(m, s);
  }
}

}  // namespace detail

// Terminal states of the Euler scheme at T.
inline std::vector<TerminalState> simulate_terminal_euler(const ModelSpec& spec, double T, const SimPlan& plan) {
  detail::check_euler(spec, plan);
  if (!(T > 0)) throw ValidationError("horizon must be positive");
  std::vector<TerminalState> out(plan.paths);
  for (std::size_t p = 0; p < plan.paths; ++p) {
    Xoshiro256 rng = path_stream(plan.seed, p);
    detail::euler_path(spec, {T}, plan.euler_step, rng, [&](std::size_t, const TerminalState& s) { out[p] = s; });
  }
  return out;
}

// One path set serves every option; maturities are hit exactly.
inline std::vector<McEstimate> euler_mc_european(const ModelSpec& spec, const MarketFrame& frame,
                                                 const std::vector<EuropeanOption>& options, const SimPlan& plan) {
  detail::check_euler(spec, plan);
  std::vector<double> mats;
  for (const auto& o : options) {
    if (!(o.maturity > 0)) throw ValidationError("option maturity must be positive");
    mats.push_back(o.maturity);
  }
  std::sort(mats.begin(), mats.end());
  mats.erase(std::unique(mats.begin(), mats.end()), mats.end());
  std::vector<std::vector<double>> payoff(options.size(), std::vector<double>(plan.paths));
  std::vector<std::vector<std::size_t>> at(mats.size());
  for (std::size_t i = 0; i < options.size(); ++i)
    at[std::lower_bound(mats.begin(), mats.end(), options[i].maturity) - mats.begin()].push_back(i);
  for (std::size_t p = 0; p < plan.paths; ++p) {
    Xoshiro256 rng = path_stream(plan.seed, p);
    detail::euler_path(spec, mats, plan.euler_step, rng, [&](std::size_t m, const TerminalState& s) {
      const double T = mats[m];
      const double ST = frame.spot * std::exp(frame.rate * T + s.x), disc = frame.discount(T);
      for (std::size_t i : at[m]) {
        const double K = options[i].strike;
        payoff[i][p] = disc * (options[i].side == OptionSide::Call ? std::max(ST - K, 0.0) : std::max(K - ST, 0.0));
      }
    });
  }
  std::vector<McEstimate> out;
  for (const auto& v : payoff) out.push_back(mc_estimate(v));
  return out;
}

inline McEstimate euler_mc_european(const ModelSpec& spec, const MarketFrame& frame, const EuropeanOption& o,
                                    const SimPlan& plan) {
  return euler_mc_european(spec, frame, std::vector<EuropeanOption>{o}, plan).front();
}

// ---- exact sampling of u at a random internal time --------------------------

// Draws u_s given u_0 for an internal time s. Heston-type u uses the exact CIR transition;
// jump-type u inverts a COS-recovered CDF tabulated on an internal-time grid.
class USampler {
 public:
  USampler(const ModelSpec& spec, double max_time, const SolverConfig& cfg = {}, int terms = 256,
           int cdf_points = 2048)
      : spec_(spec), max_time_(max_time), h_(cfg.step), terms_(terms), points_(cdf_points) {
    if (!(max_time > 0)) throw ValidationError("USampler needs a positive horizon");
    jump_ = spec.u.eta > 0 && spec.cojump() != nullptr;
    if (!jump_) return;
    // Range [0, b_u] from the first two moments of u along the grid.
    const std::size_t n = static_cast<std::size_t>(std::ceil(max_time / h_ - 1e-9));
    const double mu = u_mean_rate(spec), kt = spec.u.kappa * spec.u.theta, vr = u_variance_rate(spec);
    double e1 = spec.u0, var = 0, upper = spec.u0;
    for (std::size_t i = 0; i < n; ++i) {
      // Exact update for the mean; variance by an RK2 step of dVar = 2 m_u Var + vr E[u].
      const double e1n = e1 * std::exp(mu * h_) + (mu != 0 ? kt * std::expm1(mu * h_) / mu : kt * h_);
      const double k1 = 2 * mu * var + vr * e1, k2 = 2 * mu * (var + h_ * k1) + vr * e1n;
      var += 0.5 * h_ * (k1 + k2);
      e1 = e1n;
      upper = std::max(upper, e1 + 12 * std::sqrt(std::max(var, 0.0)));
    }
    b_ = upper;
    nodes_ = n + 1;
    phi_.assign(static_cast<std::size_t>(terms_) * nodes_, Complex(0.0));
    for (int k = 0; k < terms_; ++k) {
      const double w = k * std::numbers::pi / b_;
      const RiccatiSolution sol = solve_u_terminal(spec, Complex(0.0, w), cfg, h_ * static_cast<double>(n));
      for (std::size_t j = 0; j < nodes_; ++j)
        phi_[static_cast<std::size_t>(k) * nodes_ + j] = std::exp(sol.b_node(j) * spec.u0 + sol.c_node(j));
    }
    tables_.resize(nodes_);
  }

  double upper() const { return b_; }

  template <class Rng>
  double sample(double s, Rng& rng) {
    if (!(s >= 0)) throw ValidationError("internal time must be non-negative");
    if (s > max_time_ + 1e-12) throw GridExtensionError("internal time beyond the precomputed grid");
    const CirParams p{spec_.u.kappa, spec_.u.theta, spec_.u.sigma};
    if (!jump_) return sample_cir_terminal(p, spec_.u0, s, rng);
    // Randomised rounding to a grid node keeps the node-mixture unbiased for linear interpolation.
    const double x = s / h_;
    std::size_t j = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(j);
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < frac) ++j;
    j = std::min(j, nodes_ - 1);
    const std::vector<double>& cdf = table(j);
    const double u01 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u01);
    const std::size_t i = static_cast<std::size_t>(it - cdf.begin());
    const double dx = b_ / static_cast<double>(points_ - 1);
    if (i == 0) return 0.0;
    if (i >= cdf.size()) return b_;
    const double lo = cdf[i - 1], hi = cdf[i];
    const double w = hi > lo ? (u01 - lo) / (hi - lo) : 0.5;
    return dx * (static_cast<double>(i - 1) + w);
  }

 private:
  const std::vector<double>& table(std::size_t j) {
    if (tables_[j]) return *tables_[j];
    std::vector<double> coef(terms_);
    for (int k = 0; k < terms_; ++k) coef[k] = 2.0 / b_ * phi_[static_cast<std::size_t>(k) * nodes_ + j].real();
    std::vector<double> cdf(points_);
    const double dx = b_ / static_cast<double>(points_ - 1);
    double run = 0;
    for (int i = 0; i < points_; ++i) {
      const double x = dx * i;
      double f = 0.5 * coef[0] * x;
      const double th = std::numbers::pi * x / b_;
      const Complex rot = std::polar(1.0, th);
      Complex e = rot;
      for (int k = 1; k < terms_; ++k) {
        f += coef[k] * e.imag() * b_ / (k * std::numbers::pi);
        e *= rot;
      }
      run = std::max(run, f);  // monotone rearrangement
      cdf[i] = run;
    }
    const double top = cdf.back();
    if (!(top > 0)) throw NumericalError("u CDF recovery failed");
    for (auto& c : cdf) c = std::clamp(c / top, 0.0, 1.0);
    tables_[j] = std::move(cdf);
    return *tables_[j];
  }

  ModelSpec spec_;
  double max_time_, h_;
  int terms_, points_;
  bool jump_ = false;
  double b_ = 0;
  std::size_t nodes_ = 0;
  std::vector<Complex> phi_;
  std::vector<std::optional<std::vector<double>>> tables_;
};

// ---- exact VIX option pricing -------------------------------------------------

struct VixOptionResult {
  std::vector<McEstimate> prices;  // discounted call prices per strike
  McEstimate futures;              // E[VIX_T]
};

// Terminal VIX draws: v_T exact, V_T by gamma expansion, u at V_T, then the affine VIX formula.
inline std::vector<double> sample_vix_exact(const ModelSpec& spec, double maturity, const SimPlan& plan,
                                            const SolverConfig& cfg = {}) {
  validate(spec);
  if (spec.rho_v != 0.0) throw ValidationError("exact VIX simulation requires rho_v = 0");
  if (!(maturity > 0)) throw ValidationError("maturity must be positive");
  const VixAffine affine(spec, cfg);
  std::optional<IntegratedCirSampler> integ;
  std::optional<CirParams> vp;
  double max_time = maturity;
  if (spec.v) {
    vp = v_params(spec);
    integ.emplace(*vp, maturity, plan.gamma_terms);
    max_time = auto_cv(spec, maturity, 12.0, spec.v0);
  }
  USampler usampler(spec, max_time, cfg);
  std::vector<double> out(plan.paths);
  for (std::size_t p = 0; p < plan.paths; ++p) {
    Xoshiro256 rng = path_stream(plan.seed, p);
    double vT = 1.0, VT = maturity;
    if (spec.v) {
      vT = sample_cir_terminal(*vp, spec.v0, maturity, rng);
      VT = integ->sample(spec.v0, vT, rng);
    }
    const double u = usampler.sample(VT, rng);
    const double x = affine.radicand(u, vT);
    if (x < -1e-10) throw DomainError("negative VIX radicand in exact simulation");
    out[p] = std::sqrt(std::max(x, 0.0));
  }
  return out;
}

inline VixOptionResult price_vix_options_exact(const ModelSpec& spec, const std::vector<double>& strikes,
                                               double maturity, double rate, const SimPlan& plan,
                                               const SolverConfig& cfg = {}) {
  const std::vector<double> vix = sample_vix_exact(spec, maturity, plan, cfg);
  const double disc = std::exp(-rate * maturity);
  VixOptionResult r;
  std::vector<double> pay(vix.size());
  for (double K : strikes) {
    for (std::size_t i = 0; i < vix.size(); ++i) pay[i] = disc * std::max(vix[i] - K, 0.0);
    r.prices.push_back(mc_estimate(pay));
  }
  r.futures = mc_estimate(vix);
  return r;
}

inline McEstimate price_vix_option_exact(const ModelSpec& spec, double strike, double maturity, const SimPlan& plan,
                                         double rate = 0.0) {
  return price_vix_options_exact(spec, {strike}, maturity, rate, plan).prices.front();
}

}  // namespace ctc

#endif
