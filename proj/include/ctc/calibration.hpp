#ifndef CTC_CALIBRATION_HPP
#define CTC_CALIBRATION_HPP

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctc/cos.hpp"
#include "ctc/errors.hpp"
#include "ctc/levy.hpp"
#include "ctc/market.hpp"
#include "ctc/metrics.hpp"
#include "ctc/optimize.hpp"
#include "ctc/simulation.hpp"

namespace ctc {

// ---- parameter space ----------------------------------------------------------

enum class Transform { Log, ScaledLogit, Identity };

struct ParamDef {
  std::string name;
  double lo = 0, hi = 0;
  Transform transform = Transform::Log;
  bool state = false;  // per-date state rather than structural
};

struct ParamSpace {
  ModelKind kind = ModelKind::Heston;
  std::vector<ParamDef> params;
  ParamMap fixed;  // values held constant, e.g. the Brownian scale

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : params) out.push_back(p.name);
    return out;
  }
  std::vector<std::size_t> indices(bool state) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].state == state) out.push_back(i);
    return out;
  }
};

inline constexpr double kLogitBound = 12.0;

inline double to_transformed(const ParamDef& p, double x) {
  switch (p.transform) {
    case Transform::Log: return std::log(x);
    case Transform::ScaledLogit: {
      const double s = std::clamp((x - p.lo) / (p.hi - p.lo), 1e-12, 1 - 1e-12);
      return std::clamp(std::log(s / (1 - s)), -kLogitBound, kLogitBound);
    }
    case Transform::Identity: return x;
  }
  return x;
}

inline double from_transformed(const ParamDef& p, double z) {
  switch (p.transform) {
    case Transform::Log: return std::exp(z);
    case Transform::ScaledLogit: return p.lo + (p.hi - p.lo) / (1 + std::exp(-z));
    case Transform::Identity: return z;
  }
  return z;
}

inline std::pair<double, double> transformed_bounds(const ParamDef& p) {
  switch (p.transform) {
    case Transform::Log: return {std::log(p.lo), std::log(p.hi)};
    case Transform::ScaledLogit: return {-kLogitBound, kLogitBound};
    case Transform::Identity: return {p.lo, p.hi};
  }
  return {p.lo, p.hi};
}

// Box and split used by the CLI. The Brownian scale is fixed at 1 (the u level absorbs it);
// jump kinds drive u by jumps only.
inline ParamSpace default_space(ModelKind kind) {
  ParamSpace s;
  s.kind = kind;
  s.fixed["rho_v"] = 0.0;
  s.params.push_back({"kappa_u", 0.1, 40.0, Transform::Log, false});
  if (is_jump_kind(kind)) {
    s.params.push_back({"theta_u", 0.01, 3.0, Transform::Log, false});
    s.params.push_back({"eta_u", 0.1, 20.0, Transform::Log, false});
    s.params.push_back({"C", 1e-3, 3.0, Transform::Log, false});
    s.params.push_back({"G", 0.1, 40.0, Transform::Log, false});
    s.params.push_back({"M", 1.0, 80.0, Transform::Log, false});
    s.params.push_back({"Y", 0.05, 1.95, Transform::ScaledLogit, false});
    s.fixed["sigma_u"] = 0.0;
    s.fixed["rho_u"] = 0.0;
  } else {
    s.params.push_back({"theta_u", 0.005, 1.0, Transform::Log, false});
    s.params.push_back({"sigma_u", 0.05, 5.0, Transform::Log, false});
    s.params.push_back({"rho_u", -1.0, 0.0, Transform::ScaledLogit, false});
    s.fixed["sigma"] = 1.0;
    s.fixed["eta_u"] = 0.0;
  }
  if (is_composite(kind)) {
    s.params.push_back({"kappa_v", 0.1, 20.0, Transform::Log, false});
    s.params.push_back({"theta_v", 0.1, 5.0, Transform::Log, false});
    s.params.push_back({"sigma_v", 0.05, 3.0, Transform::Log, false});
    s.params.push_back({"v0", 0.05, 5.0, Transform::Log, true});
  }
  s.params.push_back({"u0", 1e-3, 2.0, Transform::Log, true});
  return s;
}

inline void validate(const ParamSpace& s) {
  const ParamMap known = to_param_map(from_param_map(s.kind, {}));
  std::map<std::string, int> seen;
  for (const auto& p : s.params) {
    if (!known.count(p.name)) throw ValidationError("parameter '" + p.name + "' does not belong to " + to_string(s.kind));
    if (seen[p.name]++) throw ValidationError("parameter '" + p.name + "' listed twice");
    if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.lo < p.hi))
      throw ValidationError("parameter '" + p.name + "' needs finite bounds with lower < upper");
    if (p.transform == Transform::Log && !(p.lo > 0))
      throw ValidationError("log-transformed parameter '" + p.name + "' needs a positive lower bound");
  }
  for (const auto& [k, v] : s.fixed)
    if (!known.count(k)) throw ValidationError("fixed value '" + k + "' does not belong to " + to_string(s.kind));
  if (is_composite(s.kind))
    for (const char* st : {"u0", "v0"}) {
      const auto it = std::find_if(s.params.begin(), s.params.end(), [&](const ParamDef& p) { return p.name == st; });
      if (it != s.params.end() && !it->state)
        throw ValidationError(std::string(st) + " must be a state parameter for composite kinds");
    }
}

inline std::vector<double> encode(const ParamSpace& space, const ModelSpec& spec) {
  const ParamMap m = to_param_map(spec);
  std::vector<double> z;
  for (const auto& p : space.params) {
    const double x = m.at(p.name);
    if (!(x >= p.lo && x <= p.hi))
      throw ValidationError("initial " + p.name + " = " + std::to_string(x) + " lies outside its bounds");
    z.push_back(to_transformed(p, x));
  }
  return z;
}

// Free parameters from z, everything else from `base` and the space's fixed values.
inline ModelSpec decode(const ParamSpace& space, const std::vector<double>& z, const ModelSpec& base) {
  ParamMap m = to_param_map(base);
  for (const auto& [k, v] : space.fixed) m[k] = v;
  for (std::size_t i = 0; i < space.params.size(); ++i) m[space.params[i].name] = from_transformed(space.params[i], z[i]);
  return from_param_map(space.kind, m);
}

// ---- model implied vols ------------------------------------------------------------

// Cheap COS settings for the objective; worst grid error stays well inside the pricing tolerance.
inline CosConfig calibration_cos_config() {
  CosConfig c;
  c.N = 128;
  c.M_terms = 64;
  c.D = 64;
  c.solver.step = 1.0 / 1000.0;
  c.solver.closed_form = true;
  return c;
}

struct PricerConfig {
  CosConfig cos = calibration_cos_config();
  SimPlan vix_plan{4096, 20240101, 1e-4, 10};  // common random numbers across evaluations
};

// Model IV for every quote. SPX: COS on the out-of-the-money side. VIX: exact simulation,
// inverted with Black-76 on the model VIX future. Quotes without a model IV carry NaN.
inline Residuals model_residuals(const ModelSpec& spec, const QuoteSet& quotes, const PricerConfig& cfg = {}) {
  Residuals r;
  std::map<std::tuple<double, double, double>, std::vector<std::size_t>> spx_groups;
  for (std::size_t i = 0; i < quotes.spx.size(); ++i) {
    const auto& q = quotes.spx[i];
    spx_groups[{q.maturity, q.forward, q.rate}].push_back(i);
    r.spx.push_back({q.maturity, q.moneyness, q.iv});
  }
  for (const auto& [key, idx] : spx_groups) {
    const auto [T, F, rate] = key;
    const MarketFrame frame{F * std::exp(-rate * T), rate};
    std::vector<EuropeanOption> opts;
    for (std::size_t i : idx) {
      const double K = quotes.spx[i].strike();
      opts.push_back({K, T, K >= F ? OptionSide::Call : OptionSide::Put});
    }
    const auto prices = price_surface(spec, frame, opts, cfg.cos);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      try {
        r.spx[idx[j]].model = implied_vol(prices[j], frame, opts[j]);
      } catch (const NoSolutionError&) {
      }
    }
  }
  std::map<std::pair<double, double>, std::vector<std::size_t>> vix_groups;
  for (std::size_t i = 0; i < quotes.vix.size(); ++i) {
    const auto& q = quotes.vix[i];
    vix_groups[{q.maturity, q.rate}].push_back(i);
    r.vix.push_back({q.maturity, q.moneyness, q.iv});
  }
  for (const auto& [key, idx] : vix_groups) {
    const auto [T, rate] = key;
    std::vector<double> strikes;
    for (std::size_t i : idx) strikes.push_back(quotes.vix[i].strike());
    const VixOptionResult res = price_vix_options_exact(spec, strikes, T, rate, cfg.vix_plan, cfg.cos.solver);
    const double D = std::exp(-rate * T), fut = res.futures.value;
    const MarketFrame frame{fut * D, rate};
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const double K = strikes[j];
      double price = res.prices[j].value;
      OptionSide side = OptionSide::Call;
      if (K < fut) {
        price -= D * (fut - K);
        side = OptionSide::Put;
      }
      try {
        r.vix[idx[j]].model = implied_vol(std::max(price, 0.0), frame, {K, T, side});
      } catch (const NoSolutionError&) {
      }
    }
  }
  return r;
}

struct ObjectiveValue {
  double loss = std::numeric_limits<double>::infinity();
  Residuals residuals;
  std::size_t penalized = 0;
  std::string diagnostics;  // set when the pricer failed
};

// Sum over markets of the mean squared relative IV error; quotes without a model IV add 4.0 each
// to their market's sum. Pricer failures give +inf.
inline ObjectiveValue evaluate_objective(const ModelSpec& spec, const QuoteSet& quotes, const PricerConfig& cfg = {}) {
  ObjectiveValue out;
  try {
    validate(spec);
    out.residuals = model_residuals(spec, quotes, cfg);
  } catch (const Error& e) {
    out.diagnostics = e.what();
    return out;
  }
  for (const auto* v : {&out.residuals.spx, &out.residuals.vix})
    for (const auto& q : *v) out.penalized += q.penalized();
  out.loss = joint_loss(out.residuals);
  return out;
}

inline double objective(const ModelSpec& spec, const QuoteSet& quotes, const PricerConfig& cfg = {}) {
  ScopedWarningSink quiet([](const std::string&) {});
  return evaluate_objective(spec, quotes, cfg).loss;
}

// ---- calibration -----------------------------------------------------------------

struct CalibrationOptions {
  OptimizeOptions optimizer;
  PricerConfig pricer;
  bool identifiability = true;
};

struct CalibrationResult {
  std::string date;
  ModelSpec spec;
  double initial_loss = 0, loss = 0;
  Residuals residuals;
  MetricsReport metrics;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
  std::optional<Identifiability> identifiability;
};

namespace detail {

inline CalibrationResult finish(const std::string& date, const ModelSpec& spec, const QuoteSet& quotes,
                                const PricerConfig& pricer) {
  CalibrationResult r;
  r.date = date;
  r.spec = spec;
  ScopedWarningSink quiet([](const std::string&) {});
  const ObjectiveValue v = evaluate_objective(spec, quotes, pricer);
  r.loss = v.loss;
  r.residuals = v.residuals;
  r.metrics = metrics(v.residuals);
  return r;
}

inline void check_quotes(const QuoteSet& q) {
  validate(q);
  if (q.spx.empty() && q.vix.empty()) throw ValidationError("quote set " + q.date + " is empty");
}

}  // namespace detail

inline CalibrationResult calibrate_daily(const QuoteSet& quotes, const ParamSpace& space, const ModelSpec& init,
                                         const CalibrationOptions& opt = {}) {
  validate(space);
  detail::check_quotes(quotes);
  if (init.kind != space.kind) throw ValidationError("initial model kind differs from the parameter space");
  const std::vector<double> z0 = encode(space, init);
  std::vector<double> lo, hi;
  for (const auto& p : space.params) {
    const auto [a, b] = transformed_bounds(p);
    lo.push_back(a);
    hi.push_back(b);
  }
  const Objective f = [&](const std::vector<double>& z) { return objective(decode(space, z, init), quotes, opt.pricer); };
  const OptimizeResult o = minimize(f, z0, lo, hi, opt.optimizer);
  CalibrationResult r = detail::finish(quotes.date, decode(space, o.x, init), quotes, opt.pricer);
  r.initial_loss = o.trace.front().loss;
  r.evaluations = o.evaluations;
  r.converged = o.converged;
  r.trace = o.trace;
  if (opt.identifiability && std::isfinite(r.loss)) r.identifiability = identifiability(f, o.x, space.names());
  return r;
}

struct TwoStepResult {
  ModelSpec structural;  // fitted structural parameters; states taken from the last window date
  std::vector<CalibrationResult> window, out_of_sample;
  double window_loss = 0;  // summed objective over the window
  std::size_t evaluations = 0;
  bool converged = false;
};

// Step 1 fits shared structural parameters and per-date states over the window;
// step 2 holds the structure fixed and fits the states of each out-of-sample date.
inline TwoStepResult calibrate_two_step(const std::vector<QuoteSet>& window, const std::vector<QuoteSet>& oos,
                                        const ParamSpace& space, const ModelSpec& init,
                                        const CalibrationOptions& opt = {}) {
  validate(space);
  if (window.empty()) throw ValidationError("two-step calibration needs at least one window date");
  for (const auto& q : window) detail::check_quotes(q);
  for (const auto& q : oos) detail::check_quotes(q);
  const auto sidx = space.indices(false), vidx = space.indices(true);
  const std::vector<double> z_init = encode(space, init);
  std::vector<double> z0, lo, hi;
  auto push = [&](std::size_t i) {
    z0.push_back(z_init[i]);
    const auto [a, b] = transformed_bounds(space.params[i]);
    lo.push_back(a);
    hi.push_back(b);
  };
  for (std::size_t i : sidx) push(i);
  for (std::size_t t = 0; t < window.size(); ++t)
    for (std::size_t i : vidx) push(i);
  // Full parameter vector of date t from the stacked step-1 vector.
  auto unpack = [&](const std::vector<double>& x, std::size_t t) {
    std::vector<double> z(space.params.size());
    for (std::size_t k = 0; k < sidx.size(); ++k) z[sidx[k]] = x[k];
    for (std::size_t k = 0; k < vidx.size(); ++k) z[vidx[k]] = x[sidx.size() + t * vidx.size() + k];
    return z;
  };
  const Objective f = [&](const std::vector<double>& x) {
    double s = 0;
    for (std::size_t t = 0; t < window.size() && std::isfinite(s); ++t)
      s += objective(decode(space, unpack(x, t), init), window[t], opt.pricer);
    return s;
  };
  const OptimizeResult o = minimize(f, z0, lo, hi, opt.optimizer);
  TwoStepResult res;
  res.window_loss = o.loss;
  res.evaluations = o.evaluations;
  res.converged = o.converged;
  for (std::size_t t = 0; t < window.size(); ++t) {
    CalibrationResult r = detail::finish(window[t].date, decode(space, unpack(o.x, t), init), window[t], opt.pricer);
    r.converged = o.converged;
    r.trace = o.trace;
    res.window.push_back(std::move(r));
  }
  res.structural = res.window.back().spec;

  std::vector<double> state_lo, state_hi;
  for (std::size_t i : vidx) {
    const auto [a, b] = transformed_bounds(space.params[i]);
    state_lo.push_back(a);
    state_hi.push_back(b);
  }
  const std::vector<double> z_struct = encode(space, res.structural);
  for (const auto& q : oos) {
    if (vidx.empty()) {
      res.out_of_sample.push_back(detail::finish(q.date, res.structural, q, opt.pricer));
      res.out_of_sample.back().converged = true;
      continue;
    }
    std::vector<double> s0;
    for (std::size_t i : vidx) s0.push_back(z_struct[i]);
    auto full = [&](const std::vector<double>& s) {
      std::vector<double> z = z_struct;
      for (std::size_t k = 0; k < vidx.size(); ++k) z[vidx[k]] = s[k];
      return decode(space, z, res.structural);
    };
    const Objective g = [&](const std::vector<double>& s) { return objective(full(s), q, opt.pricer); };
    const OptimizeResult os = minimize(g, s0, state_lo, state_hi, opt.optimizer);
    CalibrationResult r = detail::finish(q.date, full(os.x), q, opt.pricer);
    r.initial_loss = os.trace.front().loss;
    r.evaluations = os.evaluations;
    r.converged = os.converged;
    r.trace = os.trace;
    res.evaluations += os.evaluations;
    res.out_of_sample.push_back(std::move(r));
  }
  return res;
}

}  // namespace ctc

#endif
