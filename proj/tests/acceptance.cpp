// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ctc/calibration.hpp"
#include "ctc/chf.hpp"
#include "ctc/cos.hpp"
#include "ctc/metrics.hpp"
#include "ctc/simulation.hpp"
#include "ctc/vix.hpp"
#include "models.hpp"
#include "oracles.hpp"
#include "reference_grid.hpp"

using namespace ctc;

namespace {

using clk = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }

const MarketFrame kFrame{100.0, 0.0};

std::vector<EuropeanOption> grid_calls() {
  std::vector<EuropeanOption> out;
  for (const auto& p : kReferenceGrid) out.push_back({100.0 * p.moneyness, p.maturity, OptionSide::Call});
  return out;
}

std::vector<double> grid_prices() {
  static const std::vector<double> prices = price_surface(fixtures::composite_heston(), kFrame, grid_calls(), CosConfig{});
  return prices;
}

Outcome grid_prices_match() {
  const auto t0 = clk::now();
  const auto prices = price_surface(fixtures::composite_heston(), kFrame, grid_calls(), CosConfig{});
  const double secs = seconds_since(t0);
  double worst = 0;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    const double tol = std::max(5e-4, 1e-3 * kReferenceGrid[i].price);
    worst = std::max(worst, std::abs(prices[i] - kReferenceGrid[i].price) / tol);
  }
  return {worst <= 1.0 && secs < 10.0, fmt("worst error %.3f of tolerance, %zu points in %.2f s", worst, prices.size(), secs)};
}

Outcome grid_ivs_match() {
  const auto prices = grid_prices();
  const auto calls = grid_calls();
  double worst = 0;
  for (std::size_t i = 0; i < prices.size(); ++i)
    worst = std::max(worst, std::abs(implied_vol(prices[i], kFrame, calls[i]) - kReferenceGrid[i].iv));
  return {worst <= 2e-4, fmt("max |IV - published| = %.2e", worst)};
}

Outcome cos_vs_euler() {
  SimPlan plan;
  plan.paths = 100000;
  plan.euler_step = 1e-4;
  plan.seed = 20240101;
  const auto t0 = clk::now();
  const auto mc = euler_mc_european(fixtures::composite_heston(), kFrame, grid_calls(), plan);
  const auto cos = grid_prices();
  double worst = 0;
  for (std::size_t i = 0; i < cos.size(); ++i) worst = std::max(worst, std::abs(cos[i] - mc[i].value) / mc[i].std_error);
  return {worst <= 3.5, fmt("max |COS - MC| / stderr = %.2f (1e5 paths, step 1e-4, %.0f s)", worst, seconds_since(t0))};
}

Outcome degenerate_is_heston() {
  const ModelSpec h = fixtures::heston();
  const ModelSpec d = fixtures::degenerate_composite(h);
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> um(-30.0, 30.0), ut(0.05, 2.0);
  double chf_err = 0;
  for (int i = 0; i < 20; ++i) {
    const double t = ut(gen);
    const Complex m = um(gen);
    ChfRequest r;
    r.spec = d;
    r.maturities = {t};
    r.frequencies = {m};
    const Complex got = chf_X(r)[0][0];
    chf_err = std::max(chf_err, std::abs(got - oracle::heston_chf(h.u.kappa, h.u.theta, h.u.sigma, h.rho_u, h.u0, t, m)));
  }
  std::vector<EuropeanOption> opts;
  for (double T : {0.1, 0.5, 1.0})
    for (double K : {80.0, 90.0, 100.0, 110.0, 125.0}) opts.push_back({K, T, OptionSide::Call});
  const auto a = price_surface(d, kFrame, opts, CosConfig{});
  const auto b = price_surface(h, kFrame, opts, CosConfig{});
  double price_err = 0;
  for (std::size_t i = 0; i < a.size(); ++i) price_err = std::max(price_err, std::abs(a[i] - b[i]));
  return {chf_err <= 1e-7 && price_err <= 1e-6, fmt("chf max error %.2e, COS price max difference %.2e", chf_err, price_err)};
}

Outcome ordinary_vix_law() {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> uk(0.1, 20.0), ut(0.01, 0.5), uu(0.001, 1.0);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    ModelSpec s = fixtures::heston();
    s.u.kappa = uk(gen);
    s.u.theta = ut(gen);
    const double u = uu(gen), k = s.u.kappa, th = s.u.theta, tau = kVixTenor;
    const double want = th + (u - th) * (1 - std::exp(-k * tau)) / (k * tau);
    const double got = vix_spot_ordinary(s, u);
    worst = std::max(worst, std::abs(got * got - want));
  }
  return {worst <= 1e-10, fmt("max |VIX^2 - closed form| = %.2e over 100 points", worst)};
}

Outcome exact_simulation() {
  const ModelSpec s = fixtures::composite_heston();
  const double T = 0.1;
  SimPlan exact;
  exact.paths = 100000;
  exact.seed = 7;
  const auto t0 = clk::now();
  const auto vix_exact = sample_vix_exact(s, T, exact);
  SimPlan euler = exact;
  euler.seed = 8;
  euler.euler_step = 1e-4;
  const auto states = simulate_terminal_euler(s, T, euler);
  const VixAffine affine(s);
  std::vector<double> vix_euler;
  for (const auto& st : states) vix_euler.push_back(std::sqrt(std::max(affine.radicand(std::max(st.u, 0.0), std::max(st.v, 0.0)), 0.0)));
  const double fut = mc_estimate(vix_exact).value;
  double worst = 0;
  for (double k : {0.9, 1.0, 1.1}) {
    std::vector<double> pa, pb;
    for (double x : vix_exact) pa.push_back(std::max(x - k * fut, 0.0));
    for (double x : vix_euler) pb.push_back(std::max(x - k * fut, 0.0));
    const auto a = mc_estimate(pa), b = mc_estimate(pb);
    worst = std::max(worst, std::abs(a.value - b.value) / std::hypot(a.std_error, b.std_error));
  }

  // Integrated CIR: exact terminal draw plus the conditional sampler against fine Euler paths.
  const CirParams p = v_params(s);
  const std::size_t n = 10000;
  const IntegratedCirSampler sampler(p, T, 10);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    Xoshiro256 ra = path_stream(31, i), rb = path_stream(32, i);
    a[i] = sampler.sample(s.v0, sample_cir_terminal(p, s.v0, T, ra), ra);
    b[i] = oracle::euler_cir(p.kappa, p.theta, p.sigma, s.v0, T, 1000, rb).second;
  }
  const double ks = oracle::ks_two_sample(a, b), crit = oracle::ks_critical_1pct(n, n);
  return {worst <= 3.0 && ks < crit,
          fmt("VIX options max |exact - Euler| = %.2f sigma; KS %.4f vs 1%% critical %.4f (%.0f s)", worst, ks, crit,
              seconds_since(t0))};
}

Outcome martingale_parity_convexity() {
  double mart = 0;
  for (const ModelSpec& s : {fixtures::composite_heston(), fixtures::composite_jh(), fixtures::heston(), fixtures::jh()}) {
    ChfRequest r;
    r.spec = s;
    r.maturities = {0.02, 0.25, 1.0};
    r.frequencies = {Complex(0.0, -1.0)};
    for (const auto& row : chf_X(r)) mart = std::max(mart, std::abs(row[0] - 1.0));
  }
  std::vector<EuropeanOption> calls, puts;
  for (const auto& o : grid_calls()) {
    calls.push_back(o);
    puts.push_back({o.strike, o.maturity, OptionSide::Put});
  }
  const ModelSpec s = fixtures::composite_heston();
  const auto c = price_surface(s, kFrame, calls, CosConfig{});
  const auto p = price_surface(s, kFrame, puts, CosConfig{});
  double parity = 0;
  for (std::size_t i = 0; i < c.size(); ++i)
    parity = std::max(parity, std::abs(c[i] - p[i] - (kFrame.spot - calls[i].strike * kFrame.discount(calls[i].maturity))));
  double convex = std::numeric_limits<double>::infinity();
  for (double T : {0.05, 0.3, 1.0}) {
    std::vector<EuropeanOption> strip;
    for (double K = 60.0; K <= 150.0; K += 2.5) strip.push_back({K, T, OptionSide::Call});
    const auto v = price_surface(s, kFrame, strip, CosConfig{});
    for (std::size_t i = 1; i + 1 < v.size(); ++i) convex = std::min(convex, v[i - 1] - 2 * v[i] + v[i + 1]);
  }
  return {mart <= 1e-6 && parity <= 1e-9 && convex >= -1e-8,
          fmt("|chf(-i) - 1| <= %.1e, parity error %.1e, min second difference %.1e", mart, parity, convex)};
}

// ---- calibration -------------------------------------------------------------------

QuoteSet synthetic_day(const ModelSpec& s, const PricerConfig& pc, const std::string& date,
                       const std::vector<std::pair<double, double>>& spx, const std::vector<double>& vix_maturities,
                       const std::vector<double>& vix_moneyness) {
  QuoteSet qs;
  qs.date = date;
  for (const auto& [T, k] : spx) qs.spx.push_back({T, k, 0.2, 1, 100, 0});
  for (double T : vix_maturities) {
    const double fut = price_vix_options_exact(s, {0.2}, T, 0, pc.vix_plan).futures.value;
    for (double k : vix_moneyness) qs.vix.push_back({T, k, 0.5, 1, fut, 0});
  }
  const Residuals r = model_residuals(s, qs, pc);
  for (std::size_t i = 0; i < qs.spx.size(); ++i) qs.spx[i].iv = r.spx[i].model;
  for (std::size_t i = 0; i < qs.vix.size(); ++i) qs.vix[i].iv = r.vix[i].model;
  return qs;
}

ModelSpec perturbed(const ModelSpec& s, const ParamSpace& space) {
  ParamMap m = to_param_map(s);
  double sign = 1;
  for (const auto& p : space.params) {
    m[p.name] *= 1 + 0.2 * sign;
    sign = -sign;
  }
  return from_param_map(s.kind, m);
}

PricerConfig acceptance_pricer() {
  PricerConfig pc;
  pc.vix_plan.paths = 1024;
  return pc;
}

Outcome daily_round_trip() {
  const ModelSpec s = fixtures::composite_heston();
  const PricerConfig pc = acceptance_pricer();
  std::vector<std::pair<double, double>> spx;
  for (const auto& p : kReferenceGrid) spx.push_back({p.maturity, p.moneyness});
  const QuoteSet qs = synthetic_day(s, pc, "2024-01-02", spx, {0.1, 0.3}, {0.8, 0.9, 1.0, 1.2, 1.5});
  const auto space = default_space(s.kind);
  CalibrationOptions o;
  o.pricer = pc;
  o.optimizer.budget = 20000;
  o.optimizer.de_fraction = 0.0;
  o.optimizer.target_loss = 2.5e-5;
  o.identifiability = false;
  const auto t0 = clk::now();
  const auto r = calibrate_daily(qs, space, perturbed(s, space), o);
  const bool ok = qs.spx.size() + qs.vix.size() == 57 && r.loss < 1e-4 && r.metrics.rmsre < 0.005 && r.evaluations <= 20000;
  return {ok, fmt("57 quotes: loss %.2e (start %.2e), RMSRE %.4f after %zu evaluations (%.0f s)", r.loss, r.initial_loss,
                  r.metrics.rmsre, r.evaluations, seconds_since(t0))};
}

Outcome two_step_states() {
  const ModelSpec truth = fixtures::composite_heston();
  const PricerConfig pc = acceptance_pricer();
  std::vector<std::pair<double, double>> spx;
  for (double T : {0.1, 0.25, 0.5})
    for (double k : {0.9, 0.95, 1.0, 1.05, 1.1}) spx.push_back({T, k});
  const double U[] = {0.02, 0.04, 0.06}, V[] = {1.3, 1.0, 1.6};
  std::vector<QuoteSet> window;
  for (int d = 0; d < 3; ++d) {
    ModelSpec x = truth;
    x.u0 = U[d];
    x.v0 = V[d];
    window.push_back(synthetic_day(x, pc, "2024-01-0" + std::to_string(d + 2), spx, {0.1}, {0.9, 1.0, 1.2, 1.5}));
  }
  const auto space = default_space(truth.kind);
  ModelSpec centre = truth;
  centre.u0 = 0.04;
  centre.v0 = 1.3;
  CalibrationOptions o;
  o.pricer = pc;
  o.optimizer.budget = 20000;
  o.optimizer.de_fraction = 0.0;
  o.optimizer.target_loss = 1e-6;
  o.identifiability = false;
  const auto t0 = clk::now();
  const auto r = calibrate_two_step(window, {}, space, perturbed(centre, space), o);
  double raw = 0, invariant = 0;
  for (int d = 0; d < 3; ++d) {
    const ModelSpec& f = r.window[d].spec;
    raw = std::max({raw, std::abs(f.u0 / U[d] - 1), std::abs(f.v0 / V[d] - 1)});
    // Products unchanged by the clock rescaling u -> c u, v -> v / c.
    invariant = std::max({invariant, std::abs(f.u0 * f.v0 / (U[d] * V[d]) - 1),
                          std::abs(f.v0 / f.v->theta / (V[d] / truth.v->theta) - 1)});
  }
  return {raw <= 0.05,
          fmt("max state error %.1f%% (scale-free combinations %.1f%%), window loss %.2e, %zu evaluations (%.0f s)",
              100 * raw, 100 * invariant, r.window_loss, r.evaluations, seconds_since(t0))};
}

Outcome calibration_round_trip() {
  const Outcome daily = daily_round_trip();
  const Outcome two = two_step_states();
  return {daily.pass && two.pass, "daily: " + daily.detail + (daily.pass ? " [ok]" : " [fail]") + "; two-step: " +
                                      two.detail + (two.pass ? " [ok]" : " [fail]")};
}

// ---- metrics -----------------------------------------------------------------------

Outcome metric_fixtures() {
  auto res = [](double tau, double k, double market, double model) { return Residual{tau, k, market, model}; };
  auto market = [](const Residual& q) { return q.market; };
  std::vector<std::string> bad;
  auto check = [&](const char* name, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) bad.push_back(fmt("%s %.10g vs %.10g", name, got, want));
  };

  Residuals day;
  day.spx = {res(0.1, 0.95, 0.20, 0.22), res(0.1, 1.05, 0.25, 0.24)};
  day.vix = {res(0.1, 1.0, 1.00, 1.05), res(0.1, 1.2, 0.80, 0.80)};
  check("rmsre", rmsre(day), 0.0557565351, 1e-10);
  check("loss", joint_loss(day), (0.01 + 0.0016) / 2 + 0.0025 / 2, 1e-15);

  Residuals flat;
  for (double tau : {20 / 365.0, 0.1, 0.5})
    for (double k : {0.7, 0.85, 0.95, 1.0, 1.05, 1.2}) flat.spx.push_back(res(tau, k, 0.2, 0.2 * 1.02));
  for (const auto& b : metrics(flat).spx_moneyness)
    if (b.rmsre) check("bucket", *b.rmsre, 0.02, 1e-12);

  const std::vector<Residual> atm{res(0.1, std::exp(-0.01), 0.20, 0.20), res(0.1, std::exp(0.01), 0.22, 0.22)};
  const auto a = atm_iv(atm, market);
  check("atm", a.value_or(NAN), 0.21, 1e-15);

  const std::vector<Residual> slice{res(0.1, 0.68, 0.30, 0.30), res(0.1, 0.72, 0.28, 0.28), res(0.1, 1.2, 0.15, 0.15)};
  check("skew", skew(slice, 0.7, 1.2, market).value_or(NAN), (0.30 - 0.15) / (std::log(0.68) - std::log(1.2)), 1e-14);

  const std::vector<Residual> near{res(30 / 365.0, 0.95, 0.2, 0.22), res(30 / 365.0, 1.05, 0.2, 0.21),
                                   res(30 / 365.0, 1.3, 0.2, 0.5), res(60 / 365.0, 1.0, 0.2, 0.18),
                                   res(200 / 365.0, 1.0, 0.2, 0.1)};
  check("near-money", near_money_rmsre(near, 0.9, 1.1, 90).value_or(NAN),
        0.5 * (std::sqrt(0.01 + 0.0025) + std::sqrt(0.01)), 1e-14);

  const std::vector<double> d{0.3, -0.1, 0.5, 0.2, 0.9, -0.4, 0.1, 0.6, 0.0, 0.4};
  const double T = static_cast<double>(d.size());
  double mean = 0, g0 = 0, g1 = 0;
  for (double x : d) mean += x / T;
  for (std::size_t t = 0; t < d.size(); ++t) g0 += (d[t] - mean) * (d[t] - mean) / T;
  for (std::size_t t = 1; t < d.size(); ++t) g1 += (d[t] - mean) * (d[t - 1] - mean) / T;
  check("newey-west", newey_west_tstat(d, std::vector<double>(d.size(), 0.0)), mean / std::sqrt((g0 + g1) / T), 1e-12);

  std::string detail = "RMSRE, loss, buckets, ATM IV, skew, near-money RMSRE and Newey-West t match hand values";
  if (!bad.empty()) {
    detail = "mismatch:";
    for (const auto& b : bad) detail += " " + b + ";";
  }
  return {bad.empty(), detail};
}

Outcome small_tenor() {
  std::vector<double> taus;
  for (int day = 1; day <= 30; ++day) taus.push_back(day / 365.0);
  const auto r = smalltau_diagnostics(fixtures::composite_heston(), 0.02, 1.3, taus);
  return {r.r_squared > 0.99, fmt("R^2 = %.5f, slope %.4f (first-order prediction %.4f)", r.r_squared, r.slope,
                                  r.first_order_slope)};
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  ScopedWarningSink quiet([](const std::string&) {});
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"reference grid prices", grid_prices_match},
      {"reference grid implied vols", grid_ivs_match},
      {"COS vs Euler Monte Carlo", cos_vs_euler},
      {"degenerate clock equals Heston", degenerate_is_heston},
      {"ordinary Heston VIX formula", ordinary_vix_law},
      {"exact simulation vs Euler", exact_simulation},
      {"martingale, parity, convexity", martingale_parity_convexity},
      {"calibration round trip", calibration_round_trip},
      {"metric suite fixtures", metric_fixtures},
      {"small-tenor VIX expansion", small_tenor},
  };
  std::vector<bool> run(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) run[k - 1] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!run[i]) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu (%s): %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
