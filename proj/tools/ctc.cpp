// ctc: command-line front end for pricing, simulation, calibration and quote ingestion.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctc/calibration.hpp"
#include "ctc/cos.hpp"
#include "ctc/market.hpp"
#include "ctc/metrics.hpp"
#include "ctc/simulation.hpp"
#include "ctc/vix.hpp"

namespace fs = std::filesystem;
using namespace ctc;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << std::setprecision(10);
  return out;
}

// Output goes to --out when given, stdout otherwise.
struct Sink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file = open_out(path);
      os = &file;
    }
    *os << std::setprecision(10);
  }
  std::ostream& operator*() { return *os; }
};

OptionSide parse_side(const std::string& s, std::size_t row) {
  if (s == "C" || s == "c" || s == "call") return OptionSide::Call;
  if (s == "P" || s == "p" || s == "put") return OptionSide::Put;
  throw ValidationError("grid row " + std::to_string(row) + ": side must be C or P");
}

// CSV with header strike,maturity,side.
std::vector<EuropeanOption> read_grid(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("grid file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "strike,maturity,side") throw ValidationError("grid header must be 'strike,maturity,side'");
  std::vector<EuropeanOption> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 3) throw ValidationError("grid row " + std::to_string(row) + ": expected 3 fields");
    out.push_back({detail::parse_number(f[0], "strike", row), detail::parse_number(f[1], "maturity", row),
                   parse_side(f[2], row)});
  }
  return out;
}

MarketFrame parse_frame(const std::string& s) {
  const auto f = detail::split_csv(s);
  if (f.size() != 2) throw ValidationError("--frame expects S0,r");
  return {detail::parse_number(f[0], "S0", 0), detail::parse_number(f[1], "r", 0)};
}

// Geometric centre of log boxes, arithmetic centre otherwise.
ModelSpec centre_of(const ParamSpace& space) {
  ParamMap m;
  for (const auto& p : space.params)
    m[p.name] = p.transform == Transform::Log ? std::sqrt(p.lo * p.hi) : 0.5 * (p.lo + p.hi);
  for (const auto& [k, v] : space.fixed) m[k] = v;
  return from_param_map(space.kind, m);
}

void write_residuals(std::ostream& os, const std::string& date, const Residuals& r) {
  for (const auto* v : {&r.spx, &r.vix})
    for (const auto& q : *v)
      os << date << ',' << (v == &r.spx ? "SPX" : "VIX") << ',' << q.maturity << ',' << q.moneyness << ',' << q.market
         << ',' << (q.penalized() ? std::string("nan") : detail::fmt(q.model)) << '\n';
}

constexpr const char* kResidualHeader = "date,market,maturity,moneyness,market_iv,model_iv";
constexpr const char* kMetricsHeader = "date,sample,loss,rmsre,rmse_spx,rmse_vix,rmse_aggregate,mae,penalized,evaluations,converged";

void write_metrics_row(std::ostream& os, const CalibrationResult& r, const char* sample) {
  const auto& m = r.metrics;
  os << r.date << ',' << sample << ',' << r.loss << ',' << m.rmsre << ',' << m.rmse_spx << ',' << m.rmse_vix << ','
     << m.rmse_aggregate << ',' << m.mae << ',' << m.penalized << ',' << r.evaluations << ',' << (r.converged ? 1 : 0)
     << '\n';
}

std::map<std::string, Residuals> read_residuals(const fs::path& path) {
  auto in = open_in(path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResidualHeader) throw ValidationError(path.string() + ": header must be '" + kResidualHeader + "'");
  std::map<std::string, Residuals> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 6) throw ValidationError("residual row " + std::to_string(row) + ": expected 6 fields");
    Residual q{detail::parse_number(f[2], "maturity", row), detail::parse_number(f[3], "moneyness", row),
               detail::parse_number(f[4], "market_iv", row), std::numeric_limits<double>::quiet_NaN()};
    if (f[5] != "nan") q.model = detail::parse_number(f[5], "model_iv", row);
    (f[1] == "SPX" ? out[f[0]].spx : out[f[0]].vix).push_back(q);
  }
  return out;
}

// ---- subcommands -----------------------------------------------------------------

struct Args {
  std::string model, frame = "100,0", grid, out, quotes, curve, kind, mode = "daily", results, compare, init;
  std::vector<double> strikes;
  double maturity = 0.1, rate = 0.0, step = 1e-3;
  std::size_t paths = 100000, budget = 20000, window = 0, vix_paths = 4096;
  std::uint64_t seed = 1;
  std::string method = "exact";
  bool fast = false;
};

int price_european_cmd(const Args& a) {
  const ModelSpec spec = parse_config(slurp(a.model));
  const MarketFrame frame = parse_frame(a.frame);
  const auto grid = read_grid(a.grid);
  CosConfig cfg;
  if (a.fast) cfg = calibration_cos_config();
  const auto prices = price_surface(spec, frame, grid, cfg);
  Sink out(a.out);
  *out << "K,tau,side,price,iv\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::string iv = "nan";
    try {
      iv = detail::fmt(implied_vol(prices[i], frame, grid[i]));
    } catch (const NoSolutionError&) {
    }
    *out << grid[i].strike << ',' << grid[i].maturity << ',' << to_string(grid[i].side) << ',' << prices[i] << ',' << iv
         << '\n';
  }
  return 0;
}

int price_vix_cmd(const Args& a) {
  const ModelSpec spec = parse_config(slurp(a.model));
  std::vector<McEstimate> prices;
  if (a.method == "fourier") {
    for (double K : a.strikes) prices.push_back({vix_call_fourier_ordinary(spec, K, a.maturity, a.rate), 0.0});
  } else {
    SimPlan plan;
    plan.paths = a.paths;
    plan.seed = a.seed;
    prices = price_vix_options_exact(spec, a.strikes, a.maturity, a.rate, plan).prices;
  }
  Sink out(a.out);
  *out << "K,T,price,std_err\n";
  for (std::size_t i = 0; i < a.strikes.size(); ++i)
    *out << a.strikes[i] << ',' << a.maturity << ',' << prices[i].value << ',' << prices[i].std_error << '\n';
  return 0;
}

int simulate_cmd(const Args& a) {
  const ModelSpec spec = parse_config(slurp(a.model));
  SimPlan plan;
  plan.paths = a.paths;
  plan.seed = a.seed;
  plan.euler_step = a.step;
  const auto states = simulate_terminal_euler(spec, a.maturity, plan);
  Sink out(a.out);
  *out << "path,v,V,u,U,x\n";
  for (std::size_t p = 0; p < states.size(); ++p) {
    const auto& s = states[p];
    *out << p << ',' << s.v << ',' << s.V << ',' << s.u << ',' << s.U << ',' << s.x << '\n';
  }
  return 0;
}

int calibrate_cmd(const Args& a) {
  auto in = open_in(a.quotes);
  const auto sets = read_quote_sets(in);
  if (sets.empty()) throw ValidationError("no quote sets in '" + a.quotes + "'");
  const ModelKind kind = parse_model_kind(a.kind);
  const ParamSpace space = default_space(kind);
  ModelSpec init = a.init.empty() ? centre_of(space) : parse_config(slurp(a.init));
  if (init.kind != kind) throw ValidationError("--init model kind differs from --model");

  CalibrationOptions opt;
  opt.optimizer.budget = a.budget;
  opt.optimizer.seed = a.seed;
  opt.pricer.vix_plan.paths = a.vix_paths;
  opt.pricer.vix_plan.seed = a.seed;

  const fs::path dir = a.out.empty() ? fs::path("calibration") : fs::path(a.out);
  fs::create_directories(dir);
  auto metrics_csv = open_out(dir / "metrics.csv");
  auto residual_csv = open_out(dir / "residuals.csv");
  metrics_csv << kMetricsHeader << '\n';
  residual_csv << kResidualHeader << '\n';
  auto record = [&](const CalibrationResult& r, const char* sample) {
    write_metrics_row(metrics_csv, r, sample);
    write_residuals(residual_csv, r.date, r.residuals);
    auto cfg = open_out(dir / ("params_" + r.date + ".cfg"));
    cfg << write_config(r.spec);
    std::cerr << r.date << " (" << sample << "): loss " << r.loss << ", RMSRE " << r.metrics.rmsre << '\n';
  };

  if (a.mode == "daily") {
    for (const auto& q : sets) {
      const auto r = calibrate_daily(q, space, init, opt);
      record(r, "daily");
      if (r.identifiability && !r.identifiability->identifiable)
        for (const auto& [x, y] : r.identifiability->correlated)
          std::cerr << "  weakly identified pair: " << x << ", " << y << '\n';
    }
  } else if (a.mode == "two-step") {
    const std::size_t w = a.window == 0 ? sets.size() : a.window;
    if (w > sets.size()) throw ValidationError("--window exceeds the number of dates");
    const std::vector<QuoteSet> window(sets.begin(), sets.begin() + static_cast<long>(w));
    const std::vector<QuoteSet> oos(sets.begin() + static_cast<long>(w), sets.end());
    const auto r = calibrate_two_step(window, oos, space, init, opt);
    for (const auto& x : r.window) record(x, "window");
    for (const auto& x : r.out_of_sample) record(x, "out_of_sample");
    auto cfg = open_out(dir / "structural.cfg");
    cfg << write_config(r.structural);
  } else {
    throw ValidationError("--mode must be daily or two-step");
  }
  return 0;
}

int report_metrics_cmd(const Args& a) {
  const auto days = read_residuals(fs::path(a.results) / "residuals.csv");
  Sink out(a.out);
  // Bucket RMSRE averaged over the days on which the bucket is populated.
  struct Acc {
    double sum = 0;
    std::size_t days = 0, quotes = 0;
  };
  std::map<std::pair<std::string, std::size_t>, std::pair<std::string, Acc>> table;
  std::vector<double> daily;
  for (const auto& [date, r] : days) {
    const MetricsReport m = metrics(r);
    daily.push_back(m.rmsre);
    const std::pair<const char*, const std::vector<Bucket>*> parts[] = {
        {"SPX,moneyness", &m.spx_moneyness}, {"SPX,maturity", &m.spx_maturity},
        {"VIX,moneyness", &m.vix_moneyness}, {"VIX,maturity", &m.vix_maturity}};
    for (const auto& [name, buckets] : parts)
      for (std::size_t i = 0; i < buckets->size(); ++i) {
        const Bucket& b = (*buckets)[i];
        auto& [label, acc] = table[{std::string(name), i}];
        label = b.label;
        acc.quotes += b.count;
        if (b.rmsre) {
          acc.sum += *b.rmsre;
          ++acc.days;
        }
      }
  }
  std::optional<std::pair<std::size_t, double>> nw;
  if (!a.compare.empty()) {
    const auto other = read_residuals(fs::path(a.compare) / "residuals.csv");
    std::vector<double> x, y;
    for (const auto& [date, r] : days)
      if (auto it = other.find(date); it != other.end()) {
        x.push_back(rmsre(r));
        y.push_back(rmsre(it->second));
      }
    nw = {x.size(), newey_west_tstat(x, y)};
  }
  *out << "market,dimension,bucket,quotes,days,rmsre\n";
  for (const auto& [key, v] : table) {
    const auto& [label, acc] = v;
    *out << key.first << ',' << label << ',' << acc.quotes << ',' << acc.days << ','
         << (acc.days ? detail::fmt(acc.sum / static_cast<double>(acc.days)) : std::string("nan")) << '\n';
  }
  double mean = 0;
  for (double x : daily) mean += x / static_cast<double>(daily.size());
  *out << "ALL,overall,daily_mean," << days.size() << ',' << days.size() << ',' << mean << '\n';
  if (nw) *out << "ALL,newey_west_t,daily_rmsre," << nw->first << ',' << nw->first << ',' << nw->second << '\n';

  return 0;
}

int ingest_cmd(const Args& a) {
  auto qin = open_in(a.quotes);
  const auto raw = read_raw_quotes(qin);
  auto cin = open_in(a.curve);
  const YieldCurve curve = read_yield_curve(cin);
  const ForwardMap forwards = infer_forwards(raw, curve);
  const FilterResult f = filter_quotes(raw, forwards, curve);
  for (const auto& [rule, n] : f.removed) std::cerr << "removed by " << rule << ": " << n << '\n';
  std::cerr << "kept: " << f.survivors.size() << " of " << raw.size() << '\n';
  Sink out(a.out);
  write_quote_sets(*out, build_quote_sets(f.survivors, forwards, curve));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite time-change option pricing and calibration"};
  app.require_subcommand(1);
  Args a;

  auto* pe = app.add_subcommand("price-european", "COS prices and implied vols for a strike/maturity grid");
  pe->add_option("--model", a.model, "model config file")->required();
  pe->add_option("--frame", a.frame, "S0,r")->capture_default_str();
  pe->add_option("--grid", a.grid, "CSV with header strike,maturity,side")->required();
  pe->add_flag("--fast", a.fast, "use the reduced calibration configuration");
  pe->add_option("--out", a.out, "output CSV (default stdout)");

  auto* pv = app.add_subcommand("price-vix", "VIX call prices");
  pv->add_option("--model", a.model, "model config file")->required();
  pv->add_option("--K", a.strikes, "strikes")->required();
  pv->add_option("--T", a.maturity, "maturity in years")->required();
  pv->add_option("--rate", a.rate, "continuously compounded rate")->capture_default_str();
  pv->add_option("--paths", a.paths, "simulation paths")->capture_default_str();
  pv->add_option("--seed", a.seed, "random seed")->capture_default_str();
  pv->add_option("--method", a.method, "exact (simulation) or fourier (ordinary models)")
      ->check(CLI::IsMember({"exact", "fourier"}))
      ->capture_default_str();
  pv->add_option("--out", a.out, "output CSV (default stdout)");

  auto* sim = app.add_subcommand("simulate", "terminal Euler states");
  sim->add_option("--model", a.model, "model config file")->required();
  sim->add_option("--T", a.maturity, "horizon in years")->capture_default_str();
  sim->add_option("--paths", a.paths, "paths")->capture_default_str();
  sim->add_option("--step", a.step, "Euler step in years")->capture_default_str();
  sim->add_option("--seed", a.seed, "random seed")->capture_default_str();
  sim->add_option("--out", a.out, "output CSV (default stdout)");

  auto* cal = app.add_subcommand("calibrate", "fit a model to quote sets");
  cal->add_option("--quotes", a.quotes, "quote set CSV from ingest")->required();
  cal->add_option("--model", a.kind, "heston, composite-heston, jh or composite-jh")->required();
  cal->add_option("--mode", a.mode, "daily or two-step")->check(CLI::IsMember({"daily", "two-step"}))->capture_default_str();
  cal->add_option("--init", a.init, "starting model config (default: centre of the parameter box)");
  cal->add_option("--window", a.window, "two-step: number of window dates (default all)");
  cal->add_option("--seed", a.seed, "optimizer and VIX simulation seed")->capture_default_str();
  cal->add_option("--budget", a.budget, "objective evaluations")->capture_default_str();
  cal->add_option("--vix-paths", a.vix_paths, "paths for the VIX pricer")->capture_default_str();
  cal->add_option("--out", a.out, "results directory (default ./calibration)");

  auto* rep = app.add_subcommand("report-metrics", "bucketed RMSRE tables from a results directory");
  rep->add_option("--results", a.results, "directory written by calibrate")->required();
  rep->add_option("--compare", a.compare, "second results directory for a Newey-West t test");
  rep->add_option("--out", a.out, "output CSV (default stdout)");

  auto* ing = app.add_subcommand("ingest", "filter raw quotes and build quote sets");
  ing->add_option("--quotes", a.quotes, "raw quote CSV")->required();
  ing->add_option("--curve", a.curve, "yield curve CSV with header tenor,rate")->required();
  ing->add_option("--out", a.out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*pe) return price_european_cmd(a);
    if (*pv) return price_vix_cmd(a);
    if (*sim) return simulate_cmd(a);
    if (*cal) return calibrate_cmd(a);
    if (*rep) return report_metrics_cmd(a);
    if (*ing) return ingest_cmd(a);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
