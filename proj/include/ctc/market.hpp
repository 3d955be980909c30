#ifndef CTC_MARKET_HPP
#define CTC_MARKET_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ctc/cos.hpp"
#include "ctc/errors.hpp"
#include "ctc/math.hpp"

namespace ctc {

enum class Underlying { SPX, VIX };
enum class Settlement { AM, PM };

inline std::string to_string(Underlying u) { return u == Underlying::SPX ? "SPX" : "VIX"; }
inline std::string to_string(Settlement s) { return s == Settlement::AM ? "AM" : "PM"; }
inline std::string to_string(OptionSide s) { return s == OptionSide::Call ? "C" : "P"; }

// ISO yyyy-mm-dd, validated.
inline std::chrono::sys_days parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || s.size() != 10)
    throw ValidationError("bad date '" + s + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw ValidationError("bad date '" + s + "'");
  return std::chrono::sys_days{ymd};
}

inline long days_between(const std::string& from, const std::string& to) {
  return (parse_date(to) - parse_date(from)).count();
}

struct RawQuote {
  std::string date;
  Underlying underlying = Underlying::SPX;
  std::string expiry;
  Settlement settlement = Settlement::PM;
  double strike = 0;
  OptionSide side = OptionSide::Call;
  std::optional<double> iv, price;
  double volume = 0;
};

inline constexpr const char* kRawQuoteHeader = "date,underlying,expiry,settlement,strike,side,iv,price,volume";

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    out.push_back(cur);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, const std::string& what, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("row " + std::to_string(row) + ": bad " + what + " '" + s + "'");
  }
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::vector<RawQuote> read_raw_quotes(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("quote file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRawQuoteHeader) throw ValidationError(std::string("quote header must be '") + kRawQuoteHeader + "'");
  std::vector<RawQuote> out;
  std::set<std::tuple<std::string, int, std::string, double, int>> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 9) throw ValidationError("row " + std::to_string(row) + ": expected 9 fields");
    RawQuote q;
    q.date = f[0];
    parse_date(q.date);
    if (f[1] == "SPX") q.underlying = Underlying::SPX;
    else if (f[1] == "VIX") q.underlying = Underlying::VIX;
    else throw ValidationError("row " + std::to_string(row) + ": underlying must be SPX or VIX");
    q.expiry = f[2];
    parse_date(q.expiry);
    if (f[3] == "AM") q.settlement = Settlement::AM;
    else if (f[3] == "PM") q.settlement = Settlement::PM;
    else throw ValidationError("row " + std::to_string(row) + ": settlement must be AM or PM");
    q.strike = detail::parse_number(f[4], "strike", row);
    if (!(q.strike > 0)) throw ValidationError("row " + std::to_string(row) + ": strike must be positive");
    if (f[5] == "C") q.side = OptionSide::Call;
    else if (f[5] == "P") q.side = OptionSide::Put;
    else throw ValidationError("row " + std::to_string(row) + ": side must be C or P");
    if (!f[6].empty()) q.iv = detail::parse_number(f[6], "iv", row);
    if (!f[7].empty()) q.price = detail::parse_number(f[7], "price", row);
    if (!q.iv && !q.price) throw ValidationError("row " + std::to_string(row) + ": needs iv or price");
    q.volume = detail::parse_number(f[8], "volume", row);
    const auto key = std::make_tuple(q.date, static_cast<int>(q.underlying), q.expiry, q.strike, static_cast<int>(q.side));
    if (!seen.insert(key).second) throw ValidationError("row " + std::to_string(row) + ": duplicate quote");
    out.push_back(std::move(q));
  }
  return out;
}

inline void write_raw_quotes(std::ostream& os, const std::vector<RawQuote>& quotes) {
  os << kRawQuoteHeader << '\n';
  for (const auto& q : quotes)
    os << q.date << ',' << to_string(q.underlying) << ',' << q.expiry << ',' << to_string(q.settlement) << ','
       << detail::fmt(q.strike) << ',' << to_string(q.side) << ',' << (q.iv ? detail::fmt(*q.iv) : "") << ','
       << (q.price ? detail::fmt(*q.price) : "") << ',' << detail::fmt(q.volume) << '\n';
}

// Calendar days to expiry; AM-settled SPX expiries count one day less.
inline long maturity_days(const RawQuote& q) {
  long d = days_between(q.date, q.expiry);
  if (q.underlying == Underlying::SPX && q.settlement == Settlement::AM) --d;
  return d;
}

inline double maturity_years(const RawQuote& q) { return static_cast<double>(maturity_days(q)) / 365.0; }

// ---- yield curve --------------------------------------------------------------

// Natural cubic spline through (tenor, rate) with flat extrapolation outside the knots.
class YieldCurve {
 public:
  YieldCurve() = default;
  YieldCurve(std::vector<double> tenors, std::vector<double> rates) : t_(std::move(tenors)), r_(std::move(rates)) {
    if (t_.empty() || t_.size() != r_.size()) throw ValidationError("yield curve needs matching, non-empty tenors and rates");
    for (std::size_t i = 0; i < t_.size(); ++i) {
      if (!std::isfinite(t_[i]) || !std::isfinite(r_[i])) throw ValidationError("yield curve values must be finite");
      if (i > 0 && !(t_[i] > t_[i - 1])) throw ValidationError("yield curve tenors must be strictly increasing");
    }
    const std::size_t n = t_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> lo(n - 2), di(n - 2), up(n - 2), rhs(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = t_[i] - t_[i - 1], h1 = t_[i + 1] - t_[i];
      lo[i - 1] = h0;
      di[i - 1] = 2 * (h0 + h1);
      up[i - 1] = h1;
      rhs[i - 1] = 6 * ((r_[i + 1] - r_[i]) / h1 - (r_[i] - r_[i - 1]) / h0);
    }
    solve_tridiagonal(lo, di, up, rhs);
    for (std::size_t i = 1; i + 1 < n; ++i) m_[i] = rhs[i - 1];
  }

  bool empty() const { return t_.empty(); }
  const std::vector<double>& tenors() const { return t_; }
  const std::vector<double>& rates() const { return r_; }

  double operator()(double tenor) const {
    if (t_.empty()) throw ValidationError("empty yield curve");
    if (tenor <= t_.front()) return r_.front();
    if (tenor >= t_.back()) return r_.back();
    const std::size_t i = static_cast<std::size_t>(std::upper_bound(t_.begin(), t_.end(), tenor) - t_.begin()) - 1;
    const double h = t_[i + 1] - t_[i], a = (t_[i + 1] - tenor) / h, b = (tenor - t_[i]) / h;
    return a * r_[i] + b * r_[i + 1] + ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> t_, r_, m_;
};

inline double rate_at(const YieldCurve& curve, double tenor) {
  if (curve.empty()) throw ValidationError("empty yield curve");
  if (!(tenor > 0)) throw ValidationError("tenor must be positive");
  return curve(tenor);
}

// CSV with header tenor,rate.
inline YieldCurve read_yield_curve(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("curve file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "tenor,rate") throw ValidationError("curve header must be 'tenor,rate'");
  std::vector<double> t, r;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 2) throw ValidationError("curve row " + std::to_string(row) + ": expected tenor,rate");
    t.push_back(detail::parse_number(f[0], "tenor", row));
    r.push_back(detail::parse_number(f[1], "rate", row));
  }
  return YieldCurve(std::move(t), std::move(r));
}

// ---- forwards -----------------------------------------------------------------

using ExpiryKey = std::tuple<std::string, Underlying, std::string>;  // date, underlying, expiry

inline ExpiryKey expiry_key(const RawQuote& q) { return {q.date, q.underlying, q.expiry}; }

// F = K + (C - P) e^{r tau} from the call/put pair with the strike closest to `spot`;
// without a spot, the pair with the smallest |C - P| (the strike nearest the forward).
inline double infer_forward(const std::vector<RawQuote>& group, double rate, double tau,
                            std::optional<double> spot = std::nullopt) {
  std::map<double, std::pair<std::optional<double>, std::optional<double>>> pairs;
  for (const auto& q : group) {
    if (!q.price) continue;
    auto& p = pairs[q.strike];
    (q.side == OptionSide::Call ? p.first : p.second) = *q.price;
  }
  std::optional<double> best_f;
  double best_score = 0;
  for (const auto& [K, cp] : pairs) {
    if (!cp.first || !cp.second) continue;
    const double diff = *cp.first - *cp.second;
    const double score = spot ? std::abs(K - *spot) : std::abs(diff);
    if (!best_f || score < best_score) {
      best_score = score;
      best_f = K + diff * std::exp(rate * tau);
    }
  }
  if (!best_f) throw ForwardUnavailable("no call/put pair with prices at a common strike");
  return *best_f;
}

using ForwardMap = std::map<ExpiryKey, double>;

inline std::map<ExpiryKey, std::vector<RawQuote>> group_by_expiry(const std::vector<RawQuote>& raw) {
  std::map<ExpiryKey, std::vector<RawQuote>> g;
  for (const auto& q : raw) g[expiry_key(q)].push_back(q);
  return g;
}

// Expiries without a usable pair are skipped with a warning.
inline ForwardMap infer_forwards(const std::vector<RawQuote>& raw, const YieldCurve& curve) {
  ForwardMap out;
  for (const auto& [key, group] : group_by_expiry(raw)) {
    const double tau = maturity_years(group.front());
    if (!(tau > 0)) continue;
    try {
      out[key] = infer_forward(group, rate_at(curve, tau), tau);
    } catch (const ForwardUnavailable&) {
      warn("forward unavailable for " + std::get<0>(key) + " " + to_string(std::get<1>(key)) + " " +
           std::get<2>(key) + "; expiry dropped");
    }
  }
  return out;
}

// ---- filters --------------------------------------------------------------------

struct FilterConfig {
  long spx_min_days = 7, spx_max_days = 365;
  long vix_min_days = 7, vix_max_days = 160;
  double spx_min_moneyness = 0.5, spx_max_moneyness = 1.4;
  double vix_min_moneyness = 0.7, vix_max_moneyness = 2.5;
  bool drop_zero_volume = true;
  bool drop_itm = true;
  bool arbitrage_screen = true;
};

struct FilterResult {
  std::vector<RawQuote> survivors;
  std::map<std::string, std::size_t> removed;  // rule -> count
};

namespace detail {

// Call-equivalent price of a quote given the forward.
inline double call_equivalent(const RawQuote& q, double F, double rate, double tau) {
  const double D = std::exp(-rate * tau);
  const MarketFrame frame{F * D, rate};
  double p = 0;
  if (q.price) p = *q.price;
  else p = black_scholes(frame, {q.strike, tau, q.side}, *q.iv);
  return q.side == OptionSide::Call ? p : p + D * (F - q.strike);
}

// Indices to drop so the remaining call prices are monotone, convex and spread-bounded.
inline std::vector<std::size_t> arbitrage_violators(std::vector<std::pair<double, double>> kc, double discount,
                                                    double tol) {
  std::vector<std::size_t> idx(kc.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<std::size_t> dropped;
  for (;;) {
    std::vector<std::size_t> order = idx;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return kc[a].first < kc[b].first; });
    std::map<std::size_t, double> score;
    for (std::size_t j = 0; j + 1 < order.size(); ++j) {
      const auto [k0, c0] = kc[order[j]];
      const auto [k1, c1] = kc[order[j + 1]];
      if (k1 - k0 <= 0) continue;
      double v = std::max(0.0, c1 - c0) + std::max(0.0, (c0 - c1) - discount * (k1 - k0));
      if (v > tol) {
        score[order[j]] += v;
        score[order[j + 1]] += v;
      }
      if (j + 2 < order.size()) {
        const auto [k2, c2] = kc[order[j + 2]];
        if (k2 - k1 <= 0) continue;
        const double s0 = (c1 - c0) / (k1 - k0), s1 = (c2 - c1) / (k2 - k1);
        const double w = std::max(0.0, s0 - s1) * std::min(k1 - k0, k2 - k1);
        if (w > tol) {
          score[order[j]] += w;
          score[order[j + 1]] += w;
          score[order[j + 2]] += w;
        }
      }
    }
    if (score.empty()) return dropped;
    std::size_t worst = score.begin()->first;
    for (const auto& [i, s] : score)
      if (s > score[worst]) worst = i;
    dropped.push_back(worst);
    idx.erase(std::find(idx.begin(), idx.end(), worst));
  }
}

}  // namespace detail

inline FilterResult filter_quotes(const std::vector<RawQuote>& raw, const ForwardMap& forwards, const YieldCurve& curve,
                                  const FilterConfig& cfg = {}) {
  if (cfg.spx_min_days > cfg.spx_max_days || cfg.vix_min_days > cfg.vix_max_days ||
      cfg.spx_min_moneyness > cfg.spx_max_moneyness || cfg.vix_min_moneyness > cfg.vix_max_moneyness)
    throw ValidationError("filter windows must be non-empty");
  FilterResult res;
  for (const char* rule : {"forward", "volume", "maturity", "moneyness", "itm", "arbitrage"}) res.removed[rule] = 0;
  std::map<ExpiryKey, std::vector<RawQuote>> kept;
  for (const auto& q : raw) {
    const auto it = forwards.find(expiry_key(q));
    if (it == forwards.end()) { ++res.removed["forward"]; continue; }
    const double F = it->second;
    const bool spx = q.underlying == Underlying::SPX;
    if (cfg.drop_zero_volume && !(q.volume > 0)) { ++res.removed["volume"]; continue; }
    const long days = maturity_days(q);
    if (days < (spx ? cfg.spx_min_days : cfg.vix_min_days) || days > (spx ? cfg.spx_max_days : cfg.vix_max_days)) {
      ++res.removed["maturity"];
      continue;
    }
    const double k = q.strike / F;
    if (k < (spx ? cfg.spx_min_moneyness : cfg.vix_min_moneyness) ||
        k > (spx ? cfg.spx_max_moneyness : cfg.vix_max_moneyness)) {
      ++res.removed["moneyness"];
      continue;
    }
    if (cfg.drop_itm && ((q.side == OptionSide::Call && q.strike < F) || (q.side == OptionSide::Put && q.strike > F))) {
      ++res.removed["itm"];
      continue;
    }
    kept[expiry_key(q)].push_back(q);
  }
  for (auto& [key, group] : kept) {
    if (cfg.arbitrage_screen && group.size() > 1) {
      const double F = forwards.at(key), tau = maturity_years(group.front()), r = rate_at(curve, tau);
      std::vector<std::pair<double, double>> kc;
      for (const auto& q : group) kc.emplace_back(q.strike, detail::call_equivalent(q, F, r, tau));
      auto bad = detail::arbitrage_violators(kc, std::exp(-r * tau), 1e-10 * F);
      std::sort(bad.rbegin(), bad.rend());
      for (std::size_t i : bad) group.erase(group.begin() + static_cast<long>(i));
      res.removed["arbitrage"] += bad.size();
    }
    for (auto& q : group) res.survivors.push_back(std::move(q));
  }
  if (res.survivors.empty()) warn("filter_quotes: no quotes survive");
  return res;
}

// ---- quote sets -----------------------------------------------------------------

struct MarketQuote {
  double maturity = 0;   // years
  double moneyness = 0;  // K / F
  double iv = 0;
  double volume = 0;
  double forward = 0;
  double rate = 0;

  double strike() const { return moneyness * forward; }
  MarketFrame frame() const { return {forward * std::exp(-rate * maturity), rate}; }
  bool operator==(const MarketQuote&) const = default;
};

struct QuoteSet {
  std::string date;
  std::vector<MarketQuote> spx, vix;
  bool operator==(const QuoteSet&) const = default;
};

inline void validate(const QuoteSet& qs) {
  for (const auto* v : {&qs.spx, &qs.vix})
    for (const auto& q : *v)
      if (!(q.iv > 0) || !(q.moneyness > 0) || !(q.maturity > 0) || !(q.forward > 0))
        throw ValidationError("quote set " + qs.date + ": IV, moneyness, maturity and forward must be positive");
}

// Groups survivors by date; quotes without an IV get one from their price.
inline std::vector<QuoteSet> build_quote_sets(const std::vector<RawQuote>& survivors, const ForwardMap& forwards,
                                              const YieldCurve& curve) {
  std::map<std::string, QuoteSet> by_date;
  for (const auto& q : survivors) {
    const double F = forwards.at(expiry_key(q)), tau = maturity_years(q), r = rate_at(curve, tau);
    MarketQuote m{tau, q.strike / F, 0.0, q.volume, F, r};
    if (q.iv) m.iv = *q.iv;
    else m.iv = implied_vol(*q.price, m.frame(), {q.strike, tau, q.side});
    QuoteSet& s = by_date[q.date];
    s.date = q.date;
    (q.underlying == Underlying::SPX ? s.spx : s.vix).push_back(m);
  }
  std::vector<QuoteSet> out;
  for (auto& [d, s] : by_date) out.push_back(std::move(s));
  return out;
}

inline constexpr const char* kQuoteSetHeader = "date,market,maturity,moneyness,iv,volume,forward,rate";

inline void write_quote_sets(std::ostream& os, const std::vector<QuoteSet>& sets) {
  os << kQuoteSetHeader << '\n';
  for (const auto& s : sets)
    for (const auto* v : {&s.spx, &s.vix})
      for (const auto& q : *v)
        os << s.date << ',' << (v == &s.spx ? "SPX" : "VIX") << ',' << detail::fmt(q.maturity) << ','
           << detail::fmt(q.moneyness) << ',' << detail::fmt(q.iv) << ',' << detail::fmt(q.volume) << ','
           << detail::fmt(q.forward) << ',' << detail::fmt(q.rate) << '\n';
}

inline std::vector<QuoteSet> read_quote_sets(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("quote set file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kQuoteSetHeader) throw ValidationError(std::string("quote set header must be '") + kQuoteSetHeader + "'");
  std::vector<QuoteSet> out;
  std::map<std::string, std::size_t> index;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 8) throw ValidationError("row " + std::to_string(row) + ": expected 8 fields");
    parse_date(f[0]);
    if (!index.count(f[0])) {
      index[f[0]] = out.size();
      out.push_back({f[0], {}, {}});
    }
    MarketQuote q{detail::parse_number(f[2], "maturity", row), detail::parse_number(f[3], "moneyness", row),
                  detail::parse_number(f[4], "iv", row),       detail::parse_number(f[5], "volume", row),
                  detail::parse_number(f[6], "forward", row),  detail::parse_number(f[7], "rate", row)};
    QuoteSet& s = out[index[f[0]]];
    if (f[1] == "SPX") s.spx.push_back(q);
    else if (f[1] == "VIX") s.vix.push_back(q);
    else throw ValidationError("row " + std::to_string(row) + ": market must be SPX or VIX");
  }
  for (const auto& s : out) validate(s);
  return out;
}

}  // namespace ctc

#endif
