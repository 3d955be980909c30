#ifndef CTC_METRICS_HPP
#define CTC_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctc/errors.hpp"

namespace ctc {

// Relative error charged to a quote whose model price has no implied vol.
inline constexpr double kPenaltyRelativeError = 2.0;

struct Residual {
  double maturity = 0;   // years
  double moneyness = 0;  // K / F
  double market = 0;     // market IV
  double model = std::numeric_limits<double>::quiet_NaN();

  bool penalized() const { return !std::isfinite(model); }
  double relative_error() const { return penalized() ? kPenaltyRelativeError : (model - market) / market; }
  double absolute_error() const { return penalized() ? kPenaltyRelativeError * market : model - market; }
};

struct Residuals {
  std::vector<Residual> spx, vix;
};

struct Bucket {
  std::string label;
  double lo = 0, hi = 0;  // [lo, hi)
  std::size_t count = 0;
  std::optional<double> rmsre;
};

struct TermValue {
  double maturity = 0;
  std::optional<double> market, model;  // empty when the anchors are missing
};

struct MarketCharacteristics {
  std::vector<TermValue> atm_iv, skew;
};

struct MetricsReport {
  double rmsre = 0;
  double rmse_spx = 0, rmse_vix = 0, rmse_aggregate = 0;
  double mae = 0;
  std::size_t penalized = 0;
  std::vector<Bucket> spx_moneyness, spx_maturity, vix_moneyness, vix_maturity;
  MarketCharacteristics spx, vix;
  std::optional<double> near_money_spx, near_money_vix;
};

namespace detail {

inline double mean_sq(const std::vector<Residual>& r, bool relative) {
  if (r.empty()) return 0.0;
  double s = 0;
  for (const auto& q : r) {
    const double e = relative ? q.relative_error() : q.absolute_error();
    s += e * e;
  }
  return s / static_cast<double>(r.size());
}

inline std::map<double, std::vector<Residual>> by_maturity(const std::vector<Residual>& r) {
  std::map<double, std::vector<Residual>> out;
  for (const auto& q : r) out[q.maturity].push_back(q);
  return out;
}

inline std::vector<Bucket> buckets(const std::vector<Residual>& r, const std::vector<double>& edges, bool by_days,
                                   const std::vector<std::string>& labels) {
  std::vector<Bucket> out;
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= edges.size(); ++i) {
    Bucket b{labels[i], i == 0 ? -inf : edges[i - 1], i == edges.size() ? inf : edges[i], 0, std::nullopt};
    double s = 0;
    for (const auto& q : r) {
      const double x = by_days ? q.maturity * 365.0 : q.moneyness;
      if (x >= b.lo && x < b.hi) {
        s += q.relative_error() * q.relative_error();
        ++b.count;
      }
    }
    if (b.count) b.rmsre = std::sqrt(s / static_cast<double>(b.count));
    out.push_back(b);
  }
  return out;
}

}  // namespace detail

// Half-sum of the per-market root mean squared relative IV errors.
inline double rmsre(const Residuals& r) {
  return 0.5 * std::sqrt(detail::mean_sq(r.spx, true)) + 0.5 * std::sqrt(detail::mean_sq(r.vix, true));
}

// Mean squared relative error per market, summed: the calibration loss.
inline double joint_loss(const Residuals& r) { return detail::mean_sq(r.spx, true) + detail::mean_sq(r.vix, true); }

// Linear interpolation in log moneyness between the nearest quotes on each side of k = 0.
// `iv` picks market or model IV from a residual.
template <class Pick>
std::optional<double> atm_iv(const std::vector<Residual>& slice, Pick iv) {
  const Residual* lo = nullptr;
  const Residual* hi = nullptr;
  for (const auto& q : slice) {
    const double k = std::log(q.moneyness);
    if (k == 0.0) return iv(q);
    if (k < 0 && (!lo || k > std::log(lo->moneyness))) lo = &q;
    if (k > 0 && (!hi || k < std::log(hi->moneyness))) hi = &q;
  }
  if (!lo || !hi) return std::nullopt;
  const double km = std::log(lo->moneyness), kp = std::log(hi->moneyness);
  const double a = iv(*lo), b = iv(*hi);
  if (!std::isfinite(a) || !std::isfinite(b)) return std::nullopt;
  return kp / (kp - km) * a - km / (kp - km) * b;
}

// Slope in log moneyness between the quotes closest to two moneyness targets.
// Ties go to the smaller strike.
template <class Pick>
std::optional<double> skew(const std::vector<Residual>& slice, double target1, double target2, Pick iv) {
  auto closest = [&](double target) -> const Residual* {
    const Residual* best = nullptr;
    for (const auto& q : slice) {
      const double d = std::abs(q.moneyness - target);
      if (!best) { best = &q; continue; }
      const double db = std::abs(best->moneyness - target);
      if (d < db || (d == db && q.moneyness < best->moneyness)) best = &q;
    }
    return best;
  };
  const Residual* q1 = closest(target1);
  const Residual* q2 = closest(target2);
  if (!q1 || !q2 || q1->moneyness == q2->moneyness) return std::nullopt;
  const double a = iv(*q1), b = iv(*q2);
  if (!std::isfinite(a) || !std::isfinite(b)) return std::nullopt;
  return (a - b) / (std::log(q1->moneyness) - std::log(q2->moneyness));
}

inline MarketCharacteristics characteristics(const std::vector<Residual>& r, double skew_lo, double skew_hi) {
  MarketCharacteristics out;
  const auto market = [](const Residual& q) { return q.market; };
  const auto model = [](const Residual& q) { return q.model; };
  for (const auto& [tau, slice] : detail::by_maturity(r)) {
    out.atm_iv.push_back({tau, atm_iv(slice, market), atm_iv(slice, model)});
    out.skew.push_back({tau, skew(slice, skew_lo, skew_hi, market), skew(slice, skew_lo, skew_hi, model)});
  }
  return out;
}

// Mean over maturities of sqrt(sum of squared relative errors) inside the window.
inline std::optional<double> near_money_rmsre(const std::vector<Residual>& r, double k_lo, double k_hi,
                                              double max_days) {
  double total = 0;
  std::size_t n = 0;
  for (const auto& [tau, slice] : detail::by_maturity(r)) {
    if (!(tau * 365.0 < max_days)) continue;
    double s = 0;
    bool any = false;
    for (const auto& q : slice) {
      if (q.moneyness < k_lo || q.moneyness > k_hi) continue;
      s += q.relative_error() * q.relative_error();
      any = true;
    }
    if (!any) continue;
    total += std::sqrt(s);
    ++n;
  }
  if (!n) return std::nullopt;
  return total / static_cast<double>(n);
}

inline MetricsReport metrics(const Residuals& r) {
  MetricsReport m;
  m.rmsre = rmsre(r);
  m.rmse_spx = std::sqrt(detail::mean_sq(r.spx, false));
  m.rmse_vix = std::sqrt(detail::mean_sq(r.vix, false));
  const std::size_t n = r.spx.size() + r.vix.size();
  if (n) {
    double sq = 0, ab = 0;
    for (const auto* v : {&r.spx, &r.vix})
      for (const auto& q : *v) {
        sq += q.absolute_error() * q.absolute_error();
        ab += std::abs(q.absolute_error());
        m.penalized += q.penalized();
      }
    m.rmse_aggregate = std::sqrt(sq / static_cast<double>(n));
    m.mae = ab / static_cast<double>(n);
  }
  m.spx_moneyness = detail::buckets(r.spx, {0.8, 0.9, 0.95, 1.0, 1.1},
                                    false, {"<0.80", "0.80-0.90", "0.90-0.95", "0.95-1.00", "1.00-1.10", ">=1.10"});
  m.spx_maturity = detail::buckets(r.spx, {15, 30, 50, 60, 90, 180}, true,
                                   {"<15", "15-30", "30-50", "50-60", "60-90", "90-180", ">=180"});
  m.vix_moneyness = detail::buckets(r.vix, {0.8, 0.9, 1.0, 1.2, 1.5, 1.8}, false,
                                    {"<0.80", "0.80-0.90", "0.90-1.00", "1.00-1.20", "1.20-1.50", "1.50-1.80", ">=1.80"});
  m.vix_maturity = detail::buckets(r.vix, {30, 60, 90, 120}, true, {"<30", "30-60", "60-90", "90-120", ">=120"});
  m.spx = characteristics(r.spx, 0.7, 1.2);
  m.vix = characteristics(r.vix, 0.8, 1.5);
  m.near_money_spx = near_money_rmsre(r.spx, 0.9, 1.1, 90);
  m.near_money_vix = near_money_rmsre(r.vix, 0.8, 1.2, 45);
  return m;
}

// Across days: "daily" is the root mean square of each day's mean absolute error over the
// selected maturities, "sample" the root mean square over every (day, maturity) pair.
struct CharacteristicRmse {
  std::optional<double> daily, sample;
};

inline CharacteristicRmse characteristic_rmse(const std::vector<std::vector<TermValue>>& days, double min_days,
                                              double max_days) {
  double daily = 0, sample = 0;
  std::size_t nd = 0, ns = 0;
  for (const auto& day : days) {
    double s = 0;
    std::size_t k = 0;
    for (const auto& tv : day) {
      const double d = tv.maturity * 365.0;
      if (d < min_days || d > max_days || !tv.market || !tv.model) continue;
      const double e = *tv.model - *tv.market;
      s += std::abs(e);
      sample += e * e;
      ++k;
    }
    ns += k;
    if (!k) continue;
    const double mean = s / static_cast<double>(k);
    daily += mean * mean;
    ++nd;
  }
  CharacteristicRmse out;
  if (nd) out.daily = std::sqrt(daily / static_cast<double>(nd));
  if (ns) out.sample = std::sqrt(sample / static_cast<double>(ns));
  return out;
}

// Mean of a - b over its Newey-West standard error, Bartlett weights, lag floor(T^{1/4}).
inline double newey_west_tstat(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("newey_west_tstat: series lengths differ");
  const std::size_t T = a.size();
  if (T < 8) throw ValidationError("newey_west_tstat: need at least 8 observations");
  std::vector<double> d(T);
  double mean = 0;
  for (std::size_t t = 0; t < T; ++t) {
    d[t] = a[t] - b[t];
    mean += d[t];
  }
  mean /= static_cast<double>(T);
  const auto lag = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(T), 0.25) + 1e-12));
  auto gamma = [&](std::size_t l) {
    double s = 0;
    for (std::size_t t = l; t < T; ++t) s += (d[t] - mean) * (d[t - l] - mean);
    return s / static_cast<double>(T);
  };
  double lrv = gamma(0);
  if (!(lrv > 0)) throw DomainError("newey_west_tstat: difference series has zero variance");
  for (std::size_t l = 1; l <= lag; ++l)
    lrv += 2.0 * (1.0 - static_cast<double>(l) / static_cast<double>(lag + 1)) * gamma(l);
  if (!(lrv > 0)) throw DomainError("newey_west_tstat: non-positive long-run variance");
  return mean / std::sqrt(lrv / static_cast<double>(T));
}

}  // namespace ctc

#endif
