#ifndef CTC_OPTIMIZE_HPP
#define CTC_OPTIMIZE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctc/errors.hpp"
#include "ctc/rng.hpp"

namespace ctc {

using Objective = std::function<double(const std::vector<double>&)>;

struct OptimizeOptions {
  std::size_t budget = 20000;  // objective evaluations, all phases
  std::uint64_t seed = 1;
  double de_fraction = 0.5;    // share of the budget available to differential evolution
  int population_factor = 15;  // population = factor * dim
  double de_weight = 0.7;
  double de_crossover = 0.9;
  double target_loss = 0.0;    // stop as soon as the best loss is at or below this
  double ftol = 1e-12;         // Nelder-Mead: spread of simplex values
  double xtol = 1e-7;          // Nelder-Mead: simplex diameter in transformed units
  double simplex_scale = 0.05; // initial simplex edge as a fraction of each box width
};

struct TracePoint {
  std::size_t evaluations;
  double loss;
};

struct OptimizeResult {
  std::vector<double> x;
  double loss = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;  // best loss after each generation or simplex iteration
};

namespace detail {

class CountingObjective {
 public:
  CountingObjective(const Objective& f, OptimizeResult& r) : f_(f), r_(r) {}

  double operator()(const std::vector<double>& x) {
    double v = f_(x);
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    ++r_.evaluations;
    if (v < r_.loss) {
      r_.loss = v;
      r_.x = x;
    }
    return v;
  }

  void mark() { r_.trace.push_back({r_.evaluations, r_.loss}); }

 private:
  const Objective& f_;
  OptimizeResult& r_;
};

inline void clamp_box(std::vector<double>& x, const std::vector<double>& lo, const std::vector<double>& hi) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

inline void check_box(const std::vector<double>& x0, const std::vector<double>& lo, const std::vector<double>& hi) {
  if (x0.empty() || x0.size() != lo.size() || x0.size() != hi.size())
    throw ValidationError("optimizer: start point and bounds must have the same, non-zero size");
  for (std::size_t i = 0; i < x0.size(); ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
      throw ValidationError("optimizer: bounds must be finite with lower < upper");
    if (!(x0[i] >= lo[i] && x0[i] <= hi[i])) throw ValidationError("optimizer: start point outside the bounds");
  }
}

}  // namespace detail

// rand/1/bin differential evolution over the box; x0 is a member of the initial population.
inline void differential_evolution(detail::CountingObjective& f, const std::vector<double>& x0,
                                   const std::vector<double>& lo, const std::vector<double>& hi, std::size_t budget,
                                   const OptimizeOptions& opt) {
  const std::size_t n = x0.size();
  const std::size_t np = std::max<std::size_t>(4, static_cast<std::size_t>(opt.population_factor) * n);
  if (budget < 2 * np) return;
  Xoshiro256 rng = path_stream(opt.seed, 0);
  std::vector<std::vector<double>> pop(np, std::vector<double>(n));
  std::vector<double> val(np);
  std::size_t used = 0;
  pop[0] = x0;
  for (std::size_t p = 1; p < np; ++p)
    for (std::size_t i = 0; i < n; ++i) pop[p][i] = lo[i] + (hi[i] - lo[i]) * rng.uniform();
  for (std::size_t p = 0; p < np; ++p, ++used) val[p] = f(pop[p]);
  f.mark();
  auto pick = [&](std::size_t exclude1, std::size_t exclude2, std::size_t exclude3) {
    for (;;) {
      const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(np)) % np;
      if (k != exclude1 && k != exclude2 && k != exclude3) return k;
    }
  };
  std::vector<double> trial(n);
  while (used + np <= budget) {
    for (std::size_t p = 0; p < np; ++p) {
      const std::size_t a = pick(p, p, p), b = pick(p, a, a), c = pick(p, a, b);
      const auto jr = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == jr || rng.uniform() < opt.de_crossover) {
          double t = pop[a][i] + opt.de_weight * (pop[b][i] - pop[c][i]);
          // Bounce back inside the box rather than sticking to the wall.
          if (t < lo[i]) t = lo[i] + rng.uniform() * (pop[p][i] - lo[i]);
          if (t > hi[i]) t = hi[i] - rng.uniform() * (hi[i] - pop[p][i]);
          trial[i] = t;
        } else {
          trial[i] = pop[p][i];
        }
      }
      const double v = f(trial);
      ++used;
      if (v <= val[p]) {
        pop[p] = trial;
        val[p] = v;
      }
    }
    f.mark();
    const auto [mn, mx] = std::minmax_element(val.begin(), val.end());
    if (*mn <= opt.target_loss) return;
    if (std::isfinite(*mx) && *mx - *mn <= opt.ftol * (1 + std::abs(*mn))) return;
  }
}

// Adaptive-coefficient Nelder-Mead inside the box. Returns true on convergence.
inline bool nelder_mead(detail::CountingObjective& f, const std::vector<double>& x0, const std::vector<double>& lo,
                        const std::vector<double>& hi, std::size_t budget, const OptimizeOptions& opt) {
  const std::size_t n = x0.size();
  const double dn = static_cast<double>(n);
  const double alpha = 1.0, beta = 1.0 + 2.0 / dn, gamma = 0.75 - 0.5 / dn, delta = 1.0 - 1.0 / dn;
  std::vector<std::vector<double>> s(n + 1, x0);
  std::vector<double> fs(n + 1);
  std::size_t used = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double step = opt.simplex_scale * (hi[i] - lo[i]);
    s[i + 1][i] = x0[i] + step <= hi[i] ? x0[i] + step : x0[i] - step;
  }
  for (std::size_t i = 0; i <= n; ++i, ++used) fs[i] = f(s[i]);
  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  auto point = [&](std::vector<double>& out, double t, const std::vector<double>& worst) {
    for (std::size_t i = 0; i < n; ++i) out[i] = centroid[i] + t * (worst[i] - centroid[i]);
    detail::clamp_box(out, lo, hi);
  };
  while (used < budget) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];
    f.mark();
    if (fs[best] <= opt.target_loss) return true;
    double diam = 0;
    for (std::size_t k = 0; k <= n; ++k)
      for (std::size_t i = 0; i < n; ++i) diam = std::max(diam, std::abs(s[k][i] - s[best][i]));
    if (std::isfinite(fs[worst]) && fs[worst] - fs[best] <= opt.ftol * (1 + std::abs(fs[best])) && diam <= opt.xtol)
      return true;
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t k = 0; k <= n; ++k)
      if (k != worst)
        for (std::size_t i = 0; i < n; ++i) centroid[i] += s[k][i] / dn;
    point(xr, -alpha, s[worst]);
    const double fr = f(xr);
    ++used;
    if (fr < fs[best]) {
      point(xe, -alpha * beta, s[worst]);
      const double fe = f(xe);
      ++used;
      if (fe < fr) {
        s[worst] = xe;
        fs[worst] = fe;
      } else {
        s[worst] = xr;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr < fs[second]) {
      s[worst] = xr;
      fs[worst] = fr;
      continue;
    }
    const bool outside = fr < fs[worst];
    point(xc, outside ? -alpha * gamma : gamma, s[worst]);
    const double fc = f(xc);
    ++used;
    if (fc < (outside ? fr : fs[worst])) {
      s[worst] = xc;
      fs[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k <= n && used < budget; ++k) {
      if (k == best) continue;
      for (std::size_t i = 0; i < n; ++i) s[k][i] = s[best][i] + delta * (s[k][i] - s[best][i]);
      fs[k] = f(s[k]);
      ++used;
    }
  }
  return false;
}

// Differential evolution, then Nelder-Mead restarts from the incumbent until convergence or budget.
inline OptimizeResult minimize(const Objective& fn, const std::vector<double>& x0, const std::vector<double>& lo,
                               const std::vector<double>& hi, const OptimizeOptions& opt = {}) {
  detail::check_box(x0, lo, hi);
  if (opt.budget < x0.size() + 2) throw ValidationError("optimizer: budget too small");
  OptimizeResult r;
  detail::CountingObjective f(fn, r);
  f(x0);
  f.mark();
  if (r.loss <= opt.target_loss) {
    r.converged = true;
    return r;
  }
  const auto de_budget = static_cast<std::size_t>(opt.de_fraction * static_cast<double>(opt.budget));
  differential_evolution(f, x0, lo, hi, de_budget, opt);
  double previous = std::numeric_limits<double>::infinity();
  while (r.evaluations < opt.budget) {
    const std::vector<double> start = r.x;
    const bool ok = nelder_mead(f, start, lo, hi, opt.budget - r.evaluations, opt);
    if (r.loss <= opt.target_loss || (ok && r.loss >= previous - opt.ftol * (1 + std::abs(r.loss)))) {
      r.converged = true;
      break;
    }
    previous = r.loss;
  }
  f.mark();
  return r;
}

struct Identifiability {
  std::vector<double> eigenvalues;                // Hessian of the loss in transformed units, ascending
  std::vector<std::vector<double>> weak_directions;  // eigenvectors with eigenvalue below the threshold
  std::vector<std::pair<std::string, std::string>> correlated;
  bool identifiable = true;
};

// Central-difference Hessian at x; parameter pairs sharing a weak direction are flagged.
inline Identifiability identifiability(const Objective& f, const std::vector<double>& x,
                                       const std::vector<std::string>& names, double h = 1e-3,
                                       double relative_threshold = 1e-6) {
  const std::size_t n = x.size();
  if (names.size() != n) throw ValidationError("identifiability: one name per parameter");
  Eigen::MatrixXd H(n, n);
  const double f0 = f(x);
  auto at = [&](std::size_t i, double di, std::size_t j, double dj) {
    std::vector<double> y = x;
    y[i] += di;
    y[j] += dj;
    return f(y);
  };
  for (std::size_t i = 0; i < n; ++i) {
    H(i, i) = (at(i, h, i, 0) - 2 * f0 + at(i, -h, i, 0)) / (h * h);
    for (std::size_t j = 0; j < i; ++j) {
      const double v = (at(i, h, j, h) - at(i, h, j, -h) - at(i, -h, j, h) + at(i, -h, j, -h)) / (4 * h * h);
      H(i, j) = H(j, i) = v;
    }
  }
  Identifiability out;
  if (!H.allFinite()) {
    out.identifiable = false;
    return out;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  const double top = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  for (std::size_t k = 0; k < n; ++k) {
    const double ev = es.eigenvalues()(static_cast<Eigen::Index>(k));
    out.eigenvalues.push_back(ev);
    if (ev > relative_threshold * top) continue;
    out.identifiable = false;
    std::vector<double> dir(n);
    for (std::size_t i = 0; i < n; ++i) dir[i] = es.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (std::abs(dir[i]) >= 0.2 && std::abs(dir[j]) >= 0.2) {
          const std::pair<std::string, std::string> p{names[i], names[j]};
          if (std::find(out.correlated.begin(), out.correlated.end(), p) == out.correlated.end())
            out.correlated.push_back(p);
        }
    out.weak_directions.push_back(std::move(dir));
  }
  return out;
}

}  // namespace ctc

#endif
