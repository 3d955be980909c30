#ifndef CTC_LEVY_HPP
#define CTC_LEVY_HPP

#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

#include "ctc/errors.hpp"
#include "ctc/math.hpp"

namespace ctc {

enum class ModelKind { Heston, CompositeHeston, JH, CompositeJH };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Heston: return "heston";
    case ModelKind::CompositeHeston: return "composite-heston";
    case ModelKind::JH: return "jh";
    case ModelKind::CompositeJH: return "composite-jh";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "heston") return ModelKind::Heston;
  if (s == "composite-heston") return ModelKind::CompositeHeston;
  if (s == "jh") return ModelKind::JH;
  if (s == "composite-jh") return ModelKind::CompositeJH;
  throw ValidationError("unknown model kind '" + std::string(s) + "'");
}

inline bool is_composite(ModelKind k) { return k == ModelKind::CompositeHeston || k == ModelKind::CompositeJH; }
inline bool is_jump_kind(ModelKind k) { return k == ModelKind::JH || k == ModelKind::CompositeJH; }

struct BrownianExponent {
  double sigma = 1.0;
};

struct CgmySpec {
  double C = 0.0, G = 0.0, M = 0.0, Y = 0.5;
};

// Base jump process J with the co-jumping subordinator J^u = -(negative jumps of J).
struct CoJumpSpec {
  CgmySpec cgmy;
};

struct ULayer {
  double kappa = 0.0, theta = 0.0, sigma = 0.0, eta = 0.0;
};

struct VLayer {
  double kappa = 0.0, theta = 1.0, sigma = 0.0;
};

struct ModelSpec {
  ModelKind kind = ModelKind::Heston;
  std::variant<BrownianExponent, CoJumpSpec> base = BrownianExponent{};
  ULayer u;
  std::optional<VLayer> v;  // empty: V_t = t
  double rho_u = 0.0, rho_v = 0.0;
  double u0 = 0.0, v0 = 1.0;

  bool degenerate_v() const { return !v.has_value(); }
  const CoJumpSpec* cojump() const { return std::get_if<CoJumpSpec>(&base); }
  double brownian_scale() const {
    const auto* b = std::get_if<BrownianExponent>(&base);
    return b ? b->sigma : 0.0;
  }
};

// ---- CGMY exponents -------------------------------------------------------

namespace detail {
inline void check_base(Complex base, const char* which) {
  if (!(base.real() > 0.0))
    throw DomainError(std::string("CGMY exponent outside analyticity strip: Re(") + which + ") <= 0");
}
}  // namespace detail

// log E[exp(i m J_1)].
inline Complex cgmy_exponent(const CgmySpec& p, Complex m) {
  const Complex bm = p.M - kI * m, bg = p.G + kI * m;
  detail::check_base(bm, "M - i m");
  detail::check_base(bg, "G + i m");
  const double scale = p.C * std::tgamma(-p.Y);
  return scale * (std::pow(bm, p.Y) - std::pow(p.M, p.Y) + std::pow(bg, p.Y) - std::pow(p.G, p.Y));
}

// log E[exp(i m J_1 - i x J^u_1)].
inline Complex psi_joint(const CoJumpSpec& s, Complex m, Complex x) {
  const CgmySpec& p = s.cgmy;
  const Complex bm = p.M - kI * m, bg = p.G + kI * (m + x);
  detail::check_base(bm, "M - i m");
  detail::check_base(bg, "G + i (m + x)");
  const double scale = p.C * std::tgamma(-p.Y);
  return scale * (std::pow(bm, p.Y) - std::pow(p.M, p.Y) + std::pow(bg, p.Y) - std::pow(p.G, p.Y));
}

// Exponent of J^u under the measure change induced by m.
inline Complex psi_ju_Q(const CoJumpSpec& s, Complex m, Complex x) { return psi_joint(s, m, x) - psi_joint(s, m, 0.0); }

// psi_ju_Q(m, .) with the m-dependent constants cached; used inside ODE right-hand sides.
class CoJumpKernel {
 public:
  CoJumpKernel(const CoJumpSpec& s, Complex m)
      : G_(s.cgmy.G), Y_(s.cgmy.Y), scale_(s.cgmy.C * std::tgamma(-s.cgmy.Y)), m_(m) {
    const Complex b0 = G_ + kI * m_;
    detail::check_base(b0, "G + i m");
    ref_ = std::pow(b0, Y_);
  }
  Complex operator()(Complex x) const {
    const Complex bg = G_ + kI * (m_ + x);
    detail::check_base(bg, "G + i (m + x)");
    return scale_ * (std::pow(bg, Y_) - ref_);
  }

 private:
  double G_, Y_, scale_;
  Complex m_, ref_;
};

inline double cgmy_mean(const CgmySpec& p) {
  return p.Y * p.C * std::tgamma(-p.Y) * (std::pow(p.G, p.Y - 1) - std::pow(p.M, p.Y - 1));
}

// E[J^u_1].
inline double cojump_mean(const CoJumpSpec& s) {
  const CgmySpec& p = s.cgmy;
  return -p.Y * p.C * std::tgamma(-p.Y) * std::pow(p.G, p.Y - 1);
}

// Integral of z^2 against the Levy measure of J^u.
inline double cojump_second_moment(const CoJumpSpec& s) {
  const CgmySpec& p = s.cgmy;
  return p.C * std::tgamma(2 - p.Y) * std::pow(p.G, p.Y - 2);
}

// Psi(-i) of the base (martingale correction), Brownian part included.
inline double base_martingale_correction(const ModelSpec& spec) {
  if (const auto* cj = spec.cojump()) return cgmy_exponent(cj->cgmy, Complex(0.0, -1.0)).real();
  const double s = spec.brownian_scale();
  return 0.5 * s * s;
}

inline double base_jump_mean(const ModelSpec& spec) {
  if (const auto* cj = spec.cojump()) return cgmy_mean(cj->cgmy);
  return 0.0;
}

// Per-unit variance of L_1.
inline double base_variance(const ModelSpec& spec) {
  if (const auto* cj = spec.cojump()) {
    const CgmySpec& p = cj->cgmy;
    return p.C * std::tgamma(2 - p.Y) * (std::pow(p.M, p.Y - 2) + std::pow(p.G, p.Y - 2));
  }
  const double s = spec.brownian_scale();
  return s * s;
}

// E[L_1] for the martingale-corrected base.
inline double base_mean(const ModelSpec& spec) { return base_jump_mean(spec) - base_martingale_correction(spec); }

// Psi_L(m) = -i m Psi(-i) + Psi_W(sigma m) + Psi_J(m).
inline Complex psi_base(const ModelSpec& spec, Complex m) {
  if (const auto* cj = spec.cojump()) {
    const Complex corr = cgmy_exponent(cj->cgmy, Complex(0.0, -1.0));
    return -kI * m * corr + cgmy_exponent(cj->cgmy, m);
  }
  const double s = spec.brownian_scale();
  return -0.5 * s * s * (m * m + kI * m);
}

// Rate m_u in dE[u] = (kappa theta + m_u E[u]) dt.
inline double u_mean_rate(const ModelSpec& spec) {
  double r = -spec.u.kappa;
  if (const auto* cj = spec.cojump()) r += spec.u.eta * cojump_mean(*cj);
  return r;
}

// Instantaneous variance rate of u per unit u (diffusion plus jumps).
inline double u_variance_rate(const ModelSpec& spec) {
  double r = spec.u.sigma * spec.u.sigma;
  if (const auto* cj = spec.cojump()) r += spec.u.eta * spec.u.eta * cojump_second_moment(*cj);
  return r;
}

// ---- validation -----------------------------------------------------------

inline void validate(const ModelSpec& s) {
  auto fail = [](const std::string& m) { throw ValidationError("model: " + m); };
  auto finite = [&](double x, const char* n) {
    if (!std::isfinite(x)) fail(std::string(n) + " is not finite");
  };
  finite(s.u.kappa, "kappa_u");
  finite(s.u.theta, "theta_u");
  finite(s.u.sigma, "sigma_u");
  finite(s.u.eta, "eta_u");
  finite(s.u0, "u0");
  finite(s.rho_u, "rho_u");
  finite(s.rho_v, "rho_v");
  if (!(s.u0 > 0)) fail("u0 must be positive");
  if (!(s.u.kappa > 0)) fail("kappa_u must be positive");
  if (s.u.kappa * s.u.theta < 0) fail("kappa_u * theta_u must be non-negative");
  if (s.u.sigma < 0 || s.u.eta < 0) fail("sigma_u and eta_u must be non-negative");
  if (s.rho_u * s.rho_u + s.rho_v * s.rho_v > 1.0 + 1e-12) fail("rho_u^2 + rho_v^2 must not exceed 1");
  if (is_composite(s.kind) != s.v.has_value())
    fail(is_composite(s.kind) ? "composite kind needs a V layer" : "ordinary kind must have V_t = t");
  if (s.v) {
    finite(s.v->kappa, "kappa_v");
    finite(s.v->theta, "theta_v");
    finite(s.v->sigma, "sigma_v");
    finite(s.v0, "v0");
    if (!(s.v0 > 0)) fail("v0 must be positive");
    if (!(s.v->kappa > 0)) fail("kappa_v must be positive");
    if (s.v->kappa * s.v->theta < 0) fail("kappa_v * theta_v must be non-negative");
    if (s.v->sigma < 0) fail("sigma_v must be non-negative");
    if (s.v->sigma > 0 && 2 * s.v->kappa * s.v->theta <= s.v->sigma * s.v->sigma)
      warn("Feller condition 2 kappa_v theta_v > sigma_v^2 fails; v can touch zero");
  } else if (s.rho_v != 0.0) {
    fail("rho_v requires a V layer");
  }
  if (s.u.sigma > 0 && 2 * s.u.kappa * s.u.theta <= s.u.sigma * s.u.sigma)
    warn("Feller condition 2 kappa_u theta_u > sigma_u^2 fails; u can touch zero");
  if (is_jump_kind(s.kind)) {
    const auto* cj = s.cojump();
    if (!cj) fail("jump kind needs a CGMY base");
    const CgmySpec& p = cj->cgmy;
    if (!(p.C > 0)) fail("C must be positive");
    if (!(p.G > 0)) fail("G must be positive");
    if (!(p.M > 1)) fail("M must exceed 1 for exp(L) to have finite mean");
    if (!(p.Y > 0 && p.Y < 2)) fail("Y must lie in (0, 2)");
    if (std::abs(p.Y - 1) < 1e-6) fail("Y = 1 is not supported (Gamma(-Y) pole)");
    if (s.u.sigma != 0.0 || s.rho_u != 0.0) fail("jump kinds have sigma_u = rho_u = 0");
  } else {
    if (s.cojump()) fail("Heston kinds need a Brownian base");
    if (!(s.brownian_scale() > 0)) fail("sigma must be positive");
    if (s.u.eta != 0.0) fail("Heston kinds have eta_u = 0");
  }
}

// ---- flat key=value config ------------------------------------------------

using ParamMap = std::map<std::string, double>;

inline ParamMap to_param_map(const ModelSpec& s) {
  ParamMap p{{"kappa_u", s.u.kappa}, {"theta_u", s.u.theta}, {"sigma_u", s.u.sigma}, {"eta_u", s.u.eta},
             {"rho_u", s.rho_u},     {"rho_v", s.rho_v},     {"u0", s.u0}};
  if (s.v) {
    p["kappa_v"] = s.v->kappa;
    p["theta_v"] = s.v->theta;
    p["sigma_v"] = s.v->sigma;
    p["v0"] = s.v0;
  }
  if (const auto* cj = s.cojump()) {
    p["C"] = cj->cgmy.C;
    p["G"] = cj->cgmy.G;
    p["M"] = cj->cgmy.M;
    p["Y"] = cj->cgmy.Y;
  } else {
    p["sigma"] = s.brownian_scale();
  }
  return p;
}

inline ModelSpec from_param_map(ModelKind kind, const ParamMap& p) {
  auto get = [&](const char* k, double def) {
    auto it = p.find(k);
    return it == p.end() ? def : it->second;
  };
  ModelSpec s;
  s.kind = kind;
  s.u = {get("kappa_u", 0), get("theta_u", 0), get("sigma_u", 0), get("eta_u", 0)};
  s.rho_u = get("rho_u", 0);
  s.rho_v = get("rho_v", 0);
  s.u0 = get("u0", 0);
  if (is_composite(kind)) {
    s.v = VLayer{get("kappa_v", 0), get("theta_v", 1), get("sigma_v", 0)};
    s.v0 = get("v0", 1);
  }
  if (is_jump_kind(kind))
    s.base = CoJumpSpec{{get("C", 0), get("G", 0), get("M", 0), get("Y", 0.5)}};
  else
    s.base = BrownianExponent{get("sigma", 1.0)};
  return s;
}

inline std::string write_config(const ModelSpec& s) {
  std::ostringstream os;
  os << "kind = " << to_string(s.kind) << '\n' << std::setprecision(17);
  for (const auto& [k, v] : to_param_map(s)) os << k << " = " << v << '\n';
  return os.str();
}

inline ModelSpec parse_config(const std::string& text) {
  static const char* known[] = {"kappa_u", "theta_u", "sigma_u", "eta_u", "kappa_v", "theta_v", "sigma_v", "rho_u",
                                "rho_v",   "u0",      "v0",      "sigma", "C",       "G",       "M",       "Y"};
  std::istringstream in(text);
  std::string line;
  std::optional<ModelKind> kind;
  ParamMap p;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (key == "kind") {
      kind = parse_model_kind(val);
      continue;
    }
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    try {
      std::size_t used = 0;
      p[key] = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ValidationError("config line " + std::to_string(lineno) + ": bad number '" + val + "'");
    }
  }
  if (!kind) throw ValidationError("config: missing 'kind'");
  return from_param_map(*kind, p);
}

}  // namespace ctc

#endif
