// Parameter sets shared by the tests.
#ifndef CTC_TESTS_MODELS_HPP
#define CTC_TESTS_MODELS_HPP

#include "ctc/levy.hpp"

namespace fixtures {

// Composite Heston reference set used for the pricing grid.
inline ctc::ModelSpec composite_heston() {
  ctc::ModelSpec s;
  s.kind = ctc::ModelKind::CompositeHeston;
  s.base = ctc::BrownianExponent{1.0};
  s.u = {6.0, 0.08, 1.5, 0.0};
  s.v = ctc::VLayer{3.0, 1.5, 0.5};
  s.rho_u = -0.5;
  s.u0 = 0.02;
  s.v0 = 1.3;
  return s;
}

inline ctc::ModelSpec heston() {
  ctc::ModelSpec s;
  s.kind = ctc::ModelKind::Heston;
  s.base = ctc::BrownianExponent{1.0};
  s.u = {14.3761, 0.0750, 1.9859, 0.0};
  s.rho_u = -0.7126;
  s.u0 = 0.0384;
  return s;
}

inline ctc::CgmySpec cgmy() { return {0.1071, 3.4883, 24.8861, 1.6975}; }

inline ctc::ModelSpec composite_jh() {
  ctc::ModelSpec s;
  s.kind = ctc::ModelKind::CompositeJH;
  s.base = ctc::CoJumpSpec{cgmy()};
  s.u = {3.9423, 0.4782, 0.0, 7.2706};
  s.v = ctc::VLayer{4.4931, 0.9224, 0.4194};
  s.u0 = 0.0720;
  s.v0 = 1.5115;
  return s;
}

inline ctc::ModelSpec jh() {
  ctc::ModelSpec s;
  s.kind = ctc::ModelKind::JH;
  s.base = ctc::CoJumpSpec{{0.2213, 2.2288, 22.4491, 1.6166}};
  s.u = {2.7048, 0.5105, 0.0, 4.1362};
  s.u0 = 0.1023;
  return s;
}

// Composite Heston with a deterministic clock: V_t = t.
inline ctc::ModelSpec degenerate_composite(const ctc::ModelSpec& heston) {
  ctc::ModelSpec s = heston;
  s.kind = ctc::ModelKind::CompositeHeston;
  s.v = ctc::VLayer{3.0, 1.0, 0.0};
  s.v0 = 1.0;
  return s;
}

}  // namespace fixtures

#endif
