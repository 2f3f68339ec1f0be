#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "ltmdi/error.hpp"
#include "ltmdi/qstate.hpp"

namespace ltmdi {

inline double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) fail(errc::invalid_input, "binary entropy argument outside [0,1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

struct KeyRateInputs {
  double Q11Z_L = 0;
  double eX_U = 0;
  double Q_mumu_Z = 0;
  double E_mumu_Z = 0;
  double f_ec = 1.16;
  double N_mumu_Z = 0;

  void validate() const {
    auto prob = [](double v, const char* n) {
      if (!(v >= 0.0 && v <= 1.0)) fail(errc::invalid_input, std::string(n) + " must lie in [0,1]");
    };
    prob(Q11Z_L, "Q11Z_L");
    prob(eX_U, "eX_U");
    prob(Q_mumu_Z, "Q_mumu_Z");
    prob(E_mumu_Z, "E_mumu_Z");
    if (!(f_ec >= 1.0)) fail(errc::invalid_input, "f_ec must be >= 1");
    if (!(N_mumu_Z >= 0.0)) fail(errc::invalid_input, "N_mumu_Z must be >= 0");
  }
};

struct KeyRate {
  double R = 0;           // bits per pulse, may be negative
  double key_length = 0;  // N_mumu_Z * R
  bool positive() const { return R > 0; }
};

// e^U above 1/2 carries no more information than 1/2
inline KeyRate secure_key_rate(const KeyRateInputs& in) {
  in.validate();
  KeyRate k;
  k.R = in.Q11Z_L * (1.0 - binary_entropy(std::min(in.eX_U, 0.5))) -
        in.Q_mumu_Z * in.f_ec * binary_entropy(in.E_mumu_Z);
  k.key_length = in.N_mumu_Z * k.R;
  return k;
}

// ---- GLLP comparator

struct FlawedStates {
  Vec2 z0, z1, x0, x1;
};

inline FlawedStates gllp_flawed_states(double delta) {
  if (!(delta >= 0.0 && delta < std::numbers::pi)) fail(errc::invalid_input, "delta must lie in [0, pi)");
  constexpr double q = std::numbers::pi / 4;
  FlawedStates s;
  s.z0 = Vec2(1, 0);
  s.z1 = Vec2(-std::sin(delta / 2), std::cos(delta / 2));
  s.x0 = Vec2(std::cos(q + delta / 4), std::sin(q + delta / 4));
  s.x1 = Vec2(std::cos(-q + delta / 4), std::sin(-q + delta / 4));
  return s;
}

inline DensityMatrix basis_mixture(const Vec2& a, const Vec2& b) {
  Mat2 m = 0.5 * (a * a.adjoint() + b * b.adjoint());
  return DensityMatrix(m);
}

inline double gllp_delta_ini(const FlawedStates& A, const FlawedStates& B) {
  double fa = fidelity(basis_mixture(A.x0, A.x1), basis_mixture(A.z0, A.z1));
  double fb = fidelity(basis_mixture(B.x0, B.x1), basis_mixture(B.z0, B.z1));
  return std::clamp(0.5 * (1.0 - fa * fb), 0.0, 0.5);
}

struct GllpInputs {
  double delta = 0;
  double Y11 = 1;
  double eX_bit = 0;
};

struct GllpPhaseError {
  double eX = 1;
  double Delta = 0;
  bool vacuous = false;
};

inline GllpPhaseError gllp_phase_error(const GllpInputs& in, double delta_ini) {
  if (!(in.Y11 > 0.0 && in.Y11 <= 1.0)) fail(errc::invalid_input, "Y11 must lie in (0,1]");
  if (!(in.eX_bit >= 0.0 && in.eX_bit <= 1.0)) fail(errc::invalid_input, "X-basis error rate must lie in [0,1]");
  if (!(delta_ini >= 0.0)) fail(errc::invalid_input, "delta_ini must be >= 0");
  GllpPhaseError r;
  r.Delta = delta_ini / in.Y11;
  if (r.Delta >= 1.0) {
    r.vacuous = true;
    r.eX = 1.0;
    return r;
  }
  if (r.Delta > 0.5) {
    r.eX = 1.0;
    return r;
  }
  double D = r.Delta, e = in.eX_bit;
  // sqrt(e') = sin(phi + 2 theta) with sin(phi) = sqrt(e), sin(theta) = sqrt(D); saturates past pi/2
  if (std::asin(std::sqrt(e)) + 2.0 * std::asin(std::sqrt(D)) >= std::numbers::pi / 2) {
    r.eX = 1.0;
    return r;
  }
  double root = std::sqrt(e) + 2.0 * std::sqrt(D) * (std::sqrt((1.0 - D) * (1.0 - e)) - std::sqrt(D * e));
  r.eX = std::min(1.0, root * root);
  return r;
}

}  // namespace ltmdi
