#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ltmdi/error.hpp"
#include "ltmdi/lp.hpp"

namespace ltmdi {

enum class State { Z0 = 0, Z1 = 1, X0 = 2 };
enum class Intensity { nu2 = 0, nu1 = 1, mu = 2 };

inline const char* to_string(State s) {
  static const char* n[] = {"0Z", "1Z", "0X"};
  return n[static_cast<int>(s)];
}
inline const char* to_string(Intensity i) {
  static const char* n[] = {"v2", "v1", "mu"};
  return n[static_cast<int>(i)];
}

struct StatePair {
  State a, b;
  std::string label() const { return std::string(to_string(a)) + to_string(b); }
};

// row order of the transmission system
inline constexpr std::array<StatePair, 9> k_pairs = {{{State::Z0, State::Z0},
                                                      {State::Z0, State::Z1},
                                                      {State::Z1, State::Z0},
                                                      {State::Z1, State::Z1},
                                                      {State::X0, State::Z0},
                                                      {State::X0, State::Z1},
                                                      {State::Z0, State::X0},
                                                      {State::Z1, State::X0},
                                                      {State::X0, State::X0}}};

struct IntensityPair {
  Intensity a, b;
  std::string label() const { return std::string(to_string(a)) + to_string(b); }
};

inline constexpr std::array<IntensityPair, 9> k_intensity_pairs = {{{Intensity::nu2, Intensity::nu2},
                                                                     {Intensity::nu2, Intensity::nu1},
                                                                     {Intensity::nu2, Intensity::mu},
                                                                     {Intensity::nu1, Intensity::nu2},
                                                                     {Intensity::nu1, Intensity::nu1},
                                                                     {Intensity::nu1, Intensity::mu},
                                                                     {Intensity::mu, Intensity::nu2},
                                                                     {Intensity::mu, Intensity::nu1},
                                                                     {Intensity::mu, Intensity::mu}}};

inline int pair_index(State a, State b) {
  for (int i = 0; i < 9; ++i)
    if (k_pairs[i].a == a && k_pairs[i].b == b) return i;
  return -1;
}

inline int pair_index(const std::string& label) {
  for (int i = 0; i < 9; ++i)
    if (k_pairs[i].label() == label) return i;
  return -1;
}

inline int intensity_index(const std::string& label) {
  for (int i = 0; i < 9; ++i)
    if (k_intensity_pairs[i].label() == label) return i;
  return -1;
}

struct DecoyConfig {
  double mu = 0.2, nu1 = 0.03, nu2 = 0.0;
  double p_mu = 0.3, p_nu1 = 0.4, p_nu2 = 0.3;
  double p_0Z = 0.25, p_1Z = 0.25, p_0X = 0.5;
  double N = 6e11;  // infinity selects the asymptotic regime
  double k = 3.0;
  int n_cut = 4;

  double intensity(Intensity i) const { return i == Intensity::mu ? mu : i == Intensity::nu1 ? nu1 : nu2; }
  double p_intensity(Intensity i) const { return i == Intensity::mu ? p_mu : i == Intensity::nu1 ? p_nu1 : p_nu2; }
  double p_state(State s) const { return s == State::Z0 ? p_0Z : s == State::Z1 ? p_1Z : p_0X; }
  bool infinite_key() const { return k == 0.0 || !std::isfinite(N); }

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!(mu > nu1 && nu1 > nu2 && nu2 >= 0.0)) fail(errc::invalid_input, "intensities must satisfy mu > nu1 > nu2 >= 0");
    for (double p : {p_mu, p_nu1, p_nu2, p_0Z, p_1Z, p_0X})
      if (!prob(p)) fail(errc::invalid_input, "probabilities must lie in [0,1]");
    if (std::abs(p_mu + p_nu1 + p_nu2 - 1.0) > 1e-9) fail(errc::invalid_input, "intensity probabilities must sum to 1");
    if (std::abs(p_0Z + p_1Z + p_0X - 1.0) > 1e-9) fail(errc::invalid_input, "state probabilities must sum to 1");
    if (!(k >= 0.0)) fail(errc::invalid_input, "k must be non-negative");
    if (n_cut < 2) fail(errc::invalid_input, "n_cut must be at least 2");
    if (!(N > 0.0)) fail(errc::invalid_input, "N must be positive");
  }
};

using Grid9 = std::array<std::array<double, 9>, 9>;  // [pair][intensity pair]

struct GainsTable {
  std::array<std::array<std::optional<double>, 9>, 9> q;
  std::array<std::array<std::optional<double>, 9>, 9> sigma;

  void set(int pair, int ip, double v) {
    if (!(v >= 0.0 && v <= 1.0)) fail(errc::invalid_input, "gain outside [0,1]");
    q[pair][ip] = v;
  }
  double at(int pair, int ip) const {
    if (!q[pair][ip])
      fail(errc::missing_data,
           "missing gain for pair " + k_pairs[pair].label() + ", intensities " + k_intensity_pairs[ip].label());
    return *q[pair][ip];
  }
  std::array<double, 9> row(int pair) const {
    std::array<double, 9> r;
    for (int i = 0; i < 9; ++i) r[i] = at(pair, i);
    return r;
  }
};

inline Grid9 pulse_counts(const DecoyConfig& c) {
  Grid9 n{};
  for (int p = 0; p < 9; ++p)
    for (int i = 0; i < 9; ++i)
      n[p][i] = c.N * c.p_intensity(k_intensity_pairs[i].a) * c.p_intensity(k_intensity_pairs[i].b) *
                c.p_state(k_pairs[p].a) * c.p_state(k_pairs[p].b);
  return n;
}

struct YieldInterval {
  double L = 0, U = 0;
  double widening = 0;  // relative widening needed for feasibility (asymptotic regime only)
};

using YieldBounds = std::array<YieldInterval, 9>;

inline double poisson(double mean, int n) {
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(-mean + n * std::log(mean) - std::lgamma(n + 1.0));
}

namespace detail {

struct DecoyRows {
  Eigen::MatrixXd A;  // [intensity pair][Y^{mn}]
  Eigen::VectorXd lo, hi, tail, Q;
};

inline DecoyRows decoy_rows(const std::array<double, 9>& Q, const std::array<double, 9>& Ncell, const DecoyConfig& c) {
  const int d = c.n_cut + 1;
  DecoyRows r;
  r.A = Eigen::MatrixXd::Zero(9, d * d);
  r.lo.resize(9);
  r.hi.resize(9);
  r.tail.resize(9);
  r.Q.resize(9);
  for (int i = 0; i < 9; ++i) {
    double a = c.intensity(k_intensity_pairs[i].a), b = c.intensity(k_intensity_pairs[i].b);
    double s = 0;
    for (int m = 0; m < d; ++m)
      for (int n = 0; n < d; ++n) {
        r.A(i, m * d + n) = poisson(a, m) * poisson(b, n);
        s += r.A(i, m * d + n);
      }
    r.tail(i) = std::max(0.0, 1.0 - s);
    double q = Q[i];
    r.Q(i) = q;
    if (c.infinite_key()) {
      r.lo(i) = q;
      r.hi(i) = q;
    } else if (q > 0.0) {
      double rel = c.k / std::sqrt(Ncell[i] * q);
      r.lo(i) = q * (1.0 - rel);
      r.hi(i) = q * (1.0 + rel);
    } else {
      r.lo(i) = 0.0;
      r.hi(i) = c.k * c.k / Ncell[i];
    }
  }
  return r;
}

inline double variable_scale(const std::array<double, 9>& Q) {
  double s = 0;
  for (double q : Q) s = std::max(s, q);
  return s > 0 ? s : 1.0;
}

}  // namespace detail

// Y^{11} interval from the nine intensity-pair gains of one state pair
inline YieldInterval bound_yield_11(const std::array<double, 9>& Q, const std::array<double, 9>& Ncell,
                                    const DecoyConfig& c, const std::string& what = "pair") {
  c.validate();
  for (double q : Q)
    if (!(q >= 0.0 && q <= 1.0)) fail(errc::invalid_input, "gain outside [0,1] for " + what);
  const int d = c.n_cut + 1, nv = d * d;
  auto rows = detail::decoy_rows(Q, Ncell, c);
  // Y = s z keeps the LP well scaled
  const double s = detail::variable_scale(Q);

  auto build = [&](double eps) {
    lp::LinearProgram p;
    p.A = rows.A * s;
    p.b_lo.resize(9);
    p.b_hi.resize(9);
    for (int i = 0; i < 9; ++i) {
      double w = 0;
      if (eps > 0) {
        double ref = rows.Q(i);
        if (ref == 0.0) {
          ref = std::numeric_limits<double>::infinity();
          for (int j = 0; j < 9; ++j)
            if (rows.Q(j) > 0) ref = std::min(ref, rows.Q(j));
          if (!std::isfinite(ref)) ref = 0;
        }
        w = eps * ref;
      }
      p.b_lo(i) = rows.lo(i) - rows.tail(i) - w;
      p.b_hi(i) = rows.hi(i) + w;
    }
    p.x_lo = Eigen::VectorXd::Zero(nv);
    p.x_hi = Eigen::VectorXd::Constant(nv, 1.0 / s);
    p.c = Eigen::VectorXd::Zero(nv);
    p.c(1 * d + 1) = 1.0;
    return p;
  };

  YieldInterval out;
  auto p = build(0.0);
  auto lo = lp::solve(p);
  if (lo.status == lp::Status::infeasible && c.infinite_key()) {
    // smallest uniform relative widening that restores feasibility
    lp::LinearProgram w;
    w.A = Eigen::MatrixXd::Zero(18, nv + 1);
    w.b_lo = Eigen::VectorXd::Constant(18, -lp::inf);
    w.b_hi = Eigen::VectorXd::Zero(18);
    auto base = build(0.0);
    auto unit = build(1.0);
    for (int i = 0; i < 9; ++i) {
      double ref = base.b_lo(i) - unit.b_lo(i);
      w.A.block(i, 0, 1, nv) = base.A.row(i);
      w.A(i, nv) = -ref;
      w.b_hi(i) = base.b_hi(i);
      w.A.block(9 + i, 0, 1, nv) = -base.A.row(i);
      w.A(9 + i, nv) = -ref;
      w.b_hi(9 + i) = -base.b_lo(i);
    }
    w.x_lo = Eigen::VectorXd::Zero(nv + 1);
    w.x_hi = Eigen::VectorXd::Constant(nv + 1, 1.0 / s);
    w.x_hi(nv) = lp::inf;
    w.c = Eigen::VectorXd::Zero(nv + 1);
    w.c(nv) = 1.0;
    auto ws = lp::solve(w);
    if (ws.status != lp::Status::optimal)
      fail(errc::infeasible, "decoy constraints cannot be satisfied for " + what);
    out.widening = ws.objective_value * (1.0 + 1e-6) + 1e-12;
    p = build(out.widening);
    lo = lp::solve(p);
  }
  if (lo.status != lp::Status::optimal) {
    std::string rows_txt;
    for (int i : lp::infeasible_rows(p)) rows_txt += std::string(rows_txt.empty() ? "" : ", ") + k_intensity_pairs[i].label();
    fail(errc::infeasible, "decoy constraints infeasible for " + what +
                               ": gains incompatible with any photon-number decomposition (" + lp::to_string(lo.status) +
                               (rows_txt.empty() ? std::string(")") : "; offending rows: " + rows_txt + ")"));
  }
  p.sense = lp::Sense::maximize;
  auto hi = lp::solve(p);
  if (hi.status != lp::Status::optimal) fail(errc::infeasible, "decoy upper-bound LP failed for " + what);
  out.L = std::clamp(lo.objective_value * s, 0.0, 1.0);
  out.U = std::clamp(hi.objective_value * s, 0.0, 1.0);
  if (out.L > out.U) out.L = out.U;
  return out;
}

inline YieldInterval bound_yield_11(int pair, const GainsTable& g, const Grid9& counts, const DecoyConfig& c) {
  return bound_yield_11(g.row(pair), counts[pair], c, k_pairs[pair].label());
}

inline YieldBounds bound_all_yields(const GainsTable& g, const DecoyConfig& c) {
  auto counts = pulse_counts(c);
  YieldBounds b;
  for (int p = 0; p < 9; ++p) b[p] = bound_yield_11(p, g, counts, c);
  return b;
}

struct Q11Result {
  double Q11Z_L = 0;
  YieldInterval Y11Z;
  std::array<double, 9> pooled_gains{};
  std::array<double, 9> pooled_counts{};
};

inline constexpr std::array<int, 4> k_z_pairs = {0, 1, 2, 3};

// pooled Z-basis gains (P(j|Z) = P(s|Z) = 1/2) -> Q11 = mu^2 e^{-2mu} Y11_L
inline Q11Result bound_Q11Z(const GainsTable& g, const DecoyConfig& c) {
  c.validate();
  auto counts = pulse_counts(c);
  Q11Result r;
  for (int i = 0; i < 9; ++i) {
    double q = 0, n = 0;
    for (int p : k_z_pairs) {
      q += 0.25 * g.at(p, i);
      n += counts[p][i];
    }
    r.pooled_gains[i] = q;
    r.pooled_counts[i] = n;
  }
  r.Y11Z = bound_yield_11(r.pooled_gains, r.pooled_counts, c, "pooled Z basis");
  r.Q11Z_L = c.mu * c.mu * std::exp(-2.0 * c.mu) * r.Y11Z.L;
  return r;
}

// Z-basis signal gain and QBER; errors for the Psi+ outcome are equal bit values
inline double Q_mumu_Z(const GainsTable& g) {
  double s = 0;
  for (int p : k_z_pairs) s += 0.25 * g.at(p, 8);
  return s;
}

inline double E_mumu_Z(const GainsTable& g) {
  double err = g.at(0, 8) + g.at(3, 8);
  double all = err + g.at(1, 8) + g.at(2, 8);
  if (!(all > 0)) fail(errc::invalid_input, "no Z-basis signal coincidences");
  return err / all;
}

inline double N_mumu_Z(const DecoyConfig& c) {
  double pz = c.p_0Z + c.p_1Z;
  return c.N * c.p_mu * c.p_mu * pz * pz;
}

}  // namespace ltmdi
