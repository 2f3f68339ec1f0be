#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "ltmdi/decoy.hpp"
#include "ltmdi/keyrate.hpp"
#include "ltmdi/pipeline.hpp"
#include "ltmdi/qstate.hpp"

namespace ltmdi {

struct ChannelModel {
  double fiber_loss_db_per_km = 0.2;
  double distance_A = 0, distance_B = 0;
  double detector_efficiency = 0.2;
  double dark_prob = 1.5e-5;  // per detector per window
  double visibility_error = 0.0;
  int phase_points = 64;

  void validate() const {
    auto frac = [](double v, const char* n) {
      if (!(v >= 0.0 && v <= 1.0)) fail(errc::invalid_input, std::string(n) + " must lie in [0,1]");
    };
    frac(detector_efficiency, "detector_efficiency");
    frac(dark_prob, "dark_prob");
    frac(visibility_error, "visibility_error");
    if (!(fiber_loss_db_per_km >= 0.0)) fail(errc::invalid_input, "fiber loss must be >= 0");
    if (!(distance_A >= 0.0 && distance_B >= 0.0)) fail(errc::invalid_input, "distances must be >= 0");
    if (phase_points < 1) fail(errc::invalid_input, "phase_points must be >= 1");
  }
  double eta_A() const { return detector_efficiency * std::pow(10.0, -fiber_loss_db_per_km * distance_A / 10.0); }
  double eta_B() const { return detector_efficiency * std::pow(10.0, -fiber_loss_db_per_km * distance_B / 10.0); }

  static ChannelModel symmetric(double distance_km) {
    ChannelModel m;
    m.distance_A = m.distance_B = 0.5 * distance_km;
    return m;
  }
};

namespace detail {

inline double click(double mean, double pd) { return 1.0 - (1.0 - pd) * std::exp(-mean); }

// phase-averaged H/V coincidence at one beam-splitter output for two pure polarizations
inline double coincidence_pure(const Vec2& u, const Vec2& v, double ma, double mb, const ChannelModel& m) {
  const double pd = m.dark_prob, vis = 1.0 - m.visibility_error;
  const double sa = std::sqrt(ma), sb = std::sqrt(mb);
  double acc = 0;
  for (int k = 0; k < m.phase_points; ++k) {
    cplx ph = std::polar(1.0, 2.0 * std::numbers::pi * k / m.phase_points);
    double mean[2];
    for (int p = 0; p < 2; ++p) {
      double a2 = ma * std::norm(u(p)), b2 = mb * std::norm(v(p));
      double x = 2.0 * vis * sa * sb * std::real(std::conj(u(p)) * v(p) * ph);
      mean[p] = std::max(0.0, 0.5 * (a2 + b2 + x));
    }
    acc += click(mean[0], pd) * click(mean[1], pd);
  }
  return acc / m.phase_points;
}

inline std::array<std::pair<double, Vec2>, 2> eigen_mixture(const DensityMatrix& rho) {
  auto e = eigendecompose(rho);
  return {{{e.values[0], e.vectors[0]}, {e.values[1], e.vectors[1]}}};
}

}  // namespace detail

// Psi+ gain for one state pair and intensity pair
inline double coincidence_gain(const DensityMatrix& a, const DensityMatrix& b, double mu_a, double mu_b,
                               const ChannelModel& m) {
  double ma = mu_a * m.eta_A(), mb = mu_b * m.eta_B();
  double q = 0;
  for (const auto& [wa, u] : detail::eigen_mixture(a))
    for (const auto& [wb, v] : detail::eigen_mixture(b))
      if (wa > 0 && wb > 0) q += wa * wb * detail::coincidence_pure(u, v, ma, mb, m);
  return std::clamp(q, 0.0, 1.0);
}

// exact Y^{11} of the model: one photon from each party
inline double single_photon_yield(const DensityMatrix& a, const DensityMatrix& b, const ChannelModel& m) {
  double pd = m.dark_prob;
  double y = 0;
  for (const auto& [wa, u] : detail::eigen_mixture(a))
    for (const auto& [wb, v] : detail::eigen_mixture(b)) {
      if (wa <= 0 || wb <= 0) continue;
      // both photons survive: H/V split amplitude (u_H v_V + u_V v_H)/2 at the monitored output
      double p2 = 0.25 * std::norm(u(0) * v(1) + u(1) * v(0));
      double hh = 0.25 * std::norm(std::sqrt(2.0) * u(0) * v(0));  // both H at the output
      double vv = 0.25 * std::norm(std::sqrt(2.0) * u(1) * v(1));
      double ha = 0.5 * std::norm(u(0)), va = 0.5 * std::norm(u(1));  // one photon reaches the output
      double hb = 0.5 * std::norm(v(0)), vb = 0.5 * std::norm(v(1));
      double ea = m.eta_A(), eb = m.eta_B();
      // same-output probability equals the other output's by symmetry; the rest splits one per output
      double cc = p2 + hh + vv, cd = std::max(0.0, 1.0 - 2.0 * cc);
      double both = ea * eb * (p2 + (hh + vv) * pd + cd * pd + cc * pd * pd);
      double only_a = ea * (1.0 - eb) * ((ha + va) * pd * 1.0 + (1.0 - ha - va) * pd * pd);
      double only_b = (1.0 - ea) * eb * ((hb + vb) * pd * 1.0 + (1.0 - hb - vb) * pd * pd);
      double none = (1.0 - ea) * (1.0 - eb) * pd * pd;
      y += wa * wb * (both + only_a + only_b + none);
    }
  return std::clamp(y, 0.0, 1.0);
}

struct SimulatedData {
  GainsTable gains;
  double E_mumu_Z = 0;
  double E_mumu_X = std::numeric_limits<double>::quiet_NaN();  // needs a 1X state
};

// states: 0Z, 1Z, 0X per party
inline SimulatedData simulate_gains(const ChannelModel& model, const std::array<DensityMatrix, 3>& alice,
                                    const std::array<DensityMatrix, 3>& bob, const DecoyConfig& cfg) {
  model.validate();
  cfg.validate();
  SimulatedData d;
  for (int p = 0; p < 9; ++p)
    for (int i = 0; i < 9; ++i)
      d.gains.set(p, i,
                  coincidence_gain(alice[static_cast<int>(k_pairs[p].a)], bob[static_cast<int>(k_pairs[p].b)],
                                   cfg.intensity(k_intensity_pairs[i].a), cfg.intensity(k_intensity_pairs[i].b), model));
  d.E_mumu_Z = E_mumu_Z(d.gains);
  return d;
}

inline std::array<DensityMatrix, 3> three_states(const FlawedStates& s) {
  return {DensityMatrix::pure(s.z0), DensityMatrix::pure(s.z1), DensityMatrix::pure(s.x0)};
}

// identical flawed parties; fills the X-basis QBER from the fourth state
inline SimulatedData simulate_gains(const ChannelModel& model, double delta, const DecoyConfig& cfg) {
  auto fs = gllp_flawed_states(delta);
  auto st = three_states(fs);
  auto d = simulate_gains(model, st, st, cfg);
  double mu = cfg.mu;
  auto x0 = DensityMatrix::pure(fs.x0), x1 = DensityMatrix::pure(fs.x1);
  double c = coincidence_gain(x0, x0, mu, mu, model) + coincidence_gain(x1, x1, mu, mu, model);
  double e = coincidence_gain(x0, x1, mu, mu, model) + coincidence_gain(x1, x0, mu, mu, model);
  d.E_mumu_X = c + e > 0 ? e / (c + e) : 0.5;
  return d;
}

struct SweepConfig {
  std::vector<double> distances_km;
  std::vector<double> deltas;
  ChannelModel channel;  // distances overwritten per point, split equally
  DecoyConfig decoy;
  double f_ec = 1.16;
  PhaseErrorOptions phase;
};

struct SweepPoint {
  double distance_km = 0, delta = 0;
  double R_losstol = std::numeric_limits<double>::quiet_NaN();
  double R_gllp = std::numeric_limits<double>::quiet_NaN();
  double eX_U = std::numeric_limits<double>::quiet_NaN();
  double E_Z = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string message;
};

inline SweepPoint sweep_point(const SweepConfig& cfg, double distance_km, double delta) {
  SweepPoint pt;
  pt.distance_km = distance_km;
  pt.delta = delta;
  try {
    ChannelModel m = cfg.channel;
    m.distance_A = m.distance_B = 0.5 * distance_km;
    auto sim = simulate_gains(m, delta, cfg.decoy);
    auto fs = gllp_flawed_states(delta);
    auto st = three_states(fs);
    std::array<Stokes, 3> s{stokes_from_density(st[0]), stokes_from_density(st[1]), stokes_from_density(st[2])};
    auto res = run_pipeline(sim.gains, s, s, cfg.decoy, cfg.f_ec, cfg.phase);
    pt.R_losstol = res.rate.R;
    pt.eX_U = res.phase.eX_U;
    pt.E_Z = sim.E_mumu_Z;

    double Y11 = res.q11.Y11Z.L;
    KeyRateInputs g = res.inputs;
    if (Y11 > 0) {
      auto e = gllp_phase_error({delta, Y11, sim.E_mumu_X}, gllp_delta_ini(fs, fs));
      g.eX_U = e.eX;
    } else {
      g.eX_U = 1.0;
    }
    pt.R_gllp = secure_key_rate(g).R;
    pt.ok = true;
  } catch (const error& e) {
    pt.ok = false;
    pt.message = e.what();
  }
  return pt;
}

// grid order: delta outer, distance inner
inline std::vector<SweepPoint> run_sweep(const SweepConfig& cfg) {
  std::vector<SweepPoint> out;
  out.reserve(cfg.distances_km.size() * cfg.deltas.size());
  for (double delta : cfg.deltas)
    for (double d : cfg.distances_km) out.push_back(sweep_point(cfg, d, delta));
  return out;
}

inline std::string format_g17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& pts) {
  std::string s = "distance_km,delta,R_losstol,R_gllp,eX_U,E_Z\n";
  for (const auto& p : pts) {
    s += format_g17(p.distance_km) + "," + format_g17(p.delta) + "," + format_g17(p.R_losstol) + "," +
         format_g17(p.R_gllp) + "," + format_g17(p.eX_U) + "," + format_g17(p.E_Z) + "\n";
  }
  return s;
}

}  // namespace ltmdi
