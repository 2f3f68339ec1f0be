#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ltmdi/error.hpp"
#include "ltmdi/qstate.hpp"
#include "ltmdi/rng.hpp"

namespace ltmdi {

enum class Basis { H = 0, V = 1, D = 2, R = 3 };

inline const char* to_string(Basis b) {
  static const char* names[] = {"H", "V", "D", "R"};
  return names[static_cast<int>(b)];
}

inline Basis basis_from_string(const std::string& s) {
  if (s == "H") return Basis::H;
  if (s == "V") return Basis::V;
  if (s == "D") return Basis::D;
  if (s == "R") return Basis::R;
  fail(errc::parse, "unknown basis label '" + s + "'");
}

// waveplate settings (hwp, qwp) in radians
inline std::pair<double, double> nominal_angles(Basis b) {
  constexpr double deg = std::numbers::pi / 180.0;
  switch (b) {
    case Basis::H: return {0.0, 0.0};
    case Basis::V: return {45.0 * deg, 0.0};
    case Basis::D: return {22.5 * deg, 0.0};
    default: return {0.0, 45.0 * deg};
  }
}

struct ProjectiveRecord {
  Basis basis = Basis::H;
  double hwp = 0;  // rad
  double qwp = 0;  // rad
  std::uint64_t count = 0;
  double time_s = 10.0;
  double dead_time_s = 10e-6;
  double dark_rate_hz = 50.0;
};

inline double normalize_count(const ProjectiveRecord& r) {
  double live = r.time_s - static_cast<double>(r.count) * r.dead_time_s;
  if (!(live > 0)) fail(errc::invalid_input, "dead time exceeds the acquisition window");
  return std::max(0.0, static_cast<double>(r.count) / live - r.dark_rate_hz);
}

// U_HWP^dagger(theta) U_QWP^dagger(phi) |H>
inline Vec2 projector(double theta, double phi) {
  double c2 = std::cos(2 * theta), s2 = std::sin(2 * theta);
  Mat2 hwp;
  hwp << c2, s2, s2, -c2;
  double c = std::cos(phi), s = std::sin(phi);
  const cplx i(0, 1);
  Mat2 qwp;
  qwp << c * c + i * s * s, (1.0 - i) * c * s, (1.0 - i) * c * s, s * s + i * c * c;
  Vec2 v = hwp.adjoint() * qwp.adjoint() * Vec2(1, 0);
  return v / v.norm();
}

struct MleFit {
  DensityMatrix rho;
  double likelihood = 0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct MleProblem {
  std::array<double, 4> rates;
  std::array<Mat2, 4> proj;
  double N;
};

inline Mat2 rho_from_t(const double* t) {
  Mat2 T;
  T << t[0], 0, cplx(t[2], t[3]), t[1];
  Mat2 m = T.adjoint() * T;
  double tr = m.trace().real();
  if (!(tr > 0)) return Mat2::Identity() * 0.5;
  m /= tr;
  m(1, 0) = std::conj(m(0, 1));
  m(1, 1) = 1.0 - m(0, 0).real();
  return m;
}

inline double likelihood(const MleProblem& p, const Mat2& rho) {
  double L = 0;
  for (int k = 0; k < 4; ++k) {
    double e = std::max((p.proj[k] * rho).trace().real(), 1e-300);
    double d = p.N * e - p.rates[k];
    L += d * d / (2.0 * p.N * e);
  }
  return L;
}

inline double gsl_likelihood(const gsl_vector* v, void* params) {
  auto* p = static_cast<const MleProblem*>(params);
  double t[4] = {gsl_vector_get(v, 0), gsl_vector_get(v, 1), gsl_vector_get(v, 2), gsl_vector_get(v, 3)};
  // rho is invariant under t -> c t; the penalty pins that gauge without moving the argmin
  double g = t[0] * t[0] + t[1] * t[1] + t[2] * t[2] + t[3] * t[3] - 1.0;
  return likelihood(*p, rho_from_t(t)) + g * g;
}

// T with T^dagger T = rho (lower triangular)
inline std::array<double, 4> t_from_rho(const Mat2& rho) {
  double r11 = std::max(rho(1, 1).real(), 1e-12);
  double t2 = std::sqrt(r11);
  cplx t34 = rho(1, 0) / t2;
  double t1 = std::sqrt(std::max(rho(0, 0).real() - std::norm(t34), 1e-12));
  double n = std::sqrt(t1 * t1 + t2 * t2 + std::norm(t34));
  return {t1 / n, t2 / n, t34.real() / n, t34.imag() / n};
}

struct NmRun {
  std::array<double, 4> t;
  double f;
  int iterations;
  bool converged;
};

inline NmRun nelder_mead(const MleProblem& p, const std::array<double, 4>& t0, double step, int max_iter) {
  gsl_set_error_handler_off();
  gsl_multimin_function fn{&gsl_likelihood, 4, const_cast<MleProblem*>(&p)};
  gsl_vector* x = gsl_vector_alloc(4);
  gsl_vector* ss = gsl_vector_alloc(4);
  for (int k = 0; k < 4; ++k) gsl_vector_set(x, k, t0[k]);
  gsl_vector_set_all(ss, step);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 4);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  NmRun out{};
  int it = 0, status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && it < max_iter) {
    ++it;
    if (gsl_multimin_fminimizer_iterate(s)) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-10);
  }
  for (int k = 0; k < 4; ++k) out.t[k] = gsl_vector_get(s->x, k);
  out.f = s->fval;
  out.iterations = it;
  out.converged = status == GSL_SUCCESS;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(ss);
  return out;
}

// least-squares Bloch vector from N/2 (1 + m_k . s) = rate_k, pulled inside the ball
inline Mat2 linear_inversion(const MleProblem& p) {
  Eigen::Matrix<double, 4, 3> A;
  Eigen::Vector4d b;
  for (int k = 0; k < 4; ++k) {
    DensityMatrix pk(p.proj[k]);
    Stokes m = stokes_from_density(pk);
    A.row(k) << m.s1, m.s2, m.s3;
    b(k) = 2.0 * p.rates[k] / p.N - 1.0;
  }
  Vec3 s = A.colPivHouseholderQr().solve(b);
  if (!s.allFinite()) s.setZero();
  double n = s.norm();
  if (n > 1.0 - 1e-6) s *= (1.0 - 1e-6) / n;
  return density_from_stokes(Stokes::from(s)).mat();
}

}  // namespace detail

inline MleFit mle_fit(const std::array<double, 4>& rates, const std::array<Vec2, 4>& projectors) {
  detail::MleProblem p;
  p.rates = rates;
  for (int k = 0; k < 4; ++k) {
    if (!(rates[k] >= 0)) fail(errc::invalid_input, "negative rate passed to the MLE");
    Vec2 v = projectors[k] / projectors[k].norm();
    p.proj[k] = v * v.adjoint();
  }
  p.N = rates[0] + rates[1];
  if (!(p.N > 0)) fail(errc::invalid_input, "MLE needs a positive H+V rate");

  constexpr int budget = 20000;
  auto run_from = [&](std::array<double, 4> t0) {
    detail::NmRun r = detail::nelder_mead(p, t0, 0.1, budget);
    int total = r.iterations;
    // fresh-simplex restarts until the minimum stops moving
    for (int k = 0; k < 4; ++k) {
      Mat2 rho = detail::rho_from_t(r.t.data());
      auto t1 = detail::t_from_rho(rho);
      detail::NmRun s = detail::nelder_mead(p, t1, 1e-3, budget);
      total += s.iterations;
      bool same = std::abs(s.f - r.f) <= 1e-12 * std::max(1.0, std::abs(r.f));
      if (s.f < r.f) r = s;
      r.converged = r.converged || s.converged;
      if (same) break;
    }
    r.iterations = total;
    return r;
  };

  detail::NmRun a = run_from(detail::t_from_rho(detail::linear_inversion(p)));
  const double mixed = std::sqrt(0.5);
  detail::NmRun b = run_from({mixed, mixed, 0.0, 0.0});
  detail::NmRun best = b.f < a.f ? b : a;
  DensityMatrix rho(detail::rho_from_t(best.t.data()));
  return {rho, detail::likelihood(p, rho.mat()), a.iterations + b.iterations, a.converged || b.converged};
}

inline DensityMatrix mle_reconstruct(const std::array<double, 4>& rates, const std::array<Vec2, 4>& projectors) {
  MleFit f = mle_fit(rates, projectors);
  if (!f.converged) fail(errc::convergence, "MLE did not converge within the iteration budget");
  return f.rho;
}

// records reordered as H, V, D, R
inline std::array<ProjectiveRecord, 4> order_records(const std::vector<ProjectiveRecord>& recs) {
  std::array<std::optional<ProjectiveRecord>, 4> slot;
  for (const auto& r : recs) {
    auto i = static_cast<int>(r.basis);
    if (slot[i]) fail(errc::invalid_input, std::string("duplicate record for basis ") + to_string(r.basis));
    slot[i] = r;
  }
  std::array<ProjectiveRecord, 4> out;
  for (int i = 0; i < 4; ++i) {
    if (!slot[i]) fail(errc::missing_data, std::string("missing record for basis ") + to_string(Basis(i)));
    out[i] = *slot[i];
  }
  return out;
}

inline DensityMatrix reconstruct(const std::array<ProjectiveRecord, 4>& recs) {
  std::array<double, 4> rates;
  std::array<Vec2, 4> proj;
  for (int k = 0; k < 4; ++k) {
    rates[k] = normalize_count(recs[k]);
    proj[k] = projector(recs[k].hwp, recs[k].qwp);
  }
  return mle_reconstruct(rates, proj);
}

struct TomographyResult {
  DensityMatrix rho;
  Stokes point;
  Stokes stokes_mean;
  std::array<double, 3> stokes_std{0, 0, 0};
  std::vector<Stokes> samples;
  int failures = 0;
};

inline void summarize(TomographyResult& r) {
  const auto n = r.samples.size();
  if (n == 0) {
    r.stokes_mean = r.point;
    r.stokes_std = {0, 0, 0};
    return;
  }
  Vec3 m = Vec3::Zero();
  for (const auto& s : r.samples) m += s.vec();
  m /= static_cast<double>(n);
  Vec3 v = Vec3::Zero();
  for (const auto& s : r.samples) v += (s.vec() - m).cwiseAbs2();
  if (n > 1) v /= static_cast<double>(n - 1);
  r.stokes_mean = Stokes::from(m);
  r.stokes_std = {std::sqrt(v(0)), std::sqrt(v(1)), std::sqrt(v(2))};
}

inline TomographyResult monte_carlo(const std::array<ProjectiveRecord, 4>& recs, int n_samples, double angle_sigma,
                                    std::uint64_t seed) {
  if (n_samples < 1) fail(errc::invalid_input, "n_samples must be at least 1");
  if (!(angle_sigma >= 0)) fail(errc::invalid_input, "angle sigma must be non-negative");
  TomographyResult res;
  res.rho = reconstruct(recs);
  res.point = stokes_from_density(res.rho);
  res.samples.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    auto gc = substream(seed, static_cast<std::uint64_t>(i), stream::counts);
    auto ga = substream(seed, static_cast<std::uint64_t>(i), stream::angles);
    std::array<ProjectiveRecord, 4> draw = recs;
    for (auto& r : draw) {
      if (r.count > 0) {
        boost::random::poisson_distribution<std::uint64_t, double> pd(static_cast<double>(r.count));
        r.count = pd(gc);
      }
      if (angle_sigma > 0) {
        boost::random::normal_distribution<double> nh(r.hwp, angle_sigma), nq(r.qwp, angle_sigma);
        r.hwp = nh(ga);
        r.qwp = nq(ga);
      }
    }
    try {
      res.samples.push_back(stokes_from_density(reconstruct(draw)));
    } catch (const error& e) {
      if (e.code() != errc::convergence && e.code() != errc::invalid_input) throw;
      ++res.failures;
    }
  }
  if (res.failures * 100 > n_samples)
    fail(errc::convergence, "more than 1% of Monte-Carlo samples failed to reconstruct");
  summarize(res);
  return res;
}

// Gaussian draws of a state triple around mean Stokes vectors, pulled back into the ball
inline std::vector<std::array<Stokes, 3>> gaussian_state_draws(const std::array<Stokes, 3>& mean,
                                                               const std::array<std::array<double, 3>, 3>& sigma,
                                                               int n, std::uint64_t seed) {
  std::vector<std::array<Stokes, 3>> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    auto g = substream(seed, static_cast<std::uint64_t>(i), stream::states);
    std::array<Stokes, 3> d;
    for (int k = 0; k < 3; ++k) {
      Vec3 m = mean[k].vec();
      Vec3 v;
      for (int c = 0; c < 3; ++c) {
        boost::random::normal_distribution<double> nd(m(c), sigma[k][c]);
        v(c) = nd(g);
      }
      if (v.norm() > 1.0) v /= v.norm();
      d[k] = Stokes::from(v);
    }
    out.push_back(d);
  }
  return out;
}

template <class T>
struct WorstCase {
  T best;
  std::size_t index = 0;
  double value = 0;
  double mean = 0;
  double std = 0;
  std::size_t evaluated = 0;
  std::size_t failed = 0;
};

// max of the callback among samples within 4 standard deviations of the mean
template <class T, class F>
WorstCase<T> worst_case_states(const std::vector<T>& samples, F&& eval) {
  if (samples.empty()) fail(errc::invalid_input, "worst-case selection needs at least one sample");
  std::vector<std::optional<double>> v(samples.size());
  std::size_t ok = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    try {
      v[i] = eval(samples[i]);
      ++ok;
    } catch (const error&) {
    }
  }
  if (ok == 0) fail(errc::infeasible, "callback failed on every sample");
  WorstCase<T> w;
  w.evaluated = ok;
  w.failed = samples.size() - ok;
  for (const auto& x : v)
    if (x) w.mean += *x;
  w.mean /= static_cast<double>(ok);
  for (const auto& x : v)
    if (x) w.std += (*x - w.mean) * (*x - w.mean);
  w.std = ok > 1 ? std::sqrt(w.std / static_cast<double>(ok - 1)) : 0.0;
  bool found = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!v[i] || std::abs(*v[i] - w.mean) > 4.0 * w.std) continue;
    if (!found || *v[i] > w.value) {
      w.value = *v[i];
      w.index = i;
      found = true;
    }
  }
  w.best = samples[w.index];
  return w;
}

}  // namespace ltmdi
