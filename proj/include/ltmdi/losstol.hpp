#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ltmdi/decoy.hpp"
#include "ltmdi/error.hpp"
#include "ltmdi/lp.hpp"
#include "ltmdi/qstate.hpp"

namespace ltmdi {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

// q order: II, IX, IZ, XI, XX, XZ, ZI, ZX, ZZ (Alice first)
inline constexpr std::array<const char*, 9> k_pauli_labels = {"II", "IX", "IZ", "XI", "XX", "XZ", "ZI", "ZX", "ZZ"};

inline constexpr double k_plane_tol = 1e-9;

inline Vec9 build_row(const Stokes& a, const Stokes& b) {
  if (std::abs(a.s2) > k_plane_tol || std::abs(b.s2) > k_plane_tol)
    fail(errc::invalid_input, "transmission row needs in-plane states (s2 = 0)");
  Vec9 r;
  r << 1.0, b.s1, b.s3, a.s1, a.s1 * b.s1, a.s1 * b.s3, a.s3, a.s3 * b.s1, a.s3 * b.s3;
  return r;
}

struct TransmissionSystem {
  Mat9 S;
  double condition = 0;
};

// rows follow k_pairs: 0Z0Z 0Z1Z 1Z0Z 1Z1Z 0X0Z 0X1Z 0Z0X 1Z0X 0X0X
inline TransmissionSystem build_system(const std::array<Stokes, 3>& A, const std::array<Stokes, 3>& B) {
  TransmissionSystem t;
  for (int p = 0; p < 9; ++p)
    t.S.row(p) = build_row(A[static_cast<int>(k_pairs[p].a)], B[static_cast<int>(k_pairs[p].b)]).transpose();
  Eigen::JacobiSVD<Mat9> svd(t.S);
  auto sv = svd.singularValues();
  double smin = sv(8);
  t.condition = smin > 0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  if (!(t.condition <= 1e10))
    fail(errc::singular, "transmission system is singular (condition number " + std::to_string(t.condition) +
                             "); source states are too close to degenerate");
  return t;
}

inline Vec9 solve_q_exact(const TransmissionSystem& sys, const Vec9& Y) {
  if (!(sys.condition <= 1e10)) fail(errc::singular, "transmission system is singular");
  Vec9 q = sys.S.fullPivLu().solve(Y);
  // one step of refinement
  q += sys.S.fullPivLu().solve(Y - sys.S * q);
  return q;
}

// virtual X-basis states of one party, as in-plane Bloch vectors with weights Tr[sigma_vir]
struct VirtualPair {
  std::array<Stokes, 2> state;
  std::array<double, 2> weight{};
};

inline VirtualPair make_virtual_pair(const Stokes& s0Z, const Stokes& s1Z) {
  auto [v0, v1] = virtual_states(density_from_stokes(s0Z), density_from_stokes(s1Z));
  VirtualPair v;
  v.state = {stokes_from_density(v0.state), stokes_from_density(v1.state)};
  v.weight = {v0.weight, v1.weight};
  return v;
}

inline VirtualPair make_virtual_pair(const SourceCharacterization& sc) {
  return make_virtual_pair(sc.in_plane[0], sc.in_plane[1]);
}

struct VirtualObjective {
  Vec9 correct, error;
};

// Psi+ in the X basis: equal virtual values are correct, (0,1) and (1,0) are errors
inline VirtualObjective virtual_objective(const VirtualPair& A, const VirtualPair& B) {
  auto y = [&](int j, int s) -> Vec9 { return (A.weight[j] * B.weight[s]) * build_row(A.state[j], B.state[s]); };
  return {y(0, 0) + y(1, 1), y(0, 1) + y(1, 0)};
}

inline double phase_error_exact(const Vec9& q, const VirtualPair& A, const VirtualPair& B) {
  auto o = virtual_objective(A, B);
  double c = o.correct.dot(q), e = o.error.dot(q);
  if (!(c + e > 0)) fail(errc::infeasible, "no virtual coincidences: phase error undefined");
  return std::clamp(e / (c + e), 0.0, 1.0);
}

// 64 in-plane Bloch pairs on the unit circle
inline std::vector<Vec9> physicality_grid() {
  std::vector<Vec9> g;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double a = 2.0 * std::numbers::pi * i / 8, b = 2.0 * std::numbers::pi * j / 8;
      g.push_back(build_row({std::sin(a), 0, std::cos(a)}, {std::sin(b), 0, std::cos(b)}));
    }
  return g;
}

struct PhaseErrorOptions {
  bool physicality_grid = false;
  double tol = 1e-9;
};

struct PhaseErrorReport {
  double eX_U = 0;
  double corr_L = 0, err_U = 0;
  Vec9 q_corr = Vec9::Zero(), q_err = Vec9::Zero();
  std::vector<std::string> active_corr, active_err;
  double condition = 0;
};

namespace detail {

inline std::vector<std::string> active_set(const lp::LinearProgram& p, const Eigen::VectorXd& z, double tol) {
  std::vector<std::string> out;
  Eigen::VectorXd v = p.A * z;
  for (int i = 0; i < p.A.rows(); ++i) {
    std::string name = i < 9 ? "Y[" + k_pairs[i].label() + "]" : "grid[" + std::to_string(i - 9) + "]";
    double s = std::max(1.0, std::abs(p.b_hi(i)));
    if (std::abs(v(i) - p.b_lo(i)) <= tol * s) out.push_back(name + ">=L");
    if (p.b_hi(i) > p.b_lo(i) && std::abs(v(i) - p.b_hi(i)) <= tol * s) out.push_back(name + "<=U");
  }
  for (int j = 0; j < 9; ++j) {
    double s = std::max(1.0, std::abs(p.x_hi(j)));
    if (std::abs(z(j) - p.x_lo(j)) <= tol * s) out.push_back(std::string("q_") + k_pauli_labels[j] + ">=min");
    if (std::abs(z(j) - p.x_hi(j)) <= tol * s) out.push_back(std::string("q_") + k_pauli_labels[j] + "<=max");
  }
  return out;
}

}  // namespace detail

inline PhaseErrorReport bound_phase_error(const YieldBounds& bounds, const std::array<Stokes, 3>& A,
                                          const std::array<Stokes, 3>& B, const VirtualPair& vA, const VirtualPair& vB,
                                          const PhaseErrorOptions& opt = {}) {
  double s = 0;
  for (const auto& b : bounds) {
    if (!(0.0 <= b.L && b.L <= b.U && b.U <= 1.0)) fail(errc::invalid_input, "yield bounds must satisfy 0 <= L <= U <= 1");
    s = std::max(s, b.U);
  }
  if (s <= 0) s = 1.0;
  auto sys = build_system(A, B);
  auto obj = virtual_objective(vA, vB);

  // q = s z
  lp::LinearProgram p;
  std::vector<Vec9> grid;
  if (opt.physicality_grid) grid = physicality_grid();
  const int m = 9 + static_cast<int>(grid.size());
  p.A.resize(m, 9);
  p.b_lo.resize(m);
  p.b_hi.resize(m);
  p.A.topRows(9) = sys.S;
  for (int i = 0; i < 9; ++i) {
    p.b_lo(i) = bounds[i].L / s;
    p.b_hi(i) = bounds[i].U / s;
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    p.A.row(9 + g) = grid[g].transpose();
    p.b_lo(9 + g) = 0.0;
    p.b_hi(9 + g) = 1.0 / s;
  }
  p.x_lo = Eigen::VectorXd::Constant(9, -1.0 / s);
  p.x_hi = Eigen::VectorXd::Constant(9, 1.0 / s);
  p.x_lo(0) = 0.0;

  auto check = [&](const lp::Solution& sol, const char* which) {
    if (sol.status == lp::Status::optimal) return;
    if (sol.status == lp::Status::infeasible) {
      std::string rows;
      for (int i : lp::infeasible_rows(p))
        rows += (rows.empty() ? "" : ", ") + (i < 9 ? "Y[" + k_pairs[i].label() + "]" : "grid[" + std::to_string(i - 9) + "]");
      fail(errc::infeasible, std::string("phase-error LP infeasible: yield bounds inconsistent with the source states") +
                                 (rows.empty() ? "" : " (offending rows: " + rows + ")"));
    }
    fail(errc::infeasible, std::string("phase-error LP (") + which + ") failed: " + lp::to_string(sol.status));
  };

  PhaseErrorReport r;
  r.condition = sys.condition;
  p.c = obj.correct;
  p.sense = lp::Sense::minimize;
  auto lo = lp::solve(p);
  check(lo, "correct-pair minimum");
  r.corr_L = std::max(0.0, lo.objective_value * s);
  r.q_corr = lo.x * s;
  r.active_corr = detail::active_set(p, lo.x, opt.tol);

  p.c = obj.error;
  p.sense = lp::Sense::maximize;
  auto hi = lp::solve(p);
  check(hi, "error-pair maximum");
  r.err_U = std::max(0.0, hi.objective_value * s);
  r.q_err = hi.x * s;
  r.active_err = detail::active_set(p, hi.x, opt.tol);

  if (r.err_U <= 0.0) r.eX_U = 0.0;
  else if (r.corr_L <= 0.0) r.eX_U = 1.0;
  else r.eX_U = std::clamp(1.0 / (1.0 + r.corr_L / r.err_U), 0.0, 1.0);
  return r;
}

inline PhaseErrorReport bound_phase_error(const YieldBounds& bounds, const SourceCharacterization& alice,
                                          const SourceCharacterization& bob, const PhaseErrorOptions& opt = {}) {
  return bound_phase_error(bounds, alice.in_plane, bob.in_plane, make_virtual_pair(alice), make_virtual_pair(bob), opt);
}

}  // namespace ltmdi
