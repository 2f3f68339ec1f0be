#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ltmdi/error.hpp"

namespace ltmdi::lp {

inline constexpr double inf = std::numeric_limits<double>::infinity();

enum class Sense { minimize, maximize };
enum class Status { optimal, infeasible, unbounded, numerical_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    default: return "numerical_failure";
  }
}

// minimize/maximize c.x  s.t.  b_lo <= A x <= b_hi,  x_lo <= x <= x_hi
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b_lo, b_hi;
  Eigen::VectorXd x_lo, x_hi;
  Sense sense = Sense::minimize;
};

struct Solution {
  Status status = Status::numerical_failure;
  Eigen::VectorXd x;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double max_violation = 0;
};

struct Options {
  double feas_tol = 1e-9;
  double opt_tol = 1e-12;
  double pivot_tol = 1e-11;
  int max_iter = 100000;
};

namespace detail {

class Tableau {
 public:
  // rows of [a | rhs], a ≤ or = row, already with rhs >= 0 after sign fix
  Tableau(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const std::vector<bool>& is_eq, const Options& opt)
      : opt_(opt) {
    m_ = static_cast<int>(a.rows());
    n_ = static_cast<int>(a.cols());
    n_slack_ = 0;
    for (bool e : is_eq)
      if (!e) ++n_slack_;
    // artificials for every row whose slack cannot start basic
    std::vector<int> slack_col(m_, -1);
    std::vector<double> sgn(m_, 1.0);
    int sc = n_;
    for (int i = 0; i < m_; ++i) {
      if (!is_eq[i]) slack_col[i] = sc++;
      if (b(i) < 0) sgn[i] = -1.0;
    }
    n_art_ = 0;
    for (int i = 0; i < m_; ++i)
      if (is_eq[i] || sgn[i] < 0) ++n_art_;
    cols_ = n_ + n_slack_ + n_art_;
    T_ = Eigen::MatrixXd::Zero(m_ + 1, cols_ + 1);
    basis_.assign(m_, -1);
    int ac = n_ + n_slack_;
    for (int i = 0; i < m_; ++i) {
      T_.row(i).head(n_) = sgn[i] * a.row(i);
      if (slack_col[i] >= 0) T_(i, slack_col[i]) = sgn[i];
      T_(i, cols_) = sgn[i] * b(i);
      if (is_eq[i] || sgn[i] < 0) {
        T_(i, ac) = 1.0;
        basis_[i] = ac++;
      } else {
        basis_[i] = slack_col[i];
      }
    }
    A0_ = T_.topRows(m_);
  }

  int cols() const { return cols_; }
  int first_art() const { return n_ + n_slack_; }
  int iterations() const { return iter_; }

  void set_objective(const Eigen::VectorXd& cost) {
    T_.row(m_).setZero();
    T_.row(m_).head(cost.size()) = cost.transpose();
    for (int i = 0; i < m_; ++i) {
      double cb = basis_[i] < cost.size() ? cost(basis_[i]) : 0.0;
      if (cb != 0.0) T_.row(m_) -= cb * T_.row(i);
    }
  }

  // returns 0 optimal, 1 unbounded, 2 iteration limit
  int run(int allowed_cols) {
    while (true) {
      if (++iter_ > opt_.max_iter) return 2;
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j) {
        if (T_(m_, j) < -opt_.opt_tol && !is_basic(j)) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return 0;
      int leave = -1;
      double best = inf;
      for (int i = 0; i < m_; ++i) {
        double aij = T_(i, enter);
        if (aij <= opt_.pivot_tol) continue;
        double ratio = std::max(0.0, T_(i, cols_)) / aij;
        double slack = 1e-12 * std::max(1.0, best == inf ? ratio : best);
        if (leave < 0 || ratio < best - slack) {
          leave = i;
          best = ratio;
        } else if (ratio <= best + slack && basis_[i] < basis_[leave]) {
          leave = i;
          best = std::min(best, ratio);
        }
      }
      if (leave < 0) return 1;
      pivot(leave, enter);
    }
  }

  double objective_row_rhs() const { return -T_(m_, cols_); }

  // pivot artificials out of the basis after phase one; drop rows that stay redundant
  void purge_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < first_art()) continue;
      int best = -1;
      double mag = opt_.pivot_tol;
      for (int j = 0; j < first_art(); ++j) {
        if (!is_basic(j) && std::abs(T_(i, j)) > mag) {
          mag = std::abs(T_(i, j));
          best = j;
        }
      }
      if (best >= 0) pivot(i, best);
      else redundant_.push_back(i);
    }
  }

  Eigen::VectorXd primal() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(cols_);
    for (int i = 0; i < m_; ++i) x(basis_[i]) = T_(i, cols_);
    return x;
  }

  // recompute basic values from the original rows for the final basis
  bool refine(Eigen::VectorXd& x) const {
    std::vector<int> rows;
    for (int i = 0; i < m_; ++i)
      if (std::find(redundant_.begin(), redundant_.end(), i) == redundant_.end()) rows.push_back(i);
    int k = static_cast<int>(rows.size());
    std::vector<int> bcols;
    for (int i : rows) bcols.push_back(basis_[i]);
    Eigen::MatrixXd B(k, k);
    Eigen::VectorXd rhs(k);
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < k; ++c) B(r, c) = A0_(rows[r], bcols[c]);
      rhs(r) = A0_(rows[r], cols_);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    if (!lu.isInvertible()) return false;
    Eigen::VectorXd xb = lu.solve(rhs);
    if (!xb.allFinite()) return false;
    x = Eigen::VectorXd::Zero(cols_);
    for (int c = 0; c < k; ++c) x(bcols[c]) = std::max(0.0, xb(c));
    return true;
  }

 private:
  bool is_basic(int j) const { return std::find(basis_.begin(), basis_.end(), j) != basis_.end(); }

  void pivot(int r, int c) {
    T_.row(r) /= T_(r, c);
    for (int i = 0; i <= m_; ++i) {
      if (i == r) continue;
      double f = T_(i, c);
      if (f != 0.0) T_.row(i) -= f * T_.row(r);
    }
    basis_[r] = c;
  }

  Options opt_;
  int m_ = 0, n_ = 0, n_slack_ = 0, n_art_ = 0, cols_ = 0, iter_ = 0;
  Eigen::MatrixXd T_, A0_;
  std::vector<int> basis_;
  std::vector<int> redundant_;
};

}  // namespace detail

inline void validate(const LinearProgram& lp) {
  auto n = lp.c.size();
  if (lp.A.cols() != n || lp.x_lo.size() != n || lp.x_hi.size() != n || lp.b_lo.size() != lp.A.rows() ||
      lp.b_hi.size() != lp.A.rows())
    fail(errc::invalid_input, "linear program dimensions are inconsistent");
  for (Eigen::Index i = 0; i < lp.b_lo.size(); ++i)
    if (!(lp.b_lo(i) <= lp.b_hi(i))) fail(errc::invalid_input, "constraint row with b_lo > b_hi");
  for (Eigen::Index j = 0; j < n; ++j)
    if (!(lp.x_lo(j) <= lp.x_hi(j))) fail(errc::invalid_input, "variable box with x_lo > x_hi");
}

// largest violation of the two-sided rows and the boxes
inline double violation(const LinearProgram& lp, const Eigen::VectorXd& x) {
  double v = 0;
  Eigen::VectorXd ax = lp.A * x;
  for (Eigen::Index i = 0; i < ax.size(); ++i) {
    double s = std::max(1.0, lp.A.row(i).cwiseAbs().maxCoeff());
    v = std::max(v, (lp.b_lo(i) - ax(i)) / s);
    v = std::max(v, (ax(i) - lp.b_hi(i)) / s);
  }
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    v = std::max(v, lp.x_lo(j) - x(j));
    v = std::max(v, x(j) - lp.x_hi(j));
  }
  return v;
}

// two-phase dense simplex, Bland's rule, row equilibration
inline Solution solve(const LinearProgram& lp, const Options& opt = {}) {
  validate(lp);
  const int n = static_cast<int>(lp.c.size());

  // x = offset + M y, y >= 0
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
  std::vector<std::pair<int, double>> map;  // (x index, sign) per y column
  std::vector<double> yub;
  for (int j = 0; j < n; ++j) {
    double lo = lp.x_lo(j), hi = lp.x_hi(j);
    if (std::isfinite(lo)) {
      offset(j) = lo;
      map.push_back({j, 1.0});
      yub.push_back(std::isfinite(hi) ? hi - lo : inf);
    } else if (std::isfinite(hi)) {
      offset(j) = hi;
      map.push_back({j, -1.0});
      yub.push_back(inf);
    } else {
      map.push_back({j, 1.0});
      yub.push_back(inf);
      map.push_back({j, -1.0});
      yub.push_back(inf);
    }
  }
  const int ny = static_cast<int>(map.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, ny);
  for (int k = 0; k < ny; ++k) M(map[k].first, k) = map[k].second;

  Eigen::MatrixXd Ay = lp.A * M;
  Eigen::VectorXd shift = lp.A * offset;

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  std::vector<bool> eq;
  Solution sol;
  auto push = [&](const Eigen::VectorXd& a, double b, bool e) {
    double s = a.cwiseAbs().maxCoeff();
    if (s == 0.0) {
      bool ok = e ? std::abs(b) <= opt.feas_tol : b >= -opt.feas_tol;
      if (!ok) sol.status = Status::infeasible;
      return;
    }
    rows.push_back(a / s);
    rhs.push_back(b / s);
    eq.push_back(e);
  };
  for (Eigen::Index i = 0; i < lp.A.rows(); ++i) {
    double lo = lp.b_lo(i) - shift(i), hi = lp.b_hi(i) - shift(i);
    Eigen::VectorXd a = Ay.row(i).transpose();
    if (std::isfinite(lo) && std::isfinite(hi) && lo == hi) {
      push(a, hi, true);
      continue;
    }
    if (std::isfinite(hi)) push(a, hi, false);
    if (std::isfinite(lo)) push(-a, -lo, false);
  }
  for (int k = 0; k < ny; ++k) {
    if (!std::isfinite(yub[k])) continue;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(ny);
    a(k) = 1.0;
    push(a, yub[k], false);
  }
  if (sol.status == Status::infeasible) return sol;

  Eigen::VectorXd cy = M.transpose() * lp.c;
  if (lp.sense == Sense::maximize) cy = -cy;

  auto finish = [&](const Eigen::VectorXd& y) {
    sol.x = offset + M * y.head(ny);
    for (int j = 0; j < n; ++j) sol.x(j) = std::clamp(sol.x(j), lp.x_lo(j), lp.x_hi(j));
    sol.objective_value = lp.c.dot(sol.x);
    sol.max_violation = violation(lp, sol.x);
  };

  if (rows.empty()) {
    // only unconstrained directions remain
    Eigen::VectorXd y = Eigen::VectorXd::Zero(ny);
    for (int k = 0; k < ny; ++k) {
      if (cy(k) < 0) {
        sol.status = Status::unbounded;
        return sol;
      }
    }
    sol.status = Status::optimal;
    finish(y);
    return sol;
  }

  const int m = static_cast<int>(rows.size());
  Eigen::MatrixXd a(m, ny);
  Eigen::VectorXd b(m);
  for (int i = 0; i < m; ++i) {
    a.row(i) = rows[i].transpose();
    b(i) = rhs[i];
  }

  detail::Tableau tab(a, b, eq, opt);
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(tab.cols());
  for (int j = tab.first_art(); j < tab.cols(); ++j) c1(j) = 1.0;
  tab.set_objective(c1);
  int rc = tab.run(tab.cols());
  sol.iterations = tab.iterations();
  if (rc == 2) return sol;
  if (tab.objective_row_rhs() > opt.feas_tol) {
    sol.status = Status::infeasible;
    return sol;
  }
  tab.purge_artificials();

  Eigen::VectorXd c2 = Eigen::VectorXd::Zero(tab.cols());
  c2.head(ny) = cy;
  tab.set_objective(c2);
  rc = tab.run(tab.first_art());
  sol.iterations = tab.iterations();
  if (rc == 2) return sol;
  if (rc == 1) {
    sol.status = Status::unbounded;
    return sol;
  }

  Eigen::VectorXd y = tab.primal();
  for (int k = 0; k < y.size(); ++k) y(k) = std::max(0.0, y(k));
  finish(y);
  Eigen::VectorXd yr;
  if (tab.refine(yr)) {
    Solution alt = sol;
    sol.x = offset + M * yr.head(ny);
    for (int j = 0; j < n; ++j) sol.x(j) = std::clamp(sol.x(j), lp.x_lo(j), lp.x_hi(j));
    sol.objective_value = lp.c.dot(sol.x);
    sol.max_violation = violation(lp, sol.x);
    if (sol.max_violation > std::max(alt.max_violation, opt.feas_tol)) sol = alt;
  }
  sol.status = sol.max_violation <= 1e3 * opt.feas_tol ? Status::optimal : Status::numerical_failure;
  return sol;
}

// rows that must be relaxed in the least-violation (elastic) problem; empty if feasible
inline std::vector<int> infeasible_rows(const LinearProgram& lp, const Options& opt = {}) {
  validate(lp);
  const Eigen::Index n = lp.c.size(), m = lp.A.rows();
  LinearProgram e;
  e.A = Eigen::MatrixXd::Zero(m, n + 2 * m);
  e.A.leftCols(n) = lp.A;
  e.c = Eigen::VectorXd::Zero(n + 2 * m);
  e.x_lo = Eigen::VectorXd::Zero(n + 2 * m);
  e.x_hi = Eigen::VectorXd::Constant(n + 2 * m, inf);
  e.x_lo.head(n) = lp.x_lo;
  e.x_hi.head(n) = lp.x_hi;
  e.b_lo = lp.b_lo;
  e.b_hi = lp.b_hi;
  for (Eigen::Index i = 0; i < m; ++i) {
    double s = std::max(lp.A.row(i).cwiseAbs().maxCoeff(), 1e-300);
    e.A(i, n + 2 * i) = s;
    e.A(i, n + 2 * i + 1) = -s;
    e.c(n + 2 * i) = e.c(n + 2 * i + 1) = 1.0;
  }
  auto sol = solve(e, opt);
  std::vector<int> out;
  if (sol.status != Status::optimal) return out;
  for (Eigen::Index i = 0; i < m; ++i)
    if (sol.x(n + 2 * i) + sol.x(n + 2 * i + 1) > 10 * opt.feas_tol) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace ltmdi::lp
