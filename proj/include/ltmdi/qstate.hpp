#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <utility>

#include "ltmdi/error.hpp"

namespace ltmdi {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double k_phys_tol = 1e-9;
inline constexpr double k_alg_tol = 1e-12;

struct Stokes {
  double s1 = 0, s2 = 0, s3 = 0;

  double norm() const { return std::sqrt(s1 * s1 + s2 * s2 + s3 * s3); }
  Vec3 vec() const { return {s1, s2, s3}; }
  static Stokes from(const Vec3& v) { return {v(0), v(1), v(2)}; }
};

inline bool is_physical(const Mat2& m, double tol = k_alg_tol) {
  if (std::abs(m(0, 1) - std::conj(m(1, 0))) > tol) return false;
  if (std::abs(m(0, 0).imag()) > tol || std::abs(m(1, 1).imag()) > tol) return false;
  if (std::abs(m(0, 0).real() + m(1, 1).real() - 1.0) > tol) return false;
  // eigenvalues of a 2x2 hermitian unit-trace matrix: (1 +- r)/2
  double a = m(0, 0).real(), d = m(1, 1).real();
  double r = std::sqrt((a - d) * (a - d) + 4.0 * std::norm(m(0, 1)));
  return (1.0 - r) / 2.0 >= -tol;
}

class DensityMatrix {
 public:
  DensityMatrix() { m_ << 0.5, 0, 0, 0.5; }

  // validates; throws invalid_input
  explicit DensityMatrix(const Mat2& m) : m_(m) {
    if (!is_physical(m_)) fail(errc::invalid_input, "matrix is not a valid density matrix");
  }

  static DensityMatrix pure(const Vec2& psi) {
    Vec2 v = psi / psi.norm();
    Mat2 m = v * v.adjoint();
    m(0, 0) = m(0, 0).real();
    m(1, 1) = 1.0 - m(0, 0).real();
    m(1, 0) = std::conj(m(0, 1));
    return DensityMatrix(m);
  }

  const Mat2& mat() const { return m_; }
  cplx operator()(int i, int j) const { return m_(i, j); }

 private:
  Mat2 m_;
};

inline Stokes stokes_from_density(const DensityMatrix& rho) {
  const Mat2& m = rho.mat();
  return {2.0 * m(0, 1).real(), -2.0 * m(0, 1).imag(), m(0, 0).real() - m(1, 1).real()};
}

inline DensityMatrix density_from_stokes(const Stokes& s) {
  if (!(s.norm() <= 1.0 + k_phys_tol)) fail(errc::invalid_input, "Bloch vector longer than 1");
  Mat2 m;
  m(0, 0) = 0.5 * (1.0 + s.s3);
  m(1, 1) = 0.5 * (1.0 - s.s3);
  m(0, 1) = cplx(0.5 * s.s1, -0.5 * s.s2);
  m(1, 0) = cplx(0.5 * s.s1, 0.5 * s.s2);
  // |s| in (1, 1+tol] is allowed; shrink onto the sphere
  double n = s.norm();
  if (n > 1.0) {
    m(0, 0) = 0.5 * (1.0 + s.s3 / n);
    m(1, 1) = 0.5 * (1.0 - s.s3 / n);
    m(0, 1) /= n;
    m(1, 0) /= n;
  }
  return DensityMatrix(m);
}

// qubit closed form: F^2 = Tr(rho sigma) + 2 sqrt(det rho det sigma)
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  double tr = (rho.mat() * sigma.mat()).trace().real();
  double d1 = std::max(0.0, rho.mat().determinant().real());
  double d2 = std::max(0.0, sigma.mat().determinant().real());
  double f2 = tr + 2.0 * std::sqrt(d1 * d2);
  return std::sqrt(std::clamp(f2, 0.0, 1.0));
}

inline double overlap(const DensityMatrix& rho, const DensityMatrix& sigma) {
  double f = fidelity(rho, sigma);
  return f * f;
}

struct Eigensystem {
  std::array<double, 2> values;  // descending
  std::array<Vec2, 2> vectors;
};

namespace detail {

// +1 eigenvector of n.sigma for a unit vector n; largest component real-positive
inline Vec2 bloch_ket(const Vec3& n) {
  double c = std::sqrt(std::max(0.0, 0.5 * (1.0 + n(2))));
  double s = std::sqrt(std::max(0.0, 0.5 * (1.0 - n(2))));
  double rho = std::hypot(n(0), n(1));
  cplx ph = rho > 0 ? cplx(n(0), n(1)) / rho : cplx(1.0, 0.0);
  if (c >= s) return {cplx(c, 0), ph * s};
  return {std::conj(ph) * c, cplx(s, 0)};
}

}  // namespace detail

inline Eigensystem eigendecompose(const DensityMatrix& rho) {
  Stokes s = stokes_from_density(rho);
  double r = std::min(1.0, s.norm());
  Eigensystem e;
  e.values = {0.5 * (1.0 + r), 0.5 * (1.0 - r)};
  if (e.values[0] - e.values[1] < k_alg_tol) {
    e.vectors = {Vec2(1, 0), Vec2(0, 1)};
    return e;
  }
  Vec3 n = s.vec() / s.norm();
  e.vectors = {detail::bloch_ket(n), detail::bloch_ket(-n)};
  return e;
}

struct VirtualState {
  DensityMatrix state;
  double weight = 0;
};

inline std::pair<VirtualState, VirtualState> virtual_states(const DensityMatrix& rho_0Z,
                                                            const DensityMatrix& rho_1Z) {
  Eigensystem e0 = eigendecompose(rho_0Z), e1 = eigendecompose(rho_1Z);
  Mat2 cross = Mat2::Zero();
  for (int k = 0; k < 2; ++k) {
    double amp = std::sqrt(std::max(0.0, e0.values[k]) * std::max(0.0, e1.values[k]));
    Mat2 t = e0.vectors[k] * e1.vectors[k].adjoint();
    cross += amp * (t + t.adjoint());
  }
  Mat2 base = rho_0Z.mat() + rho_1Z.mat();
  std::array<VirtualState, 2> out;
  for (int j = 0; j < 2; ++j) {
    Mat2 m = 0.25 * (base + (j == 0 ? 1.0 : -1.0) * cross);
    double w = m.trace().real();
    if (w < k_alg_tol) fail(errc::invalid_input, "degenerate virtual state: weight below 1e-12");
    Mat2 sig = m / w;
    sig(1, 0) = std::conj(sig(0, 1));
    sig(0, 0) = sig(0, 0).real();
    sig(1, 1) = 1.0 - sig(0, 0).real();
    out[j] = {DensityMatrix(sig), w};
  }
  return {out[0], out[1]};
}

inline Stokes rotate(const Mat3& R, const Stokes& s) { return Stokes::from(R * s.vec()); }

// q root of S(1-2q+2q^2) = 2q-1 inside [0,1]
inline double filter_q(double common_SY) {
  if (!(std::abs(common_SY) < 1.0)) fail(errc::invalid_input, "filter undefined for |S_Y| >= 1");
  double S = common_SY;
  return (S + 1.0) / (S + 1.0 + std::sqrt(1.0 - S * S));
}

inline double filter_gain(double q) { return 2.0 * (1.0 - q) * q / (1.0 - 2.0 * q + 2.0 * q * q); }

inline Stokes filter_to_plane(const Stokes& s, double common_SY) {
  double f = filter_gain(filter_q(common_SY));
  Stokes out{s.s1 / f, 0.0, s.s3 / f};
  if (out.norm() > 1.0 + k_phys_tol)
    fail(errc::invalid_input, "filtered state leaves the Bloch ball; inputs inconsistent with S_Y");
  return out;
}

struct SourceCharacterization {
  DensityMatrix rho_0Z, rho_1Z, rho_0X;  // rotated frame
  double common_SY = 0;
  std::array<Stokes, 3> in_plane;
  Mat3 rotation = Mat3::Identity();
};

namespace detail {

inline Mat3 skew(const Vec3& k) {
  Mat3 K;
  K << 0, -k(2), k(1), k(2), 0, -k(0), -k(1), k(0), 0;
  return K;
}

// rotation taking unit n onto +y (n.y >= 0 assumed)
inline Mat3 rotation_to_y(const Vec3& n) {
  Vec3 y(0, 1, 0);
  Vec3 k = n.cross(y);
  double c = n.dot(y);
  if (k.norm() < 1e-15) return Mat3::Identity();
  Mat3 K = skew(k);
  return Mat3::Identity() + K + K * K / (1.0 + c);
}

}  // namespace detail

inline SourceCharacterization rotate_to_common_Y(const DensityMatrix& rho_0Z, const DensityMatrix& rho_1Z,
                                                 const DensityMatrix& rho_0X) {
  std::array<Vec3, 3> r = {stokes_from_density(rho_0Z).vec(), stokes_from_density(rho_1Z).vec(),
                           stokes_from_density(rho_0X).vec()};
  Vec3 y(0, 1, 0);
  Vec3 d1 = r[0] - r[1], d2 = r[0] - r[2];
  Vec3 n = d1.cross(d2);
  double scale = std::max({d1.norm() * d2.norm(), 1e-300});
  if (n.norm() > 1e-13 * scale && n.norm() > 1e-15) {
    n.normalize();
  } else {
    // collinear or coincident
    Vec3 d = d1.norm() >= d2.norm() ? d1 : d2;
    if (d.norm() < 1e-15) {
      n = y;
    } else {
      d.normalize();
      n = y - y.dot(d) * d;
      if (n.norm() < 1e-12) n = Vec3(1, 0, 0) - d(0) * d;
      n.normalize();
    }
  }
  if (n(1) < 0) n = -n;

  Mat3 R = detail::rotation_to_y(n);
  if ((R * r[0])(2) < 0) {
    Mat3 flip;
    flip << -1, 0, 0, 0, 1, 0, 0, 0, -1;
    R = flip * R;
  }

  SourceCharacterization sc;
  std::array<Stokes, 3> rot;
  for (int i = 0; i < 3; ++i) rot[i] = Stokes::from(R * r[i]);
  sc.rho_0Z = density_from_stokes(rot[0]);
  sc.rho_1Z = density_from_stokes(rot[1]);
  sc.rho_0X = density_from_stokes(rot[2]);
  sc.common_SY = (rot[0].s2 + rot[1].s2 + rot[2].s2) / 3.0;
  sc.rotation = R;
  for (int i = 0; i < 3; ++i) sc.in_plane[i] = filter_to_plane(rot[i], sc.common_SY);
  return sc;
}

inline SourceCharacterization rotate_to_common_Y(const Stokes& s0Z, const Stokes& s1Z, const Stokes& s0X) {
  return rotate_to_common_Y(density_from_stokes(s0Z), density_from_stokes(s1Z), density_from_stokes(s0X));
}

}  // namespace ltmdi
