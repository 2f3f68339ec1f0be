#include <gtest/gtest.h>

#include <random>

#include "ltmdi/qstate.hpp"

using namespace ltmdi;

namespace {

const Stokes meas_0Z{-0.0032, 0.0106, 0.9994};
const Stokes meas_1Z{-0.0375, -0.0662, -0.9962};
const Stokes meas_0X{-0.6963, 0.7163, -0.0128};

// independent oracle: Tr sqrt(sqrt(rho) sigma sqrt(rho)) via hermitian eigendecomposition
Mat2 msqrt(const Mat2& m) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(m);
  Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

double fidelity_oracle(const DensityMatrix& a, const DensityMatrix& b) {
  Mat2 s = msqrt(a.mat());
  Mat2 inner = s * b.mat() * s;
  Eigen::SelfAdjointEigenSolver<Mat2> es(inner);
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

Stokes random_ball(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(-1, 1);
  while (true) {
    Stokes s{u(g), u(g), u(g)};
    if (s.norm() <= 1) return s;
  }
}

Stokes random_sphere(std::mt19937_64& g) {
  std::normal_distribution<double> n(0, 1);
  Vec3 v(n(g), n(g), n(g));
  return Stokes::from(v.normalized());
}

double dist(const Mat2& a, const Mat2& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Stokes, MaximallyMixedAndPoles) {
  auto s = stokes_from_density(DensityMatrix());
  EXPECT_EQ(s.s1, 0);
  EXPECT_EQ(s.s2, 0);
  EXPECT_EQ(s.s3, 0);
  auto h = stokes_from_density(DensityMatrix::pure(Vec2(1, 0)));
  EXPECT_NEAR(h.s3, 1, 1e-15);
  EXPECT_NEAR(h.s1, 0, 1e-15);
}

TEST(Stokes, ReconstructedZeroX) {
  auto s = stokes_from_density(density_from_stokes(meas_0X));
  EXPECT_NEAR(s.s1, -0.6963, 1e-4);
  EXPECT_NEAR(s.s2, 0.7163, 1e-4);
  EXPECT_NEAR(s.s3, -0.0128, 1e-4);
}

TEST(Stokes, RightCircularHasNegativeS2Component) {
  // (|0> - i|1>)/sqrt2
  auto s = stokes_from_density(DensityMatrix::pure(Vec2(cplx(1, 0), cplx(0, -1))));
  EXPECT_NEAR(s.s2, -1, 1e-15);
}

TEST(DensityFromStokes, Examples) {
  EXPECT_LT(dist(density_from_stokes({0, 0, 0}).mat(), DensityMatrix().mat()), 1e-15);
  Mat2 d;
  d << 0.5, 0.5, 0.5, 0.5;
  EXPECT_LT(dist(density_from_stokes({1, 0, 0}).mat(), d), 1e-15);
  auto e = eigendecompose(density_from_stokes(meas_0Z));
  double r = meas_0Z.norm();
  EXPECT_NEAR(e.values[0], (1 + r) / 2, 1e-12);
  EXPECT_NEAR(e.values[1], (1 - r) / 2, 1e-12);
}

TEST(DensityFromStokes, RejectsUnphysical) {
  EXPECT_THROW(density_from_stokes({1, 0.1, 0}), error);
  EXPECT_NO_THROW(density_from_stokes({1 + 5e-10, 0, 0}));
}

TEST(DensityFromStokes, RoundTripProperty) {
  std::mt19937_64 g(11);
  for (int i = 0; i < 500; ++i) {
    Stokes s = random_ball(g);
    auto rho = density_from_stokes(s);
    auto t = stokes_from_density(rho);
    EXPECT_NEAR(t.s1, s.s1, 1e-12);
    EXPECT_NEAR(t.s2, s.s2, 1e-12);
    EXPECT_NEAR(t.s3, s.s3, 1e-12);
    EXPECT_LT(dist(density_from_stokes(t).mat(), rho.mat()), 1e-12);
  }
}

TEST(DensityMatrix, RejectsInvalid) {
  Mat2 m;
  m << 1.2, 0, 0, -0.2;
  EXPECT_THROW(DensityMatrix{m}, error);
  m << 0.5, cplx(0, 0.1), cplx(0, 0.1), 0.5;  // not hermitian
  EXPECT_THROW(DensityMatrix{m}, error);
  m << 0.6, 0, 0, 0.6;
  EXPECT_THROW(DensityMatrix{m}, error);
}

TEST(Fidelity, Examples) {
  auto rho = density_from_stokes({0.3, -0.2, 0.5});
  EXPECT_NEAR(fidelity(rho, rho), 1, 1e-12);
  EXPECT_NEAR(fidelity(DensityMatrix::pure(Vec2(1, 0)), DensityMatrix::pure(Vec2(0, 1))), 0, 1e-15);
  double ov = overlap(density_from_stokes(meas_0Z), density_from_stokes(meas_1Z));
  EXPECT_NEAR(ov, 0.0024, 0.001);
}

TEST(Fidelity, MatchesMatrixSqrtOracleAndIsSymmetric) {
  std::mt19937_64 g(5);
  for (int i = 0; i < 300; ++i) {
    auto a = density_from_stokes(random_ball(g));
    auto b = density_from_stokes(random_ball(g));
    double f = fidelity(a, b);
    EXPECT_GE(f, 0);
    EXPECT_LE(f, 1);
    EXPECT_NEAR(f, fidelity_oracle(a, b), 1e-7);
    EXPECT_NEAR(f, fidelity(b, a), 1e-10);
  }
}

TEST(Fidelity, PureStateClosedForm) {
  std::mt19937_64 g(6);
  for (int i = 0; i < 300; ++i) {
    Stokes a = random_sphere(g), b = random_sphere(g);
    double f = fidelity(density_from_stokes(a), density_from_stokes(b));
    EXPECT_NEAR(f * f, (1 + a.vec().dot(b.vec())) / 2, 1e-9);
  }
}

TEST(Fidelity, EqualsOneOnlyForEqualStates) {
  std::mt19937_64 g(7);
  for (int i = 0; i < 200; ++i) {
    auto a = density_from_stokes(random_ball(g));
    auto b = density_from_stokes(random_ball(g));
    if (dist(a.mat(), b.mat()) > 1e-3) EXPECT_LT(fidelity(a, b), 1 - 1e-9);
  }
}

TEST(Eigendecompose, Examples) {
  auto e = eigendecompose(DensityMatrix());
  EXPECT_DOUBLE_EQ(e.values[0], 0.5);
  EXPECT_DOUBLE_EQ(e.values[1], 0.5);
  EXPECT_LT((e.vectors[0] - Vec2(1, 0)).norm(), 1e-15);
  EXPECT_LT((e.vectors[1] - Vec2(0, 1)).norm(), 1e-15);

  auto h = eigendecompose(DensityMatrix::pure(Vec2(1, 0)));
  EXPECT_NEAR(h.values[0], 1, 1e-15);
  EXPECT_NEAR(h.values[1], 0, 1e-15);

  auto one = eigendecompose(density_from_stokes(meas_1Z));
  double r = meas_1Z.norm();
  EXPECT_NEAR(one.values[0], (1 + r) / 2, 1e-12);
  EXPECT_NEAR(one.values[1], (1 - r) / 2, 1e-12);
}

TEST(Eigendecompose, ReconstructionOrthonormalityAndPhaseConvention) {
  std::mt19937_64 g(8);
  for (int i = 0; i < 500; ++i) {
    auto rho = density_from_stokes(random_ball(g));
    auto e = eigendecompose(rho);
    EXPECT_GE(e.values[0], e.values[1]);
    Mat2 rec = e.values[0] * e.vectors[0] * e.vectors[0].adjoint() + e.values[1] * e.vectors[1] * e.vectors[1].adjoint();
    EXPECT_LT(dist(rec, rho.mat()), 1e-10);
    EXPECT_NEAR(e.vectors[0].norm(), 1, 1e-10);
    EXPECT_NEAR(e.vectors[1].norm(), 1, 1e-10);
    EXPECT_LT(std::abs(e.vectors[0].dot(e.vectors[1])), 1e-10);
    for (const auto& v : e.vectors) {
      int k = std::abs(v(0)) >= std::abs(v(1)) ? 0 : 1;
      EXPECT_NEAR(v(k).imag(), 0, 1e-15);
      EXPECT_GT(v(k).real(), 0);
    }
    // agrees with a generic hermitian solver up to phase
    Eigen::SelfAdjointEigenSolver<Mat2> es(rho.mat());
    EXPECT_NEAR(es.eigenvalues()(1), e.values[0], 1e-10);
    EXPECT_NEAR(std::abs(es.eigenvectors().col(1).dot(e.vectors[0])), 1, 1e-8);
  }
}

TEST(VirtualStates, IdealBB84) {
  auto [v0, v1] = virtual_states(DensityMatrix::pure(Vec2(1, 0)), DensityMatrix::pure(Vec2(0, 1)));
  EXPECT_NEAR(v0.weight, 0.5, 1e-15);
  EXPECT_NEAR(v1.weight, 0.5, 1e-15);
  Mat2 d, a;
  d << 0.5, 0.5, 0.5, 0.5;
  a << 0.5, -0.5, -0.5, 0.5;
  EXPECT_LT(dist(v0.state.mat(), d), 1e-12);
  EXPECT_LT(dist(v1.state.mat(), a), 1e-12);
}

TEST(VirtualStates, IdealBB84StableUnderInputPhases) {
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> ph(0, 2 * M_PI);
  Mat2 d;
  d << 0.5, 0.5, 0.5, 0.5;
  for (int i = 0; i < 100; ++i) {
    Vec2 h(std::polar(1.0, ph(g)), 0), v(0, std::polar(1.0, ph(g)));
    auto [v0, v1] = virtual_states(DensityMatrix::pure(h), DensityMatrix::pure(v));
    EXPECT_LT(dist(v0.state.mat(), d), 1e-12);
  }
}

TEST(VirtualStates, IdenticalMixedInputsAreDegenerate) {
  // both purifications coincide: weights (1, 0)
  EXPECT_THROW(virtual_states(DensityMatrix(), DensityMatrix()), error);
  auto [v0, v1] = virtual_states(density_from_stokes({0, 0, 0.5}), density_from_stokes({0.05, 0, 0.5}));
  EXPECT_NEAR(v0.weight + v1.weight, 1, 1e-12);
  EXPECT_GT(v0.weight, 0.99);
}

TEST(VirtualStates, MeasuredStates) {
  auto sc = rotate_to_common_Y(meas_0Z, meas_1Z, meas_0X);
  auto [v0, v1] = virtual_states(density_from_stokes(sc.in_plane[0]), density_from_stokes(sc.in_plane[1]));
  EXPECT_NEAR(v0.weight + v1.weight, 1, 1e-9);
  EXPECT_NEAR(v0.weight, 0.5, 5e-3);
  EXPECT_NEAR(v1.weight, 0.5, 5e-3);
  auto s0 = stokes_from_density(v0.state), s1 = stokes_from_density(v1.state);
  EXPECT_GT(s0.s1, 0.95);
  EXPECT_LT(s1.s1, -0.95);
  EXPECT_NEAR(s0.s2, 0, 1e-12);
  // frozen from an independent numpy evaluation of the same closed form
  EXPECT_NEAR(v0.weight, 0.5034603559826938, 1e-9);
}

TEST(VirtualStates, WeightsSumToOneProperty) {
  std::mt19937_64 g(10);
  for (int i = 0; i < 500; ++i) {
    auto a = density_from_stokes(random_ball(g));
    auto b = density_from_stokes(random_ball(g));
    try {
      auto [v0, v1] = virtual_states(a, b);
      EXPECT_NEAR(v0.weight + v1.weight, 1, 1e-9);
      EXPECT_TRUE(is_physical(v0.state.mat()));
      EXPECT_TRUE(is_physical(v1.state.mat()));
    } catch (const error&) {
    }
  }
}

TEST(RotateToCommonY, AlreadyCommon) {
  for (double sy : {0.0, 0.1}) {
    auto sc = rotate_to_common_Y(Stokes{0.1, sy, 0.9}, Stokes{-0.2, sy, -0.9}, Stokes{-0.8, sy, 0.05});
    EXPECT_LT((sc.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(sc.common_SY, sy, 1e-12);
  }
}

TEST(RotateToCommonY, MeasuredStates) {
  auto sc = rotate_to_common_Y(meas_0Z, meas_1Z, meas_0X);
  std::array<Stokes, 3> in{meas_0Z, meas_1Z, meas_0X};
  std::array<DensityMatrix, 3> out{sc.rho_0Z, sc.rho_1Z, sc.rho_0X};
  for (int i = 0; i < 3; ++i) {
    auto s = rotate(sc.rotation, in[i]);
    EXPECT_NEAR(s.s2, sc.common_SY, 1e-9);
    EXPECT_NEAR(stokes_from_density(out[i]).s2, sc.common_SY, 1e-9);
    EXPECT_NEAR(sc.in_plane[i].s2, 0, 1e-9);
  }
  EXPECT_GT(stokes_from_density(sc.rho_0Z).s3, 0);
  EXPECT_NEAR((sc.rotation.transpose() * sc.rotation - Mat3::Identity()).norm(), 0, 1e-12);
  EXPECT_NEAR(sc.rotation.determinant(), 1, 1e-12);
  EXPECT_NEAR(std::abs(sc.common_SY), 0.0338, 5e-4);
}

TEST(RotateToCommonY, PreservesFidelitiesProperty) {
  std::mt19937_64 g(12);
  for (int i = 0; i < 300; ++i) {
    std::array<DensityMatrix, 3> r{density_from_stokes(random_ball(g)), density_from_stokes(random_ball(g)),
                                   density_from_stokes(random_ball(g))};
    auto sc = rotate_to_common_Y(r[0], r[1], r[2]);
    std::array<DensityMatrix, 3> o{sc.rho_0Z, sc.rho_1Z, sc.rho_0X};
    for (int a = 0; a < 3; ++a) {
      EXPECT_NEAR(stokes_from_density(o[a]).s2, sc.common_SY, 1e-9);
      for (int b = a + 1; b < 3; ++b) EXPECT_NEAR(fidelity(r[a], r[b]), fidelity(o[a], o[b]), 1e-10);
    }
  }
}

TEST(RotateToCommonY, DegenerateTriples) {
  auto same = rotate_to_common_Y(Stokes{0, 0, 1}, Stokes{0, 0, 1}, Stokes{0, 0, 1});
  EXPECT_NEAR(same.common_SY, 0, 1e-12);
  auto line = rotate_to_common_Y(Stokes{0, 0.5, 0.5}, Stokes{0, 0.2, -0.1}, Stokes{0, 0.35, 0.2});
  EXPECT_NEAR(stokes_from_density(line.rho_1Z).s2, line.common_SY, 1e-9);
  EXPECT_NEAR(stokes_from_density(line.rho_0X).s2, line.common_SY, 1e-9);
}

TEST(Filter, IdentityAtZero) {
  EXPECT_DOUBLE_EQ(filter_q(0), 0.5);
  EXPECT_DOUBLE_EQ(filter_gain(0.5), 1.0);
  auto s = filter_to_plane({1, 0, 0}, 0);
  EXPECT_DOUBLE_EQ(s.s1, 1);
  EXPECT_DOUBLE_EQ(s.s3, 0);
  std::mt19937_64 g(13);
  for (int i = 0; i < 100; ++i) {
    Stokes b = random_ball(g);
    b.s2 = 0;
    auto f = filter_to_plane(b, 0);
    EXPECT_DOUBLE_EQ(f.s1, b.s1);
    EXPECT_DOUBLE_EQ(f.s3, b.s3);
  }
}

TEST(Filter, RootSubstitution) {
  for (double S : {0.6, -0.6, 0.0338, -0.99, 0.3}) {
    double q = filter_q(S);
    EXPECT_GE(q, 0);
    EXPECT_LE(q, 1);
    EXPECT_NEAR(S * (1 - 2 * q + 2 * q * q), 2 * q - 1, 1e-14);
    EXPECT_NEAR((2 * q - 1) / (1 - 2 * q + 2 * q * q), S, 1e-14);
    EXPECT_NEAR(filter_gain(q), std::sqrt(1 - S * S), 1e-14);
  }
}

TEST(Filter, Errors) {
  EXPECT_THROW(filter_q(1.0), error);
  EXPECT_THROW(filter_q(-1.5), error);
  EXPECT_THROW(filter_to_plane({0.99, 0.0, 0.1}, 0.5), error);
  auto s = filter_to_plane({0.8, 0.6, 0.0}, 0.6);
  EXPECT_NEAR(s.norm(), 1, 1e-12);
}
