#include <gtest/gtest.h>

#include <random>

#include "ltmdi/decoy.hpp"
#include "ltmdi/io.hpp"

#include "decoy_cases.inc"

using namespace ltmdi;

namespace {

GainsTable fixture(const std::string& name) { return io::load_gains(std::string(LTMDI_DATA_DIR "/") + name); }

// gains from a photon-number ground truth, summed far past the cutoff
std::array<double, 9> forward_gains(const std::vector<std::vector<double>>& Y, const DecoyConfig& c) {
  std::array<double, 9> Q{};
  for (int i = 0; i < 9; ++i) {
    double a = c.intensity(k_intensity_pairs[i].a), b = c.intensity(k_intensity_pairs[i].b);
    for (std::size_t m = 0; m < Y.size(); ++m)
      for (std::size_t n = 0; n < Y.size(); ++n) Q[i] += poisson(a, m) * poisson(b, n) * Y[m][n];
  }
  return Q;
}

std::array<double, 9> flat_counts(double n) {
  std::array<double, 9> c;
  c.fill(n);
  return c;
}

}  // namespace

TEST(PulseCounts, ProductOfProbabilities) {
  DecoyConfig c;
  auto n = pulse_counts(c);
  EXPECT_DOUBLE_EQ(n[pair_index("0Z1Z")][intensity_index("mumu")], 3.375e9);
  double s = 0;
  for (const auto& row : n)
    for (double v : row) s += v;
  EXPECT_NEAR(s, c.N, 1e-6 * c.N);
  c.p_mu = 0.0;
  c.p_nu1 = 0.7;
  n = pulse_counts(c);
  EXPECT_EQ(n[0][intensity_index("mumu")], 0.0);
  EXPECT_EQ(n[4][intensity_index("v1mu")], 0.0);
}

TEST(DecoyConfig, Validation) {
  DecoyConfig c;
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.nu1 = 0.3;
  EXPECT_THROW(bad.validate(), error);
  bad = c;
  bad.p_mu = 0.5;
  EXPECT_THROW(bad.validate(), error);
  bad = c;
  bad.n_cut = 1;
  EXPECT_THROW(bad.validate(), error);
  bad = c;
  bad.k = -1;
  EXPECT_THROW(bad.validate(), error);
  EXPECT_FALSE(c.infinite_key());
  c.k = 0;
  EXPECT_TRUE(c.infinite_key());
}

TEST(GainsTable, MissingCellNamesPairAndIntensity) {
  auto g = fixture("gains_10km.json");
  g.q[pair_index("1Z0X")][intensity_index("v1mu")].reset();
  try {
    bound_all_yields(g, DecoyConfig{});
    FAIL() << "expected missing-data error";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::missing_data);
    EXPECT_NE(std::string(e.what()).find("1Z0X"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("v1mu"), std::string::npos);
  }
}

TEST(BoundYield, MatchesIndependentSolver) {
  for (const auto& tc : k_decoy_cases) {
    SCOPED_TRACE(tc.name);
    DecoyConfig c;
    c.k = tc.k;
    auto g = fixture(tc.gains);
    auto b = bound_all_yields(g, c);
    for (int p = 0; p < 9; ++p) {
      SCOPED_TRACE(k_pairs[p].label());
      EXPECT_NEAR(b[p].L, tc.L[p], 1e-6 * tc.U[p] + 1e-13);
      EXPECT_NEAR(b[p].U, tc.U[p], 1e-6 * tc.U[p] + 1e-13);
      EXPECT_NEAR(b[p].widening, tc.widening[p], 1e-6 * tc.widening[p] + 1e-12);
      EXPECT_LE(0.0, b[p].L);
      EXPECT_LE(b[p].L, b[p].U);
      EXPECT_LE(b[p].U, 1.0);
    }
    EXPECT_NEAR(bound_Q11Z(g, c).Q11Z_L, tc.Q11Z_L, 1e-6 * tc.Q11Z_L);
  }
}

TEST(BoundYield, ForwardModelSoundness) {
  std::mt19937_64 rng(20240612);
  std::uniform_real_distribution<double> u(0, 1);
  DecoyConfig c;
  int checked = 0;
  for (int t = 0; t < 150; ++t) {
    // yields up to 20 photons; mixes of dark-like, linear-loss and arbitrary entries
    std::vector<std::vector<double>> Y(21, std::vector<double>(21));
    double eta = std::pow(10.0, -3 * u(rng)), dark = 1e-6 * u(rng);
    for (int m = 0; m <= 20; ++m)
      for (int n = 0; n <= 20; ++n) {
        double base = (1 - std::pow(1 - eta, m)) * (1 - std::pow(1 - eta, n)) + dark;
        Y[m][n] = (t % 3 == 0) ? u(rng) : std::min(1.0, base * (0.5 + u(rng)));
      }
    auto Q = forward_gains(Y, c);
    for (double k : {0.0, 3.0}) {
      c.k = k;
      auto b = bound_yield_11(Q, flat_counts(1e10), c);
      EXPECT_LE(b.L, Y[1][1] + 1e-9) << "trial " << t << " k " << k;
      EXPECT_GE(b.U, Y[1][1] - 1e-9) << "trial " << t << " k " << k;
      EXPECT_EQ(b.widening, 0.0);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 300);
}

TEST(BoundYield, ExactDataGapIsSmallForLowYields) {
  // linear-loss channel with per-party transmittance 1e-2 and dark yield 1e-6
  DecoyConfig c;
  c.k = 0;
  c.n_cut = 10;
  std::vector<std::vector<double>> Y(31, std::vector<double>(31));
  for (int m = 0; m <= 30; ++m)
    for (int n = 0; n <= 30; ++n) Y[m][n] = 0.5 * (1 - std::pow(0.99, m)) * (1 - std::pow(0.99, n)) + 1e-6;
  auto b = bound_yield_11(forward_gains(Y, c), flat_counts(1e10), c);
  EXPECT_LE(b.L, Y[1][1]);
  EXPECT_GE(b.U, Y[1][1]);
  EXPECT_LE(b.U - b.L, 1e-4);
}

TEST(BoundYield, MonotoneInK) {
  auto g = fixture("gains_10km.json");
  auto counts = pulse_counts(DecoyConfig{});
  for (int p = 0; p < 9; ++p) {
    YieldInterval prev;
    bool first = true;
    for (double k : {0.0, 0.5, 1.0, 2.0, 3.0, 5.0}) {
      DecoyConfig c;
      c.k = k;
      auto b = bound_yield_11(p, g, counts, c);
      if (!first) {
        EXPECT_LE(b.L, prev.L + 1e-12) << k_pairs[p].label() << " k=" << k;
        EXPECT_GE(b.U, prev.U - 1e-12) << k_pairs[p].label() << " k=" << k;
      }
      prev = b;
      first = false;
    }
  }
}

TEST(BoundYield, LargerCutoffNestsInsideSmaller) {
  auto g = fixture("gains_10km.json");
  DecoyConfig c4, c7;
  c7.n_cut = 7;
  auto b4 = bound_all_yields(g, c4), b7 = bound_all_yields(g, c7);
  for (int p = 0; p < 9; ++p) {
    EXPECT_GE(b7[p].L, b4[p].L - 1e-12) << k_pairs[p].label();
    EXPECT_LE(b7[p].U, b4[p].U + 1e-12) << k_pairs[p].label();
  }
}

TEST(BoundYield, InconsistentFiniteKeyDataIsInfeasible) {
  std::array<double, 9> Q{};
  Q.fill(1e-3);
  Q[0] = 0.5;  // vacuum pair far above the signal gains
  DecoyConfig c;
  try {
    bound_yield_11(Q, flat_counts(1e10), c, "synthetic");
    FAIL() << "expected infeasible";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::infeasible);
    EXPECT_NE(std::string(e.what()).find("offending rows"), std::string::npos) << e.what();
  }
}

TEST(BoundYield, RejectsGainsOutsideUnitInterval) {
  std::array<double, 9> Q{};
  Q[3] = 1.5;
  EXPECT_THROW(bound_yield_11(Q, flat_counts(1e10), DecoyConfig{}), error);
}

TEST(BoundYield, ZeroGainUsesPoissonCeiling) {
  DecoyConfig c;
  std::array<double, 9> Q{};
  auto b = bound_yield_11(Q, flat_counts(1e8), c);
  EXPECT_EQ(b.L, 0.0);
  EXPECT_GT(b.U, 0.0);
  // row (mu,mu) alone caps Y11 by (k^2/N) / P(1,1)
  EXPECT_LE(b.U, 9e-8 / (0.04 * std::exp(-0.4)) + 1e-15);
}

TEST(Q11Z, ScalesPooledYield) {
  auto g = fixture("gains_10km.json");
  DecoyConfig c;
  auto r = bound_Q11Z(g, c);
  EXPECT_DOUBLE_EQ(r.Q11Z_L, c.mu * c.mu * std::exp(-2 * c.mu) * r.Y11Z.L);
  double pooled = 0;
  for (int p : k_z_pairs) pooled += 0.25 * g.at(p, 8);
  EXPECT_DOUBLE_EQ(r.pooled_gains[8], pooled);
}

TEST(SignalStatistics, TableValues) {
  auto g10 = fixture("gains_10km.json"), g40 = fixture("gains_40km.json");
  EXPECT_NEAR(Q_mumu_Z(g10), 6.31e-5, 0.005e-5);
  EXPECT_NEAR(E_mumu_Z(g10), 0.0178, 0.0005);
  EXPECT_NEAR(Q_mumu_Z(g40), 2.94e-5, 0.005e-5);
  EXPECT_NEAR(E_mumu_Z(g40), 0.0368, 0.0005);
  EXPECT_DOUBLE_EQ(N_mumu_Z(DecoyConfig{}), 1.35e10);
}

TEST(Labels, RoundTrip) {
  for (int p = 0; p < 9; ++p) EXPECT_EQ(pair_index(k_pairs[p].label()), p);
  for (int i = 0; i < 9; ++i) EXPECT_EQ(intensity_index(k_intensity_pairs[i].label()), i);
  EXPECT_EQ(pair_index("1X1X"), -1);
  EXPECT_EQ(intensity_index("mumv"), -1);
}
