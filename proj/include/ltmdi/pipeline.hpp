#pragma once

#include <array>

#include "ltmdi/decoy.hpp"
#include "ltmdi/keyrate.hpp"
#include "ltmdi/losstol.hpp"
#include "ltmdi/qstate.hpp"
#include "ltmdi/rng.hpp"
#include "ltmdi/tomography.hpp"

namespace ltmdi {

struct PipelineResult {
  SourceCharacterization alice, bob;
  VirtualPair vir_alice, vir_bob;
  YieldBounds bounds{};
  Q11Result q11;
  PhaseErrorReport phase;
  KeyRateInputs inputs;
  KeyRate rate;
};

// gains -> decoy bounds -> phase-error LP -> key rate
inline PipelineResult run_pipeline(const GainsTable& gains, const std::array<Stokes, 3>& alice,
                                   const std::array<Stokes, 3>& bob, const DecoyConfig& cfg, double f_ec,
                                   const PhaseErrorOptions& opt = {}) {
  PipelineResult r;
  r.alice = rotate_to_common_Y(alice[0], alice[1], alice[2]);
  r.bob = rotate_to_common_Y(bob[0], bob[1], bob[2]);
  r.vir_alice = make_virtual_pair(r.alice);
  r.vir_bob = make_virtual_pair(r.bob);
  r.bounds = bound_all_yields(gains, cfg);
  r.q11 = bound_Q11Z(gains, cfg);
  r.phase = bound_phase_error(r.bounds, r.alice.in_plane, r.bob.in_plane, r.vir_alice, r.vir_bob, opt);
  r.inputs.Q11Z_L = r.q11.Q11Z_L;
  r.inputs.eX_U = r.phase.eX_U;
  r.inputs.Q_mumu_Z = Q_mumu_Z(gains);
  r.inputs.E_mumu_Z = E_mumu_Z(gains);
  r.inputs.f_ec = f_ec;
  r.inputs.N_mumu_Z = cfg.infinite_key() ? 0.0 : N_mumu_Z(cfg);
  r.rate = secure_key_rate(r.inputs);
  return r;
}

struct StateDraw {
  std::array<Stokes, 3> alice, bob;
};

struct WorstCasePipeline {
  PipelineResult result;  // evaluated at the selected draw
  WorstCase<StateDraw> selection;
};

// Gaussian state draws for both parties, keep the largest e_X^U inside the 4 sigma cut
inline WorstCasePipeline run_pipeline_worst_case(const GainsTable& gains, const std::array<Stokes, 3>& alice,
                                                 const std::array<std::array<double, 3>, 3>& sigma_alice,
                                                 const std::array<Stokes, 3>& bob,
                                                 const std::array<std::array<double, 3>, 3>& sigma_bob,
                                                 const DecoyConfig& cfg, double f_ec, int n_samples,
                                                 std::uint64_t seed, const PhaseErrorOptions& opt = {}) {
  auto da = gaussian_state_draws(alice, sigma_alice, n_samples, seed);
  auto db = gaussian_state_draws(bob, sigma_bob, n_samples, splitmix64(seed ^ 0xb0bULL));
  std::vector<StateDraw> draws(static_cast<std::size_t>(n_samples));
  for (std::size_t i = 0; i < draws.size(); ++i) draws[i] = {da[i], db[i]};
  auto bounds = bound_all_yields(gains, cfg);
  auto eval = [&](const StateDraw& d) {
    auto A = rotate_to_common_Y(d.alice[0], d.alice[1], d.alice[2]);
    auto B = rotate_to_common_Y(d.bob[0], d.bob[1], d.bob[2]);
    return bound_phase_error(bounds, A, B, opt).eX_U;
  };
  WorstCasePipeline w;
  w.selection = worst_case_states(draws, eval);
  w.result = run_pipeline(gains, w.selection.best.alice, w.selection.best.bob, cfg, f_ec, opt);
  return w;
}

}  // namespace ltmdi
