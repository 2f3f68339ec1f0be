#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ltmdi/ltmdi.hpp"

using namespace ltmdi;
using io::json;
namespace fs = std::filesystem;

namespace {

struct Output {
  std::string dir;
  std::string format = "json";
};

void emit(const Output& o, const std::string& stem, const std::string& body) {
  if (o.dir.empty()) {
    std::cout << body;
    return;
  }
  std::error_code ec;
  fs::create_directories(o.dir, ec);
  if (ec) fail(errc::invalid_input, "cannot create output directory '" + o.dir + "': " + ec.message());
  auto path = fs::path(o.dir) / (stem + "." + o.format);
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(errc::invalid_input, "cannot write '" + path.string() + "'");
  f << body;
}

std::string g17(double v) { return format_g17(v); }

std::string g6(double v) {
  if (std::isnan(v)) return "nan";
  char b[32];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

json stokes_json(const Stokes& s) { return io::to_json(s); }

json q_json(const Vec9& q) {
  json j = json::object();
  for (int i = 0; i < 9; ++i) j[k_pauli_labels[i]] = q(i);
  return j;
}

// ---- tomo

struct TomoArgs {
  std::string input;
  std::uint64_t seed = 1;
  int samples = 1000;
  double angle_sigma_deg = 0.1;
};

int cmd_tomo(const TomoArgs& a, const Output& o) {
  auto recs = io::load_tomography(a.input);
  const char* labels[] = {"0Z", "1Z", "0X"};
  for (const char* l : labels)
    if (!recs.count(l)) fail(errc::missing_data, a.input + ": no records for state " + std::string(l));

  std::map<std::string, TomographyResult> res;
  for (const char* l : labels) {
    auto ordered = order_records(recs.at(l));
    if (a.samples == 0) {
      TomographyResult r;
      r.rho = reconstruct(ordered);
      r.point = stokes_from_density(r.rho);
      summarize(r);
      res[l] = r;
    } else {
      res[l] = monte_carlo(ordered, a.samples, a.angle_sigma_deg * std::numbers::pi / 180.0, a.seed);
    }
  }
  double ov[3] = {overlap(res["0Z"].rho, res["1Z"].rho), overlap(res["0X"].rho, res["0Z"].rho),
                  overlap(res["0X"].rho, res["1Z"].rho)};
  const char* ov_labels[] = {"0Z_1Z", "0X_0Z", "0X_1Z"};

  std::string body;
  if (o.format == "json") {
    json j;
    j["provenance"] = io::provenance({a.input});
    j["seed"] = a.seed;
    j["samples"] = a.samples;
    j["angle_sigma_deg"] = a.angle_sigma_deg;
    json st = json::object();
    for (const char* l : labels) {
      const auto& r = res[l];
      json e;
      e["stokes"] = stokes_json(r.point);
      const auto& m = r.rho.mat();
      e["rho"] = {{{"re", m(0, 0).real()}, {"im", m(0, 0).imag()}}, {{"re", m(0, 1).real()}, {"im", m(0, 1).imag()}},
                  {{"re", m(1, 0).real()}, {"im", m(1, 0).imag()}}, {{"re", m(1, 1).real()}, {"im", m(1, 1).imag()}}};
      if (a.samples > 0) {
        e["stokes_mean"] = stokes_json(r.stokes_mean);
        e["stokes_std"] = r.stokes_std;
        e["failures"] = r.failures;
      } else {
        e["stokes_std"] = nullptr;
      }
      st[l] = e;
    }
    j["states"] = st;
    json oj = json::object();
    for (int i = 0; i < 3; ++i) oj[ov_labels[i]] = ov[i];
    j["overlaps"] = oj;
    body = j.dump(1) + "\n";
  } else if (o.format == "csv") {
    body = "state,s1,s2,s3,std_s1,std_s2,std_s3\n";
    for (const char* l : labels) {
      const auto& r = res[l];
      body += std::string(l) + "," + g17(r.point.s1) + "," + g17(r.point.s2) + "," + g17(r.point.s3);
      for (double s : r.stokes_std) body += "," + (a.samples > 0 ? g17(s) : std::string());
      body += "\n";
    }
  } else {
    std::ostringstream t;
    for (const char* l : labels) {
      const auto& r = res[l];
      t << l << "  S = (" << g6(r.point.s1) << ", " << g6(r.point.s2) << ", " << g6(r.point.s3) << ")";
      if (a.samples > 0)
        t << "  +- (" << g6(r.stokes_std[0]) << ", " << g6(r.stokes_std[1]) << ", " << g6(r.stokes_std[2]) << ")";
      t << "\n";
    }
    for (int i = 0; i < 3; ++i) t << "overlap " << ov_labels[i] << " = " << g6(ov[i]) << "\n";
    body = t.str();
  }
  emit(o, "tomo", body);
  return 0;
}

// ---- keyrate

struct KeyrateArgs {
  std::string gains, characterization, decoy;
  std::string mode;
  std::optional<double> k;
  std::optional<int> n_cut;
  bool grid = false;
  int worst_case = -1;  // -1: 1000 when sigmas are present
  std::uint64_t seed = 1;
};

DecoyConfig resolve_mode(DecoyConfig c, const std::string& mode, std::optional<double> k, std::optional<int> n_cut) {
  if (k) c.k = *k;
  if (n_cut) c.n_cut = *n_cut;
  if (mode == "infinite") {
    if (k && *k != 0.0) fail(errc::invalid_input, "--mode infinite is inconsistent with --k > 0");
    c.k = 0.0;
  } else if (mode == "finite") {
    if (c.k <= 0.0) fail(errc::invalid_input, "--mode finite needs k > 0");
    if (!std::isfinite(c.N)) fail(errc::invalid_input, "--mode finite needs a finite pulse count N");
  }
  c.validate();
  return c;
}

json party_json(const SourceCharacterization& sc, const VirtualPair& v) {
  json j;
  j["common_SY"] = sc.common_SY;
  j["in_plane"] = {stokes_json(sc.in_plane[0]), stokes_json(sc.in_plane[1]), stokes_json(sc.in_plane[2])};
  j["virtual_X"] = {{{"stokes", stokes_json(v.state[0])}, {"weight", v.weight[0]}},
                    {{"stokes", stokes_json(v.state[1])}, {"weight", v.weight[1]}}};
  return j;
}

int cmd_keyrate(const KeyrateArgs& a, const Output& o) {
  auto run = io::load_decoy_config(a.decoy);
  auto cfg = resolve_mode(run.decoy, a.mode, a.k, a.n_cut);
  auto gains = io::load_gains(a.gains);
  auto ch = io::load_characterization(a.characterization);
  PhaseErrorOptions opt;
  opt.physicality_grid = a.grid;

  int n_wc = a.worst_case < 0 ? (ch.has_sigma ? 1000 : 0) : a.worst_case;
  if (n_wc > 0 && !ch.has_sigma) fail(errc::missing_data, a.characterization + ": worst-case selection needs sigma for every state");

  PipelineResult r;
  std::optional<WorstCase<StateDraw>> wc;
  if (n_wc > 0) {
    auto w = run_pipeline_worst_case(gains, ch.alice, ch.sigma_alice, ch.bob, ch.sigma_bob, cfg, run.f_ec, n_wc, a.seed, opt);
    r = w.result;
    wc = w.selection;
  } else {
    r = run_pipeline(gains, ch.alice, ch.bob, cfg, run.f_ec, opt);
  }
  const bool positive = r.rate.positive();
  const double R_rep = positive ? r.rate.R : 0.0;
  const double L_rep = positive ? r.rate.key_length : 0.0;
  const bool finite = !cfg.infinite_key();

  std::string body;
  if (o.format == "json") {
    json j;
    j["provenance"] = io::provenance({a.gains, a.characterization, a.decoy});
    j["mode"] = finite ? "finite" : "infinite";
    j["decoy"] = {{"mu", cfg.mu}, {"nu1", cfg.nu1}, {"nu2", cfg.nu2}, {"N", finite ? json(cfg.N) : json("inf")},
                  {"k", cfg.k}, {"n_cut", cfg.n_cut}};
    j["f_ec"] = run.f_ec;
    j["physicality_grid"] = a.grid;
    j["alice"] = party_json(r.alice, r.vir_alice);
    j["bob"] = party_json(r.bob, r.vir_bob);
    j["yield_bounds"] = io::to_json(r.bounds);
    j["Y11Z"] = {{"L", r.q11.Y11Z.L}, {"U", r.q11.Y11Z.U}};
    j["Q11Z_L"] = r.q11.Q11Z_L;
    j["Q_mumu_Z"] = r.inputs.Q_mumu_Z;
    j["E_mumu_Z"] = r.inputs.E_mumu_Z;
    j["N_mumu_Z"] = r.inputs.N_mumu_Z;
    j["phase_error"] = {{"eX_U", r.phase.eX_U},          {"correct_L", r.phase.corr_L},
                        {"error_U", r.phase.err_U},      {"q_correct_min", q_json(r.phase.q_corr)},
                        {"q_error_max", q_json(r.phase.q_err)}, {"active_correct", r.phase.active_corr},
                        {"active_error", r.phase.active_err},   {"condition", r.phase.condition}};
    if (wc)
      j["worst_case"] = {{"samples", n_wc},          {"seed", a.seed},          {"index", wc->index},
                         {"eX_U", wc->value},        {"mean", wc->mean},        {"std", wc->std},
                         {"evaluated", wc->evaluated}, {"failed", wc->failed}};
    else
      j["worst_case"] = nullptr;
    j["R_raw"] = r.rate.R;
    j["R"] = R_rep;
    j["positive_key"] = positive;
    if (finite) j["key_length_bits"] = L_rep;
    body = j.dump(1) + "\n";
  } else if (o.format == "csv") {
    body = "mode,Q11Z_L,eX_U,Q_mumu_Z,E_mumu_Z,R,positive_key,key_length_bits\n";
    body += std::string(finite ? "finite" : "infinite") + "," + g17(r.q11.Q11Z_L) + "," + g17(r.phase.eX_U) + "," +
            g17(r.inputs.Q_mumu_Z) + "," + g17(r.inputs.E_mumu_Z) + "," + g17(R_rep) + "," + (positive ? "1" : "0") +
            "," + (finite ? g17(L_rep) : std::string()) + "\n";
  } else {
    std::ostringstream t;
    t << "mode        " << (finite ? "finite" : "infinite") << " (k = " << cfg.k << ", n_cut = " << cfg.n_cut << ")\n";
    t << "pair    Y11_L         Y11_U\n";
    for (int p = 0; p < 9; ++p) {
      char b[80];
      std::snprintf(b, sizeof b, "%-6s  %-12.4e  %-12.4e\n", k_pairs[p].label().c_str(), r.bounds[p].L, r.bounds[p].U);
      t << b;
    }
    t << "Q11Z_L      " << g6(r.q11.Q11Z_L) << "\n";
    t << "eX_U        " << g6(r.phase.eX_U) << (wc ? "  (worst of " + std::to_string(n_wc) + " draws)" : "") << "\n";
    t << "Q_mumu_Z    " << g6(r.inputs.Q_mumu_Z) << "\n";
    t << "E_mumu_Z    " << g6(r.inputs.E_mumu_Z) << "\n";
    t << "R           " << g6(R_rep) << (positive ? "" : "  (no positive key)") << "\n";
    if (finite) t << "key length  " << g6(L_rep) << " bits\n";
    body = t.str();
  }
  emit(o, "keyrate", body);
  return 0;
}

// ---- simulate

struct SimulateArgs {
  std::string config;
  std::vector<double> distances, deltas;
  std::string mode = "infinite";
  std::optional<double> k;
  std::optional<int> n_cut;
  bool grid = false;
};

int cmd_simulate(const SimulateArgs& a, const Output& o) {
  SweepConfig c;
  std::vector<std::string> inputs;
  if (!a.config.empty()) {
    auto j = io::load_json(a.config);
    inputs.push_back(a.config);
    c.distances_km = io::get_or(j, "distances_km", c.distances_km, a.config);
    c.deltas = io::get_or(j, "deltas", c.deltas, a.config);
    if (j.contains("channel")) {
      const auto& h = j.at("channel");
      std::string w = a.config + ": channel";
      c.channel.fiber_loss_db_per_km = io::get_or(h, "fiber_loss_db_per_km", c.channel.fiber_loss_db_per_km, w);
      c.channel.detector_efficiency = io::get_or(h, "detector_efficiency", c.channel.detector_efficiency, w);
      c.channel.dark_prob = io::get_or(h, "dark_prob", c.channel.dark_prob, w);
      c.channel.visibility_error = io::get_or(h, "visibility_error", c.channel.visibility_error, w);
      c.channel.phase_points = io::get_or(h, "phase_points", c.channel.phase_points, w);
    }
    if (j.contains("decoy")) {
      auto r = io::decoy_config_from_json(j.at("decoy"), a.config + ": decoy");
      c.decoy = r.decoy;
      c.f_ec = r.f_ec;
    }
  }
  if (!a.distances.empty()) c.distances_km = a.distances;
  if (!a.deltas.empty()) c.deltas = a.deltas;
  c.decoy = resolve_mode(c.decoy, a.mode, a.k, a.n_cut);
  c.channel.validate();
  c.phase.physicality_grid = a.grid;
  for (double d : c.distances_km)
    if (!(d >= 0)) fail(errc::invalid_input, "distances must be >= 0");

  auto pts = run_sweep(c);
  std::string body;
  if (o.format == "json") {
    json j;
    j["provenance"] = io::provenance(inputs);
    j["mode"] = c.decoy.infinite_key() ? "infinite" : "finite";
    json arr = json::array();
    for (const auto& p : pts)
      arr.push_back({{"distance_km", p.distance_km}, {"delta", p.delta}, {"R_losstol", p.R_losstol},
                     {"R_gllp", p.R_gllp}, {"eX_U", p.eX_U}, {"E_Z", p.E_Z}, {"ok", p.ok}, {"message", p.message}});
    j["points"] = arr;
    body = j.dump(1) + "\n";
  } else {
    body = sweep_csv(pts);
  }
  for (const auto& p : pts)
    if (!p.ok) std::cerr << "ltmdi: warning: point d=" << p.distance_km << " delta=" << p.delta << ": " << p.message << "\n";
  emit(o, "sweep", body);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Security analysis for loss-tolerant three-state MDI-QKD with imperfect sources"};
  app.set_version_flag("--version", std::string(k_version));
  app.require_subcommand(1);

  Output tout, kout, sout{"", "csv"};
  auto add_output = [&](CLI::App* s, Output& o, std::vector<std::string> formats) {
    s->add_option("--out", o.dir, "write the result into this directory instead of stdout");
    s->add_option("--format", o.format, "output format")->check(CLI::IsMember(formats));
  };

  TomoArgs ta;
  auto* tomo = app.add_subcommand("tomo", "reconstruct the source states from tomography counts");
  tomo->add_option("input", ta.input, "tomography counts (JSON)")->required();
  tomo->add_option("--seed", ta.seed, "Monte-Carlo seed");
  tomo->add_option("--samples", ta.samples, "Monte-Carlo samples; 0 gives the point estimate only")
      ->check(CLI::NonNegativeNumber);
  tomo->add_option("--angle-sigma-deg", ta.angle_sigma_deg, "waveplate angle uncertainty (degrees)")
      ->check(CLI::NonNegativeNumber);
  add_output(tomo, tout, {"json", "text", "csv"});

  KeyrateArgs ka;
  auto* key = app.add_subcommand("keyrate", "decoy bounds, phase-error LP and key rate");
  key->add_option("--gains", ka.gains, "gains table (JSON or CSV)")->required();
  key->add_option("--characterization", ka.characterization, "source Stokes parameters (JSON)")->required();
  key->add_option("--decoy", ka.decoy, "decoy configuration (JSON)")->required();
  key->add_option("--mode", ka.mode, "finite or infinite key; default follows the decoy config")
      ->check(CLI::IsMember({"finite", "infinite"}));
  key->add_option("--k", ka.k, "standard deviations for the finite-key tails");
  key->add_option("--n-cut", ka.n_cut, "photon-number cutoff of the decoy LP");
  key->add_flag("--grid", ka.grid, "add the 64-point physicality grid to the phase-error LP");
  key->add_option("--worst-case", ka.worst_case, "Gaussian state draws for worst-case selection (0 disables)");
  key->add_option("--seed", ka.seed, "seed for the state draws");
  add_output(key, kout, {"json", "text", "csv"});

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "key-rate sweep with the stand-in channel model");
  sim->add_option("--config", sa.config, "sweep configuration (JSON)");
  sim->add_option("--distances", sa.distances, "total distances in km")->delimiter(',');
  sim->add_option("--deltas", sa.deltas, "modulation errors")->delimiter(',');
  sim->add_option("--mode", sa.mode, "finite or infinite key")->check(CLI::IsMember({"finite", "infinite"}));
  sim->add_option("--k", sa.k, "standard deviations for the finite-key tails");
  sim->add_option("--n-cut", sa.n_cut, "photon-number cutoff of the decoy LP");
  sim->add_flag("--grid", sa.grid, "add the physicality grid to the phase-error LP");
  std::uint64_t sim_seed = 1;
  sim->add_option("--seed", sim_seed, "accepted for uniformity; the sweep draws no random numbers");
  add_output(sim, sout, {"csv", "json"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*tomo) return cmd_tomo(ta, tout);
    if (*key) return cmd_keyrate(ka, kout);
    if (*sim) return cmd_simulate(sa, sout);
  } catch (const error& e) {
    std::cerr << "ltmdi: error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "ltmdi: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
