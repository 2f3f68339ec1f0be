#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ltmdi/decoy.hpp"
#include "ltmdi/error.hpp"
#include "ltmdi/qstate.hpp"
#include "ltmdi/tomography.hpp"
#include "ltmdi/version.hpp"

namespace ltmdi::io {

using json = nlohmann::json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::parse, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line, col = 1;
      else ++col;
    }
    fail(errc::parse, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                          e.what() + ")");
  }
}

inline json load_json(const std::string& path) { return parse_json(read_text(path), path); }

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(errc::parse, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(errc::parse, where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key, where);
}

// ---- decoy configuration

struct RunConfig {
  DecoyConfig decoy;
  double f_ec = 1.16;
};

inline RunConfig decoy_config_from_json(const json& j, const std::string& where) {
  RunConfig r;
  DecoyConfig& c = r.decoy;
  c.mu = get_or(j, "mu", c.mu, where);
  c.nu1 = get_or(j, "nu1", c.nu1, where);
  c.nu2 = get_or(j, "nu2", c.nu2, where);
  c.p_mu = get_or(j, "p_mu", c.p_mu, where);
  c.p_nu1 = get_or(j, "p_nu1", c.p_nu1, where);
  c.p_nu2 = get_or(j, "p_nu2", c.p_nu2, where);
  c.p_0Z = get_or(j, "p_0Z", c.p_0Z, where);
  c.p_1Z = get_or(j, "p_1Z", c.p_1Z, where);
  c.p_0X = get_or(j, "p_0X", c.p_0X, where);
  if (j.contains("N") && j.at("N").is_string()) {
    if (j.at("N").get<std::string>() != "inf") fail(errc::parse, where + ": N must be a number or \"inf\"");
    c.N = lp::inf;
  } else {
    c.N = get_or(j, "N", c.N, where);
  }
  c.k = get_or(j, "k", c.k, where);
  c.n_cut = get_or(j, "n_cut", c.n_cut, where);
  r.f_ec = get_or(j, "f_ec", r.f_ec, where);
  c.validate();
  return r;
}

inline RunConfig load_decoy_config(const std::string& path) { return decoy_config_from_json(load_json(path), path); }

// ---- gains

inline GainsTable gains_from_json(const json& j, const std::string& where) {
  if (!j.contains("gains") || !j.at("gains").is_object()) fail(errc::parse, where + ": missing object 'gains'");
  GainsTable g;
  for (const auto& [pl, row] : j.at("gains").items()) {
    int p = pair_index(pl);
    if (p < 0) fail(errc::parse, where + ": unknown state pair '" + pl + "'");
    if (!row.is_object()) fail(errc::parse, where + ": gains for '" + pl + "' must be an object");
    for (const auto& [il, v] : row.items()) {
      int i = intensity_index(il);
      if (i < 0) fail(errc::parse, where + ": unknown intensity pair '" + il + "'");
      if (v.is_null()) continue;
      if (!v.is_number()) fail(errc::parse, where + ": gain " + pl + "/" + il + " is not a number");
      g.set(p, i, v.get<double>());
    }
  }
  if (j.contains("sigma") && j.at("sigma").is_object()) {
    for (const auto& [pl, row] : j.at("sigma").items()) {
      int p = pair_index(pl);
      if (p < 0) continue;
      for (const auto& [il, v] : row.items()) {
        int i = intensity_index(il);
        if (i >= 0 && v.is_number()) g.sigma[p][i] = v.get<double>();
      }
    }
  }
  return g;
}

// CSV: header "pair,v2v2,...,mumu"; one row per state pair
inline GainsTable gains_from_csv(const std::string& text, const std::string& where) {
  std::istringstream in(text);
  std::string line;
  std::vector<int> cols;
  GainsTable g;
  int lineno = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) {
      while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
      while (!cur.empty() && cur.front() == ' ') cur.erase(cur.begin());
      out.push_back(cur);
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line);
    if (cols.empty()) {
      for (std::size_t k = 1; k < f.size(); ++k) {
        int i = intensity_index(f[k]);
        if (i < 0) fail(errc::parse, where + ":" + std::to_string(lineno) + ": unknown intensity column '" + f[k] + "'");
        cols.push_back(i);
      }
      continue;
    }
    int p = pair_index(f[0]);
    if (p < 0) fail(errc::parse, where + ":" + std::to_string(lineno) + ": unknown state pair '" + f[0] + "'");
    for (std::size_t k = 1; k < f.size() && k - 1 < cols.size(); ++k) {
      if (f[k].empty()) continue;
      try {
        std::size_t used = 0;
        double v = std::stod(f[k], &used);
        if (used != f[k].size()) throw std::invalid_argument("trailing");
        g.set(p, cols[k - 1], v);
      } catch (const std::logic_error&) {
        fail(errc::parse, where + ":" + std::to_string(lineno) + ": bad number '" + f[k] + "'");
      }
    }
  }
  return g;
}

inline GainsTable load_gains(const std::string& path) {
  std::string text = read_text(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return gains_from_csv(text, path);
  return gains_from_json(parse_json(text, path), path);
}

// ---- yield bounds

inline YieldBounds yield_bounds_from_json(const json& j, const std::string& where) {
  if (!j.contains("bounds")) fail(errc::parse, where + ": missing object 'bounds'");
  YieldBounds b;
  std::array<bool, 9> seen{};
  for (const auto& [pl, v] : j.at("bounds").items()) {
    int p = pair_index(pl);
    if (p < 0) fail(errc::parse, where + ": unknown state pair '" + pl + "'");
    b[p].L = get<double>(v, "L", where);
    b[p].U = get<double>(v, "U", where);
    b[p].widening = get_or(v, "widening", 0.0, where);
    if (!(0 <= b[p].L && b[p].L <= b[p].U && b[p].U <= 1))
      fail(errc::invalid_input, where + ": bounds for " + pl + " violate 0 <= L <= U <= 1");
    seen[p] = true;
  }
  for (int p = 0; p < 9; ++p)
    if (!seen[p]) fail(errc::missing_data, where + ": missing yield bounds for pair " + k_pairs[p].label());
  return b;
}

inline YieldBounds load_yield_bounds(const std::string& path) { return yield_bounds_from_json(load_json(path), path); }

inline json to_json(const YieldBounds& b) {
  json out = json::object();
  for (int p = 0; p < 9; ++p) out[k_pairs[p].label()] = {{"L", b[p].L}, {"U", b[p].U}, {"widening", b[p].widening}};
  return out;
}

// ---- characterization

struct Characterization {
  std::array<Stokes, 3> alice, bob;  // 0Z, 1Z, 0X
  std::array<std::array<double, 3>, 3> sigma_alice{}, sigma_bob{};
  bool has_sigma = false;
};

inline std::array<Stokes, 3> states_from_json(const json& j, std::array<std::array<double, 3>, 3>& sig, bool& has_sigma,
                                              const std::string& where) {
  std::array<Stokes, 3> s;
  has_sigma = true;
  const char* labels[] = {"0Z", "1Z", "0X"};
  for (int k = 0; k < 3; ++k) {
    if (!j.contains(labels[k])) fail(errc::missing_data, where + ": missing state " + labels[k]);
    const json& e = j.at(labels[k]);
    auto v = get<std::vector<double>>(e, "stokes", where);
    if (v.size() != 3) fail(errc::parse, where + ": stokes for " + labels[k] + " must have 3 entries");
    s[k] = {v[0], v[1], v[2]};
    if (s[k].norm() > 1 + k_phys_tol) fail(errc::invalid_input, where + ": state " + labels[k] + " is outside the Bloch ball");
    if (e.contains("sigma")) {
      auto w = get<std::vector<double>>(e, "sigma", where);
      if (w.size() != 3) fail(errc::parse, where + ": sigma for " + labels[k] + " must have 3 entries");
      sig[k] = {w[0], w[1], w[2]};
    } else {
      has_sigma = false;
    }
  }
  return s;
}

inline Characterization characterization_from_json(const json& j, const std::string& where) {
  Characterization c;
  bool ha = false, hb = false;
  if (j.contains("alice") || j.contains("bob")) {
    c.alice = states_from_json(get<json>(get<json>(j, "alice", where), "states", where), c.sigma_alice, ha, where);
    c.bob = states_from_json(get<json>(get<json>(j, "bob", where), "states", where), c.sigma_bob, hb, where);
  } else {
    c.alice = states_from_json(get<json>(j, "states", where), c.sigma_alice, ha, where);
    c.bob = c.alice;
    c.sigma_bob = c.sigma_alice;
    hb = ha;
  }
  c.has_sigma = ha && hb;
  return c;
}

inline Characterization load_characterization(const std::string& path) {
  return characterization_from_json(load_json(path), path);
}

// ---- tomography records

inline std::map<std::string, std::vector<ProjectiveRecord>> tomography_from_json(const json& j, const std::string& where) {
  const json& arr = j.is_array() ? j : get<json>(j, "records", where);
  if (!arr.is_array()) fail(errc::parse, where + ": records must be an array");
  std::map<std::string, std::vector<ProjectiveRecord>> out;
  constexpr double deg = std::numbers::pi / 180.0;
  std::size_t idx = 0;
  for (const auto& e : arr) {
    std::string w = where + ": record " + std::to_string(idx++);
    ProjectiveRecord r;
    r.basis = basis_from_string(get<std::string>(e, "basis_label", w));
    r.hwp = get<double>(e, "hwp_deg", w) * deg;
    r.qwp = get<double>(e, "qwp_deg", w) * deg;
    double n = get<double>(e, "count", w);
    if (!(n >= 0) || n != std::floor(n)) fail(errc::parse, w + ": count must be a non-negative integer");
    r.count = static_cast<std::uint64_t>(n);
    r.time_s = get_or(e, "time_s", r.time_s, w);
    r.dead_time_s = get_or(e, "dead_time_s", r.dead_time_s, w);
    r.dark_rate_hz = get_or(e, "dark_rate_hz", r.dark_rate_hz, w);
    if (!(static_cast<double>(r.count) * r.dead_time_s < r.time_s))
      fail(errc::invalid_input, w + ": dead time exceeds the acquisition window");
    out[get<std::string>(e, "state_label", w)].push_back(r);
  }
  return out;
}

inline std::map<std::string, std::vector<ProjectiveRecord>> load_tomography(const std::string& path) {
  return tomography_from_json(load_json(path), path);
}

inline json to_json(const Stokes& s) { return json::array({s.s1, s.s2, s.s3}); }

inline json provenance(const std::vector<std::string>& paths) {
  json p = json::object();
  p["tool"] = "ltmdi";
  p["version"] = k_version;
  json in = json::array();
  for (const auto& path : paths) in.push_back({{"path", path}, {"fnv1a64", hex64(fnv1a64(read_text(path)))}});
  p["inputs"] = in;
  return p;
}

}  // namespace ltmdi::io
