#pragma once

// Run configuration: JSON file + command-line overrides -> validated settings
// plus the fully resolved document that gets archived with each run.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hartree/diagnostics.hpp"
#include "hartree/field_io.hpp"
#include "hartree/grid.hpp"
#include "hartree/hamilton_jacobi.hpp"
#include "hartree/profile.hpp"
#include "hartree/propagator.hpp"
#include "hartree/scattering.hpp"

namespace hartree {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline nlohmann::json default_config() {
  return nlohmann::json{
      {"grid", {{"n", 64}, {"L", 32.0}}},
      {"datum",
       {{"path", ""},
        {"potential_sup", 0.05},
        {"amplitude", 0.0},  // 0 -> derive from potential_sup
        {"smallness_budget", 0.1},
        {"rho0", 1.3},
        {"sigma", 0.1},
        {"c0", 0.3},
        {"n", 80},
        {"L", 2.0}}},
      {"phase",
       {{"T1", 0.0},  // 0 -> auto: min(3 t_min, T_end/4), clamped >= 1
        {"T_end", 64.0},
        {"t_min", 4.0},
        {"t_out", 0.0},  // 0 -> t_min; backward sweeps may undershoot t_min
        {"knots", nlohmann::json::array()},  // empty -> log knots, 12/decade
        {"tol_hj", 1.0e-4},
        {"launch_count", 2048},
        {"launch_slope_min", 0.9},
        {"support_slope", 1.1},
        {"grad_budget", 5.0},
        {"lap_budget", 25.0},
        {"free_potential", false}}},
      {"evolution",
       {{"dt", 0.25},
        {"eps_c", -1.0},  // negative -> spacing/2 default
        {"periodic_hartree", false},
        {"disable_nonlinearity", false},
        {"leakage_tol", 1.0}}},
      {"scattering",
       {{"b", 0.45},
        {"T", 4.0},
        {"S_max", 0.0},
        {"quad_knots", 12},
        {"picard_iterations", 3},
        {"sample_times", nlohmann::json::array()}}},
      {"diagnostics",
       {{"pairs", {{"inf", 2.0}, {4.0, 3.0}, {2.0, 6.0}}},
        {"ablations", true},
        {"ensemble", 8},
        {"time_window", 2.0}}},
      {"coupling", 1.0},
      {"seed", 0},
      {"output_dir", "runs"}};
}

namespace detail {

inline void deep_merge(nlohmann::json& base, const nlohmann::json& over,
                       const std::string& at) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string where = at.empty() ? it.key() : at + "." + it.key();
    if (!base.contains(it.key()))
      throw ConfigError("unknown config key: " + where);
    if (base[it.key()].is_object()) {
      if (!it.value().is_object())
        throw ConfigError("config key " + where + " must be an object");
      deep_merge(base[it.key()], it.value(), where);
    } else {
      base[it.key()] = it.value();
    }
  }
}

}  // namespace detail

struct RunConfig {
  nlohmann::json resolved;

  GridSpec grid{64, 32.0};
  // datum
  std::string datum_path;
  double potential_sup = 0.05, amplitude = 0.0, smallness_budget = 0.1;
  double rho0 = 1.3, sigma = 0.1, c0 = 0.3;
  GridSpec datum_grid{80, 2.0};
  // phase
  double T1 = 0.0, T_end = 64.0, t_min = 4.0, t_out = 0.0, tol_hj = 1.0e-4;
  std::vector<double> knots;
  SolveOptions phase_options;
  double grad_budget = 5.0, lap_budget = 25.0;
  // evolution
  EvolutionConfig evolution;
  // scattering
  double b = 0.45, T = 4.0, s_max = 0.0;
  int quad_knots = 12, picard_iterations = 3;
  std::vector<double> sample_times;
  // diagnostics
  std::vector<AdmissiblePair> pairs;
  bool ablations = true;
  int ensemble = 8;
  double time_window = 2.0;

  std::uint64_t seed = 0;
  std::string output_dir = "runs";

  double effective_t_out() const { return t_out > 0.0 ? t_out : t_min; }
  double effective_T1() const {
    if (T1 > 0.0) return T1;
    return std::max(1.0, std::min(3.0 * t_min, T_end / 4.0));
  }
  std::vector<double> effective_knots() const {
    return knots.empty() ? decay_knots(t_min, T_end) : knots;
  }
};

inline RunConfig parse_config(const nlohmann::json& user) {
  nlohmann::json doc = default_config();
  try {
    detail::deep_merge(doc, user, "");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  RunConfig c;
  c.resolved = doc;
  try {
    if (doc.at("coupling").get<double>() != 1.0)
      throw ConfigError("coupling is fixed to +1 (repulsive)");

    const auto& g = doc.at("grid");
    c.grid = GridSpec(g.at("n").get<int>(), g.at("L").get<double>());

    const auto& d = doc.at("datum");
    c.datum_path = d.at("path").get<std::string>();
    c.potential_sup = d.at("potential_sup").get<double>();
    c.amplitude = d.at("amplitude").get<double>();
    c.smallness_budget = d.at("smallness_budget").get<double>();
    if (!(c.smallness_budget > 0.0))
      throw ConfigError("datum.smallness_budget must be positive");
    c.rho0 = d.at("rho0").get<double>();
    c.sigma = d.at("sigma").get<double>();
    c.c0 = d.at("c0").get<double>();
    c.datum_grid = GridSpec(d.at("n").get<int>(), d.at("L").get<double>());
    if (c.datum_path.empty()) {
      if (!(c.c0 > 0.0)) throw ConfigError("datum.c0 must be positive");
      if (!(c.sigma > 0.0)) throw ConfigError("datum.sigma must be positive");
      if (!(c.rho0 > c.c0))
        throw ConfigError("datum.rho0 must exceed datum.c0 (support condition)");
      if (c.amplitude == 0.0 && !(c.potential_sup > 0.0))
        throw ConfigError("datum needs amplitude or potential_sup > 0");
    }

    const auto& p = doc.at("phase");
    c.T1 = p.at("T1").get<double>();
    c.T_end = p.at("T_end").get<double>();
    c.t_min = p.at("t_min").get<double>();
    c.t_out = p.at("t_out").get<double>();
    c.tol_hj = p.at("tol_hj").get<double>();
    c.knots = p.at("knots").get<std::vector<double>>();
    c.phase_options.launch_count = p.at("launch_count").get<int>();
    c.phase_options.launch_slope_min = p.at("launch_slope_min").get<double>();
    c.phase_options.support_slope = p.at("support_slope").get<double>();
    c.phase_options.free_potential = p.at("free_potential").get<bool>();
    c.grad_budget = p.at("grad_budget").get<double>();
    c.lap_budget = p.at("lap_budget").get<double>();
    if (!(c.t_min >= 1.0)) throw ConfigError("phase.t_min must be >= 1");
    if (!(c.T_end > c.t_min))
      throw ConfigError("phase.T_end must exceed phase.t_min");
    if (c.T1 < 0.0) throw ConfigError("phase.T1 must be >= 0 (0 = auto)");
    if (c.t_out < 0.0 || (c.t_out > 0.0 && !(c.t_out >= 1.0)))
      throw ConfigError("phase.t_out must be 0 (auto) or >= 1");
    for (std::size_t k = 0; k < c.knots.size(); ++k)
      if (!(c.knots[k] >= 1.0) || (k > 0 && !(c.knots[k] > c.knots[k - 1])))
        throw ConfigError("phase.knots must be increasing and >= 1");

    const auto& e = doc.at("evolution");
    c.evolution.dt = e.at("dt").get<double>();
    c.evolution.coulomb_softening = e.at("eps_c").get<double>();
    c.evolution.periodic_hartree = e.at("periodic_hartree").get<bool>();
    c.evolution.disable_nonlinearity = e.at("disable_nonlinearity").get<bool>();
    c.evolution.leakage_tol = e.at("leakage_tol").get<double>();
    if (!(c.evolution.dt > 0.0)) throw ConfigError("evolution.dt must be > 0");

    const auto& s = doc.at("scattering");
    c.b = s.at("b").get<double>();
    c.T = s.at("T").get<double>();
    c.s_max = s.at("S_max").get<double>();
    c.quad_knots = s.at("quad_knots").get<int>();
    c.picard_iterations = s.at("picard_iterations").get<int>();
    c.sample_times = s.at("sample_times").get<std::vector<double>>();
    if (!(c.b > 0.25 && c.b < 0.5))
      throw ConfigError("scattering.b must lie in (1/4, 1/2)");
    if (c.quad_knots < 2) throw ConfigError("scattering.quad_knots must be >= 2");

    const auto& di = doc.at("diagnostics");
    for (const auto& pr : di.at("pairs")) {
      if (!pr.is_array() || pr.size() != 2)
        throw ConfigError("diagnostics.pairs entries must be [q, r]");
      double q = pr[0].is_string() ? inf : pr[0].get<double>();
      try {
        c.pairs.emplace_back(q, pr[1].get<double>());
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
      }
    }
    c.ablations = di.at("ablations").get<bool>();
    c.ensemble = di.at("ensemble").get<int>();
    c.time_window = di.at("time_window").get<double>();

    c.seed = doc.at("seed").get<std::uint64_t>();
    c.output_dir = doc.at("output_dir").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json user;
  try {
    in >> user;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(user);
}

// "a.b.c=value" applied onto a JSON document; the value is parsed as JSON
// when possible and kept as a string otherwise.
inline void apply_override(nlohmann::json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key.path=value: " + spec);
  std::string path = spec.substr(0, eq), value = spec.substr(eq + 1);
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;
  }
  nlohmann::json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot - pos);
    if (key.empty()) throw ConfigError("bad override path: " + spec);
    if (dot == std::string::npos) {
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

// ---- builders shared by the subcommands --------------------------------

inline ScatteringDatum build_datum(const RunConfig& c) {
  if (!c.datum_path.empty()) {
    ComplexField uhat = read_field(c.datum_path);
    try {
      return make_datum(uhat, c.c0, c.smallness_budget);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (c.amplitude > 0.0)
    return make_annulus_datum(c.datum_grid, c.amplitude, c.rho0, c.sigma, c.c0,
                              c.smallness_budget);
  return make_annulus_datum_with_potential(c.datum_grid, c.potential_sup,
                                           c.rho0, c.sigma, c.c0);
}

inline std::shared_ptr<PhaseTable> build_phase_table(
    const RunConfig& c, const std::vector<double>& knots) {
  try {
    return std::make_shared<PhaseTable>(solve_phase(
        build_chi(c.c0), c.effective_T1(), c.grid, knots, c.phase_options));
  } catch (const std::runtime_error& e) {
    throw NumericalFailure(e.what());
  }
}

inline XNormSpec x_norm_spec(const RunConfig& c) {
  XNormSpec spec;
  spec.T = c.T;
  spec.b = c.b;
  if (!c.sample_times.empty()) {
    spec.sample_times = c.sample_times;
  } else {
    const double top = c.s_max > 0.0 ? c.s_max : c.T_end;
    for (int k = 0; k <= 3; ++k)
      spec.sample_times.push_back(c.T * std::pow(top / c.T, k / 3.0));
    spec.sample_times.back() = top;
  }
  for (const AdmissiblePair& p : c.pairs)  // first finite-q pair, if any
    if (p.q != inf) {
      spec.pair = p;
      break;
    }
  return spec;
}

inline QuadratureSpec quadrature_spec(const RunConfig& c) {
  QuadratureSpec q;
  q.knot_count = c.quad_knots;
  q.s_max = c.s_max;
  q.evolution = c.evolution;
  return q;
}

}  // namespace hartree
