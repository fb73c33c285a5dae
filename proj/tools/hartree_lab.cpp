// hartree-lab: batch driver for the modified-wave-operator laboratory.
//
// Subcommands: verify-identities, phase-solve, construct, decay-study,
// picard-check.  Exit codes: 0 pass, 1 tolerance breach, 2 config error,
// 3 numerical failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <fftw3.h>

#include "hartree/field_io.hpp"
#include "hartree/run_config.hpp"

namespace fs = std::filesystem;
using namespace hartree;

namespace {

struct Verdict {
  std::string name;
  double value;
  double threshold;  // NaN for informational rows
  bool pass;
};

struct Runner {
  RunConfig cfg;
  fs::path dir;
  std::vector<Verdict> verdicts;

  // pass iff value <= threshold
  void check(const std::string& name, double value, double threshold) {
    const bool ok = value <= threshold;
    verdicts.push_back({name, value, threshold, ok});
    std::printf("%-42s %13.6e  (<= %g)  %s\n", name.c_str(), value, threshold,
                ok ? "pass" : "FAIL");
  }
  void note(const std::string& name, double value) {
    verdicts.push_back({name, value, std::nan(""), true});
    std::printf("%-42s %13.6e  (report)\n", name.c_str(), value);
  }

  int finish() {
    std::vector<std::vector<double>> rows;
    std::ofstream out(dir / "verdicts.csv");
    out << "name,value,threshold,pass\n";
    char buf[64];
    bool all = true;
    for (const Verdict& v : verdicts) {
      std::snprintf(buf, sizeof buf, "%.17g", v.value);
      out << v.name << "," << buf << ",";
      if (std::isnan(v.threshold)) {
        out << "";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", v.threshold);
        out << buf;
      }
      out << "," << (v.pass ? 1 : 0) << "\n";
      all = all && v.pass;
    }
    std::printf("=> %s\n", all ? "PASS" : "TOLERANCE BREACH");
    return all ? 0 : 1;
  }
};

Runner make_runner(const std::string& config_path, const std::string& output,
                   long long seed, const std::vector<std::string>& overrides,
                   const std::string& subcmd) {
  nlohmann::json user = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file " + config_path);
    try {
      in >> user;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  for (const std::string& o : overrides) apply_override(user, o);
  if (!output.empty()) user["output_dir"] = output;
  if (seed >= 0) user["seed"] = static_cast<std::uint64_t>(seed);

  Runner r;
  r.cfg = parse_config(user);
  r.dir = fs::path(r.cfg.output_dir) / subcmd;
  fs::create_directories(r.dir);
  std::ofstream(r.dir / "resolved_config.json") << r.cfg.resolved.dump(2)
                                                << "\n";
  std::ofstream(r.dir / "versions.txt")
      << "hartree-lab 1.0.0\n"
      << "fftw " << fftw_version << "\n"
      << "nlohmann-json " << NLOHMANN_JSON_VERSION_MAJOR << "."
      << NLOHMANN_JSON_VERSION_MINOR << "." << NLOHMANN_JSON_VERSION_PATCH
      << "\n";
  return r;
}

std::shared_ptr<PhaseTable> free_table(const GridSpec& g,
                                       std::vector<double> knots,
                                       double T1 = 1.9) {
  SolveOptions opt;
  opt.free_potential = true;
  opt.launch_count = 1024;
  return std::make_shared<PhaseTable>(
      solve_phase(build_chi(1.0), T1, g, knots, opt));
}

// ---- verify-identities --------------------------------------------------

int cmd_verify_identities(Runner& r) {
  const RunConfig& c = r.cfg;
  ScatteringDatum d = build_datum(c);
  if (d.l2_norm == 0.0) {
    std::printf("warning: zero datum, identity battery is vacuous\n");
    r.note("zero_datum", 0.0);
    return r.finish();
  }
  const GridSpec& gd = d.uhat_plus.grid();

  // modulus of the modified amplitude never moves
  {
    double worst = 0.0;
    ProfileContext cw(d, free_table(GridSpec(16, 8.0), {4.0}), c.b);
    for (double t : {2.0, 10.0, 100.0}) {
      ComplexField w = build_W(cw, t);
      for (std::size_t i = 0; i < w.size(); ++i)
        worst = std::max(worst,
                         std::fabs(std::abs(w[i]) - std::abs(d.uhat_plus[i])));
    }
    r.check("amplitude_modulus_sup", worst, 1e-12);
  }

  // the two profile formulations agree (product route vs direct pointwise)
  {
    RealField vw = wide_potential(d, 192);
    const double rmax = c.rho0 + 3.0 * c.sigma;
    // box sized so x/t sampling lands on the wide-potential lattice
    const double Ld = gd.half_width();
    const int m = std::max(2, static_cast<int>(std::ceil(3.0 * rmax / Ld)));
    double worst = 0.0;
    for (double t : {4.0, 16.0, 64.0}) {
      const double L = 0.5 * m * t * Ld;
      ProfileContext ctx(d, free_table(GridSpec(48, L), {t}), c.b);
      ComplexField a = build_profile(ctx, t);
      ComplexField b = build_profile_direct(ctx, t, vw);
      std::vector<double> diff(a.size()), den(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        diff[i] = std::norm(a[i] - b[i]);
        den[i] = std::norm(a[i]);
      }
      const double dn = pairwise_sum(den);
      if (dn > 0.0)
        worst = std::max(worst, std::sqrt(pairwise_sum(diff) / dn));
    }
    r.check("profile_two_routes_rel_l2", worst, 1e-10);
  }

  // aligned resolved context at t = 8: x/t maps grid points to grid points
  const double t8 = 8.0;
  ProfileContext cres(d, free_table(GridSpec(gd.n(), t8 * gd.half_width()),
                                    {t8}),
                      c.b);

  // nonlinearity factorization through the rescaled static potential
  r.check("nonlinearity_factorization_rel_l2",
          profile_nonlinearity_identity(cres, t8), 1e-6);

  // scaling law of the Hartree potential of the profile
  {
    ComplexField up = build_profile(cres, t8);
    RealField rho(up.grid());
    for (std::size_t i = 0; i < up.size(); ++i) rho[i] = std::norm(up[i]);
    RealField pot = inverse_laplacian(rho);
    double vmax = 0.0;
    for (double v : d.v_plus.values()) vmax = std::max(vmax, std::fabs(v));
    const double cap = 1.1 * gd.half_width();
    const int n = gd.n();
    double worst = 0.0;
    std::size_t i = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int k = 0; k < n; ++k, ++i) {
          const double x = gd.coord(a), y = gd.coord(b), z = gd.coord(k);
          if (std::sqrt(x * x + y * y + z * z) > cap) continue;
          worst = std::max(
              worst, std::fabs(pot[i] - d.v_plus[i] / t8) / (vmax / t8));
        }
    r.check("potential_scaling_sup_rel", worst, 1e-6);
  }

  // low/high velocity pieces partition the dilation prefactor
  {
    ComplexField f = d.uhat_plus;
    for (cplx& z : f.values()) z /= d.h1_norm;
    const double t = 4.0;
    ProfileContext ctx(d, free_table(GridSpec(48, 24.0), {t}), c.b);
    ComplexField u1 = decompose_U(ctx, t, 1, f);
    ComplexField u2 = decompose_U(ctx, t, 2, f);
    ComplexField u3 = decompose_U(ctx, t, 3, f);
    ComplexField ref = modulate_phase(
        dilate_to(f, t, ctx.grid()),
        ctx.phase().psi_field(ctx.phase().knot_index(t)));
    std::vector<double> diff(ref.size()), den(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      diff[i] = std::norm(u1[i] + u2[i] + u3[i] - ref[i]);
      den[i] = std::norm(ref[i]);
    }
    r.check("velocity_partition_rel_l2",
            std::sqrt(pairwise_sum(diff) / pairwise_sum(den)), 1e-10);
  }
  return r.finish();
}

// ---- phase-solve --------------------------------------------------------

int cmd_phase_solve(Runner& r) {
  const RunConfig& c = r.cfg;
  std::vector<double> knots = c.effective_knots();
  std::shared_ptr<PhaseTable> table = build_phase_table(c, knots);

  const double resid = phase_residual_sup(build_chi(c.c0), *table,
                                          c.phase_options.free_potential);
  PhaseCertificate cert = certify_phase(*table, c.grad_budget, c.lap_budget);

  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < knots.size(); ++k)
    rows.push_back({knots[k], cert.grad_sup[k], cert.lap_sup[k]});
  write_csv(r.dir / "phase_certificate.csv",
            {"t", "grad_sup_deviation", "lap_sup_deviation"}, rows);

  r.check("hj_residual_sup", resid, c.tol_hj);
  r.check("grad_gauge_constant", cert.grad_constant, c.grad_budget);
  r.check("lap_gauge_constant", cert.lap_constant, c.lap_budget);
  r.check("grad_sup_trend_last_over_first",
          cert.grad_sup.front() > 0.0
              ? cert.grad_sup.back() / cert.grad_sup.front()
              : 0.0,
          1.0);
  r.check("lap_sup_trend_last_over_first",
          cert.lap_sup.front() > 0.0
              ? cert.lap_sup.back() / cert.lap_sup.front()
              : 0.0,
          1.0);
  return r.finish();
}

// ---- construct ----------------------------------------------------------

int cmd_construct(Runner& r) {
  const RunConfig& c = r.cfg;
  ScatteringDatum d = build_datum(c);
  std::vector<double> knots = c.effective_knots();
  std::shared_ptr<PhaseTable> table = build_phase_table(c, knots);
  ProfileContext ctx(std::move(d), table, c.b);

  WaveOperatorResult res = [&] {
    try {
      return modified_wave_operator(ctx, c.T_end, c.effective_t_out(),
                                    c.evolution);
    } catch (const std::exception& e) {
      throw NumericalFailure(e.what());
    }
  }();
  write_field(r.dir / "u_out.bin", res.u_out);

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < res.deficits.size(); ++i)
    rows.push_back({res.deficit_times[i], res.deficits[i]});
  write_csv(r.dir / "deficits.csv", {"t", "l2_deficit"}, rows);

  r.check("terminal_deficit", res.deficits.empty() ? 0.0 : res.deficits[0],
          1e-12);
  r.note("u_out_mass", res.u_out.norm_l2());
  std::vector<double> ts, vs;
  for (std::size_t i = 0; i < res.deficits.size(); ++i)
    if (res.deficits[i] > 0.0) {
      ts.push_back(res.deficit_times[i]);
      vs.push_back(res.deficits[i]);
    }
  if (ts.size() >= 6) r.note("deficit_fit_slope", fit_decay(ts, vs).slope);
  return r.finish();
}

// ---- decay-study --------------------------------------------------------

int cmd_decay_study(Runner& r) {
  const RunConfig& c = r.cfg;
  ScatteringDatum d = build_datum(c);
  std::vector<double> knots = c.effective_knots();
  std::shared_ptr<PhaseTable> table = build_phase_table(c, knots);
  ProfileContext ctx(std::move(d), table, c.b);

  DecayReport rep;
  try {
    rep = ablation_study(ctx, c.T_end, c.t_min, c.evolution, c.pairs);
  } catch (const std::runtime_error& e) {
    throw NumericalFailure(e.what());
  }

  std::vector<std::string> header = {"t", "l2_deficit", "no_log_deficit",
                                     "free_phase_deficit", "no_log_oracle"};
  for (const AdmissiblePair& p : rep.pairs) {
    char name[48];
    if (p.q == inf)
      std::snprintf(name, sizeof name, "mixed_inf_%g", p.r);
    else
      std::snprintf(name, sizeof name, "mixed_%g_%g", p.q, p.r);
    header.push_back(name);
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    std::vector<double> row = {rep.times[i], rep.l2_deficit[i],
                               rep.no_log_deficit[i],
                               rep.free_phase_deficit[i], rep.no_log_oracle[i]};
    for (const auto& col : rep.mixed_deficit) row.push_back(col[i]);
    rows.push_back(std::move(row));
  }
  write_csv(r.dir / "decay_report.csv", header, rows);

  // enforced: what a correct construction guarantees at any resolution
  r.check("deficit_fit_slope", rep.fit.slope, -0.2);
  r.check("terminal_deficit", rep.l2_deficit.back(), 1e-12);
  const double oracle_gap =
      std::fabs(rep.no_log_deficit.back() - rep.no_log_oracle.back()) /
      rep.no_log_oracle.back();
  r.check("terminal_no_log_oracle_rel_gap", oracle_gap, 1e-2);
  double free_margin = 0.0;  // positive if the free-phase ablation ever wins
  for (std::size_t i = 0; i + 1 < rep.times.size(); ++i)
    if (rep.times[i] <= 0.5 * c.T_end + 1e-9)
      free_margin = std::max(
          free_margin, (rep.l2_deficit[i] - rep.free_phase_deficit[i]) /
                           std::max(rep.l2_deficit[i], 1e-300));
  r.check("free_phase_domination_margin", free_margin, 0.0);
  for (std::size_t p = 0; p < rep.pairs.size(); ++p) {
    if (rep.pairs[p].q == inf) continue;
    std::vector<double> ts(rep.times.begin(), rep.times.end() - 1),
        vs(rep.mixed_deficit[p].begin(), rep.mixed_deficit[p].end() - 1);
    char name[64];
    std::snprintf(name, sizeof name, "mixed_%g_%g_fit_slope", rep.pairs[p].q,
                  rep.pairs[p].r);
    r.check(name, fit_decay(ts, vs).slope, 0.0);
  }

  // reported: asymptotic-regime quantities, honest at any scale
  std::size_t q = 0;
  while (q + 1 < rep.times.size() && rep.times[q] < 0.25 * c.T_end - 1e-9) ++q;
  r.note("quarter_time", rep.times[q]);
  r.note("no_log_over_full_at_quarter",
         rep.no_log_deficit[q] / std::max(rep.l2_deficit[q], 1e-300));
  r.note("no_log_oracle_rel_gap_at_quarter",
         std::fabs(rep.no_log_deficit[q] - rep.no_log_oracle[q]) /
             rep.no_log_oracle[q]);
  r.note("no_log_fit_slope", rep.no_log_fit.slope);
  r.note("free_phase_fit_slope", rep.free_phase_fit.slope);
  return r.finish();
}

// ---- picard-check -------------------------------------------------------

int cmd_picard_check(Runner& r) {
  const RunConfig& c = r.cfg;
  ScatteringDatum d = build_datum(c);
  XNormSpec spec = x_norm_spec(c);
  QuadratureSpec quad = quadrature_spec(c);
  std::vector<double> knots = picard_time_grid(spec, quad);
  std::shared_ptr<PhaseTable> table = build_phase_table(c, knots);
  ProfileContext ctx(std::move(d), table, c.b);

  FixedPointState st = [&] {
    try {
      return picard_iterate(ctx, spec, c.picard_iterations, quad);
    } catch (const std::runtime_error& e) {
      throw NumericalFailure(e.what());
    }
  }();

  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < st.x_norm_history.size(); ++i)
    rows.push_back({static_cast<double>(i), st.x_norm_history[i],
                    i < st.contraction_history.size()
                        ? st.contraction_history[i]
                        : 0.0});
  write_csv(r.dir / "picard.csv", {"iteration", "x_norm", "contraction"},
            rows);

  double worst = 0.0;
  for (double cr : st.contraction_history) worst = std::max(worst, cr);
  r.check("contraction_ratio_max", worst, 0.5);
  r.note("x_norm_final", st.x_norm_history.back());
  return r.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudospectral laboratory for long-range Hartree scattering"};
  app.require_subcommand(1);

  std::string config_path, output;
  long long seed = -1;
  std::vector<std::string> overrides;

  const char* names[] = {"verify-identities", "phase-solve", "construct",
                         "decay-study", "picard-check"};
  const char* descs[] = {
      "run the profile/amplitude identity battery",
      "solve the eikonal phase and certify it",
      "realize the wave operator by backward shooting",
      "measure deficit decay and profile ablations",
      "run the final-state fixed-point iteration"};
  for (int i = 0; i < 5; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descs[i]);
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--output", output, "output directory");
    sub->add_option("--seed", seed, "RNG seed override");
    sub->add_option("--override", overrides,
                    "key.path=value configuration override (repeatable)");
  }

  CLI11_PARSE(app, argc, argv);

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    Runner r = make_runner(config_path, output, seed, overrides, sub);
    if (sub == "verify-identities") return cmd_verify_identities(r);
    if (sub == "phase-solve") return cmd_phase_solve(r);
    if (sub == "construct") return cmd_construct(r);
    if (sub == "decay-study") return cmd_decay_study(r);
    return cmd_picard_check(r);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
}
