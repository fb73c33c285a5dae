#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "hartree/field_ops.hpp"
#include "hartree/grid.hpp"
#include "hartree/propagator.hpp"

using namespace hartree;

namespace {

ComplexField gaussian(const GridSpec& g, double amp, double width2) {
  ComplexField u(g, Space::position);
  u.fill([&](double x, double y, double z) {
    return cplx{amp * std::exp(-(x * x + y * y + z * z) / width2), 0.0};
  });
  return u;
}

double rel_l2(const ComplexField& a, const ComplexField& b) {
  ComplexField d = a;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b[i];
  const double nb = b.norm_l2();
  return nb == 0.0 ? d.norm_l2() : d.norm_l2() / nb;
}

}  // namespace

TEST_CASE("linear_propagate: free Gaussian matches the closed form") {
  GridSpec g(48, 12.0);
  ComplexField u0 = gaussian(g, 1.0, 2.0);  // e^{-|x|^2/2}
  EvolutionConfig cfg;
  cfg.coulomb_softening = inf;  // potential off: kinetic flow is exact in time
  cfg.dt = 0.25;
  const double t = 1.0;
  ComplexField u = linear_propagate(u0, 0.0, t, cfg);

  ComplexField want(g, Space::position);
  const cplx z{1.0, t};
  const cplx amp = std::pow(z, -1.5);
  want.fill([&](double x, double y, double zc) {
    const double r2 = x * x + y * y + zc * zc;
    return amp * std::exp(-r2 / (2.0 * z));
  });
  CHECK(rel_l2(u, want) <= 1e-6);
}

TEST_CASE("linear_propagate: unitarity per step and gauge covariance") {
  GridSpec g(24, 8.0);
  ComplexField u = gaussian(g, 1.3, 1.0);
  const double mass0 = u.norm_l2();
  EvolutionConfig cfg;
  cfg.dt = 0.05;

  SECTION("norm preserved to 1e-12 per step") {
    for (int s = 0; s < 8; ++s) {
      u = linear_propagate(u, s * cfg.dt, (s + 1) * cfg.dt, cfg);
      CHECK(std::fabs(u.norm_l2() - mass0) <= 1e-12 * mass0);
    }
  }

  SECTION("global phase commutes with the flow") {
    const cplx phase = std::polar(1.0, 1.234);
    ComplexField v = u;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= phase;
    ComplexField a = linear_propagate(u, 0.0, 0.4, cfg);
    ComplexField b = linear_propagate(v, 0.0, 0.4, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= phase;
    CHECK(rel_l2(b, a) <= 1e-12);
  }
}

TEST_CASE("linear_propagate: group property within the splitting budget") {
  GridSpec g(24, 8.0);
  ComplexField u0 = gaussian(g, 1.0, 1.0);
  EvolutionConfig cfg;
  cfg.dt = 0.05;
  EvolutionConfig half = cfg;
  half.dt = 0.025;

  ComplexField one_shot = linear_propagate(u0, 0.0, 1.0, cfg);
  ComplexField refined = linear_propagate(u0, 0.0, 1.0, half);
  ComplexField d = one_shot;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= refined[i];
  const double err_est = d.norm_l2();
  CHECK(err_est > 0.0);

  for (double tm : {0.4, 0.37}) {
    ComplexField leg = linear_propagate(u0, 0.0, tm, cfg);
    leg = linear_propagate(leg, tm, 1.0, cfg);
    ComplexField diff = leg;
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= one_shot[i];
    INFO("midpoint " << tm << ": two-leg deviation " << diff.norm_l2()
                     << " vs half-step estimate " << err_est);
    CHECK(diff.norm_l2() <= 2.0 * err_est);
  }
}

TEST_CASE("nonlinear_propagate: zero datum, records, validation") {
  GridSpec g(16, 6.0);
  EvolutionConfig cfg;
  cfg.dt = 0.1;
  cfg.record_times = {0.3, 0.7};

  SECTION("zero stays zero") {
    ComplexField z(g, Space::position);
    Trajectory traj = nonlinear_propagate(z, 0.0, 1.0, cfg);
    REQUIRE(traj.times.size() == 4);
    CHECK(traj.times == std::vector<double>{0.0, 0.3, 0.7, 1.0});
    for (const auto& s : traj.states) CHECK(s.norm_l2() == 0.0);
    for (double m : traj.mass_series) CHECK(m == 0.0);
  }

  SECTION("bad configs rejected") {
    ComplexField u = gaussian(g, 0.5, 1.0);
    EvolutionConfig bad = cfg;
    bad.dt = 0.0;
    CHECK_THROWS_AS(nonlinear_propagate(u, 0.0, 1.0, bad), std::invalid_argument);
    bad = cfg;
    bad.record_times = {0.5, 0.2};
    CHECK_THROWS_AS(nonlinear_propagate(u, 0.0, 1.0, bad), std::invalid_argument);
    bad = cfg;
    bad.record_times = {1.5};
    CHECK_THROWS_AS(nonlinear_propagate(u, 0.0, 1.0, bad), std::invalid_argument);
    CHECK_THROWS_AS(nonlinear_propagate(u, 1.0, 1.0, cfg), std::invalid_argument);
    ComplexField hat = forward_transform(u);
    CHECK_THROWS_AS(nonlinear_propagate(hat, 0.0, 1.0, cfg), std::invalid_argument);
  }
}

TEST_CASE("nonlinear_propagate: mass conservation over 1000 small steps") {
  GridSpec g(64, 10.0);
  ComplexField u0 = gaussian(g, 1.0, 1.0);
  EvolutionConfig cfg;
  cfg.dt = 1e-3;
  cfg.periodic_hartree = true;  // potential values do not affect |u|; use the
                                // cheap solver for this long run
  Trajectory traj = nonlinear_propagate(u0, 0.0, 1.0, cfg);
  const double m0 = traj.mass_series.front();
  for (double m : traj.mass_series)
    CHECK(std::fabs(m - m0) <= 1e-8 * m0);
}

TEST_CASE("nonlinear_propagate: small-data linear limit") {
  GridSpec g(32, 10.0);
  ComplexField u0 = gaussian(g, 1e-3, 1.0);
  EvolutionConfig cfg;
  cfg.dt = 0.02;
  ComplexField lin = linear_propagate(u0, 0.0, 1.0, cfg);
  Trajectory traj = nonlinear_propagate(u0, 0.0, 1.0, cfg);
  CHECK(rel_l2(traj.final_state(), lin) <= 1e-5);

  // with the nonlinearity switched off the two drivers coincide exactly
  EvolutionConfig off = cfg;
  off.disable_nonlinearity = true;
  Trajectory lin2 = nonlinear_propagate(u0, 0.0, 1.0, off);
  CHECK(rel_l2(lin2.final_state(), lin) <= 1e-14);
}

TEST_CASE("nonlinear_propagate: second-order convergence in dt") {
  GridSpec g(24, 8.0);
  ComplexField u0 = gaussian(g, 1.5, 1.0);
  EvolutionConfig ref_cfg;
  ref_cfg.dt = 0.00625;
  ComplexField ref = nonlinear_propagate(u0, 0.0, 0.5, ref_cfg).final_state();

  auto terminal_error = [&](double dt) {
    EvolutionConfig cfg;
    cfg.dt = dt;
    return rel_l2(nonlinear_propagate(u0, 0.0, 0.5, cfg).final_state(), ref);
  };
  const double e1 = terminal_error(0.05);
  const double e2 = terminal_error(0.025);
  INFO("errors " << e1 << " / " << e2 << ", ratio " << e1 / e2);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e1 / e2 <= 4.5);
}

TEST_CASE("nonlinear_propagate: gauge covariance and mass abort") {
  GridSpec g(24, 8.0);
  ComplexField u0 = gaussian(g, 1.2, 1.0);
  EvolutionConfig cfg;
  cfg.dt = 0.05;

  SECTION("global phase commutes with the full flow") {
    const cplx phase = std::polar(1.0, -2.1);
    ComplexField v0 = u0;
    for (std::size_t i = 0; i < v0.size(); ++i) v0[i] *= phase;
    ComplexField a = nonlinear_propagate(u0, 0.0, 0.3, cfg).final_state();
    ComplexField b = nonlinear_propagate(v0, 0.0, 0.3, cfg).final_state();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= phase;
    CHECK(rel_l2(b, a) <= 1e-12);
  }

  SECTION("mass drift beyond tolerance aborts with a diagnostic") {
    EvolutionConfig strict = cfg;
    strict.mass_tol = 0.0;
    CHECK_THROWS_AS(nonlinear_propagate(u0, 0.0, 0.5, strict),
                    std::runtime_error);
  }
}

TEST_CASE("leakage gauge flags boundary-heavy states") {
  GridSpec g(24, 8.0);
  ComplexField wide = gaussian(g, 1.0, 64.0);  // fills the box
  EvolutionConfig cfg;
  cfg.dt = 0.05;
  cfg.leakage_tol = 0.05;

  PropagationReport rep;
  linear_propagate(wide, 0.0, 0.1, cfg, &rep);
  CHECK(rep.leakage > 0.05);
  CHECK(rep.leakage_flagged);

  Trajectory traj = nonlinear_propagate(wide, 0.0, 0.1, cfg);
  CHECK(traj.leakage_flagged);

  // a well-contained state does not trip the gauge
  PropagationReport rep2;
  linear_propagate(gaussian(g, 1.0, 1.0), 0.0, 0.1, cfg, &rep2);
  CHECK_FALSE(rep2.leakage_flagged);
}

TEST_CASE("backward_propagate: inversion and guards") {
  GridSpec g(24, 8.0);
  ComplexField uT = gaussian(g, 1.0, 1.5);
  EvolutionConfig cfg;
  cfg.dt = 0.05;

  SECTION("round trip within the splitting budget") {
    Trajectory fwd = nonlinear_propagate(uT, 1.0, 2.0, cfg);
    EvolutionConfig half = cfg;
    half.dt = 0.025;
    const double err_est =
        rel_l2(nonlinear_propagate(uT, 1.0, 2.0, half).final_state(),
               fwd.final_state());
    Trajectory back = backward_propagate(fwd.final_state(), 2.0, 1.0, cfg);
    Trajectory again = nonlinear_propagate(back.final_state(), 1.0, 2.0, cfg);
    INFO("round-trip deviation " << rel_l2(again.final_state(), fwd.final_state())
                                 << " vs estimate " << err_est);
    CHECK(rel_l2(again.final_state(), fwd.final_state()) <=
          std::max(2.0 * err_est, 1e-12));
  }

  SECTION("linear backward undoes linear forward to 1e-8") {
    EvolutionConfig lin = cfg;
    lin.disable_nonlinearity = true;
    ComplexField fwd = linear_propagate(uT, 1.0, 3.0, lin);
    Trajectory back = backward_propagate(fwd, 3.0, 1.0, lin);
    CHECK(rel_l2(back.final_state(), uT) <= 1e-8);
    CHECK(std::fabs(back.final_state().norm_l2() - uT.norm_l2()) <=
          1e-12 * uT.norm_l2());
  }

  SECTION("targets below the profile regime rejected") {
    CHECK_THROWS_AS(backward_propagate(uT, 2.0, 0.5, cfg), std::invalid_argument);
    CHECK_THROWS_AS(backward_propagate(uT, 2.0, 2.0, cfg), std::invalid_argument);
  }
}
