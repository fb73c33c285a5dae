#pragma once

// Cutoff Coulomb potential and the phase solved from
//   -d_t Psi = 1/2 |grad Psi|^2 + V(t,x),
// by backward characteristics. Everything here is radial: the potential is
// radial and the terminal phase |x|^2/(2 T_end) is radial, so the 3D problem
// reduces to 1D Hamiltonian trajectories (r, p_r) plus an action integral.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hartree/grid.hpp"

namespace hartree {

// Smooth radial bump: 1 on r <= c0/4, 0 on r >= c0/2, monotone between.
struct CutoffSpec {
  double c0 = 0.0;

  double chi(double r) const {
    const double a = 0.25 * c0, b = 0.5 * c0;
    if (r <= a) return 1.0;
    if (r >= b) return 0.0;
    const double u = (r - a) / (b - a);
    const double g = bump(u), h = bump(1.0 - u);
    return h / (g + h);
  }

  double dchi(double r) const {
    const double a = 0.25 * c0, b = 0.5 * c0;
    if (r <= a || r >= b) return 0.0;
    const double u = (r - a) / (b - a);
    const double g = bump(u), h = bump(1.0 - u);
    const double gp = dbump(u), hp = -dbump(1.0 - u);
    return ((hp * g - h * gp) / ((g + h) * (g + h))) / (b - a);
  }

 private:
  static double bump(double v) { return v > 0.0 ? std::exp(-1.0 / v) : 0.0; }
  static double dbump(double v) {
    return v > 0.0 ? std::exp(-1.0 / v) / (v * v) : 0.0;
  }
};

inline CutoffSpec build_chi(double c0,
                            double box_half_width =
                                std::numeric_limits<double>::infinity()) {
  if (!(c0 > 0.0)) throw std::invalid_argument("build_chi: c0 must be > 0");
  if (!(c0 <= 2.0 * box_half_width))
    throw std::domain_error("build_chi: cutoff radius exceeds the box");
  return CutoffSpec{c0};
}

// V(t,r) = (1/r) (1 - chi(2 r / (t + T1))); zero at r = 0 since chi(0) = 1.
inline double potential_value(const CutoffSpec& cut, double T1, double t,
                              double r) {
  const double scale = 2.0 / (t + T1);
  // chi == 1 exactly for 2r/(t+T1) <= c0/4
  if (r * scale <= 0.25 * cut.c0) return 0.0;
  return (1.0 - cut.chi(r * scale)) / r;
}

// dV/dr, needed by the characteristic equations.
inline double potential_slope(const CutoffSpec& cut, double T1, double t,
                              double r) {
  const double scale = 2.0 / (t + T1);
  if (r * scale <= 0.25 * cut.c0) return 0.0;
  const double s = r * scale;
  return -cut.dchi(s) * scale / r - (1.0 - cut.chi(s)) / (r * r);
}

inline RealField potential_VT1(const CutoffSpec& cut, double T1, double t,
                               const GridSpec& grid) {
  if (!(T1 > 1.0)) throw std::invalid_argument("potential_VT1: T1 must be > 1");
  if (!(t >= 0.0)) throw std::invalid_argument("potential_VT1: t must be >= 0");
  RealField v(grid);
  v.fill([&](double x, double y, double z) {
    return potential_value(cut, T1, t, std::sqrt(x * x + y * y + z * z));
  });
  return v;
}

namespace detail {

// Cubic Hermite on one interval; exact for quadratics, which makes the
// free-potential table exact.
struct HermiteEval {
  double value, slope, curvature;
};

inline HermiteEval hermite(double r0, double r1, double f0, double f1,
                           double d0, double d1, double r) {
  const double h = r1 - r0;
  const double u = (r - r0) / h;
  const double u2 = u * u, u3 = u2 * u;
  const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
  const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
  HermiteEval e;
  e.value = h00 * f0 + h * h10 * d0 + h01 * f1 + h * h11 * d1;
  const double dh00 = 6 * u2 - 6 * u, dh10 = 3 * u2 - 4 * u + 1;
  const double dh01 = -6 * u2 + 6 * u, dh11 = 3 * u2 - 2 * u;
  e.slope = (dh00 * f0 + dh01 * f1) / h + dh10 * d0 + dh11 * d1;
  const double c00 = 12 * u - 6, c10 = 6 * u - 4;
  const double c01 = -12 * u + 6, c11 = 6 * u - 2;
  e.curvature = (c00 * f0 + c01 * f1) / (h * h) + (c10 * d0 + c11 * d1) / h;
  return e;
}

}  // namespace detail

// Solved phase sampled on radial characteristics at requested times. Each
// slice stores the landing radii together with the phase and its radial
// derivative (the momentum), so evaluation is Hermite interpolation with
// exact slopes.
class PhaseTable {
 public:
  struct RadialSlice {
    double t = 0.0;
    // characteristics below valid_from are excluded (they land inside the
    // support hole of the data, where the phase is never used); evaluation
    // clamps to the first valid node there
    std::size_t valid_from = 0;
    std::vector<double> r, psi, pr;

    detail::HermiteEval eval(double radius) const {
      if (radius > r.back())
        throw std::domain_error("PhaseTable: radius outside table coverage");
      if (radius < r[valid_from]) radius = r[valid_from];
      auto it = std::upper_bound(r.begin() + valid_from, r.end(), radius);
      std::size_t i = (it == r.begin() + valid_from)
                          ? valid_from
                          : (it - r.begin() - 1);
      if (i + 1 >= r.size()) i = r.size() - 2;
      return detail::hermite(r[i], r[i + 1], psi[i], psi[i + 1], pr[i],
                             pr[i + 1], radius);
    }
  };

  PhaseTable(GridSpec grid, double T1, std::vector<double> knots,
             std::vector<RadialSlice> center, std::vector<RadialSlice> minus,
             std::vector<RadialSlice> plus)
      : grid_(grid),
        T1_(T1),
        knots_(std::move(knots)),
        center_(std::move(center)),
        minus_(std::move(minus)),
        plus_(std::move(plus)) {}

  const GridSpec& grid() const { return grid_; }
  double T1() const { return T1_; }
  const std::vector<double>& time_knots() const { return knots_; }
  std::size_t knot_count() const { return knots_.size(); }
  const RadialSlice& slice(std::size_t k) const { return center_.at(k); }
  const RadialSlice& slice_before(std::size_t k) const { return minus_.at(k); }
  const RadialSlice& slice_after(std::size_t k) const { return plus_.at(k); }

  std::size_t knot_index(double t) const {
    for (std::size_t k = 0; k < knots_.size(); ++k)
      if (std::fabs(knots_[k] - t) <= 1e-9 * std::max(1.0, std::fabs(t)))
        return k;
    throw std::domain_error("PhaseTable: time not covered by the table");
  }

  double psi(std::size_t k, double r) const { return slice(k).eval(r).value; }
  double psi_r(std::size_t k, double r) const { return slice(k).eval(r).slope; }
  double psi_rr(std::size_t k, double r) const {
    return slice(k).eval(r).curvature;
  }
  // Laplacian of a radial function: f'' + 2 f'/r, with the r -> 0 limit 3 f''.
  double laplacian(std::size_t k, double r) const {
    const auto e = slice(k).eval(r);
    if (r < 1e-9) return 3.0 * e.curvature;
    return e.curvature + 2.0 * e.slope / r;
  }

  RealField psi_field(std::size_t k) const {
    const auto& s = slice(k);
    RealField out(grid_);
    out.fill([&](double x, double y, double z) {
      return s.eval(std::sqrt(x * x + y * y + z * z)).value;
    });
    return out;
  }

  std::array<RealField, 3> grad_field(std::size_t k) const {
    const auto& s = slice(k);
    std::array<RealField, 3> out{RealField(grid_), RealField(grid_),
                                 RealField(grid_)};
    const int n = grid_.n();
    std::size_t i = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c, ++i) {
          const double x = grid_.coord(a), y = grid_.coord(b),
                       z = grid_.coord(c);
          const double r = std::sqrt(x * x + y * y + z * z);
          if (r < 1e-12) {
            out[0][i] = out[1][i] = out[2][i] = 0.0;
            continue;
          }
          const double slope = s.eval(r).slope;
          out[0][i] = slope * x / r;
          out[1][i] = slope * y / r;
          out[2][i] = slope * z / r;
        }
    return out;
  }

 private:
  GridSpec grid_;
  double T1_;
  std::vector<double> knots_;
  std::vector<RadialSlice> center_, minus_, plus_;
};

struct SolveOptions {
  double dt_max = 0.05;        // RK4 step bound for the characteristics
  int launch_count = 4096;     // trajectories launched from the terminal time
  double coverage = 1.1;       // margin on the launch radius range
  double residual_offset = 1e-3;  // relative time offset of the aux slices
  bool free_potential = false;    // drop V entirely (synthetic exact case)
  bool check_monotone = true;     // throw on characteristic crossing
  // Radius-per-time floor of the validity cone: crossings confined to
  // r < support_slope * t are tolerated because the data the phase multiplies
  // vanish there. 0 keeps the strict global check.
  double support_slope = 0.0;
  // Launch only trajectories with terminal slope r/T >= this value. Slower
  // trajectories are sub-escape-velocity for the Coulomb tail and swing
  // through the region of interest after bouncing; excluding them keeps the
  // covering family single-valued. 0 launches the full fan.
  double launch_slope_min = 0.0;
};

namespace detail {

struct CharState {
  double r, p, psi;
};

template <class Vr, class V>
inline CharState rk4_back(const CharState& s, double t, double dt, Vr&& vr,
                          V&& vv) {
  // one backward step t -> t - dt for r' = p, p' = -V_r, psi' = p^2/2 - V
  auto f = [&](double tt, const CharState& q) {
    return CharState{q.p, -vr(tt, q.r), 0.5 * q.p * q.p - vv(tt, q.r)};
  };
  const double h = -dt;
  const CharState k1 = f(t, s);
  const CharState s2{s.r + 0.5 * h * k1.r, s.p + 0.5 * h * k1.p,
                     s.psi + 0.5 * h * k1.psi};
  const CharState k2 = f(t + 0.5 * h, s2);
  const CharState s3{s.r + 0.5 * h * k2.r, s.p + 0.5 * h * k2.p,
                     s.psi + 0.5 * h * k2.psi};
  const CharState k3 = f(t + 0.5 * h, s3);
  const CharState s4{s.r + h * k3.r, s.p + h * k3.p, s.psi + h * k3.psi};
  const CharState k4 = f(t + h, s4);
  return CharState{
      s.r + h / 6.0 * (k1.r + 2 * k2.r + 2 * k3.r + k4.r),
      s.p + h / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p),
      s.psi + h / 6.0 * (k1.psi + 2 * k2.psi + 2 * k3.psi + k4.psi)};
}

}  // namespace detail

inline PhaseTable solve_phase(const CutoffSpec& cut, double T1,
                              const GridSpec& grid,
                              const std::vector<double>& time_knots,
                              const SolveOptions& opt = {}) {
  if (!(T1 > 1.0)) throw std::invalid_argument("solve_phase: T1 must be > 1");
  if (time_knots.size() < 1)
    throw std::invalid_argument("solve_phase: need at least one knot");
  for (std::size_t k = 0; k < time_knots.size(); ++k) {
    if (!(time_knots[k] >= 1.0))
      throw std::invalid_argument("solve_phase: knots must lie in [1, T_end]");
    if (k > 0 && !(time_knots[k] > time_knots[k - 1]))
      throw std::invalid_argument("solve_phase: knots must increase");
  }

  const double t_end = time_knots.back();
  const double eta = opt.residual_offset;

  // Each knot gets a time triple for finite differencing in t: centered when
  // it fits below t_end, one-sided (both auxiliaries below) for the last knot.
  struct Rec {
    double t;
    std::size_t knot;
    int which;  // 0 aux-low, 1 center, 2 aux-high
  };
  std::vector<Rec> recs;
  for (std::size_t k = 0; k < time_knots.size(); ++k) {
    const double tk = time_knots[k];
    if (tk * (1.0 + eta) <= t_end) {
      recs.push_back({tk * (1.0 - eta), k, 0});
      recs.push_back({tk, k, 1});
      recs.push_back({tk * (1.0 + eta), k, 2});
    } else {
      recs.push_back({tk * (1.0 - 2.0 * eta), k, 0});
      recs.push_back({tk * (1.0 - eta), k, 2});
      recs.push_back({tk, k, 1});
    }
  }
  std::sort(recs.begin(), recs.end(),
            [](const Rec& a, const Rec& b) { return a.t > b.t; });

  const double t_low = recs.back().t;
  const double r_max_needed = std::sqrt(3.0) * grid.half_width();
  const double launch_max = opt.coverage * r_max_needed * t_end / t_low;
  const int m = opt.launch_count;

  auto vr = [&](double t, double r) {
    return opt.free_potential ? 0.0 : potential_slope(cut, T1, t, r);
  };
  auto vv = [&](double t, double r) {
    return opt.free_potential ? 0.0 : potential_value(cut, T1, t, r);
  };

  const double launch_min = opt.launch_slope_min * t_end;
  if (launch_min >= launch_max)
    throw std::invalid_argument("solve_phase: launch_slope_min too large");
  std::vector<detail::CharState> traj(m);
  for (int j = 0; j < m; ++j) {
    const double r0 = launch_min + (launch_max - launch_min) * j / (m - 1);
    traj[j] = {r0, r0 / t_end, r0 * r0 / (2.0 * t_end)};
  }

  std::vector<PhaseTable::RadialSlice> minus(time_knots.size()),
      center(time_knots.size()), plus(time_knots.size());

  double t_cur = t_end;
  for (const Rec& rec : recs) {
    if (rec.t < t_cur) {
      const int steps =
          std::max(1, static_cast<int>(std::ceil((t_cur - rec.t) / opt.dt_max)));
      const double dt = (t_cur - rec.t) / steps;
      for (int s = 0; s < steps; ++s) {
        const double t = t_cur - s * dt;
        for (auto& q : traj) q = detail::rk4_back(q, t, dt, vr, vv);
      }
      t_cur = rec.t;
    }
    PhaseTable::RadialSlice sl;
    sl.t = rec.t;
    sl.r.resize(m);
    sl.psi.resize(m);
    sl.pr.resize(m);
    for (int j = 0; j < m; ++j) {
      sl.r[j] = traj[j].r;
      sl.psi[j] = traj[j].psi;
      sl.pr[j] = traj[j].p;
    }
    // injectivity of the radial flow map: the landing radii must form a
    // monotone branch covering everything above the validity floor
    std::size_t j0 = m - 1;
    while (j0 > 0 && sl.r[j0 - 1] < sl.r[j0]) --j0;
    const double floor_r = opt.support_slope * rec.t;
    if (opt.check_monotone && j0 > 0 && sl.r[j0] > floor_r)
      throw std::runtime_error(
          "solve_phase: characteristic crossing at t = " +
          std::to_string(rec.t) + ", r = " + std::to_string(sl.r[j0]) +
          " (T1 = " + std::to_string(T1) + " too small)");
    sl.valid_from = j0;
    auto& dst = rec.which == 0 ? minus : (rec.which == 1 ? center : plus);
    dst[rec.knot] = std::move(sl);
  }

  return PhaseTable(grid, T1, time_knots, std::move(center), std::move(minus),
                    std::move(plus));
}

// Sup over a quasi-random radial probe set of |d_t psi + psi_r^2/2 + V|,
// with d_t psi from the centered time triples stored in the table.
inline double phase_residual_sup(const CutoffSpec& cut, const PhaseTable& table,
                                 bool free_potential = false,
                                 int probe_count = 512) {
  const double r_hi = 0.5 * table.grid().half_width();
  double worst = 0.0;
  const double golden = 0.6180339887498949;
  for (std::size_t k = 0; k < table.knot_count(); ++k) {
    const auto& sm = table.slice_before(k);
    const auto& sc = table.slice(k);
    const auto& sp = table.slice_after(k);
    // generic 3-point Lagrange differentiation at sc.t (handles both the
    // centered and the one-sided triple of the final knot)
    const double tm = sm.t, tc = sc.t, tp = sp.t;
    const double wm = (tc - tp) / ((tm - tc) * (tm - tp));
    const double wc = (2.0 * tc - tm - tp) / ((tc - tm) * (tc - tp));
    const double wp = (tc - tm) / ((tp - tm) * (tp - tc));
    const double r_lo =
        std::max({0.02 * r_hi, sm.r[sm.valid_from], sc.r[sc.valid_from],
                  sp.r[sp.valid_from]});
    for (int j = 0; j < probe_count; ++j) {
      const double frac = std::fmod(golden * (j + 1), 1.0);
      const double r = r_lo + (r_hi - r_lo) * frac;
      const double fm = sm.eval(r).value;
      const auto ec = sc.eval(r);
      const double fp = sp.eval(r).value;
      const double dpsi_dt = wm * fm + wc * ec.value + wp * fp;
      const double v =
          free_potential ? 0.0 : potential_value(cut, table.T1(), sc.t, r);
      worst = std::max(worst,
                       std::fabs(dpsi_dt + 0.5 * ec.slope * ec.slope + v));
    }
  }
  return worst;
}

struct PhaseCertificate {
  double grad_constant = 0.0;  // max over knots of <t> sup_r |psi_r - r/t|
  double lap_constant = 0.0;   // max over knots of <t>^2 sup_r |lap - 3/t|
  std::vector<double> grad_sup;  // raw per-knot sup deviations
  std::vector<double> lap_sup;
  double grad_budget = 0.0, lap_budget = 0.0;
  bool pass = false;
};

inline PhaseCertificate certify_phase(const PhaseTable& table,
                                      double grad_budget = 5.0,
                                      double lap_budget = 25.0) {
  PhaseCertificate cert;
  cert.grad_budget = grad_budget;
  cert.lap_budget = lap_budget;
  const double r_cap = std::sqrt(3.0) * table.grid().half_width();
  for (std::size_t k = 0; k < table.knot_count(); ++k) {
    const auto& s = table.slice(k);
    const double t = s.t;
    double g = 0.0, l = 0.0;
    for (std::size_t j = s.valid_from; j < s.r.size(); ++j) {
      const double r = s.r[j];
      if (r > r_cap) break;
      g = std::max(g, std::fabs(s.pr[j] - r / t));
      const double lap = table.laplacian(k, r);
      l = std::max(l, std::fabs(lap - 3.0 / t));
    }
    cert.grad_sup.push_back(g);
    cert.lap_sup.push_back(l);
    const double bracket = std::sqrt(1.0 + t * t);
    cert.grad_constant = std::max(cert.grad_constant, bracket * g);
    cert.lap_constant = std::max(cert.lap_constant, bracket * bracket * l);
  }
  cert.pass = cert.grad_constant <= grad_budget &&
              cert.lap_constant <= lap_budget;
  return cert;
}

}  // namespace hartree
