#pragma once

// Fixed-point machinery around the asymptotic profile: the weighted space-time
// norm X, the integral map K[u], the source term E(t), the Picard cross-check
// and the production construction by backward shooting.

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "hartree/field_ops.hpp"
#include "hartree/grid.hpp"
#include "hartree/profile.hpp"
#include "hartree/propagator.hpp"

namespace hartree {

// A field-valued function of time sampled on increasing knots.
struct FieldSeries {
  std::vector<double> times;
  std::vector<ComplexField> fields;

  void validate() const {
    if (times.empty()) throw std::domain_error("FieldSeries: empty series");
    if (times.size() != fields.size())
      throw std::invalid_argument("FieldSeries: size mismatch");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
      if (!(times[i + 1] > times[i]))
        throw std::invalid_argument("FieldSeries: times must increase");
  }
};

struct XNormSpec {
  double T = 1.0;                    // start time of the weighted sups
  double b = 0.45;                   // weight exponent, in (1/4, 1/2)
  AdmissiblePair pair{4.0, 3.0};     // mixed-norm component
  std::vector<double> sample_times;  // knots where the sups are taken

  void validate() const {
    if (!(T >= 1.0)) throw std::invalid_argument("XNormSpec: T must be >= 1");
    if (!(b > 0.25 && b < 0.5))
      throw std::invalid_argument("XNormSpec: b must lie in (1/4, 1/2)");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
      if (!(sample_times[i] >= T * (1.0 - 1e-12)))
        throw std::invalid_argument("XNormSpec: sample times must be >= T");
      if (i > 0 && !(sample_times[i] > sample_times[i - 1]))
        throw std::invalid_argument("XNormSpec: sample times must increase");
    }
  }
};

struct XNormBreakdown {
  double l2_part = 0.0;
  double mixed_part = 0.0;
  double value() const { return l2_part + mixed_part; }
};

// sup_k t_k^b ||d(t_k)||_{L^2} + sup_k t_k^b ||d||_{L^q([t_k, T_end]; L^r)},
// with the temporal integral truncated at the last sample (tail dropped).
inline XNormBreakdown x_norm_breakdown(const FieldSeries& series,
                                       const XNormSpec& spec) {
  spec.validate();
  series.validate();
  if (!spec.sample_times.empty()) {
    if (spec.sample_times.size() != series.times.size())
      throw std::invalid_argument("x_norm: series/sample knot mismatch");
    for (std::size_t i = 0; i < series.times.size(); ++i)
      if (std::fabs(series.times[i] - spec.sample_times[i]) >
          1e-9 * spec.sample_times[i])
        throw std::invalid_argument("x_norm: series/sample knot mismatch");
  }
  if (series.times.front() < spec.T * (1.0 - 1e-12))
    throw std::invalid_argument("x_norm: series starts before T");

  std::vector<double> l2(series.times.size()), lr(series.times.size());
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    l2[i] = series.fields[i].norm_l2();
    lr[i] = lebesgue_norm(series.fields[i], spec.pair.r);
  }

  XNormBreakdown out;
  for (std::size_t i = 0; i < series.times.size(); ++i)
    out.l2_part = std::max(out.l2_part, std::pow(series.times[i], spec.b) * l2[i]);
  if (series.times.size() >= 2) {
    TimeSeriesNorm tsn(series.times, lr, spec.pair);
    for (std::size_t i = 0; i < series.times.size(); ++i)
      out.mixed_part = std::max(out.mixed_part, std::pow(series.times[i], spec.b) *
                                                    mixed_norm(tsn, series.times[i]));
  }
  return out;
}

inline double x_norm(const FieldSeries& series, const XNormSpec& spec) {
  return x_norm_breakdown(series, spec).value();
}

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1], by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x,
                           std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::fabs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

}  // namespace detail

// Nodes and weights realizing \int_t^{s_max} g(s) ds by Gauss-Legendre in
// log s (the integrands decay polynomially, smooth in log time).
struct QuadratureRule {
  std::vector<double> nodes;    // times in (t, s_max)
  std::vector<double> weights;  // include the log-map Jacobian
};

inline QuadratureRule log_time_rule(double t, double s_max, int count) {
  if (!(t > 0.0) || !(s_max >= t))
    throw std::invalid_argument("log_time_rule: need 0 < t <= s_max");
  if (count < 2 || count > 64)
    throw std::invalid_argument("log_time_rule: node count out of range");
  QuadratureRule rule;
  if (s_max == t) return rule;  // empty integral
  std::vector<double> x, w;
  detail::gauss_legendre(count, x, w);
  const double a = std::log(t), b = std::log(s_max);
  rule.nodes.resize(count);
  rule.weights.resize(count);
  for (int i = 0; i < count; ++i) {
    const double s = std::exp(0.5 * (a + b) + 0.5 * (b - a) * x[i]);
    rule.nodes[i] = s;
    rule.weights[i] = 0.5 * (b - a) * w[i] * s;
  }
  return rule;
}

struct QuadratureSpec {
  int knot_count = 12;   // Gauss-Legendre nodes per integral, 8..16 typical
  double s_max = 0.0;    // truncation time; 0 means the last phase knot
  double fd_step = 1e-3; // relative step of the d/ds difference; must match
                         // the phase table's stored time offsets
  EvolutionConfig evolution;  // settings for each group application

  double effective_s_max(const ProfileContext& ctx) const {
    return s_max > 0.0 ? s_max : ctx.phase().time_knots().back();
  }
};

// Estimate of the tail dropped by truncating \int_t^infty at s_max, from a
// power-law fit through the last two integrand magnitudes.
struct IntegralTail {
  double last_magnitude = 0.0;
  double fitted_slope = 0.0;  // d log ||g|| / d log s
  double tail_estimate = 0.0; // +inf when the fitted decay is too slow
};

namespace detail {

inline IntegralTail tail_from(const std::vector<double>& s,
                              const std::vector<double>& g) {
  IntegralTail tail;
  if (s.size() < 2) return tail;
  const double g1 = g[g.size() - 2], g2 = g.back();
  tail.last_magnitude = g2;
  if (g1 <= 0.0 || g2 <= 0.0) return tail;
  tail.fitted_slope = std::log(g2 / g1) / std::log(s.back() / s[s.size() - 2]);
  const double p = -tail.fitted_slope;
  tail.tail_estimate = p > 1.0 ? g2 * s.back() / (p - 1.0) : inf;
  return tail;
}

inline ComplexField zero_like(const GridSpec& g) {
  return ComplexField(g, Space::position);
}

inline ComplexField hartree_or_zero(const ComplexField& u, bool disabled) {
  if (disabled) return zero_like(u.grid());
  return hartree_nonlinearity(u);
}

// Quadrature sum i * sum_j w_j e^{-i(t - s_j)H} g(s_j) for a caller-supplied
// integrand; the group factors realized by linear_propagate.
template <class Integrand>
ComplexField propagated_quadrature(const GridSpec& grid, double t,
                                   const QuadratureRule& rule,
                                   const EvolutionConfig& cfg,
                                   Integrand&& integrand, IntegralTail* tail) {
  ComplexField acc(grid, Space::position);
  std::vector<double> mags;
  for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
    const double s = rule.nodes[j];
    ComplexField g = integrand(s, j);
    if (tail) mags.push_back(g.norm_l2());
    ComplexField back = linear_propagate(g, s, t, cfg);
    const cplx coeff = cplx{0.0, 1.0} * rule.weights[j];
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += coeff * back[i];
  }
  if (tail) *tail = tail_from(rule.nodes, mags);
  return acc;
}

inline RealField psi_field_from_slice(const GridSpec& g,
                                      const PhaseTable::RadialSlice& s) {
  RealField out(g);
  out.fill([&](double x, double y, double z) {
    return s.eval(std::sqrt(x * x + y * y + z * z)).value;
  });
  return out;
}

inline ComplexField profile_at_slice(const ProfileContext& ctx,
                                     const PhaseTable::RadialSlice& s) {
  return modulate_phase(dilate_to(build_W(ctx, s.t), s.t, ctx.grid()),
                        psi_field_from_slice(ctx.grid(), s));
}

}  // namespace detail

// K[u](t) = i \int_t^{s_max} e^{-i(t-s)H} { F(u(s)) - F(u_p(s)) } ds.
// u_series must be sampled exactly on the log-time quadrature nodes.
inline ComplexField apply_K(const FieldSeries& u_series,
                            const ProfileContext& ctx, double t,
                            const QuadratureSpec& quad,
                            IntegralTail* tail = nullptr) {
  const double s_max = quad.effective_s_max(ctx);
  QuadratureRule rule = log_time_rule(t, s_max, quad.knot_count);
  if (rule.nodes.empty()) return detail::zero_like(ctx.grid());
  u_series.validate();
  if (u_series.times.size() != rule.nodes.size())
    throw std::invalid_argument("apply_K: series does not match the quadrature knots");
  for (std::size_t j = 0; j < rule.nodes.size(); ++j)
    if (std::fabs(u_series.times[j] - rule.nodes[j]) > 1e-9 * rule.nodes[j])
      throw std::invalid_argument("apply_K: series does not match the quadrature knots");
  const bool off = quad.evolution.disable_nonlinearity;
  return detail::propagated_quadrature(
      ctx.grid(), t, rule, quad.evolution,
      [&](double s, std::size_t j) {
        ComplexField g = detail::hartree_or_zero(u_series.fields[j], off);
        ComplexField fp =
            detail::hartree_or_zero(build_profile(ctx, s), off);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= fp[i];
        return g;
      },
      tail);
}

enum class ResidualVariant {
  full,        // profile carries the solved phase
  free_phase,  // ablation: quadratic phase |x|^2/(2t) instead
};

// r(s) = -(i d/ds - H) u_p(s) + F(u_p(s)); the time derivative from the
// 3-point stencil stored in the phase table (or the matching closed-form
// stencil for the free-phase ablation), H realized spectrally plus the
// softened potential.
inline ComplexField error_integrand(const ProfileContext& ctx, double s,
                                    const QuadratureSpec& quad,
                                    ResidualVariant variant = ResidualVariant::full) {
  const GridSpec& g = ctx.grid();
  const double eta = quad.fd_step;
  if (!(eta > 0.0) || !(eta < 0.1))
    throw std::invalid_argument("error_integrand: bad finite-difference step");

  // the three profile samples and their times
  double tm, tc, tp;
  ComplexField um(g), uc(g), up_(g);
  if (variant == ResidualVariant::full) {
    const std::size_t k = ctx.phase().knot_index(s);
    const auto& sm = ctx.phase().slice_before(k);
    const auto& sc = ctx.phase().slice(k);
    const auto& sp = ctx.phase().slice_after(k);
    const double table_eta = std::fabs(1.0 - sp.t / sc.t);
    if (std::fabs(table_eta - eta) > 1e-9 * eta)
      throw std::invalid_argument(
          "error_integrand: fd_step does not match the phase table offsets");
    tm = sm.t;
    tc = sc.t;
    tp = sp.t;
    um = detail::profile_at_slice(ctx, sm);
    uc = detail::profile_at_slice(ctx, sc);
    up_ = detail::profile_at_slice(ctx, sp);
  } else {
    tm = s * (1.0 - eta);
    tc = s;
    tp = s * (1.0 + eta);
    auto free_profile = [&](double t) {
      return modulate_quadratic(dilate_to(build_W(ctx, t), t, g), t);
    };
    um = free_profile(tm);
    uc = free_profile(tc);
    up_ = free_profile(tp);
  }

  // 3-point Lagrange differentiation at tc (centered or one-sided)
  const double wm = (tc - tp) / ((tm - tc) * (tm - tp));
  const double wc = (2.0 * tc - tm - tp) / ((tc - tm) * (tc - tp));
  const double wp = (tc - tm) / ((tp - tm) * (tp - tc));

  // H u_p: spectral kinetic + softened Coulomb multiplication
  ComplexField hat = forward_transform(uc);
  const int n = g.n();
  std::size_t i = 0;
  for (int a = 0; a < n; ++a) {
    const double ka = g.wavenumber(a);
    for (int b = 0; b < n; ++b) {
      const double kb = g.wavenumber(b);
      for (int c = 0; c < n; ++c, ++i) {
        const double kc = g.wavenumber(c);
        hat[i] *= 0.5 * (ka * ka + kb * kb + kc * kc);
      }
    }
  }
  ComplexField hu = inverse_transform(hat);
  const RealField vext =
      detail::coulomb_field(g, quad.evolution.softening_for(g));
  for (std::size_t j = 0; j < hu.size(); ++j) hu[j] += vext[j] * uc[j];

  ComplexField fu =
      detail::hartree_or_zero(uc, quad.evolution.disable_nonlinearity);

  ComplexField r(g, Space::position);
  const cplx mi{0.0, -1.0};
  for (std::size_t j = 0; j < r.size(); ++j) {
    const cplx dds = wm * um[j] + wc * uc[j] + wp * up_[j];
    r[j] = mi * dds + hu[j] + fu[j];
  }
  return r;
}

// E(t) = i \int_t^{s_max} e^{-i(t-s)H} r(s) ds.
inline ComplexField error_term(const ProfileContext& ctx, double t,
                               const QuadratureSpec& quad,
                               IntegralTail* tail = nullptr) {
  const double s_max = quad.effective_s_max(ctx);
  QuadratureRule rule = log_time_rule(t, s_max, quad.knot_count);
  if (rule.nodes.empty()) return detail::zero_like(ctx.grid());
  return detail::propagated_quadrature(
      ctx.grid(), t, rule, quad.evolution,
      [&](double s, std::size_t) { return error_integrand(ctx, s, quad); },
      tail);
}

// Times the phase table must cover for a Picard run: the coarse knots plus
// every quadrature node of every per-knot rule.
inline std::vector<double> picard_time_grid(const XNormSpec& spec,
                                            const QuadratureSpec& quad,
                                            double s_max = 0.0) {
  spec.validate();
  if (spec.sample_times.size() < 2)
    throw std::invalid_argument("picard_time_grid: need at least two knots");
  if (s_max <= 0.0) s_max = spec.sample_times.back();
  std::vector<double> all = spec.sample_times;
  for (double t : spec.sample_times) {
    QuadratureRule rule = log_time_rule(t, s_max, quad.knot_count);
    all.insert(all.end(), rule.nodes.begin(), rule.nodes.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double t : all)
    if (out.empty() || t > out.back() * (1.0 + 1e-12)) out.push_back(t);
  return out;
}

struct FixedPointState {
  int iterate_index = 0;
  FieldSeries deficit_series;           // u^{(n)} - u_p at the coarse knots
  double x_norm_value = 0.0;
  double contraction_ratio = 0.0;       // meaningful for iterate_index >= 2
  std::vector<double> x_norm_history;   // per iterate
  std::vector<double> contraction_history;  // from n = 2 on
};

// Coarse-knot Picard iteration u^{(n+1)} = u_p + K[u^{(n)}] + E, a cross-check
// of the contraction structure (the production path is backward shooting).
// Deficits between coarse knots are interpolated linearly in log time when the
// quadrature needs off-knot samples.
inline FixedPointState picard_iterate(const ProfileContext& ctx,
                                      const XNormSpec& spec, int n_iters,
                                      const QuadratureSpec& quad) {
  spec.validate();
  if (n_iters < 1)
    throw std::invalid_argument("picard_iterate: need n_iters >= 1");
  if (spec.sample_times.size() < 2 || spec.sample_times.size() > 16)
    throw std::invalid_argument(
        "picard_iterate: coarse knot set must have 2..16 knots");
  const std::vector<double>& knots = spec.sample_times;
  const double s_max = quad.effective_s_max(ctx);
  const GridSpec& g = ctx.grid();

  // source term, iterate-independent
  std::vector<ComplexField> source;
  for (double t : knots) source.push_back(error_term(ctx, t, quad));

  auto interp_deficit = [&](const std::vector<ComplexField>& d, double s) {
    if (s <= knots.front()) return d.front();
    if (s >= knots.back()) return d.back();
    std::size_t k = 0;
    while (k + 1 < knots.size() && knots[k + 1] < s) ++k;
    const double w =
        std::log(s / knots[k]) / std::log(knots[k + 1] / knots[k]);
    ComplexField out(g, Space::position);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = (1.0 - w) * d[k][i] + w * d[k + 1][i];
    return out;
  };

  auto series_x_norm = [&](const std::vector<ComplexField>& d) {
    FieldSeries s{knots, d};
    return x_norm(s, spec);
  };

  const bool off = quad.evolution.disable_nonlinearity;
  std::vector<ComplexField> d_prev(knots.size(), detail::zero_like(g));
  std::vector<ComplexField> d_prev2;
  FixedPointState state;

  for (int n = 1; n <= n_iters; ++n) {
    std::vector<ComplexField> d_next;
    for (std::size_t k = 0; k < knots.size(); ++k) {
      const double t = knots[k];
      QuadratureRule rule = log_time_rule(t, s_max, quad.knot_count);
      ComplexField kpart =
          rule.nodes.empty()
              ? detail::zero_like(g)
              : detail::propagated_quadrature(
                    g, t, rule, quad.evolution,
                    [&](double s, std::size_t) {
                      ComplexField upf = build_profile(ctx, s);
                      ComplexField u = interp_deficit(d_prev, s);
                      for (std::size_t i = 0; i < u.size(); ++i)
                        u[i] += upf[i];
                      ComplexField fu = detail::hartree_or_zero(u, off);
                      ComplexField fp = detail::hartree_or_zero(upf, off);
                      for (std::size_t i = 0; i < fu.size(); ++i)
                        fu[i] -= fp[i];
                      return fu;
                    },
                    nullptr);
      for (std::size_t i = 0; i < kpart.size(); ++i)
        kpart[i] += source[k][i];
      d_next.push_back(std::move(kpart));
    }

    const double xn = series_x_norm(d_next);
    if (!state.x_norm_history.empty() && state.x_norm_history.back() > 0.0 &&
        xn > 10.0 * state.x_norm_history.back())
      throw std::runtime_error(
          "picard_iterate: X-norm grew by more than 10x in one iterate "
          "(datum too large or T too small)");
    state.x_norm_history.push_back(xn);

    if (n >= 2) {
      std::vector<ComplexField> diff_new(knots.size(), detail::zero_like(g)),
          diff_old(knots.size(), detail::zero_like(g));
      for (std::size_t k = 0; k < knots.size(); ++k)
        for (std::size_t i = 0; i < g.size(); ++i) {
          diff_new[k][i] = d_next[k][i] - d_prev[k][i];
          diff_old[k][i] = d_prev[k][i] - d_prev2[k][i];
        }
      const double num = series_x_norm(diff_new);
      const double den = series_x_norm(diff_old);
      state.contraction_ratio = den > 0.0 ? num / den : 0.0;
      state.contraction_history.push_back(state.contraction_ratio);
    }

    d_prev2 = std::move(d_prev);
    d_prev = std::move(d_next);
    state.iterate_index = n;
  }

  state.deficit_series = FieldSeries{knots, d_prev};
  state.x_norm_value = state.x_norm_history.back();
  return state;
}

struct WaveOperatorResult {
  ComplexField u_out;
  std::vector<double> deficit_times;   // phase knots visited by the sweep
  std::vector<double> deficits;        // ||u(t_k) - u_p(t_k)||_{L^2}
  Trajectory trajectory;
};

// Backward shooting: impose u(T_end) = u_p(T_end), integrate the full flow
// down to t_out, and record the deficit against the profile at every phase
// knot passed on the way.
inline WaveOperatorResult modified_wave_operator(
    const ProfileContext& ctx, double T_end, double t_out,
    const EvolutionConfig& cfg, ProfileVariant variant = ProfileVariant::full) {
  if (!(t_out >= 1.0) || !(t_out < T_end))
    throw std::invalid_argument("modified_wave_operator: need 1 <= t_out < T_end");
  EvolutionConfig run = cfg;
  run.record_times.clear();
  for (double t : ctx.phase().time_knots())
    if (t > t_out && t < T_end) run.record_times.push_back(t);
  std::sort(run.record_times.begin(), run.record_times.end());

  ComplexField uT = build_profile(ctx, T_end, variant);
  WaveOperatorResult res{ComplexField(ctx.grid(), Space::position), {}, {},
                         backward_propagate(uT, T_end, t_out, run)};
  res.u_out = res.trajectory.final_state();

  for (std::size_t i = 0; i < res.trajectory.times.size(); ++i) {
    const double t = res.trajectory.times[i];
    bool is_knot = false;
    for (double k : ctx.phase().time_knots())
      if (std::fabs(k - t) <= 1e-9 * std::max(1.0, t)) is_knot = true;
    if (!is_knot) continue;
    ComplexField d = res.trajectory.states[i];
    ComplexField ref = build_profile(ctx, t, variant);
    for (std::size_t j = 0; j < d.size(); ++j) d[j] -= ref[j];
    res.deficit_times.push_back(t);
    res.deficits.push_back(d.norm_l2());
  }
  return res;
}

// Residual of the finite-interval Duhamel identity
//   u(t) = e^{-i(t-t0)H} u(t0) - i \int_{t0}^t e^{-i(t-s)H} F(u(s)) ds,
// with u supplied at the log-time quadrature nodes of [t0, t].  Relative to
// ||u(t)||; 0/0 guarded.
inline double duhamel_residual(const ComplexField& u0, double t0,
                               const FieldSeries& node_states,
                               const ComplexField& ut, double t,
                               const QuadratureSpec& quad) {
  if (!(t > t0)) throw std::invalid_argument("duhamel_residual: need t > t0");
  QuadratureRule rule = log_time_rule(t0, t, quad.knot_count);
  node_states.validate();
  if (node_states.times.size() != rule.nodes.size())
    throw std::invalid_argument("duhamel_residual: node mismatch");
  for (std::size_t j = 0; j < rule.nodes.size(); ++j)
    if (std::fabs(node_states.times[j] - rule.nodes[j]) > 1e-9 * rule.nodes[j])
      throw std::invalid_argument("duhamel_residual: node mismatch");

  ComplexField rhs = linear_propagate(u0, t0, t, quad.evolution);
  const bool off = quad.evolution.disable_nonlinearity;
  ComplexField integral = detail::propagated_quadrature(
      u0.grid(), t, rule, quad.evolution,
      [&](double, std::size_t j) {
        return detail::hartree_or_zero(node_states.fields[j], off);
      },
      nullptr);
  // Duhamel carries -i; propagated_quadrature already applied +i.
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= integral[i];

  ComplexField diff = ut;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= rhs[i];
  const double den = ut.norm_l2();
  return den == 0.0 ? diff.norm_l2() : diff.norm_l2() / den;
}

}  // namespace hartree
