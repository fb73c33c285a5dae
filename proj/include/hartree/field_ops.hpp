#pragma once

// Dilation D(t), quadratic modulation M(t), phase modulation M_Psi(t), and
// the norm library (Lebesgue, Sobolev, mixed space-time).

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hartree/grid.hpp"

namespace hartree {

inline constexpr double inf = std::numeric_limits<double>::infinity();

namespace detail {

using CMatrix =
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const CMatrix>;

// Contract one tensor axis of a row-major (n0,n1,n2) array with E (n_out x n_axis).
inline std::vector<cplx> contract_axis(const std::vector<cplx>& in, int n0,
                                       int n1, int n2, int axis,
                                       const CMatrix& E) {
  const int n_out = static_cast<int>(E.rows());
  if (axis == 0) {
    CMap a(in.data(), n0, static_cast<std::size_t>(n1) * n2);
    std::vector<cplx> out(static_cast<std::size_t>(n_out) * n1 * n2);
    Eigen::Map<CMatrix> o(out.data(), n_out, static_cast<std::size_t>(n1) * n2);
    o.noalias() = E * a;
    return out;
  }
  if (axis == 1) {
    std::vector<cplx> out(static_cast<std::size_t>(n0) * n_out * n2);
    for (int s = 0; s < n0; ++s) {
      CMap a(in.data() + static_cast<std::size_t>(s) * n1 * n2, n1, n2);
      Eigen::Map<CMatrix> o(out.data() + static_cast<std::size_t>(s) * n_out * n2,
                            n_out, n2);
      o.noalias() = E * a;
    }
    return out;
  }
  // axis == 2
  CMap a(in.data(), static_cast<std::size_t>(n0) * n1, n2);
  std::vector<cplx> out(static_cast<std::size_t>(n0) * n1 * n_out);
  Eigen::Map<CMatrix> o(out.data(), static_cast<std::size_t>(n0) * n1, n_out);
  o.noalias() = a * E.transpose();
  return out;
}

}  // namespace detail

// Evaluate the trigonometric interpolant of f at the points x/t of the target
// grid, i.e. return g with g(x) = f(x/t).  Points whose preimage x/t falls
// outside the source box are set to zero (the periodic extension there is a
// wrap image, not the represented function).
inline ComplexField scale_sample_to(const ComplexField& f, double t,
                                    const GridSpec& target) {
  if (t <= 0.0) throw std::domain_error("scale_sample_to: t must be positive");
  ComplexField hat = f.space() == Space::position ? forward_transform(f) : f;
  const GridSpec& src = f.grid();
  const int ns = src.n();
  const int nt = target.n();

  detail::CMatrix E(nt, ns);
  for (int a = 0; a < nt; ++a) {
    const double y = target.coord(a) / t;
    for (int m = 0; m < ns; ++m) {
      const double xi = src.wavenumber(m);
      E(a, m) = std::polar(1.0, y * xi);
    }
  }

  std::vector<cplx> work =
      detail::contract_axis(hat.values(), ns, ns, ns, 0, E);
  work = detail::contract_axis(work, nt, ns, ns, 1, E);
  work = detail::contract_axis(work, nt, nt, ns, 2, E);

  const double d = src.freq_spacing();
  const double scale = std::pow(d / std::sqrt(2.0 * pi), 3);

  ComplexField out(target, Space::position);
  const double lim = src.half_width();
  std::size_t i = 0;
  for (int a = 0; a < nt; ++a) {
    const double ya = std::fabs(target.coord(a) / t);
    for (int b = 0; b < nt; ++b) {
      const double yb = std::fabs(target.coord(b) / t);
      for (int c = 0; c < nt; ++c, ++i) {
        const double yc = std::fabs(target.coord(c) / t);
        out[i] = (ya >= lim || yb >= lim || yc >= lim) ? cplx{0.0, 0.0}
                                                       : scale * work[i];
      }
    }
  }
  return out;
}

// [D(t)f](x) = (it)^{-3/2} f(x/t), principal branch: (it)^{-3/2} =
// t^{-3/2} e^{-3 pi i/4} for t > 0.
inline ComplexField dilate_to(const ComplexField& f, double t,
                              const GridSpec& target) {
  if (t <= 0.0) throw std::domain_error("dilate: t must be positive");
  ComplexField out = scale_sample_to(f, t, target);
  const cplx amp = std::pow(t, -1.5) * std::polar(1.0, -0.75 * pi);
  for (cplx& z : out.values()) z *= amp;
  return out;
}

inline ComplexField dilate(const ComplexField& f, double t) {
  return dilate_to(f, t, f.grid());
}

// [M(t)f](x) = e^{i|x|^2/2t} f(x)
inline ComplexField modulate_quadratic(const ComplexField& f, double t) {
  if (t == 0.0) throw std::domain_error("modulate_quadratic: t must be nonzero");
  if (f.space() != Space::position)
    throw std::invalid_argument("modulate_quadratic: position-space field required");
  const GridSpec& g = f.grid();
  const int n = g.n();
  ComplexField out(g, Space::position);
  std::size_t i = 0;
  for (int a = 0; a < n; ++a) {
    const double xa = g.coord(a);
    for (int b = 0; b < n; ++b) {
      const double xb = g.coord(b);
      for (int c = 0; c < n; ++c, ++i) {
        const double xc = g.coord(c);
        const double r2 = xa * xa + xb * xb + xc * xc;
        out[i] = f[i] * std::polar(1.0, r2 / (2.0 * t));
      }
    }
  }
  return out;
}

// [M_Psi(t)f](x) = e^{i Psi(x)} f(x)
inline ComplexField modulate_phase(const ComplexField& f, const RealField& psi) {
  if (f.grid() != psi.grid())
    throw std::invalid_argument("modulate_phase: grid mismatch");
  if (f.space() != Space::position)
    throw std::invalid_argument("modulate_phase: position-space field required");
  ComplexField out(f.grid(), Space::position);
  for (std::size_t i = 0; i < f.size(); ++i)
    out[i] = f[i] * std::polar(1.0, psi[i]);
  return out;
}

// Riemann-sum L^r norm (max sample for r = infinity).
inline double lebesgue_norm(const ComplexField& f, double r) {
  if (r < 1.0) throw std::domain_error("lebesgue_norm: r must be >= 1");
  if (r == inf) {
    double m = 0.0;
    for (const cplx& z : f.values()) m = std::max(m, std::abs(z));
    return m;
  }
  std::vector<double> p(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) p[i] = std::pow(std::abs(f[i]), r);
  return std::pow(f.cell_measure() * pairwise_sum(p), 1.0 / r);
}

// Spectral H^s norm, || <xi>^s fhat ||_{L^2}.
inline double sobolev_norm(const ComplexField& f, double s) {
  if (s < 0.0) throw std::domain_error("sobolev_norm: s must be >= 0");
  ComplexField hat = f.space() == Space::frequency ? f : forward_transform(f);
  const GridSpec& g = f.grid();
  const int n = g.n();
  std::vector<double> p(f.size());
  std::size_t i = 0;
  for (int a = 0; a < n; ++a) {
    const double ka = g.wavenumber(a);
    for (int b = 0; b < n; ++b) {
      const double kb = g.wavenumber(b);
      for (int c = 0; c < n; ++c, ++i) {
        const double k2 = ka * ka + kb * kb + g.wavenumber(c) * g.wavenumber(c);
        p[i] = std::pow(1.0 + k2, s) * std::norm(hat[i]);
      }
    }
  }
  return std::sqrt(g.freq_cell_volume() * pairwise_sum(p));
}

struct AdmissiblePair {
  double q;
  double r;

  AdmissiblePair(double q_, double r_) : q(q_), r(r_) {
    if (!(q >= 2.0) || !(r >= 2.0))
      throw std::invalid_argument("AdmissiblePair: need 2 <= q, r <= inf");
    const double lhs = (q == inf ? 0.0 : 2.0 / q) + (r == inf ? 0.0 : 3.0 / r);
    if (std::fabs(lhs - 1.5) > 1e-12)
      throw std::invalid_argument("AdmissiblePair: 2/q + 3/r = 3/2 violated");
  }
};

// Per-time L^r norms of some field family, ready for temporal quadrature.
struct TimeSeriesNorm {
  std::vector<double> times;
  std::vector<double> values;
  AdmissiblePair pair;

  TimeSeriesNorm(std::vector<double> t, std::vector<double> v, AdmissiblePair p)
      : times(std::move(t)), values(std::move(v)), pair(p) {
    if (times.size() != values.size() || times.empty())
      throw std::invalid_argument("TimeSeriesNorm: size mismatch");
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
      if (times[i + 1] <= times[i])
        throw std::invalid_argument("TimeSeriesNorm: times must be increasing");
    for (double v_ : values)
      if (v_ < 0.0)
        throw std::invalid_argument("TimeSeriesNorm: negative norm value");
  }
};

// Temporal L^q quadrature of the per-time values over [t_start, last sample].
// The tail beyond the last sample is treated as zero (truncated norm).
inline double mixed_norm(const TimeSeriesNorm& series, double t_start) {
  const auto& ts = series.times;
  const auto& vs = series.values;
  if (t_start > ts.back())
    throw std::domain_error("mixed_norm: empty restriction [t_start, t_end]");
  const double q = series.pair.q;

  // value at t_start by linear interpolation if it falls between knots
  std::size_t k0 = 0;
  while (k0 + 1 < ts.size() && ts[k0 + 1] <= t_start) ++k0;
  double v0 = vs[k0];
  double t0 = ts[k0];
  if (t_start > ts[k0]) {
    const double w = (t_start - ts[k0]) / (ts[k0 + 1] - ts[k0]);
    v0 = (1.0 - w) * vs[k0] + w * vs[k0 + 1];
    t0 = t_start;
  }

  if (q == inf) {
    double m = v0;
    for (std::size_t k = k0 + 1; k < ts.size(); ++k) m = std::max(m, vs[k]);
    return m;
  }

  double integral = 0.0;
  double prev_t = t0, prev_p = std::pow(v0, q);
  for (std::size_t k = k0 + 1; k < ts.size(); ++k) {
    const double p = std::pow(vs[k], q);
    integral += 0.5 * (prev_p + p) * (ts[k] - prev_t);
    prev_t = ts[k];
    prev_p = p;
  }
  return std::pow(integral, 1.0 / q);
}

}  // namespace hartree
