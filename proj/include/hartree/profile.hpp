#pragma once

// Modified amplitude W, asymptotic profile u_p, the Hartree nonlinearity F,
// and the low/high-velocity decomposition U1/U2/U3.
//
// The scattering datum uhat_plus is a function of the frequency variable, but
// it is stored as position-space samples on its own (small) grid: the profile
// construction only ever evaluates it at rescaled points x/t, so the datum
// grid plays the role of the profile's rescaled coordinate.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

#include "hartree/field_ops.hpp"
#include "hartree/grid.hpp"
#include "hartree/hamilton_jacobi.hpp"

namespace hartree {

// F(u) = ((-Delta)^{-1}|u|^2) u, with the free-space inverse Laplacian.
inline ComplexField hartree_nonlinearity(const ComplexField& u) {
  if (u.space() != Space::position)
    throw std::invalid_argument(
        "hartree_nonlinearity: position-space field required");
  RealField rho(u.grid());
  for (std::size_t i = 0; i < u.size(); ++i) rho[i] = std::norm(u[i]);
  RealField v = inverse_laplacian(rho);
  ComplexField out(u.grid(), Space::position);
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = v[i] * u[i];
  return out;
}

struct ScatteringDatum {
  ComplexField uhat_plus;  // frequency-variable samples on the datum grid
  double c0 = 0.0;         // inner support radius
  RealField v_plus;        // cached (-Delta)^{-1}|uhat_plus|^2
  double h1_norm = 0.0;
  double l2_norm = 0.0;
  double potential_sup = 0.0;
};

// Validates the support and smallness hypotheses and caches the static
// potential.  allow_origin_support skips the inner-support check (exploratory
// runs outside the admissible data class; results carry no guarantees).
inline ScatteringDatum make_datum(ComplexField uhat, double c0,
                                  double eps0 = 0.1,
                                  bool allow_origin_support = false) {
  if (uhat.space() != Space::position)
    throw std::invalid_argument("make_datum: position-space samples required");
  if (!(c0 > 0.0) && !allow_origin_support)
    throw std::invalid_argument("make_datum: c0 must be positive");
  if (!uhat.all_finite())
    throw std::invalid_argument("make_datum: non-finite samples");
  const GridSpec& g = uhat.grid();
  if (!allow_origin_support) {
    const int n = g.n();
    std::size_t i = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c, ++i) {
          const double x = g.coord(a), y = g.coord(b), z = g.coord(c);
          if (x * x + y * y + z * z < c0 * c0 && uhat[i] != cplx{0.0, 0.0})
            throw std::invalid_argument(
                "make_datum: samples must vanish inside |x| < c0");
        }
  }
  RealField rho(g);
  for (std::size_t i = 0; i < uhat.size(); ++i) rho[i] = std::norm(uhat[i]);
  ScatteringDatum d{std::move(uhat), c0, inverse_laplacian(rho), 0.0, 0.0, 0.0};
  for (double v : d.v_plus.values())
    d.potential_sup = std::max(d.potential_sup, std::fabs(v));
  if (!(d.potential_sup <= eps0))
    throw std::invalid_argument(
        "make_datum: potential sup exceeds the smallness threshold");
  d.h1_norm = sobolev_norm(d.uhat_plus, 1.0);
  d.l2_norm = d.uhat_plus.norm_l2();
  if (!std::isfinite(d.h1_norm))
    throw std::invalid_argument("make_datum: H^1 norm not finite");
  return d;
}

// Annulus datum A exp(-(|x|-rho0)^2/sigma^2), hard-truncated to zero below c0.
inline ScatteringDatum make_annulus_datum(const GridSpec& grid,
                                          double amplitude, double rho0,
                                          double sigma, double c0,
                                          double eps0 = 0.1) {
  if (!(sigma > 0.0) || !(rho0 > 0.0))
    throw std::invalid_argument("make_annulus_datum: need rho0, sigma > 0");
  ComplexField f(grid, Space::position);
  f.fill([&](double x, double y, double z) {
    // same truncation predicate (expression and operand order) as the
    // support check in make_datum, so boundary lattice points agree
    if (x * x + y * y + z * z < c0 * c0) return cplx{0.0, 0.0};
    const double r = std::sqrt(x * x + y * y + z * z);
    const double d = (r - rho0) / sigma;
    return cplx{amplitude * std::exp(-d * d), 0.0};
  });
  return make_datum(std::move(f), c0, eps0);
}

// Same annulus, with the amplitude solved for so that the measured potential
// sup equals target_sup (the potential scales as amplitude^2).
inline ScatteringDatum make_annulus_datum_with_potential(const GridSpec& grid,
                                                         double target_sup,
                                                         double rho0,
                                                         double sigma,
                                                         double c0) {
  if (!(target_sup > 0.0))
    throw std::invalid_argument(
        "make_annulus_datum_with_potential: target_sup must be positive");
  ScatteringDatum probe = make_annulus_datum(grid, 1.0, rho0, sigma, c0, inf);
  if (!(probe.potential_sup > 0.0))
    throw std::invalid_argument(
        "make_annulus_datum_with_potential: datum is identically zero");
  const double amp = std::sqrt(target_sup / probe.potential_sup);
  return make_annulus_datum(grid, amp, rho0, sigma, c0,
                            target_sup * (1.0 + 1e-9));
}

class ProfileContext {
 public:
  ProfileContext(ScatteringDatum datum, std::shared_ptr<const PhaseTable> phase,
                 double b)
      : datum_(std::move(datum)),
        phase_(std::move(phase)),
        b_(b),
        cut_(build_chi(datum_.c0 > 0.0 ? datum_.c0 : 1.0)) {
    if (!phase_) throw std::invalid_argument("ProfileContext: null phase table");
    if (!(b_ > 0.25 && b_ < 0.5))
      throw std::invalid_argument("ProfileContext: b must lie in (1/4, 1/2)");
  }

  const ScatteringDatum& datum() const { return datum_; }
  const PhaseTable& phase() const { return *phase_; }
  std::shared_ptr<const PhaseTable> phase_ptr() const { return phase_; }
  double b() const { return b_; }
  double T1() const { return phase_->T1(); }
  const GridSpec& grid() const { return phase_->grid(); }
  const CutoffSpec& cutoff() const { return cut_; }

 private:
  ScatteringDatum datum_;
  std::shared_ptr<const PhaseTable> phase_;
  double b_;
  CutoffSpec cut_;
};

// W(t) = e^{-i V_+ log t} uhat_plus on the datum grid.
inline ComplexField build_W(const ProfileContext& ctx, double t) {
  if (!(t >= 1.0)) throw std::domain_error("build_W: t must be >= 1");
  const ScatteringDatum& d = ctx.datum();
  ComplexField w(d.uhat_plus.grid(), Space::position);
  const double lt = std::log(t);
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = d.uhat_plus[i] * std::polar(1.0, -d.v_plus[i] * lt);
  return w;
}

enum class ProfileVariant {
  full,          // M_Psi(t) D(t) W(t)
  no_log_phase,  // drop the e^{-i V_+ log t} factor: M_Psi(t) D(t) uhat_plus
  free_phase,    // replace Psi by |x|^2/(2t): M(t) D(t) W(t)
  free_exact,    // M(t) D(t) F M(t) F^{-1} uhat_plus: an exact solution of
                 // the free flow (datum F^{-1} uhat_plus), no log correction
};

namespace detail {
inline ComplexField conjugate_quadratic(const ComplexField& f, double t,
                                        bool one_minus);
}

// u_p(t) = M_Psi(t) D(t) W(t), evaluated on the phase table's grid at one of
// its time knots.
inline ComplexField build_profile(const ProfileContext& ctx, double t,
                                  ProfileVariant variant = ProfileVariant::full) {
  if (variant == ProfileVariant::free_exact) {
    if (!(t >= 1.0)) throw std::domain_error("build_profile: t must be >= 1");
    ComplexField q =
        detail::conjugate_quadratic(ctx.datum().uhat_plus, t, false);
    return modulate_quadratic(dilate_to(q, t, ctx.grid()), t);
  }
  const std::size_t k = ctx.phase().knot_index(t);
  ComplexField w = variant == ProfileVariant::no_log_phase
                       ? ctx.datum().uhat_plus
                       : build_W(ctx, t);
  ComplexField d = dilate_to(w, t, ctx.grid());
  if (variant == ProfileVariant::free_phase) return modulate_quadratic(d, t);
  return modulate_phase(d, ctx.phase().psi_field(k));
}

// t-independent companion for the direct profile evaluation: the static
// potential solved on a doubled copy of the datum box.  Interpolating the
// datum-grid v_plus directly is inaccurate -- the slow 1/|x| far field wraps
// around the small box -- while on the doubled box both the truncated-kernel
// reach and the box periodization clear the data support.  n_wide = 0 doubles
// the sample count; a smaller explicit n_wide trades bandwidth for memory.
inline RealField wide_potential(const ScatteringDatum& d, int n_wide = 0) {
  const GridSpec& g = d.uhat_plus.grid();
  if (n_wide == 0) n_wide = 2 * g.n();
  const GridSpec big(n_wide, 2.0 * g.half_width());
  ComplexField emb = scale_sample_to(d.uhat_plus, 1.0, big);
  RealField rho(big);
  for (std::size_t i = 0; i < emb.size(); ++i) rho[i] = std::norm(emb[i]);
  return inverse_laplacian(rho);
}

// Direct evaluation u_p(t,x) = (it)^{-3/2} e^{i(Psi(t,x) - V_+(x/t) log t)}
// uhat_plus(x/t), with V_+ interpolated from a wide_potential field.
inline ComplexField build_profile_direct(const ProfileContext& ctx, double t,
                                         const RealField& v_wide) {
  const std::size_t k = ctx.phase().knot_index(t);
  const GridSpec& g = ctx.grid();
  ComplexField us = scale_sample_to(ctx.datum().uhat_plus, t, g);
  ComplexField vw(v_wide.grid(), Space::position);
  for (std::size_t i = 0; i < vw.size(); ++i) vw[i] = cplx{v_wide[i], 0.0};
  ComplexField vs = scale_sample_to(vw, t, g);
  RealField psi = ctx.phase().psi_field(k);
  const double lt = std::log(t);
  const cplx amp = std::pow(t, -1.5) * std::polar(1.0, -0.75 * pi);
  ComplexField out(g, Space::position);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = amp * us[i] * std::polar(1.0, psi[i] - vs[i].real() * lt);
  return out;
}

inline ComplexField build_profile_direct(const ProfileContext& ctx, double t) {
  return build_profile_direct(ctx, t, wide_potential(ctx.datum()));
}

// Relative L^2 residual of F(u_p)(t) = M_Psi(t) D(t) [t^{-1} F(W(t))].
inline double profile_nonlinearity_identity(const ProfileContext& ctx,
                                            double t) {
  const std::size_t k = ctx.phase().knot_index(t);
  ComplexField up = build_profile(ctx, t);
  ComplexField lhs = hartree_nonlinearity(up);

  ComplexField w = build_W(ctx, t);
  ComplexField fw(w.grid(), Space::position);
  const double inv_t = 1.0 / t;
  for (std::size_t i = 0; i < w.size(); ++i)
    fw[i] = inv_t * ctx.datum().v_plus[i] * w[i];
  ComplexField rhs =
      modulate_phase(dilate_to(fw, t, ctx.grid()), ctx.phase().psi_field(k));

  std::vector<double> diff(lhs.size()), ref(lhs.size());
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    diff[i] = std::norm(lhs[i] - rhs[i]);
    ref[i] = std::norm(rhs[i]);
  }
  const double den = pairwise_sum(ref);
  if (den == 0.0) return 0.0;
  return std::sqrt(pairwise_sum(diff) / den);
}

namespace detail {

// F {M(t) or 1 - M(t)} F^{-1} applied to a frequency-variable field f: round
// trip through the conjugate variable with the quadratic chirp in between.
// The conjugate samples live at the grid's wavenumber nodes, so the chirp is
// evaluated there (the chirp is even, so the transform direction does not
// matter).  Faithful to the continuum operator as long as the chirp stays
// resolved on the conjugate lattice where the transform of f has mass:
// |x| pi / (t L) below ~2 per sample at the relevant |x|.
inline ComplexField conjugate_quadratic(const ComplexField& f, double t,
                                        bool one_minus) {
  if (t == 0.0)
    throw std::domain_error("conjugate_quadratic: t must be nonzero");
  if (f.space() != Space::position)
    throw std::invalid_argument(
        "conjugate_quadratic: position-space field required");
  ComplexField hat = forward_transform(f);
  const GridSpec& g = f.grid();
  const int n = g.n();
  std::size_t i = 0;
  for (int a = 0; a < n; ++a) {
    const double ka = g.wavenumber(a);
    for (int b = 0; b < n; ++b) {
      const double kb = g.wavenumber(b);
      for (int c = 0; c < n; ++c, ++i) {
        const double kc = g.wavenumber(c);
        const cplx s =
            std::polar(1.0, (ka * ka + kb * kb + kc * kc) / (2.0 * t));
        hat[i] *= one_minus ? cplx{1.0, 0.0} - s : s;
      }
    }
  }
  return inverse_transform(hat);
}

}  // namespace detail

// U_1(t) = M_Psi D F (1 - M) F^{-1}
// U_2(t) = chi(x/t) M_Psi D F M F^{-1}
// U_3(t) = (1 - chi(x/t)) M_Psi D F M F^{-1}
// f lives on the datum grid; the result lives on the phase grid.
inline ComplexField decompose_U(const ProfileContext& ctx, double t, int j,
                                const ComplexField& f) {
  if (j < 1 || j > 3) throw std::domain_error("decompose_U: j must be 1, 2, 3");
  if (j != 1 && !(t >= 2.0 * ctx.T1()))
    throw std::domain_error(
        "decompose_U: cutoff components need t >= 2 T1");
  const std::size_t k = ctx.phase().knot_index(t);
  ComplexField q = detail::conjugate_quadratic(f, t, j == 1);
  ComplexField out =
      modulate_phase(dilate_to(q, t, ctx.grid()), ctx.phase().psi_field(k));
  if (j == 1) return out;
  const GridSpec& g = ctx.grid();
  const int n = g.n();
  std::size_t i = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c, ++i) {
        const double x = g.coord(a), y = g.coord(b), z = g.coord(c);
        const double chi = ctx.cutoff().chi(std::sqrt(x * x + y * y + z * z) / t);
        out[i] *= j == 2 ? chi : 1.0 - chi;
      }
  return out;
}

}  // namespace hartree
