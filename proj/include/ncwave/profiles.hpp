#pragma once

// Smooth compactly supported profiles: the standard bump exp(-1/(1-s^2)),
// product bumps on the lattice, and smooth step / plateau cutoffs built from
// the normalized bump integral.

#include <array>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ncwave/lattice.hpp"

namespace ncwave {

inline double bump1d(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - s * s));
}

namespace detail {
inline double bump_integral(double a, double b) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(bump1d, a, b, 8, 1e-15);
}
}  // namespace detail

/// Normalized integral of the bump: 0 for s <= 0, 1 for s >= 1, C-infinity.
inline double smooth_step(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    static const double total = detail::bump_integral(-1.0, 1.0);
    return detail::bump_integral(-1.0, 2.0 * s - 1.0) / total;
}

/// 1 on |y - center| <= inner, 0 beyond outer, smooth in between.
inline double plateau(double y, double center, double inner, double outer) {
    const double d = std::abs(y - center);
    if (d <= inner) return 1.0;
    if (d >= outer) return 0.0;
    return 1.0 - smooth_step((d - inner) / (outer - inner));
}

/// psi((t-t_c)/r_t) * psi((x-x_c)/r_x) times a per-component amplitude.
struct BumpProfile {
    double t_c = 0.0;
    double x_c = 0.0;
    double r_t = 1.0;
    double r_x = 1.0;
    std::vector<cplx> amplitude{cplx{1.0, 0.0}};

    double shape(double t, double x) const { return bump1d((t - t_c) / r_t) * bump1d((x - x_c) / r_x); }

    cplx value(double t, double x, int component) const {
        const double s = shape(t, x);
        if (s == 0.0) return {0.0, 0.0};
        const auto idx = static_cast<std::size_t>(component);
        return idx < amplitude.size() ? s * amplitude[idx] : cplx{0.0, 0.0};
    }

    GridFunction sample(const SpacetimeGrid& g) const {
        if (!(r_t > 0.0) || !(r_x > 0.0)) throw PreconditionError("bump radii must be positive");
        return GridFunction::sample(g, [&](double t, double x, int a) { return value(t, x, a); });
    }
};

/// Smooth box cutoff chi(t, x) = plateau_t * plateau_x, identically 1 on the
/// inner rectangle and 0 outside the outer one.
struct SmoothBox {
    double t_c = 0.0, x_c = 0.0;
    double inner_t = 0.5, outer_t = 1.0;
    double inner_x = 0.5, outer_x = 1.0;

    double operator()(double t, double x) const {
        return plateau(t, t_c, inner_t, outer_t) * plateau(x, x_c, inner_x, outer_x);
    }
    IndexBox support_box(const SpacetimeGrid& g) const {
        return box_from_coordinates(g, t_c - outer_t, t_c + outer_t, x_c - outer_x, x_c + outer_x);
    }
};

/// Time cutoff rising from 0 (t <= t_lo) to 1 (t >= t_hi), sampled per time row.
inline std::vector<double> time_step_profile(const SpacetimeGrid& g, double t_lo, double t_hi) {
    std::vector<double> chi(g.n_time);
    for (int j = 0; j < g.n_time; ++j) chi[j] = smooth_step((g.t(j) - t_lo) / (t_hi - t_lo));
    return chi;
}

}  // namespace ncwave
