#pragma once

// Finite-difference realizations of
//   normally hyperbolic  D = d0^2 - d1^2 + U^0 d0 + U^1 d1 + V
//   Dirac pair           D = -i gamma^mu d_mu + m,  D' = i gamma^mu d_mu + m
// on a SpacetimeGrid. Derivatives are second-order centered; rows and
// columns too close to the rim use one-sided second-order stencils and are
// not covered by any identity (see interior_margin).

#include <variant>

#include <Eigen/Dense>

#include "ncwave/lattice.hpp"
#include "ncwave/profiles.hpp"

namespace ncwave {

/// N x N complex matrix per grid point. An empty field means identically zero.
class CoefficientField {
public:
    CoefficientField() = default;

    static CoefficientField zero(const SpacetimeGrid& g, int n) {
        CoefficientField c;
        c.points_ = g.points();
        c.n_ = n;
        return c;
    }

    static CoefficientField constant(const SpacetimeGrid& g, const Eigen::MatrixXcd& m) {
        return from_function(g, [&](double, double) { return m; });
    }

    // fn(t, x) -> N x N matrix.
    template <typename Fn>
    static CoefficientField from_function(const SpacetimeGrid& g, Fn&& fn) {
        CoefficientField c;
        c.points_ = g.points();
        bool any = false;
        for (int j = 0; j < g.n_time; ++j) {
            for (int k = 0; k < g.n_space; ++k) {
                const Eigen::MatrixXcd m = fn(g.t(j), g.x(k));
                if (c.data_.empty()) {
                    if (m.rows() != m.cols()) throw GridError("coefficient must be square");
                    c.n_ = static_cast<int>(m.rows());
                    c.data_.assign(c.points_ * c.n_ * c.n_, cplx{0.0, 0.0});
                }
                if (m.rows() != c.n_ || m.cols() != c.n_) throw GridError("coefficient size varies");
                if (!m.allFinite()) throw GridError("coefficient sample not finite");
                auto* dst = c.data_.data() + g.point_index(j, k) * c.n_ * c.n_;
                for (int q = 0; q < c.n_ * c.n_; ++q) dst[q] = m.data()[q];
                any = any || !m.isZero(0.0);
            }
        }
        if (!any) c.data_.clear();
        return c;
    }

    // sum_i bump_i(t, x) * amplitude_i
    static CoefficientField from_bumps(const SpacetimeGrid& g, int n,
                                       const std::vector<std::pair<BumpProfile, Eigen::MatrixXcd>>& bumps,
                                       const Eigen::MatrixXcd& constant_part) {
        return from_function(g, [&](double t, double x) {
            Eigen::MatrixXcd m = constant_part.size() ? constant_part : Eigen::MatrixXcd::Zero(n, n);
            for (const auto& [shape, amp] : bumps) m += shape.shape(t, x) * amp;
            return m;
        });
    }

    bool is_zero() const { return data_.empty(); }
    int n() const { return n_; }

    // out += M(point) * in
    void multiply_add(std::size_t point, std::span<const cplx> in, std::span<cplx> out,
                      bool adjoint = false) const {
        if (data_.empty()) return;
        const cplx* m = data_.data() + point * n_ * n_;
        for (int r = 0; r < n_; ++r) {
            cplx acc{0.0, 0.0};
            for (int c = 0; c < n_; ++c) {
                // column-major storage: (r, c) at c*n + r
                acc += adjoint ? std::conj(m[r * n_ + c]) * in[c] : m[c * n_ + r] * in[c];
            }
            out[r] += acc;
        }
    }

    // N x N block at a point, column-major; null when the field is zero.
    const cplx* raw(std::size_t point) const { return data_.empty() ? nullptr : data_.data() + point * n_ * n_; }

    Eigen::MatrixXcd at(std::size_t point) const {
        if (data_.empty()) return Eigen::MatrixXcd::Zero(n_, n_);
        return Eigen::Map<const Eigen::MatrixXcd>(data_.data() + point * n_ * n_, n_, n_);
    }

    bool is_hermitian(double tol = 0.0) const {
        if (data_.empty()) return true;
        for (std::size_t p = 0; p < points_; ++p) {
            const auto m = at(p);
            if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
        }
        return true;
    }

    CoefficientField adjoint() const {
        CoefficientField c = *this;
        for (std::size_t p = 0; p < points_ && !data_.empty(); ++p) {
            Eigen::Map<Eigen::MatrixXcd> m(c.data_.data() + p * n_ * n_, n_, n_);
            m = at(p).adjoint();
        }
        return c;
    }

private:
    std::size_t points_ = 0;
    int n_ = 0;
    std::vector<cplx> data_;
};

struct NormallyHyperbolicSpec {
    int components = 1;
    CoefficientField U0, U1, V;
    // Lattice step of every difference. 1 for the ordinary operator; 2 for
    // the squared Dirac operator built from centered first differences.
    int stride = 1;

    bool is_symmetric() const { return U0.is_zero() && U1.is_zero() && V.is_hermitian(1e-14); }
    bool has_first_order() const { return !U0.is_zero() || !U1.is_zero(); }
};

/// D = -i(g0 d0 + g1 d1) + m, companion D' = i(g0 d0 + g1 d1) + m, so that
/// D'D = DD' = (box + m^2) I with box = d0^2 - d1^2.
struct DiracPairSpec {
    double mass = 0.0;
    Eigen::Matrix2cd gamma0;
    Eigen::Matrix2cd gamma1;

    // gamma0 = diag(1, -1) (sigma_z), gamma1 = i sigma_y = [[0, 1], [-1, 0]].
    static DiracPairSpec standard(double m) {
        DiracPairSpec d;
        d.mass = m;
        d.gamma0 << 1.0, 0.0, 0.0, -1.0;
        d.gamma1 << 0.0, 1.0, -1.0, 0.0;
        d.validate();
        return d;
    }

    void validate() const {
        const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
        const double e1 = (gamma0 * gamma0 - id).cwiseAbs().maxCoeff();
        const double e2 = (gamma1 * gamma1 + id).cwiseAbs().maxCoeff();
        const double e3 = (gamma0 * gamma1 + gamma1 * gamma0).cwiseAbs().maxCoeff();
        if (e1 > 1e-14 || e2 > 1e-14 || e3 > 1e-14) {
            throw PreconditionError("gamma matrices violate the Clifford relations");
        }
        if (!std::isfinite(mass)) throw PreconditionError("Dirac mass must be finite");
    }
};

struct OperatorSpec {
    SpacetimeGrid grid;
    std::variant<NormallyHyperbolicSpec, DiracPairSpec> op;

    bool is_dirac() const { return std::holds_alternative<DiracPairSpec>(op); }
    const NormallyHyperbolicSpec& nh() const { return std::get<NormallyHyperbolicSpec>(op); }
    const DiracPairSpec& dirac() const { return std::get<DiracPairSpec>(op); }
};

inline OperatorSpec make_operator(const SpacetimeGrid& g, NormallyHyperbolicSpec nh) {
    if (nh.components != g.components) throw GridError("operator/grid component mismatch");
    for (const auto* c : {&nh.U0, &nh.U1, &nh.V}) {
        if (!c->is_zero() && c->n() != nh.components) throw GridError("coefficient size mismatch");
    }
    if (nh.stride < 1 || 3 * nh.stride >= g.n_time || 3 * nh.stride >= g.n_space) {
        throw GridError("stencil stride too large for grid");
    }
    return OperatorSpec{g, std::move(nh)};
}

inline OperatorSpec make_operator(const SpacetimeGrid& g, DiracPairSpec d) {
    d.validate();
    if (g.components != 2) throw GridError("Dirac pair needs a 2-component grid");
    return OperatorSpec{g, std::move(d)};
}

// Scalar d'Alembertian (U = 0) with optional constant mass term V = m^2.
inline OperatorSpec wave_operator(const SpacetimeGrid& g, double mass_squared = 0.0) {
    NormallyHyperbolicSpec nh;
    nh.components = g.components;
    nh.U0 = CoefficientField::zero(g, g.components);
    nh.U1 = CoefficientField::zero(g, g.components);
    nh.V = mass_squared == 0.0
               ? CoefficientField::zero(g, g.components)
               : CoefficientField::constant(
                     g, Eigen::MatrixXcd::Identity(g.components, g.components) * mass_squared);
    return make_operator(g, std::move(nh));
}

/// Rows/columns within this distance of the rim are excluded from identities.
inline int interior_margin(const OperatorSpec& spec) {
    return spec.is_dirac() ? 1 : spec.nh().stride;
}

/// Normally hyperbolic companion DD' = D'D of a Dirac pair on the same grid:
/// the stride-2 d'Alembertian plus m^2.
inline OperatorSpec companion_operator(const OperatorSpec& spec) {
    const auto& d = spec.dirac();
    NormallyHyperbolicSpec nh;
    nh.components = 2;
    nh.U0 = CoefficientField::zero(spec.grid, 2);
    nh.U1 = CoefficientField::zero(spec.grid, 2);
    nh.V = d.mass == 0.0 ? CoefficientField::zero(spec.grid, 2)
                         : CoefficientField::constant(spec.grid,
                                                      Eigen::MatrixXcd::Identity(2, 2) * d.mass * d.mass);
    nh.stride = 2;
    return make_operator(spec.grid, std::move(nh));
}

namespace detail {

// Second-order accurate difference along one axis with step s (in cells).
// get(i) returns the value at axis index i; n is the axis length.
template <typename Get>
cplx second_diff(Get&& get, int i, int n, int s, double h) {
    const double hh = (s * h) * (s * h);
    if (i - s >= 0 && i + s <= n - 1) return (get(i + s) - 2.0 * get(i) + get(i - s)) / hh;
    if (i - s < 0) return (2.0 * get(i) - 5.0 * get(i + s) + 4.0 * get(i + 2 * s) - get(i + 3 * s)) / hh;
    return (2.0 * get(i) - 5.0 * get(i - s) + 4.0 * get(i - 2 * s) - get(i - 3 * s)) / hh;
}

template <typename Get>
cplx first_diff(Get&& get, int i, int n, int s, double h) {
    const double h2 = 2.0 * s * h;
    if (i - s >= 0 && i + s <= n - 1) return (get(i + s) - get(i - s)) / h2;
    if (i - s < 0) return (-3.0 * get(i) + 4.0 * get(i + s) - get(i + 2 * s)) / h2;
    return (3.0 * get(i) - 4.0 * get(i - s) + get(i - 2 * s)) / h2;
}

inline GridFunction pointwise_matrix(const CoefficientField& c, const GridFunction& f, bool adjoint) {
    GridFunction out(f.grid());
    if (c.is_zero()) return out;
    const auto& g = f.grid();
    for (int j = 0; j < g.n_time; ++j)
        for (int k = 0; k < g.n_space; ++k)
            c.multiply_add(g.point_index(j, k), f.point(j, k), out.point(j, k), adjoint);
    return out;
}

inline cplx time_d2(const GridFunction& f, int j, int k, int a, int s) {
    const auto& g = f.grid();
    return second_diff([&](int i) { return f.at(i, k, a); }, j, g.n_time, s, g.dt);
}
inline cplx space_d2(const GridFunction& f, int j, int k, int a, int s) {
    const auto& g = f.grid();
    return second_diff([&](int i) { return f.at(j, i, a); }, k, g.n_space, s, g.dx);
}
inline cplx time_d1(const GridFunction& f, int j, int k, int a, int s) {
    const auto& g = f.grid();
    return first_diff([&](int i) { return f.at(i, k, a); }, j, g.n_time, s, g.dt);
}
inline cplx space_d1(const GridFunction& f, int j, int k, int a, int s) {
    const auto& g = f.grid();
    return first_diff([&](int i) { return f.at(j, i, a); }, k, g.n_space, s, g.dx);
}

inline GridFunction apply_nh(const NormallyHyperbolicSpec& nh, const GridFunction& f, bool adjoint) {
    const auto& g = f.grid();
    const int n = g.components;
    const int s = nh.stride;
    GridFunction out(g);
    std::vector<cplx> d0(n), d1(n);
    for (int j = 0; j < g.n_time; ++j) {
        for (int k = 0; k < g.n_space; ++k) {
            auto o = out.point(j, k);
            for (int a = 0; a < n; ++a) o[a] = time_d2(f, j, k, a, s) - space_d2(f, j, k, a, s);
            if (!adjoint && nh.has_first_order()) {
                for (int a = 0; a < n; ++a) {
                    d0[a] = time_d1(f, j, k, a, s);
                    d1[a] = space_d1(f, j, k, a, s);
                }
                nh.U0.multiply_add(g.point_index(j, k), d0, o);
                nh.U1.multiply_add(g.point_index(j, k), d1, o);
            }
            nh.V.multiply_add(g.point_index(j, k), f.point(j, k), o, adjoint);
        }
    }
    if (adjoint && nh.has_first_order()) {
        // (U d)^* = -d (U^dagger .)
        const GridFunction u0f = pointwise_matrix(nh.U0, f, true);
        const GridFunction u1f = pointwise_matrix(nh.U1, f, true);
        for (int j = 0; j < g.n_time; ++j)
            for (int k = 0; k < g.n_space; ++k)
                for (int a = 0; a < n; ++a)
                    out.at(j, k, a) -= time_d1(u0f, j, k, a, s) + space_d1(u1f, j, k, a, s);
    }
    return out;
}

// c0 * d0 f + c1 * d1 f + m f with constant 2x2 c0, c1.
inline GridFunction apply_first_order(const Eigen::Matrix2cd& c0, const Eigen::Matrix2cd& c1, double m,
                                      const GridFunction& f) {
    const auto& g = f.grid();
    GridFunction out(g);
    for (int j = 0; j < g.n_time; ++j) {
        for (int k = 0; k < g.n_space; ++k) {
            Eigen::Vector2cd d0, d1, v;
            for (int a = 0; a < 2; ++a) {
                d0[a] = time_d1(f, j, k, a, 1);
                d1[a] = space_d1(f, j, k, a, 1);
                v[a] = f.at(j, k, a);
            }
            const Eigen::Vector2cd r = c0 * d0 + c1 * d1 + m * v;
            out.at(j, k, 0) = r[0];
            out.at(j, k, 1) = r[1];
        }
    }
    return out;
}

}  // namespace detail

/// D f. Output on the outermost rows/columns uses one-sided stencils.
inline GridFunction apply_D(const OperatorSpec& spec, const GridFunction& f) {
    require_same_grid(spec.grid, f.grid(), "apply_D");
    if (spec.is_dirac()) {
        const auto& d = spec.dirac();
        const cplx mi{0.0, -1.0};
        return detail::apply_first_order(mi * d.gamma0, mi * d.gamma1, d.mass, f);
    }
    return detail::apply_nh(spec.nh(), f, false);
}

/// Formal adjoint of D with respect to inner_product: transposed-conjugate
/// stencil. Coincides with apply_D for symmetric specs away from the rim.
inline GridFunction apply_D_adjoint(const OperatorSpec& spec, const GridFunction& f) {
    require_same_grid(spec.grid, f.grid(), "apply_D_adjoint");
    if (spec.is_dirac()) {
        const auto& d = spec.dirac();
        const cplx mi{0.0, -1.0};
        // (-i g d)^* = -i g^dagger d for constant g
        return detail::apply_first_order(mi * d.gamma0.adjoint(), mi * d.gamma1.adjoint(), d.mass, f);
    }
    return detail::apply_nh(spec.nh(), f, true);
}

/// D' f = i(g0 d0 + g1 d1) f + m f for a Dirac pair.
inline GridFunction apply_D_prime(const OperatorSpec& spec, const GridFunction& f) {
    require_same_grid(spec.grid, f.grid(), "apply_D_prime");
    if (!spec.is_dirac()) throw PreconditionError("apply_D_prime needs a Dirac pair");
    const auto& d = spec.dirac();
    const cplx pi{0.0, 1.0};
    return detail::apply_first_order(pi * d.gamma0, pi * d.gamma1, d.mass, f);
}

/// D'(D f); equals (box + m^2) f to second order.
inline GridFunction compose_pair(const OperatorSpec& spec, const GridFunction& f) {
    return apply_D_prime(spec, apply_D(spec, f));
}

}  // namespace ncwave
