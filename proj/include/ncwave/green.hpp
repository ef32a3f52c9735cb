#pragma once

// Retarded / advanced Green operators of D by explicit causal leapfrog.
//
// R+ f solves D u = f at every interior point with u = 0 on the rows before
// supp f; R- is the time mirror. The spatial rim is held at zero, which is
// exact as long as the solution never reaches it. Two ways to guarantee that:
//   BoundaryCheck::cone   a priori: the lattice cone of supp f stays clear of
//                         the rim up to the last row (support-exact mode);
//   BoundaryCheck::trace  a posteriori: the computed solution vanishes (to
//                         1e-12 relative) on the columns next to the rim. Needed
//                         when large cancellations keep the true solution
//                         narrower than the cone of the source.
// Dirac pairs are inverted through the normally hyperbolic companion:
// R_D = D' R_{DD'}.

#include <optional>

#include "ncwave/diffops.hpp"

namespace ncwave {

enum class Direction { retarded, advanced };

inline Direction opposite(Direction d) {
    return d == Direction::retarded ? Direction::advanced : Direction::retarded;
}
inline Causal cone_of(Direction d) { return d == Direction::retarded ? Causal::future : Causal::past; }
inline const char* to_string(Direction d) { return d == Direction::retarded ? "retarded" : "advanced"; }

enum class BoundaryCheck { cone, trace };

namespace detail {

inline void check_source_rim(const GridFunction& f, int margin) {
    const auto& g = f.grid();
    for (int j = 0; j < g.n_time; ++j) {
        const bool rim_row = j < margin || j > g.n_time - 1 - margin;
        for (int k = 0; k < g.n_space; ++k) {
            if (!rim_row && k >= margin && k <= g.n_space - 1 - margin) continue;
            for (const auto& v : f.point(j, k))
                if (v != cplx{0.0, 0.0}) {
                    throw PreconditionError("Green operator: source touches the grid rim");
                }
        }
    }
}

// The index cone of supp f must stay at least `margin` columns away from the
// edges until the last row it reaches.
inline void check_cone_clearance(const GridFunction& f, Direction dir, int margin) {
    const auto& g = f.grid();
    for (int j = 0; j < g.n_time; ++j) {
        int lo = g.n_space, hi = -1;
        for (int k = 0; k < g.n_space; ++k)
            for (const auto& v : f.point(j, k))
                if (v != cplx{0.0, 0.0}) {
                    lo = std::min(lo, k);
                    hi = std::max(hi, k);
                    break;
                }
        if (hi < 0) continue;
        const int remaining = dir == Direction::retarded ? g.n_time - 1 - j : j;
        if (lo - remaining < margin || hi + remaining > g.n_space - 1 - margin) {
            throw BoundaryContaminationError(
                std::string("Green operator: causal cone of the source reaches the spatial boundary (") +
                to_string(dir) + ")");
        }
    }
}

inline void check_trace(const GridFunction& u, int margin, int row_margin = 0) {
    const auto& g = u.grid();
    const double scale = sup_norm(u);
    if (scale == 0.0) return;
    double edge = 0.0;
    for (int j = row_margin; j < g.n_time - row_margin; ++j)
        for (int k = 0; k < g.n_space; ++k) {
            if (k >= 2 * margin && k <= g.n_space - 1 - 2 * margin) continue;
            for (const auto& v : u.point(j, k)) edge = std::max(edge, std::abs(v));
        }
    if (edge > 1e-12 * scale) {
        throw BoundaryContaminationError("Green operator: solution reaches the spatial boundary");
    }
}

// One leapfrog update: given rows j and j -/+ s of u, write row j +/- s so
// that D u = f holds at row j (interior columns). f may be null (f = 0).
inline void leapfrog_row(const NormallyHyperbolicSpec& nh, GridFunction& u, const GridFunction* f, int j,
                         Direction dir) {
    const auto& g = u.grid();
    const int n = g.components;
    const int s = nh.stride;
    const double h0 = (s * g.dt) * (s * g.dt);
    const double h1 = (s * g.dx) * (s * g.dx);
    const double c0 = 1.0 / (2.0 * s * g.dt);
    const double c1 = 1.0 / (2.0 * s * g.dx);
    const bool retarded = dir == Direction::retarded;
    const int jprev = retarded ? j - s : j + s;
    const int jnext = retarded ? j + s : j - s;
    if (nh.U0.is_zero() && nh.U1.is_zero()) {
        // u_next = h0 (f - V u) - u_prev + 2 u + (h0/h1)(u_right - 2 u + u_left)
        const double r = h0 / h1;
        const auto uj = u.row(j);
        const auto up = u.row(jprev);
        auto out = u.row(jnext);
        const cplx* fr = f ? f->row(j).data() : nullptr;
        for (int k = s; k <= g.n_space - 1 - s; ++k) {
            const cplx* V = nh.V.raw(g.point_index(j, k));
            for (int a = 0; a < n; ++a) {
                const std::size_t i = static_cast<std::size_t>(k * n + a);
                const std::size_t ir = i + static_cast<std::size_t>(s * n), il = i - static_cast<std::size_t>(s * n);
                cplx src = fr ? fr[i] : cplx{0.0, 0.0};
                if (V)
                    for (int c = 0; c < n; ++c) src -= V[c * n + a] * uj[static_cast<std::size_t>(k * n + c)];
                out[i] = h0 * src - up[i] + 2.0 * uj[i] + r * (uj[ir] - 2.0 * uj[i] + uj[il]);
            }
        }
        return;
    }
    std::vector<cplx> rhs(n), acc(n), grad(n), prev_scaled(n);
    for (int k = s; k <= g.n_space - 1 - s; ++k) {
        const std::size_t p = g.point_index(j, k);
        auto uj = u.point(j, k);
        auto up = u.point(jprev, k);
        auto ur = u.point(j, k + s);
        auto ul = u.point(j, k - s);
        std::fill(acc.begin(), acc.end(), cplx{0.0, 0.0});
        for (int a = 0; a < n; ++a) {
            const cplx fa = f ? f->at(j, k, a) : cplx{0.0, 0.0};
            rhs[a] = fa - ((up[a] - 2.0 * uj[a]) / h0 - (ur[a] - 2.0 * uj[a] + ul[a]) / h1);
            grad[a] = (ur[a] - ul[a]) * c1;
            // U0 (u_next - u_prev) c0 with u_next unknown: move the u_prev part.
            prev_scaled[a] = (retarded ? -1.0 : 1.0) * up[a] * c0;
        }
        nh.U1.multiply_add(p, grad, acc);
        nh.V.multiply_add(p, uj, acc);
        nh.U0.multiply_add(p, prev_scaled, acc);
        auto out = u.point(jnext, k);
        if (nh.U0.is_zero()) {
            for (int a = 0; a < n; ++a) out[a] = (rhs[a] - acc[a]) * h0;
        } else {
            Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(n, n) / h0;
            A += (retarded ? c0 : -c0) * nh.U0.at(p);
            Eigen::VectorXcd b(n);
            for (int a = 0; a < n; ++a) b[a] = rhs[a] - acc[a];
            const Eigen::VectorXcd x = A.partialPivLu().solve(b);
            for (int a = 0; a < n; ++a) out[a] = x[a];
        }
    }
}

inline GridFunction step_nh(const NormallyHyperbolicSpec& nh, const GridFunction& f, Direction dir) {
    const auto& g = f.grid();
    const int s = nh.stride;
    GridFunction u(g);
    if (dir == Direction::retarded) {
        for (int j = s; j <= g.n_time - 1 - s; ++j) leapfrog_row(nh, u, &f, j, dir);
    } else {
        for (int j = g.n_time - 1 - s; j >= s; --j) leapfrog_row(nh, u, &f, j, dir);
    }
    return u;
}

}  // namespace detail

class GreenOperator {
public:
    explicit GreenOperator(OperatorSpec spec, BoundaryCheck check = BoundaryCheck::cone)
        : spec_(std::move(spec)), check_(check) {
        if (spec_.is_dirac()) {
            companion_ = companion_operator(spec_);
        } else if (!spec_.nh().is_symmetric() && !spec_.nh().has_first_order()) {
            // D^* = box + V^dagger: keep its Green operator for adjoint applications.
            auto nh = spec_.nh();
            nh.V = nh.V.adjoint();
            adjoint_spec_ = make_operator(spec_.grid, std::move(nh));
        }
    }

    const OperatorSpec& spec() const { return spec_; }
    const SpacetimeGrid& grid() const { return spec_.grid; }
    BoundaryCheck boundary_check() const { return check_; }

    GreenOperator with_check(BoundaryCheck check) const {
        GreenOperator g = *this;
        g.check_ = check;
        return g;
    }

    GridFunction apply(Direction dir, const GridFunction& f) const {
        require_same_grid(spec_.grid, f.grid(), "GreenOperator::apply");
        if (spec_.is_dirac()) {
            // the companion solution may spread where D' of it vanishes:
            // the trace check applies to the Dirac output, whose first and
            // last rows come from one-sided differences
            GridFunction u = apply_D_prime(spec_, solve_nh(companion_->nh(), f, dir, false));
            if (check_ == BoundaryCheck::trace) detail::check_trace(u, 1, 1);
            return u;
        }
        return solve_nh(spec_.nh(), f, dir);
    }

    GridFunction retarded(const GridFunction& f) const { return apply(Direction::retarded, f); }
    GridFunction advanced(const GridFunction& f) const { return apply(Direction::advanced, f); }

    /// R f = R+ f - R- f.
    GridFunction causal(const GridFunction& f) const { return retarded(f) - advanced(f); }

    /// (R^dir)^* f with respect to inner_product. For normally hyperbolic D
    /// without first-order terms this is R^{opposite} of D^*; for the Dirac
    /// pair it is gamma0 R^{opposite} gamma0.
    GridFunction apply_adjoint(Direction dir, const GridFunction& f) const {
        if (spec_.is_dirac()) {
            const auto& g0 = spec_.dirac().gamma0;
            return gamma_multiply(g0, apply(opposite(dir), gamma_multiply(g0, f)));
        }
        if (spec_.nh().has_first_order()) {
            throw PreconditionError("adjoint Green operator needs U = 0");
        }
        if (adjoint_spec_) return solve_nh(adjoint_spec_->nh(), f, opposite(dir));
        return apply(opposite(dir), f);
    }

    static GridFunction gamma_multiply(const Eigen::Matrix2cd& m, const GridFunction& f) {
        GridFunction out(f.grid());
        const auto& g = f.grid();
        for (int j = 0; j < g.n_time; ++j)
            for (int k = 0; k < g.n_space; ++k) {
                auto in = f.point(j, k);
                auto o = out.point(j, k);
                o[0] = m(0, 0) * in[0] + m(0, 1) * in[1];
                o[1] = m(1, 0) * in[0] + m(1, 1) * in[1];
            }
        return out;
    }

private:
    GridFunction solve_nh(const NormallyHyperbolicSpec& nh, const GridFunction& f, Direction dir,
                          bool trace = true) const {
        detail::check_source_rim(f, nh.stride);
        if (check_ == BoundaryCheck::cone) detail::check_cone_clearance(f, dir, nh.stride);
        GridFunction u = detail::step_nh(nh, f, dir);
        if (trace && check_ == BoundaryCheck::trace) detail::check_trace(u, nh.stride);
        return u;
    }

    OperatorSpec spec_;
    BoundaryCheck check_;
    std::optional<OperatorSpec> companion_;
    std::optional<OperatorSpec> adjoint_spec_;
};

inline GridFunction apply_retarded(const GreenOperator& G, const GridFunction& f) { return G.retarded(f); }
inline GridFunction apply_advanced(const GreenOperator& G, const GridFunction& f) { return G.advanced(f); }
inline GridFunction apply_R(const GreenOperator& G, const GridFunction& f) { return G.causal(f); }

/// R^dir_D f = D'(R^dir_{DD'} f) for a Dirac pair on `grid`.
inline GridFunction dirac_green(const SpacetimeGrid& grid, const DiracPairSpec& pair, Direction dir,
                                const GridFunction& f, BoundaryCheck check = BoundaryCheck::cone) {
    return GreenOperator(make_operator(grid, pair), check).apply(dir, f);
}

}  // namespace ncwave
