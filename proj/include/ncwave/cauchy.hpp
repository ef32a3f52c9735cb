#pragma once

// Cauchy data for the free equation, and the two ill-posedness probes for
// rank-one kernels: a non-uniqueness witness and a non-existence search.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncwave/born.hpp"
#include "ncwave/diffops.hpp"
#include "ncwave/green.hpp"
#include "ncwave/kernels.hpp"
#include "ncwave/lattice.hpp"
#include "ncwave/profiles.hpp"

namespace ncwave {

/// Data on the slice j_sigma. Normally hyperbolic: u0 = f, u1 = d0 f.
/// Dirac: u0 = f, u1 empty. Arrays are n_space * N, point-major.
struct CauchyData {
    int j_sigma = 0;
    int n_space = 0;
    int components = 1;
    bool dirac = false;
    std::vector<cplx> u0, u1;

    static CauchyData zero(const SpacetimeGrid& g, int j, bool dirac = false) {
        CauchyData d;
        d.j_sigma = j;
        d.n_space = g.n_space;
        d.components = g.components;
        d.dirac = dirac;
        const auto n = static_cast<std::size_t>(g.n_space * g.components);
        d.u0.assign(n, cplx{0.0, 0.0});
        if (!dirac) d.u1.assign(n, cplx{0.0, 0.0});
        return d;
    }

    cplx& v0(int k, int a) { return u0[static_cast<std::size_t>(k * components + a)]; }
    cplx& v1(int k, int a) { return u1[static_cast<std::size_t>(k * components + a)]; }
    cplx v0(int k, int a) const { return u0[static_cast<std::size_t>(k * components + a)]; }
    cplx v1(int k, int a) const { return u1[static_cast<std::size_t>(k * components + a)]; }

    double sup_norm() const {
        double s = 0.0;
        for (const auto& v : u0) s = std::max(s, std::abs(v));
        for (const auto& v : u1) s = std::max(s, std::abs(v));
        return s;
    }
    bool all_finite() const {
        for (const auto* arr : {&u0, &u1})
            for (const auto& v : *arr)
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }
};

inline CauchyData operator-(const CauchyData& a, const CauchyData& b) {
    CauchyData d = a;
    for (std::size_t i = 0; i < d.u0.size(); ++i) d.u0[i] -= b.u0[i];
    for (std::size_t i = 0; i < d.u1.size(); ++i) d.u1[i] -= b.u1[i];
    return d;
}

namespace detail {

inline void check_slice(const SpacetimeGrid& g, int j) {
    if (j < 1 || j > g.n_time - 2) throw PreconditionError("Cauchy slice must be an interior time row");
}

inline void check_data_shape(const SpacetimeGrid& g, const CauchyData& d) {
    const auto n = static_cast<std::size_t>(g.n_space * g.components);
    if (d.n_space != g.n_space || d.components != g.components || d.u0.size() != n ||
        (!d.dirac && d.u1.size() != n)) {
        throw GridError("Cauchy data shape does not match the grid");
    }
    if (!d.all_finite()) throw PreconditionError("Cauchy data is not finite");
}

// Dirac: d0 f = L f with L f = -c0^{-1}(c1 d1 f + m f), centered d1, interior columns.
inline std::vector<cplx> dirac_time_derivative(const DiracPairSpec& d, const SpacetimeGrid& g,
                                               const std::vector<cplx>& u) {
    const cplx mi{0.0, -1.0};
    const Eigen::Matrix2cd c0inv = (mi * d.gamma0).inverse();
    const Eigen::Matrix2cd c1 = mi * d.gamma1;
    std::vector<cplx> out(u.size(), cplx{0.0, 0.0});
    for (int k = 1; k < g.n_space - 1; ++k) {
        Eigen::Vector2cd grad, v;
        for (int a = 0; a < 2; ++a) {
            grad[a] = (u[2 * (k + 1) + a] - u[2 * (k - 1) + a]) / (2.0 * g.dx);
            v[a] = u[2 * k + a];
        }
        const Eigen::Vector2cd r = -c0inv * (c1 * grad + d.mass * v);
        out[2 * k] = r[0];
        out[2 * k + 1] = r[1];
    }
    return out;
}

}  // namespace detail

/// Restriction of f to the slice j: (f, centered d0 f), or f alone for Dirac.
inline CauchyData extract_data(const GridFunction& f, int j_sigma, bool dirac = false) {
    const auto& g = f.grid();
    detail::check_slice(g, j_sigma);
    auto d = CauchyData::zero(g, j_sigma, dirac);
    for (int k = 0; k < g.n_space; ++k)
        for (int a = 0; a < g.components; ++a) {
            d.v0(k, a) = f.at(j_sigma, k, a);
            if (!dirac) d.v1(k, a) = (f.at(j_sigma + 1, k, a) - f.at(j_sigma - 1, k, a)) / (2.0 * g.dt);
        }
    return d;
}

inline CauchyData extract_data(const OperatorSpec& spec, const GridFunction& f, int j_sigma) {
    return extract_data(f, j_sigma, spec.is_dirac());
}

/// f0[u]: D f0 = 0 at interior points, with the given data on the slice.
/// The rows next to the slice come from a second-order Taylor start that
/// makes D f0 = 0 hold on the slice itself; then leapfrog both ways.
inline GridFunction free_solution_from_data(const OperatorSpec& spec, const CauchyData& data) {
    const auto& g = spec.grid;
    detail::check_slice(g, data.j_sigma);
    detail::check_data_shape(g, data);
    if (data.dirac != spec.is_dirac()) throw PreconditionError("Cauchy data kind does not match the operator");
    const int js = data.j_sigma;
    const int n = g.components;
    for (int k : {0, 1, g.n_space - 2, g.n_space - 1})
        for (int a = 0; a < n; ++a)
            if (data.v0(k, a) != cplx{0.0, 0.0} || (!data.dirac && data.v1(k, a) != cplx{0.0, 0.0}))
                throw BoundaryContaminationError("Cauchy data touches the spatial boundary");

    GridFunction f(g);
    for (int k = 0; k < g.n_space; ++k)
        for (int a = 0; a < n; ++a) f.at(js, k, a) = data.v0(k, a);

    if (spec.is_dirac()) {
        const auto& d = spec.dirac();
        const auto v = detail::dirac_time_derivative(d, g, data.u0);
        const auto w = detail::dirac_time_derivative(d, g, v);
        for (int k = 1; k < g.n_space - 1; ++k)
            for (int a = 0; a < 2; ++a) {
                const auto i = static_cast<std::size_t>(2 * k + a);
                f.at(js + 1, k, a) = data.u0[i] + g.dt * v[i] + 0.5 * g.dt * g.dt * w[i];
                f.at(js - 1, k, a) = f.at(js + 1, k, a) - 2.0 * g.dt * v[i];
            }
        auto step = [&](int from, int mid, int to, double sign) {
            std::vector<cplx> row(f.row(mid).begin(), f.row(mid).end());
            const auto lv = detail::dirac_time_derivative(d, g, row);
            for (int k = 1; k < g.n_space - 1; ++k)
                for (int a = 0; a < 2; ++a)
                    f.at(to, k, a) = f.at(from, k, a) + sign * 2.0 * g.dt * lv[static_cast<std::size_t>(2 * k + a)];
        };
        for (int j = js + 1; j <= g.n_time - 2; ++j) step(j - 1, j, j + 1, 1.0);
        for (int j = js - 1; j >= 1; --j) step(j + 1, j, j - 1, -1.0);
        detail::check_trace(f, 1);
        return f;
    }

    const auto& nh = spec.nh();
    if (nh.stride != 1) throw PreconditionError("free_solution_from_data needs a stride-1 operator");
    // d0^2 f on the slice from the equation, with the same difference stencils as D.
    std::vector<cplx> grad(n), acc(n), lap(n), u0(n), u1(n);
    for (int k = 1; k < g.n_space - 1; ++k) {
        const std::size_t p = g.point_index(js, k);
        for (int a = 0; a < n; ++a) {
            u0[a] = data.v0(k, a);
            u1[a] = data.v1(k, a);
            lap[a] = (data.v0(k + 1, a) - 2.0 * u0[a] + data.v0(k - 1, a)) / (g.dx * g.dx);
            grad[a] = (data.v0(k + 1, a) - data.v0(k - 1, a)) / (2.0 * g.dx);
        }
        std::fill(acc.begin(), acc.end(), cplx{0.0, 0.0});
        nh.U0.multiply_add(p, u1, acc);
        nh.U1.multiply_add(p, grad, acc);
        nh.V.multiply_add(p, u0, acc);
        for (int a = 0; a < n; ++a) {
            const cplx a2 = lap[a] - acc[a];
            f.at(js + 1, k, a) = u0[a] + g.dt * u1[a] + 0.5 * g.dt * g.dt * a2;
            f.at(js - 1, k, a) = u0[a] - g.dt * u1[a] + 0.5 * g.dt * g.dt * a2;
        }
    }
    for (int j = js + 1; j <= g.n_time - 2; ++j) detail::leapfrog_row(nh, f, nullptr, j, Direction::retarded);
    for (int j = js - 1; j >= 1; --j) detail::leapfrog_row(nh, f, nullptr, j, Direction::advanced);
    detail::check_trace(f, 1);
    return f;
}

// ---- non-uniqueness -----------------------------------------------------

struct NonuniquenessWitness {
    cplx lambda;
    GridFunction f_lambda;
    cplx pairing;              // <w1, R- w2>
    double residual = 0.0;     // interior sup |(D + lambda W) f| / sup |w2|
    double data_norm = 0.0;    // sup of extract_data(f_lambda)
    double norm_ratio = 0.0;   // sup f_lambda / sup R- w2
    double construction_gap = 0.0;  // |(f0[u] - R+ w2) + R- w2| / sup R- w2
    bool spacelike = false;    // supp w1 and supp w2 causally disjoint
};

/// lambda = -1/<w1, R- w2> and f_lambda = f0[u] - R+ w2 with u the data of
/// R w2 on the slice. f_lambda = -R- w2 solves (D + lambda W) f = 0 with
/// zero data. Needs supp w1 to meet the causal past of supp w2.
inline NonuniquenessWitness nonuniqueness_witness(const GreenOperator& G, const GridFunction& w1,
                                                  const GridFunction& w2, int j_sigma,
                                                  double pairing_threshold = 1e-10) {
    const auto& g = G.grid();
    if (G.spec().is_dirac()) throw PreconditionError("nonuniqueness witness is built for normally hyperbolic D");
    require_same_grid(g, w1.grid(), "nonuniqueness_witness");
    require_same_grid(g, w2.grid(), "nonuniqueness_witness");
    detail::check_slice(g, j_sigma);
    const auto b2 = support(w2).bounding_box();
    if (b2.empty() || support(w1).bounding_box().empty()) throw PreconditionError("witness needs w1, w2 != 0");
    if (b2.j1 > j_sigma - 1) throw PreconditionError("supp w2 must lie strictly in the past of the slice");

    NonuniquenessWitness out;
    const auto s1 = support(w1);
    const auto s2 = support(w2);
    out.spacelike = (causal_cone(s2, Causal::future) & s1).count() == 0 &&
                    (causal_cone(s2, Causal::past) & s1).count() == 0;

    const GridFunction rp = G.retarded(w2);
    const GridFunction rm = G.advanced(w2);
    out.pairing = inner_product(w1, rm);
    const double scale = l2_norm(w1) * l2_norm(rm);
    if (!(std::abs(out.pairing) > pairing_threshold * std::max(scale, 1e-300)) || scale == 0.0) {
        throw PreconditionError("witness ill-conditioned: <w1, R- w2> below threshold");
    }
    out.lambda = -1.0 / out.pairing;

    const auto u = extract_data(rp - rm, j_sigma);
    out.f_lambda = free_solution_from_data(G.spec(), u) - rp;

    const double rm_sup = sup_norm(rm);
    out.construction_gap = sup_norm(out.f_lambda + rm) / rm_sup;
    const auto W = KernelPotential::rank_one(w1, w2);
    const auto lhs = apply_D(G.spec(), out.f_lambda) + out.lambda * apply_W(W, out.f_lambda);
    out.residual = mask_sup_norm(lhs, interior_mask(g, interior_margin(G.spec()))) / sup_norm(w2);
    out.data_norm = extract_data(out.f_lambda, j_sigma).sup_norm();
    out.norm_ratio = sup_norm(out.f_lambda) / rm_sup;
    return out;
}

// ---- non-existence ------------------------------------------------------

/// 1D Cauchy data profile: u0 = a0 psi((x - c)/r), u1 = a1 psi((x - c)/r).
struct DataProfile {
    double x_c = 0.0;
    double r = 0.1;
    cplx a0{1.0, 0.0};
    cplx a1{0.0, 0.0};

    bool is_zero() const { return a0 == cplx{0.0, 0.0} && a1 == cplx{0.0, 0.0}; }

    CauchyData sample(const SpacetimeGrid& g, int j) const {
        auto d = CauchyData::zero(g, j);
        for (int k = 0; k < g.n_space; ++k) {
            const double s = bump1d((g.x(k) - x_c) / r);
            for (int a = 0; a < g.components; ++a) {
                d.v0(k, a) = a0 * s;
                d.v1(k, a) = a1 * s;
            }
        }
        return d;
    }
};

/// Continuum description of the non-existence setup so that it can be
/// resampled at each refinement: box + m^2 on [t_sigma - t_half, t_sigma + t_half]
/// x [-x_half, x_half], W = <w1, .> w2, data u on t = t_sigma.
struct ProbeGeometry {
    double t_sigma = 0.0;
    double t_half = 1.0;
    double x_half = 2.0;
    double mass_squared = 0.0;
    BumpProfile w1{0.0, -0.6, 0.09, 0.09, {cplx{1.0, 0.0}}};
    BumpProfile w2{0.0, 0.6, 0.09, 0.09, {cplx{1.0, 0.0}}};
    DataProfile u{-0.6, 0.1, cplx{1.0, 0.0}, cplx{0.0, 0.0}};

    SpacetimeGrid grid(double dx) const {
        const int nt = static_cast<int>(std::lround(2.0 * t_half / dx)) + 1;
        const int nx = static_cast<int>(std::lround(2.0 * x_half / dx)) + 1;
        return make_grid(nt, nx, dx, dx, t_sigma - t_half, -x_half, 1);
    }

    // Smallest base interval on the slice whose domain of dependence holds the bump.
    static std::pair<double, double> base_of(const BumpProfile& b, double t_sigma) {
        const double reach = std::abs(b.t_c - t_sigma) + b.r_t;
        return {b.x_c - b.r_x - reach, b.x_c + b.r_x + reach};
    }

    /// Base intervals Sigma_1 (w1 and the data) and Sigma_2 (w2).
    std::pair<std::pair<double, double>, std::pair<double, double>> bases() const {
        auto s1 = base_of(w1, t_sigma);
        if (!u.is_zero()) {
            s1.first = std::min(s1.first, u.x_c - u.r);
            s1.second = std::max(s1.second, u.x_c + u.r);
        }
        return {s1, base_of(w2, t_sigma)};
    }

    void validate() const {
        const auto [s1, s2] = bases();
        if (!(s1.second < s2.first || s2.second < s1.first)) {
            throw PreconditionError("probe geometry: the double cones over the two bases overlap");
        }
        for (const auto& s : {s1, s2})
            if (s.first <= -x_half || s.second >= x_half)
                throw PreconditionError("probe geometry: base interval leaves the grid");
    }
};

struct ProbeLevel {
    double dx = 0.0;
    cplx c1;                       // <w1, f0[u]>
    double rw2_norm = 0.0;         // l2 norm of R w2 on the slab
    double residual = 0.0;         // min over (alpha, beta) at lambda
    double control_residual = 0.0; // same at lambda = 0
    double extended_residual = 0.0;  // family enlarged by f0[data of R+ w2]
    double scale = 0.0;            // |lambda c1| |w2|: the residual at alpha = beta = 0
    cplx alpha, beta;

    double relative() const { return scale > 0.0 ? residual / scale : 0.0; }
    double extended_relative() const { return scale > 0.0 ? extended_residual / scale : 0.0; }
};

struct IllposednessCertificate {
    cplx lambda;
    bool conclusive = false;
    std::string reason;
    cplx c1;                       // finest level
    double rw2_norm = 0.0;         // finest level
    std::vector<ProbeLevel> levels;

    // smallest relative residual over the levels
    double c0() const {
        double m = levels.empty() ? 0.0 : levels.front().relative();
        for (const auto& l : levels) m = std::min(m, l.relative());
        return m;
    }
    // (max - min) / max of the relative residual over the levels.
    double spread() const {
        if (levels.empty()) return 0.0;
        double lo = levels.front().relative(), hi = lo;
        for (const auto& l : levels) {
            lo = std::min(lo, l.relative());
            hi = std::max(hi, l.relative());
        }
        return hi > 0.0 ? (hi - lo) / hi : 0.0;
    }
    double max_control_residual() const {
        double m = 0.0;
        for (const auto& l : levels) m = std::max(m, l.control_residual);
        return m;
    }
};

namespace detail {

// Stacked residual [(D + lambda W) f on the interior ; data(f)] with l2 weights
// sqrt(dt dx) and sqrt(dx), so norms converge under refinement.
inline Eigen::VectorXcd probe_vector(const OperatorSpec& spec, const KernelPotential& W, cplx lambda,
                                     const GridFunction& f, int js) {
    const auto& g = spec.grid;
    GridFunction e = apply_D(spec, f);
    if (lambda != cplx{0.0, 0.0}) e += lambda * apply_W(W, f);
    const auto d = extract_data(f, js);
    const int ni = (g.n_time - 2) * (g.n_space - 2);
    Eigen::VectorXcd v(ni + 2 * g.n_space);
    const double we = std::sqrt(g.dt * g.dx), wd = std::sqrt(g.dx);
    int i = 0;
    for (int j = 1; j < g.n_time - 1; ++j)
        for (int k = 1; k < g.n_space - 1; ++k) v[i++] = we * e.at(j, k);
    for (int k = 0; k < g.n_space; ++k) {
        v[i++] = wd * d.v0(k, 0);
        v[i++] = wd * d.v1(k, 0);
    }
    return v;
}

inline Eigen::VectorXcd probe_target(const CauchyData& u, const SpacetimeGrid& g) {
    const int ni = (g.n_time - 2) * (g.n_space - 2);
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(ni + 2 * g.n_space);
    const double wd = std::sqrt(g.dx);
    for (int k = 0; k < g.n_space; ++k) {
        v[ni + 2 * k] = wd * u.v0(k, 0);
        v[ni + 2 * k + 1] = wd * u.v1(k, 0);
    }
    return v;
}

// min_x |r0 + A x| by least squares; returns the minimum and the minimiser.
inline double least_squares_min(const Eigen::VectorXcd& r0, const Eigen::MatrixXcd& A, Eigen::VectorXcd* x) {
    const Eigen::VectorXcd sol = A.colPivHouseholderQr().solve(-r0);
    if (x) *x = sol;
    return (r0 + A * sol).norm();
}

}  // namespace detail

/// Searches f = f0[u] + alpha R+ w2 + beta R- w2 for a solution of
/// (D + lambda W) f = 0 with data u, at each grid spacing in `levels`.
inline IllposednessCertificate nonexistence_probe(const ProbeGeometry& geo, cplx lambda,
                                                  const std::vector<double>& levels) {
    if (lambda == cplx{0.0, 0.0}) throw PreconditionError("nonexistence probe needs lambda != 0");
    if (levels.empty()) throw PreconditionError("nonexistence probe needs at least one refinement level");
    geo.validate();
    IllposednessCertificate cert;
    cert.lambda = lambda;
    cert.conclusive = true;
    for (double dx : levels) {
        const auto g = geo.grid(dx);
        const auto spec = wave_operator(g, geo.mass_squared);
        const GreenOperator G(spec);
        const int js = g.time_index(geo.t_sigma);
        const auto w1 = geo.w1.sample(g);
        const auto w2 = geo.w2.sample(g);
        const auto u = geo.u.sample(g, js);
        const auto f0 = free_solution_from_data(spec, u);

        ProbeLevel lv;
        lv.dx = dx;
        lv.c1 = inner_product(w1, f0);
        const auto rp = G.retarded(w2);
        const auto rm = G.advanced(w2);
        lv.rw2_norm = l2_norm(rp - rm);
        cert.c1 = lv.c1;
        cert.rw2_norm = lv.rw2_norm;
        if (geo.u.is_zero() || lv.c1 == cplx{0.0, 0.0}) {
            cert.conclusive = false;
            cert.reason = "c1 = <w1, f0[u]> vanishes";
        } else if (lv.rw2_norm == 0.0) {
            cert.conclusive = false;
            cert.reason = "R w2 vanishes";
        }
        if (!cert.conclusive) {
            cert.levels.push_back(lv);
            return cert;
        }

        lv.scale = std::abs(lambda * lv.c1) * l2_norm(w2);
        const auto W = KernelPotential::rank_one(w1, w2);
        const auto target = detail::probe_target(u, g);
        for (cplx lam : {lambda, cplx{0.0, 0.0}}) {
            const Eigen::VectorXcd r0 = detail::probe_vector(spec, W, lam, f0, js) - target;
            Eigen::MatrixXcd A(r0.size(), 2);
            A.col(0) = detail::probe_vector(spec, W, lam, rp, js);
            A.col(1) = detail::probe_vector(spec, W, lam, rm, js);
            Eigen::VectorXcd x;
            const double m = detail::least_squares_min(r0, A, &x);
            if (lam == cplx{0.0, 0.0}) {
                lv.control_residual = m;
            } else {
                lv.residual = m;
                lv.alpha = x[0];
                lv.beta = x[1];
                // Enlarged family: the free solution carrying the data of R+ w2.
                const auto fd = free_solution_from_data(spec, extract_data(rp, js));
                Eigen::MatrixXcd B(r0.size(), 3);
                B.leftCols(2) = A;
                B.col(2) = detail::probe_vector(spec, W, lam, fd, js);
                lv.extended_residual = detail::least_squares_min(r0, B, nullptr);
            }
        }
        cert.levels.push_back(lv);
    }
    return cert;
}

}  // namespace ncwave
