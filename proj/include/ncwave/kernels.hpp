#pragma once

// Smooth compactly supported kernel operators
//   (W f)(x) = sum_y w(x, y) f(y) dt dx
// in two storage forms: a finite list of rank-one pairs
//   W f = sum_i <w1_i, f> w2_i
// and a dense matrix over the points of a support box K (optionally diagonal).
// Dense index order inside K is ((j - j0) * n_space(K) + (k - k0)) * N + a.

#include <functional>
#include <optional>
#include <variant>

#include <Eigen/Dense>

#include "ncwave/lattice.hpp"
#include "ncwave/profiles.hpp"

namespace ncwave {

struct FiniteRankKernel {
    std::vector<std::pair<GridFunction, GridFunction>> pairs;
};

struct DenseKernel {
    Eigen::MatrixXcd w;         // full kernel, or empty when diagonal
    Eigen::VectorXcd diagonal;  // w(x, x) for pointwise kernels
    bool is_diagonal() const { return w.size() == 0; }
};

class KernelPotential {
public:
    KernelPotential() = default;

    static KernelPotential finite_rank(const SpacetimeGrid& g,
                                       std::vector<std::pair<GridFunction, GridFunction>> pairs,
                                       std::optional<IndexBox> declared = std::nullopt) {
        KernelPotential W;
        W.grid_ = g;
        IndexBox hull;
        for (const auto& [w1, w2] : pairs) {
            require_same_grid(g, w1.grid(), "KernelPotential pair");
            require_same_grid(g, w2.grid(), "KernelPotential pair");
            if (!w1.all_finite() || !w2.all_finite()) throw PreconditionError("kernel pair is not finite");
            hull = hull.hull(support(w1).bounding_box()).hull(support(w2).bounding_box());
        }
        if (declared) {
            if (!declared->contains(hull)) throw PreconditionError("kernel pair vanishes outside K violated");
            W.box_ = *declared;
        } else {
            W.box_ = hull;
        }
        W.check_box();
        W.data_ = FiniteRankKernel{std::move(pairs)};
        return W;
    }

    static KernelPotential rank_one(const GridFunction& w1, const GridFunction& w2) {
        return finite_rank(w1.grid(), {{w1, w2}});
    }

    static KernelPotential zero(const SpacetimeGrid& g) { return finite_rank(g, {}); }

    static KernelPotential dense(const SpacetimeGrid& g, const IndexBox& K, Eigen::MatrixXcd w) {
        KernelPotential W;
        W.grid_ = g;
        W.box_ = K;
        W.check_box();
        const auto n = static_cast<Eigen::Index>(K.points() * g.components);
        if (w.rows() != n || w.cols() != n) throw GridError("dense kernel size does not match K");
        if (!w.allFinite()) throw PreconditionError("dense kernel is not finite");
        W.data_ = DenseKernel{std::move(w), {}};
        return W;
    }

    static KernelPotential diagonal(const SpacetimeGrid& g, const IndexBox& K, Eigen::VectorXcd d) {
        KernelPotential W;
        W.grid_ = g;
        W.box_ = K;
        W.check_box();
        if (d.size() != static_cast<Eigen::Index>(K.points() * g.components)) {
            throw GridError("diagonal kernel size does not match K");
        }
        if (!d.allFinite()) throw PreconditionError("diagonal kernel is not finite");
        W.data_ = DenseKernel{{}, std::move(d)};
        return W;
    }

    const SpacetimeGrid& grid() const { return grid_; }
    const IndexBox& support_box() const { return box_; }
    bool is_finite_rank() const { return std::holds_alternative<FiniteRankKernel>(data_); }
    const FiniteRankKernel& finite() const { return std::get<FiniteRankKernel>(data_); }
    const DenseKernel& dense_data() const { return std::get<DenseKernel>(data_); }
    std::size_t rank() const { return is_finite_rank() ? finite().pairs.size() : 0; }

    bool is_zero() const {
        if (is_finite_rank()) {
            for (const auto& [w1, w2] : finite().pairs)
                if (!w1.is_zero() && !w2.is_zero()) return false;
            return true;
        }
        const auto& d = dense_data();
        return d.is_diagonal() ? d.diagonal.isZero(0.0) : d.w.isZero(0.0);
    }

    // Dimension of the K-restricted vector space.
    Eigen::Index box_dim() const { return static_cast<Eigen::Index>(box_.points() * grid_.components); }

    Eigen::VectorXcd gather(const GridFunction& f) const {
        Eigen::VectorXcd v(box_dim());
        Eigen::Index i = 0;
        for (int j = box_.j0; j <= box_.j1; ++j)
            for (int k = box_.k0; k <= box_.k1; ++k)
                for (const auto& x : f.point(j, k)) v[i++] = x;
        return v;
    }

    GridFunction scatter(const Eigen::VectorXcd& v) const {
        GridFunction f(grid_);
        Eigen::Index i = 0;
        for (int j = box_.j0; j <= box_.j1; ++j)
            for (int k = box_.k0; k <= box_.k1; ++k)
                for (auto& x : f.point(j, k)) x = v[i++];
        return f;
    }

    /// Same abstract kernel in dense storage: w(x, y) = sum_i w2_i(x) conj(w1_i(y)).
    KernelPotential to_dense() const {
        if (!is_finite_rank()) return *this;
        Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(box_dim(), box_dim());
        for (const auto& [w1, w2] : finite().pairs) w += gather(w2) * gather(w1).adjoint();
        return dense(grid_, box_, std::move(w));
    }

    KernelPotential scaled(cplx s) const {
        KernelPotential W = *this;
        if (W.is_finite_rank()) {
            for (auto& p : std::get<FiniteRankKernel>(W.data_).pairs) p.second *= s;
        } else {
            auto& d = std::get<DenseKernel>(W.data_);
            d.w *= s;
            d.diagonal *= s;
        }
        return W;
    }

private:
    void check_box() const {
        if (box_.empty()) return;
        if (box_.j0 < 1 || box_.k0 < 1 || box_.j1 > grid_.n_time - 2 || box_.k1 > grid_.n_space - 2) {
            throw PreconditionError("kernel support box K must be strictly interior to the grid");
        }
    }

    SpacetimeGrid grid_{};
    IndexBox box_{};
    std::variant<FiniteRankKernel, DenseKernel> data_;
};

inline GridFunction apply_W(const KernelPotential& W, const GridFunction& f) {
    require_same_grid(W.grid(), f.grid(), "apply_W");
    if (W.is_finite_rank()) {
        GridFunction out(f.grid());
        for (const auto& [w1, w2] : W.finite().pairs) out.axpy(inner_product(w1, f), w2);
        return out;
    }
    if (W.support_box().empty()) return GridFunction(f.grid());
    const auto& d = W.dense_data();
    const double cell = f.grid().cell();
    const Eigen::VectorXcd v = W.gather(f);
    if (d.is_diagonal()) return W.scatter(d.diagonal.cwiseProduct(v) * cell);
    return W.scatter(d.w * v * cell);
}

/// Kernel of the Hilbert-space adjoint: w*(x, y) = w(y, x)^dagger.
inline KernelPotential adjoint_W(const KernelPotential& W) {
    if (W.is_finite_rank()) {
        std::vector<std::pair<GridFunction, GridFunction>> swapped;
        for (const auto& [w1, w2] : W.finite().pairs) swapped.emplace_back(w2, w1);
        return KernelPotential::finite_rank(W.grid(), std::move(swapped), W.support_box());
    }
    const auto& d = W.dense_data();
    if (d.is_diagonal()) return KernelPotential::diagonal(W.grid(), W.support_box(), d.diagonal.conjugate());
    return KernelPotential::dense(W.grid(), W.support_box(), d.w.adjoint());
}

/// Multiplication by a(x) (componentwise) as a diagonal kernel with weight a / (dt dx).
inline KernelPotential pointwise_kernel(const GridFunction& a) {
    const auto& g = a.grid();
    const IndexBox K = support(a).bounding_box();
    if (K.empty()) return KernelPotential::zero(g);
    Eigen::VectorXcd d(static_cast<Eigen::Index>(K.points() * g.components));
    Eigen::Index i = 0;
    for (int j = K.j0; j <= K.j1; ++j)
        for (int k = K.k0; k <= K.k1; ++k)
            for (const auto& x : a.point(j, k)) d[i++] = x / g.cell();
    return KernelPotential::diagonal(g, K, std::move(d));
}

struct MoyalOptions {
    double resolution_tol = 1e-6;  // relative kernel change allowed when dq is halved
    int max_refinements = 8;
};

/// Symbol a(t, x) of the Moyal multiplication, evaluated off-lattice for the
/// q-quadrature, with a rectangle containing its support.
struct MoyalSymbol {
    std::function<cplx(double, double)> a;
    double t_lo = 0.0, t_hi = 0.0, x_lo = 0.0, x_hi = 0.0;

    static MoyalSymbol from_bump(const BumpProfile& b) {
        return {[b](double t, double x) { return b.value(t, x, 0); }, b.t_c - b.r_t, b.t_c + b.r_t,
                b.x_c - b.r_x, b.x_c + b.r_x};
    }
    GridFunction sample(const SpacetimeGrid& g) const {
        return GridFunction::sample(g, [&](double t, double x, int) { return a(t, x); });
    }
};

namespace detail {

// A(p) = int exp(-2 pi i q.p) a(q) dq by the rectangle rule with steps
// (ht, hx) on nodes centered in the support rectangle. Returned as a matrix
// indexed (dl + nd_x, di + nd_t) for p = (dl dx, -di dt) / theta.
inline Eigen::MatrixXcd moyal_symbol_table(const MoyalSymbol& s, const SpacetimeGrid& g, int nd_t, int nd_x,
                                           double theta, double ht, double hx) {
    const int mt = static_cast<int>(std::ceil((s.t_hi - s.t_lo) / ht / 2.0));
    const int mx = static_cast<int>(std::ceil((s.x_hi - s.x_lo) / hx / 2.0));
    const double tc = 0.5 * (s.t_lo + s.t_hi), xc = 0.5 * (s.x_lo + s.x_hi);
    Eigen::MatrixXcd a(2 * mt + 1, 2 * mx + 1);
    for (int i = -mt; i <= mt; ++i)
        for (int l = -mx; l <= mx; ++l) a(i + mt, l + mx) = s.a(tc + i * ht, xc + l * hx);
    Eigen::MatrixXcd et(2 * nd_x + 1, 2 * mt + 1), ex(2 * mx + 1, 2 * nd_t + 1);
    for (int dl = -nd_x; dl <= nd_x; ++dl)
        for (int i = -mt; i <= mt; ++i)
            et(dl + nd_x, i + mt) = std::polar(1.0, -2.0 * M_PI * (tc + i * ht) * (dl * g.dx / theta));
    for (int l = -mx; l <= mx; ++l)
        for (int di = -nd_t; di <= nd_t; ++di)
            ex(l + mx, di + nd_t) = std::polar(1.0, -2.0 * M_PI * (xc + l * hx) * (-di * g.dt / theta));
    return et * a * ex * (ht * hx);
}

}  // namespace detail

/// Dense approximant of f -> a * f (Moyal product in 1+1 dimensions with
/// theta = theta0 [[0, 1], [-1, 0]]):
///   w(x, y) = |det theta|^{-1} int dq exp(2 pi i theta^{-1}(x - q).(x - y)) a(q)  chi(x) chi(y)
/// Since x.theta^{-T}x = 0 this factors into exp(-2 pi i x.theta^{-T}y) times
/// the Fourier transform of a at theta^{-T}(x - y), which only depends on the
/// lattice difference x - y. The q-step is halved from the grid spacing until
/// the transform changes by less than the resolution tolerance. The scalar
/// symbol acts on every component.
inline KernelPotential moyal_kernel(const SpacetimeGrid& g, const MoyalSymbol& sym, double theta0,
                                    const SmoothBox& cutoff, const MoyalOptions& opt = {}) {
    if (theta0 == 0.0 || !std::isfinite(theta0)) {
        throw PreconditionError("moyal_kernel: theta0 must be nonzero (use pointwise_kernel)");
    }
    if (cutoff.t_c - cutoff.outer_t < g.t(1) || cutoff.t_c + cutoff.outer_t > g.t(g.n_time - 2) ||
        cutoff.x_c - cutoff.outer_x < g.x(1) || cutoff.x_c + cutoff.outer_x > g.x(g.n_space - 2)) {
        throw PreconditionError("moyal_kernel: cutoff box exceeds the grid interior");
    }
    const IndexBox K = cutoff.support_box(g);
    if (K.empty() || !sym.a) return KernelPotential::zero(g);

    const int nd_t = K.n_time() - 1, nd_x = K.n_space() - 1;
    double ht = g.dt, hx = g.dx;
    Eigen::MatrixXcd table = detail::moyal_symbol_table(sym, g, nd_t, nd_x, theta0, ht, hx);
    for (int level = 0;; ++level) {
        if (level == opt.max_refinements) {
            throw PreconditionError("moyal_kernel: q-quadrature not resolved after refinement");
        }
        ht /= 2.0;
        hx /= 2.0;
        Eigen::MatrixXcd finer = detail::moyal_symbol_table(sym, g, nd_t, nd_x, theta0, ht, hx);
        const double scale = finer.cwiseAbs().maxCoeff();
        const double change = (finer - table).cwiseAbs().maxCoeff();
        table = std::move(finer);
        if (scale == 0.0) return KernelPotential::zero(g);
        if (change <= opt.resolution_tol * scale) break;
    }

    const int n = g.components;
    const double inv_det = 1.0 / (theta0 * theta0);
    const Eigen::Index dim = static_cast<Eigen::Index>(K.points() * n);
    Eigen::MatrixXcd w = Eigen::MatrixXcd::Zero(dim, dim);
    std::vector<double> chi(K.points());
    for (int j = K.j0; j <= K.j1; ++j)
        for (int k = K.k0; k <= K.k1; ++k)
            chi[static_cast<std::size_t>(j - K.j0) * K.n_space() + (k - K.k0)] = cutoff(g.t(j), g.x(k));
    for (int jx = K.j0; jx <= K.j1; ++jx)
        for (int kx = K.k0; kx <= K.k1; ++kx) {
            const std::size_t px = static_cast<std::size_t>(jx - K.j0) * K.n_space() + (kx - K.k0);
            if (chi[px] == 0.0) continue;
            for (int jy = K.j0; jy <= K.j1; ++jy)
                for (int ky = K.k0; ky <= K.k1; ++ky) {
                    const std::size_t py = static_cast<std::size_t>(jy - K.j0) * K.n_space() + (ky - K.k0);
                    if (chi[py] == 0.0) continue;
                    // x.theta^{-T}y with theta^{-T} = (1/theta0) [[0, 1], [-1, 0]]
                    const double xty = (g.t(jx) * g.x(ky) - g.x(kx) * g.t(jy)) / theta0;
                    const cplx A = table(kx - ky + nd_x, jx - jy + nd_t);
                    const cplx v = inv_det * std::polar(1.0, -2.0 * M_PI * xty) * A * chi[px] * chi[py];
                    for (int c = 0; c < n; ++c) w(px * n + c, py * n + c) = v;
                }
        }
    return KernelPotential::dense(g, K, std::move(w));
}

}  // namespace ncwave
