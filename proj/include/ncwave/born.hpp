#pragma once

// Green operators of D + lambda W.
//
//   series:   R_lambda f = sum_{k=0..M} (-lambda R W)^k R f, valid for
//             |lambda| rho(R W) < 1 (enforced with factor 0.95);
//   exact:    W = sum_i <w1_i, .> w2_i of finite rank. With
//             M_ij = <w1_i, R w2_j>, b_i = <w1_i, R f> and (I + lambda M) c = b,
//             u = R f - lambda sum_i c_i R w2_i.
// The exact path continues the series to every lambda with
// det(I + lambda M) != 0; its zeros are the poles lambda = -1/mu(M).

#include <array>
#include <complex>
#include <random>

#include <Eigen/Dense>

#include "ncwave/green.hpp"
#include "ncwave/kernels.hpp"

namespace ncwave {

enum class BornMethod { series, finite_rank_exact };

inline const char* to_string(BornMethod m) { return m == BornMethod::series ? "series" : "finite-rank-exact"; }

struct BornDiagnostics {
    BornMethod method = BornMethod::series;
    double spectral_radius = 0.0;     // rho(R W) estimate (series only)
    std::vector<double> term_norms;   // sup norm of each series term
    int orders_used = 0;
    bool early_stop = false;
    double residual = 0.0;            // interior sup |(D + lambda W) u - f| / sup |f|
    cplx determinant{1.0, 0.0};       // det(I + lambda M) (exact only)

    /// Successive term ratios from order 3 on stay below |lambda| rho * 1.1.
    bool geometric_decay(cplx lambda) const {
        const double bound = std::abs(lambda) * spectral_radius * 1.1;
        for (std::size_t k = 3; k < term_norms.size(); ++k) {
            if (term_norms[k - 1] == 0.0) continue;
            if (term_norms[k] / term_norms[k - 1] > bound) return false;
        }
        return true;
    }
};

struct BornResult {
    GridFunction u;
    BornDiagnostics diagnostics;
};

struct KrylovSettings {
    int max_dim = 60;
    double tol = 1e-10;
    std::uint64_t seed = 1;
};

namespace detail {

// v -> W R^dir v on the coordinates of the support box K.
inline Eigen::VectorXcd kernel_green_apply(const GreenOperator& G, const KernelPotential& W, Direction dir,
                                           const Eigen::VectorXcd& v) {
    return W.gather(apply_W(W, G.apply(dir, W.scatter(v))));
}

}  // namespace detail

/// Spectral radius of R^dir W (= that of W R^dir on functions over K) from
/// the Ritz values of an Arnoldi factorization with full reorthogonalization.
inline double estimate_spectral_radius(const GreenOperator& G, const KernelPotential& W, Direction dir,
                                       const KrylovSettings& s = {}) {
    require_same_grid(G.grid(), W.grid(), "estimate_spectral_radius");
    if (W.support_box().empty() || W.is_zero()) return 0.0;
    const Eigen::Index n = W.box_dim();
    const int m_max = static_cast<int>(std::min<Eigen::Index>(s.max_dim, n));
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd Q = Eigen::MatrixXcd::Zero(n, m_max + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m_max + 1, m_max);
    Eigen::VectorXcd q(n);
    for (Eigen::Index i = 0; i < n; ++i) q[i] = {nd(rng), nd(rng)};
    Q.col(0) = q / q.norm();
    double last = -1.0;
    int stable = 0;
    for (int k = 0; k < m_max; ++k) {
        Eigen::VectorXcd w = detail::kernel_green_apply(G, W, dir, Q.col(k));
        const double wn = w.norm();
        for (int pass = 0; pass < 2; ++pass) {
            for (int i = 0; i <= k; ++i) {
                const cplx h = Q.col(i).dot(w);
                H(i, k) += h;
                w -= h * Q.col(i);
            }
        }
        const double beta = w.norm();
        H(k + 1, k) = beta;
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H.topLeftCorner(k + 1, k + 1), false);
        const double rho = es.eigenvalues().cwiseAbs().maxCoeff();
        // invariant subspace found: Ritz values are exact
        if (beta <= 1e-13 * std::max(wn, 1e-300) || wn == 0.0) return rho;
        if (last >= 0.0 && std::abs(rho - last) <= s.tol * std::max(rho, 1e-300)) {
            if (++stable >= 3) return rho;
        } else {
            stable = 0;
        }
        last = rho;
        Q.col(k + 1) = w / beta;
    }
    if (m_max == n) return last;
    throw ConvergenceError("spectral radius estimate did not settle", std::abs(last));
}

/// Operator norm of f -> 1_slab R^dir W 1_slab f on the time slab
/// [center - tau, center + tau].
struct NormEstimator {
    double tau = 1.0;
    double center = 0.0;
    int max_iters = 500;
    double tol = 1e-10;
    std::uint64_t seed = 1;
};

struct NormEstimate {
    double norm = 0.0;
    double spectral_radius = 0.0;
    int iterations = 0;
};

namespace detail {

inline void restrict_rows(GridFunction& f, int j0, int j1) {
    const auto& g = f.grid();
    for (int j = 0; j < g.n_time; ++j)
        if (j < j0 || j > j1)
            for (auto& v : f.row(j)) v = 0.0;
}

}  // namespace detail

inline NormEstimate estimate_operator_norm(const NormEstimator& E, const GreenOperator& G, const KernelPotential& W,
                                           Direction dir) {
    const auto& g = G.grid();
    require_same_grid(g, W.grid(), "estimate_operator_norm");
    const double lo = E.center - E.tau, hi = E.center + E.tau;
    if (!(E.tau > 0.0) || lo < g.t0 - 1e-12 || hi > g.t_end() + 1e-12) {
        throw PreconditionError("norm slab must lie inside the grid");
    }
    const int j0 = g.time_index(lo), j1 = g.time_index(hi);
    const IndexBox& K = W.support_box();
    if (!K.empty() && (K.j0 < j0 || K.j1 > j1)) throw PreconditionError("norm slab must contain K");
    NormEstimate out;
    if (K.empty() || W.is_zero()) return out;
    out.spectral_radius = estimate_spectral_radius(G, W, dir, {60, 1e-10, E.seed});

    // Power iteration on A^* A; A^* = 1_slab W^* (R^dir)^* 1_slab. Only the
    // values of v on K matter for A, so iterate on the K coordinates.
    const auto Ws = adjoint_W(W);
    auto A = [&](const GridFunction& f) {
        GridFunction u = G.apply(dir, apply_W(W, f));
        detail::restrict_rows(u, j0, j1);
        return u;
    };
    auto As = [&](const GridFunction& h) { return apply_W(Ws, G.apply_adjoint(dir, h)); };
    std::mt19937_64 rng(E.seed);
    std::normal_distribution<double> nd;
    Eigen::VectorXcd v(W.box_dim());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = {nd(rng), nd(rng)};
    GridFunction f = W.scatter(v);
    f *= 1.0 / l2_norm(f);
    double sigma = 0.0;
    for (int it = 1; it <= E.max_iters; ++it) {
        const GridFunction Af = A(f);
        const double s = l2_norm(Af);
        out.iterations = it;
        if (s == 0.0) {
            out.norm = 0.0;
            return out;
        }
        GridFunction next = As(Af);
        const double nn = l2_norm(next);
        next *= 1.0 / nn;
        f = std::move(next);
        if (it > 1 && std::abs(s - sigma) <= E.tol * s) {
            out.norm = s;
            return out;
        }
        sigma = s;
    }
    throw ConvergenceError("operator norm power iteration did not converge", sigma);
}

/// Exact resolvent data for a finite-rank W in one direction.
class FiniteRankResolvent {
public:
    FiniteRankResolvent(const GreenOperator& G, const KernelPotential& W, Direction dir)
        : G_(&G), dir_(dir) {
        if (!W.is_finite_rank()) throw PreconditionError("finite-rank resolvent needs a finite-rank kernel");
        require_same_grid(G.grid(), W.grid(), "FiniteRankResolvent");
        for (const auto& [w1, w2] : W.finite().pairs) {
            w1_.push_back(w1);
            Rw2_.push_back(G.apply(dir, w2));
        }
        const auto r = static_cast<Eigen::Index>(w1_.size());
        M_.resize(r, r);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < r; ++j) M_(i, j) = inner_product(w1_[i], Rw2_[j]);
    }

    const Eigen::MatrixXcd& M() const { return M_; }
    Direction direction() const { return dir_; }

    cplx determinant(cplx lambda) const {
        if (M_.size() == 0) return 1.0;
        return (Eigen::MatrixXcd::Identity(M_.rows(), M_.cols()) + lambda * M_).determinant();
    }

    // d/dlambda det(I + lambda M) = det * tr((I + lambda M)^{-1} M)
    cplx determinant_derivative(cplx lambda) const {
        if (M_.size() == 0) return 0.0;
        const Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(M_.rows(), M_.cols()) + lambda * M_;
        return A.determinant() * A.partialPivLu().solve(M_).trace();
    }

    /// Poles: lambda = -1/mu for the nonzero eigenvalues mu of M.
    std::vector<cplx> poles() const {
        std::vector<cplx> out;
        if (M_.size() == 0) return out;
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M_, false);
        const double scale = M_.cwiseAbs().maxCoeff();
        for (const auto& mu : es.eigenvalues())
            if (std::abs(mu) > 1e-14 * scale) out.push_back(-1.0 / mu);
        return out;
    }

    BornResult apply(cplx lambda, const GridFunction& f) const {
        BornResult res;
        res.diagnostics.method = BornMethod::finite_rank_exact;
        res.u = G_->apply(dir_, f);
        const auto r = M_.rows();
        if (r == 0 || lambda == cplx{0.0, 0.0}) return res;
        Eigen::VectorXcd b(r);
        for (Eigen::Index i = 0; i < r; ++i) b[i] = inner_product(w1_[i], res.u);
        const Eigen::MatrixXcd A = Eigen::MatrixXcd::Identity(r, r) + lambda * M_;
        const auto lu = A.fullPivLu();
        const cplx det = A.determinant();
        res.diagnostics.determinant = det;
        // Relative singularity test: smallest pivot against the matrix scale.
        const double pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
        const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
        if (pivot <= 1e-13 * scale) {
            throw PoleError("finite-rank resolvent: lambda is a pole (I + lambda M singular)", std::abs(det));
        }
        const Eigen::VectorXcd c = lu.solve(b);
        for (Eigen::Index i = 0; i < r; ++i) res.u.axpy(-lambda * c[i], Rw2_[i]);
        return res;
    }

private:
    const GreenOperator* G_;
    Direction dir_;
    std::vector<GridFunction> w1_, Rw2_;
    Eigen::MatrixXcd M_;
};

/// R^+-_lambda for a fixed base Green operator, kernel and coupling.
class PerturbedGreen {
public:
    static constexpr double kSafety = 0.95;

    PerturbedGreen(GreenOperator base, KernelPotential W, cplx lambda, BornMethod method = BornMethod::series,
                   int order = 24)
        : base_(std::move(base)), W_(std::move(W)), lambda_(lambda), method_(method), order_(order) {
        require_same_grid(base_.grid(), W_.grid(), "PerturbedGreen");
        if (order_ < 0) throw PreconditionError("truncation order must be non-negative");
        if (method_ == BornMethod::finite_rank_exact) {
            exact_.emplace_back(base_, W_, Direction::retarded);
            exact_.emplace_back(base_, W_, Direction::advanced);
        }
    }

    // The resolvents hold a pointer to base_, so copies must rebuild them.
    PerturbedGreen(const PerturbedGreen& o)
        : PerturbedGreen(o.base_, o.W_, o.lambda_, o.method_, o.order_) {
        rho_ = o.rho_;
    }
    PerturbedGreen& operator=(const PerturbedGreen&) = delete;

    const GreenOperator& base() const { return base_; }
    const KernelPotential& kernel() const { return W_; }
    cplx lambda() const { return lambda_; }
    BornMethod method() const { return method_; }
    int order() const { return order_; }

    double spectral_radius(Direction dir) const {
        auto& slot = rho_[dir == Direction::retarded ? 0 : 1];
        if (slot < 0.0) slot = estimate_spectral_radius(base_, W_, dir);
        return slot;
    }

    const FiniteRankResolvent& resolvent(Direction dir) const {
        if (exact_.empty()) throw PreconditionError("resolvent requested for series method");
        return exact_[dir == Direction::retarded ? 0 : 1];
    }

    BornResult apply_with_diagnostics(Direction dir, const GridFunction& f) const {
        BornResult res;
        if (method_ == BornMethod::finite_rank_exact) {
            res = resolvent(dir).apply(lambda_, f);
        } else {
            res.diagnostics.method = BornMethod::series;
            res.u = base_.apply(dir, f);
            res.diagnostics.term_norms.push_back(sup_norm(res.u));
            if (lambda_ != cplx{0.0, 0.0} && !W_.is_zero()) {
                const double rho = spectral_radius(dir);
                res.diagnostics.spectral_radius = rho;
                if (std::abs(lambda_) * rho >= kSafety) {
                    throw DivergenceError("Born series outside its convergence regime: |lambda| rho = " +
                                          std::to_string(std::abs(lambda_) * rho));
                }
                GridFunction term = res.u;
                for (int k = 1; k <= order_; ++k) {
                    term = base_.apply(dir, apply_W(W_, term));
                    term *= -lambda_;
                    const double tn = sup_norm(term);
                    res.diagnostics.term_norms.push_back(tn);
                    res.u += term;
                    res.diagnostics.orders_used = k;
                    if (tn < 1e-14 * sup_norm(res.u)) {
                        res.diagnostics.early_stop = true;
                        break;
                    }
                }
                if (!res.u.all_finite()) throw DivergenceError("Born series produced non-finite values");
            }
        }
        res.diagnostics.residual = residual(res.u, f);
        return res;
    }

    GridFunction apply(Direction dir, const GridFunction& f) const { return apply_with_diagnostics(dir, f).u; }

    /// interior sup |(D + lambda W) u - f| / sup |f|
    double residual(const GridFunction& u, const GridFunction& f) const {
        GridFunction r = apply_D(base_.spec(), u);
        r.axpy(lambda_, apply_W(W_, u));
        r -= f;
        const double s = sup_norm(f);
        return mask_sup_norm(r, interior_mask(u.grid(), interior_margin(base_.spec()) + 1)) / (s > 0.0 ? s : 1.0);
    }

private:
    GreenOperator base_;
    KernelPotential W_;
    cplx lambda_;
    BornMethod method_;
    int order_;
    std::vector<FiniteRankResolvent> exact_;
    mutable std::array<double, 2> rho_{-1.0, -1.0};
};

inline BornResult apply_perturbed(const PerturbedGreen& P, Direction dir, const GridFunction& f) {
    return P.apply_with_diagnostics(dir, f);
}

inline GridFunction finite_rank_resolvent(const GreenOperator& G, const KernelPotential& W, Direction dir,
                                          cplx lambda, const GridFunction& f) {
    return FiniteRankResolvent(G, W, dir).apply(lambda, f).u;
}

/// One-cell-inflated J(supp f) u J(K): outside it R_lambda f vanishes.
inline RegionMask perturbed_support_bound(const GridFunction& f, const KernelPotential& W, Direction dir) {
    RegionMask seed = support(f);
    if (!W.support_box().empty()) seed = seed | box_mask(f.grid(), W.support_box());
    return inflate(causal_cone(seed, cone_of(dir)), 1);
}

/// Sup norms of the Born terms (-lambda R W)^k R f for k = 0..order, with no
/// regime guard: used to watch the series blow up past the first pole.
inline std::vector<double> series_term_norms(const GreenOperator& G, const KernelPotential& W, Direction dir,
                                             cplx lambda, const GridFunction& f, int order) {
    if (order < 0) throw PreconditionError("truncation order must be non-negative");
    std::vector<double> out;
    GridFunction term = G.apply(dir, f);
    out.push_back(sup_norm(term));
    for (int k = 1; k <= order; ++k) {
        term = G.apply(dir, apply_W(W, term));
        term *= -lambda;
        out.push_back(sup_norm(term));
    }
    return out;
}

// ---- pole scan ----------------------------------------------------------

struct LambdaGrid {
    double re_min = -1.0, re_max = 1.0;
    double im_min = -1.0, im_max = 1.0;
    int n_re = 41, n_im = 41;

    cplx at(int i, int l) const {
        const double re = n_re > 1 ? re_min + (re_max - re_min) * i / (n_re - 1) : re_min;
        const double im = n_im > 1 ? im_min + (im_max - im_min) * l / (n_im - 1) : im_min;
        return {re, im};
    }
};

struct DeterminantSample {
    cplx lambda;
    cplx det;
};

struct PoleScanResult {
    std::vector<DeterminantSample> samples;  // row-major over (re, im)
    std::vector<cplx> poles;
};

/// Zeros of det(I + lambda M) inside the lambda grid: local minima of |det|
/// over the grid are polished by Newton's method and deduplicated.
inline PoleScanResult pole_scan(const FiniteRankResolvent& R, const LambdaGrid& grid) {
    if (grid.n_re < 1 || grid.n_im < 1) throw PreconditionError("lambda grid must be non-empty");
    PoleScanResult out;
    std::vector<double> mag(static_cast<std::size_t>(grid.n_re) * grid.n_im);
    for (int i = 0; i < grid.n_re; ++i)
        for (int l = 0; l < grid.n_im; ++l) {
            const cplx lam = grid.at(i, l);
            const cplx d = R.determinant(lam);
            out.samples.push_back({lam, d});
            mag[static_cast<std::size_t>(i) * grid.n_im + l] = std::abs(d);
        }
    if (R.M().size() == 0) return out;
    const double dre = grid.n_re > 1 ? (grid.re_max - grid.re_min) / (grid.n_re - 1) : 0.0;
    const double dim = grid.n_im > 1 ? (grid.im_max - grid.im_min) / (grid.n_im - 1) : 0.0;
    auto inside = [&](cplx z) {
        return z.real() >= grid.re_min - dre && z.real() <= grid.re_max + dre && z.imag() >= grid.im_min - dim &&
               z.imag() <= grid.im_max + dim;
    };
    for (int i = 0; i < grid.n_re; ++i)
        for (int l = 0; l < grid.n_im; ++l) {
            const double m0 = mag[static_cast<std::size_t>(i) * grid.n_im + l];
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dl = -1; dl <= 1; ++dl) {
                    if (di == 0 && dl == 0) continue;
                    const int ii = i + di, ll = l + dl;
                    if (ii < 0 || ll < 0 || ii >= grid.n_re || ll >= grid.n_im) continue;
                    if (mag[static_cast<std::size_t>(ii) * grid.n_im + ll] < m0) {
                        is_min = false;
                        break;
                    }
                }
            if (!is_min) continue;
            cplx z = grid.at(i, l);
            bool converged = false;
            for (int it = 0; it < 100; ++it) {
                const cplx d = R.determinant(z);
                const cplx dd = R.determinant_derivative(z);
                if (d == cplx{0.0, 0.0}) {
                    converged = true;
                    break;
                }
                if (dd == cplx{0.0, 0.0}) break;
                const cplx step = d / dd;
                z -= step;
                if (std::abs(step) <= 1e-14 * std::max(1.0, std::abs(z))) {
                    converged = true;
                    break;
                }
            }
            if (!converged || !inside(z)) continue;
            bool dup = false;
            for (const auto& p : out.poles) dup = dup || std::abs(p - z) <= 1e-8 * std::max(1.0, std::abs(z));
            if (!dup) out.poles.push_back(z);
        }
    return out;
}

inline PoleScanResult pole_scan(const GreenOperator& G, const KernelPotential& W, Direction dir,
                                const LambdaGrid& grid) {
    return pole_scan(FiniteRankResolvent(G, W, dir), grid);
}

}  // namespace ncwave
