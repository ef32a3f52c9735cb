#pragma once

// Moller operators by the smooth-cutoff construction, the scattering
// operator, its Born series and the derivative at lambda = 0.
//
// Sign bookkeeping with R = R+ - R-, chi_- = 1 in the past, chi_+ = 1 in the
// future (bands outside the slab, so chi_+- f vanishes on K):
//   Omega_+ f_l       =  R D(chi_+ f_l)
//   Omega_- f_l       = -R D(chi_- f_l)
//   Omega_-^{-1} f0   = -R_l D(chi_- f0)
//   Omega_+^{-1} f0   =  R_l D(chi_+ f0)
// and s_l = Omega_+ Omega_-^{-1} = 1 + l E W sum_k (-l R+ W)^k with E = R- - R+.

#include <array>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "ncwave/born.hpp"
#include "ncwave/cauchy.hpp"
#include "ncwave/diffops.hpp"
#include "ncwave/green.hpp"
#include "ncwave/kernels.hpp"
#include "ncwave/lattice.hpp"
#include "ncwave/profiles.hpp"

namespace ncwave {

struct ScatteringConfig {
    double tau_minus = -0.5;
    double tau_plus = 0.5;
    int band_steps = 10;        // width of each cutoff transition, in time steps
    cplx lambda{0.1, 0.0};      // default coupling for reports
    int order = 24;             // series truncation M
    BornMethod method = BornMethod::series;
    double input_tolerance = 1e-8;  // accepted residual of f_lambda in moller_plus
};

/// Base Green operator, kernel and slab, validated together.
class ScatteringSetup {
public:
    ScatteringSetup(const GreenOperator& G, KernelPotential W, ScatteringConfig cfg)
        : G_(G.with_check(BoundaryCheck::trace)), W_(std::move(W)), cfg_(cfg) {
        require_same_grid(G_.grid(), W_.grid(), "ScatteringSetup");
        const auto& g = G_.grid();
        if (!(cfg_.tau_minus < cfg_.tau_plus)) throw PreconditionError("scattering slab needs tau- < tau+");
        if (cfg_.band_steps < 2) throw PreconditionError("cutoff band must span at least two steps");
        if (cfg_.order < 0) throw PreconditionError("series order must be non-negative");
        const double delta = cfg_.band_steps * g.dt;
        if (cfg_.tau_minus - delta < g.t(2) || cfg_.tau_plus + delta > g.t(g.n_time - 3)) {
            throw PreconditionError("cutoff bands must lie inside the grid");
        }
        const auto K = W_.support_box();
        if (!K.empty() && !(g.t(K.j0) > cfg_.tau_minus && g.t(K.j1) < cfg_.tau_plus)) {
            throw PreconditionError("K must lie strictly inside the slab (tau-, tau+)");
        }
        chi_minus_ = time_step_profile(g, cfg_.tau_minus - delta, cfg_.tau_minus);
        for (auto& c : chi_minus_) c = 1.0 - c;
        chi_plus_ = time_step_profile(g, cfg_.tau_plus, cfg_.tau_plus + delta);
    }

    const GreenOperator& green() const { return G_; }
    const KernelPotential& kernel() const { return W_; }
    const ScatteringConfig& config() const { return cfg_; }
    const SpacetimeGrid& grid() const { return G_.grid(); }
    const std::vector<double>& chi_minus() const { return chi_minus_; }
    const std::vector<double>& chi_plus() const { return chi_plus_; }

    /// Last row below the lower band / first row above the upper band.
    int below_band_row() const { return first_change(chi_minus_) - 1; }
    int above_band_row() const { return last_change(chi_plus_) + 1; }

    /// D(chi f), kept on the rows where chi varies within the stencil.
    GridFunction band_source(const std::vector<double>& chi, const GridFunction& f) const {
        const auto& g = grid();
        GridFunction cf = f;
        for (int j = 0; j < g.n_time; ++j)
            for (auto& v : cf.row(j)) v *= chi[static_cast<std::size_t>(j)];
        GridFunction h = apply_D(G_.spec(), cf);
        const int lo = first_change(chi) - 1, hi = last_change(chi) + 1;
        for (int j = 0; j < g.n_time; ++j)
            if (j < lo || j > hi)
                for (auto& v : h.row(j)) v = 0.0;
        // Roundoff from earlier Green solves fills whole lattice cones; near
        // the rim it must stay at that level and is dropped.
        const double scale = sup_norm(h);
        for (int j = lo; j <= hi; ++j)
            for (int k = 0; k < g.n_space; ++k) {
                if (k >= 2 && k <= g.n_space - 3) continue;
                for (auto& v : h.point(j, k)) {
                    if (std::abs(v) > 1e-12 * scale) {
                        throw BoundaryContaminationError("cutoff source reaches the spatial boundary");
                    }
                    v = 0.0;
                }
            }
        return h;
    }

    const PerturbedGreen& perturbed(cplx lambda) const {
        if (!cache_ || cache_->lambda() != lambda) {
            cache_ = std::make_unique<PerturbedGreen>(G_, W_, lambda, cfg_.method, cfg_.order);
        }
        return *cache_;
    }

    double spectral_radius(Direction dir = Direction::retarded) const {
        auto& slot = rho_[dir == Direction::retarded ? 0 : 1];
        if (slot < 0.0) slot = estimate_spectral_radius(G_, W_, dir);
        return slot;
    }

private:
    // first j with chi[j] != chi[j-1], last j with chi[j] != chi[j+1]
    static int first_change(const std::vector<double>& chi) {
        for (std::size_t j = 1; j < chi.size(); ++j)
            if (chi[j] != chi[j - 1]) return static_cast<int>(j) - 1;
        return 0;
    }
    static int last_change(const std::vector<double>& chi) {
        for (std::size_t j = chi.size() - 1; j >= 1; --j)
            if (chi[j] != chi[j - 1]) return static_cast<int>(j);
        return static_cast<int>(chi.size()) - 1;
    }

    GreenOperator G_;
    KernelPotential W_;
    ScatteringConfig cfg_;
    std::vector<double> chi_minus_, chi_plus_;
    mutable std::unique_ptr<PerturbedGreen> cache_;
    mutable std::array<double, 2> rho_{-1.0, -1.0};
};

namespace detail {

inline void check_solution(const ScatteringSetup& S, cplx lambda, const GridFunction& f, const char* what) {
    require_same_grid(S.grid(), f.grid(), what);
    if (!f.all_finite()) throw PreconditionError(std::string(what) + ": input is not finite");
    const double scale = sup_norm(f);
    if (scale == 0.0) return;
    GridFunction r = apply_D(S.green().spec(), f);
    if (lambda != cplx{0.0, 0.0}) r.axpy(lambda, apply_W(S.kernel(), f));
    // Dirac solutions R f carry one-sided D' differences on the rim rows
    const int margin = S.green().spec().is_dirac() ? 2 : 1;
    const double res = mask_sup_norm(r, interior_mask(f.grid(), margin)) / scale;
    // D is a second difference: scale the tolerance by 1/dt^2.
    if (res > S.config().input_tolerance / (f.grid().dt * f.grid().dt)) {
        throw PreconditionError(std::string(what) + ": input is not a solution (residual " + std::to_string(res) + ")");
    }
}

// R_lambda h = R+_lambda h - R-_lambda h
inline GridFunction perturbed_causal(const ScatteringSetup& S, cplx lambda, const GridFunction& h) {
    if (lambda == cplx{0.0, 0.0}) return S.green().causal(h);
    const auto& P = S.perturbed(lambda);
    return P.apply(Direction::retarded, h) - P.apply(Direction::advanced, h);
}

}  // namespace detail

/// Omega_{lambda,+}: the free solution that agrees with f_lambda above the upper band.
inline GridFunction moller_plus(const ScatteringSetup& S, cplx lambda, const GridFunction& f_lambda) {
    detail::check_solution(S, lambda, f_lambda, "moller_plus");
    return S.green().causal(S.band_source(S.chi_plus(), f_lambda));
}

/// Omega_{lambda,-}: the free solution that agrees with f_lambda below the lower band.
inline GridFunction moller_minus(const ScatteringSetup& S, cplx lambda, const GridFunction& f_lambda) {
    detail::check_solution(S, lambda, f_lambda, "moller_minus");
    return -1.0 * S.green().causal(S.band_source(S.chi_minus(), f_lambda));
}

/// Omega_{lambda,-}^{-1}: the lambda-solution that agrees with f0 below the lower band.
inline GridFunction moller_minus_inverse(const ScatteringSetup& S, cplx lambda, const GridFunction& f0) {
    detail::check_solution(S, 0.0, f0, "moller_minus_inverse");
    return -1.0 * detail::perturbed_causal(S, lambda, S.band_source(S.chi_minus(), f0));
}

/// Omega_{lambda,+}^{-1}: the lambda-solution that agrees with f0 above the upper band.
inline GridFunction moller_plus_inverse(const ScatteringSetup& S, cplx lambda, const GridFunction& f0) {
    detail::check_solution(S, 0.0, f0, "moller_plus_inverse");
    return detail::perturbed_causal(S, lambda, S.band_source(S.chi_plus(), f0));
}

/// s_lambda = Omega_+ Omega_-^{-1}.
inline GridFunction scattering_apply(const ScatteringSetup& S, cplx lambda, const GridFunction& f0) {
    return moller_plus(S, lambda, moller_minus_inverse(S, lambda, f0));
}

/// s_lambda^{-1} = Omega_- Omega_+^{-1}: the time-mirrored construction.
inline GridFunction scattering_apply_inverse(const ScatteringSetup& S, cplx lambda, const GridFunction& f0) {
    return moller_minus(S, lambda, moller_plus_inverse(S, lambda, f0));
}

struct SeriesResult {
    GridFunction s;
    std::vector<double> term_norms;  // sup of lambda^{k+1} (-R+ W)^k f0 restricted to K, k = 0..M
    double spectral_radius = 0.0;
};

/// f0 + E W sum_{k=0..M} lambda^{k+1} (-R+ W)^k f0 with E = R- - R+.
inline SeriesResult scattering_series(const ScatteringSetup& S, cplx lambda, const GridFunction& f0, int M) {
    require_same_grid(S.grid(), f0.grid(), "scattering_series");
    if (M < 0) throw PreconditionError("series order must be non-negative");
    SeriesResult out;
    out.s = f0;
    const auto& W = S.kernel();
    if (lambda == cplx{0.0, 0.0} || W.is_zero()) return out;
    out.spectral_radius = S.spectral_radius();
    if (std::abs(lambda) * out.spectral_radius >= PerturbedGreen::kSafety) {
        throw DivergenceError("scattering series outside its convergence regime: |lambda| rho = " +
                              std::to_string(std::abs(lambda) * out.spectral_radius));
    }
    // acc = W sum_k lambda^{k+1} (-R+ W)^k f0, built on K
    GridFunction term = lambda * apply_W(W, f0);
    GridFunction acc = term;
    out.term_norms.push_back(sup_norm(term));
    for (int k = 1; k <= M; ++k) {
        term = -lambda * apply_W(W, S.green().retarded(term));
        out.term_norms.push_back(sup_norm(term));
        acc += term;
        if (out.term_norms.back() < 1e-16 * sup_norm(acc)) break;
    }
    out.s += S.green().advanced(acc) - S.green().retarded(acc);
    if (!out.s.all_finite()) throw DivergenceError("scattering series produced non-finite values");
    return out;
}

/// d/dlambda s_lambda f0 at 0: E W f0.
inline GridFunction derivative_at_zero(const ScatteringSetup& S, const GridFunction& f0) {
    require_same_grid(S.grid(), f0.grid(), "derivative_at_zero");
    const auto wf = apply_W(S.kernel(), f0);
    if (wf.is_zero()) return GridFunction(S.grid());
    return S.green().advanced(wf) - S.green().retarded(wf);
}

/// Free solutions from seeded random compactly supported data on the lower
/// slab time; centers are drawn so that every cone stays inside the grid.
inline std::vector<GridFunction> free_solution_basis(const ScatteringSetup& S, int count, std::uint64_t seed,
                                                     double r_min = 0.08, double r_max = 0.15) {
    const auto& g = S.grid();
    if (S.green().spec().is_dirac()) throw PreconditionError("solution basis is built for normally hyperbolic D");
    const int js = g.time_index(S.config().tau_minus);
    const double reach = std::max(g.t(js) - g.t0, g.t_end() - g.t(js));
    const double lo = g.x0 + reach + r_max + 4 * g.dx, hi = g.x_end() - reach - r_max - 4 * g.dx;
    if (!(lo < hi)) throw PreconditionError("grid too narrow for a free solution basis");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(lo, hi), ur(r_min, r_max);
    std::normal_distribution<double> nd;
    std::vector<GridFunction> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        DataProfile p{ux(rng), ur(rng), {nd(rng), nd(rng)}, {nd(rng), nd(rng)}};
        auto d = p.sample(g, js);
        for (int a = 1; a < g.components; ++a) {
            const cplx z{nd(rng), nd(rng)};
            for (int k = 0; k < g.n_space; ++k) {
                d.v0(k, a) *= z;
                d.v1(k, a) *= z;
            }
        }
        out.push_back(free_solution_from_data(S.green().spec(), d));
    }
    return out;
}

}  // namespace ncwave
