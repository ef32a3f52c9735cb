#pragma once

// One-particle data of the quantized theory: the pairings whose kernel is the
// kernel of the propagator, the Bogoliubov property of s_lambda, and the
// derivations d_a = E V_a with their commutators and Moyal approximants.
//
// The propagator here is E = R- - R+ = -R, the sign for which the CAR form
// is positive and d_a agrees with d/dlambda s_lambda at 0 (see scattering).
//
// A free solution phi = E f can be paired without knowing f: with
// h = -D(chi_+ phi) on the upper band, E h = phi, so
//   CCR: <f, E g>         = <h_phi, psi>
//   CAR: i <f, g0 E g>    = i <h_phi, g0 psi>
// for psi = E g. This is how pairings after s_lambda are evaluated.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ncwave/diffops.hpp"
#include "ncwave/green.hpp"
#include "ncwave/kernels.hpp"
#include "ncwave/lattice.hpp"
#include "ncwave/profiles.hpp"
#include "ncwave/scattering.hpp"

namespace ncwave {

enum class PairingKind { ccr, car };

inline const char* to_string(PairingKind k) { return k == PairingKind::ccr ? "ccr" : "car"; }

/// CCR: sesquilinear <f, E h>; on real test functions this is the real
/// antisymmetric form sum f E h dt dx. CAR: i <f, g0 E h> for the Dirac pair.
struct PairingForm {
    PairingKind kind = PairingKind::ccr;
    Eigen::Matrix2cd gamma0 = Eigen::Matrix2cd::Identity();

    static PairingForm ccr() { return {}; }
    static PairingForm car(const DiracPairSpec& d) { return {PairingKind::car, d.gamma0}; }
};

namespace detail {

inline void check_form(const PairingForm& form, const OperatorSpec& spec) {
    if (form.kind == PairingKind::car && !spec.is_dirac()) {
        throw PreconditionError("CAR pairing needs the Dirac pair");
    }
    if (form.kind == PairingKind::ccr && spec.is_dirac()) {
        throw PreconditionError("CCR pairing needs a normally hyperbolic operator");
    }
}

// form evaluated on (f, solution psi)
inline cplx pair_with_solution(const PairingForm& form, const GridFunction& f, const GridFunction& psi) {
    if (form.kind == PairingKind::ccr) return inner_product(f, psi);
    return cplx(0.0, 1.0) * inner_product(f, GreenOperator::gamma_multiply(form.gamma0, psi));
}

}  // namespace detail

/// E f = R- f - R+ f.
inline GridFunction propagate(const GreenOperator& G, const GridFunction& f) {
    return G.advanced(f) - G.retarded(f);
}

inline cplx pairing(const PairingForm& form, const GridFunction& f, const GridFunction& h, const GreenOperator& G) {
    detail::check_form(form, G.spec());
    require_same_grid(f.grid(), h.grid(), "pairing");
    return detail::pair_with_solution(form, f, propagate(G, h));
}

/// Pairing of two free solutions through the upper cutoff band.
inline cplx solution_pairing(const ScatteringSetup& S, const PairingForm& form, const GridFunction& phi,
                             const GridFunction& psi) {
    detail::check_form(form, S.green().spec());
    return detail::pair_with_solution(form, -1.0 * S.band_source(S.chi_plus(), phi), psi);
}

/// W^* = W, or with g0 given, g0 W g0 = W^* (symmetry for the CAR form).
inline bool is_symmetric_kernel(const KernelPotential& W, const Eigen::Matrix2cd* g0 = nullptr, double tol = 1e-12) {
    if (W.is_zero()) return true;
    const auto dense = W.to_dense();
    const auto& dd = dense.dense_data();
    Eigen::MatrixXcd w = dd.is_diagonal() ? Eigen::MatrixXcd(dd.diagonal.asDiagonal()) : dd.w;
    Eigen::MatrixXcd lhs = w;
    if (g0) {
        if (W.grid().components != 2) throw PreconditionError("gamma0 symmetry needs two components");
        const Eigen::Index n = w.rows() / 2;
        Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(w.rows(), w.cols());
        for (Eigen::Index p = 0; p < n; ++p) P.block(2 * p, 2 * p, 2, 2) = *g0;
        lhs = P * w * P;
    }
    return (lhs - w.adjoint()).cwiseAbs().maxCoeff() <= tol * w.cwiseAbs().maxCoeff();
}

struct BogoliubovReport {
    double defect = 0.0;    // max |after - before| / max |before|
    double absolute = 0.0;  // max |after - before|
    double scale = 0.0;     // max |before|
    bool symmetric_kernel = false;
};

/// Compares pairings of E f_a, E f_b before and after s_lambda. For CAR the
/// kernel is symmetric when g0 W g0 = W^*, which is what is reported.
inline BogoliubovReport bogoliubov_defect(const ScatteringSetup& S, double lambda, const PairingForm& form,
                                          const std::vector<GridFunction>& tests) {
    const auto& G = S.green();
    detail::check_form(form, G.spec());
    if (!std::isfinite(lambda)) throw PreconditionError("bogoliubov_defect: lambda must be finite");
    if (!G.spec().is_dirac() && !G.spec().nh().is_symmetric()) {
        throw PreconditionError("bogoliubov_defect: D must be symmetric");
    }
    if (tests.empty()) throw PreconditionError("bogoliubov_defect: empty basis");
    BogoliubovReport rep;
    rep.symmetric_kernel =
        is_symmetric_kernel(S.kernel(), form.kind == PairingKind::car ? &form.gamma0 : nullptr);
    std::vector<GridFunction> f0, s0;
    for (const auto& f : tests) {
        f0.push_back(propagate(G, f));
        s0.push_back(scattering_apply(S, lambda, f0.back()));
    }
    for (std::size_t a = 0; a < tests.size(); ++a) {
        const auto h = -1.0 * S.band_source(S.chi_plus(), s0[a]);
        for (std::size_t b = 0; b < tests.size(); ++b) {
            const cplx before = detail::pair_with_solution(form, tests[a], f0[b]);
            const cplx after = detail::pair_with_solution(form, h, s0[b]);
            rep.absolute = std::max(rep.absolute, std::abs(after - before));
            rep.scale = std::max(rep.scale, std::abs(before));
        }
    }
    rep.defect = rep.scale > 0.0 ? rep.absolute / rep.scale : rep.absolute;
    return rep;
}

enum class PotentialBuilder { pointwise, moyal };

inline const char* to_string(PotentialBuilder b) { return b == PotentialBuilder::pointwise ? "pointwise" : "moyal"; }

/// Algebra element a and the rule turning it into a potential V_a.
struct DerivationProbe {
    MoyalSymbol a;
    PotentialBuilder builder = PotentialBuilder::pointwise;
    double theta0 = 0.1;
    SmoothBox cutoff{};  // moyal only
    MoyalOptions options{};

    KernelPotential kernel(const SpacetimeGrid& g) const {
        if (!a.a) return KernelPotential::zero(g);
        if (builder == PotentialBuilder::pointwise) return pointwise_kernel(a.sample(g));
        return moyal_kernel(g, a, theta0, cutoff, options);
    }
};

/// d_a f0 = E V_a f0.
inline GridFunction derivation(const GreenOperator& G, const KernelPotential& V, const GridFunction& f0) {
    require_same_grid(G.grid(), f0.grid(), "derivation");
    return propagate(G, apply_W(V, f0));
}

inline GridFunction derivation(const GreenOperator& G, const DerivationProbe& probe, const GridFunction& f0) {
    return derivation(G, probe.kernel(G.grid()), f0);
}

struct CommutatorReport {
    double norm = 0.0;      // max over the basis of |[d1, d2] f0|_2
    double relative = 0.0;  // same, over max |d1 d2 f0|_2
};

inline CommutatorReport derivation_commutator(const GreenOperator& G, const KernelPotential& V1,
                                              const KernelPotential& V2, const std::vector<GridFunction>& basis) {
    CommutatorReport rep;
    double scale = 0.0;
    for (const auto& f0 : basis) {
        const auto a = derivation(G, V1, derivation(G, V2, f0));
        const auto b = derivation(G, V2, derivation(G, V1, f0));
        rep.norm = std::max(rep.norm, l2_norm(a - b));
        scale = std::max({scale, l2_norm(a), l2_norm(b)});
    }
    rep.relative = scale > 0.0 ? rep.norm / scale : 0.0;
    return rep;
}

inline CommutatorReport derivation_commutator(const GreenOperator& G, const DerivationProbe& p1,
                                              const DerivationProbe& p2, const std::vector<GridFunction>& basis) {
    if (p1.builder != p2.builder) throw PreconditionError("derivation_commutator: probes use different builders");
    return derivation_commutator(G, p1.kernel(G.grid()), p2.kernel(G.grid()), basis);
}

struct ApproximantLevel {
    SmoothBox cutoff;
    bool resolved = true;
    std::string error;
    std::vector<double> diff;  // |u_k - u_{k-1}|_2 per basis element (empty at k = 0)
};

struct ConvergenceTable {
    std::vector<ApproximantLevel> levels;

    double max_diff(std::size_t k) const {
        double m = 0.0;
        for (double d : levels[k].diff) m = std::max(m, d);
        return m;
    }
    /// Smallest ratio diff_{k} / diff_{k+1} over levels and basis elements.
    double min_decrease() const {
        double r = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k + 1 < levels.size(); ++k)
            for (std::size_t b = 0; b < levels[k].diff.size(); ++b) {
                const double next = levels[k + 1].diff[b];
                if (next > 0.0) r = std::min(r, levels[k].diff[b] / next);
            }
        return r;
    }
    bool all_resolved() const {
        return std::all_of(levels.begin(), levels.end(), [](const auto& l) { return l.resolved; });
    }
};

/// |E W_{nu_k} f0 - E W_{nu_{k-1}} f0|_2 along a sequence of growing cutoffs.
/// The pointwise builder multiplies by a chi_nu, so its differences vanish
/// once the box holds supp a.
inline ConvergenceTable approximant_convergence(const GreenOperator& G, const DerivationProbe& probe,
                                                const std::vector<SmoothBox>& cutoffs,
                                                const std::vector<GridFunction>& basis) {
    if (cutoffs.empty()) throw PreconditionError("approximant_convergence: no cutoff levels");
    const auto& g = G.grid();
    ConvergenceTable table;
    std::vector<GridFunction> prev;
    for (const auto& nu : cutoffs) {
        ApproximantLevel level;
        level.cutoff = nu;
        std::vector<GridFunction> cur;
        try {
            KernelPotential V = KernelPotential::zero(g);
            if (probe.a.a) {
                if (probe.builder == PotentialBuilder::pointwise) {
                    V = pointwise_kernel(GridFunction::sample(g, [&](double t, double x, int) {
                        return probe.a.a(t, x) * nu(t, x);
                    }));
                } else {
                    V = moyal_kernel(g, probe.a, probe.theta0, nu, probe.options);
                }
            }
            for (const auto& f0 : basis) cur.push_back(derivation(G, V, f0));
        } catch (const PreconditionError& e) {
            level.resolved = false;
            level.error = e.what();
        }
        if (level.resolved && !prev.empty()) {
            for (std::size_t b = 0; b < basis.size(); ++b) level.diff.push_back(l2_norm(cur[b] - prev[b]));
        } else if (!table.levels.empty()) {
            level.diff.assign(basis.size(), std::numeric_limits<double>::quiet_NaN());
        }
        prev = std::move(cur);
        table.levels.push_back(std::move(level));
    }
    return table;
}

/// |W_theta f - V_a f|_2 / |V_a f|_2 for the Moyal approximant against
/// multiplication by a.
inline double moyal_pointwise_gap(const SpacetimeGrid& g, const MoyalSymbol& a, double theta0,
                                  const SmoothBox& cutoff, const GridFunction& f, const MoyalOptions& opt = {}) {
    const auto ref = apply_W(pointwise_kernel(a.sample(g)), f);
    const double scale = l2_norm(ref);
    if (scale == 0.0) throw PreconditionError("moyal_pointwise_gap: a f vanishes");
    return l2_norm(apply_W(moyal_kernel(g, a, theta0, cutoff, opt), f) - ref) / scale;
}

}  // namespace ncwave
