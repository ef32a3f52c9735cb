#pragma once

// green-check, born, pole-scan

#include <array>
#include <limits>
#include <random>
#include <tuple>

#include "ncwave/born.hpp"
#include "ncwave/harness.hpp"

namespace ncwave::cli {

inline json default_grid_json() {
    return {{"n_time", 201}, {"n_space", 401}, {"dt", 0.01}, {"dx", 0.01}, {"t0", -1.0}, {"x0", -2.0}};
}

inline std::pair<double, double> parse_range(const Node& n) {
    if (n.size() != 2) throw ConfigError(n.path(), "expected [lo, hi]");
    const double a = n[0].as_number(), b = n[1].as_number();
    if (!(a < b)) throw ConfigError(n.path(), "expected lo < hi");
    return {a, b};
}

/// {"re": [lo, hi], "im": [lo, hi], "n_re", "n_im"}
inline LambdaGrid parse_lambda_grid(const Node& n) {
    LambdaGrid g;
    std::tie(g.re_min, g.re_max) = parse_range(n.at("re"));
    std::tie(g.im_min, g.im_max) = parse_range(n.at("im"));
    g.n_re = n.integer("n_re", 2, 100000);
    g.n_im = n.integer("n_im", 2, 100000);
    return g;
}

inline Direction parse_direction(const Node& n, const std::string& key) {
    return n.choice(key, {"retarded", "advanced"}) == "retarded" ? Direction::retarded : Direction::advanced;
}

inline const std::array<Direction, 2> kBothDirections{Direction::retarded, Direction::advanced};

inline double rho_both(const GreenOperator& G, const KernelPotential& W) {
    return std::max(estimate_spectral_radius(G, W, Direction::retarded),
                    estimate_spectral_radius(G, W, Direction::advanced));
}

inline double identity_residual(const GreenOperator& G, const GridFunction& u, const GridFunction& f) {
    GridFunction r = apply_D(G.spec(), u);
    r -= f;
    return mask_sup_norm(r, interior_mask(u.grid(), interior_margin(G.spec()) + 1)) / sup_norm(f);
}

// Random sources shared by green-check and born.
struct SourceBlock {
    int count = 50;
    std::pair<double, double> t_range{-0.5, 0.5}, x_range{-0.3, 0.3};
    double radius = 0.08;

    static json defaults(int count) {
        return {{"count", count}, {"t_range", {-0.5, 0.5}}, {"x_range", {-0.3, 0.3}}, {"radius", 0.08}};
    }
    static SourceBlock parse(const Node& n) {
        SourceBlock s;
        s.count = n.integer("count", 1, 100000);
        s.t_range = parse_range(n.at("t_range"));
        s.x_range = parse_range(n.at("x_range"));
        s.radius = n.positive("radius");
        if (2.0 * s.radius >= s.t_range.second - s.t_range.first || 2.0 * s.radius >= s.x_range.second - s.x_range.first)
            throw ConfigError(n.child_path("radius"), "sources do not fit in the ranges");
        return s;
    }
    std::vector<BumpProfile> draw(const SpacetimeGrid& g, std::mt19937_64& rng, int n, bool real = false) const {
        std::vector<BumpProfile> out;
        for (int i = 0; i < n; ++i)
            out.push_back(random_source(g, rng, t_range.first, t_range.second, x_range.first, x_range.second, radius,
                                        real));
        return out;
    }
};

// ---- green-check --------------------------------------------------------

inline json green_check_defaults() {
    const json w1 = bump_json(-0.02, -0.05, 0.12, 2000.0), w2 = bump_json(0.02, 0.05, 0.12, 3000.0);
    return {{"seed", 1},
            {"grid", default_grid_json()},
            {"operator", {{"variant", "wave"}, {"mass_squared", 1.0}}},
            {"kernel", {{"variant", "finite_rank"}, {"pairs", {{w1, w2}, {w2, w1}}}}},
            {"run",
             {{"sources", SourceBlock::defaults(50)},
              {"lambda_fraction", 0.3},
              {"lambda_phase", 0.3},
              {"order", 40}}}};
}

/// Green identity of R+- and the exact support properties of R+-_lambda.
inline void run_green_check(const Config& c, Report& rep, Artifacts& art) {
    const auto seed = static_cast<std::uint64_t>(c.at("seed").as_integer());
    const auto op = parse_operator(c.at("operator"));
    const auto g = parse_grid(c.at("grid"), op.components());
    const auto W = parse_kernel(c.at("kernel"), g);
    if (!W.is_finite_rank()) throw ConfigError("kernel.variant", "green-check compares against the exact route: needs a finite-rank kernel");
    const auto run = c.at("run");
    const auto src = SourceBlock::parse(run.at("sources"));
    const double fraction = run.positive("lambda_fraction");
    const double phase = run.number("lambda_phase");
    const int order = run.integer("order", 0, 10000);
    if (fraction >= PerturbedGreen::kSafety) throw ConfigError("run.lambda_fraction", "must stay below 0.95 for the series");
    c.parsed();

    const GreenOperator G(op.spec(g), BoundaryCheck::trace);
    const double rho = rho_both(G, W);
    const cplx lambda = std::polar(fraction / rho, phase);
    const PerturbedGreen series(G, W, lambda, BornMethod::series, order);
    const PerturbedGreen exact(G, W, lambda, BornMethod::finite_rank_exact);
    for (auto d : kBothDirections) series.spectral_radius(d);  // fill the cache before the workers start

    std::mt19937_64 rng(seed);
    const auto bumps = src.draw(g, rng, src.count);
    const auto Kmask = box_mask(g, W.support_box());
    struct Row {
        double identity, out_free, out_series, out_exact, diff_series, diff_exact;
        bool misses;
    };
    std::vector<Row> rows(2 * bumps.size());
    parallel_for(static_cast<int>(rows.size()), c.options.jobs, [&](int i, int) {
        const auto f = bumps[i / 2].sample(g);
        const Direction dir = kBothDirections[i % 2];
        const auto u = G.apply(dir, f);
        const auto cone = causal_cone(support(f), cone_of(dir));
        const auto a = series.apply(dir, f), b = exact.apply(dir, f);
        const auto outside = ~perturbed_support_bound(f, W, dir);
        Row r{};
        r.identity = identity_residual(G, u, f);
        r.out_free = mask_sup_norm(u, ~inflate(cone, 1));
        r.out_series = mask_sup_norm(a, outside);
        r.out_exact = mask_sup_norm(b, outside);
        r.misses = (cone & Kmask).count() == 0;
        r.diff_series = r.misses ? sup_norm(a - u) : std::nan("");
        r.diff_exact = r.misses ? sup_norm(b - u) : std::nan("");
        rows[i] = r;
    });

    io::CsvTable t({"source", "direction", "t_c", "x_c", "identity_residual", "outside_free", "outside_series",
                    "outside_exact", "misses_K", "missed_diff_series", "missed_diff_exact"});
    double identity = 0, out_free = 0, out_pert = 0, missed_diff = 0;
    long long missed = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto& b = bumps[i / 2];
        t.add({static_cast<long long>(i / 2), std::string(to_string(kBothDirections[i % 2])), b.t_c, b.x_c, r.identity,
               r.out_free, r.out_series, r.out_exact, static_cast<long long>(r.misses), r.diff_series, r.diff_exact});
        identity = std::max(identity, r.identity);
        out_free = std::max(out_free, r.out_free);
        out_pert = std::max({out_pert, r.out_series, r.out_exact});
        if (r.misses) {
            ++missed;
            missed_diff = std::max({missed_diff, r.diff_series, r.diff_exact});
        }
    }
    art.csv("green_check.csv", t);
    rep.check_le("free_green_identity_residual", identity, 1e-10);
    rep.check_eq("free_support_outside_cone", out_free, 0.0);
    rep.check_eq("perturbed_support_outside_cone", out_pert, 0.0);
    rep.check_eq("unchanged_when_cone_misses_K", missed_diff, 0.0);
    rep.check_ge("sources_missing_K", static_cast<double>(missed), 1.0, false);
    rep.details() = {{"lambda", complex_json(lambda)}, {"rho_hat", rho}, {"sources", src.count}};
}

// ---- born ---------------------------------------------------------------

inline json born_defaults() {
    const json w1 = bump_json(-0.02, -0.05, 0.12, 2000.0), w2 = bump_json(0.02, 0.05, 0.12, 3000.0);
    return {{"seed", 2},
            {"grid", default_grid_json()},
            {"operator", {{"variant", "wave"}, {"mass_squared", 1.0}}},
            {"kernel", {{"variant", "finite_rank"}, {"pairs", {{w1, w1}, {w2, w2}}}}},
            {"run",
             {{"sources", SourceBlock::defaults(50)},
              {"adjoint_pairs", 20},
              {"lambda_fraction", 0.5},
              {"lambda_phase", 0.3},
              {"order", 40}}}};
}

/// Green identities of R+-_lambda on both routes and the adjoint relation
/// <h, R+_lambda f> = <R-_lambda h, f> for symmetric D, W and real lambda.
inline void run_born(const Config& c, Report& rep, Artifacts& art) {
    const auto seed = static_cast<std::uint64_t>(c.at("seed").as_integer());
    const auto op = parse_operator(c.at("operator"));
    const auto g = parse_grid(c.at("grid"), op.components());
    const auto W = parse_kernel(c.at("kernel"), g);
    if (!W.is_finite_rank()) throw ConfigError("kernel.variant", "born compares against the exact route: needs a finite-rank kernel");
    const auto run = c.at("run");
    const auto src = SourceBlock::parse(run.at("sources"));
    const int npairs = run.integer("adjoint_pairs", 1, 100000);
    const double fraction = run.positive("lambda_fraction");
    const double phase = run.number("lambda_phase");
    const int order = run.integer("order", 0, 10000);
    if (fraction >= PerturbedGreen::kSafety) throw ConfigError("run.lambda_fraction", "must stay below 0.95 for the series");
    c.parsed();

    const GreenOperator G(op.spec(g), BoundaryCheck::trace);
    const double rho = rho_both(G, W);
    const cplx lambda = std::polar(fraction / rho, phase);
    const double lambda_real = fraction / rho;
    const PerturbedGreen series(G, W, lambda, BornMethod::series, order);
    const PerturbedGreen exact(G, W, lambda, BornMethod::finite_rank_exact);
    const PerturbedGreen series_r(G, W, lambda_real, BornMethod::series, order);
    const PerturbedGreen exact_r(G, W, lambda_real, BornMethod::finite_rank_exact);
    for (auto d : kBothDirections) {
        series.spectral_radius(d);
        series_r.spectral_radius(d);
    }

    std::mt19937_64 rng(seed);
    const auto bumps = src.draw(g, rng, src.count);
    const auto fs = src.draw(g, rng, npairs), hs = src.draw(g, rng, npairs);

    struct IdRow {
        double series, exact, diff;
    };
    std::vector<IdRow> id(2 * bumps.size());
    parallel_for(static_cast<int>(id.size()), c.options.jobs, [&](int i, int) {
        const auto f = bumps[i / 2].sample(g);
        const Direction dir = kBothDirections[i % 2];
        const auto a = series.apply_with_diagnostics(dir, f), b = exact.apply_with_diagnostics(dir, f);
        id[i] = {a.diagnostics.residual, b.diagnostics.residual, sup_norm(a.u - b.u) / sup_norm(b.u)};
    });

    struct AdjRow {
        cplx lhs_s, rhs_s, lhs_e, rhs_e;
        double defect_s, defect_e;
    };
    std::vector<AdjRow> adj(npairs);
    parallel_for(npairs, c.options.jobs, [&](int i, int) {
        const auto f = fs[i].sample(g), h = hs[i].sample(g);
        AdjRow r{};
        int m = 0;
        for (const auto* P : {&series_r, &exact_r}) {
            const auto Rf = P->apply(Direction::retarded, f);
            const cplx lhs = inner_product(h, Rf);
            const cplx rhs = inner_product(P->apply(Direction::advanced, h), f);
            const double d = std::abs(lhs - rhs) / (l2_norm(h) * l2_norm(Rf));
            if (m++ == 0) {
                r.lhs_s = lhs, r.rhs_s = rhs, r.defect_s = d;
            } else {
                r.lhs_e = lhs, r.rhs_e = rhs, r.defect_e = d;
            }
        }
        adj[i] = r;
    });

    io::CsvTable t({"source", "direction", "series_residual", "exact_residual", "series_vs_exact"});
    double rs = 0, re = 0, dd = 0;
    for (std::size_t i = 0; i < id.size(); ++i) {
        t.add({static_cast<long long>(i / 2), std::string(to_string(kBothDirections[i % 2])), id[i].series,
               id[i].exact, id[i].diff});
        rs = std::max(rs, id[i].series);
        re = std::max(re, id[i].exact);
        dd = std::max(dd, id[i].diff);
    }
    art.csv("born_identities.csv", t);
    io::CsvTable ta({"pair", "series_lhs_re", "series_lhs_im", "series_rhs_re", "series_rhs_im", "series_defect",
                     "exact_defect"});
    double adj_max = 0;
    for (int i = 0; i < npairs; ++i) {
        const auto& r = adj[i];
        ta.add({static_cast<long long>(i), r.lhs_s.real(), r.lhs_s.imag(), r.rhs_s.real(), r.rhs_s.imag(), r.defect_s,
                r.defect_e});
        adj_max = std::max({adj_max, r.defect_s, r.defect_e});
    }
    art.csv("born_adjoint.csv", ta);

    rep.check_le("series_lambda_rho", std::abs(lambda) * rho, 0.5 * (1.0 + 1e-12), false);
    rep.check_le("series_green_identity_residual", rs, 1e-8);
    rep.check_le("exact_green_identity_residual", re, 1e-10);
    rep.check_le("adjoint_relation_defect", adj_max, 1e-9);
    rep.details() = {{"lambda", complex_json(lambda)},
                     {"lambda_adjoint", lambda_real},
                     {"rho_hat", rho},
                     {"series_vs_exact_max", dd},
                     {"order", order}};
}

// ---- pole-scan ----------------------------------------------------------

inline json pole_scan_defaults() {
    return {{"grid", default_grid_json()},
            {"operator", {{"variant", "wave"}, {"mass_squared", 1.0}}},
            {"kernel",
             {{"variant", "rank_one"},
              {"w1", bump_json(-0.02, -0.05, 0.12, 2000.0)},
              {"w2", bump_json(0.02, 0.05, 0.12, 2000.0)}}},
            {"run",
             {{"direction", "retarded"},
              {"lambda_grid", {{"re", {-3.0, 3.0}}, {"im", {-1.5, 1.5}}, {"n_re", 121}, {"n_im", 61}}},
              {"ratio_order", 30}}}};
}

/// The determinant scan finds the rank-one pole -1/<w1, R w2>; the
/// unguarded Born series grows past it and shrinks inside it.
inline void run_pole_scan(const Config& c, Report& rep, Artifacts& art) {
    const auto op = parse_operator(c.at("operator"));
    const auto g = parse_grid(c.at("grid"), op.components());
    const auto kn = c.at("kernel");
    if (kn.choice("variant", {"rank_one", "finite_rank"}) != "rank_one")
        throw ConfigError("kernel.variant", "pole-scan compares with the rank-one closed form");
    const auto W = parse_kernel(kn, g);
    const auto run = c.at("run");
    const Direction dir = parse_direction(run, "direction");
    const auto lg = parse_lambda_grid(run.at("lambda_grid"));
    const int order = run.integer("ratio_order", 3, 10000);
    c.parsed();

    const GreenOperator G(op.spec(g), BoundaryCheck::trace);
    const auto& [w1, w2] = W.finite().pairs.front();
    const cplx m = inner_product(w1, G.apply(dir, w2));
    if (m == cplx{0.0, 0.0}) throw ConfigError("kernel", "<w1, R w2> vanishes: the kernel has no pole");
    const cplx expected = -1.0 / m;
    const auto scan = pole_scan(G, W, dir, lg);
    art.csv("pole_scan.csv", io::pole_scan_table(scan));

    double err = std::numeric_limits<double>::infinity();
    for (const auto& p : scan.poles) err = std::min(err, std::abs(p - expected) / std::abs(expected));

    // rank one: the terms are <w1, R f> m^(k-1) (-lambda)^k R w2, ratio |lambda m|
    const auto above = series_term_norms(G, W, dir, 1.1 * expected, w2, order);
    const auto below = series_term_norms(G, W, dir, 0.9 * expected, w2, order);
    io::CsvTable t({"k", "term_norm_1.1", "term_norm_0.9"});
    for (int k = 0; k <= order; ++k) t.add({static_cast<long long>(k), above[k], below[k]});
    art.csv("term_norms.csv", t);
    const double ratio_above = above[order] / above[order - 1];
    const double ratio_below = below[order] / below[order - 1];

    bool guard = false;
    try {
        PerturbedGreen(G, W, 1.1 * expected).apply(dir, w2);
    } catch (const DivergenceError&) {
        guard = true;
    }

    json poles = json::array();
    for (const auto& p : scan.poles) poles.push_back(complex_json(p));
    rep.check_eq("poles_found", static_cast<double>(scan.poles.size()), 1.0);
    rep.check_le("pole_relative_error", err, 1e-8);
    rep.check_ge("term_ratio_at_1.1_pole", ratio_above, 1.0, false);
    rep.check_lt("term_ratio_at_0.9_pole", ratio_below, 1.0, false);
    rep.details() = {{"expected_pole", complex_json(expected)},
                     {"poles", poles},
                     {"direction", to_string(dir)},
                     {"series_guard_refuses_1.1_pole", guard}};
}

}  // namespace ncwave::cli
