#pragma once

// scatter, derivative-check, bogoliubov, moyal-converge

#include "ncwave/experiments_cauchy.hpp"
#include "ncwave/quantize.hpp"
#include "ncwave/scattering.hpp"

namespace ncwave::cli {

inline json scattering_config_json(int order) {
    return {{"tau_minus", -0.5}, {"tau_plus", 0.5}, {"band_steps", 10}, {"order", order},
            {"method", "series"}, {"input_tolerance", 1e-8}};
}

inline ScatteringConfig parse_scattering_config(const Node& n) {
    ScatteringConfig s;
    s.tau_minus = n.number("tau_minus");
    s.tau_plus = n.number("tau_plus");
    s.band_steps = n.integer("band_steps", 1, 100000);
    s.order = n.integer("order", 0, 100000);
    s.method = n.choice("method", {"series", "finite_rank_exact"}) == "series" ? BornMethod::series
                                                                               : BornMethod::finite_rank_exact;
    s.input_tolerance = n.positive("input_tolerance");
    return s;
}

// One ScatteringSetup per worker: the setup caches its perturbed resolvent.
struct ScatteringBed {
    OperatorChoice op;
    SpacetimeGrid grid;
    std::unique_ptr<GreenOperator> G;
    std::vector<std::unique_ptr<ScatteringSetup>> setups;

    ScatteringBed(const Config& c, const std::string& kernel_key, int jobs)
        : op(parse_operator(c.at("operator"))), grid(parse_grid(c.at("grid"), op.components())) {
        if (op.dirac) throw ConfigError("operator.variant", "the free solution basis is built for the wave operator");
        const auto W = parse_kernel(c.at(kernel_key), grid);
        const auto cfg = parse_scattering_config(c.at("scattering"));
        G = std::make_unique<GreenOperator>(op.spec(grid), BoundaryCheck::trace);
        config_block("scattering", [&] {
            for (int w = 0; w < std::max(1, jobs); ++w) setups.push_back(std::make_unique<ScatteringSetup>(*G, W, cfg));
            return 0;
        });
    }
    const ScatteringSetup& operator[](int w) const { return *setups[static_cast<std::size_t>(w)]; }
    double rho_hat() const {
        return std::max(setups[0]->spectral_radius(Direction::retarded), setups[0]->spectral_radius(Direction::advanced));
    }
};

inline double rel_sup(const GridFunction& a, const GridFunction& b) { return sup_norm(a - b) / sup_norm(b); }

// ---- scatter ------------------------------------------------------------

inline json scatter_defaults() {
    return {{"seed", 3},
            {"grid", default_grid_json()},
            {"operator", {{"variant", "wave"}, {"mass_squared", 1.0}}},
            {"kernel",
             {{"variant", "rank_one"},
              {"w1", bump_json(-0.02, -0.05, 0.12, 2000.0)},
              {"w2", bump_json(0.02, 0.05, 0.12, 3000.0)}}},
            {"scattering", scattering_config_json(80)},
            {"run", {{"basis", 20}, {"lambda_fraction", 0.5}, {"lambda_phase", 0.3}, {"series_order", 80}}}};
}

/// Moller composition against the Born series, and the mirrored inverse.
inline void run_scatter(const Config& c, Report& rep, Artifacts& art) {
    const auto seed = static_cast<std::uint64_t>(c.at("seed").as_integer());
    const auto run = c.at("run");
    const int nb = run.integer("basis", 1, 100000);
    const double fraction = run.positive("lambda_fraction");
    const double phase = run.number("lambda_phase");
    const int M = run.integer("series_order", 0, 100000);
    if (fraction >= PerturbedGreen::kSafety) throw ConfigError("run.lambda_fraction", "must stay below 0.95 for the series");
    const ScatteringBed bed(c, "kernel", c.options.jobs);
    c.parsed();

    const double rho = bed.rho_hat();
    const cplx lambda = std::polar(fraction / rho, phase);
    const auto basis = config_block("grid", [&] { return free_solution_basis(bed[0], nb, seed); });
    struct Row {
        double series, inv_after, inv_before, free_residual;
    };
    std::vector<Row> rows(nb);
    parallel_for(nb, c.options.jobs, [&](int i, int w) {
        const auto& S = bed[w];
        const auto& f0 = basis[i];
        const auto s = scattering_apply(S, lambda, f0);
        Row r{};
        r.series = rel_sup(s, scattering_series(S, lambda, f0, M).s);
        r.inv_after = rel_sup(scattering_apply_inverse(S, lambda, s), f0);
        r.inv_before = rel_sup(scattering_apply(S, lambda, scattering_apply_inverse(S, lambda, f0)), f0);
        r.free_residual = mask_sup_norm(apply_D(S.green().spec(), s), interior_mask(S.grid(), 1)) / sup_norm(s);
        rows[i] = r;
    });
    io::CsvTable t({"basis", "moller_vs_series", "inverse_after_apply", "apply_after_inverse", "free_residual"});
    double ms = 0, ia = 0, ib = 0, fr = 0;
    for (int i = 0; i < nb; ++i) {
        const auto& r = rows[i];
        t.add({static_cast<long long>(i), r.series, r.inv_after, r.inv_before, r.free_residual});
        ms = std::max(ms, r.series);
        ia = std::max(ia, r.inv_after);
        ib = std::max(ib, r.inv_before);
        fr = std::max(fr, r.free_residual);
    }
    art.csv("scatter.csv", t);
    rep.check_le("series_lambda_rho", std::abs(lambda) * rho, 0.5 * (1.0 + 1e-12), false);
    rep.check_le("moller_vs_series", ms, 1e-8);
    rep.check_le("inverse_after_apply", ia, 1e-8);
    rep.check_le("apply_after_inverse", ib, 1e-8);
    rep.details() = {{"lambda", complex_json(lambda)}, {"rho_hat", rho}, {"max_free_residual", fr}};
}

// ---- derivative-check ---------------------------------------------------

inline json derivative_defaults() {
    return {{"seed", 4},
            {"grid", default_grid_json()},
            {"operator", {{"variant", "wave"}, {"mass_squared", 1.0}}},
            {"kernel",
             {{"variant", "rank_one"},
              {"w1", bump_json(-0.02, -0.05, 0.12, 2000.0)},
              {"w2", bump_json(0.02, 0.05, 0.12, 2000.0)}}},
            {"scattering", scattering_config_json(24)},
            {"run", {{"basis", 3}, {"lambdas", {1e-2, 5e-3, 2.5e-3}}}}};
}

/// |(s_lambda f0 - f0)/lambda - E W f0| shrinks linearly in lambda.
inline void run_derivative(const Config& c, Report& rep, Artifacts& art) {
    const auto seed = static_cast<std::uint64_t>(c.at("seed").as_integer());
    const auto run = c.at("run");
    const int nb = run.integer("basis", 1, 100000);
    const auto lambdas = run.at("lambdas").as_numbers();
    if (lambdas.size() < 2) throw ConfigError("run.lambdas", "needs at least two values");
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        if (lambdas[i] == 0.0) throw ConfigError("run.lambdas[" + std::to_string(i) + "]", "must be nonzero");
    const ScatteringBed bed(c, "kernel", c.options.jobs);
    c.parsed();

    const auto basis = config_block("grid", [&] { return free_solution_basis(bed[0], nb, seed); });
    const int nl = static_cast<int>(lambdas.size());
    std::vector<double> err(static_cast<std::size_t>(nb) * nl), dnorm(nb);
    parallel_for(nb * nl, c.options.jobs, [&](int i, int w) {
        const auto& S = bed[w];
        const auto& f0 = basis[i / nl];
        const double l = lambdas[i % nl];
        const auto d = derivative_at_zero(S, f0);
        if (i % nl == 0) dnorm[i / nl] = sup_norm(d);
        const auto s = scattering_apply(S, l, f0);
        err[i] = sup_norm((1.0 / l) * (s - f0) - d) / sup_norm(d);
    });
    io::CsvTable t({"basis", "lambda", "relative_error"});
    io::CsvTable ts({"basis", "lambda_a", "lambda_b", "slope"});
    double worst = 0.0, dmin = std::numeric_limits<double>::infinity();
    json slopes = json::array();
    for (int b = 0; b < nb; ++b) {
        dmin = std::min(dmin, dnorm[b]);
        for (int k = 0; k < nl; ++k) t.add({static_cast<long long>(b), lambdas[k], err[b * nl + k]});
        for (int k = 0; k + 1 < nl; ++k) {
            const double slope = std::log(err[b * nl + k] / err[b * nl + k + 1]) /
                                 std::log(std::abs(lambdas[k] / lambdas[k + 1]));
            ts.add({static_cast<long long>(b), lambdas[k], lambdas[k + 1], slope});
            slopes.push_back(Report::number_json(slope));
            worst = std::isnan(slope) ? slope : std::max(worst, std::abs(slope - 1.0));
        }
    }
    art.csv("derivative_errors.csv", t);
    art.csv("derivative_slopes.csv", ts);
    rep.check_gt("derivative_norm", dmin, 0.0, false);
    rep.check_le("max_slope_deviation_from_1", worst, 0.2);
    rep.details() = {{"slopes", slopes}, {"rho_hat", bed.rho_hat()}};
}

// ---- bogoliubov ---------------------------------------------------------

inline json bogoliubov_defaults() {
    const json w = bump_json(0.0, 0.0, 0.12, 2000.0);
    return {{"seed", 5},
            {"grid", default_grid_json()},
            {"operator", {{"variant", "wave"}, {"mass_squared", 1.0}}},
            {"symmetric_kernel", {{"variant", "rank_one"}, {"w1", w}, {"w2", w}}},
            {"nonsymmetric_kernel",
             {{"variant", "rank_one"}, {"w1", w}, {"w2", bump_json(0.1, 0.25, 0.12, 2000.0)}}},
            {"scattering", scattering_config_json(80)},
            {"run",
             {{"lambdas", {0.02, 0.05, 0.1}},
              {"tests", {{"count", 4}, {"t_range", {-0.3, 0.3}}, {"x_range", {-0.6, 0.6}}, {"radius", 0.1}}},
              {"real_tests", true}}}};
}

/// CCR pairing of solutions before and after s_lambda, for a symmetric and a
/// non-symmetric kernel, over a lambda sweep.
inline void run_bogoliubov(const Config& c, Report& rep, Artifacts& art) {
    const auto seed = static_cast<std::uint64_t>(c.at("seed").as_integer());
    const auto run = c.at("run");
    const auto lambdas = run.at("lambdas").as_numbers();
    if (lambdas.empty()) throw ConfigError("run.lambdas", "needs at least one value");
    const auto tb = SourceBlock::parse(run.at("tests"));
    const bool real = run.at("real_tests").as_bool();
    const ScatteringBed sym(c, "symmetric_kernel", c.options.jobs);
    const ScatteringBed non(c, "nonsymmetric_kernel", c.options.jobs);
    c.parsed();

    std::mt19937_64 rng(seed);
    std::vector<GridFunction> tests;
    for (const auto& b : tb.draw(sym.grid, rng, tb.count, real)) tests.push_back(b.sample(sym.grid));
    const auto form = PairingForm::ccr();
    const int nl = static_cast<int>(lambdas.size());
    std::vector<BogoliubovReport> rs(nl), rn(nl);
    parallel_for(2 * nl, c.options.jobs, [&](int i, int w) {
        if (i % 2 == 0)
            rs[i / 2] = bogoliubov_defect(sym[w], lambdas[i / 2], form, tests);
        else
            rn[i / 2] = bogoliubov_defect(non[w], lambdas[i / 2], form, tests);
    });
    // s_lambda must actually move the solutions for the check to mean anything
    int imax = 0;
    for (int k = 1; k < nl; ++k)
        if (std::abs(lambdas[k]) > std::abs(lambdas[imax])) imax = k;
    double moved = 0.0;
    for (const auto& f : tests) {
        const auto f0 = propagate(*sym.G, f);
        moved = std::max(moved, rel_sup(scattering_apply(sym[0], lambdas[imax], f0), f0));
    }

    io::CsvTable t({"lambda", "symmetric_defect", "nonsymmetric_defect", "symmetric_absolute", "nonsymmetric_absolute"});
    double smax = 0.0;
    for (int k = 0; k < nl; ++k) {
        t.add({lambdas[k], rs[k].defect, rn[k].defect, rs[k].absolute, rn[k].absolute});
        smax = std::max(smax, rs[k].defect);
    }
    art.csv("bogoliubov_sweep.csv", t);
    rep.check_eq("symmetric_kernel_is_symmetric", rs[0].symmetric_kernel ? 1.0 : 0.0, 1.0);
    rep.check_eq("nonsymmetric_kernel_is_symmetric", rn[0].symmetric_kernel ? 1.0 : 0.0, 0.0);
    rep.check_le("symmetric_pairing_defect", smax, 1e-8);
    rep.check_ge("nonsymmetric_pairing_defect", rn[imax].defect, 1e-3);
    rep.check_ge("solutions_moved", moved, 1e-3, false);
    rep.details() = {{"lambda_rho_symmetric", std::abs(lambdas[imax]) * sym.rho_hat()},
                     {"lambda_rho_nonsymmetric", std::abs(lambdas[imax]) * non.rho_hat()},
                     {"pairing", "ccr"}};
}

// ---- moyal-converge -----------------------------------------------------

inline json moyal_defaults() {
    json cutoffs = json::array();
    for (double nu : {0.2, 0.3, 0.4, 0.5}) cutoffs.push_back(box_json(nu, 0.1));
    return {{"grid", {{"n_time", 101}, {"n_space", 301}, {"dt", 0.02}, {"dx", 0.02}, {"t0", -1.0}, {"x0", -3.0}}},
            {"operator", {{"variant", "wave"}, {"mass_squared", 1.0}}},
            {"basis_sources",
             {bump_json(-0.6, 0.0, 0.25, 1.0), bump_json(-0.6, 0.3, 0.25, 1.0), bump_json(0.6, -0.2, 0.25, 1.0)}},
            {"symbol", bump_json(0.0, 0.0, 0.15, 1.0)},
            {"theta0", 0.1},
            {"cutoffs", cutoffs},
            {"theta_limit", {{"thetas", {0.1, 0.05, 0.03, 0.02}}, {"cutoff", box_json(0.4, 0.1)}}},
            {"commutator",
             {{"a1", bump_json(0.0, -0.25, 0.15, 1.0)},
              {"a2", bump_json(0.0, 0.25, 0.15, 1.0)},
              {"theta0", 0.1},
              {"cutoff", box_json(0.4, 0.1)}}}};
}

/// Cutoff convergence of the Moyal approximants, their theta0 -> 0 limit and
/// the derivation commutator against the pointwise builder.
inline void run_moyal(const Config& c, Report& rep, Artifacts& art) {
    const auto op = parse_operator(c.at("operator"));
    const auto g = parse_grid(c.at("grid"), op.components());
    const auto bs = c.at("basis_sources");
    std::vector<BumpProfile> sources;
    for (std::size_t i = 0; i < bs.size(); ++i) sources.push_back(parse_bump(bs[i]));
    if (sources.empty()) throw ConfigError("basis_sources", "needs at least one source");
    const auto a = MoyalSymbol::from_bump(parse_bump(c.at("symbol")));
    const double theta0 = c.at("theta0").as_number();
    if (theta0 == 0.0) throw ConfigError("theta0", "must be nonzero");
    const auto cn = c.at("cutoffs");
    std::vector<SmoothBox> cutoffs;
    for (std::size_t i = 0; i < cn.size(); ++i) cutoffs.push_back(parse_box(cn[i]));
    if (cutoffs.size() < 3) throw ConfigError("cutoffs", "needs at least three levels for a decrease ratio");
    const auto tl = c.at("theta_limit");
    const auto thetas = tl.at("thetas").as_numbers();
    if (thetas.empty()) throw ConfigError("theta_limit.thetas", "needs at least one value");
    const auto gap_box = parse_box(tl.at("cutoff"));
    const auto cm = c.at("commutator");
    const auto a1 = MoyalSymbol::from_bump(parse_bump(cm.at("a1")));
    const auto a2 = MoyalSymbol::from_bump(parse_bump(cm.at("a2")));
    const double ctheta = cm.at("theta0").as_number();
    if (ctheta == 0.0) throw ConfigError("commutator.theta0", "must be nonzero");
    const auto cbox = parse_box(cm.at("cutoff"));
    c.parsed();

    const GreenOperator G(op.spec(g), BoundaryCheck::trace);
    std::vector<GridFunction> basis;
    config_block("basis_sources", [&] {
        for (const auto& s : sources) basis.push_back(propagate(G, s.sample(g)));
        return 0;
    });

    // cutoff convergence at theta0
    const auto table = approximant_convergence(G, DerivationProbe{a, PotentialBuilder::moyal, theta0}, cutoffs, basis);
    io::CsvTable tc({"level", "inner_x", "outer_x", "resolved", "max_diff"});
    for (std::size_t k = 0; k < table.levels.size(); ++k) {
        const auto& l = table.levels[k];
        tc.add({static_cast<long long>(k), l.cutoff.inner_x, l.cutoff.outer_x, static_cast<long long>(l.resolved),
                k == 0 ? std::nan("") : table.max_diff(k)});
    }
    art.csv("cutoff_convergence.csv", tc);

    // theta0 -> 0 against multiplication by a
    const int nt = static_cast<int>(thetas.size());
    std::vector<double> gaps(nt);
    std::vector<std::string> why(nt);
    parallel_for(nt, c.options.jobs, [&](int i, int) {
        try {
            gaps[i] = moyal_pointwise_gap(g, a, thetas[i], gap_box, basis[0]);
        } catch (const PreconditionError& e) {
            gaps[i] = std::nan("");
            why[i] = e.what();
        }
    });
    io::CsvTable tg({"theta0", "resolved", "relative_gap"});
    double gap = std::nan(""), gap_theta = std::nan("");
    json unresolved = json::array();
    for (int i = 0; i < nt; ++i) {
        const bool ok = why[i].empty();
        tg.add({thetas[i], static_cast<long long>(ok), gaps[i]});
        if (!ok) unresolved.push_back({{"theta0", thetas[i]}, {"reason", why[i]}});
        if (ok && (std::isnan(gap_theta) || std::abs(thetas[i]) < std::abs(gap_theta))) {
            gap = gaps[i];
            gap_theta = thetas[i];
        }
    }
    art.csv("theta_limit.csv", tg);

    const auto pw = derivation_commutator(G, DerivationProbe{a1}, DerivationProbe{a2}, basis);
    const auto my = derivation_commutator(G, DerivationProbe{a1, PotentialBuilder::moyal, ctheta, cbox},
                                          DerivationProbe{a2, PotentialBuilder::moyal, ctheta, cbox}, basis);
    io::CsvTable tk({"builder", "norm", "relative"});
    tk.add({std::string("pointwise"), pw.norm, pw.relative});
    tk.add({std::string("moyal"), my.norm, my.relative});
    art.csv("commutator.csv", tk);
    const double ratio = pw.norm > 0.0 ? my.norm / pw.norm : (my.norm > 0.0 ? INFINITY : 0.0);

    rep.check_eq("all_cutoff_levels_resolved", table.all_resolved() ? 1.0 : 0.0, 1.0);
    rep.check_ge("min_successive_decrease", table.min_decrease(), 2.0);
    rep.check_le("theta_limit_gap", gap, 1e-6);
    rep.check_gt("commutator_moyal_over_pointwise", ratio, 1.0, false);
    rep.details() = {{"theta_limit_smallest_resolved_theta0", Report::number_json(gap_theta)},
                     {"theta_limit_unresolved", unresolved},
                     {"commutator_pointwise", pw.norm},
                     {"commutator_moyal", my.norm}};
}

}  // namespace ncwave::cli
