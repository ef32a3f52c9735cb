#pragma once

// Registry of the named experiments and the driver shared by the CLI and the
// acceptance binary.

#include <optional>

#include "ncwave/experiments_scattering.hpp"

namespace ncwave::cli {

struct Experiment {
    std::string name;
    std::string summary;
    json (*defaults)();
    void (*run)(const Config&, Report&, Artifacts&);
};

inline const std::vector<Experiment>& experiments() {
    static const std::vector<Experiment> list{
        {"green-check", "Green identity and exact support properties of R+- and R+-_lambda", green_check_defaults,
         run_green_check},
        {"born", "Green identities of the perturbed resolvents (series and exact) and the adjoint relation",
         born_defaults, run_born},
        {"pole-scan", "rank-one pole of the resolvent and the series regime around it", pole_scan_defaults,
         run_pole_scan},
        {"cauchy-nonexistence", "least-squares residual of the candidate family under refinement",
         nonexistence_defaults, run_nonexistence},
        {"cauchy-nonuniqueness", "nonzero solution with zero Cauchy data", nonuniqueness_defaults, run_nonuniqueness},
        {"scatter", "Moller composition vs Born series and the mirrored inverse", scatter_defaults, run_scatter},
        {"derivative-check", "first-order convergence of the scattering derivative", derivative_defaults,
         run_derivative},
        {"bogoliubov", "pairing preserved by s_lambda for symmetric kernels only", bogoliubov_defaults, run_bogoliubov},
        {"moyal-converge", "Moyal approximants: cutoff tail, theta0 -> 0 limit, commutators", moyal_defaults,
         run_moyal},
    };
    return list;
}

inline const Experiment* find_experiment(const std::string& name) {
    for (const auto& e : experiments())
        if (e.name == name) return &e;
    return nullptr;
}

struct Outcome {
    int exit_code = exit_ok;
    json report;  // report JSON, or the error JSON
    std::optional<Report> assertions;
};

inline json error_json(const std::string& experiment, const std::string& kind, const std::string& message,
                       const std::string* field = nullptr) {
    json e{{"experiment", experiment}, {"error", kind}, {"message", message}};
    if (field) e["field"] = field->empty() ? "<root>" : *field;
    return e;
}

/// Runs one experiment on the defaults patched by `user`. A seed given on the
/// command line replaces the config seed. Never throws: errors become an
/// error JSON and their exit code.
inline Outcome run_experiment(const Experiment& ex, const json& user, const RunOptions& opt,
                              std::optional<std::uint64_t> seed = std::nullopt) {
    Outcome out;
    Artifacts art(opt.out, opt.write_files);
    auto fail = [&](int code, json e) {
        out.exit_code = code;
        out.report = std::move(e);
        if (opt.write_files) {
            try {
                io::write_json(opt.out / "error.json", out.report);
            } catch (const io::IoError&) {
            }
        }
        return out;
    };
    try {
        json cfg = effective_config(ex.defaults(), user);
        if (seed) {
            if (!cfg.contains("seed")) throw ConfigError("--seed", "this experiment takes no seed");
            cfg["seed"] = *seed;
        }
        const std::string hash = config_hash(cfg);
        Config c{Node(cfg), user, opt};
        Report rep(ex.name, opt.tolerance_scale);
        ex.run(c, rep, art);
        out.report = rep.to_json(hash);
        out.report["artifacts"] = art.files();
        if (opt.write_files) {
            io::write_json(opt.out / "config.json", cfg);
            io::write_json(opt.out / "report.json", out.report);
        }
        out.exit_code = rep.all_pass() ? exit_ok : exit_assertion_failed;
        out.assertions = std::move(rep);
        return out;
    } catch (const ConfigError& e) {
        return fail(exit_config, error_json(ex.name, "config", e.what(), &e.field()));
    } catch (const DivergenceError& e) {
        return fail(exit_divergence, error_json(ex.name, "divergence", e.what()));
    } catch (const io::IoError& e) {
        return fail(exit_io, error_json(ex.name, "io", e.what()));
    } catch (const Error& e) {
        return fail(exit_numerical, error_json(ex.name, "numerical", e.what()));
    } catch (const std::bad_alloc&) {
        return fail(exit_numerical, error_json(ex.name, "numerical", "out of memory"));
    }
}

}  // namespace ncwave::cli
