// ncwave: runs one named experiment and writes its report and data files.

#include <iostream>

#include "CLI11.hpp"
#include "ncwave/experiments.hpp"

using namespace ncwave;
using namespace ncwave::cli;

int main(int argc, char** argv) {
    CLI::App app{"Experiments for hyperbolic equations with compactly supported kernel potentials"};
    app.require_subcommand(1, 1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int jobs = 1;
    double tolerance_scale = 1.0;
    bool dump_config = false, no_files = false;

    for (const auto& ex : experiments()) {
        auto* sub = app.add_subcommand(ex.name, ex.summary);
        sub->add_option("--config", config_path, "JSON file merged over the built-in defaults");
        sub->add_option("--out", out_dir, "output directory (default out/<experiment>)");
        sub->add_option("--seed", seed, "replaces the seed in the config");
        sub->add_option("--jobs", jobs, "worker threads")->check(CLI::Range(1, 1024));
        sub->add_option("--tolerance-scale", tolerance_scale, "multiplies every tolerance")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--dump-config", dump_config, "print the default config and exit");
        sub->add_flag("--no-files", no_files, "only print the report");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    const auto* sub = app.get_subcommands().front();
    const Experiment& ex = *find_experiment(sub->get_name());
    if (dump_config) {
        std::cout << ex.defaults().dump(2) << "\n";
        return exit_ok;
    }

    RunOptions opt;
    opt.out = out_dir.empty() ? std::filesystem::path("out") / ex.name : std::filesystem::path(out_dir);
    opt.jobs = jobs;
    opt.tolerance_scale = tolerance_scale;
    opt.write_files = !no_files;

    json user = json::object();
    if (!config_path.empty()) {
        try {
            user = parse_config_text(io::read_text(config_path));
            if (!user.is_object()) throw ConfigError("", "config must be a JSON object");
        } catch (const ConfigError& e) {
            const auto err = error_json(ex.name, "config", e.what(), &e.field());
            std::cout << err.dump(2) << "\n";
            return exit_config;
        } catch (const io::IoError& e) {
            const std::string field = "--config";
            std::cout << error_json(ex.name, "config", e.what(), &field).dump(2) << "\n";
            return exit_config;
        }
    }

    std::optional<std::uint64_t> seed_override;
    if (sub->count("--seed")) seed_override = seed;
    const auto outcome = run_experiment(ex, user, opt, seed_override);
    std::cout << outcome.report.dump(2) << "\n";
    return outcome.exit_code;
}
