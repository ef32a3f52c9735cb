// Runs every experiment on its shipped defaults and prints one line per
// acceptance criterion. Exits nonzero when a criterion fails that is not on
// the list of known lattice limitations (see README).

#include <cstdio>
#include <iostream>
#include <map>
#include <set>

#include "ncwave/experiments.hpp"

using namespace ncwave::cli;

namespace {

struct Criterion {
    int id;
    std::string experiment;
    std::vector<std::string> assertions;  // empty: all of them
    std::string title;
};

// (experiment, assertion) pairs that cannot pass at lattice scale
const std::set<std::pair<std::string, std::string>> kKnownUnattainable{{"moyal-converge", "theta_limit_gap"}};

std::string describe(const Assertion& a) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s=%.3g%s%.3g", a.name.c_str(), a.measured, a.relation.c_str(), a.tolerance);
    return buf;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "born", {"series_lambda_rho", "series_green_identity_residual", "exact_green_identity_residual"},
         "Green identities of the perturbed resolvents"},
        {2, "green-check", {}, "support properties"},
        {3, "born", {"adjoint_relation_defect"}, "adjoint relation"},
        {4, "pole-scan", {}, "rank-one pole and series regime"},
        {5, "cauchy-nonuniqueness", {}, "non-uniqueness witness"},
        {6, "cauchy-nonexistence", {}, "non-existence probe"},
        {7, "scatter", {}, "scattering consistency"},
        {8, "derivative-check", {}, "derivative formula"},
        {9, "bogoliubov", {}, "one-particle Bogoliubov property"},
        {10, "moyal-converge", {}, "Moyal program"},
    };

    RunOptions opt;
    opt.write_files = false;
    opt.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::map<std::string, Outcome> runs;
    bool unexpected = false;

    for (const auto& c : criteria) {
        if (!runs.count(c.experiment)) {
            const auto t0 = std::chrono::steady_clock::now();
            runs[c.experiment] = run_experiment(*find_experiment(c.experiment), json::object(), opt);
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::printf("# %s finished in %.1f s (exit %d)\n", c.experiment.c_str(), s, runs[c.experiment].exit_code);
        }
        const auto& out = runs[c.experiment];
        if (!out.assertions) {
            std::printf("CRITERION %d FAIL %s: %s\n", c.id, c.title.c_str(), out.report.dump().c_str());
            unexpected = true;
            continue;
        }
        bool pass = true, only_known = true;
        std::string text;
        for (const auto& a : out.assertions->assertions()) {
            if (!c.assertions.empty() &&
                std::find(c.assertions.begin(), c.assertions.end(), a.name) == c.assertions.end())
                continue;
            text += (text.empty() ? "" : ", ") + describe(a) + (a.pass ? "" : " [FAIL]");
            if (!a.pass) {
                pass = false;
                if (!kKnownUnattainable.count({c.experiment, a.name})) only_known = false;
            }
        }
        std::printf("CRITERION %d %s %s (%s): %s\n", c.id, pass ? "PASS" : "FAIL", c.title.c_str(),
                    c.experiment.c_str(), text.c_str());
        if (!pass && only_known)
            std::printf("# criterion %d: the failing assertion is a known lattice limitation, see README\n", c.id);
        if (!pass && !only_known) unexpected = true;
    }
    std::fflush(stdout);
    return unexpected ? 1 : 0;
}
