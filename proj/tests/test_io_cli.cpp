// CSV and report format, config handling and the command line contract.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <random>

#include "ncwave/experiments.hpp"
#include "test_support.hpp"

using namespace ncwave;
using namespace ncwave::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("ncwave_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args, const fs::path& stdout_file) {
    const std::string cmd = std::string(NCWAVE_CLI) + " " + args + " > " + stdout_file.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

Outcome run_quiet(const std::string& name, const json& user, fs::path out = {}) {
    RunOptions opt;
    opt.write_files = !out.empty();
    opt.out = out;
    return run_experiment(*find_experiment(name), user, opt);
}

}  // namespace

TEST(Csv, NumbersRoundTripExactly) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 1000; ++i) {
        const double v = nd(rng) * std::pow(10.0, int(i % 40) - 20);
        EXPECT_EQ(io::parse_number(io::format_number(v)), v);
    }
    EXPECT_EQ(io::format_number(0.5), "0.5");
    EXPECT_EQ(io::format_number(-1e-20), "-1e-20");
    EXPECT_TRUE(std::isnan(io::parse_number(io::format_number(std::nan("")))));
    EXPECT_EQ(io::parse_number("-inf"), -std::numeric_limits<double>::infinity());
    EXPECT_THROW(io::parse_number("1,5"), io::IoError);
    EXPECT_THROW(io::parse_number("1.5 "), io::IoError);
}

TEST(Csv, LayoutIsCommaDotLf) {
    io::CsvTable t({"a", "b", "c"});
    t.add({1.25, 3LL, std::string("x")});
    t.add({-0.0, -7LL, std::string("y")});
    EXPECT_EQ(t.str(), "a,b,c\n1.25,3,x\n-0,-7,y\n");
    EXPECT_THROW(t.add({1.0}), io::IoError);
    io::CsvTable q({"s"});
    q.add({std::string("needs,quote")});
    EXPECT_THROW(q.str(), io::IoError);
}

TEST(Csv, GridFunctionRoundTrip) {
    const auto g = make_grid(7, 9, 0.1, 0.2, -0.3, 1.0, 2);
    std::mt19937_64 rng(3);
    const auto f = test::random_function(g, rng);
    const auto dir = scratch("gridfn");
    io::write_grid_function(dir, "f", f);
    const auto back = io::read_grid_function(dir, "f");
    EXPECT_TRUE(back.grid() == g);
    EXPECT_EQ(back.values(), f.values());
}

TEST(Config, MergePatchOverDefaults) {
    const json d{{"a", 1}, {"b", {{"c", 2}, {"d", 3}}}};
    const auto e = effective_config(d, json{{"b", {{"c", 5}}}});
    EXPECT_EQ(e["a"], 1);
    EXPECT_EQ(e["b"]["c"], 5);
    EXPECT_EQ(e["b"]["d"], 3);
    EXPECT_THROW(effective_config(d, json::array()), ConfigError);
}

TEST(Config, HashIsCanonical) {
    const auto a = json::parse(R"({"x": 1, "y": [1, 2]})");
    const auto b = json::parse(R"({"y":[1,2],"x":1})");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 64u);
    EXPECT_NE(config_hash(a), config_hash(json::parse(R"({"x": 2, "y": [1, 2]})")));
}

TEST(Config, UnknownKeyNamesTheField) {
    const auto out = run_quiet("pole-scan", json::parse(R"({"run": {"ratio_ordr": 3}})"));
    EXPECT_EQ(out.exit_code, exit_config);
    EXPECT_EQ(out.report["field"], "run.ratio_ordr");
    const auto top = run_quiet("pole-scan", json::parse(R"({"gird": {}})"));
    EXPECT_EQ(top.exit_code, exit_config);
    EXPECT_EQ(top.report["field"], "gird");
}

TEST(Config, BadTypeAndRangeNameTheField) {
    auto out = run_quiet("pole-scan", json::parse(R"({"grid": {"dx": "small"}})"));
    EXPECT_EQ(out.exit_code, exit_config);
    EXPECT_EQ(out.report["field"], "grid.dx");
    out = run_quiet("pole-scan", json::parse(R"({"grid": {"dt": 0.02}})"));
    EXPECT_EQ(out.exit_code, exit_config);
    EXPECT_EQ(out.report["field"], "grid");
    out = run_quiet("cauchy-nonexistence", json::parse(R"({"run": {"levels": [0.01, -1]}})"));
    EXPECT_EQ(out.exit_code, exit_config);
    EXPECT_EQ(out.report["field"], "run.levels[1]");
    out = run_quiet("pole-scan", json::parse(R"({"kernel": {"w1": {"amplitude": [1, [2]]}}})"));
    EXPECT_EQ(out.exit_code, exit_config);
    EXPECT_EQ(out.report["error"], "config");
}

TEST(Report, ToleranceScaleLoosensBothWays) {
    Report r("x", 10.0);
    r.check_le("le", 5e-9, 1e-9);
    r.check_ge("ge", 0.2, 1.0);
    r.check_ge("fixed", 0.2, 1.0, false);
    r.check_eq("eq", 1.0, 1.0);
    r.check_le("nan", std::nan(""), 1.0);
    EXPECT_TRUE(r.find("le")->pass);
    EXPECT_DOUBLE_EQ(r.find("le")->tolerance, 1e-8);
    EXPECT_TRUE(r.find("ge")->pass);
    EXPECT_FALSE(r.find("fixed")->pass);
    EXPECT_TRUE(r.find("eq")->pass);
    EXPECT_FALSE(r.find("nan")->pass);
    const auto j = r.to_json("h");
    EXPECT_EQ(j["assertions"][4]["measured"], "nan");
    EXPECT_EQ(j["config_hash"], "h");
}

TEST(Report, SchemaAndDeterministicFiles) {
    const auto d1 = scratch("det1"), d2 = scratch("det2");
    const auto a = run_quiet("cauchy-nonuniqueness", json::object(), d1);
    const auto b = run_quiet("cauchy-nonuniqueness", json::object(), d2);
    ASSERT_EQ(a.exit_code, exit_ok);
    for (const char* key : {"experiment", "config_hash", "assertions"}) EXPECT_TRUE(a.report.contains(key)) << key;
    for (const auto& as : a.report["assertions"])
        for (const char* key : {"name", "measured", "tolerance", "pass"}) EXPECT_TRUE(as.contains(key)) << key;
    EXPECT_EQ(a.report, b.report);
    for (const char* f : {"pole_scan_advanced.csv", "witness.csv", "witness.json", "report.json", "config.json"}) {
        ASSERT_TRUE(fs::exists(d1 / f)) << f;
        EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
        EXPECT_EQ(slurp(d1 / f).find('\r'), std::string::npos) << f;
    }
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    const auto so = dir / "stdout.json";

    EXPECT_EQ(run_cli("cauchy-nonuniqueness --out " + (dir / "ok").string(), so), exit_ok);
    EXPECT_EQ(json::parse(slurp(so))["experiment"], "cauchy-nonuniqueness");

    {
        std::ofstream(dir / "bad.json") << R"({"run": {"t_sigma": 0.005}})";
    }
    EXPECT_EQ(run_cli("cauchy-nonuniqueness --no-files --config " + (dir / "bad.json").string(), so), exit_config);
    EXPECT_EQ(json::parse(slurp(so))["field"], "run.t_sigma");

    {
        std::ofstream(dir / "broken.json") << R"({"run": )";
    }
    EXPECT_EQ(run_cli("pole-scan --no-files --config " + (dir / "broken.json").string(), so), exit_config);
    EXPECT_EQ(run_cli("pole-scan --no-files --config " + (dir / "missing.json").string(), so), exit_config);
    EXPECT_EQ(json::parse(slurp(so))["field"], "--config");
    EXPECT_EQ(run_cli("pole-scan --no-files --jobs 0", so), exit_config);
    EXPECT_EQ(run_cli("cauchy-nonuniqueness --no-files --seed 3", so), exit_config);
    EXPECT_EQ(json::parse(slurp(so))["field"], "--seed");

    // a tolerance far below round-off turns a passing run into a failing one
    EXPECT_EQ(run_cli("cauchy-nonuniqueness --no-files --tolerance-scale 1e-6", so), exit_assertion_failed);

    // the series is outside its convergence regime
    {
        std::ofstream(dir / "div.json") << R"({"nonsymmetric_kernel": {"w2": {"t": 0.2, "x": 0.0}}})";
    }
    EXPECT_EQ(run_cli("bogoliubov --no-files --config " + (dir / "div.json").string(), so), exit_divergence);
    EXPECT_EQ(json::parse(slurp(so))["error"], "divergence");
}
