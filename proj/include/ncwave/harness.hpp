#pragma once

// Plumbing for the experiment CLI: config reading with field paths, the
// JSON report, exit codes and a small worker pool.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "ncwave/diffops.hpp"
#include "ncwave/errors.hpp"
#include "ncwave/io.hpp"
#include "ncwave/kernels.hpp"
#include "ncwave/lattice.hpp"
#include "ncwave/profiles.hpp"

namespace ncwave::cli {

using json = nlohmann::json;

enum ExitCode : int {
    exit_ok = 0,
    exit_assertion_failed = 1,
    exit_config = 2,
    exit_divergence = 3,
    exit_numerical = 4,
    exit_io = 5,
};

// Invalid or unknown configuration entry; `field` is a dotted path.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what) : Error(what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct RunOptions {
    std::filesystem::path out = "out";
    std::uint64_t seed = 1;
    int jobs = 1;
    double tolerance_scale = 1.0;
    bool write_files = true;
};

// ---- config -------------------------------------------------------------

/// Read-only view of a config subtree. Every key that is read is recorded, so
/// that keys nobody asked for can be reported afterwards.
class Node {
public:
    Node(const json& j, std::string path, std::shared_ptr<std::set<std::string>> seen)
        : j_(&j), path_(std::move(path)), seen_(std::move(seen)) {
        seen_->insert(path_);
    }
    explicit Node(const json& root) : Node(root, "", std::make_shared<std::set<std::string>>()) {}

    const std::string& path() const { return path_; }
    const json& raw() const { return *j_; }

    std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string index_path(std::size_t i) const { return path_ + "[" + std::to_string(i) + "]"; }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    Node at(const std::string& key) const {
        if (!j_->is_object()) throw ConfigError(path_, "expected an object");
        const auto it = j_->find(key);
        if (it == j_->end()) throw ConfigError(child_path(key), "missing field");
        return Node(*it, child_path(key), seen_);
    }

    std::size_t size() const {
        if (!j_->is_array()) throw ConfigError(path_, "expected an array");
        return j_->size();
    }
    Node operator[](std::size_t i) const {
        if (!j_->is_array() || i >= j_->size()) throw ConfigError(index_path(i), "missing array entry");
        return Node((*j_)[i], index_path(i), seen_);
    }

    double as_number() const {
        if (!j_->is_number()) throw ConfigError(path_, "expected a number");
        const double v = j_->get<double>();
        if (!std::isfinite(v)) throw ConfigError(path_, "expected a finite number");
        return v;
    }
    long long as_integer() const {
        if (!j_->is_number_integer()) throw ConfigError(path_, "expected an integer");
        return j_->get<long long>();
    }
    bool as_bool() const {
        if (!j_->is_boolean()) throw ConfigError(path_, "expected true or false");
        return j_->get<bool>();
    }
    std::string as_string() const {
        if (!j_->is_string()) throw ConfigError(path_, "expected a string");
        return j_->get<std::string>();
    }
    /// A number or a [re, im] pair.
    cplx as_complex() const {
        if (j_->is_number()) return {as_number(), 0.0};
        if (j_->is_array() && j_->size() == 2 && (*j_)[0].is_number() && (*j_)[1].is_number())
            return {(*this)[0].as_number(), (*this)[1].as_number()};
        throw ConfigError(path_, "expected a number or [re, im]");
    }
    std::vector<double> as_numbers() const {
        std::vector<double> v;
        for (std::size_t i = 0; i < size(); ++i) v.push_back((*this)[i].as_number());
        return v;
    }

    double number(const std::string& key) const { return at(key).as_number(); }
    double positive(const std::string& key) const {
        const double v = number(key);
        if (!(v > 0.0)) throw ConfigError(child_path(key), "must be positive");
        return v;
    }
    int integer(const std::string& key, long long lo, long long hi) const {
        const auto v = at(key).as_integer();
        if (v < lo || v > hi)
            throw ConfigError(child_path(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        return static_cast<int>(v);
    }
    std::string choice(const std::string& key, const std::vector<std::string>& allowed) const {
        const auto v = at(key).as_string();
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            throw ConfigError(child_path(key), "must be one of: " + list);
        }
        return v;
    }

    /// Throws for the first key of `user` (the file as written, before the
    /// defaults were merged in) that was never read below this node.
    void reject_unread(const json& user) const { check_unread(user, path_); }

private:
    void check_unread(const json& j, const std::string& path) const {
        if (!j.is_object()) return;
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string p = path.empty() ? it.key() : path + "." + it.key();
            if (!seen_->count(p)) throw ConfigError(p, "unknown field");
            check_unread(it.value(), p);
        }
    }

    const json* j_;
    std::string path_;
    std::shared_ptr<std::set<std::string>> seen_;
};

/// Library errors raised while turning a block into objects are reported as
/// config errors on that block.
template <class Fn>
auto config_block(const std::string& field, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const GridError& e) {
        throw ConfigError(field, e.what());
    } catch (const PreconditionError& e) {
        throw ConfigError(field, e.what());
    }
}

/// Built-in defaults with the user file applied as a JSON merge patch.
inline json effective_config(const json& defaults, const json& user) {
    if (!user.is_object()) throw ConfigError("", "config must be a JSON object");
    json out = defaults;
    out.merge_patch(user);
    return out;
}

inline json parse_config_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
    }
}

/// SHA-256 of the canonical (sorted-key, compact) dump.
inline std::string config_hash(const json& cfg) {
    const std::string s = cfg.dump();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(s.data(), s.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

/// What an experiment sees: the effective config, the file as written (for
/// the unknown-key check) and the command line options.
struct Config {
    Node root;
    json user;
    RunOptions options;

    Node at(const std::string& key) const { return root.at(key); }
    // call once everything is parsed, before any numerical work
    void parsed() const { root.reject_unread(user); }
};

/// Output files of one run, written as they are produced.
class Artifacts {
public:
    Artifacts(std::filesystem::path dir, bool enabled) : dir_(std::move(dir)), enabled_(enabled) {}

    void csv(const std::string& name, const io::CsvTable& t) {
        if (enabled_) t.write(dir_ / name);
        files_.push_back(name);
    }
    void json_file(const std::string& name, const json& j) {
        if (enabled_) io::write_json(dir_ / name, j);
        files_.push_back(name);
    }
    void grid_function(const std::string& stem, const GridFunction& f) {
        if (enabled_) io::write_grid_function(dir_, stem, f);
        files_.push_back(stem + ".csv");
        files_.push_back(stem + ".json");
    }
    const std::vector<std::string>& files() const { return files_; }

private:
    std::filesystem::path dir_;
    bool enabled_;
    std::vector<std::string> files_;
};

// ---- parse helpers ------------------------------------------------------

/// {"n_time", "n_space", "dt", "dx", "t0", "x0"}; components come from the operator.
inline SpacetimeGrid parse_grid(const Node& n, int components) {
    const int nt = n.integer("n_time", 3, 20001);
    const int nx = n.integer("n_space", 3, 20001);
    const double dt = n.positive("dt"), dx = n.positive("dx");
    const double t0 = n.number("t0"), x0 = n.number("x0");
    return config_block(n.path(), [&] { return make_grid(nt, nx, dt, dx, t0, x0, components); });
}

struct OperatorChoice {
    bool dirac = false;
    double mass_squared = 0.0;  // wave
    double mass = 0.0;          // dirac
    int components() const { return dirac ? 2 : 1; }
    OperatorSpec spec(const SpacetimeGrid& g) const {
        return dirac ? make_operator(g, DiracPairSpec::standard(mass)) : wave_operator(g, mass_squared);
    }
};

/// {"variant": "wave", "mass_squared"} or {"variant": "dirac", "mass"}.
inline OperatorChoice parse_operator(const Node& n) {
    OperatorChoice o;
    o.dirac = n.choice("variant", {"wave", "dirac"}) == "dirac";
    if (o.dirac)
        o.mass = n.number("mass");
    else
        o.mass_squared = n.number("mass_squared");
    return o;
}

/// {"t", "x", "r_t", "r_x", "amplitude"}; amplitude is a real number or a
/// list with one value per component, each a number or [re, im].
inline BumpProfile parse_bump(const Node& n) {
    BumpProfile b;
    b.t_c = n.number("t");
    b.x_c = n.number("x");
    b.r_t = n.positive("r_t");
    b.r_x = n.positive("r_x");
    const auto a = n.at("amplitude");
    b.amplitude.clear();
    if (a.raw().is_number()) {
        b.amplitude.push_back(a.as_complex());
    } else if (a.raw().is_array()) {
        if (a.size() == 0) throw ConfigError(a.path(), "amplitude list is empty");
        for (std::size_t i = 0; i < a.size(); ++i) b.amplitude.push_back(a[i].as_complex());
    } else {
        throw ConfigError(a.path(), "expected a number or a list of per-component values");
    }
    return b;
}

inline json bump_json(double t, double x, double r, json amplitude) {
    return {{"t", t}, {"x", x}, {"r_t", r}, {"r_x", r}, {"amplitude", std::move(amplitude)}};
}

/// {"t", "x", "inner_t", "outer_t", "inner_x", "outer_x"}
inline SmoothBox parse_box(const Node& n) {
    SmoothBox b{n.number("t"), n.number("x"), n.positive("inner_t"), n.positive("outer_t"),
                n.positive("inner_x"), n.positive("outer_x")};
    if (!(b.inner_t < b.outer_t)) throw ConfigError(n.child_path("outer_t"), "must exceed inner_t");
    if (!(b.inner_x < b.outer_x)) throw ConfigError(n.child_path("outer_x"), "must exceed inner_x");
    return b;
}

inline json box_json(double half, double transition) {
    return {{"t", 0.0},         {"x", 0.0},
            {"inner_t", half},  {"outer_t", half + transition},
            {"inner_x", half},  {"outer_x", half + transition}};
}

/// Kernel block:
///   {"variant": "rank_one", "w1": bump, "w2": bump}
///   {"variant": "finite_rank", "pairs": [[bump, bump], ...]}
///   {"variant": "pointwise", "a": bump}
///   {"variant": "moyal", "a": bump, "theta0", "cutoff": box}
inline KernelPotential parse_kernel(const Node& n, const SpacetimeGrid& g, double* theta0_out = nullptr) {
    const auto v = n.choice("variant", {"rank_one", "finite_rank", "pointwise", "moyal"});
    if (theta0_out) *theta0_out = 0.0;
    if (v == "rank_one") {
        const auto b1 = parse_bump(n.at("w1")), b2 = parse_bump(n.at("w2"));
        return config_block(n.path(), [&] { return KernelPotential::rank_one(b1.sample(g), b2.sample(g)); });
    }
    if (v == "finite_rank") {
        const auto pairs = n.at("pairs");
        std::vector<std::pair<BumpProfile, BumpProfile>> bs;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const auto p = pairs[i];
            if (p.size() != 2) throw ConfigError(p.path(), "expected [w1, w2]");
            bs.emplace_back(parse_bump(p[0]), parse_bump(p[1]));
        }
        return config_block(n.path(), [&] {
            std::vector<std::pair<GridFunction, GridFunction>> fs;
            for (const auto& [a, b] : bs) fs.emplace_back(a.sample(g), b.sample(g));
            return KernelPotential::finite_rank(g, fs);
        });
    }
    const auto a = parse_bump(n.at("a"));
    if (v == "pointwise")
        return config_block(n.path(), [&] { return pointwise_kernel(a.sample(g)); });
    const double theta0 = n.number("theta0");
    if (theta0 == 0.0) throw ConfigError(n.child_path("theta0"), "must be nonzero");
    const auto box = parse_box(n.at("cutoff"));
    if (theta0_out) *theta0_out = theta0;
    return config_block(n.path(), [&] { return moyal_kernel(g, MoyalSymbol::from_bump(a), theta0, box); });
}

// ---- report -------------------------------------------------------------

struct Assertion {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;  // effective bound after the tolerance scale
    std::string relation;    // "<=", "<", ">=", ">", "=="
    bool pass = false;
};

class Report {
public:
    Report(std::string experiment, double tolerance_scale)
        : experiment_(std::move(experiment)), scale_(tolerance_scale) {}

    const std::string& experiment() const { return experiment_; }
    const std::vector<Assertion>& assertions() const { return assertions_; }
    json& details() { return details_; }
    const json& details() const { return details_; }

    // Upper bounds are multiplied by the tolerance scale, lower bounds divided;
    // pass scaled = false for thresholds that are part of the setup.
    void check_le(const std::string& name, double measured, double bound, bool scaled = true) {
        const double b = scaled ? bound * scale_ : bound;
        add({name, measured, b, "<=", measured <= b});
    }
    void check_lt(const std::string& name, double measured, double bound, bool scaled = true) {
        const double b = scaled ? bound * scale_ : bound;
        add({name, measured, b, "<", measured < b});
    }
    void check_ge(const std::string& name, double measured, double bound, bool scaled = true) {
        const double b = scaled ? bound / scale_ : bound;
        add({name, measured, b, ">=", measured >= b});
    }
    void check_gt(const std::string& name, double measured, double bound, bool scaled = true) {
        const double b = scaled ? bound / scale_ : bound;
        add({name, measured, b, ">", measured > b});
    }
    // exact comparisons are never loosened
    void check_eq(const std::string& name, double measured, double target) {
        add({name, measured, target, "==", measured == target});
    }

    bool all_pass() const {
        return std::all_of(assertions_.begin(), assertions_.end(), [](const Assertion& a) { return a.pass; });
    }
    const Assertion* find(const std::string& name) const {
        for (const auto& a : assertions_)
            if (a.name == name) return &a;
        return nullptr;
    }

    json to_json(const std::string& hash) const {
        json as = json::array();
        for (const auto& a : assertions_)
            as.push_back({{"name", a.name},
                          {"measured", number_json(a.measured)},
                          {"tolerance", number_json(a.tolerance)},
                          {"relation", a.relation},
                          {"pass", a.pass}});
        json r{{"experiment", experiment_}, {"config_hash", hash}, {"assertions", as}, {"pass", all_pass()}};
        if (!details_.is_null()) r["details"] = details_;
        return r;
    }

    // non-finite values do not exist in JSON: written as strings
    static json number_json(double v) { return std::isfinite(v) ? json(v) : json(io::format_number(v)); }

private:
    void add(Assertion a) {
        if (std::isnan(a.measured)) a.pass = false;
        assertions_.push_back(std::move(a));
    }

    std::string experiment_;
    double scale_;
    std::vector<Assertion> assertions_;
    json details_;
};

inline json complex_json(cplx z) { return json::array({Report::number_json(z.real()), Report::number_json(z.imag())}); }

/// Random smooth source: a bump of radius r centered in [ta+r, tb-r] x
/// [xa+r, xb-r] with normal complex (or real) amplitudes per component.
inline BumpProfile random_source(const SpacetimeGrid& g, std::mt19937_64& rng, double ta, double tb, double xa,
                                 double xb, double r, bool real = false) {
    std::uniform_real_distribution<double> ut(ta + r, tb - r), ux(xa + r, xb - r);
    std::normal_distribution<double> nd;
    BumpProfile b;
    b.t_c = ut(rng);
    b.x_c = ux(rng);
    b.r_t = b.r_x = r;
    b.amplitude.clear();
    for (int a = 0; a < g.components; ++a) b.amplitude.emplace_back(nd(rng), real ? 0.0 : nd(rng));
    return b;
}

// ---- workers ------------------------------------------------------------

/// Runs fn(i, worker) for i in [0, n) on `jobs` threads. Items are claimed in
/// order; results must be stored by index so the output does not depend on
/// the thread count. The first exception (lowest index) is rethrown.
inline void parallel_for(int n, int jobs, const std::function<void(int, int)>& fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::atomic<int> next{0};
    std::mutex mu;
    int failed_at = n;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&, w] {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i, w);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (i < failed_at) {
                        failed_at = i;
                        error = std::current_exception();
                    }
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace ncwave::cli
