#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "condsamp/errors.hpp"
#include "condsamp/io.hpp"

// Experiment configuration documents. Parsing is strict: unknown keys are
// rejected and every error names the offending field by its dotted path.

namespace condsamp {

namespace cfg {

using nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object", path);
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key \"" + (path.empty() ? key : path + "." + key) + "\"",
                              path.empty() ? key : path + "." + key);
}

template <typename T>
T get_required(const json& obj, const std::string& key, const std::string& path) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!obj.contains(key)) throw ConfigError("missing required field \"" + full + "\"", full);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field \"" + full + "\" has the wrong type", full);
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    return get_required<T>(obj, key, path);
}

struct SystemConfig {
    std::string id;
    std::map<std::string, double> params;

    static SystemConfig parse(const json& j, const std::string& path) {
        check_keys(j, {"id", "params"}, path);
        SystemConfig s;
        s.id = get_required<std::string>(j, "id", path);
        if (j.contains("params")) {
            if (!j.at("params").is_object())
                throw ConfigError("field \"" + path + ".params\" must be an object",
                                  path + ".params");
            for (const auto& [k, v] : j.at("params").items()) {
                if (!v.is_number())
                    throw ConfigError("field \"" + path + ".params." + k + "\" must be a number",
                                      path + ".params." + k);
                s.params[k] = v.get<double>();
            }
        }
        return s;
    }
    json to_json() const { return json{{"id", id}, {"params", params}}; }
};

struct BiasConfig {
    std::string kind = "raw_coordinate";
    double k = 1.0;
    double target = 0.0;
    int cv_index = 0;
    std::string dmap_model_path;
    int coord_index = 1;

    static BiasConfig parse(const json& j, const std::string& path) {
        check_keys(j, {"kind", "k", "target", "cv_index", "dmap_model_path", "coord_index"},
                   path);
        BiasConfig b;
        b.kind = get_required<std::string>(j, "kind", path);
        if (b.kind != "raw_coordinate" && b.kind != "learned_cv")
            throw ConfigError("field \"" + path + ".kind\" must be raw_coordinate or learned_cv",
                              path + ".kind");
        b.k = get_required<double>(j, "k", path);
        if (b.k <= 0.0)
            throw ConfigError("field \"" + path + ".k\" must be positive", path + ".k");
        b.target = get_required<double>(j, "target", path);
        if (b.kind == "raw_coordinate") {
            b.cv_index = get_or<int>(j, "cv_index", path, 0);
        } else {
            b.dmap_model_path = get_required<std::string>(j, "dmap_model_path", path);
            b.coord_index = get_or<int>(j, "coord_index", path, 1);
        }
        return b;
    }
    json to_json() const {
        json j{{"kind", kind}, {"k", k}, {"target", target}};
        if (kind == "raw_coordinate") {
            j["cv_index"] = cv_index;
        } else {
            j["dmap_model_path"] = dmap_model_path;
            j["coord_index"] = coord_index;
        }
        return j;
    }
};

struct UmbrellaConfig {
    SystemConfig system;
    BiasConfig bias;
    std::vector<double> x0;
    long steps = 0;
    long warmup = -1;  // default: 10% of steps
    double dt = 1.0;
    std::uint64_t seed = 0;

    static UmbrellaConfig parse(const json& j) {
        check_keys(j, {"system", "bias", "x0", "steps", "warmup", "dt", "seed"}, "");
        UmbrellaConfig c;
        c.system = SystemConfig::parse(j.at("system"), "system");
        c.bias = BiasConfig::parse(j.at("bias"), "bias");
        c.x0 = get_required<std::vector<double>>(j, "x0", "");
        c.steps = get_required<long>(j, "steps", "");
        if (c.steps < 1) throw ConfigError("field \"steps\" must be >= 1", "steps");
        c.warmup = get_or<long>(j, "warmup", "", c.steps / 10);
        c.dt = get_required<double>(j, "dt", "");
        c.seed = get_or<std::uint64_t>(j, "seed", "", 0);
        return c;
    }
    json to_json() const {
        return json{{"system", system.to_json()}, {"bias", bias.to_json()}, {"x0", x0},
                    {"steps", steps},             {"warmup", warmup},       {"dt", dt},
                    {"seed", seed}};
    }
};

struct CoupleConfig {
    SystemConfig system;
    std::string gan_model_path;
    BiasConfig bias;
    int n_chains = 10;
    long steps_per_chain = 1000;
    long warmup = -1;
    double dt = 1.0;
    std::uint64_t seed = 0;
    double target_label = 0.0;
    int fast_coord = 1;
    int hist_bins = 100;
    std::optional<std::pair<double, double>> hist_range;

    static CoupleConfig parse(const json& j) {
        check_keys(j,
                   {"system", "gan_model_path", "bias", "n_chains", "steps_per_chain",
                    "warmup", "dt", "seed", "target_label", "fast_coord", "hist_bins",
                    "hist_range"},
                   "");
        CoupleConfig c;
        c.system = SystemConfig::parse(j.at("system"), "system");
        c.gan_model_path = get_required<std::string>(j, "gan_model_path", "");
        c.bias = BiasConfig::parse(j.at("bias"), "bias");
        c.n_chains = get_required<int>(j, "n_chains", "");
        if (c.n_chains < 1) throw ConfigError("field \"n_chains\" must be >= 1", "n_chains");
        c.steps_per_chain = get_required<long>(j, "steps_per_chain", "");
        c.warmup = get_or<long>(j, "warmup", "", c.steps_per_chain / 10);
        if (c.warmup >= c.steps_per_chain)
            throw ConfigError("field \"warmup\" must be below steps_per_chain", "warmup");
        c.dt = get_required<double>(j, "dt", "");
        c.seed = get_or<std::uint64_t>(j, "seed", "", 0);
        c.target_label = get_required<double>(j, "target_label", "");
        c.fast_coord = get_or<int>(j, "fast_coord", "", 1);
        c.hist_bins = get_or<int>(j, "hist_bins", "", 100);
        if (j.contains("hist_range")) {
            const auto v = get_required<std::vector<double>>(j, "hist_range", "");
            if (v.size() != 2 || !(v[0] < v[1]))
                throw ConfigError("field \"hist_range\" must be [lo, hi] with lo < hi",
                                  "hist_range");
            c.hist_range = {v[0], v[1]};
        }
        return c;
    }
    json to_json() const {
        json j{{"system", system.to_json()},
               {"gan_model_path", gan_model_path},
               {"bias", bias.to_json()},
               {"n_chains", n_chains},
               {"steps_per_chain", steps_per_chain},
               {"warmup", warmup},
               {"dt", dt},
               {"seed", seed},
               {"target_label", target_label},
               {"fast_coord", fast_coord},
               {"hist_bins", hist_bins}};
        if (hist_range) j["hist_range"] = {hist_range->first, hist_range->second};
        return j;
    }
};

struct BenchConfig {
    SystemConfig system;
    std::string gan_model_path;
    double slow_target = 5.0;
    int slow_coord = 0;
    int fast_coord = 1;
    double k = 10.0;
    double dt = 1e-3;
    std::vector<long> budgets;
    int n_trials = 50;
    int n_chains = 10;
    std::vector<std::string> methods{"us_only", "coupled"};
    int hist_bins = 260;
    std::pair<double, double> hist_range{-1.3, 1.3};
    std::vector<double> us_start;
    std::uint64_t seed = 0;

    static BenchConfig parse(const json& j) {
        check_keys(j,
                   {"system", "gan_model_path", "slow_target", "slow_coord", "fast_coord",
                    "k", "dt", "budgets", "n_trials", "n_chains", "methods", "hist_bins",
                    "hist_range", "us_start", "seed"},
                   "");
        BenchConfig c;
        c.system = SystemConfig::parse(j.at("system"), "system");
        c.gan_model_path = get_required<std::string>(j, "gan_model_path", "");
        c.slow_target = get_or<double>(j, "slow_target", "", 5.0);
        c.slow_coord = get_or<int>(j, "slow_coord", "", 0);
        c.fast_coord = get_or<int>(j, "fast_coord", "", 1);
        c.k = get_or<double>(j, "k", "", 10.0);
        if (c.k <= 0.0) throw ConfigError("field \"k\" must be positive", "k");
        c.dt = get_required<double>(j, "dt", "");
        c.budgets = get_required<std::vector<long>>(j, "budgets", "");
        c.n_trials = get_or<int>(j, "n_trials", "", 50);
        c.n_chains = get_or<int>(j, "n_chains", "", 10);
        c.methods = get_or<std::vector<std::string>>(j, "methods", "",
                                                     {"us_only", "coupled"});
        for (const auto& m : c.methods)
            if (m != "us_only" && m != "coupled")
                throw ConfigError("field \"methods\" entries must be us_only or coupled",
                                  "methods");
        c.hist_bins = get_or<int>(j, "hist_bins", "", 260);
        if (j.contains("hist_range")) {
            const auto v = get_required<std::vector<double>>(j, "hist_range", "");
            if (v.size() != 2 || !(v[0] < v[1]))
                throw ConfigError("field \"hist_range\" must be [lo, hi] with lo < hi",
                                  "hist_range");
            c.hist_range = {v[0], v[1]};
        }
        c.us_start = get_required<std::vector<double>>(j, "us_start", "");
        c.seed = get_or<std::uint64_t>(j, "seed", "", 0);
        return c;
    }
    json to_json() const {
        return json{{"system", system.to_json()},
                    {"gan_model_path", gan_model_path},
                    {"slow_target", slow_target},
                    {"slow_coord", slow_coord},
                    {"fast_coord", fast_coord},
                    {"k", k},
                    {"dt", dt},
                    {"budgets", budgets},
                    {"n_trials", n_trials},
                    {"n_chains", n_chains},
                    {"methods", methods},
                    {"hist_bins", hist_bins},
                    {"hist_range", {hist_range.first, hist_range.second}},
                    {"us_start", us_start},
                    {"seed", seed}};
    }
};

struct ClosureConfig {
    SystemConfig system;
    std::string gan_model_path;
    double grid_lo = 0.0, grid_hi = 1.0;
    int grid_n = 11;
    int n_per_point = 10000;
    int slow_coord = 0;
    std::uint64_t seed = 0;
    bool run_ode = false;
    double ode_z0 = 0.0, ode_time = 1.0, ode_dt = 1.0;

    static ClosureConfig parse(const json& j) {
        check_keys(j, {"system", "gan_model_path", "grid", "n_per_point", "slow_coord",
                       "seed", "ode"},
                   "");
        ClosureConfig c;
        c.system = SystemConfig::parse(j.at("system"), "system");
        c.gan_model_path = get_required<std::string>(j, "gan_model_path", "");
        const json& g = j.at("grid");
        check_keys(g, {"lo", "hi", "n"}, "grid");
        c.grid_lo = get_required<double>(g, "lo", "grid");
        c.grid_hi = get_required<double>(g, "hi", "grid");
        c.grid_n = get_required<int>(g, "n", "grid");
        if (c.grid_n < 2 || !(c.grid_lo < c.grid_hi))
            throw ConfigError("field \"grid\" must satisfy lo < hi, n >= 2", "grid");
        c.n_per_point = get_or<int>(j, "n_per_point", "", 10000);
        c.slow_coord = get_or<int>(j, "slow_coord", "", 0);
        c.seed = get_or<std::uint64_t>(j, "seed", "", 0);
        if (j.contains("ode")) {
            const json& o = j.at("ode");
            check_keys(o, {"z0", "T", "dt"}, "ode");
            c.run_ode = true;
            c.ode_z0 = get_required<double>(o, "z0", "ode");
            c.ode_time = get_required<double>(o, "T", "ode");
            c.ode_dt = get_required<double>(o, "dt", "ode");
        }
        return c;
    }
    json to_json() const {
        json j{{"system", system.to_json()},
               {"gan_model_path", gan_model_path},
               {"grid", {{"lo", grid_lo}, {"hi", grid_hi}, {"n", grid_n}}},
               {"n_per_point", n_per_point},
               {"slow_coord", slow_coord},
               {"seed", seed}};
        if (run_ode) j["ode"] = {{"z0", ode_z0}, {"T", ode_time}, {"dt", ode_dt}};
        return j;
    }
};

inline json load_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(io::read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace cfg

}  // namespace condsamp
