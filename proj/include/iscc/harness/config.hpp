#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "iscc/io.hpp"
#include "iscc/solver/sca.hpp"

namespace iscc {

/*! Default centroids: four classes, six features, one pair (0, 2) noticeably closer than the rest. */
inline Mat default_centroids()
{
    Mat mu(4, 6);
    mu << 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
          4.5, 1.5, 0.0, 2.0, 0.0, 0.0,
          0.0, 4.5, 1.0, 0.0, 2.0, 0.0,
          2.0, 2.0, 4.0, 0.0, 0.0, 3.5;
    return mu;
}

struct ModelSource {
    std::string source = "synthetic";  // synthetic | sensing
    Mat mu = default_centroids();
    Vec sigma2 = Vec::Ones(6);
    int per_class = 200;               // sensing: training scenes per class
    int features = 6;                  // sensing: PCA dimension M
    std::uint64_t seed = 7;            // sensing: training-set stream
};

struct SweepSpec {
    std::string axis = "none";  // none | device_count | device_energy | cell_radius
    std::vector<double> values;
};

struct ExperimentConfig {
    // topology
    int K = 3;
    int N_r = 8;
    double R = 0.45;
    double ring_width = 0.05;
    // model
    ModelSource model;
    // sensing profile
    double sigma_s2 = 0.2;
    double sigma_r2 = 0.2;
    double T_s = 1.0;
    // channel
    double shadow_var_db2 = 8.0;
    double N0 = 1.0;
    double ref_distance_km = 0.45;
    // energy
    double E = 1.0;
    double E_p = 0.1;
    double T_c = 1.0;
    // experiment
    SweepSpec sweep;
    std::vector<std::string> schemes{"proposed", "avg-dg", "naive"};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int trials = 2000;
    ScaOptions solver;
    std::string out_dir = "out";
    bool timing = false;
    int jobs = 0;  // 0: hardware concurrency

    int cell_count() const { return sweep.axis == "none" ? 1 : static_cast<int>(sweep.values.size()); }

    void validate() const
    {
        auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
        if (K < 1 || N_r < 1) fail("topology.K and topology.N_r must be at least 1");
        if (!(R > 0.0) || ring_width < 0.0) fail("topology.R must be positive and ring_width nonnegative");
        if (model.source != "synthetic" && model.source != "sensing") fail("model.source must be synthetic or sensing");
        if (model.source == "synthetic") {
            if (model.mu.rows() < 2 || model.mu.cols() != model.sigma2.size())
                fail("model.mu must be L x M with L >= 2 and M = len(model.sigma2)");
            if (!(model.sigma2.minCoeff() > 0.0)) fail("model.sigma2 must be positive");
        } else if (model.per_class < 2 || model.features < 1) {
            fail("model.sensing needs per_class >= 2 and features >= 1");
        }
        if (sigma_s2 < 0.0 || !(sigma_r2 > 0.0) || !(T_s > 0.0)) fail("invalid sensing_profile");
        if (N0 < 0.0 || shadow_var_db2 < 0.0) fail("invalid channel parameters");
        if (!(E > E_p) || E_p < 0.0 || !(T_c > 0.0)) fail("energy.E must exceed energy.E_p >= 0 and T_c > 0");
        static const std::set<std::string> axes{"none", "device_count", "device_energy", "cell_radius"};
        if (!axes.count(sweep.axis)) fail("sweep.axis must be none, device_count, device_energy or cell_radius");
        if (sweep.axis != "none") {
            if (sweep.values.empty()) fail("sweep.values must be nonempty");
            for (std::size_t i = 1; i < sweep.values.size(); ++i)
                if (!(sweep.values[i] > sweep.values[i - 1])) fail("sweep.values must be strictly increasing");
            for (double v : sweep.values) {
                if (sweep.axis == "device_count" && (v < 1 || v != static_cast<int>(v))) fail("device counts must be positive integers");
                if (sweep.axis == "device_energy" && !(v > E_p)) fail("swept energies must exceed energy.E_p");
                if (sweep.axis == "cell_radius" && !(v > 0.0)) fail("swept radii must be positive");
            }
        }
        static const std::set<std::string> known{"proposed", "avg-dg", "naive"};
        if (schemes.empty()) fail("schemes must be nonempty");
        for (const auto& s : schemes)
            if (!known.count(s)) fail("unknown scheme '" + s + "'");
        if (seeds.empty()) fail("seeds must be nonempty");
        if (trials < 100) fail("trials must be at least 100");
        if (jobs < 0) fail("jobs must be nonnegative");
    }
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where)
{
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("config: unknown key '" + where + "." + it.key() + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + where + "." + key + "'");
    }
}

} // namespace detail

inline ExperimentConfig config_from_json(const json& j)
{
    using detail::check_keys;
    using detail::read;
    ExperimentConfig c;
    check_keys(j, {"topology", "model", "sensing_profile", "channel", "energy", "sweep", "schemes", "seeds", "trials",
                   "solver", "output", "jobs"},
               "config");
    if (j.contains("topology")) {
        const json& t = j["topology"];
        check_keys(t, {"K", "N_r", "R", "ring_width"}, "topology");
        read(t, "K", c.K, "topology");
        read(t, "N_r", c.N_r, "topology");
        read(t, "R", c.R, "topology");
        read(t, "ring_width", c.ring_width, "topology");
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, {"source", "mu", "sigma2", "per_class", "features", "seed"}, "model");
        read(m, "source", c.model.source, "model");
        if (m.contains("mu")) c.model.mu = mat_from_json(m["mu"], "config: model.mu");
        if (m.contains("sigma2")) c.model.sigma2 = vec_from_json(m["sigma2"], "config: model.sigma2");
        read(m, "per_class", c.model.per_class, "model");
        read(m, "features", c.model.features, "model");
        read(m, "seed", c.model.seed, "model");
    }
    if (j.contains("sensing_profile")) {
        const json& s = j["sensing_profile"];
        check_keys(s, {"sigma_s2", "sigma_r2", "T_s"}, "sensing_profile");
        read(s, "sigma_s2", c.sigma_s2, "sensing_profile");
        read(s, "sigma_r2", c.sigma_r2, "sensing_profile");
        read(s, "T_s", c.T_s, "sensing_profile");
    }
    if (j.contains("channel")) {
        const json& s = j["channel"];
        check_keys(s, {"shadow_var_db2", "N0", "ref_distance_km"}, "channel");
        read(s, "shadow_var_db2", c.shadow_var_db2, "channel");
        read(s, "N0", c.N0, "channel");
        read(s, "ref_distance_km", c.ref_distance_km, "channel");
    }
    if (j.contains("energy")) {
        const json& s = j["energy"];
        check_keys(s, {"E", "E_p", "T_c"}, "energy");
        read(s, "E", c.E, "energy");
        read(s, "E_p", c.E_p, "energy");
        read(s, "T_c", c.T_c, "energy");
    }
    if (j.contains("sweep")) {
        const json& s = j["sweep"];
        check_keys(s, {"axis", "values"}, "sweep");
        read(s, "axis", c.sweep.axis, "sweep");
        read(s, "values", c.sweep.values, "sweep");
    }
    read(j, "schemes", c.schemes, "config");
    read(j, "seeds", c.seeds, "config");
    read(j, "trials", c.trials, "config");
    read(j, "jobs", c.jobs, "config");
    if (j.contains("solver")) {
        const json& s = j["solver"];
        check_keys(s, {"outer_tol", "max_outer", "inner_tol", "max_inner"}, "solver");
        read(s, "outer_tol", c.solver.outer_tol, "solver");
        read(s, "max_outer", c.solver.max_outer, "solver");
        read(s, "inner_tol", c.solver.inner.tol, "solver");
        read(s, "max_inner", c.solver.inner.max_iters, "solver");
    }
    if (j.contains("output")) {
        const json& s = j["output"];
        check_keys(s, {"dir", "timing"}, "output");
        read(s, "dir", c.out_dir, "output");
        read(s, "timing", c.timing, "output");
    }
    c.validate();
    return c;
}

/*! Canonical form of everything that affects results (output paths and job count excluded). */
inline json to_json(const ExperimentConfig& c)
{
    json model{{"source", c.model.source}};
    if (c.model.source == "synthetic") {
        model["mu"] = mat_to_json(c.model.mu);
        model["sigma2"] = vec_to_json(c.model.sigma2);
    } else {
        model["per_class"] = c.model.per_class;
        model["features"] = c.model.features;
        model["seed"] = c.model.seed;
    }
    return {{"topology", {{"K", c.K}, {"N_r", c.N_r}, {"R", c.R}, {"ring_width", c.ring_width}}},
            {"model", model},
            {"sensing_profile", {{"sigma_s2", c.sigma_s2}, {"sigma_r2", c.sigma_r2}, {"T_s", c.T_s}}},
            {"channel", {{"shadow_var_db2", c.shadow_var_db2}, {"N0", c.N0}, {"ref_distance_km", c.ref_distance_km}}},
            {"energy", {{"E", c.E}, {"E_p", c.E_p}, {"T_c", c.T_c}}},
            {"sweep", {{"axis", c.sweep.axis}, {"values", c.sweep.values}}},
            {"schemes", c.schemes},
            {"seeds", c.seeds},
            {"trials", c.trials},
            {"solver",
             {{"outer_tol", c.solver.outer_tol},
              {"max_outer", c.solver.max_outer},
              {"inner_tol", c.solver.inner.tol},
              {"max_inner", c.solver.inner.max_iters}}}};
}

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash(const ExperimentConfig& c)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
    return buf;
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

} // namespace iscc
