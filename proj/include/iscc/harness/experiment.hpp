#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "iscc/harness/classify.hpp"
#include "iscc/harness/config.hpp"
#include "iscc/sensing.hpp"
#include "iscc/solver/baselines.hpp"

namespace iscc {

struct RunRecord {
    std::string config_hash;
    int cell = 0;
    double cell_value = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
    std::string scheme;
    double alpha = std::numeric_limits<double>::quiet_NaN();  // achieved min pair gain
    ClassPair min_pair{0, 0};
    Vec pair_gains;                                           // per pair, summed over features
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double ci_halfwidth = std::numeric_limits<double>::quiet_NaN();
    int outer_iters = 0;
    double kkt = std::numeric_limits<double>::quiet_NaN();
    std::string status;
    double wall_ms = 0.0;

    bool ok() const { return status.rfind("error", 0) != 0; }
};

/*! Mixture model from the config: the literal centroids, or a PCA fit to synthetic radar scenes. */
inline MixtureModel build_model(const ExperimentConfig& cfg)
{
    if (cfg.model.source == "synthetic") return MixtureModel::make(cfg.model.mu, cfg.model.sigma2);
    SceneGenerator gen;
    Rng rng = make_stream(cfg.model.seed, 0);
    LabeledSet set = generate_training_set(gen, cfg.model.per_class, rng);
    return pca_fit(set.X, cfg.model.features, set.labels).to_mixture();
}

/*! Per-cell copy of the config with the swept parameter applied. */
inline ExperimentConfig cell_config(const ExperimentConfig& cfg, int cell)
{
    ExperimentConfig c = cfg;
    if (cfg.sweep.axis == "none") return c;
    double v = cfg.sweep.values.at(cell);
    if (cfg.sweep.axis == "device_count") c.K = static_cast<int>(v);
    if (cfg.sweep.axis == "device_energy") c.E = v;
    if (cfg.sweep.axis == "cell_radius") c.R = v;
    return c;
}

/*!
 * Channel for one seed.  Each device draws its position and fading from its
 * own stream, so cells that change K, R or E share the underlying variates.
 */
inline ChannelState seeded_channel(const ExperimentConfig& c, int M, std::uint64_t seed)
{
    ChannelParams p{c.shadow_var_db2, c.N0, c.ref_distance_km};
    ChannelState ch;
    ch.N0 = c.N0;
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int k = 0; k < c.K; ++k) {
        Rng rng = make_stream(seed, 1, static_cast<std::uint64_t>(k));
        double d = ring_distance(c.R, c.ring_width, U(rng));
        ch.h.push_back(realize_device_channel(d, c.N_r, M, p, rng));
    }
    return ch;
}

inline int scheme_id(const std::string& s) { return s == "proposed" ? 0 : s == "avg-dg" ? 1 : 2; }

/*! Runs one scheme on one instance; the scheme stream and the accuracy stream are independent of the cell. */
inline RunRecord run_scheme(const ExperimentConfig& c, const MixtureModel& model, const SensingProfile& profile,
                            const Problem& pr, const std::string& scheme, std::uint64_t seed)
{
    RunRecord r;
    r.seed = seed;
    r.scheme = scheme;
    auto t0 = std::chrono::steady_clock::now();
    try {
        Rng srng = make_stream(seed, 2, static_cast<std::uint64_t>(scheme_id(scheme)));
        DesignVariables x;
        if (scheme == "proposed") {
            ScaResult res = sca_solve(pr, init_feasible(pr, srng), c.solver);
            x = res.x;
            r.status = res.status;
            r.outer_iters = res.outer_iters;
            r.kkt = res.kkt;
        } else if (scheme == "avg-dg") {
            x = baseline_avg_dg(pr, srng, c.solver);
            r.status = "ok";
        } else {
            x = baseline_naive(pr, srng);
            r.status = "ok";
        }
        PairGainTable t{pr.L, pr.pairs, achieved_gains(pr, x), Vec()};
        t.G_pair = t.G.rowwise().sum();
        MinGain mg = min_gain(t);
        r.alpha = mg.alpha;
        r.min_pair = mg.pair;
        r.pair_gains = t.G_pair;
        Rng arng = make_stream(seed, 3);
        AccuracyEstimate acc = estimate_accuracy(x, model, profile, pr, c.trials, arng);
        r.accuracy = acc.accuracy;
        r.ci_halfwidth = acc.half_width;
    } catch (const std::exception& e) {
        r.status = std::string("error: ") + e.what();
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

/*! All (cell, seed, scheme) runs, ordered by cell, then seed, then scheme as listed in the config. */
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const MixtureModel model = build_model(cfg);
    const std::string hash = config_hash(cfg);
    const int cells = cfg.cell_count();
    const int n_seeds = static_cast<int>(cfg.seeds.size());
    const int tasks = cells * n_seeds;
    std::vector<std::vector<RunRecord>> out(tasks);

    auto work = [&](int task) {
        const int cell = task / n_seeds;
        const std::uint64_t seed = cfg.seeds[task % n_seeds];
        ExperimentConfig c = cell_config(cfg, cell);
        std::vector<RunRecord>& recs = out[task];
        try {
            SensingProfile profile = SensingProfile::uniform(c.K, c.sigma_s2, c.sigma_r2, c.T_s);
            EnergyBudget budget = EnergyBudget::uniform(c.K, c.E, c.E_p, c.T_s, c.T_c);
            Problem pr = Problem::assemble(model, profile, seeded_channel(c, model.M(), seed), budget);
            for (const auto& s : cfg.schemes) recs.push_back(run_scheme(c, model, profile, pr, s, seed));
        } catch (const std::exception& e) {
            recs.clear();
            for (const auto& s : cfg.schemes) {
                RunRecord r;
                r.seed = seed;
                r.scheme = s;
                r.status = std::string("error: ") + e.what();
                recs.push_back(r);
            }
        }
        for (auto& r : recs) {
            r.cell = cell;
            r.cell_value = cfg.sweep.axis == "none" ? std::numeric_limits<double>::quiet_NaN() : cfg.sweep.values[cell];
            r.config_hash = hash;
        }
    };

    int jobs = cfg.jobs > 0 ? cfg.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    jobs = std::min(jobs, tasks);
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
        pool.emplace_back([&] {
            for (int t = next++; t < tasks; t = next++) work(t);
        });
    for (auto& th : pool) th.join();

    std::vector<RunRecord> flat;
    for (auto& v : out)
        for (auto& r : v) flat.push_back(std::move(r));
    return flat;
}

} // namespace iscc
