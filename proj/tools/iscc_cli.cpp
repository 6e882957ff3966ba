#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "iscc/harness/output.hpp"
#include "iscc/harness/validate.hpp"

using namespace iscc;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string scheme;
    std::optional<int> trials;
    std::optional<int> jobs;
};

ExperimentConfig load(const Common& o)
{
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.seed) cfg.seeds = {*o.seed};
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (!o.scheme.empty() && o.scheme != "all") cfg.schemes = {o.scheme};
    if (o.trials) cfg.trials = *o.trials;
    if (o.jobs) cfg.jobs = *o.jobs;
    cfg.validate();
    return cfg;
}

int cmd_solve(const Common& o, const std::string& problem_path)
{
    ExperimentConfig cfg = load(o);
    const std::uint64_t seed = cfg.seeds.front();
    Instance inst;
    if (!problem_path.empty()) {
        inst = instance_from_json(read_json_file(problem_path));
    } else {
        inst.model = build_model(cfg);
        inst.profile = SensingProfile::uniform(cfg.K, cfg.sigma_s2, cfg.sigma_r2, cfg.T_s);
        inst.channel = seeded_channel(cfg, inst.model.M(), seed);
        inst.budget = EnergyBudget::uniform(cfg.K, cfg.E, cfg.E_p, cfg.T_s, cfg.T_c);
    }
    Problem pr = inst.problem();
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    write_text_file((dir / "instance.json").string(), to_json(inst).dump(1) + "\n");

    std::printf("%-10s %12s %8s %10s %9s %6s  %s\n", "scheme", "alpha", "pair", "accuracy", "+/-", "iters", "status");
    for (const auto& s : cfg.schemes) {
        Rng srng = make_stream(seed, 2, static_cast<std::uint64_t>(scheme_id(s)));
        DesignVariables x;
        std::string status = "ok";
        int iters = 0;
        if (s == "proposed") {
            ScaResult r = sca_solve(pr, init_feasible(pr, srng), cfg.solver);
            x = r.x;
            status = r.status;
            iters = r.outer_iters;
            std::ofstream trace(dir / "trace.csv");
            r.trace.write_csv(trace);
        } else if (s == "avg-dg") {
            x = baseline_avg_dg(pr, srng, cfg.solver);
        } else {
            x = baseline_naive(pr, srng);
        }
        MinGain mg = achieved_min_gain(pr, x);
        Rng arng = make_stream(seed, 3);
        AccuracyEstimate acc = estimate_accuracy(x, inst.model, inst.profile, pr, cfg.trials, arng);
        json sol = to_json(x);
        sol["scheme"] = s;
        sol["min_gain"] = mg.alpha;
        sol["min_pair"] = pair_label(mg.pair);
        sol["accuracy"] = acc.accuracy;
        sol["ci_halfwidth"] = acc.half_width;
        sol["status"] = status;
        write_text_file((dir / ("solution_" + s + ".json")).string(), sol.dump(1) + "\n");
        std::printf("%-10s %12.6g %8s %10.4f %9.4f %6d  %s\n", s.c_str(), mg.alpha, pair_label(mg.pair).c_str(),
                    acc.accuracy, acc.half_width, iters, status.c_str());
    }
    return 0;
}

int cmd_sweep(const Common& o, bool timing)
{
    ExperimentConfig cfg = load(o);
    cfg.timing = cfg.timing || timing;
    auto recs = run_experiment(cfg);
    const int L = static_cast<int>(build_model(cfg).L());
    emit_outputs(recs, cfg, cfg.out_dir, L);
    int failed = 0;
    for (const auto& r : recs) failed += !r.ok();
    for (const auto& c : aggregate(recs, cfg.schemes))
        std::printf("cell %d (%s=%s) %-9s alpha %.4g  accuracy %.4f +/- %.4f%s\n", c.cell, cfg.sweep.axis.c_str(),
                    fmt(c.cell_value).c_str(), c.scheme.c_str(), c.mean_alpha, c.mean_accuracy, c.ci_accuracy,
                    c.failed ? ("  failed " + std::to_string(c.failed)).c_str() : "");
    std::printf("%zu runs, %d failed, written to %s\n", recs.size(), failed, cfg.out_dir.c_str());
    return 0;
}

int cmd_validate(const Common& o)
{
    auto checks = run_invariant_suite(o.seed.value_or(1));
    int bad = 0;
    for (const auto& c : checks) {
        std::printf("%s  %s%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.empty() ? "" : ": ",
                    c.detail.c_str());
        bad += !c.passed;
    }
    return bad ? 1 : 0;
}

int cmd_fit_model(const Common& o)
{
    ExperimentConfig cfg = load(o);
    cfg.model.source = "sensing";
    if (o.seed) cfg.model.seed = *o.seed;
    SceneGenerator gen;
    Rng rng = make_stream(cfg.model.seed, 0);
    LabeledSet set = generate_training_set(gen, cfg.model.per_class, rng);
    PcaTemplate t = pca_fit(set.X, cfg.model.features, set.labels);
    MixtureModel model = t.to_mixture();
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    write_text_file((dir / "model.json").string(), to_json(model).dump(1) + "\n");
    Mat F(set.X.rows(), t.M());
    for (int i = 0; i < F.rows(); ++i) F.row(i) = pca_extract(t, set.X.row(i).transpose()).transpose();
    std::ofstream fcsv(dir / "features.csv");
    write_feature_csv(fcsv, F, set.labels);
    PairGainTable g = gain_table(ReceivedFeatureStats{model.mu, model.sigma2, true});
    MinGain mg = min_gain(g);
    std::printf("fitted L=%d M=%d from %zu scenes; closest pair %s, gain %.4g\n", model.L(), model.M(),
                set.labels.size(), pair_label(mg.pair).c_str(), mg.alpha);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Task-oriented ISCC over-the-air edge inference: solver and simulator"};
    app.require_subcommand(1);
    Common o;
    std::string problem_path;
    bool timing = false;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
        c->add_option("--seed", o.seed, "seed (replaces the config's seed list)");
        c->add_option("--out", o.out, "output directory");
        c->add_option("--scheme", o.scheme, "scheme to run")->check(CLI::IsMember({"proposed", "avg-dg", "naive", "all"}));
        c->add_option("--trials", o.trials, "Monte-Carlo trials per accuracy estimate")->check(CLI::PositiveNumber);
        c->add_option("--jobs", o.jobs, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    };
    auto* solve = app.add_subcommand("solve", "solve one instance and write solution, trace and replay files");
    add_common(solve);
    solve->add_option("--problem", problem_path, "replay an instance.json written by a previous solve")
        ->check(CLI::ExistingFile);
    auto* sweep = app.add_subcommand("sweep", "run the configured experiment and write CSV results");
    add_common(sweep);
    sweep->add_flag("--timing", timing, "fill the wall_ms column (breaks byte-identical reruns)");
    auto* validate = app.add_subcommand("validate", "run the invariant suite");
    validate->add_option("--seed", o.seed, "seed");
    auto* fit = app.add_subcommand("fit-model", "fit a mixture model from synthetic radar scenes");
    add_common(fit);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*solve) return cmd_solve(o, problem_path);
        if (*sweep) return cmd_sweep(o, timing);
        if (*validate) return cmd_validate(o);
        if (*fit) return cmd_fit_model(o);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
