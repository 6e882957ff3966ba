#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iscc/harness/output.hpp"
#include "oracles.hpp"

using namespace iscc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

ExperimentConfig small_config()
{
    ExperimentConfig c;
    c.sweep.axis = "device_energy";
    c.sweep.values = {0.5, 2.0};
    c.seeds = {3, 4};
    c.trials = 300;
    return c;
}

fs::path temp_dir(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("iscc_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Problem problem_for(const MixtureModel& model, const SensingProfile& prof, double N0, std::uint64_t seed)
{
    Rng rng(seed);
    Topology topo = place_devices(prof.K(), 4, 0.45, 0.05, rng);
    ChannelParams cp;
    cp.N0 = N0;
    return Problem::assemble(model, prof, realize_channel(topo, model.M(), cp, rng),
                             EnergyBudget::uniform(prof.K(), 2.0, 0.1, prof.T_s(0), 1.0));
}

} // namespace

TEST(Config, DefaultsAndFileParse)
{
    ExperimentConfig d = config_from_json(json::object());
    EXPECT_EQ(d.K, 3);
    EXPECT_EQ(d.N_r, 8);
    EXPECT_EQ(d.model.mu, default_centroids());
    ExperimentConfig f = load_config(std::string(ISCC_SOURCE_DIR) + "/configs/default.json");
    EXPECT_EQ(f.sweep.axis, "device_energy");
    EXPECT_EQ(f.cell_count(), 9);
    EXPECT_EQ(f.out_dir, "out/default");
}

TEST(Config, RejectsMalformedInput)
{
    EXPECT_THROW(config_from_json(json{{"topolgy", json::object()}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"topology", {{"K", "three"}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"topology", {{"K", 0}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"energy", {{"E", 0.05}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"sweep", {{"axis", "cell_radius"}, {"values", {0.4, 0.2}}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"sweep", {{"axis", "sensing"}, {"values", {1.0}}}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"schemes", {"proposed", "greedy"}}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"trials", 99}}), ConfigError);
    EXPECT_THROW(config_from_json(json{{"model", {{"mu", {{1.0, 2.0}}}}}}), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, HashIsStableAndIgnoresOutputSettings)
{
    ExperimentConfig a = small_config();
    ExperimentConfig b = config_from_json(to_json(a));
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    b.out_dir = "elsewhere";
    b.jobs = 7;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.E = 1.5;
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Classify, AgreesWithPosteriorOracle)
{
    Rng rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> U(0.2, 3.0);
    for (int rep = 0; rep < 50; ++rep) {
        Mat mu = Mat::NullaryExpr(4, 3, [&] { return 2.0 * n(rng); });
        Vec var = Vec::NullaryExpr(3, [&] { return U(rng); });
        ReceivedFeatureStats st{mu, var, true};
        for (int t = 0; t < 40; ++t) {
            Vec x = Vec::NullaryExpr(3, [&] { return 3.0 * n(rng); });
            int best = 0;
            double best_lp = -std::numeric_limits<double>::infinity();
            for (int l = 0; l < 4; ++l) {
                double lp = std::log(0.25);
                for (int m = 0; m < 3; ++m) lp += oracle::gauss_logpdf(x(m), mu(l, m), var(m));
                if (lp > best_lp) {
                    best_lp = lp;
                    best = l;
                }
            }
            EXPECT_EQ(map_classify(x, st), best);
        }
    }
}

TEST(Classify, TiesGoToSmallestLabel)
{
    Mat mu(3, 1);
    mu << -1.0, 1.0, 1.0;
    ReceivedFeatureStats st{mu, Vec::Ones(1), true};
    EXPECT_EQ(map_classify(Vec::Zero(1), st), 0);
    EXPECT_EQ(map_classify(Vec::Constant(1, 1.0), st), 1);
    EXPECT_THROW(map_classify(Vec::Zero(2), st), ShapeError);
}

TEST(Accuracy, ChanceWhenClassesCoincide)
{
    MixtureModel model = MixtureModel::make(Mat::Zero(4, 2), Vec::Ones(2));
    SensingProfile prof = SensingProfile::uniform(2, 0.2, 0.2, 1.0);
    Problem pr = problem_for(model, prof, 1.0, 2);
    Rng rng(3);
    DesignVariables x = init_feasible(pr, rng);
    AccuracyEstimate a = estimate_accuracy(x, model, prof, pr, 4000, rng);
    EXPECT_LE(std::abs(a.accuracy - 0.25), 4 * a.half_width);
    EXPECT_GT(a.half_width, 0.0);
}

TEST(Accuracy, PerfectWhenSeparableAndNoiseless)
{
    Mat mu(4, 2);
    mu << 0.0, 0.0, 10.0, 0.0, 0.0, 10.0, 10.0, 10.0;
    MixtureModel model = MixtureModel::make(mu, Vec::Constant(2, 1e-4));
    SensingProfile prof{Vec::Zero(2), Vec::Zero(2), 1e-8, Vec::Ones(2)};
    Problem pr = problem_for(model, prof, 0.0, 4);
    Rng rng(5);
    DesignVariables x = init_feasible(pr, rng);
    AccuracyEstimate a = estimate_accuracy(x, model, prof, pr, 1000, rng);
    EXPECT_EQ(a.accuracy, 1.0);
    EXPECT_EQ(a.half_width, 0.0);
    EXPECT_THROW(estimate_accuracy(x, model, prof, pr, 50, rng), DomainError);
    DesignVariables bad = x;
    bad.u *= 100.0;
    EXPECT_THROW(estimate_accuracy(bad, model, prof, pr, 1000, rng), InfeasibleError);
}

TEST(Accuracy, MatchesSingleFeatureBayesRate)
{
    // two classes at -d and +d: the Bayes error is Phi(-d / sigma) with sigma^2 the received variance
    Mat mu(2, 1);
    mu << -0.6, 0.6;
    MixtureModel model = MixtureModel::make(mu, Vec::Ones(1));
    SensingProfile prof = SensingProfile::uniform(1, 0.2, 0.2, 1.0);
    Problem pr = problem_for(model, prof, 1.0, 6);
    Rng rng(7);
    DesignVariables x = init_feasible(pr, rng);
    auto st = received_feature_stats(model, prof, x.P_s, x.c, x.f, pr.N0());
    double d = st.mu_hat(1, 0);
    double expect = 0.5 * std::erfc(-d / std::sqrt(2.0 * st.sigma_hat2(0)));
    AccuracyEstimate a = estimate_accuracy(x, model, prof, pr, 20000, rng);
    EXPECT_LE(std::abs(a.accuracy - expect), 4 * std::sqrt(expect * (1 - expect) / 20000));
}

TEST(Output, RowCountsAndAggregates)
{
    ExperimentConfig c = small_config();
    c.jobs = 1;
    auto recs = run_experiment(c);
    ASSERT_EQ(recs.size(), 12u);
    for (const auto& r : recs) EXPECT_TRUE(r.ok()) << r.status;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(recs[i].cell, static_cast<int>(i / 6));
        EXPECT_EQ(recs[i].seed, c.seeds[(i / 3) % 2]);
        EXPECT_EQ(recs[i].scheme, c.schemes[i % 3]);
        EXPECT_GE(recs[i].accuracy, 0.0);
        EXPECT_LE(recs[i].accuracy, 1.0);
    }
    EXPECT_EQ(count_lines(runs_csv(recs, false)), 13);
    EXPECT_EQ(count_lines(pairs_csv(recs, 4)), 12 * 6 + 1);
    auto agg = aggregate(recs, c.schemes);
    ASSERT_EQ(agg.size(), 6u);
    for (const auto& s : agg) {
        std::vector<double> a;
        for (const auto& r : recs)
            if (r.cell == s.cell && r.scheme == s.scheme) a.push_back(r.alpha);
        ASSERT_EQ(a.size(), 2u);
        double mean = 0.5 * (a[0] + a[1]);
        double sd = std::abs(a[0] - a[1]) / std::sqrt(2.0);
        EXPECT_NEAR(s.mean_alpha, mean, 1e-12 * mean);
        EXPECT_NEAR(s.ci_alpha, 1.959963984540054 * sd / std::sqrt(2.0), 1e-9 * std::max(sd, 1e-12));
        EXPECT_EQ(s.cell_value, c.sweep.values[s.cell]);
    }
    std::string header = runs_csv(recs, false).substr(0, runs_csv(recs, false).find('\n'));
    EXPECT_EQ(header.rfind("scheme,cell,seed,alpha,min_pair,accuracy,ci_halfwidth,outer_iters,wall_ms", 0), 0u);
}

TEST(Output, FailedRunsAreCountedNotAveraged)
{
    RunRecord good;
    good.scheme = "naive";
    good.alpha = 2.0;
    good.accuracy = 0.5;
    good.status = "ok";
    RunRecord bad = good;
    bad.alpha = 100.0;
    bad.status = "error: something, somewhere";
    auto agg = aggregate({good, bad}, {"naive"});
    ASSERT_EQ(agg.size(), 1u);
    EXPECT_EQ(agg[0].runs, 2);
    EXPECT_EQ(agg[0].failed, 1);
    EXPECT_EQ(agg[0].mean_alpha, 2.0);
    std::string csv = runs_csv({good, bad}, false);
    EXPECT_NE(csv.find("\"error: something, somewhere\""), std::string::npos);
}

TEST(Output, IndependentOfWorkerCountAndByteIdentical)
{
    ExperimentConfig c = small_config();
    c.jobs = 1;
    auto one = run_experiment(c);
    c.jobs = 3;
    auto three = run_experiment(c);
    EXPECT_EQ(runs_csv(one, false), runs_csv(three, false));
    EXPECT_EQ(pairs_csv(one, 4), pairs_csv(three, 4));

    fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
    emit_outputs(one, c, a.string(), 4);
    emit_outputs(three, c, b.string(), 4);
    for (const char* f : {"runs.csv", "pairs.csv", "aggregate.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    json manifest = json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(manifest["config_hash"], config_hash(c));
    EXPECT_EQ(manifest["records"], 12);
}

TEST(Output, ChangingTheSeedChangesResults)
{
    ExperimentConfig c = small_config();
    auto a = run_experiment(c);
    c.seeds = {5, 6};
    auto b = run_experiment(c);
    EXPECT_NE(runs_csv(a, false), runs_csv(b, false));
}

TEST(Experiment, ChannelsShareVariatesAcrossCells)
{
    ExperimentConfig c;
    ChannelState a = seeded_channel(c, 6, 11);
    c.K = 5;
    ChannelState b = seeded_channel(c, 6, 11);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(a.h[k], b.h[k]);
    c.K = 3;
    c.E = 7.0;
    EXPECT_EQ(seeded_channel(c, 6, 11).h[1], a.h[1]);
}

TEST(Io, InstanceRoundTrip)
{
    ExperimentConfig c;
    Instance in;
    in.model = build_model(c);
    in.profile = SensingProfile::uniform(c.K, c.sigma_s2, c.sigma_r2, c.T_s);
    in.channel = seeded_channel(c, in.model.M(), 3);
    in.budget = EnergyBudget::uniform(c.K, c.E, c.E_p, c.T_s, c.T_c);
    Instance back = instance_from_json(json::parse(to_json(in).dump()));
    EXPECT_EQ(back.model.mu, in.model.mu);
    for (int k = 0; k < c.K; ++k) EXPECT_EQ(back.channel.h[k], in.channel.h[k]);
    Rng r1(1), r2(1);
    ScaResult a = sca_solve(in.problem(), init_feasible(in.problem(), r1));
    ScaResult b = sca_solve(back.problem(), init_feasible(back.problem(), r2));
    EXPECT_EQ(a.x.alpha, b.x.alpha);
}

TEST(Cli, ValidateAndErrorExitCodes)
{
    const std::string cli = ISCC_CLI_PATH;
    EXPECT_EQ(std::system((cli + " validate > /dev/null").c_str()), 0);
    fs::path dir = temp_dir("cli");
    std::ofstream(dir / "bad.json") << "{\"topology\": {\"K\": -1}}";
    int rc = std::system((cli + " sweep --config " + (dir / "bad.json").string() + " 2> /dev/null").c_str());
    ASSERT_TRUE(WIFEXITED(rc));
    EXPECT_EQ(WEXITSTATUS(rc), 2);
    fs::path out = dir / "solve";
    ASSERT_EQ(std::system((cli + " solve --seed 2 --trials 200 --out " + out.string() + " > /dev/null").c_str()), 0);
    for (const char* f : {"instance.json", "solution_proposed.json", "solution_avg-dg.json", "solution_naive.json", "trace.csv"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    fs::path replay = dir / "replay";
    ASSERT_EQ(std::system((cli + " solve --scheme proposed --trials 200 --problem " + (out / "instance.json").string() +
                           " --out " + replay.string() + " > /dev/null")
                              .c_str()),
              0);
    json s1 = json::parse(slurp(out / "solution_proposed.json"));
    json s2 = json::parse(slurp(replay / "solution_proposed.json"));
    EXPECT_EQ(s1["min_gain"], s2["min_gain"]);
}
