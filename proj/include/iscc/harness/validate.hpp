#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "iscc/harness/experiment.hpp"
#include "iscc/solver/brute_force.hpp"

namespace iscc {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline Problem random_instance(std::uint64_t seed, int K, int N_r, int M, int L, double E)
{
    Rng rng = make_stream(seed, 11);
    std::normal_distribution<double> n(0.0, 1.5);
    Mat mu(L, M);
    for (int l = 0; l < L; ++l)
        for (int m = 0; m < M; ++m) mu(l, m) = n(rng);
    MixtureModel model = MixtureModel::make(mu, Vec::Ones(M));
    SensingProfile prof = SensingProfile::uniform(K, 0.2, 0.2, 1.0);
    Topology topo = place_devices(K, N_r, 0.45, 0.05, rng);
    ChannelState ch = realize_channel(topo, M, ChannelParams{}, rng);
    return Problem::assemble(model, prof, ch, EnergyBudget::uniform(K, E, 0.1, 1.0, 1.0));
}

} // namespace detail

/*! Quick self-check of the core invariants on a handful of seeded instances. */
inline std::vector<CheckResult> run_invariant_suite(std::uint64_t seed, int instances = 5)
{
    std::vector<CheckResult> out;
    auto add = [&](const std::string& name, bool ok, const std::string& detail) { out.push_back({name, ok, detail}); };
    auto num = [](double v) {
        std::ostringstream os;
        os.precision(3);
        os << v;
        return os.str();
    };

    {
        Rng rng = make_stream(seed, 21);
        std::normal_distribution<double> n(0.0, 2.0);
        std::uniform_real_distribution<double> U(0.1, 3.0);
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            Mat mu(2, 1);
            mu << n(rng), n(rng);
            ReceivedFeatureStats st{mu, Vec::Constant(1, U(rng)), true};
            double a = pairwise_gain_closed(st, 0, 1, 0);
            double b = pairwise_gain_kl(mu(0, 0), st.sigma_hat2(0), mu(1, 0), st.sigma_hat2(0));
            worst = std::max(worst, std::abs(a - b) / std::max(b, 1e-300));
        }
        add("closed-form gain equals symmetric KL", worst < 1e-9, "max rel diff " + num(worst));
    }

    double mono = 0.0, feas = 0.0, kkt = 0.0, lemma2 = 0.0, energy = 0.0, naive_exhaust = 0.0;
    int init_bad = 0;
    for (int i = 0; i < instances; ++i) {
        Problem pr = detail::random_instance(seed + i, 3, 8, 6, 4, 2.0);
        Rng rng = make_stream(seed + i, 12);
        DesignVariables x0 = init_feasible(pr, rng);
        init_bad += feasibility_check(x0, pr).max_violation() > 1e-12;
        ScaResult r = sca_solve(pr, x0);
        const auto& e = r.trace.entries;
        for (std::size_t t = 1; t < e.size(); ++t) mono = std::max(mono, e[t - 1].alpha - e[t].alpha);
        for (const auto& t : e) feas = std::max(feas, t.max_residual);
        kkt = std::max(kkt, r.kkt);
        FeasibilityReport fr = feasibility_check(r.x, pr);
        for (int k = 0; k < pr.K; ++k)
            for (int m = 0; m < pr.M; ++m)
                if (r.x.c(k, m) > 1e-6) lemma2 = std::max(lemma2, std::abs(fr.lemma2_gap(k, m)));
        DesignVariables nv = baseline_naive(pr, rng);
        FeasibilityReport fn = feasibility_check(nv, pr);
        for (int k = 0; k < pr.K; ++k)
            naive_exhaust = std::max(naive_exhaust, std::abs(fn.energy_used(k) - pr.budget.E(k)) / pr.budget.E(k));
        DesignVariables av = baseline_avg_dg(pr, rng);
        energy = std::max({energy, fn.max_violation(), feasibility_check(av, pr).max_violation()});
    }
    add("initial point feasible", init_bad == 0, std::to_string(init_bad) + " infeasible starts");
    add("alpha trace nondecreasing", mono <= 1e-8, "largest drop " + num(mono));
    add("iterates feasible", feas <= 1e-6, "largest residual " + num(feas));
    add("final KKT residual", kkt <= 1e-3, "worst " + num(kkt));
    add("ratio constraints active", lemma2 <= 1e-4, "largest gap " + num(lemma2));
    add("baselines feasible", energy <= 1e-9, "largest residual " + num(energy));
    add("naive baseline spends the budget", naive_exhaust <= 1e-9, "largest relative slack " + num(naive_exhaust));

    {
        double worst = 0.0;
        for (int i = 0; i < 3; ++i) {
            Problem pr = detail::random_instance(seed + 100 + i, 1, 1, 1, 2, 2.0);
            Rng rng = make_stream(seed + 100 + i, 13);
            ScaResult r = sca_solve(pr, init_feasible(pr, rng));
            BruteForceGrid g;
            g.sensing = 100;
            g.usage = 2;
            BruteForceResult b = brute_force_oracle(pr, g);
            worst = std::max(worst, (b.alpha - r.x.alpha) / std::max(b.alpha, 1e-300));
        }
        add("tiny instances match grid search", worst <= 0.02, "largest shortfall " + num(worst));
    }

    {
        Mat mu(3, 2);
        mu << 0.0, 0.0, 2.0, 0.0, 0.0, 2.0;
        ReceivedFeatureStats st{mu, Vec::Ones(2), true};
        bool ok = true;
        for (int l = 0; l < 3; ++l) ok = ok && map_classify(mu.row(l).transpose(), st) == l;
        add("classifier returns the class at its centroid", ok, "");
    }
    return out;
}

} // namespace iscc
