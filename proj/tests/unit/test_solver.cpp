#include <gtest/gtest.h>

#include "iscc/harness/validate.hpp"
#include "iscc/solver/brute_force.hpp"
#include "oracles.hpp"

using namespace iscc;
using iscc::detail::random_instance;

namespace {

DesignVariables start(const Problem& pr, std::uint64_t seed)
{
    Rng rng(seed);
    return normalize_gauge(init_feasible(pr, rng));
}

CVec random_cvec(int n, Rng& rng)
{
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = complex_normal(rng);
    return v;
}

double min_active_pair_sum(const Problem& pr, const DesignVariables& x)
{
    double best = std::numeric_limits<double>::infinity();
    for (int p = 0; p < pr.P(); ++p) {
        double s = 0.0;
        for (int m = 0; m < pr.M; ++m)
            if (pr.active(p, m)) s += x.v(p, m);
        best = std::min(best, s);
    }
    return best;
}

} // namespace

TEST(Evaluate, MatchesStraightLineFormulas)
{
    Problem pr = random_instance(1, 3, 4, 2, 3, 2.0);
    Rng rng(2);
    Vec P = (Vec(3) << 0.4, 0.9, 1.3).finished();
    Mat c = Mat::Random(3, 2).cwiseAbs();
    for (int m = 0; m < 2; ++m) {
        CVec f = random_cvec(4, rng);
        for (int k = 0; k < 3; ++k) {
            cplx s = 0.0;
            for (int i = 0; i < 4; ++i) s += std::conj(f(i)) * pr.channel.h[k](i, m);
            EXPECT_NEAR(eval_R(pr, f, k, m), std::norm(s), 1e-12 * std::norm(s));
        }
        double S = c(0, m) + c(1, m) + c(2, m);
        double Z = pr.sigma2(m) * S * S + pr.N0() * f.squaredNorm();
        for (int k = 0; k < 3; ++k) Z += c(k, m) * c(k, m) * (pr.sigma_s2(k) + pr.sigma_r2 / P(k));
        EXPECT_NEAR(eval_Z(pr, P, c, f, m), Z, 1e-12 * Z);
        for (int p = 0; p < pr.P(); ++p) EXPECT_NEAR(eval_Q(pr, c, 0.7, p, m), pr.delta2(p, m) * S * S / 0.7, 1e-12 * S * S);
    }
}

TEST(Evaluate, TrivialCases)
{
    Problem pr = random_instance(3, 2, 3, 1, 2, 2.0);
    CVec h = pr.channel.col(0, 0);
    CVec f(3);
    f << std::conj(h(1)), -std::conj(h(0)), 0.0;
    EXPECT_NEAR(eval_R(pr, f, 0, 0), 0.0, 1e-24);
    CVec g = CVec::Ones(3);
    EXPECT_NEAR(eval_Z(pr, Vec::Ones(2), Mat::Zero(2, 1), g, 0), pr.N0() * 3.0, 1e-15);
    EXPECT_EQ(eval_Q(pr, Mat::Zero(2, 1), 1.0, 0, 0), 0.0);
    EXPECT_THROW(eval_Q(pr, Mat::Ones(2, 1), 0.0, 0, 0), DomainError);
    EXPECT_THROW(eval_Z(pr, Vec::Zero(2), Mat::Ones(2, 1), g, 0), DomainError);
}

TEST(Evaluate, AchievedGainsAgreeWithReceivedStatistics)
{
    Rng rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    MixtureModel model = MixtureModel::make(Mat::NullaryExpr(3, 2, [&] { return n(rng); }), Vec::Constant(2, 0.9));
    SensingProfile prof = SensingProfile::uniform(2, 0.3, 0.2, 1.0);
    Topology topo = place_devices(2, 3, 0.45, 0.05, rng);
    ChannelState ch = realize_channel(topo, 2, ChannelParams{}, rng);
    Problem pr = Problem::assemble(model, prof, ch, EnergyBudget::uniform(2, 2.0, 0.1, 1.0, 1.0));
    DesignVariables x = start(pr, 5);
    auto t = gain_table(received_feature_stats(model, prof, x.P_s, x.c, x.f, ch.N0));
    EXPECT_LT((achieved_gains(pr, x) - t.G).cwiseAbs().maxCoeff(), 1e-12 * t.G.maxCoeff());
}

TEST(Taylor, TangentMinorantAndGradients)
{
    for (std::uint64_t s = 0; s < 20; ++s) {
        Problem pr = random_instance(100 + s, 3, 4, 3, 3, 2.0);
        DesignVariables x = start(pr, s);
        TaylorReference ref = TaylorReference::build(pr, x);
        Rng rng(200 + s);
        std::normal_distribution<double> n(0.0, 1.0);
        for (int m = 0; m < pr.M; ++m) {
            for (int k = 0; k < pr.K; ++k) {
                const CVec f0 = x.f.col(m);
                EXPECT_NEAR(taylor_R_hat(pr, f0, ref, k, m), eval_R(pr, f0, k, m), 1e-14 * std::max(1.0, ref.R(k, m)));
                for (int trial = 0; trial < 5; ++trial) {
                    CVec f = f0 + 0.3 * random_cvec(pr.N_r, rng);
                    EXPECT_GE(eval_R(pr, f, k, m) - taylor_R_hat(pr, f, ref, k, m), -1e-9);
                }
                CVec A = taylor_A(pr, ref, k, m);
                for (int i = 0; i < pr.N_r; ++i) {
                    const double h = 1e-6;
                    CVec a = f0, b = f0;
                    a(i) += h;
                    b(i) -= h;
                    double dre = (eval_R(pr, a, k, m) - eval_R(pr, b, k, m)) / (2 * h);
                    a = f0;
                    b = f0;
                    a(i) += cplx(0.0, h);
                    b(i) -= cplx(0.0, h);
                    double dim = (eval_R(pr, a, k, m) - eval_R(pr, b, k, m)) / (2 * h);
                    double floor = 1e-3 * A.norm();
                    EXPECT_LE(std::abs(dre - A(i).real()), 1e-5 * std::max(std::abs(A(i).real()), floor));
                    EXPECT_LE(std::abs(dim - A(i).imag()), 1e-5 * std::max(std::abs(A(i).imag()), floor));
                }
            }
            for (int p = 0; p < pr.P(); ++p) {
                if (!pr.active(p, m)) continue;
                const double v0 = x.v(p, m);
                EXPECT_LE(ref.B(p, m), 0.0);
                EXPECT_NEAR(taylor_Q_hat(pr, x.c, v0, ref, p, m), eval_Q(pr, x.c, v0, p, m), 1e-12 * ref.Q(p, m));
                const double hv = 1e-6 * v0;
                double dB = (eval_Q(pr, x.c, v0 + hv, p, m) - eval_Q(pr, x.c, v0 - hv, p, m)) / (2 * hv);
                EXPECT_LE(std::abs(dB - ref.B(p, m)), 1e-5 * std::abs(ref.B(p, m)));
                const double hc = 1e-6 * std::max(ref.S(m), 1e-3);
                Mat cp = x.c, cm = x.c;
                cp(0, m) += hc;
                cm(0, m) -= hc;
                double dC = (eval_Q(pr, cp, v0, p, m) - eval_Q(pr, cm, v0, p, m)) / (2 * hc);
                EXPECT_LE(std::abs(dC - ref.C(p, m)), 1e-5 * std::abs(ref.C(p, m)));
                for (int trial = 0; trial < 5; ++trial) {
                    Mat c = (x.c.array() * (1.0 + 0.3 * Mat::NullaryExpr(pr.K, pr.M, [&] { return n(rng); }).array()))
                                .cwiseMax(0.0);
                    double v = v0 * std::exp(0.5 * n(rng));
                    EXPECT_GE(eval_Q(pr, c, v, p, m) - taylor_Q_hat(pr, c, v, ref, p, m), -1e-9 * std::max(1.0, ref.Q(p, m)));
                }
            }
        }
    }
}

TEST(Taylor, RatioOfSquareOverPositiveIsConvex)
{
    Problem pr;
    pr.delta2 = Mat::Ones(1, 1);
    auto g = [&](double s, double v) { return eval_Q(pr, Mat::Constant(1, 1, s), v, 0, 0); };
    Rng rng(6);
    std::uniform_real_distribution<double> Us(-3.0, 3.0), Uv(0.05, 5.0);
    for (int i = 0; i < 100; ++i) {
        double s = Us(rng), v = Uv(rng);
        EXPECT_GE(oracle::min_eigenvalue_sym2(oracle::hessian2(g, s, v, 0.02 * v)), -1e-9) << s << ' ' << v;
    }
}

TEST(Surrogate, GradientsAndHessianMatchFiniteDifferences)
{
    for (std::uint64_t s = 0; s < 4; ++s) {
        Problem pr = random_instance(300 + s, 3, 4, 3, 3, 2.0);
        DesignVariables x = start(pr, s);
        TaylorReference ref = TaylorReference::build(pr, x);
        for (bool exact : {false, true}) {
            ConstraintSet cs(pr, ref, exact);
            Vec x0 = make_interior(ConstraintSet(pr, ref), 1e-3);
            const int n = cs.dim(), m = cs.num_constraints();
            std::vector<SparseRow> rows(m);
            cs.gradients(x0, rows);
            Mat J = Mat::Zero(m, n);
            for (int i = 0; i < m; ++i)
                for (std::size_t q = 0; q < rows[i].idx.size(); ++q) J(i, rows[i].idx[q]) += rows[i].val[q];
            Vec g1(m), g2(m);
            for (int j = 0; j < n; ++j) {
                double h = 1e-6 * std::max(1.0, std::abs(x0(j)));
                Vec a = x0, b = x0;
                a(j) += h;
                b(j) -= h;
                ASSERT_TRUE(cs.values(a, g1) && cs.values(b, g2));
                for (int i = 0; i < m; ++i) {
                    double fd = (g1(i) - g2(i)) / (2 * h);
                    EXPECT_LE(std::abs(J(i, j) - fd), 1e-5 * std::max(1.0, std::abs(fd))) << "row " << i << " col " << j;
                }
            }
            if (exact) {
                Mat H = Mat::Zero(n, n);
                EXPECT_THROW(cs.add_hessian(x0, Vec::Ones(m), H), DomainError);
                continue;
            }
            Rng rng(s);
            std::uniform_real_distribution<double> U(0.0, 1.0);
            Vec w = Vec::NullaryExpr(m, [&] { return U(rng); });
            auto weighted_grad = [&](const Vec& p) {
                std::vector<SparseRow> r(m);
                cs.gradients(p, r);
                Vec out = Vec::Zero(n);
                for (int i = 0; i < m; ++i)
                    for (std::size_t q = 0; q < r[i].idx.size(); ++q) out(r[i].idx[q]) += w(i) * r[i].val[q];
                return out;
            };
            Mat H = Mat::Zero(n, n);
            cs.add_hessian(x0, w, H);
            Mat Hfd(n, n);
            for (int j = 0; j < n; ++j) {
                double h = 1e-6 * std::max(1.0, std::abs(x0(j)));
                Vec a = x0, b = x0;
                a(j) += h;
                b(j) -= h;
                Hfd.col(j) = (weighted_grad(a) - weighted_grad(b)) / (2 * h);
            }
            EXPECT_LE((H - Hfd).cwiseAbs().maxCoeff(), 1e-5 * std::max(1.0, H.cwiseAbs().maxCoeff()));
            double min_eig = Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues()(0);
            EXPECT_GE(min_eig, -1e-9 * std::max(1.0, H.cwiseAbs().maxCoeff()));
        }
    }
}

TEST(Init, FeasibleWithSlackAndDeterministic)
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        Problem pr = random_instance(400 + s, 3, 8, 6, 4, 2.0);
        Rng a(s), b(s);
        DesignVariables x = init_feasible(pr, a);
        DesignVariables y = init_feasible(pr, b);
        EXPECT_EQ(x.c, y.c);
        EXPECT_EQ(x.f, y.f);
        FeasibilityReport fr = feasibility_check(x, pr);
        EXPECT_LE(fr.max_violation(), 1e-12);
        for (int k = 0; k < pr.K; ++k) {
            double surplus = pr.budget.E(k) - pr.budget.E_p(k);
            EXPECT_NEAR(pr.budget.E(k) - fr.energy_used(k), 0.1 * surplus, 1e-9 * surplus);
            EXPECT_NEAR(x.P_s(k) * pr.budget.T_s(k), 0.5 * surplus, 1e-12 * surplus);
        }
        for (int m = 0; m < pr.M; ++m) EXPECT_NEAR(x.f.col(m).norm(), 1.0, 1e-12);
    }
    Problem pr = random_instance(5, 2, 2, 1, 2, 2.0);
    pr.budget.E(1) = pr.budget.E_p(1);
    Rng rng(1);
    EXPECT_THROW(init_feasible(pr, rng), InfeasibleError);
}

TEST(Feasibility, FlagsTheViolatedFamily)
{
    Problem pr = random_instance(6, 3, 4, 3, 3, 2.0);
    DesignVariables x = start(pr, 6);
    DesignVariables e = x;
    e.u *= 10.0;
    EXPECT_EQ(feasibility_check(e, pr).worst_family(), "energy");
    DesignVariables a = x;
    a.alpha *= 1.5;
    EXPECT_EQ(feasibility_check(a, pr).worst_family(), "pair");
    DesignVariables r = x;
    r.c(1, 1) *= 1.3;
    EXPECT_GT(feasibility_check(r, pr).ratio, 0.0);
    DesignVariables d = x;
    d.v *= 1.2;
    EXPECT_GT(feasibility_check(d, pr).dgain, 0.0);
    EXPECT_THROW(sca_solve(pr, e), InfeasibleError);
}

TEST(Sca, ContractOnRandomInstances)
{
    for (std::uint64_t s = 0; s < 8; ++s) {
        Problem pr = random_instance(500 + s, 3, 8, 6, 4, 2.0);
        ScaResult r = sca_solve(pr, start(pr, s));
        EXPECT_EQ(r.status, "converged");
        const auto& e = r.trace.entries;
        ASSERT_GE(e.size(), 2u);
        for (std::size_t t = 1; t < e.size(); ++t) EXPECT_GE(e[t].alpha, e[t - 1].alpha - 1e-8);
        for (const auto& t : e) EXPECT_LE(t.max_residual, 1e-6);
        EXPECT_LE(r.kkt, 1e-3);
        FeasibilityReport fr = feasibility_check(r.x, pr);
        // the variable alpha equals the weakest pair sum, and the reported min gain agrees with it
        EXPECT_NEAR(r.x.alpha, min_active_pair_sum(pr, r.x), 1e-4 * r.x.alpha);
        EXPECT_NEAR(achieved_min_gain(pr, r.x).alpha, r.x.alpha, 1e-4 * r.x.alpha);
        // the gain constraints of the bottleneck pair are tight: each v gives up at most 1e-4 alpha of its gain
        MinGain mg = achieved_min_gain(pr, r.x);
        int p = pair_index(pr.L, mg.pair.first, mg.pair.second);
        Mat G = achieved_gains(pr, r.x);
        for (int m = 0; m < pr.M; ++m)
            if (pr.active(p, m)) {
                EXPECT_LE(std::abs(G(p, m) - r.x.v(p, m)), 1e-4 * r.x.alpha) << "element " << m;
            }
        EXPECT_LE(fr.max_violation(), 1e-6);
    }
}

TEST(Sca, RatioConstraintsActive)
{
    for (std::uint64_t s = 0; s < 4; ++s) {
        Problem pr = random_instance(600 + s, 3, 8, 6, 4, 2.0);
        ScaResult r = sca_solve(pr, start(pr, s));
        ASSERT_EQ(r.status, "converged");
        FeasibilityReport fr = feasibility_check(r.x, pr);
        for (int k = 0; k < pr.K; ++k)
            for (int m = 0; m < pr.M; ++m)
                if (r.x.c(k, m) > 1e-6) {
                    EXPECT_LE(std::abs(fr.lemma2_gap(k, m)), 1e-4);
                }

        // one more surrogate at the converged point: rows carrying a real price are tight up to solver tolerance
        TaylorReference ref = TaylorReference::build(pr, r.x);
        ConstraintSet cs(pr, ref);
        InnerResult in = solve_inner(cs, ScaOptions{}.inner);
        const double tmax = in.mult.theta.maxCoeff();
        int checked = 0;
        for (int k = 0; k < pr.K; ++k)
            for (int m = 0; m < pr.M; ++m)
                if (in.x.c(k, m) > 1e-6 && in.mult.theta(k, m) >= 1e-2 * tmax) {
                    double Ru = taylor_R_hat(pr, in.x.f.col(m), ref, k, m) * in.x.u(k, m);
                    EXPECT_LE(std::abs(Ru - in.x.c(k, m) * in.x.c(k, m)) / Ru, 1e-3) << "device " << k << " element " << m;
                    ++checked;
                }
        EXPECT_GT(checked, 0);
    }
}

TEST(Sca, EnergyPriceVanishesWithLargeBudget)
{
    Problem small = random_instance(700, 3, 8, 6, 4, 2.0);
    Problem large = random_instance(700, 3, 8, 6, 4, 1e5);
    ScaResult a = sca_solve(small, start(small, 1));
    ScaResult b = sca_solve(large, start(large, 1));
    // the multiplier is the marginal gain per joule; normalize by the objective to compare scales
    double pa = a.mult.beta.maxCoeff() / a.x.alpha;
    double pb = b.mult.beta.maxCoeff() / b.x.alpha;
    EXPECT_GT(pa, 0.0);
    EXPECT_LT(pb, 1e-3 * pa);
    EXPECT_LE(b.kkt, 1e-3);
}

TEST(Sca, DegenerateWhenAPairIsInseparable)
{
    Mat mu = Mat::Zero(3, 2);
    mu(2, 0) = 1.0;
    MixtureModel model = MixtureModel::make(mu, Vec::Ones(2));
    Rng rng(8);
    Topology topo = place_devices(2, 2, 0.45, 0.05, rng);
    Problem pr = Problem::assemble(model, SensingProfile::uniform(2, 0.2, 0.2, 1.0), realize_channel(topo, 2, {}, rng),
                                   EnergyBudget::uniform(2, 2.0, 0.1, 1.0, 1.0));
    ScaResult r = sca_solve(pr, start(pr, 8));
    EXPECT_EQ(r.status, "degenerate");
    EXPECT_EQ(achieved_min_gain(pr, r.x).alpha, 0.0);
}

TEST(Baselines, FeasibleAndOrdered)
{
    for (std::uint64_t s = 0; s < 4; ++s) {
        Problem pr = random_instance(800 + s, 3, 8, 6, 4, 2.0);
        Rng rng(s);
        DesignVariables nv = baseline_naive(pr, rng);
        DesignVariables av = baseline_avg_dg(pr, rng);
        FeasibilityReport fn = feasibility_check(nv, pr);
        FeasibilityReport fa = feasibility_check(av, pr);
        EXPECT_LE(fn.max_violation(), 1e-9);
        EXPECT_LE(fa.max_violation(), 1e-9);
        for (int k = 0; k < pr.K; ++k) EXPECT_NEAR(fn.energy_used(k), pr.budget.E(k), 1e-9 * pr.budget.E(k));
        for (int m = 0; m < pr.M; ++m)
            EXPECT_LT((nv.f.col(m) - CVec::Constant(pr.N_r, 1.0 / std::sqrt(pr.N_r))).norm(), 1e-12);
        for (const DesignVariables* x : {&nv, &av}) {
            PairGainTable t{pr.L, pr.pairs, achieved_gains(pr, *x), Vec()};
            t.G_pair = t.G.rowwise().sum();
            EXPECT_LE(min_gain(t).alpha, avg_gain(t) + 1e-12);
        }
    }
}

TEST(BruteForce, RefusesLargeInstancesAndGrids)
{
    Problem big = random_instance(9, 3, 2, 1, 2, 2.0);
    EXPECT_THROW(brute_force_oracle(big), DomainError);
    Problem pr = random_instance(9, 2, 2, 2, 3, 2.0);
    BruteForceGrid g;
    g.max_points = 1000;
    EXPECT_THROW(brute_force_oracle(pr, g), DomainError);
}

TEST(BruteForce, RefinementStableAndDominatesHeuristics)
{
    for (std::uint64_t s = 0; s < 3; ++s) {
        Problem pr = random_instance(900 + s, 1, 1, 1, 2, 2.0);
        BruteForceGrid g;
        g.sensing = 60;
        g.usage = 4;
        BruteForceResult a = brute_force_oracle(pr, g);
        BruteForceResult b = brute_force_oracle(pr, g.refined());
        EXPECT_LE(std::abs(b.alpha - a.alpha), 0.01 * b.alpha);
        EXPECT_LE(feasibility_check(b.x, pr).max_violation(), 1e-9);
        Rng rng(s);
        EXPECT_GE(b.alpha, achieved_min_gain(pr, baseline_naive(pr, rng)).alpha - 1e-12);
        EXPECT_GE(b.alpha, achieved_min_gain(pr, init_feasible(pr, rng)).alpha - 1e-12);
    }
}

TEST(BruteForce, SensingPowerOnlyPeaksAtBudget)
{
    Problem pr = random_instance(950, 1, 1, 1, 2, 2.0);
    BruteForceGrid g;
    g.sensing = 50;
    g.usage = 1;
    g.comm_energy = 0.5;
    BruteForceResult r = brute_force_oracle(pr, g);
    const double top = 50.0 / 51.0 * (pr.budget.E(0) - pr.budget.E_p(0) - 0.5) / pr.budget.T_s(0);
    EXPECT_NEAR(r.x.P_s(0), top, 1e-12 * top);
}

TEST(BruteForce, ScaWithinTwoPercentOnTinyInstances)
{
    for (std::uint64_t s = 0; s < 3; ++s) {
        Problem pr = random_instance(960 + s, 1, 1, 1, 2, 2.0);
        ScaResult r = sca_solve(pr, start(pr, s));
        BruteForceGrid g;
        g.sensing = 200;
        g.usage = 2;
        BruteForceResult b = brute_force_oracle(pr, g);
        EXPECT_GE(r.x.alpha, 0.98 * b.alpha);
    }
}
