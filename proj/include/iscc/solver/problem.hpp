#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "iscc/channel.hpp"
#include "iscc/dgain.hpp"
#include "iscc/model.hpp"

namespace iscc {

/*!
 * Everything the optimizer needs about one instance: pair separations, noise
 * statistics, second-moment base, channel and energy budget.  Each f_m is
 * optimized inside the span of the channels of element m (basis[m]); the
 * orthogonal complement only adds receiver noise.
 */
struct Problem {
    int K = 0, M = 0, N_r = 0, L = 0;
    std::vector<ClassPair> pairs;
    Mat delta2;      // pairs x M, squared centroid separations
    Vec sigma2;      // M
    Vec sigma_s2;    // K
    double sigma_r2 = 0.0;
    Mat chi;         // K x M, second moment without the sensing-noise term
    ChannelState channel;
    EnergyBudget budget;
    std::optional<Vec> fixed_Ps;
    std::vector<CMat> basis;     // per element, N_r x r_m orthonormal
    std::vector<CMat> h_red;     // per element, r_m x K channel coordinates

    int P() const { return static_cast<int>(pairs.size()); }
    double N0() const { return channel.N0; }
    double X(int k, int m, double Ps) const { return chi(k, m) + sigma_r2 / Ps; }
    double active_floor() const { return 1e-12 * std::max(1.0, delta2.maxCoeff()); }
    bool active(int p, int m) const { return delta2(p, m) > active_floor(); }
    double max_sensing_power(int k) const { return (budget.E(k) - budget.E_p(k)) / budget.T_s(k); }

    static Problem assemble(const MixtureModel& model, const SensingProfile& profile, const ChannelState& ch,
                            const EnergyBudget& budget)
    {
        model.validate();
        profile.validate();
        ch.validate();
        budget.validate();
        require_shape(profile.K() == ch.K() && budget.K() == ch.K(), "problem: device counts disagree");
        require_shape(ch.M() == model.M(), "problem: channel and model feature counts disagree");
        require(model.L() >= 2, "problem: at least two classes are required");
        for (int k = 0; k < ch.K(); ++k)
            if (std::abs(profile.T_s(k) - budget.T_s(k)) > 1e-12 * budget.T_s(k))
                throw ConfigError("problem: sensing time differs between profile and budget");

        Problem pr;
        pr.K = ch.K();
        pr.M = model.M();
        pr.N_r = ch.N_r();
        pr.L = model.L();
        pr.pairs = class_pairs(pr.L);
        pr.delta2.resize(pr.P(), pr.M);
        for (int p = 0; p < pr.P(); ++p)
            for (int m = 0; m < pr.M; ++m) {
                double d = model.mu(pr.pairs[p].first, m) - model.mu(pr.pairs[p].second, m);
                pr.delta2(p, m) = d * d;
            }
        pr.sigma2 = model.sigma2;
        pr.sigma_s2 = profile.sigma_s2;
        pr.sigma_r2 = profile.sigma_r2;
        pr.chi = second_moment_base(model, profile);
        pr.channel = ch;
        pr.budget = budget;
        pr.build_basis();
        return pr;
    }

    void build_basis()
    {
        basis.clear();
        h_red.clear();
        for (int m = 0; m < M; ++m) {
            CMat H(N_r, K);
            for (int k = 0; k < K; ++k) H.col(k) = channel.col(k, m);
            Eigen::JacobiSVD<CMat> svd(H, Eigen::ComputeThinU);
            const auto& s = svd.singularValues();
            int r = 0;
            while (r < s.size() && s(r) > 1e-10 * s(0)) ++r;
            if (r == 0) throw DomainError("problem: all channels of element " + std::to_string(m) + " vanish");
            basis.push_back(svd.matrixU().leftCols(r));
            h_red.push_back(basis.back().adjoint() * H);
        }
    }

    int rank(int m) const { return static_cast<int>(basis[m].cols()); }
};

/*! Decision vector; f has one beamformer per column (N_r x M), v one row per class pair. */
struct DesignVariables {
    Vec P_s;
    Mat c;
    CMat f;
    Mat u;
    Mat v;
    double alpha = 0.0;
};

struct Multipliers {
    Vec beta;     // energy, K
    Vec gamma;    // pair, P
    Mat theta;    // ratio, K x M
    Mat lambda;   // gain, P x M
    Vec bounds;   // positivity multipliers in solver layout
};

inline double eval_R(const Problem& pr, const CVec& f_m, int k, int m)
{
    return std::norm(f_m.dot(pr.channel.col(k, m)));
}

inline double eval_Z(const Problem& pr, const Vec& P_s, const Mat& c, const CVec& f_m, int m)
{
    for (int k = 0; k < pr.K; ++k) require(P_s(k) > 0.0, "eval_Z: sensing power must be positive");
    double S = c.col(m).sum();
    double z = pr.sigma2(m) * S * S + pr.N0() * f_m.squaredNorm();
    for (int k = 0; k < pr.K; ++k) z += c(k, m) * c(k, m) * (pr.sigma_s2(k) + pr.sigma_r2 / P_s(k));
    return z;
}

inline double eval_Q(const Problem& pr, const Mat& c, double v, int p, int m)
{
    require(v > 0.0, "eval_Q: v must be positive");
    double S = c.col(m).sum();
    return pr.delta2(p, m) * S * S / v;
}

/*! Per-pair, per-element discriminant gains achieved by (P_s, c, f). */
inline Mat achieved_gains(const Problem& pr, const DesignVariables& x)
{
    Mat G(pr.P(), pr.M);
    for (int m = 0; m < pr.M; ++m) {
        double Z = eval_Z(pr, x.P_s, x.c, x.f.col(m), m);
        double S = x.c.col(m).sum();
        for (int p = 0; p < pr.P(); ++p) G(p, m) = Z > kMinVariance ? pr.delta2(p, m) * S * S / Z : 0.0;
    }
    return G;
}

inline MinGain achieved_min_gain(const Problem& pr, const DesignVariables& x)
{
    PairGainTable t{pr.L, pr.pairs, achieved_gains(pr, x), Vec()};
    t.G_pair = t.G.rowwise().sum();
    return min_gain(t);
}

inline Mat second_moment(const Problem& pr, const Vec& P_s)
{
    Mat X = pr.chi;
    for (int k = 0; k < pr.K; ++k) X.row(k).array() += pr.sigma_r2 / P_s(k);
    return X;
}

struct FeasibilityReport {
    double energy = 0.0;   // max_k (E_used - E) / E
    double pair = 0.0;     // max_p (alpha - sum_m v) / max(1, |alpha|)
    double ratio = 0.0;    // max (c^2 - R u) / max(c^2, R u)
    double dgain = 0.0;    // max (Z - Q) / max(Z, Q)
    double bounds = 0.0;   // largest negative part of P_s, c, u, v
    Mat lemma2_gap;        // (R u - c^2) / (R u), K x M
    Mat dgain_gap;         // (Q - Z) / Q, pairs x M (NaN where inactive)
    Vec energy_used;

    double max_violation() const { return std::max({energy, pair, ratio, dgain, bounds}); }
    std::string worst_family() const
    {
        double v = max_violation();
        if (v == energy) return "energy";
        if (v == pair) return "pair";
        if (v == ratio) return "ratio";
        if (v == dgain) return "dgain";
        return "bounds";
    }
};

inline FeasibilityReport feasibility_check(const DesignVariables& x, const Problem& pr)
{
    FeasibilityReport r;
    const double inf = std::numeric_limits<double>::infinity();
    r.energy = r.pair = r.ratio = r.dgain = -inf;
    r.bounds = 0.0;
    for (int k = 0; k < pr.K; ++k) r.bounds = std::max(r.bounds, -x.P_s(k));
    r.bounds = std::max(r.bounds, -x.c.minCoeff());
    r.bounds = std::max(r.bounds, -x.u.minCoeff());
    if (x.P_s.minCoeff() <= 0.0) {
        r.energy = r.pair = r.ratio = r.dgain = inf;
        return r;
    }

    r.energy_used.resize(pr.K);
    for (int k = 0; k < pr.K; ++k) {
        double e = x.P_s(k) * pr.budget.T_s(k) + pr.budget.E_p(k);
        for (int m = 0; m < pr.M; ++m) e += pr.budget.T_c * x.u(k, m) * pr.X(k, m, x.P_s(k));
        r.energy_used(k) = e;
        r.energy = std::max(r.energy, (e - pr.budget.E(k)) / pr.budget.E(k));
    }

    for (int p = 0; p < pr.P(); ++p) {
        double s = 0.0;
        for (int m = 0; m < pr.M; ++m) s += pr.active(p, m) ? x.v(p, m) : 0.0;
        r.pair = std::max(r.pair, (x.alpha - s) / std::max(1.0, std::abs(x.alpha)));
    }

    r.lemma2_gap.resize(pr.K, pr.M);
    for (int k = 0; k < pr.K; ++k)
        for (int m = 0; m < pr.M; ++m) {
            double Ru = eval_R(pr, x.f.col(m), k, m) * x.u(k, m);
            double c2 = x.c(k, m) * x.c(k, m);
            double den = std::max(c2, Ru);
            r.ratio = std::max(r.ratio, den > 0.0 ? (c2 - Ru) / den : 0.0);
            r.lemma2_gap(k, m) = Ru > 0.0 ? (Ru - c2) / Ru : 0.0;
        }

    r.dgain_gap = Mat::Constant(pr.P(), pr.M, std::numeric_limits<double>::quiet_NaN());
    for (int m = 0; m < pr.M; ++m) {
        double Z = eval_Z(pr, x.P_s, x.c, x.f.col(m), m);
        for (int p = 0; p < pr.P(); ++p) {
            if (!pr.active(p, m)) continue;
            r.bounds = std::max(r.bounds, -x.v(p, m));
            if (x.v(p, m) <= 0.0) {
                r.dgain = std::max(r.dgain, x.v(p, m) < 0.0 ? 0.0 : -1.0);
                continue;
            }
            double Q = eval_Q(pr, x.c, x.v(p, m), p, m);
            double den = std::max(Z, Q);
            r.dgain = std::max(r.dgain, den > 0.0 ? (Z - Q) / den : 0.0);
            r.dgain_gap(p, m) = Q > 0.0 ? (Q - Z) / Q : -inf;
        }
    }
    if (r.dgain == -inf) r.dgain = -1.0;
    return r;
}

} // namespace iscc
