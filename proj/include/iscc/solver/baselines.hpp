#pragma once

#include <cmath>
#include <random>

#include "iscc/solver/sca.hpp"

namespace iscc {

namespace detail {

/*! Sensing power drawn uniformly over [0.05, 0.95] of each device's affordable range. */
inline Vec random_sensing_powers(const Problem& pr, Rng& rng)
{
    if (pr.fixed_Ps) return *pr.fixed_Ps;
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    Vec P(pr.K);
    for (int k = 0; k < pr.K; ++k) P(k) = frac(rng) * pr.max_sensing_power(k);
    return P;
}

inline Vec comm_energy_left(const Problem& pr, const Vec& P_s)
{
    Vec left(pr.K);
    for (int k = 0; k < pr.K; ++k) {
        left(k) = pr.budget.E(k) - pr.budget.E_p(k) - P_s(k) * pr.budget.T_s(k);
        if (!(left(k) > 0.0)) throw InfeasibleError("baseline: sensing power exhausts device " + std::to_string(k));
    }
    return left;
}

/*! Single-element, two-class instance whose one pair carries the mean separation of element m. */
inline Problem element_problem(const Problem& pr, int m, const Vec& P_s, const Vec& comm)
{
    Problem sub;
    sub.K = pr.K;
    sub.M = 1;
    sub.N_r = pr.N_r;
    sub.L = 2;
    sub.pairs = class_pairs(2);
    sub.delta2 = Mat::Constant(1, 1, pr.delta2.col(m).mean());
    sub.sigma2 = Vec::Constant(1, pr.sigma2(m));
    sub.sigma_s2 = pr.sigma_s2;
    sub.sigma_r2 = pr.sigma_r2;
    sub.chi = pr.chi.col(m);
    sub.channel.N0 = pr.channel.N0;
    for (int k = 0; k < pr.K; ++k) sub.channel.h.push_back(pr.channel.h[k].col(m));
    sub.budget = pr.budget;
    for (int k = 0; k < pr.K; ++k) sub.budget.E(k) = pr.budget.E_p(k) + P_s(k) * pr.budget.T_s(k) + comm(k);
    sub.fixed_Ps = P_s;
    sub.build_basis();
    return sub;
}

} // namespace detail

/*!
 * Constant all-ones receive beamformer, random sensing power, and per device
 * one c shared by all elements that spends the remaining energy exactly.
 */
inline DesignVariables baseline_naive(const Problem& pr, Rng& rng)
{
    DesignVariables x;
    x.P_s = detail::random_sensing_powers(pr, rng);
    x.f = CMat::Constant(pr.N_r, pr.M, cplx(1.0 / std::sqrt(static_cast<double>(pr.N_r)), 0.0));
    x.c = uniform_gains(pr, x.P_s, x.f, detail::comm_energy_left(pr, x.P_s));
    complete_from_design(pr, x);
    return x;
}

/*!
 * Random sensing power, remaining energy split equally over elements, and
 * each element's (c, f) optimized on its own for the average pair gain.
 */
inline DesignVariables baseline_avg_dg(const Problem& pr, Rng& rng, const ScaOptions& opt = {})
{
    DesignVariables x;
    x.P_s = detail::random_sensing_powers(pr, rng);
    const Vec share = detail::comm_energy_left(pr, x.P_s) / static_cast<double>(pr.M);
    const CMat dominant = dominant_beamformers(pr);
    x.c = Mat::Zero(pr.K, pr.M);
    x.f = dominant;
    for (int m = 0; m < pr.M; ++m) {
        if (!(pr.delta2.col(m).mean() > pr.active_floor())) continue;
        Problem sub = detail::element_problem(pr, m, x.P_s, share);
        ScaResult r = sca_solve(sub, init_feasible(sub, rng), opt);
        x.c.col(m) = r.x.c.col(0);
        x.f.col(m) = r.x.f.col(0);
    }
    complete_from_design(pr, x);
    return x;
}

} // namespace iscc
