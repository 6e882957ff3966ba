#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "iscc/solver/sca.hpp"

namespace iscc {

/*!
 * Grid for the exhaustive search.  Per device: sensing share of the surplus
 * energy (i/(sensing+1), i = 1..sensing), fraction of the rest actually spent
 * (i/usage), and for M = 2 the share given to element 0 (j/(split-1)).  Per
 * element with N_r = 2: f = (cos a, sin a e^{i phi}), a over [0, pi/2]
 * inclusive and phi over [0, 2 pi).
 */
struct BruteForceGrid {
    int sensing = 40;
    int usage = 10;
    int split = 11;
    int angle = 9;
    int phase = 12;
    std::optional<double> comm_energy;  // fixed per-device transmit energy instead of the remainder
    long long max_points = 50'000'000;

    BruteForceGrid refined() const
    {
        BruteForceGrid g = *this;
        g.sensing = 2 * sensing + 1;
        g.usage = 2 * usage;
        g.split = 2 * split - 1;
        g.angle = 2 * angle - 1;
        g.phase = 2 * phase;
        return g;
    }
};

struct BruteForceResult {
    DesignVariables x;
    double alpha = 0.0;
    long long points = 0;
};

inline BruteForceResult brute_force_oracle(const Problem& pr, const BruteForceGrid& grid = {})
{
    if (pr.K > 2 || pr.M > 2 || pr.N_r > 2 || pr.L > 3)
        throw DomainError("brute_force_oracle: instance too large (needs K, M, N_r <= 2 and L <= 3)");
    require(grid.sensing >= 1 && grid.usage >= 1 && grid.split >= 2 && grid.angle >= 2 && grid.phase >= 1,
            "brute_force_oracle: grid too coarse");

    const int K = pr.K, M = pr.M;
    std::vector<int> dims;
    for (int k = 0; k < K; ++k) {
        dims.push_back(pr.fixed_Ps ? 1 : grid.sensing);
        dims.push_back(grid.usage);
        if (M == 2) dims.push_back(grid.split);
    }
    if (pr.N_r == 2)
        for (int m = 0; m < M; ++m) {
            dims.push_back(grid.angle);
            dims.push_back(grid.phase);
        }
    long long total = 1;
    for (int d : dims) {
        total *= d;
        if (total > grid.max_points) throw DomainError("brute_force_oracle: grid exceeds max_points");
    }

    DesignVariables x;
    x.P_s.resize(K);
    x.c.resize(K, M);
    x.f.resize(pr.N_r, M);
    BruteForceResult best;
    best.alpha = -1.0;
    std::vector<int> idx(dims.size(), 0);
    for (long long n = 0; n < total; ++n) {
        int j = 0;
        Mat energy(K, M);
        for (int k = 0; k < K; ++k) {
            double surplus = pr.budget.E(k) - pr.budget.E_p(k);
            if (pr.fixed_Ps) {
                x.P_s(k) = (*pr.fixed_Ps)(k);
                ++j;
            } else {
                double share = (idx[j++] + 1.0) / (grid.sensing + 1.0);
                x.P_s(k) = share * (grid.comm_energy ? surplus - *grid.comm_energy : surplus) / pr.budget.T_s(k);
            }
            double rest = grid.comm_energy ? *grid.comm_energy : surplus - x.P_s(k) * pr.budget.T_s(k);
            double spend = rest * (idx[j++] + 1.0) / grid.usage;
            if (M == 2) {
                double q = idx[j++] / (grid.split - 1.0);
                energy(k, 0) = q * spend;
                energy(k, 1) = (1.0 - q) * spend;
            } else {
                energy(k, 0) = spend;
            }
        }
        for (int m = 0; m < M; ++m) {
            if (pr.N_r == 2) {
                double a = idx[j++] * (std::numbers::pi / 2.0) / (grid.angle - 1.0);
                double phi = idx[j++] * 2.0 * std::numbers::pi / grid.phase;
                x.f(0, m) = std::cos(a);
                x.f(1, m) = std::sin(a) * std::polar(1.0, phi);
            } else {
                x.f(0, m) = 1.0;
            }
            for (int k = 0; k < K; ++k) {
                double R = eval_R(pr, x.f.col(m), k, m);
                x.c(k, m) = std::sqrt(std::max(energy(k, m), 0.0) * R / (pr.budget.T_c * pr.X(k, m, x.P_s(k))));
            }
        }
        Mat G = achieved_gains(pr, x);
        double a = std::numeric_limits<double>::infinity();
        for (int p = 0; p < pr.P(); ++p) {
            double s = 0.0;
            for (int m = 0; m < M; ++m)
                if (pr.active(p, m)) s += G(p, m);
            a = std::min(a, s);
        }
        if (a > best.alpha) {
            best.alpha = a;
            best.x = x;
        }
        for (std::size_t d = 0; d < dims.size(); ++d) {
            if (++idx[d] < dims[d]) break;
            idx[d] = 0;
        }
    }
    best.points = total;
    complete_from_design(pr, best.x);
    best.alpha = best.x.alpha;
    return best;
}

} // namespace iscc
