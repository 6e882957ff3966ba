#pragma once

#include <ostream>
#include <utility>
#include <vector>

#include "iscc/model.hpp"

namespace iscc {

using ClassPair = std::pair<int, int>;

/*! Unordered class pairs (l < l') in lexicographic order. */
inline std::vector<ClassPair> class_pairs(int L)
{
    std::vector<ClassPair> out;
    for (int a = 0; a < L; ++a)
        for (int b = a + 1; b < L; ++b) out.emplace_back(a, b);
    return out;
}

inline int pair_index(int L, int a, int b)
{
    require(a != b && a >= 0 && b >= 0 && a < L && b < L, "pair_index: invalid class pair");
    if (a > b) std::swap(a, b);
    return a * L - a * (a + 1) / 2 + (b - a - 1);
}

constexpr double kMinVariance = 1e-300;

inline double pairwise_gain_closed(const ReceivedFeatureStats& stats, int a, int b, int m)
{
    double var = stats.sigma_hat2(m);
    if (!(var > kMinVariance)) throw DomainError("pairwise_gain_closed: received variance is zero");
    double d = stats.mu_hat(a, m) - stats.mu_hat(b, m);
    return d * d / var;
}

/*! Symmetric KL divergence between N(mu1, var1) and N(mu2, var2). */
inline double pairwise_gain_kl(double mu1, double var1, double mu2, double var2)
{
    if (!(var1 > kMinVariance) || !(var2 > kMinVariance)) throw DomainError("pairwise_gain_kl: variance must be positive");
    double d2 = (mu1 - mu2) * (mu1 - mu2);
    return 0.5 * (var1 / var2 + var2 / var1) - 1.0 + 0.5 * d2 * (1.0 / var1 + 1.0 / var2);
}

struct PairGainTable {
    int L = 0;
    std::vector<ClassPair> pairs;
    Mat G;       // pairs x M
    Vec G_pair;  // pairs

    double gain(int a, int b, int m) const { return G(pair_index(L, a, b), m); }
    double pair_total(int a, int b) const { return G_pair(pair_index(L, a, b)); }
};

inline PairGainTable gain_table(const ReceivedFeatureStats& stats)
{
    const int L = static_cast<int>(stats.mu_hat.rows());
    const int M = static_cast<int>(stats.mu_hat.cols());
    PairGainTable t{L, class_pairs(L), Mat(L * (L - 1) / 2, M), Vec()};
    for (std::size_t p = 0; p < t.pairs.size(); ++p)
        for (int m = 0; m < M; ++m) t.G(p, m) = pairwise_gain_closed(stats, t.pairs[p].first, t.pairs[p].second, m);
    t.G_pair = t.G.rowwise().sum();
    return t;
}

struct MinGain {
    double alpha;
    ClassPair pair;
};

/*! Ties within 1e-12 go to the lexicographically smallest pair. */
inline MinGain min_gain(const PairGainTable& t)
{
    if (t.L < 2) throw DomainError("min_gain: at least two classes are required");
    int best = 0;
    for (int p = 1; p < t.G_pair.size(); ++p)
        if (t.G_pair(p) < t.G_pair(best) - 1e-12) best = p;
    return {t.G_pair(best), t.pairs[best]};
}

inline double avg_gain(const PairGainTable& t)
{
    if (t.L < 2) throw DomainError("avg_gain: at least two classes are required");
    return 2.0 / (t.L * (t.L - 1.0)) * t.G_pair.sum();
}

inline void write_gain_csv(std::ostream& os, const PairGainTable& t)
{
    os << "l,lp,m,gain\n";
    for (std::size_t p = 0; p < t.pairs.size(); ++p)
        for (int m = 0; m < t.G.cols(); ++m)
            os << t.pairs[p].first << ',' << t.pairs[p].second << ',' << m << ',' << t.G(p, m) << '\n';
}

} // namespace iscc
