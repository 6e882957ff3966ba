#pragma once

#include <cmath>
#include <random>

#include "iscc/channel.hpp"
#include "iscc/dgain.hpp"
#include "iscc/model.hpp"
#include "iscc/solver/problem.hpp"

namespace iscc {

/*!
 * MAP label under a uniform prior and shared per-feature variance: the
 * variance-weighted nearest centroid.  Features with vanishing variance carry
 * no usable likelihood and are skipped.  Ties go to the smallest label.
 */
inline int map_classify(const Vec& x_hat, const ReceivedFeatureStats& stats)
{
    const int L = static_cast<int>(stats.mu_hat.rows());
    const int M = static_cast<int>(stats.mu_hat.cols());
    require_shape(x_hat.size() == M, "map_classify: feature length mismatch");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int l = 0; l < L; ++l) {
        double d = 0.0;
        for (int m = 0; m < M; ++m) {
            if (!(stats.sigma_hat2(m) > kMinVariance)) continue;
            double e = x_hat(m) - stats.mu_hat(l, m);
            d += e * e / stats.sigma_hat2(m);
        }
        if (d < best_d) {
            best_d = d;
            best = l;
        }
    }
    return best;
}

struct AccuracyEstimate {
    double accuracy = 0.0;
    double half_width = 0.0;  // 95% normal-approximation binomial interval
    int trials = 0;
};

/*!
 * Monte-Carlo accuracy of the MAP classifier on the over-the-air aggregate
 * produced by (P_s, c, f): uniform class, shared ground truth with per-device
 * clutter and sensing noise, receiver noise, classification.
 */
inline AccuracyEstimate estimate_accuracy(const DesignVariables& x, const MixtureModel& model, const SensingProfile& profile,
                                          const Problem& pr, int n_trials, Rng& rng)
{
    require(n_trials >= 100, "estimate_accuracy: at least 100 trials are required");
    FeasibilityReport fr = feasibility_check(x, pr);
    if (fr.max_violation() > 1e-6)
        throw InfeasibleError("estimate_accuracy: design violates the " + fr.worst_family() + " constraints");
    const ChannelState& ch = pr.channel;
    CMat b = precoder_from_c(x.c, x.f, ch);
    ReceivedFeatureStats stats = received_feature_stats(model, profile, x.P_s, x.c, x.f, ch.N0);
    std::uniform_int_distribution<int> cls(0, model.L() - 1);
    int correct = 0;
    for (int t = 0; t < n_trials; ++t) {
        int l = cls(rng);
        Mat local = draw_local_features(model, profile, x.P_s, l, rng);
        Vec x_hat = aircomp_aggregate(local, b, x.f, ch, rng);
        correct += map_classify(x_hat, stats) == l;
    }
    AccuracyEstimate out;
    out.trials = n_trials;
    out.accuracy = static_cast<double>(correct) / n_trials;
    out.half_width = 1.959963984540054 * std::sqrt(out.accuracy * (1.0 - out.accuracy) / n_trials);
    return out;
}

} // namespace iscc
