#pragma once

#include <string>
#include <vector>

#include "iscc/common.hpp"

namespace iscc {

/*!
 * Ground-truth Gaussian mixture over M independent features with L equiprobable
 * classes and a per-feature variance shared by all classes.  Class indices are
 * zero-based.
 */
struct MixtureModel {
    Mat mu;      // L x M
    Vec sigma2;  // M

    int L() const { return static_cast<int>(mu.rows()); }
    int M() const { return static_cast<int>(mu.cols()); }
    double prior() const { return 1.0 / L(); }

    void validate() const
    {
        require_shape(mu.rows() >= 1 && mu.cols() >= 1, "mixture: empty centroid matrix");
        require_shape(sigma2.size() == mu.cols(), "mixture: sigma2 length must equal M");
        for (int m = 0; m < M(); ++m)
            require(sigma2(m) > 0.0, "mixture: sigma2[" + std::to_string(m) + "] must be positive");
        require(mu.allFinite(), "mixture: non-finite centroid");
    }

    static MixtureModel make(Mat mu, Vec sigma2)
    {
        MixtureModel out{std::move(mu), std::move(sigma2)};
        out.validate();
        return out;
    }
};

/*! Per-device clutter statistics and the shared sensing-noise variance. */
struct SensingProfile {
    Vec sigma_s2;  // K
    Vec mu_s;      // K
    double sigma_r2 = 0.2;
    Vec T_s;       // K

    int K() const { return static_cast<int>(sigma_s2.size()); }

    void validate() const
    {
        require_shape(mu_s.size() == sigma_s2.size() && T_s.size() == sigma_s2.size(),
                      "sensing profile: per-device vectors must share length K");
        require(sigma_r2 > 0.0, "sensing profile: sigma_r2 must be positive");
        for (int k = 0; k < K(); ++k) {
            require(sigma_s2(k) >= 0.0, "sensing profile: sigma_s2[" + std::to_string(k) + "] must be nonnegative");
            require(T_s(k) > 0.0, "sensing profile: T_s[" + std::to_string(k) + "] must be positive");
        }
    }

    static SensingProfile uniform(int K, double sigma_s2, double sigma_r2, double T_s)
    {
        SensingProfile p{Vec::Constant(K, sigma_s2), Vec::Zero(K), sigma_r2, Vec::Constant(K, T_s)};
        p.validate();
        return p;
    }
};

struct LocalFeatureStats {
    Mat mu;   // L x M
    Mat var;  // K x M
};

struct ReceivedFeatureStats {
    Mat mu_hat;      // L x M
    Vec sigma_hat2;  // M
    bool shared_variance = true;
};

struct SecondMoment {
    Mat X;         // K x M
    Vec P_s_ref;   // K
};

namespace detail {

inline void check_power(const Vec& P_s, int K, const char* what)
{
    require_shape(P_s.size() == K, std::string(what) + ": P_s length must equal K");
    for (int k = 0; k < K; ++k)
        if (!(P_s(k) > 0.0))
            throw DomainError(std::string(what) + ": sensing power of device " + std::to_string(k) + " must be positive");
}

} // namespace detail

inline LocalFeatureStats local_feature_stats(const MixtureModel& model, const SensingProfile& profile, const Vec& P_s)
{
    const int K = profile.K();
    detail::check_power(P_s, K, "local_feature_stats");
    LocalFeatureStats out{model.mu, Mat(K, model.M())};
    for (int k = 0; k < K; ++k)
        for (int m = 0; m < model.M(); ++m)
            out.var(k, m) = model.sigma2(m) + profile.sigma_s2(k) + profile.sigma_r2 / P_s(k);
    return out;
}

/*! f holds one receive beamformer per column (N_r x M). */
inline ReceivedFeatureStats received_feature_stats(const MixtureModel& model, const SensingProfile& profile,
                                                   const Vec& P_s, const Mat& c, const CMat& f, double N0)
{
    const int K = profile.K();
    const int M = model.M();
    require_shape(c.rows() == K && c.cols() == M, "received_feature_stats: c must be K x M");
    require_shape(f.cols() == M, "received_feature_stats: f must have M columns");
    detail::check_power(P_s, K, "received_feature_stats");
    require(N0 >= 0.0, "received_feature_stats: N0 must be nonnegative");

    ReceivedFeatureStats out{Mat(model.L(), M), Vec(M), true};
    for (int m = 0; m < M; ++m) {
        double S = c.col(m).sum();
        double spread = 0.0;
        for (int k = 0; k < K; ++k)
            spread += c(k, m) * c(k, m) * (profile.sigma_s2(k) + profile.sigma_r2 / P_s(k));
        out.mu_hat.col(m) = S * model.mu.col(m);
        out.sigma_hat2(m) = S * S * model.sigma2(m) + spread + N0 * f.col(m).squaredNorm();
    }
    return out;
}

/*! P_s-independent part of the local second moment: mean of mu^2 plus sigma_m^2 plus sigma_s^2. */
inline Mat second_moment_base(const MixtureModel& model, const SensingProfile& profile)
{
    Mat chi(profile.K(), model.M());
    for (int m = 0; m < model.M(); ++m) {
        double mean_sq = model.mu.col(m).squaredNorm() / model.L();
        for (int k = 0; k < profile.K(); ++k)
            chi(k, m) = mean_sq + model.sigma2(m) + profile.sigma_s2(k);
    }
    return chi;
}

inline SecondMoment local_second_moment(const MixtureModel& model, const SensingProfile& profile, const Vec& P_s_ref)
{
    detail::check_power(P_s_ref, profile.K(), "local_second_moment");
    Mat X = second_moment_base(model, profile);
    for (int k = 0; k < profile.K(); ++k)
        X.row(k).array() += profile.sigma_r2 / P_s_ref(k);
    return {X, P_s_ref};
}

/*! One draw of the K x M local features for class l, sharing the ground truth across devices. */
inline Mat draw_local_features(const MixtureModel& model, const SensingProfile& profile, const Vec& P_s, int l, Rng& rng)
{
    const int K = profile.K();
    const int M = model.M();
    std::normal_distribution<double> n01(0.0, 1.0);
    Mat x(K, M);
    for (int m = 0; m < M; ++m) {
        double truth = model.mu(l, m) + std::sqrt(model.sigma2(m)) * n01(rng);
        for (int k = 0; k < K; ++k) {
            double clutter = profile.mu_s(k) + std::sqrt(profile.sigma_s2(k)) * n01(rng);
            double noise = std::sqrt(profile.sigma_r2) * n01(rng);
            x(k, m) = truth + (clutter - profile.mu_s(k)) + noise / std::sqrt(P_s(k));
        }
    }
    return x;
}

inline std::vector<Mat> sample_local_features(const MixtureModel& model, const SensingProfile& profile, const Vec& P_s,
                                              int l, int count, Rng& rng)
{
    detail::check_power(P_s, profile.K(), "sample_local_features");
    require(l >= 0 && l < model.L(), "sample_local_features: class index out of range");
    require(count >= 1, "sample_local_features: count must be at least 1");
    std::vector<Mat> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(draw_local_features(model, profile, P_s, l, rng));
    return out;
}

} // namespace iscc
