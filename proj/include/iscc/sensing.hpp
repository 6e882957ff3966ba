#pragma once

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "iscc/model.hpp"

namespace iscc {

struct FmcwConfig {
    int N = 32;            // chirps
    double T0 = 6.4e-5;    // chirp duration (s)
    double f0 = 5.0e4;     // start frequency (Hz)
    double Bs = 2.0e5;     // sweep bandwidth (Hz)
    double fs = 1.0e6;     // sampling rate (Hz)

    int samples_per_chirp() const
    {
        double n = T0 * fs;
        double r = std::round(n);
        if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, n))
            throw ConfigError("fmcw: T0 * fs must be a positive integer");
        return static_cast<int>(r);
    }

    void validate() const
    {
        if (N < 1) throw ConfigError("fmcw: N must be at least 1");
        if (!(T0 > 0.0 && Bs > 0.0 && fs > 0.0)) throw ConfigError("fmcw: T0, Bs and fs must be positive");
        samples_per_chirp();
    }
};

namespace detail {

inline double chirp_phase(const FmcwConfig& cfg, double t)
{
    return 2.0 * std::numbers::pi * (cfg.f0 * t + cfg.Bs / cfg.T0 * t * t);
}

} // namespace detail

inline Vec generate_fmcw(const FmcwConfig& cfg)
{
    cfg.validate();
    const int spc = cfg.samples_per_chirp();
    Vec s(cfg.N * spc);
    for (int i = 0; i < s.size(); ++i) s(i) = std::cos(detail::chirp_phase(cfg, (i % spc) / cfg.fs));
    return s;
}

/*! Complex exponential with the same phase law; its real part is generate_fmcw. */
inline CVec generate_fmcw_analytic(const FmcwConfig& cfg)
{
    cfg.validate();
    const int spc = cfg.samples_per_chirp();
    CVec s(cfg.N * spc);
    for (int i = 0; i < s.size(); ++i) s(i) = std::polar(1.0, detail::chirp_phase(cfg, (i % spc) / cfg.fs));
    return s;
}

/*! Reflection path with a per-chirp coefficient (one entry means constant). */
struct EchoPath {
    std::vector<cplx> coef;
    double tau = 0.0;
};

struct EchoScene {
    EchoPath target;
    std::vector<EchoPath> clutter;
    double noise_var = 0.0;

    void validate(const FmcwConfig& cfg) const
    {
        auto check = [&](const EchoPath& p, const std::string& what) {
            require(p.tau >= 0.0 && p.tau < cfg.N * cfg.T0, "echo scene: " + what + " delay outside [0, N*T0)");
            require(p.coef.size() == 1 || static_cast<int>(p.coef.size()) == cfg.N,
                    "echo scene: " + what + " coefficient sequence must have length 1 or N");
        };
        check(target, "target");
        for (std::size_t j = 0; j < clutter.size(); ++j) check(clutter[j], "clutter path " + std::to_string(j));
        require(noise_var >= 0.0, "echo scene: noise variance must be nonnegative");
    }
};

/*! Received samples reshaped to (T0*fs) x N, one chirp per column. */
inline CMat synthesize_received(const FmcwConfig& cfg, const EchoScene& scene, Rng& rng)
{
    cfg.validate();
    scene.validate(cfg);
    const int spc = cfg.samples_per_chirp();
    const int total = cfg.N * spc;
    const Vec s = generate_fmcw(cfg);
    CVec r = CVec::Zero(total);
    auto add_path = [&](const EchoPath& p) {
        const int d = static_cast<int>(std::lround(p.tau * cfg.fs));
        for (int i = d; i < total; ++i) {
            const cplx a = p.coef.size() == 1 ? p.coef[0] : p.coef[i / spc];
            r(i) += a * s(i - d);
        }
    };
    add_path(scene.target);
    for (const auto& p : scene.clutter) add_path(p);
    if (scene.noise_var > 0.0)
        for (int i = 0; i < total; ++i) r(i) += complex_normal(rng, scene.noise_var);
    return Eigen::Map<CMat>(r.data(), spc, cfg.N);
}

/*! Keeps singular components r1..r2 (one-based, nonincreasing order). */
inline CMat clutter_cancel_svd(const CMat& R, int r1, int r2)
{
    const int dmin = static_cast<int>(std::min(R.rows(), R.cols()));
    if (!(1 <= r1 && r1 <= r2 && r2 <= dmin))
        throw DomainError("clutter_cancel_svd: need 1 <= r1 <= r2 <= " + std::to_string(dmin));
    Eigen::JacobiSVD<CMat> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int n = r2 - r1 + 1;
    const auto& U = svd.matrixU();
    const auto& V = svd.matrixV();
    const auto& S = svd.singularValues();
    return U.middleCols(r1 - 1, n) * S.segment(r1 - 1, n).asDiagonal() * V.middleCols(r1 - 1, n).adjoint();
}

/*! Column sums, real parts followed by imaginary parts. */
inline Vec doppler_compress(const CMat& R)
{
    const int N = static_cast<int>(R.cols());
    Vec out(2 * N);
    for (int i = 0; i < N; ++i) {
        cplx s = R.col(i).sum();
        out(i) = s.real();
        out(N + i) = s.imag();
    }
    return out;
}

struct PcaTemplate {
    Mat projection;   // 2N x M, orthonormal columns
    Vec mean;         // 2N
    Vec eigenvalues;  // all, nonincreasing
    Mat centroids;    // L x M (extracted-feature class means)
    Vec pooled_var;   // M

    int M() const { return static_cast<int>(projection.cols()); }
    MixtureModel to_mixture() const { return MixtureModel::make(centroids, pooled_var); }
};

inline Vec pca_extract(const PcaTemplate& t, const Vec& v)
{
    require_shape(v.size() == t.mean.size(), "pca_extract: vector length mismatch");
    return t.projection.transpose() * (v - t.mean);
}

/*!
 * Fits the top-M principal subspace of the rows of X.  When labels are given
 * (values 0..L-1) the template also carries per-class centroids and pooled
 * within-class variances of the extracted features.
 */
inline PcaTemplate pca_fit(const Mat& X, int M, const std::vector<int>& labels = {})
{
    const int n = static_cast<int>(X.rows());
    const int dim = static_cast<int>(X.cols());
    require(M >= 1 && M <= dim, "pca_fit: need 1 <= M <= vector length");
    require(n >= M, "pca_fit: training set smaller than M");
    require_shape(labels.empty() || static_cast<int>(labels.size()) == n, "pca_fit: one label per row required");

    PcaTemplate t;
    t.mean = X.colwise().mean().transpose();
    Mat centered = X.rowwise() - t.mean.transpose();
    Mat cov = centered.transpose() * centered / std::max(1, n - 1);
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    Vec ev = es.eigenvalues().reverse();
    Mat vecs = es.eigenvectors().rowwise().reverse();
    const double floor = 1e-10 * std::max(ev(0), 1e-300);
    int rank = 0;
    while (rank < dim && ev(rank) > floor) ++rank;
    if (rank < M)
        throw DomainError("pca_fit: training set has rank " + std::to_string(rank) + "; at most M = " +
                          std::to_string(rank) + " is achievable");
    t.eigenvalues = ev;
    t.projection = vecs.leftCols(M);

    if (!labels.empty()) {
        int L = 0;
        for (int l : labels) {
            require(l >= 0, "pca_fit: labels must be nonnegative");
            L = std::max(L, l + 1);
        }
        Mat F = centered * t.projection;
        t.centroids = Mat::Zero(L, M);
        Vec count = Vec::Zero(L);
        for (int i = 0; i < n; ++i) {
            t.centroids.row(labels[i]) += F.row(i);
            count(labels[i]) += 1.0;
        }
        for (int l = 0; l < L; ++l) {
            require(count(l) > 0.0, "pca_fit: class " + std::to_string(l) + " has no samples");
            t.centroids.row(l) /= count(l);
        }
        t.pooled_var = Vec::Zero(M);
        for (int i = 0; i < n; ++i) t.pooled_var += (F.row(i) - t.centroids.row(labels[i])).array().square().matrix().transpose();
        t.pooled_var /= std::max(1, n - L);
    }
    return t;
}

/*! Micro-Doppler signature of one synthetic class. */
struct MotionClass {
    double doppler_hz;     // bulk Doppler
    double mod_index;      // micro-Doppler phase modulation depth (rad)
    double mod_hz;         // micro-Doppler rate
    double amplitude;
};

struct SceneGenerator {
    FmcwConfig cfg;
    std::vector<MotionClass> classes{{1500.0, 0.5, 900.0, 1.0},
                                     {1500.0, 2.0, 1800.0, 0.8},
                                     {3500.0, 0.5, 900.0, 1.0},
                                     {3500.0, 2.0, 1800.0, 0.8}};
    double target_delay = 3.0e-6;
    int clutter_paths = 32;
    double clutter_power = 4.0;
    double max_clutter_delay = 2.0e-5;
    double amplitude_jitter = 0.1;
    double phase_jitter = 0.2;
    double noise_var = 0.05;

    int L() const { return static_cast<int>(classes.size()); }

    EchoScene make_scene(int l, Rng& rng) const
    {
        require(l >= 0 && l < L(), "scene generator: class index out of range");
        std::normal_distribution<double> n01(0.0, 1.0);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const MotionClass& mc = classes[l];
        const double amp = mc.amplitude * (1.0 + amplitude_jitter * n01(rng));
        const double phi = phase_jitter * n01(rng);
        EchoScene sc;
        sc.target.tau = target_delay;
        sc.target.coef.resize(cfg.N);
        for (int j = 0; j < cfg.N; ++j) {
            const double t = j * cfg.T0;
            const double ph = 2.0 * std::numbers::pi * mc.doppler_hz * t +
                              mc.mod_index * std::sin(2.0 * std::numbers::pi * mc.mod_hz * t) + phi;
            sc.target.coef[j] = std::polar(amp, ph);
        }
        for (int j = 0; j < clutter_paths; ++j) {
            EchoPath p;
            p.tau = U(rng) * max_clutter_delay;
            p.coef = {complex_normal(rng, clutter_power / std::max(1, clutter_paths))};
            sc.clutter.push_back(p);
        }
        sc.noise_var = noise_var;
        return sc;
    }
};

/*! Received matrix to compressed Doppler vector, with default filter indices r1 = 2, r2 = min-dim - 1. */
inline Vec sensing_chain(const CMat& R, int r1 = 2, int r2 = 0)
{
    const int dmin = static_cast<int>(std::min(R.rows(), R.cols()));
    if (r2 <= 0) r2 = std::max(r1, dmin - 1);
    return doppler_compress(clutter_cancel_svd(R, r1, r2));
}

struct LabeledSet {
    Mat X;  // rows are samples
    std::vector<int> labels;
};

inline LabeledSet generate_training_set(const SceneGenerator& gen, int per_class, Rng& rng)
{
    const int n = per_class * gen.L();
    LabeledSet out{Mat(n, 2 * gen.cfg.N), {}};
    int row = 0;
    for (int l = 0; l < gen.L(); ++l)
        for (int i = 0; i < per_class; ++i, ++row) {
            out.X.row(row) = sensing_chain(synthesize_received(gen.cfg, gen.make_scene(l, rng), rng)).transpose();
            out.labels.push_back(l);
        }
    return out;
}

inline void write_feature_csv(std::ostream& os, const Mat& F, const std::vector<int>& labels)
{
    for (int m = 0; m < F.cols(); ++m) os << 'x' << m << ',';
    os << "label\n";
    os.precision(17);
    for (int i = 0; i < F.rows(); ++i) {
        for (int m = 0; m < F.cols(); ++m) os << F(i, m) << ',';
        os << labels[i] << '\n';
    }
}

} // namespace iscc
