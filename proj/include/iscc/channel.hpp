#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "iscc/common.hpp"

namespace iscc {

struct Topology {
    int K = 3;
    int N_r = 8;
    double R = 0.45;          // inner ring radius (km)
    double ring_width = 0.05;
    Vec d;                    // per-device distance (km)

    void validate() const
    {
        require(K >= 1, "topology: K must be at least 1");
        require(N_r >= 1, "topology: N_r must be at least 1");
        require(R > 0.0 && ring_width >= 0.0, "topology: ring radii must be positive");
        require_shape(d.size() == K, "topology: distance vector must have length K");
        for (int k = 0; k < K; ++k)
            require(d(k) >= R - 1e-12 && d(k) <= R + ring_width + 1e-12,
                    "topology: device " + std::to_string(k) + " lies outside the ring");
    }
};

/*! Distance of a point uniform over the ring area, from a uniform variate. */
inline double ring_distance(double R, double width, double unit)
{
    double r0 = R * R;
    double r1 = (R + width) * (R + width);
    return std::sqrt(r0 + unit * (r1 - r0));
}

inline Topology place_devices(int K, int N_r, double R, double ring_width, Rng& rng)
{
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Topology t{K, N_r, R, ring_width, Vec(K)};
    for (int k = 0; k < K; ++k) t.d(k) = ring_distance(R, ring_width, U(rng));
    t.validate();
    return t;
}

struct ChannelParams {
    double shadow_var_db2 = 8.0;
    double N0 = 1.0;
    /*! Gain offset anchored at this distance so that E|h_i|^2 = 1 there; <= 0 disables it. */
    double ref_distance_km = 0.45;
};

struct ChannelState {
    std::vector<CMat> h;  // per device, N_r x M
    double N0 = 1.0;

    int K() const { return static_cast<int>(h.size()); }
    int N_r() const { return h.empty() ? 0 : static_cast<int>(h[0].rows()); }
    int M() const { return h.empty() ? 0 : static_cast<int>(h[0].cols()); }
    auto col(int k, int m) const { return h[k].col(m); }

    void validate() const
    {
        require_shape(!h.empty(), "channel: no devices");
        for (const auto& hk : h) {
            require_shape(hk.rows() == N_r() && hk.cols() == M(), "channel: inconsistent per-device shapes");
            require(hk.allFinite(), "channel: non-finite entry");
        }
        require(N0 >= 0.0, "channel: N0 must be nonnegative");
    }
};

inline double path_loss_db(double d_km)
{
    require(d_km > 0.0, "path_loss_db: distance must be positive");
    return 128.1 + 37.6 * std::log10(d_km);
}

inline double gain_offset_db(const ChannelParams& p)
{
    return p.ref_distance_km > 0.0 ? path_loss_db(p.ref_distance_km) : 0.0;
}

/*! Channel of one device: large-scale amplitude times a CN(0, I) draw, copied across all M subcarriers. */
inline CMat realize_device_channel(double d_km, int N_r, int M, const ChannelParams& p, Rng& rng)
{
    std::normal_distribution<double> shadow(0.0, std::sqrt(std::max(p.shadow_var_db2, 0.0)));
    double zeta = p.shadow_var_db2 > 0.0 ? shadow(rng) : 0.0;
    double amp = std::pow(10.0, (-path_loss_db(d_km) + zeta + gain_offset_db(p)) / 20.0);
    CVec rho(N_r);
    for (int i = 0; i < N_r; ++i) rho(i) = complex_normal(rng);
    CMat out(N_r, M);
    for (int m = 0; m < M; ++m) out.col(m) = amp * rho;
    return out;
}

inline ChannelState realize_channel(const Topology& topo, int M, const ChannelParams& p, Rng& rng)
{
    topo.validate();
    ChannelState ch;
    ch.N0 = p.N0;
    for (int k = 0; k < topo.K; ++k) ch.h.push_back(realize_device_channel(topo.d(k), topo.N_r, M, p, rng));
    return ch;
}

inline cplx effective_gain(const ChannelState& ch, const CMat& f, int k, int m)
{
    return f.col(m).dot(ch.col(k, m));  // f^H h
}

/*!
 * Receiver output Re(f^H (sum_k h b x + w)).  The noise has independent N(0, N0)
 * real and imaginary parts so that the real output carries variance N0 |f|^2.
 */
inline Vec aircomp_aggregate(const Mat& x, const CMat& b, const CMat& f, const ChannelState& ch, Rng& rng,
                             double* imag_residual = nullptr)
{
    const int K = ch.K();
    const int M = ch.M();
    const int N = ch.N_r();
    require_shape(x.rows() == K && x.cols() == M, "aircomp_aggregate: x must be K x M");
    require_shape(b.rows() == K && b.cols() == M, "aircomp_aggregate: b must be K x M");
    require_shape(f.rows() == N && f.cols() == M, "aircomp_aggregate: f must be N_r x M");
    std::normal_distribution<double> n(0.0, std::sqrt(ch.N0));
    Vec out(M);
    double worst = 0.0;
    for (int m = 0; m < M; ++m) {
        cplx signal = 0.0;
        for (int k = 0; k < K; ++k) signal += effective_gain(ch, f, k, m) * b(k, m) * x(k, m);
        worst = std::max(worst, std::abs(signal.imag()) / std::max(1.0, std::abs(signal)));
        cplx noise = 0.0;
        if (ch.N0 > 0.0)
            for (int i = 0; i < N; ++i) noise += std::conj(f(i, m)) * cplx(n(rng), n(rng));
        out(m) = signal.real() + noise.real();
    }
    if (imag_residual) *imag_residual = worst;
    return out;
}

inline CMat precoder_from_c(const Mat& c, const CMat& f, const ChannelState& ch)
{
    const int K = ch.K();
    const int M = ch.M();
    require_shape(c.rows() == K && c.cols() == M, "precoder_from_c: c must be K x M");
    require_shape(f.rows() == ch.N_r() && f.cols() == M, "precoder_from_c: f must be N_r x M");
    CMat b = CMat::Zero(K, M);
    for (int k = 0; k < K; ++k)
        for (int m = 0; m < M; ++m) {
            require(c(k, m) >= 0.0, "precoder_from_c: c must be nonnegative");
            if (c(k, m) == 0.0) continue;
            cplx g = effective_gain(ch, f, k, m);
            double scale = f.col(m).norm() * ch.col(k, m).norm();
            if (!(std::abs(g) > 1e-12 * scale) || std::abs(g) == 0.0)
                throw SingularityError(k, m, "precoder_from_c: vanishing effective channel at device " +
                                                 std::to_string(k) + ", element " + std::to_string(m));
            b(k, m) = c(k, m) / g;
        }
    return b;
}

struct EnergyBudget {
    Vec E;    // K
    Vec E_p;  // K
    Vec T_s;  // K
    double T_c = 1.0;

    int K() const { return static_cast<int>(E.size()); }

    void validate() const
    {
        require_shape(E_p.size() == E.size() && T_s.size() == E.size(), "energy budget: per-device vectors must share length K");
        require(T_c > 0.0, "energy budget: T_c must be positive");
        for (int k = 0; k < K(); ++k) {
            require(E(k) > E_p(k), "energy budget: device " + std::to_string(k) + " has E <= E_p");
            require(T_s(k) > 0.0, "energy budget: T_s must be positive");
        }
    }

    static EnergyBudget uniform(int K, double E, double E_p, double T_s, double T_c)
    {
        EnergyBudget b{Vec::Constant(K, E), Vec::Constant(K, E_p), Vec::Constant(K, T_s), T_c};
        b.validate();
        return b;
    }
};

struct EnergyReport {
    Vec used;   // K
    Vec slack;  // K
};

/*! Energy with the transmit term written through the received-power targets c. */
inline EnergyReport transmit_energy(const Mat& c, const CMat& f, const ChannelState& ch, const Mat& X,
                                    const EnergyBudget& budget, const Vec& P_s)
{
    const int K = ch.K();
    const int M = ch.M();
    require_shape(X.rows() == K && X.cols() == M && c.rows() == K && c.cols() == M && P_s.size() == K,
                  "transmit_energy: inconsistent shapes");
    EnergyReport r{Vec(K), Vec(K)};
    for (int k = 0; k < K; ++k) {
        double comm = 0.0;
        for (int m = 0; m < M; ++m) {
            if (c(k, m) == 0.0) continue;
            double R = std::norm(effective_gain(ch, f, k, m));
            if (!(R > 0.0))
                throw SingularityError(k, m, "transmit_energy: vanishing effective channel at device " +
                                                 std::to_string(k) + ", element " + std::to_string(m));
            comm += c(k, m) * c(k, m) * X(k, m) / R;
        }
        r.used(k) = P_s(k) * budget.T_s(k) + budget.E_p(k) + budget.T_c * comm;
        r.slack(k) = budget.E(k) - r.used(k);
    }
    return r;
}

/*! Same accounting written through the precoders b. */
inline EnergyReport transmit_energy_b(const CMat& b, const Mat& X, const EnergyBudget& budget, const Vec& P_s)
{
    const int K = static_cast<int>(b.rows());
    EnergyReport r{Vec(K), Vec(K)};
    for (int k = 0; k < K; ++k) {
        double comm = 0.0;
        for (int m = 0; m < b.cols(); ++m) comm += std::norm(b(k, m)) * X(k, m);
        r.used(k) = P_s(k) * budget.T_s(k) + budget.E_p(k) + budget.T_c * comm;
        r.slack(k) = budget.E(k) - r.used(k);
    }
    return r;
}

} // namespace iscc
