#pragma once

#include <cmath>
#include <vector>

#include "iscc/solver/barrier.hpp"
#include "iscc/solver/problem.hpp"

namespace iscc {

/*!
 * Flat real layout of the decision vector: P_s (unless fixed), c, beamformer
 * coordinates in the channel span (real then imaginary per element), u, v for
 * pairs with nonzero separation, alpha.
 */
struct Layout {
    int K = 0, M = 0, P = 0;
    bool fixed_P = false;
    std::vector<int> r, off_a;
    std::vector<int> act_p, act_m;  // active (pair, element) list
    Eigen::MatrixXi act_index;      // pairs x M, -1 when inactive
    int iP = 0, ic = 0, iu = 0, iv = 0, ialpha = 0, n = 0;
    std::vector<int> positive;

    explicit Layout(const Problem& pr)
    {
        K = pr.K;
        M = pr.M;
        P = pr.P();
        fixed_P = pr.fixed_Ps.has_value();
        act_index = Eigen::MatrixXi::Constant(P, M, -1);
        for (int p = 0; p < P; ++p)
            for (int m = 0; m < M; ++m)
                if (pr.active(p, m)) {
                    act_index(p, m) = static_cast<int>(act_p.size());
                    act_p.push_back(p);
                    act_m.push_back(m);
                }
        int i = 0;
        iP = i;
        if (!fixed_P) i += K;
        ic = i;
        i += K * M;
        for (int m = 0; m < M; ++m) {
            r.push_back(pr.rank(m));
            off_a.push_back(i);
            i += 2 * pr.rank(m);
        }
        iu = i;
        i += K * M;
        iv = i;
        i += static_cast<int>(act_p.size());
        ialpha = i++;
        n = i;
        if (!fixed_P)
            for (int k = 0; k < K; ++k) positive.push_back(iP + k);
        for (int j = 0; j < K * M; ++j) positive.push_back(ic + j);
        for (int j = 0; j < K * M; ++j) positive.push_back(iu + j);
        for (int j = 0; j < num_active(); ++j) positive.push_back(iv + j);
    }

    int num_active() const { return static_cast<int>(act_p.size()); }
    int Pk(int k) const { return iP + k; }
    int c(int k, int m) const { return ic + k * M + m; }
    int u(int k, int m) const { return iu + k * M + m; }
    int ar(int m, int i) const { return off_a[m] + i; }
    int ai(int m, int i) const { return off_a[m] + r[m] + i; }
    int v(int a) const { return iv + a; }
};

inline double power_of(const Problem& pr, const Layout& lay, const Vec& x, int k)
{
    return lay.fixed_P ? (*pr.fixed_Ps)(k) : x(lay.Pk(k));
}

inline CVec span_coords(const Layout& lay, const Vec& x, int m)
{
    CVec a(lay.r[m]);
    for (int i = 0; i < lay.r[m]; ++i) a(i) = cplx(x(lay.ar(m, i)), x(lay.ai(m, i)));
    return a;
}

inline Vec pack(const Problem& pr, const Layout& lay, const DesignVariables& d)
{
    Vec x(lay.n);
    if (!lay.fixed_P)
        for (int k = 0; k < lay.K; ++k) x(lay.Pk(k)) = d.P_s(k);
    for (int k = 0; k < lay.K; ++k)
        for (int m = 0; m < lay.M; ++m) {
            x(lay.c(k, m)) = d.c(k, m);
            x(lay.u(k, m)) = d.u(k, m);
        }
    for (int m = 0; m < lay.M; ++m) {
        CVec a = pr.basis[m].adjoint() * d.f.col(m);
        for (int i = 0; i < lay.r[m]; ++i) {
            x(lay.ar(m, i)) = a(i).real();
            x(lay.ai(m, i)) = a(i).imag();
        }
    }
    for (int j = 0; j < lay.num_active(); ++j) x(lay.v(j)) = d.v(lay.act_p[j], lay.act_m[j]);
    x(lay.ialpha) = d.alpha;
    return x;
}

inline DesignVariables unpack(const Problem& pr, const Layout& lay, const Vec& x)
{
    DesignVariables d;
    d.P_s.resize(lay.K);
    for (int k = 0; k < lay.K; ++k) d.P_s(k) = power_of(pr, lay, x, k);
    d.c.resize(lay.K, lay.M);
    d.u.resize(lay.K, lay.M);
    for (int k = 0; k < lay.K; ++k)
        for (int m = 0; m < lay.M; ++m) {
            d.c(k, m) = x(lay.c(k, m));
            d.u(k, m) = x(lay.u(k, m));
        }
    d.f.resize(pr.N_r, lay.M);
    for (int m = 0; m < lay.M; ++m) d.f.col(m) = pr.basis[m] * span_coords(lay, x, m);
    d.v = Mat::Zero(lay.P, lay.M);
    for (int j = 0; j < lay.num_active(); ++j) d.v(lay.act_p[j], lay.act_m[j]) = x(lay.v(j));
    d.alpha = x(lay.ialpha);
    return d;
}

/*! Expansion point and the gradients of R and Q there. */
struct TaylorReference {
    DesignVariables x;
    Mat R;                  // K x M
    std::vector<CMat> w;    // per element, r x K: h (h^H f_t) in span coordinates
    Vec S;                  // M
    Mat Q, B, C;            // pairs x M
    Mat wE;                 // K x M, u_t * P_t

    static TaylorReference build(const Problem& pr, const DesignVariables& x)
    {
        TaylorReference t;
        t.x = x;
        t.R.resize(pr.K, pr.M);
        t.S = x.c.colwise().sum().transpose();
        for (int m = 0; m < pr.M; ++m) {
            CVec a = pr.basis[m].adjoint() * x.f.col(m);
            CMat wm(pr.rank(m), pr.K);
            for (int k = 0; k < pr.K; ++k) {
                CVec h = pr.h_red[m].col(k);
                cplx s = h.dot(a);  // h^H f_t
                wm.col(k) = h * s;
                t.R(k, m) = std::norm(s);
            }
            t.w.push_back(wm);
        }
        t.Q = t.B = t.C = Mat::Zero(pr.P(), pr.M);
        for (int p = 0; p < pr.P(); ++p)
            for (int m = 0; m < pr.M; ++m) {
                if (!pr.active(p, m)) continue;
                double v = x.v(p, m);
                require(v > 0.0, "taylor reference: v must be positive on active pairs");
                double D = pr.delta2(p, m);
                t.Q(p, m) = D * t.S(m) * t.S(m) / v;
                t.B(p, m) = -D * (t.S(m) / v) * (t.S(m) / v);
                t.C(p, m) = 2.0 * D * t.S(m) / v;
            }
        t.wE.resize(pr.K, pr.M);
        for (int k = 0; k < pr.K; ++k)
            for (int m = 0; m < pr.M; ++m) t.wE(k, m) = x.u(k, m) * x.P_s(k);
        return t;
    }
};

/*! Gradient of R = |f^H h|^2 with respect to conj(f), times two: A = 2 h h^H f_t. */
inline CVec taylor_A(const Problem& pr, const TaylorReference& ref, int k, int m)
{
    CVec h = pr.channel.col(k, m);
    return 2.0 * h * h.dot(ref.x.f.col(m));
}

inline double taylor_R_hat(const Problem& pr, const CVec& f_m, const TaylorReference& ref, int k, int m)
{
    CVec d = f_m - ref.x.f.col(m);
    return ref.R(k, m) + d.dot(taylor_A(pr, ref, k, m)).real();
}

inline double taylor_Q_hat(const Problem& pr, const Mat& c, double v, const TaylorReference& ref, int p, int m)
{
    (void)pr;
    double S = c.col(m).sum();
    return ref.Q(p, m) + ref.B(p, m) * (v - ref.x.v(p, m)) + ref.C(p, m) * (S - ref.S(m));
}

/*!
 * Constraint set of the convex surrogate around a reference, or of the exact
 * problem when exact = true (values and gradients only).  The bilinear
 * u / P_s part of the transmit energy is replaced by its tight arithmetic-
 * geometric majorant (u^2 / w + w / P_s^2) / 2 with w = u_t P_t.
 */
class ConstraintSet {
public:
    // holds references: both arguments must outlive the set
    ConstraintSet(const Problem&&, const TaylorReference&, bool = false) = delete;
    ConstraintSet(const Problem&, const TaylorReference&&, bool = false) = delete;
    ConstraintSet(const Problem& pr, const TaylorReference& ref, bool exact = false)
        : pr_(pr), ref_(ref), lay_(pr), exact_(exact)
    {
        cost_ = Vec::Zero(lay_.n);
        cost_(lay_.ialpha) = -1.0;
        iE_ = 0;
        iD_ = iE_ + pr.K;
        iR_ = iD_ + pr.P();
        iZ_ = iR_ + pr.K * pr.M;
        m_ = iZ_ + lay_.num_active();
    }

    int dim() const { return lay_.n; }
    int num_constraints() const { return m_; }
    const Vec& cost() const { return cost_; }
    const std::vector<int>& positive() const { return lay_.positive; }
    const Layout& layout() const { return lay_; }
    int energy_row(int k) const { return iE_ + k; }
    int pair_row(int p) const { return iD_ + p; }
    int ratio_row(int k, int m) const { return iR_ + k * pr_.M + m; }
    int gain_row(int a) const { return iZ_ + a; }

    bool values(const Vec& x, Vec& g) const
    {
        const int K = pr_.K, M = pr_.M;
        const double Tc = pr_.budget.T_c, sr = pr_.sigma_r2;
        for (int k = 0; k < K; ++k)
            if (!(power_of(pr_, lay_, x, k) > 0.0)) return false;
        for (int k = 0; k < K; ++k) {
            const double P = power_of(pr_, lay_, x, k);
            double e = pr_.budget.T_s(k) * P + pr_.budget.E_p(k) - pr_.budget.E(k);
            for (int m = 0; m < M; ++m) {
                const double u = x(lay_.u(k, m));
                if (exact_ || lay_.fixed_P)
                    e += Tc * u * pr_.X(k, m, P);
                else {
                    const double w = ref_.wE(k, m);
                    e += Tc * (u * pr_.chi(k, m) + 0.5 * sr * (u * u / w + w / (P * P)));
                }
            }
            g(iE_ + k) = e;
        }
        for (int p = 0; p < pr_.P(); ++p) {
            double s = x(lay_.ialpha);
            for (int m = 0; m < M; ++m)
                if (lay_.act_index(p, m) >= 0) s -= x(lay_.v(lay_.act_index(p, m)));
            g(iD_ + p) = s;
        }
        for (int k = 0; k < K; ++k)
            for (int m = 0; m < M; ++m) {
                const double u = x(lay_.u(k, m));
                const double c = x(lay_.c(k, m));
                if (!(u > 0.0)) {
                    if (c != 0.0) return false;
                    g(ratio_row(k, m)) = -ratio_R(x, k, m);
                    continue;
                }
                g(ratio_row(k, m)) = c * c / u - ratio_R(x, k, m);
            }
        for (int a = 0; a < lay_.num_active(); ++a) {
            const int p = lay_.act_p[a], m = lay_.act_m[a];
            const double v = x(lay_.v(a));
            const double Z = z_value(x, m);
            const double S = col_sum(x, m);
            if (exact_) {
                if (!(v > 0.0)) return false;
                g(iZ_ + a) = Z - pr_.delta2(p, m) * S * S / v;
            } else {
                g(iZ_ + a) = Z - (ref_.Q(p, m) + ref_.B(p, m) * (v - ref_.x.v(p, m)) + ref_.C(p, m) * (S - ref_.S(m)));
            }
        }
        return true;
    }

    void gradients(const Vec& x, std::vector<SparseRow>& rows) const
    {
        const int K = pr_.K, M = pr_.M;
        const double Tc = pr_.budget.T_c, sr = pr_.sigma_r2;
        for (auto& r : rows) r.clear();
        for (int k = 0; k < K; ++k) {
            auto& row = rows[iE_ + k];
            const double P = power_of(pr_, lay_, x, k);
            double dP = pr_.budget.T_s(k);
            for (int m = 0; m < M; ++m) {
                const double u = x(lay_.u(k, m));
                if (exact_ || lay_.fixed_P) {
                    row.add(lay_.u(k, m), Tc * pr_.X(k, m, P));
                    dP -= Tc * sr * u / (P * P);
                } else {
                    const double w = ref_.wE(k, m);
                    row.add(lay_.u(k, m), Tc * (pr_.chi(k, m) + sr * u / w));
                    dP -= Tc * sr * w / (P * P * P);
                }
            }
            if (!lay_.fixed_P) row.add(lay_.Pk(k), dP);
        }
        for (int p = 0; p < pr_.P(); ++p) {
            auto& row = rows[iD_ + p];
            row.add(lay_.ialpha, 1.0);
            for (int m = 0; m < M; ++m)
                if (lay_.act_index(p, m) >= 0) row.add(lay_.v(lay_.act_index(p, m)), -1.0);
        }
        for (int k = 0; k < K; ++k)
            for (int m = 0; m < M; ++m) {
                auto& row = rows[ratio_row(k, m)];
                const double u = x(lay_.u(k, m));
                const double c = x(lay_.c(k, m));
                if (u > 0.0) {
                    row.add(lay_.c(k, m), 2.0 * c / u);
                    row.add(lay_.u(k, m), -c * c / (u * u));
                }
                const int r = lay_.r[m];
                if (exact_) {
                    CVec a = span_coords(lay_, x, m);
                    CVec h = pr_.h_red[m].col(k);
                    cplx s = a.dot(h);  // f^H h
                    for (int i = 0; i < r; ++i) {
                        row.add(lay_.ar(m, i), -2.0 * (s.real() * h(i).real() + s.imag() * h(i).imag()));
                        row.add(lay_.ai(m, i), -2.0 * (s.real() * h(i).imag() - s.imag() * h(i).real()));
                    }
                } else {
                    const auto& w = ref_.w[m];
                    for (int i = 0; i < r; ++i) {
                        row.add(lay_.ar(m, i), -2.0 * w(i, k).real());
                        row.add(lay_.ai(m, i), -2.0 * w(i, k).imag());
                    }
                }
            }
        for (int a = 0; a < lay_.num_active(); ++a) {
            auto& row = rows[iZ_ + a];
            const int p = lay_.act_p[a], m = lay_.act_m[a];
            const double S = col_sum(x, m);
            const double v = x(lay_.v(a));
            const double dQdc = exact_ ? 2.0 * pr_.delta2(p, m) * S / v : ref_.C(p, m);
            for (int k = 0; k < K; ++k) {
                const double c = x(lay_.c(k, m));
                const double P = power_of(pr_, lay_, x, k);
                row.add(lay_.c(k, m), 2.0 * pr_.sigma2(m) * S + 2.0 * c * (pr_.sigma_s2(k) + sr / P) - dQdc);
                if (!lay_.fixed_P) row.add(lay_.Pk(k), -sr * c * c / (P * P));
            }
            for (int i = 0; i < lay_.r[m]; ++i) {
                row.add(lay_.ar(m, i), 2.0 * pr_.N0() * x(lay_.ar(m, i)));
                row.add(lay_.ai(m, i), 2.0 * pr_.N0() * x(lay_.ai(m, i)));
            }
            row.add(lay_.v(a), exact_ ? pr_.delta2(p, m) * S * S / (v * v) : -ref_.B(p, m));
        }
    }

    void add_hessian(const Vec& x, const Vec& wts, Mat& H) const
    {
        if (exact_) throw DomainError("constraint set: Hessian is only available for the surrogate");
        const int K = pr_.K, M = pr_.M;
        const double Tc = pr_.budget.T_c, sr = pr_.sigma_r2;
        if (!lay_.fixed_P)
            for (int k = 0; k < K; ++k) {
                const double wk = wts(iE_ + k);
                const double P = x(lay_.Pk(k));
                double hp = 0.0;
                for (int m = 0; m < M; ++m) {
                    const double w = ref_.wE(k, m);
                    hp += 3.0 * Tc * sr * w / (P * P * P * P);
                    H(lay_.u(k, m), lay_.u(k, m)) += wk * Tc * sr / w;
                }
                H(lay_.Pk(k), lay_.Pk(k)) += wk * hp;
            }
        for (int k = 0; k < K; ++k)
            for (int m = 0; m < M; ++m) {
                const double wk = wts(ratio_row(k, m));
                const double u = x(lay_.u(k, m));
                const double c = x(lay_.c(k, m));
                const int ic = lay_.c(k, m), iu = lay_.u(k, m);
                H(ic, ic) += wk * 2.0 / u;
                H(ic, iu) -= wk * 2.0 * c / (u * u);
                H(iu, ic) -= wk * 2.0 * c / (u * u);
                H(iu, iu) += wk * 2.0 * c * c / (u * u * u);
            }
        Vec W = Vec::Zero(M);
        for (int a = 0; a < lay_.num_active(); ++a) W(lay_.act_m[a]) += wts(iZ_ + a);
        for (int m = 0; m < M; ++m) {
            if (W(m) == 0.0) continue;
            for (int k = 0; k < K; ++k) {
                const double P = power_of(pr_, lay_, x, k);
                const double c = x(lay_.c(k, m));
                for (int j = 0; j < K; ++j) H(lay_.c(k, m), lay_.c(j, m)) += W(m) * 2.0 * pr_.sigma2(m);
                H(lay_.c(k, m), lay_.c(k, m)) += W(m) * 2.0 * (pr_.sigma_s2(k) + sr / P);
                if (!lay_.fixed_P) {
                    const double cross = -2.0 * sr * c / (P * P);
                    H(lay_.c(k, m), lay_.Pk(k)) += W(m) * cross;
                    H(lay_.Pk(k), lay_.c(k, m)) += W(m) * cross;
                    H(lay_.Pk(k), lay_.Pk(k)) += W(m) * 2.0 * sr * c * c / (P * P * P);
                }
            }
            for (int i = 0; i < lay_.r[m]; ++i) {
                H(lay_.ar(m, i), lay_.ar(m, i)) += W(m) * 2.0 * pr_.N0();
                H(lay_.ai(m, i), lay_.ai(m, i)) += W(m) * 2.0 * pr_.N0();
            }
        }
    }

    double scale(int i, const Vec& x) const
    {
        if (i < iD_) return pr_.budget.E(i - iE_);
        if (i < iR_) return std::max(1.0, std::abs(x(lay_.ialpha)));
        if (i < iZ_) {
            const int k = (i - iR_) / pr_.M, m = (i - iR_) % pr_.M;
            const double u = x(lay_.u(k, m)), c = x(lay_.c(k, m));
            return std::max({u > 0.0 ? c * c / u : 0.0, std::abs(ratio_R(x, k, m)), 1e-300});
        }
        const int a = i - iZ_;
        return std::max(z_value(x, lay_.act_m[a]), 1e-300);
    }

    /*! R (exact) or its linearization (surrogate) for device k, element m. */
    double ratio_R(const Vec& x, int k, int m) const
    {
        CVec a = span_coords(lay_, x, m);
        if (exact_) return std::norm(a.dot(pr_.h_red[m].col(k)));
        return 2.0 * a.dot(ref_.w[m].col(k)).real() - ref_.R(k, m);
    }

    double z_value(const Vec& x, int m) const
    {
        const double S = col_sum(x, m);
        double z = pr_.sigma2(m) * S * S;
        for (int k = 0; k < pr_.K; ++k) {
            const double c = x(lay_.c(k, m));
            z += c * c * (pr_.sigma_s2(k) + pr_.sigma_r2 / power_of(pr_, lay_, x, k));
        }
        for (int i = 0; i < lay_.r[m]; ++i)
            z += pr_.N0() * (x(lay_.ar(m, i)) * x(lay_.ar(m, i)) + x(lay_.ai(m, i)) * x(lay_.ai(m, i)));
        return z;
    }

    double col_sum(const Vec& x, int m) const
    {
        double s = 0.0;
        for (int k = 0; k < pr_.K; ++k) s += x(lay_.c(k, m));
        return s;
    }

    const Problem& problem() const { return pr_; }
    const TaylorReference& reference() const { return ref_; }
    bool exact() const { return exact_; }

private:
    const Problem& pr_;
    const TaylorReference& ref_;
    Layout lay_;
    bool exact_;
    Vec cost_;
    int iE_, iD_, iR_, iZ_, m_;
};

/*! Largest v allowed by the linearized gain constraint at x. */
inline double v_limit(const ConstraintSet& cs, const Vec& x, int a)
{
    const auto& lay = cs.layout();
    const auto& ref = cs.reference();
    const int p = lay.act_p[a], m = lay.act_m[a];
    const double Z = cs.z_value(x, m);
    const double S = cs.col_sum(x, m);
    return ref.x.v(p, m) + (ref.Q(p, m) + ref.C(p, m) * (S - ref.S(m)) - Z) / -ref.B(p, m);
}

/*! Strictly feasible surrogate point obtained by shrinking the reference slightly. */
inline Vec make_interior(const ConstraintSet& cs, double eps = 1e-3)
{
    const Problem& pr = cs.problem();
    const auto& lay = cs.layout();
    const auto& ref = cs.reference();
    for (int k = 0; k < pr.K; ++k)
        for (int m = 0; m < pr.M; ++m)
            if (!(ref.R(k, m) > 0.0)) throw InfeasibleError("make_interior: reference beamformer is orthogonal to a channel");
    for (int m = 0; m < pr.M; ++m)
        if (!(ref.S(m) > 0.0)) throw InfeasibleError("make_interior: reference has no transmit gain on an element");

    Vec g(cs.num_constraints());
    const double cmax = ref.x.c.maxCoeff();
    for (double e = eps; e <= 0.2; e *= 4.0) {
        for (int shrinkP = 0; shrinkP < 2; ++shrinkP) {
            Vec x = pack(pr, lay, ref.x);
            if (!lay.fixed_P && shrinkP)
                for (int k = 0; k < pr.K; ++k) x(lay.Pk(k)) *= 1.0 - e;
            for (int k = 0; k < pr.K; ++k)
                for (int m = 0; m < pr.M; ++m) {
                    double c = std::max((1.0 - e) * ref.x.c(k, m), 1e-9 * cmax);
                    x(lay.c(k, m)) = c;
                    x(lay.u(k, m)) = c * c / ref.R(k, m) * (1.0 + e);
                }
            bool ok = true;
            double vmin_sum = std::numeric_limits<double>::infinity();
            for (int a = 0; a < lay.num_active(); ++a) {
                double vmax = v_limit(cs, x, a);
                if (!(vmax > 0.0)) {
                    ok = false;
                    break;
                }
                x(lay.v(a)) = (1.0 - e) * vmax;
            }
            if (!ok) continue;
            for (int p = 0; p < pr.P(); ++p) {
                double s = 0.0;
                for (int m = 0; m < pr.M; ++m)
                    if (lay.act_index(p, m) >= 0) s += x(lay.v(lay.act_index(p, m)));
                vmin_sum = std::min(vmin_sum, s);
            }
            x(lay.ialpha) = vmin_sum - e * std::max(std::abs(vmin_sum), 1e-300);
            if (strictly_feasible(cs, x, g)) return x;
        }
    }
    throw InfeasibleError("make_interior: could not find a strictly feasible surrogate point near the reference");
}

} // namespace iscc
