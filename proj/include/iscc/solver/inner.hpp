#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "iscc/solver/surrogate.hpp"

namespace iscc {

struct InnerOptions {
    double tol = 1e-5;
    int max_iters = 5000;
    int plateau = 200;
    double eta0 = 1e-2;
    bool try_dual_ascent = true;
    double interior_eps = 1e-3;
    double gap_rel = 1e-8;
};

enum class InnerStatus { Converged, Diverged };

struct InnerResult {
    DesignVariables x;
    Vec xv;             // layout vector
    Vec y, z;           // constraint and positivity multipliers
    Multipliers mult;
    KktResidual kkt;
    int iterations = 0;
    std::string path;   // "dual-ascent" or "barrier"
    InnerStatus status = InnerStatus::Diverged;
};

inline Multipliers split_multipliers(const ConstraintSet& cs, const Vec& y, const Vec& z)
{
    const Problem& pr = cs.problem();
    const auto& lay = cs.layout();
    Multipliers out{Vec(pr.K), Vec(pr.P()), Mat(pr.K, pr.M), Mat::Zero(pr.P(), pr.M), z};
    for (int k = 0; k < pr.K; ++k) out.beta(k) = y(cs.energy_row(k));
    for (int p = 0; p < pr.P(); ++p) out.gamma(p) = y(cs.pair_row(p));
    for (int k = 0; k < pr.K; ++k)
        for (int m = 0; m < pr.M; ++m) out.theta(k, m) = y(cs.ratio_row(k, m));
    for (int a = 0; a < lay.num_active(); ++a) out.lambda(lay.act_p[a], lay.act_m[a]) = y(cs.gain_row(a));
    return out;
}

namespace detail {

/*! Positive root of a x^3 + b x^2 - q x - d = 0 with a > 0 and b, q, d >= 0. */
inline double positive_cubic_root(double a, double b, double q, double d)
{
    auto f = [&](double x) { return ((a * x + b) * x - q) * x - d; };
    double hi = std::sqrt(q / a) + std::cbrt(d / a) + 1e-300;
    while (f(hi) < 0.0) hi *= 2.0;
    double lo = 0.0;
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/*! Positivity multipliers that best explain the Lagrangian gradient, for a KKT check. */
inline Vec implied_bound_multipliers(const ConstraintSet& cs, const Vec& x, const Vec& y)
{
    std::vector<SparseRow> rows(cs.num_constraints());
    cs.gradients(x, rows);
    Vec grad = cs.cost();
    for (int i = 0; i < cs.num_constraints(); ++i)
        for (std::size_t j = 0; j < rows[i].idx.size(); ++j) grad(rows[i].idx[j]) += y(i) * rows[i].val[j];
    Vec z = Vec::Zero(cs.dim());
    for (int j : cs.positive()) z(j) = std::max(0.0, grad(j));
    return z;
}

/*! Closed-form primal minimization of the Lagrangian in P_s, f, c, u, followed by gradient steps in v, alpha. */
inline void lagrangian_primal_step(const ConstraintSet& cs, const Vec& y, double step, Vec& x)
{
    const Problem& pr = cs.problem();
    const auto& lay = cs.layout();
    const auto& ref = cs.reference();
    const double Tc = pr.budget.T_c, sr = pr.sigma_r2, N0 = pr.N0();
    Vec Lam = Vec::Zero(pr.M);
    for (int a = 0; a < lay.num_active(); ++a) Lam(lay.act_m[a]) += y(cs.gain_row(a));

    if (!lay.fixed_P)
        for (int k = 0; k < pr.K; ++k) {
            const double beta = y(cs.energy_row(k));
            double q = 0.0, d = 0.0;
            for (int m = 0; m < pr.M; ++m) {
                q += sr * Lam(m) * x(lay.c(k, m)) * x(lay.c(k, m));
                d += beta * Tc * sr * ref.wE(k, m);
            }
            const double Pmax = pr.max_sensing_power(k);
            double P = beta > 0.0 ? positive_cubic_root(beta * pr.budget.T_s(k), 0.0, q, d) : Pmax;
            x(lay.Pk(k)) = std::clamp(P, 1e-9 * Pmax, Pmax);
        }

    if (N0 > 0.0)
        for (int m = 0; m < pr.M; ++m) {
            if (!(Lam(m) > 0.0)) continue;
            CVec a = CVec::Zero(lay.r[m]);
            for (int k = 0; k < pr.K; ++k) a += y(cs.ratio_row(k, m)) * ref.w[m].col(k);
            a /= N0 * Lam(m);
            for (int i = 0; i < lay.r[m]; ++i) {
                x(lay.ar(m, i)) = a(i).real();
                x(lay.ai(m, i)) = a(i).imag();
            }
        }

    for (int m = 0; m < pr.M; ++m) {
        double half_C = 0.0;
        for (int a = 0; a < lay.num_active(); ++a)
            if (lay.act_m[a] == m) half_C += 0.5 * y(cs.gain_row(a)) * ref.C(lay.act_p[a], m);
        for (int k = 0; k < pr.K; ++k) {
            const double P = power_of(pr, lay, x, k);
            const double theta = y(cs.ratio_row(k, m));
            const double u = x(lay.u(k, m));
            const double S_other = cs.col_sum(x, m) - x(lay.c(k, m));
            const double den = theta / u + Lam(m) * (pr.sigma2(m) + pr.sigma_s2(k) + sr / P);
            if (den > 0.0) x(lay.c(k, m)) = std::max(0.0, (half_C - Lam(m) * pr.sigma2(m) * S_other) / den);
        }
    }

    for (int k = 0; k < pr.K; ++k) {
        const double beta = y(cs.energy_row(k));
        const double P = power_of(pr, lay, x, k);
        for (int m = 0; m < pr.M; ++m) {
            const double c = x(lay.c(k, m));
            const double theta = y(cs.ratio_row(k, m));
            double u;
            if (beta > 0.0 && theta > 0.0) {
                if (lay.fixed_P)
                    u = c * std::sqrt(theta / (beta * Tc * pr.X(k, m, P)));
                else
                    u = positive_cubic_root(beta * Tc * sr / ref.wE(k, m), beta * Tc * pr.chi(k, m), 0.0, theta * c * c);
            } else {
                u = c * c / std::max(cs.ratio_R(x, k, m), 1e-300);
            }
            x(lay.u(k, m)) = std::max(u, 1e-300);
        }
    }

    double sum_gamma = 0.0;
    for (int p = 0; p < pr.P(); ++p) sum_gamma += y(cs.pair_row(p));
    for (int a = 0; a < lay.num_active(); ++a) {
        const int p = lay.act_p[a], m = lay.act_m[a];
        const double grad = -y(cs.pair_row(p)) - y(cs.gain_row(a)) * ref.B(p, m);
        const double vt = ref.x.v(p, m);
        x(lay.v(a)) = std::max(1e-3 * x(lay.v(a)), x(lay.v(a)) - step * vt * grad / (std::abs(grad) + 1e-300));
    }
    const double ascale = std::max(std::abs(ref.x.alpha), 1e-12);
    x(lay.ialpha) -= step * ascale * (sum_gamma - 1.0);
}

/*! Tighten u to the ratio limit, v to the gain limit and alpha to the weakest pair. */
inline void repair(const ConstraintSet& cs, Vec& x)
{
    const Problem& pr = cs.problem();
    const auto& lay = cs.layout();
    for (int k = 0; k < pr.K; ++k)
        for (int m = 0; m < pr.M; ++m) {
            const double c = x(lay.c(k, m));
            const double R = cs.ratio_R(x, k, m);
            if (R > 0.0) x(lay.u(k, m)) = std::max(x(lay.u(k, m)), c * c / R * (1.0 + 1e-12));
        }
    for (int a = 0; a < lay.num_active(); ++a)
        x(lay.v(a)) = std::min(x(lay.v(a)), (1.0 - 1e-12) * v_limit(cs, x, a));
    double vmin = std::numeric_limits<double>::infinity();
    for (int p = 0; p < pr.P(); ++p) {
        double s = 0.0;
        for (int m = 0; m < pr.M; ++m)
            if (lay.act_index(p, m) >= 0) s += x(lay.v(lay.act_index(p, m)));
        vmin = std::min(vmin, s);
    }
    x(lay.ialpha) = std::min(x(lay.ialpha), vmin - 1e-12 * std::abs(vmin));
}

} // namespace detail

/*!
 * Primal-dual Lagrangian method on the surrogate: closed-form primal updates
 * and projected multiplier ascent with diminishing steps.  Returns nothing if
 * the KKT residual stops improving before reaching tol.
 */
inline std::optional<InnerResult> dual_ascent(const ConstraintSet& cs, const InnerOptions& opt, const Vec& y0,
                                              int* used = nullptr)
{
    const int m = cs.num_constraints();
    Vec x = make_interior(cs, opt.interior_eps);
    Vec y = y0;
    Vec g(m), xr;
    double best = std::numeric_limits<double>::infinity();
    int best_at = 0;
    double eta0 = opt.eta0;
    double last_L = 0.0, last_dL = 0.0;
    int flips = 0;
    for (int it = 0; it < opt.max_iters; ++it) {
        if (used) *used = it + 1;
        const double eta = eta0 / std::sqrt(it + 1.0);
        detail::lagrangian_primal_step(cs, y, eta, x);
        if (!cs.values(x, g)) return std::nullopt;
        double L = cs.cost().dot(x);
        double ybar = std::max(y.cwiseAbs().mean(), 1e-12);
        for (int i = 0; i < m; ++i) {
            L += y(i) * g(i);
            y(i) = std::max(0.0, y(i) + eta * std::max(y(i), ybar) * g(i) / std::max(cs.scale(i, x), 1e-300));
        }
        const double dL = L - last_L;
        if (it > 1 && dL * last_dL < 0.0 && ++flips >= 2) {
            eta0 *= 0.5;
            flips = 0;
        }
        last_L = L;
        last_dL = dL;

        if (it % 10 != 0) continue;
        xr = x;
        detail::repair(cs, xr);
        if (!strictly_feasible(cs, xr, g)) {
            if (it - best_at > opt.plateau) return std::nullopt;
            continue;
        }
        Vec z = detail::implied_bound_multipliers(cs, xr, y);
        KktResidual r = kkt_residual(cs, xr, y, &z);
        if (r.total() < best * (1.0 - 1e-3)) {
            best = r.total();
            best_at = it;
        }
        if (r.total() <= opt.tol) {
            InnerResult out;
            out.xv = xr;
            out.x = unpack(cs.problem(), cs.layout(), xr);
            out.y = y;
            out.z = z;
            out.mult = split_multipliers(cs, y, z);
            out.kkt = r;
            out.iterations = it + 1;
            out.path = "dual-ascent";
            out.status = InnerStatus::Converged;
            return out;
        }
        if (it - best_at > opt.plateau) return std::nullopt;
    }
    return std::nullopt;
}

inline InnerResult barrier_inner(const ConstraintSet& cs, const InnerOptions& opt)
{
    Vec x0 = make_interior(cs, opt.interior_eps);
    const double scale = std::max(std::abs(cs.reference().x.alpha), 1e-12);
    const double nb = cs.num_constraints() + static_cast<double>(cs.positive().size());
    BarrierOptions bo;
    bo.t0 = nb / scale;
    bo.gap_tol = opt.gap_rel * scale * nb;
    bo.max_newton = opt.max_iters;
    BarrierResult br = solve_barrier(cs, x0, bo);
    int newton = br.newton_iters;
    for (int retry = 0; retry < 3 && best_kkt_residual(cs, br.x, br.y, &br.z).total() > opt.tol && newton < opt.max_iters; ++retry) {
        bo.t0 = br.t * bo.mu;
        bo.gap_tol *= 0.01;
        bo.max_newton = opt.max_iters - newton;
        br = solve_barrier(cs, br.x, bo);
        newton += br.newton_iters;
    }
    br.newton_iters = newton;
    InnerResult out;
    out.xv = br.x;
    out.x = unpack(cs.problem(), cs.layout(), br.x);
    out.y = br.y;
    out.z = br.z;
    out.mult = split_multipliers(cs, br.y, br.z);
    out.kkt = best_kkt_residual(cs, br.x, br.y, &br.z);
    out.iterations = br.newton_iters;
    out.path = "barrier";
    out.status = (br.converged && out.kkt.total() <= opt.tol) ? InnerStatus::Converged : InnerStatus::Diverged;
    return out;
}

/*! Solves the surrogate: dual ascent first, interior-point fallback when it plateaus. */
inline InnerResult solve_inner(const ConstraintSet& cs, const InnerOptions& opt, const Vec* warm_y = nullptr)
{
    int spent = 0;
    if (opt.try_dual_ascent) {
        Vec y0 = (warm_y && warm_y->size() == cs.num_constraints()) ? *warm_y : Vec::Constant(cs.num_constraints(), 1.0);
        if (auto r = dual_ascent(cs, opt, y0, &spent)) return *r;
    }
    InnerResult r = barrier_inner(cs, opt);
    r.iterations += spent;
    return r;
}

} // namespace iscc
