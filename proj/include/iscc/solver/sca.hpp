#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "iscc/solver/inner.hpp"

namespace iscc {

struct ScaOptions {
    double outer_tol = 1e-4;
    int max_outer = 100;
    InnerOptions inner;
};

struct TraceEntry {
    int iter = 0;
    double alpha = 0.0;          // alpha variable
    double min_dg = 0.0;         // achieved minimum pair gain
    double max_residual = 0.0;   // largest scaled constraint residual (<= 0 is feasible)
    int inner_iters = 0;
    std::string inner_path;
    double kkt_inner = 0.0;
    double kkt = 0.0;            // KKT residual of the exact problem
    double sum_gamma = 0.0;
};

struct SolveTrace {
    std::vector<TraceEntry> entries;
    std::string status;
    std::string energy_model = "exact second moment, majorized bilinear term";

    void write_csv(std::ostream& os) const
    {
        os << "iter,alpha,min_dg,max_residual,inner_iters,inner_path,kkt_inner,kkt,sum_gamma\n";
        os.precision(12);
        for (const auto& e : entries)
            os << e.iter << ',' << e.alpha << ',' << e.min_dg << ',' << e.max_residual << ',' << e.inner_iters << ','
               << e.inner_path << ',' << e.kkt_inner << ',' << e.kkt << ',' << e.sum_gamma << '\n';
    }
};

struct ScaResult {
    DesignVariables x;
    Multipliers mult;
    SolveTrace trace;
    std::string status;  // converged | max-outer | stalled | degenerate
    int outer_iters = 0;
    double kkt = std::numeric_limits<double>::infinity();
};

/*! Rescales each (c_m, f_m) so that |f_m| = 1; feasibility and gains are unchanged. */
inline DesignVariables normalize_gauge(const DesignVariables& x)
{
    DesignVariables y = x;
    for (int m = 0; m < y.f.cols(); ++m) {
        double s = y.f.col(m).norm();
        if (s > 0.0) {
            y.f.col(m) /= s;
            y.c.col(m) /= s;
        }
    }
    return y;
}

/*! Projects each f_m onto the span of its channels; all R stay, the noise term shrinks. */
inline DesignVariables project_to_span(const Problem& pr, const DesignVariables& x)
{
    DesignVariables y = x;
    for (int m = 0; m < pr.M; ++m) y.f.col(m) = pr.basis[m] * (pr.basis[m].adjoint() * x.f.col(m));
    return y;
}

inline double weakest_pair_sum(const Problem& pr, const Mat& v)
{
    double best = std::numeric_limits<double>::infinity();
    for (int p = 0; p < pr.P(); ++p) {
        double s = 0.0;
        for (int m = 0; m < pr.M; ++m)
            if (pr.active(p, m)) s += v(p, m);
        best = std::min(best, s);
    }
    return best;
}

/*!
 * Sets u = c^2 / R.  Energy can only drop, alpha and v are untouched, so the
 * point stays feasible; at an optimum this equality holds anyway.
 */
inline DesignVariables tighten_ratio(const Problem& pr, const DesignVariables& x)
{
    DesignVariables y = x;
    for (int k = 0; k < pr.K; ++k)
        for (int m = 0; m < pr.M; ++m) {
            double R = eval_R(pr, x.f.col(m), k, m);
            if (R > 0.0) y.u(k, m) = std::min(x.u(k, m), x.c(k, m) * x.c(k, m) / R);
        }
    return y;
}

/*! Fills u, v, alpha from (P_s, c, f) with every ratio and gain constraint tight. */
inline void complete_from_design(const Problem& pr, DesignVariables& x)
{
    x.u.resize(pr.K, pr.M);
    for (int k = 0; k < pr.K; ++k)
        for (int m = 0; m < pr.M; ++m) {
            double c = x.c(k, m);
            x.u(k, m) = c == 0.0 ? 0.0 : c * c / eval_R(pr, x.f.col(m), k, m);
        }
    Mat G = achieved_gains(pr, x);
    x.v = Mat::Zero(pr.P(), pr.M);
    for (int p = 0; p < pr.P(); ++p)
        for (int m = 0; m < pr.M; ++m)
            if (pr.active(p, m)) x.v(p, m) = G(p, m);
    x.alpha = weakest_pair_sum(pr, x.v);
}

inline Vec sensing_powers(const Problem& pr, double fraction)
{
    if (pr.fixed_Ps) return *pr.fixed_Ps;
    Vec P(pr.K);
    for (int k = 0; k < pr.K; ++k) P(k) = fraction * pr.max_sensing_power(k);
    return P;
}

/*! Unit-norm dominant eigenvector of sum_k h h^H for each element. */
inline CMat dominant_beamformers(const Problem& pr)
{
    CMat f(pr.N_r, pr.M);
    for (int m = 0; m < pr.M; ++m) {
        CMat A = CMat::Zero(pr.N_r, pr.N_r);
        for (int k = 0; k < pr.K; ++k) A += pr.channel.col(k, m) * pr.channel.col(k, m).adjoint();
        Eigen::SelfAdjointEigenSolver<CMat> es(A);
        f.col(m) = es.eigenvectors().col(pr.N_r - 1).normalized();
    }
    return f;
}

/*! Largest uniform-over-elements c per device that spends comm_energy on transmission. */
inline Mat uniform_gains(const Problem& pr, const Vec& P_s, const CMat& f, const Vec& comm_energy)
{
    Mat c(pr.K, pr.M);
    for (int k = 0; k < pr.K; ++k) {
        double cost = 0.0;
        for (int m = 0; m < pr.M; ++m) cost += pr.X(k, m, P_s(k)) / eval_R(pr, f.col(m), k, m);
        c.row(k).setConstant(std::sqrt(std::max(comm_energy(k), 0.0) / (pr.budget.T_c * cost)));
    }
    return c;
}

/*!
 * Feasible starting point: half of each device's surplus energy to sensing,
 * dominant-eigenvector beamformers, uniform c leaving 10% of the surplus
 * unspent, and u, v, alpha at equality.
 */
inline DesignVariables init_feasible(const Problem& pr, Rng& rng, double sensing_fraction = 0.5, double slack = 0.1)
{
    for (int k = 0; k < pr.K; ++k)
        if (!(pr.budget.E(k) > pr.budget.E_p(k) * (1.0 + 1e-12)))
            throw InfeasibleError("init_feasible: device " + std::to_string(k) + " has no energy beyond computation");
    DesignVariables x;
    x.P_s = sensing_powers(pr, sensing_fraction);
    x.f = dominant_beamformers(pr);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int attempt = 0; attempt < 50; ++attempt) {
        double rmax = 0.0, rmin = std::numeric_limits<double>::infinity();
        for (int m = 0; m < pr.M; ++m)
            for (int k = 0; k < pr.K; ++k) {
                double R = eval_R(pr, x.f.col(m), k, m) / pr.channel.col(k, m).squaredNorm();
                rmax = std::max(rmax, R);
                rmin = std::min(rmin, R);
            }
        if (rmin > 1e-6) break;
        for (int m = 0; m < pr.M; ++m) {
            for (int i = 0; i < pr.N_r; ++i) x.f(i, m) += 0.1 * cplx(n01(rng), n01(rng)) / std::sqrt(2.0 * pr.N_r);
            x.f.col(m).normalize();
        }
    }
    x.f = project_to_span(pr, x).f;
    for (int m = 0; m < pr.M; ++m) x.f.col(m).normalize();
    Vec comm(pr.K);
    for (int k = 0; k < pr.K; ++k) {
        double surplus = pr.budget.E(k) - pr.budget.E_p(k);
        double left = surplus - x.P_s(k) * pr.budget.T_s(k);
        if (!(left > 0.0)) throw InfeasibleError("init_feasible: fixed sensing power exhausts device " + std::to_string(k));
        comm(k) = left > 2.0 * slack * surplus ? left - slack * surplus : (1.0 - slack) * left;
    }
    x.c = uniform_gains(pr, x.P_s, x.f, comm);
    complete_from_design(pr, x);
    return x;
}

/*! Successive convex approximation: surrogate solve, reference update, repeat. */
inline ScaResult sca_solve(const Problem& pr, const DesignVariables& init, const ScaOptions& opt = {})
{
    FeasibilityReport fr = feasibility_check(init, pr);
    if (fr.max_violation() > 1e-9)
        throw InfeasibleError("sca_solve: initial point violates the " + fr.worst_family() + " constraints");

    ScaResult res;
    DesignVariables x = normalize_gauge(project_to_span(pr, init));
    auto record = [&](int it, const DesignVariables& d, int inner_iters, const std::string& path, double kin, double kkt,
                      double sg) {
        FeasibilityReport f = feasibility_check(d, pr);
        res.trace.entries.push_back({it, d.alpha, achieved_min_gain(pr, d).alpha, f.max_violation(), inner_iters, path,
                                     kin, kkt, sg});
    };
    record(0, x, 0, "init", 0.0, std::numeric_limits<double>::infinity(), 0.0);

    const Layout lay(pr);
    for (int p = 0; p < pr.P(); ++p) {
        bool any = false;
        for (int m = 0; m < pr.M; ++m) any = any || pr.active(p, m);
        if (!any) {
            res.x = x;
            res.status = res.trace.status = "degenerate";
            res.kkt = 0.0;
            return res;
        }
    }

    Vec warm;
    res.status = "max-outer";
    for (int it = 1; it <= opt.max_outer; ++it) {
        TaylorReference ref = TaylorReference::build(pr, x);
        ConstraintSet cs(pr, ref);
        InnerResult in;
        try {
            in = solve_inner(cs, opt.inner, warm.size() ? &warm : nullptr);
        } catch (const InfeasibleError&) {
            res.status = "stalled";
            break;
        }
        ConstraintSet exact(pr, ref, true);
        KktResidual k4 = best_kkt_residual(exact, in.xv, in.y);
        DesignVariables next = tighten_ratio(pr, in.x);
        FeasibilityReport f = feasibility_check(next, pr);
        const double tol_a = 1e-8 * std::max(1.0, std::abs(x.alpha));
        if (next.alpha < x.alpha - tol_a || f.max_violation() > 1e-6) {
            res.status = "stalled";
            break;
        }
        const double prev = x.alpha;
        x = normalize_gauge(next);
        warm = in.y;
        res.mult = in.mult;
        res.kkt = k4.total();
        res.outer_iters = it;
        record(it, x, in.iterations, in.path, in.kkt.total(), k4.total(), in.mult.gamma.sum());
        if (std::abs(x.alpha - prev) <= opt.outer_tol * std::max(std::abs(prev), 1e-300) && k4.total() <= 10.0 * opt.outer_tol) {
            res.status = "converged";
            break;
        }
    }
    res.x = x;
    res.trace.status = res.status;
    return res;
}

} // namespace iscc
