#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>

#include "iscc/common.hpp"

namespace iscc {

/*! Sparse gradient of one constraint. */
struct SparseRow {
    std::vector<int> idx;
    std::vector<double> val;

    void clear()
    {
        idx.clear();
        val.clear();
    }
    void add(int i, double v)
    {
        idx.push_back(i);
        val.push_back(v);
    }
    double dot(const Vec& x) const
    {
        double s = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) s += val[j] * x(idx[j]);
        return s;
    }
    double max_abs() const
    {
        double s = 0.0;
        for (double v : val) s = std::max(s, std::abs(v));
        return s;
    }
};

/*
 * A smooth convex program  min cost'x  s.t.  g_i(x) <= 0,  x_j > 0 for j in positive().
 * The solver below only needs these members:
 *
 *   int dim() const;  int num_constraints() const;
 *   const Vec& cost() const;  const std::vector<int>& positive() const;
 *   bool values(const Vec& x, Vec& g) const;        // false outside the domain
 *   void gradients(const Vec& x, std::vector<SparseRow>& rows) const;
 *   void add_hessian(const Vec& x, const Vec& w, Mat& H) const;   // H += sum_i w_i Hess g_i
 *   double scale(int i, const Vec& x) const;        // magnitude used to report residual i
 */

struct BarrierOptions {
    double t0 = 1.0;
    double mu = 20.0;
    double gap_tol = 1e-9;
    double newton_tol = 1e-10;
    int max_newton = 2000;
    int max_centering = 100;
};

struct BarrierResult {
    Vec x;
    Vec y;  // constraint multipliers
    Vec z;  // positivity multipliers, full length (zero where unbounded)
    double t = 0.0;
    double gap = 0.0;
    int newton_iters = 0;
    bool converged = false;
};

struct KktResidual {
    double stationarity = 0.0;
    double feasibility = 0.0;
    double complementarity = 0.0;
    double total() const { return std::max({stationarity, feasibility, complementarity}); }
};

template <class Prob>
bool strictly_feasible(const Prob& pr, const Vec& x, Vec& g)
{
    for (int j : pr.positive())
        if (!(x(j) > 0.0)) return false;
    if (!pr.values(x, g)) return false;
    for (int i = 0; i < g.size(); ++i)
        if (!(g(i) < 0.0)) return false;
    return true;
}

/*! When z is null the positivity multipliers are taken as max(0, dL/dx_j), the best fit to stationarity. */
template <class Prob>
KktResidual kkt_residual(const Prob& pr, const Vec& x, const Vec& y, const Vec* zp = nullptr)
{
    const int n = pr.dim();
    const int m = pr.num_constraints();
    Vec g(m);
    std::vector<SparseRow> rows(m);
    KktResidual r;
    if (!pr.values(x, g)) {
        r.feasibility = std::numeric_limits<double>::infinity();
        return r;
    }
    pr.gradients(x, rows);
    Vec grad = pr.cost();
    double scale = std::max(1.0, pr.cost().template lpNorm<Eigen::Infinity>());
    for (int i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < rows[i].idx.size(); ++j) grad(rows[i].idx[j]) += y(i) * rows[i].val[j];
        scale = std::max(scale, y(i) * rows[i].max_abs());
    }
    Vec z = zp ? *zp : Vec::Zero(n);
    for (int j : pr.positive()) {
        if (!zp) z(j) = std::max(0.0, grad(j));
        grad(j) -= z(j);
        scale = std::max(scale, z(j));
    }
    r.stationarity = grad.template lpNorm<Eigen::Infinity>() / scale;
    const double obj = std::max(1.0, std::abs(pr.cost().dot(x)));
    for (int i = 0; i < m; ++i) {
        r.feasibility = std::max(r.feasibility, std::max(0.0, g(i)) / std::max(pr.scale(i, x), 1e-300));
        r.complementarity = std::max(r.complementarity, std::abs(y(i) * g(i)) / obj);
    }
    for (int j : pr.positive()) {
        r.feasibility = std::max(r.feasibility, std::max(0.0, -x(j)));
        r.complementarity = std::max(r.complementarity, std::abs(z(j) * x(j)) / obj);
    }
    return r;
}

/*! Nonnegative least-squares fit of (y, z) to stationarity and complementarity at x, by coordinate descent from y0. */
template <class Prob>
std::pair<Vec, Vec> refine_multipliers(const Prob& pr, const Vec& x, const Vec& y0, double weight = 1.0, int sweeps = 1000)
{
    const int n = pr.dim();
    const int m = pr.num_constraints();
    Vec g(m);
    std::vector<SparseRow> rows(m);
    pr.values(x, g);
    pr.gradients(x, rows);
    const double obj = std::max(1.0, std::abs(pr.cost().dot(x))) / weight;
    Vec y = y0.cwiseMax(0.0);
    Vec r = pr.cost();
    for (int i = 0; i < m; ++i)
        for (std::size_t j = 0; j < rows[i].idx.size(); ++j) r(rows[i].idx[j]) += y(i) * rows[i].val[j];
    Vec z = Vec::Zero(n);
    for (int j : pr.positive()) {
        z(j) = std::max(0.0, r(j));
        r(j) -= z(j);
    }
    Vec nrm(m);
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (double v : rows[i].val) s += v * v;
        nrm(i) = s;
    }
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double moved = 0.0;
        for (int i = 0; i < m; ++i) {
            const double w = g(i) / obj;
            const double den = nrm(i) + w * w;
            if (den <= 0.0) continue;
            double num = rows[i].dot(r) + w * w * y(i);
            const double yn = std::max(0.0, y(i) - num / den);
            const double d = yn - y(i);
            if (d == 0.0) continue;
            for (std::size_t j = 0; j < rows[i].idx.size(); ++j) r(rows[i].idx[j]) += d * rows[i].val[j];
            y(i) = yn;
            moved = std::max(moved, std::abs(d) * std::sqrt(nrm(i)));
        }
        for (int j : pr.positive()) {
            const double w = x(j) / obj;
            const double zn = std::max(0.0, (r(j) + z(j)) / (1.0 + w * w));
            const double d = zn - z(j);
            r(j) -= d;
            z(j) = zn;
            moved = std::max(moved, std::abs(d));
        }
        if (moved < 1e-14) break;
    }
    return {y, z};
}

/*! KKT residual with the best of the given duals and their least-squares refinements. */
template <class Prob>
KktResidual best_kkt_residual(const Prob& pr, const Vec& x, const Vec& y, const Vec* zp = nullptr)
{
    KktResidual a = kkt_residual(pr, x, y);
    if (zp) {
        KktResidual b = kkt_residual(pr, x, y, zp);
        if (b.total() < a.total()) a = b;
    }
    if (!std::isfinite(a.total()) || a.total() == 0.0) return a;
    for (double w : {1.0, 10.0, 100.0, 1000.0}) {
        auto [yr, zr] = refine_multipliers(pr, x, y, w);
        KktResidual b = kkt_residual(pr, x, yr, &zr);
        if (b.total() < a.total()) a = b;
    }
    return a;
}

/*! Log-barrier interior-point method with damped Newton centering; x0 must be strictly feasible. */
template <class Prob>
BarrierResult solve_barrier(const Prob& pr, const Vec& x0, const BarrierOptions& opt)
{
    const int n = pr.dim();
    const int m = pr.num_constraints();
    const auto& pos = pr.positive();
    const Vec& cost = pr.cost();

    BarrierResult res;
    res.x = x0;
    Vec g(m), g_try(m), grad(n), dx(n), x_try(n), w(m), dscale(n);
    Mat H(n, n);
    std::vector<SparseRow> rows(m);
    if (!strictly_feasible(pr, res.x, g)) throw InfeasibleError("barrier: starting point is not strictly feasible");

    auto psi = [&](const Vec& x, const Vec& gv, double t) {
        double s = t * cost.dot(x);
        for (int i = 0; i < m; ++i) s -= std::log(-gv(i));
        for (int j : pos) s -= std::log(x(j));
        return s;
    };

    double t = opt.t0;
    const double n_barrier = m + static_cast<double>(pos.size());
    Eigen::LLT<Mat> llt;
    while (true) {
        // centering
        for (int step = 0; step < opt.max_centering && res.newton_iters < opt.max_newton; ++step) {
            pr.values(res.x, g);
            pr.gradients(res.x, rows);
            grad = t * cost;
            H.setZero();
            for (int i = 0; i < m; ++i) {
                w(i) = -1.0 / g(i);
                const auto& r = rows[i];
                for (std::size_t a = 0; a < r.idx.size(); ++a) {
                    grad(r.idx[a]) += w(i) * r.val[a];
                    const double wa = w(i) * w(i) * r.val[a];
                    for (std::size_t b = 0; b < r.idx.size(); ++b) H(r.idx[a], r.idx[b]) += wa * r.val[b];
                }
            }
            pr.add_hessian(res.x, w, H);
            for (int j : pos) {
                grad(j) -= 1.0 / res.x(j);
                H(j, j) += 1.0 / (res.x(j) * res.x(j));
            }
            for (int j = 0; j < n; ++j) dscale(j) = H(j, j) > 0.0 ? 1.0 / std::sqrt(H(j, j)) : 1.0;
            H = dscale.asDiagonal() * H * dscale.asDiagonal();
            llt.compute(H);
            double reg = 1e-14;
            while (llt.info() != Eigen::Success && reg < 1.0) {
                Mat Hr = H;
                Hr.diagonal().array() += reg;
                llt.compute(Hr);
                reg *= 100.0;
            }
            dx = -(dscale.asDiagonal() * llt.solve(dscale.asDiagonal() * grad));
            const double lam2 = -grad.dot(dx);
            ++res.newton_iters;
            if (!(lam2 > 2.0 * opt.newton_tol)) break;

            double s = 1.0;
            for (int j : pos)
                if (dx(j) < 0.0) s = std::min(s, -0.99 * res.x(j) / dx(j));
            const double f0 = psi(res.x, g, t);
            const double slope = grad.dot(dx);
            bool moved = false;
            while (s > 1e-14) {
                x_try = res.x + s * dx;
                if (strictly_feasible(pr, x_try, g_try) &&
                    (lam2 < 1e-2 || psi(x_try, g_try, t) <= f0 + 0.25 * s * slope)) {
                    moved = true;
                    break;
                }
                s *= 0.5;
            }
            if (!moved) break;
            res.x = x_try;
        }
        res.gap = n_barrier / t;
        if (res.gap <= opt.gap_tol) {
            res.converged = true;
            break;
        }
        if (res.newton_iters >= opt.max_newton) break;
        t *= opt.mu;
    }
    res.t = t;
    pr.values(res.x, g);
    res.y.resize(m);
    for (int i = 0; i < m; ++i) res.y(i) = 1.0 / (t * -g(i));
    res.z = Vec::Zero(n);
    for (int j : pos) res.z(j) = 1.0 / (t * res.x(j));
    return res;
}

} // namespace iscc
