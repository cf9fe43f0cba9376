#pragma once

#include <aggrisk/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace aggrisk {

struct SolverConfig {
    double tol = 1e-10;  // target gap between best value and certified lower bound, relative to 1 + |f|
    std::size_t max_iter = 200000;
};

struct SolveResult {
    Eigen::VectorXd x;
    double objective = INFINITY;
    double lower_bound = -INFINITY;
    std::size_t iterations = 0;
    double residual = INFINITY;  // objective - lower_bound at exit
    bool converged = false;
};

/// Linear inequalities G x <= h.
struct Polyhedron {
    Eigen::MatrixXd G;
    Eigen::VectorXd h;

    Eigen::Index rows() const { return G.rows(); }
};

/// Convex objective: value at x, writes one subgradient into g.
using ConvexObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& g)>;

/// Deep-cut ellipsoid method over {G x <= h} starting from the ellipsoid
/// {x : (x - c)^T P^{-1} (x - c) <= 1}, which must contain the feasible set.
inline SolveResult ellipsoid_minimize(const ConvexObjective& f, const Polyhedron& poly, Eigen::VectorXd c, Eigen::MatrixXd P,
                                      const SolverConfig& cfg = {}) {
    const Eigen::Index n = c.size();
    SolveResult res;
    res.x = c;
    Eigen::VectorXd g(n), a(n);

    if (n == 0) {
        Eigen::VectorXd g0(0);
        for (Eigen::Index r = 0; r < poly.rows(); ++r)
            if (poly.h[r] < -1e-12 * (1.0 + std::abs(poly.h[r]))) throw InfeasibleError("empty feasible set: constraint " + std::to_string(r));
        res.objective = res.lower_bound = f(c, g0);
        res.residual = 0.0;
        res.converged = true;
        return res;
    }

    bool any_feasible = false;
    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        res.iterations = it + 1;
        // most violated constraint, scaled by its width in the current ellipsoid
        double worst = 0.0;
        Eigen::Index wr = -1;
        for (Eigen::Index r = 0; r < poly.rows(); ++r) {
            double v = poly.G.row(r).dot(c) - poly.h[r];
            if (v > 1e-13 * (1.0 + std::abs(poly.h[r]))) {
                double width = std::sqrt(std::max(poly.G.row(r).dot(P * poly.G.row(r).transpose()), 0.0));
                double s = width > 0.0 ? v / width : INFINITY;
                if (s > worst) worst = s, wr = r;
            }
        }

        double depth;
        if (wr >= 0) {
            a = poly.G.row(wr).transpose();
            depth = poly.G.row(wr).dot(c) - poly.h[wr];
        } else {
            any_feasible = true;
            double fx = f(c, g);
            if (!std::isfinite(fx)) throw NumericError("objective not finite at a feasible point");
            if (fx < res.objective) {
                res.objective = fx;
                res.x = c;
            }
            double width = std::sqrt(std::max(g.dot(P * g), 0.0));
            res.lower_bound = std::max(res.lower_bound, fx - width);
            res.residual = res.objective - res.lower_bound;
            if (res.residual <= cfg.tol * (1.0 + std::abs(res.objective))) {
                res.converged = true;
                return res;
            }
            if (width == 0.0) {
                res.lower_bound = res.objective;
                res.residual = 0.0;
                res.converged = true;
                return res;
            }
            a = g;
            depth = fx - res.objective;
        }

        Eigen::VectorXd Pa = P * a;
        double aPa = a.dot(Pa);
        if (!(aPa > 0.0)) break;
        double root = std::sqrt(aPa);
        double alpha = depth / root;
        if (alpha >= 1.0) {
            if (!any_feasible) throw InfeasibleError("empty feasible set: constraint " + std::to_string(wr) + " cuts off the whole region");
            break;
        }
        if (n == 1) {
            // interval update: keep [c - r, c + r] intersected with the half-line a (x - c) <= -depth
            double r = std::sqrt(P(0, 0));
            double lo = c[0] - r, hi = c[0] + r;
            double bound = c[0] - depth / a[0];
            if (a[0] > 0.0)
                hi = std::min(hi, bound);
            else
                lo = std::max(lo, bound);
            c[0] = 0.5 * (lo + hi);
            P(0, 0) = 0.25 * (hi - lo) * (hi - lo);
            if (!(hi > lo)) P(0, 0) = 0.0;
            continue;
        }
        double dn = double(n);
        Eigen::VectorXd b = Pa / root;
        c -= (1.0 + dn * alpha) / (dn + 1.0) * b;
        P = (dn * dn * (1.0 - alpha * alpha) / (dn * dn - 1.0)) * (P - (2.0 * (1.0 + dn * alpha) / ((dn + 1.0) * (1.0 + alpha))) * (b * b.transpose()));
        P = 0.5 * (P + P.transpose());
    }
    if (!any_feasible) throw InfeasibleError("no feasible point found");
    res.residual = res.objective - res.lower_bound;
    res.converged = res.residual <= cfg.tol * (1.0 + std::abs(res.objective));
    return res;
}

/// Objective on the simplex: value at w, subgradient in w-coordinates.
using SimplexObjective = ConvexObjective;

/// Minimizes over the probability simplex in R^d intersected with {A w <= b}.
/// The last coordinate is eliminated, w = (z, 1 - sum z).
inline SolveResult minimize_on_simplex(const SimplexObjective& f, Eigen::Index d, const Eigen::MatrixXd& A = {},
                                       const Eigen::VectorXd& b = {}, const SolverConfig& cfg = {}) {
    require(d >= 1, "simplex dimension must be >= 1");
    require(A.rows() == b.size() && (A.rows() == 0 || A.cols() == d), "simplex constraints: dimension mismatch");
    const Eigen::Index n = d - 1;
    auto lift = [d, n](const Eigen::VectorXd& z) {
        Eigen::VectorXd w(d);
        w.head(n) = z;
        w[n] = 1.0 - z.sum();
        return w;
    };
    Polyhedron poly;
    poly.G = Eigen::MatrixXd::Zero(n + 1 + A.rows(), n);
    poly.h = Eigen::VectorXd::Zero(n + 1 + A.rows());
    for (Eigen::Index i = 0; i < n; ++i) poly.G(i, i) = -1.0;
    poly.G.row(n).setOnes();
    poly.h[n] = 1.0;
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        for (Eigen::Index i = 0; i < n; ++i) poly.G(n + 1 + r, i) = A(r, i) - A(r, n);
        poly.h[n + 1 + r] = b[r] - A(r, n);
    }
    if (n == 0) poly.G.resize(poly.h.size(), 0);

    ConvexObjective fz = [&](const Eigen::VectorXd& z, Eigen::VectorXd& gz) {
        Eigen::VectorXd gw(d);
        double v = f(lift(z), gw);
        gz = gw.head(n).array() - gw[n];
        return v;
    };
    Eigen::VectorXd c = Eigen::VectorXd::Constant(n, 1.0 / double(d));
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
    auto r = ellipsoid_minimize(fz, poly, c, P, cfg);
    r.x = lift(r.x);
    r.x = r.x.cwiseMax(0.0);
    r.x /= r.x.sum();
    return r;
}

/// Minimizes over the box lo <= x <= hi.
inline SolveResult minimize_on_box(const ConvexObjective& f, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                   const SolverConfig& cfg = {}) {
    const Eigen::Index n = lo.size();
    require(hi.size() == n, "box: dimension mismatch");
    require((hi - lo).minCoeff() >= 0.0, "box: lower bound above upper bound");
    Polyhedron poly;
    poly.G = Eigen::MatrixXd::Zero(2 * n, n);
    poly.h.resize(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        poly.G(i, i) = 1.0;
        poly.h[i] = hi[i];
        poly.G(n + i, i) = -1.0;
        poly.h[n + i] = -lo[i];
    }
    Eigen::VectorXd c = 0.5 * (lo + hi);
    Eigen::VectorXd half = (0.5 * (hi - lo)).cwiseMax(1e-12);
    Eigen::MatrixXd P = (double(n) * half.array().square()).matrix().asDiagonal();
    return ellipsoid_minimize(f, poly, c, P, cfg);
}

} // namespace aggrisk
