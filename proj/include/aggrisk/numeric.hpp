#pragma once

#include <aggrisk/errors.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <limits>
#include <utility>

namespace aggrisk::numeric {

inline constexpr double kQuadTol = 1e-13;

inline boost::math::quadrature::tanh_sinh<double>& tanh_sinh_rule() {
    static boost::math::quadrature::tanh_sinh<double> rule(15);
    return rule;
}

/// Integrates f(s, tail) over levels s in [a, b] subset of [0, 1], where
/// tail = 1 - s is supplied without cancellation near s = 1.
template <class F>
double integrate_levels(F&& f, double a, double b, double tol = kQuadTol) {
    if (!(b > a)) return 0.0;
    const double one_minus_b = 1.0 - b;
    auto g = [&](double s, double sc) {
        double tail = (sc > 0.0) ? one_minus_b + sc : 1.0 - s;
        return f(s, tail);
    };
    return tanh_sinh_rule().integrate(g, a, b, tol);
}

/// Same as integrate_levels but parametrised by the tail t = 1 - s over [ta, tb].
/// Integrand receives (s, t).
template <class F>
double integrate_tail(F&& f, double ta, double tb, double tol = kQuadTol) {
    if (!(tb > ta)) return 0.0;
    auto g = [&](double t, double tc) {
        double tt = (tc < 0.0) ? ta - tc : t;
        return f(1.0 - tt, tt);
    };
    return tanh_sinh_rule().integrate(g, ta, tb, tol);
}

template <class F>
double integrate_smooth(F&& f, double a, double b, double tol = kQuadTol) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol);
}

/// Largest x in [lo, hi] with pred(x) false, assuming pred is monotone
/// (false then true). Iterates until the bracket no longer shrinks.
template <class Pred>
double bisect_boundary(Pred&& pred, double lo, double hi, int max_iter = 400) {
    for (int i = 0; i < max_iter; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (pred(mid))
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

/// Root of a decreasing function on [lo, hi] by bisection.
template <class F>
double bisect_decreasing(F&& f, double lo, double hi, int max_iter = 400) {
    return bisect_boundary([&](double t) { return f(t) <= 0.0; }, lo, hi, max_iter);
}

/// Golden-section minimisation of a unimodal function.
template <class F>
std::pair<double, double> golden_min(F&& f, double lo, double hi, double tol) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
    double fc = f(c), fd = f(d);
    while (hi - lo > tol) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    return fc < fd ? std::pair{c, fc} : std::pair{d, fd};
}

inline double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

} // namespace aggrisk::numeric
