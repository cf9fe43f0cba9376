#pragma once

#include <aggrisk/risk.hpp>

#include <Eigen/Dense>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/tools/roots.hpp>

namespace aggrisk {

// ---------------------------------------------------------------------------
// univariate Wasserstein balls

struct WassersteinBall {
    double p = 2.0;
    double eps = 0.0;
    Distribution benchmark = PointMass{0.0};
};

/// Whether E|X|^p is finite for the family of d.
inline bool has_finite_moment(const Distribution& d, double p) {
    return std::visit(detail::overloaded{
                          [&](const StudentT& t) { return t.nu > p; },
                          [&](const ParetoTail& t) { return t.p > p; },
                          [&](const MeanVarFsd&) { return p < 2.0; },
                          [&](const MeanVarSsd&) { return p < 2.0; },
                          [&](const ComonotoneSum& c) {
                              return std::all_of(c.terms.begin(), c.terms.end(), [&](auto& t) {
                                  return t.w == 0.0 || has_finite_moment(*t.d, p);
                              });
                          },
                          [&](const Mixture& m) {
                              return std::all_of(m.terms.begin(), m.terms.end(),
                                                 [&](auto& t) { return has_finite_moment(*t.d, p); });
                          },
                          [](const auto&) { return true; },
                      },
                      d.repr());
}

inline void validate(const WassersteinBall& b) {
    require(b.p >= 1.0, "wasserstein: p must be >= 1");
    require(b.eps >= 0.0, "wasserstein: eps must be >= 0");
    if (!has_finite_moment(b.benchmark, b.p))
        throw UnsupportedError("wasserstein: benchmark " + b.benchmark.family() + " lacks a finite moment of order p");
}

/// SSD supremum of the ball: benchmark plus a comonotone Pareto tail of index p,
/// q(alpha) = F0^{-1}(alpha) + (1 - 1/p)(1 - alpha)^{-1/p} eps.
inline Distribution wasserstein_sup_ssd(const WassersteinBall& b) {
    validate(b);
    if (b.p == 1.0) throw UnboundedError("wasserstein: the p = 1 ball has no upper bound in the SSD order");
    if (b.eps == 0.0) return b.benchmark;
    ComonotoneSum c;
    c.terms = {{1.0, share(b.benchmark)}, {(1.0 - 1.0 / b.p) * b.eps, share(ParetoTail{b.p})}};
    return Distribution(std::move(c));
}

/// int_alpha^1 ((q - F0^{-1}(s))_+ / eps)^p ds - 1, with tail = 1 - alpha.
/// Multiply by eps^p for the unscaled residual.
inline double wasserstein_fsd_residual(const WassersteinBall& b, double q, double alpha, double tail) {
    const auto& d = b.benchmark;
    const double e = b.eps;
    if (auto pm = d.as<PointMass>()) return tail * std::pow(std::max(q - pm->t, 0.0) / e, b.p) - 1.0;
    if (auto a = d.as<Atoms>()) {
        double s = 0.0, lo = 0.0;
        for (std::size_t j = 0; j < a->size(); ++j) {
            double hi = j + 1 == a->size() ? 1.0 : a->cum[j];
            double len = j + 1 == a->size() ? std::min(tail, 1.0 - lo) : hi - std::max(lo, alpha);
            if (len > 0.0 && q > a->x[j]) s += std::min(len * std::pow((q - a->x[j]) / e, b.p), 1e300);
            lo = hi;
        }
        return s - 1.0;
    }
    // layer-cake form: int_{F0^{-1}(alpha)}^{q} p (q - x)^{p-1} (F0(x) - alpha)_+ dx / eps^p
    double lo = quantile(d, alpha);
    if (!(q > lo)) return -1.0;
    auto f = [&](double x, double xc) {
        double dist = xc > 0.0 ? xc : q - x;
        double g = std::max(tail - sf(d, x), 0.0);
        if (g == 0.0) return 0.0;
        return std::min(std::exp(std::log(b.p / e) + (b.p - 1.0) * std::log(dist / e) + std::log(g)), 1e300);
    };
    return numeric::tanh_sinh_rule().integrate(f, lo, q, 1e-14) - 1.0;
}

/// FSD-supremum quantile at a single level, root of the residual in q.
inline double wasserstein_fsd_quantile(const WassersteinBall& b, double alpha) {
    validate(b);
    require(alpha > 0.0 && alpha < 1.0, "wasserstein: level must lie in (0,1)");
    const double tail = 1.0 - alpha;
    if (b.eps == 0.0) return quantile(b.benchmark, alpha);
    if (auto pm = b.benchmark.as<PointMass>()) return pm->t + b.eps * std::pow(tail, -1.0 / b.p);
    double lo = quantile(b.benchmark, alpha);
    double hi = quantile_upper(b.benchmark, 1e-9) + b.eps * std::pow(tail, -1.0 / b.p) + 1.0;
    hi = std::max(hi, lo + b.eps * std::pow(tail, -1.0 / b.p));
    auto r = [&](double q) { return wasserstein_fsd_residual(b, q, alpha, tail); };
    for (int i = 0; r(hi) < 0.0; ++i) {
        if (i > 60) throw NumericError("wasserstein: could not bracket the FSD quantile");
        hi = lo + 2.0 * (hi - lo);
    }
    boost::uintmax_t it = 200;
    auto [a, c] = boost::math::tools::toms748_solve(r, lo, hi, boost::math::tools::eps_tolerance<double>(52), it);
    double ra = std::abs(r(a)), rc = std::abs(r(c));
    return ra <= rc ? a : c;
}

/// Logit-spaced levels on [lo, 1 - tail_lo].
inline std::vector<double> logit_levels(std::size_t n, double lo = 1e-6, double tail_lo = 1e-9) {
    require(n >= 2, "logit_levels: need at least two levels");
    double a = std::log(lo / (1.0 - lo)), b = std::log((1.0 - tail_lo) / tail_lo);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = a + (b - a) * double(i) / double(n - 1);
        u[i] = 1.0 / (1.0 + std::exp(-z));
    }
    return u;
}

/// FSD supremum of the ball on a logit level grid; exact at the grid levels.
inline Distribution wasserstein_sup_fsd(const WassersteinBall& b, std::size_t levels = 4096) {
    validate(b);
    if (b.eps == 0.0) return b.benchmark;
    if (auto pm = b.benchmark.as<PointMass>())
        return ComonotoneSum{{{1.0, share(PointMass{pm->t})}, {b.eps, share(ParetoTail{b.p})}}};
    QuantileGrid g;
    g.levels = logit_levels(levels);
    g.values.reserve(levels);
    for (double u : g.levels) {
        double q = wasserstein_fsd_quantile(b, u);
        if (!g.values.empty()) q = std::max(q, g.values.back());
        g.values.push_back(q);
    }
    // drop repeated levels produced by rounding near 1
    QuantileGrid out;
    for (std::size_t i = 0; i < g.levels.size(); ++i) {
        if (!out.levels.empty() && g.levels[i] <= out.levels.back()) continue;
        out.levels.push_back(g.levels[i]);
        out.values.push_back(g.values[i]);
    }
    return Distribution(std::move(out));
}

// ---------------------------------------------------------------------------
// multivariate balls and projection

struct Elliptical {
    enum class Kind { Normal, StudentT } kind = Kind::Normal;
    double nu = 0.0;  // degrees of freedom for the t kind
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;  // covariance matrix
};

struct EmpiricalCloud {
    Eigen::MatrixXd points;  // one observation per row, equal weights
};

struct MultiWassersteinBall {
    double a = 2.0;
    double p = 2.0;
    double eps = 0.0;
    std::variant<Elliptical, EmpiricalCloud> benchmark;
};

/// Conjugate exponent b with 1/a + 1/b = 1.
inline double conjugate_exponent(double a) {
    require(a >= 1.0, "norm exponent must be >= 1");
    if (a == 1.0) return INFINITY;
    if (std::isinf(a)) return 1.0;
    return a / (a - 1.0);
}

inline double lp_norm(const Eigen::VectorXd& w, double b) {
    if (std::isinf(b)) return w.cwiseAbs().maxCoeff();
    if (b == 1.0) return w.cwiseAbs().sum();
    if (b == 2.0) return w.norm();
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) s += std::pow(std::abs(w[i]), b);
    return std::pow(s, 1.0 / b);
}

/// Unit-variance generator of the elliptical family.
inline Distribution elliptical_generator(const Elliptical& e) {
    if (e.kind == Elliptical::Kind::Normal) return Normal{0.0, 1.0};
    return StudentT::unit_variance(e.nu);
}

inline void validate(const Elliptical& e) {
    require(e.mu.size() > 0 && e.sigma.rows() == e.mu.size() && e.sigma.cols() == e.mu.size(),
            "elliptical: mu and sigma dimensions must match");
    require((e.sigma - e.sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + e.sigma.cwiseAbs().maxCoeff()),
            "elliptical: sigma must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.sigma, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-10 * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff()),
            "elliptical: sigma must be positive semidefinite");
    if (e.kind == Elliptical::Kind::StudentT) require(e.nu > 2.0, "elliptical t: nu must be > 2");
}

/// Law of w^T X under the benchmark.
inline Distribution project_benchmark(const std::variant<Elliptical, EmpiricalCloud>& bench, const Eigen::VectorXd& w) {
    if (auto e = std::get_if<Elliptical>(&bench)) {
        validate(*e);
        require(w.size() == e->mu.size(), "projection: weight dimension mismatch");
        double loc = w.dot(e->mu);
        double sd = std::sqrt(std::max(w.dot(e->sigma * w), 0.0));
        if (!(sd > 0.0)) return PointMass{loc};
        if (e->kind == Elliptical::Kind::Normal) return Normal{loc, sd};
        return StudentT::unit_variance(e->nu, loc, sd);
    }
    const auto& c = std::get<EmpiricalCloud>(bench);
    require(c.points.rows() > 0 && c.points.cols() == w.size(), "projection: cloud dimension mismatch");
    Eigen::VectorXd v = c.points * w;
    std::vector<double> xs(v.data(), v.data() + v.size());
    std::vector<double> ps(xs.size(), 1.0 / double(xs.size()));
    return make_atoms(std::move(xs), std::move(ps), 1e-9);
}

inline WassersteinBall project_ball(const MultiWassersteinBall& m, const Eigen::VectorXd& w) {
    require(m.p >= 1.0, "wasserstein: p must be >= 1");
    require(m.eps >= 0.0, "wasserstein: eps must be >= 0");
    require(w.size() > 0 && w.cwiseAbs().maxCoeff() > 0.0, "projection: weights must be nonzero");
    double b = conjugate_exponent(m.a);
    return {m.p, m.eps * lp_norm(w, b), project_benchmark(m.benchmark, w)};
}

// ---------------------------------------------------------------------------
// distortion coefficients

/// Slope of the WR robust value of PD_k over a p-Wasserstein ball:
/// (int_0^1 (k s^{k-1})^q ds)^{1/q} with q = p / (p - 1).
inline double zeta_pd(double p, double k) {
    require(p >= 1.0 && k >= 1.0, "zeta: need p >= 1 and k >= 1");
    if (p == 1.0) return k;
    double q = p / (p - 1.0);
    return k * std::pow(1.0 / (q * (k - 1.0) + 1.0), 1.0 / q);
}

/// Slope of the MA2 robust value of PD_k: ((p-1)/p) int_0^1 (1-s)^{-1/p} k s^{k-1} ds.
inline double xi_pd(double p, double k) {
    require(p > 1.0 && k >= 1.0, "xi: need p > 1 and k >= 1");
    return (p - 1.0) / p * k * boost::math::beta(k, 1.0 - 1.0 / p);
}

inline double zeta_es(double p, double alpha) {
    require(p >= 1.0 && alpha >= 0.0 && alpha < 1.0, "zeta: need p >= 1 and alpha in [0,1)");
    return std::pow(1.0 - alpha, -1.0 / p);
}

inline double xi_es(double p, double alpha) {
    require(p > 1.0 && alpha >= 0.0 && alpha < 1.0, "xi: need p > 1 and alpha in [0,1)");
    return std::pow(1.0 - alpha, -1.0 / p);
}

struct DistortionCoefficients {
    double zeta;
    double xi;
    double rho_psi;
};

/// Coefficients of the projected Wasserstein objective for ES or PD.
inline DistortionCoefficients distortion_coefficients(const RiskMeasure& r, double p, const Distribution& generator) {
    DistortionCoefficients c{};
    if (auto e = r.as<ES>()) {
        c.zeta = zeta_es(p, e->alpha);
        c.xi = p > 1.0 ? xi_es(p, e->alpha) : INFINITY;
    } else if (auto d = r.as<PD>()) {
        c.zeta = zeta_pd(p, d->k);
        c.xi = p > 1.0 ? xi_pd(p, d->k) : INFINITY;
    } else {
        throw UnsupportedError("distortion coefficients are defined for ES and PD only, got " + describe(r));
    }
    c.rho_psi = evaluate(r, generator);
    return c;
}

// ---------------------------------------------------------------------------
// mean-variance classes

struct MeanVarianceClass {
    double mu = 0.0;
    double sigma = 1.0;
};

inline Distribution mv_sup_fsd(const MeanVarianceClass& c) {
    require(c.sigma > 0.0, "mean-variance: sigma must be > 0");
    return MeanVarFsd{c.mu, c.sigma};
}

inline Distribution mv_sup_ssd(const MeanVarianceClass& c) {
    require(c.sigma > 0.0, "mean-variance: sigma must be > 0");
    return MeanVarSsd{c.mu, c.sigma};
}

struct MvValues {
    double wr, ma1, ma2;
};

namespace detail {

// int_0^s sqrt(u / (1 - u)) du
inline double mv_g(double s) { return std::asin(std::sqrt(s)) - std::sqrt(s * (1.0 - s)); }

inline double pd_gamma_ratio(double k) { return std::sqrt(M_PI) * std::exp(std::lgamma(k + 0.5) - std::lgamma(k)); }

} // namespace detail

/// Robust values over the standardized mean-variance class (mu = 0, sigma = 1).
inline MvValues mv_table(const RiskMeasure& r) {
    return std::visit(
        detail::overloaded{
            [](const ES& m) {
                double a = m.alpha, w = std::sqrt(a / (1.0 - a));
                return MvValues{w, (M_PI / 2.0 - detail::mv_g(a)) / (1.0 - a), w};
            },
            [](const RVaR& m) {
                double a = m.alpha, b = m.beta, w = std::sqrt(a / (1.0 - a));
                double g_b = b >= 1.0 ? M_PI / 2.0 : detail::mv_g(b);
                double ma2 = (std::sqrt(a * (1.0 - a)) - std::sqrt(b * (1.0 - b))) / (b - a);
                return MvValues{w, (g_b - detail::mv_g(a)) / (b - a), ma2};
            },
            [](const VaR& m) {
                double a = m.alpha, w = std::sqrt(a / (1.0 - a));
                return MvValues{w, w, (a - 0.5) / std::sqrt(a * (1.0 - a))};
            },
            [](const PD& m) {
                double k = m.k, g = detail::pd_gamma_ratio(k);
                return MvValues{(k - 1.0) / std::sqrt(2.0 * k - 1.0), g, (k - 1.0) / (2.0 * k - 1.0) * g};
            },
            [](const Expectile& m) {
                double a = m.alpha, v = (a - 0.5) / std::sqrt(a * (1.0 - a));
                return MvValues{v, expectile(Distribution(MeanVarFsd{0.0, 1.0}), a), v};
            },
            [](const Kusuoka&) -> MvValues { throw UnsupportedError("mv_table: Kusuoka measures are not tabulated"); },
        },
        r.repr());
}

/// Robust values over the class with mean mu and standard deviation sigma.
inline MvValues mv_values(const RiskMeasure& r, const MeanVarianceClass& c) {
    require(c.sigma > 0.0, "mean-variance: sigma must be > 0");
    auto t = mv_table(r);
    return {c.mu + c.sigma * t.wr, c.mu + c.sigma * t.ma1, c.mu + c.sigma * t.ma2};
}

} // namespace aggrisk
