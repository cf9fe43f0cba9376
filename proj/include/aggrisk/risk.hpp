#pragma once

#include <aggrisk/lattice.hpp>

#include <functional>
#include <limits>
#include <sstream>

namespace aggrisk {

struct VaR {
    double alpha;
};
struct ES {
    double alpha;
};
struct RVaR {
    double alpha, beta;
};
/// Power distortion: int_0^1 k s^{k-1} VaR_s ds.
struct PD {
    double k;
};
struct Expectile {
    double alpha;
};
struct KusuokaScenario {
    std::vector<double> weights;
    std::vector<double> levels;
};
/// max over scenarios of sum_j weights_j ES_{levels_j}.
struct Kusuoka {
    std::vector<KusuokaScenario> scenarios;
};

inline constexpr double kLevelCap = 1.0 - 1e-9;

class RiskMeasure {
public:
    using Repr = std::variant<VaR, ES, RVaR, PD, Expectile, Kusuoka>;

    template <class T>
        requires std::is_constructible_v<Repr, T>
    RiskMeasure(T v) : repr_(std::move(v)) {
        std::visit([](auto& r) { validate(r); }, repr_);
    }

    const Repr& repr() const { return repr_; }
    template <class T>
    const T* as() const {
        return std::get_if<T>(&repr_);
    }

private:
    static void validate(VaR& r) { require(r.alpha > 0.0 && r.alpha < 1.0, "VaR level must lie in (0,1)"); }
    static void validate(ES& r) { require(r.alpha >= 0.0 && r.alpha < 1.0, "ES level must lie in [0,1)"); }
    static void validate(RVaR& r) {
        require(r.alpha >= 0.0 && r.alpha < 1.0 && r.beta > r.alpha && r.beta <= 1.0, "RVaR needs 0 <= alpha < beta <= 1");
    }
    static void validate(PD& r) { require(r.k >= 1.0, "PD needs k >= 1"); }
    static void validate(Expectile& r) { require(r.alpha >= 0.5 && r.alpha < 1.0, "expectile level must lie in [1/2,1)"); }
    static void validate(Kusuoka& r) {
        require(!r.scenarios.empty(), "kusuoka: no scenarios");
        for (auto& s : r.scenarios) {
            require(!s.weights.empty() && s.weights.size() == s.levels.size(), "kusuoka: weights and levels must match");
            double t = 0.0;
            for (std::size_t j = 0; j < s.weights.size(); ++j) {
                require(s.weights[j] >= 0.0, "kusuoka: weights must be nonnegative");
                require(s.levels[j] >= 0.0 && s.levels[j] < 1.0, "kusuoka: levels must lie in [0,1)");
                t += s.weights[j];
            }
            require(std::abs(t - 1.0) <= 1e-12, "kusuoka: scenario weights must sum to 1");
        }
    }

    Repr repr_;
};

struct ConsistencyTag {
    bool fsd_consistent;
    bool ssd_consistent;
};

inline ConsistencyTag consistency(const RiskMeasure& r) {
    return std::visit(detail::overloaded{
                          [](const VaR&) { return ConsistencyTag{true, false}; },
                          [](const RVaR& m) { return ConsistencyTag{true, m.beta >= 1.0}; },
                          [](const auto&) { return ConsistencyTag{true, true}; },
                      },
                      r.repr());
}

inline bool consistent_with(const RiskMeasure& r, Order o) {
    auto t = consistency(r);
    return o == Order::FSD ? t.fsd_consistent : t.ssd_consistent;
}

inline std::string describe(const RiskMeasure& r) {
    std::ostringstream os;
    os.precision(17);
    std::visit(detail::overloaded{
                   [&](const VaR& m) { os << "var:" << m.alpha; },
                   [&](const ES& m) { os << "es:" << m.alpha; },
                   [&](const RVaR& m) { os << "rvar:" << m.alpha << ":" << m.beta; },
                   [&](const PD& m) { os << "pd:" << m.k; },
                   [&](const Expectile& m) { os << "expectile:" << m.alpha; },
                   [&](const Kusuoka& m) { os << "kusuoka[" << m.scenarios.size() << "]"; },
               },
               r.repr());
    return os.str();
}

// ---------------------------------------------------------------------------
// single-law evaluation

/// ES from the quantile integral; exact for discrete laws.
inline double es_primal(const Distribution& d, double alpha) {
    if (alpha <= 0.0) return mean(d);
    if (auto a = d.as<Atoms>()) {
        double s = 0.0, lo = 0.0;
        for (std::size_t j = 0; j < a->size(); ++j) {
            double hi = a->cum[j];
            double w = hi - std::max(lo, alpha);
            if (w > 0.0) s += w * a->x[j];
            lo = hi;
        }
        return s / (1.0 - alpha);
    }
    return tail_integral(d, alpha) / (1.0 - alpha);
}

/// ES as min over x of x + pi(x) / (1 - alpha); exact for discrete laws.
inline double es_dual(const Distribution& d, double alpha) {
    if (auto a = d.as<Atoms>()) {
        double best = INFINITY;
        for (double x : a->x) best = std::min(best, x + pi(d, x) / (1.0 - alpha));
        return best;
    }
    double q = quantile(d, alpha);
    return q + pi(d, q) / (1.0 - alpha);
}

inline double es(const Distribution& d, double alpha) {
    require(alpha >= 0.0 && alpha < 1.0, "ES level must lie in [0,1)");
    double v = es_primal(d, alpha);
    if (alpha > 0.0 && d.is_atoms()) {
        double w = es_dual(d, alpha);
        if (std::abs(v - w) > 1e-7 * (1.0 + std::abs(v)))
            throw NumericError("ES primal/dual mismatch: " + std::to_string(v) + " vs " + std::to_string(w));
    }
    return v;
}

inline double rvar(const Distribution& d, double alpha, double beta) {
    if (beta >= 1.0) return es(d, alpha);
    double ta = (1.0 - alpha) * es_primal(d, alpha), tb = (1.0 - beta) * es_primal(d, beta);
    return (ta - tb) / (beta - alpha);
}

inline double power_distortion(const Distribution& d, double k) {
    require(k >= 1.0, "PD needs k >= 1");
    if (k == 1.0) return mean(d);
    return std::visit(
        detail::overloaded{
            [&](const Atoms& a) {
                double s = 0.0, prev = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    double c = std::pow(a.cum[i], k);
                    s += (c - prev) * a.x[i];
                    prev = c;
                }
                return s;
            },
            [&](const PointMass& p) { return p.t; },
            [&](const QuantileGrid& g) {
                // q linear on each level cell; int k s^{k-1}(c0 + c1 s) ds in closed form
                const auto& l = g.levels;
                const auto& v = g.values;
                double s = std::pow(l.front(), k) * v.front() + (1.0 - std::pow(l.back(), k)) * v.back();
                for (std::size_t i = 0; i + 1 < l.size(); ++i) {
                    double c1 = (v[i + 1] - v[i]) / (l[i + 1] - l[i]);
                    double c0 = v[i] - c1 * l[i];
                    s += c0 * (std::pow(l[i + 1], k) - std::pow(l[i], k)) +
                         c1 * k / (k + 1.0) * (std::pow(l[i + 1], k + 1.0) - std::pow(l[i], k + 1.0));
                }
                return s;
            },
            [&](const ComonotoneSum& c) {
                double s = 0.0;
                for (auto& t : c.terms)
                    if (t.w != 0.0) s += t.w * power_distortion(*t.d, k);
                return s;
            },
            [&](const auto&) {
                (void)mean(d);
                return numeric::integrate_levels(
                    [&](double s, double t) {
                        double q = s < 0.5 ? quantile(d, s) : quantile_upper(d, t);
                        return k * std::pow(s, k - 1.0) * q;
                    },
                    0.0, 1.0, 1e-12);
            },
        },
        d.repr());
}

inline double expectile(const Distribution& d, double alpha, double* residual = nullptr) {
    require(alpha > 0.0 && alpha < 1.0, "expectile level must lie in (0,1)");
    const double m = mean(d);
    auto g = [&](double t) {
        double p = pi(d, t);
        return alpha * p - (1.0 - alpha) * (t - m + p);
    };
    double lo, hi;
    if (auto a = d.as<Atoms>()) {
        lo = a->x.front() - 1.0;
        hi = a->x.back() + 1.0;
    } else if (auto p = d.as<PointMass>()) {
        lo = p->t - 1.0;
        hi = p->t + 1.0;
    } else {
        lo = quantile(d, 1e-6);
        hi = quantile_upper(d, 1e-6);
    }
    for (int i = 0; g(lo) < 0.0 && i < 200; ++i) lo -= (hi - lo) + 1.0;
    for (int i = 0; g(hi) > 0.0 && i < 200; ++i) hi += (hi - lo) + 1.0;
    double t = numeric::bisect_decreasing(g, lo, hi);
    double r = std::min(std::abs(g(t)), std::abs(g(std::nextafter(t, lo))));
    if (residual) *residual = r;
    if (r > 1e-10 * (1.0 + std::abs(t))) throw NumericError("expectile bisection residual " + std::to_string(r));
    return t;
}

inline double kusuoka_value(const Kusuoka& m, const std::function<double(double)>& es_at) {
    double best = -INFINITY;
    for (auto& s : m.scenarios) {
        double v = 0.0;
        for (std::size_t j = 0; j < s.weights.size(); ++j)
            if (s.weights[j] != 0.0) v += s.weights[j] * es_at(std::min(s.levels[j], kLevelCap));
        best = std::max(best, v);
    }
    return best;
}

inline double evaluate(const RiskMeasure& r, const Distribution& d) {
    return std::visit(detail::overloaded{
                          [&](const VaR& m) { return quantile(d, m.alpha); },
                          [&](const ES& m) { return es(d, m.alpha); },
                          [&](const RVaR& m) { return rvar(d, m.alpha, m.beta); },
                          [&](const PD& m) { return power_distortion(d, m.k); },
                          [&](const Expectile& m) { return expectile(d, m.alpha); },
                          [&](const Kusuoka& m) { return kusuoka_value(m, [&](double a) { return es(d, a); }); },
                      },
                      r.repr());
}

// ---------------------------------------------------------------------------
// robust evaluation over finite sets

inline double wr_value(const RiskMeasure& r, const DistributionList& set) {
    require(!set.empty(), "wr_value: empty set");
    double best = -INFINITY;
    for (auto& d : set) best = std::max(best, evaluate(r, d));
    return best;
}

inline double ma_value(const RiskMeasure& r, Order order, const DistributionList& set, const LatticeConfig& cfg = {}) {
    require(!set.empty(), "ma_value: empty set");
    return evaluate(r, supremum(order, set, cfg).sup);
}

struct CemaReport {
    double ma;
    double wr_over_polytope;
    double gap;
    double grid_bound;  // a-priori bound on the grid shortfall; NaN when unavailable
    std::vector<double> best_lambda;
};

namespace detail {

template <class F>
void for_each_composition(std::size_t n, std::size_t M, F&& f) {
    std::vector<std::size_t> c(n, 0);
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
        if (i + 1 == n) {
            c[i] = left;
            f(c);
            return;
        }
        for (std::size_t v = 0; v <= left; ++v) {
            c[i] = v;
            rec(i + 1, left - v);
        }
    };
    rec(0, M);
}

inline double es_grid_bound(double alpha, const DistributionList& gens, std::size_t M) {
    std::vector<double> pts;
    for (auto& d : gens)
        if (auto a = d.as<Atoms>()) pts.insert(pts.end(), a->x.begin(), a->x.end());
    double spread = 0.0;
    for (double x : pts) {
        double lo = INFINITY, hi = -INFINITY;
        for (auto& d : gens) {
            double p = pi(d, x);
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
        spread = std::max(spread, hi - lo);
    }
    return double(gens.size()) / (2.0 * double(M)) * spread / (1.0 - alpha);
}

} // namespace detail

/// Compares rho of the lattice supremum with the worst case over mixtures of
/// the generators on the simplex grid of step 1/M. M = 1 restricts the worst
/// case to the generators themselves; for M >= 2 the best grid point is
/// polished by pairwise mass exchange.
inline CemaReport cema_check(const RiskMeasure& r, Order order, const DistributionList& gens, std::size_t M,
                             const LatticeConfig& cfg = {}) {
    require(!gens.empty() && M >= 1, "cema_check: need generators and M >= 1");
    const std::size_t n = gens.size();
    CemaReport rep{};
    rep.ma = ma_value(r, order, gens, cfg);
    auto value_at = [&](const std::vector<double>& lam) { return evaluate(r, convex_mixture(gens, lam)); };
    double best = -INFINITY;
    std::vector<double> best_lam(n);
    detail::for_each_composition(n, M, [&](const std::vector<std::size_t>& c) {
        std::vector<double> lam(n);
        for (std::size_t i = 0; i < n; ++i) lam[i] = double(c[i]) / double(M);
        double v = value_at(lam);
        if (v > best) {
            best = v;
            best_lam = lam;
        }
    });
    if (M >= 2) {
        for (double step = 1.0 / double(M); step > 1e-10; step *= 0.5) {
            bool improved = true;
            while (improved) {
                improved = false;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        if (i == j || best_lam[j] <= 0.0) continue;
                        double s = std::min(step, best_lam[j]);
                        auto lam = best_lam;
                        lam[i] += s;
                        lam[j] -= s;
                        if (lam[j] < 1e-15) lam[j] = 0.0;
                        double tot = std::accumulate(lam.begin(), lam.end(), 0.0);
                        for (auto& l : lam) l /= tot;
                        double v = value_at(lam);
                        if (v > best + 1e-15) {
                            best = v;
                            best_lam = lam;
                            improved = true;
                        }
                    }
            }
        }
    }
    rep.wr_over_polytope = best;
    rep.best_lambda = best_lam;
    rep.gap = rep.ma - best;
    rep.grid_bound = std::visit(
        detail::overloaded{
            [&](const VaR&) { return 0.0; },
            [&](const ES& m) { return detail::es_grid_bound(m.alpha, gens, M); },
            [&](const Kusuoka& m) {
                double b = 0.0;
                for (auto& s : m.scenarios) {
                    double t = 0.0;
                    for (std::size_t j = 0; j < s.weights.size(); ++j)
                        t += s.weights[j] * detail::es_grid_bound(std::min(s.levels[j], kLevelCap), gens, M);
                    b = std::max(b, t);
                }
                return b;
            },
            [&](const auto&) { return std::numeric_limits<double>::quiet_NaN(); },
        },
        r.repr());
    return rep;
}

} // namespace aggrisk
