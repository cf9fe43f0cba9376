#pragma once

#include <aggrisk/errors.hpp>
#include <aggrisk/numeric.hpp>

#include <boost/math/distributions/logistic.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace aggrisk {

inline constexpr double kAtomSumTol = 1e-12;

struct Normal {
    double mu = 0.0;
    double sigma = 1.0;
};

/// Location-scale Student t; variance = scale^2 nu / (nu - 2).
struct StudentT {
    double nu = 4.0;
    double loc = 0.0;
    double scale = 1.0;

    static StudentT unit_variance(double nu, double loc = 0.0, double sd = 1.0) {
        require(nu > 2.0, "unit-variance t requires nu > 2");
        return {nu, loc, sd * std::sqrt((nu - 2.0) / nu)};
    }
    double variance() const { return nu > 2.0 ? scale * scale * nu / (nu - 2.0) : INFINITY; }
};

struct Logistic {
    double loc = 0.0;
    double scale = 1.0;
};

struct PointMass {
    double t = 0.0;
};

/// G_p(x) = 1 - x^{-p} on [1, inf).
struct ParetoTail {
    double p = 2.0;
};

/// Supremum of the mean-variance class under first-order dominance.
struct MeanVarFsd {
    double mu = 0.0;
    double sigma = 1.0;
};

/// Supremum of the mean-variance class under second-order dominance.
struct MeanVarSsd {
    double mu = 0.0;
    double sigma = 1.0;
};

/// Finite discrete law. Build through make_atoms; the cumulative arrays are
/// filled on construction of the owning Distribution.
struct Atoms {
    std::vector<double> x;
    std::vector<double> p;

    std::vector<double> cum;      // cum[i] = p_0 + ... + p_i
    std::vector<double> tail_p;   // tail_p[i] = sum_{j >= i} p_j, size n + 1
    std::vector<double> tail_px;  // tail_px[i] = sum_{j >= i} p_j x_j, size n + 1

    std::size_t size() const { return x.size(); }
};

/// Piecewise-linear quantile through (levels[i], values[i]), flat beyond the
/// first and last level.
struct QuantileGrid {
    std::vector<double> levels;
    std::vector<double> values;
};

class Distribution;

struct Weighted {
    double w;
    std::shared_ptr<const Distribution> d;
};

/// Law of sum_i w_i X_i with comonotone X_i: quantiles add.
struct ComonotoneSum {
    std::vector<Weighted> terms;
};

/// Law with CDF sum_i w_i F_i.
struct Mixture {
    std::vector<Weighted> terms;
};

class Distribution {
public:
    using Repr = std::variant<Atoms, Normal, StudentT, Logistic, PointMass, ParetoTail, MeanVarFsd,
                              MeanVarSsd, QuantileGrid, ComonotoneSum, Mixture>;

    template <class T>
        requires std::is_constructible_v<Repr, T>
    Distribution(T v) : repr_(std::move(v)) {
        std::visit([](auto& r) { validate(r); }, repr_);
    }

    const Repr& repr() const { return repr_; }
    template <class T>
    const T* as() const {
        return std::get_if<T>(&repr_);
    }
    bool is_atoms() const { return as<Atoms>() != nullptr; }
    std::string family() const;

private:
    static void validate(Atoms& a);
    static void validate(Normal& d) { require(d.sigma > 0.0 && std::isfinite(d.mu), "normal: sigma must be > 0"); }
    static void validate(StudentT& d) {
        require(d.nu > 0.0 && d.scale > 0.0 && std::isfinite(d.loc), "student_t: nu and scale must be > 0");
    }
    static void validate(Logistic& d) { require(d.scale > 0.0 && std::isfinite(d.loc), "logistic: scale must be > 0"); }
    static void validate(PointMass& d) { require(std::isfinite(d.t), "point mass must be finite"); }
    static void validate(ParetoTail& d) { require(d.p > 0.0, "pareto: p must be > 0"); }
    static void validate(MeanVarFsd& d) { require(d.sigma > 0.0, "mean-variance: sigma must be > 0"); }
    static void validate(MeanVarSsd& d) { require(d.sigma > 0.0, "mean-variance: sigma must be > 0"); }
    static void validate(QuantileGrid& g);
    static void validate(ComonotoneSum& c);
    static void validate(Mixture& m);

    Repr repr_;
};

using DistributionList = std::vector<Distribution>;

inline std::shared_ptr<const Distribution> share(Distribution d) {
    return std::make_shared<const Distribution>(std::move(d));
}

// ---------------------------------------------------------------------------
// construction helpers

/// Sorts, merges equal locations, drops zero weights and rescales to sum 1.
/// Throws if the weights do not sum to one within sum_tol.
inline Distribution make_atoms(std::vector<double> xs, std::vector<double> ps, double sum_tol = kAtomSumTol) {
    require(xs.size() == ps.size() && !xs.empty(), "atoms: locations and probabilities must be nonempty and equal length");
    std::vector<std::size_t> idx(xs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
    Atoms a;
    double total = 0.0;
    for (auto i : idx) {
        require(std::isfinite(xs[i]), "atoms: locations must be finite");
        require(ps[i] >= -1e-15 && std::isfinite(ps[i]), "atoms: probabilities must be nonnegative");
        total += ps[i];
        if (ps[i] <= 0.0) continue;
        if (!a.x.empty() && a.x.back() == xs[i])
            a.p.back() += ps[i];
        else {
            a.x.push_back(xs[i]);
            a.p.push_back(ps[i]);
        }
    }
    if (std::abs(total - 1.0) > sum_tol)
        throw DomainError("atoms: probabilities sum to " + std::to_string(total) + ", expected 1");
    double s = std::accumulate(a.p.begin(), a.p.end(), 0.0);
    for (auto& q : a.p) q /= s;
    return Distribution(std::move(a));
}

inline Distribution uniform_atoms(std::vector<double> xs) {
    std::vector<double> ps(xs.size(), 1.0 / static_cast<double>(xs.size()));
    return make_atoms(std::move(xs), std::move(ps), 1e-9);
}

inline void Distribution::validate(Atoms& a) {
    const std::size_t n = a.x.size();
    require(n > 0 && a.p.size() == n, "atoms: empty or mismatched");
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        require(a.p[i] > 0.0 && a.p[i] <= 1.0, "atoms: probabilities must lie in (0,1]");
        require(std::isfinite(a.x[i]), "atoms: locations must be finite");
        if (i > 0) require(a.x[i] > a.x[i - 1], "atoms: locations must be strictly increasing");
        s += a.p[i];
    }
    require(std::abs(s - 1.0) <= kAtomSumTol + 4.0 * double(n) * std::numeric_limits<double>::epsilon(), "atoms: probabilities must sum to 1");
    a.cum.resize(n);
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) a.cum[i] = (c += a.p[i]);
    a.cum[n - 1] = 1.0;
    a.tail_p.assign(n + 1, 0.0);
    a.tail_px.assign(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        a.tail_p[i] = a.tail_p[i + 1] + a.p[i];
        a.tail_px[i] = a.tail_px[i + 1] + a.p[i] * a.x[i];
    }
}

inline void Distribution::validate(QuantileGrid& g) {
    require(!g.levels.empty() && g.levels.size() == g.values.size(), "quantile grid: empty or mismatched");
    for (std::size_t i = 0; i < g.levels.size(); ++i) {
        require(g.levels[i] > 0.0 && g.levels[i] < 1.0, "quantile grid: levels must lie in (0,1)");
        require(std::isfinite(g.values[i]), "quantile grid: values must be finite");
        if (i > 0) {
            require(g.levels[i] > g.levels[i - 1], "quantile grid: levels must be strictly increasing");
            require(g.values[i] >= g.values[i - 1], "quantile grid: values must be nondecreasing");
        }
    }
}

inline void Distribution::validate(ComonotoneSum& c) {
    require(!c.terms.empty(), "comonotone sum: no terms");
    for (auto& t : c.terms) require(t.d && t.w >= 0.0 && std::isfinite(t.w), "comonotone sum: weights must be >= 0");
}

inline void Distribution::validate(Mixture& m) {
    require(!m.terms.empty(), "mixture: no terms");
    double s = 0.0;
    for (auto& t : m.terms) {
        require(t.d && t.w >= 0.0, "mixture: weights must be >= 0");
        s += t.w;
    }
    require(std::abs(s - 1.0) <= kAtomSumTol, "mixture: weights must sum to 1");
}

inline std::string Distribution::family() const {
    static const char* names[] = {"atoms",      "normal",      "student_t",     "logistic",
                                  "point_mass", "pareto",      "meanvar_fsd",   "meanvar_ssd",
                                  "quantile_grid", "comonotone_sum", "mixture"};
    return names[repr_.index()];
}

// ---------------------------------------------------------------------------
// evaluation

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline constexpr double kPi = std::numbers::pi;

inline void check_level(double a) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("level must lie in (0,1), got " + std::to_string(a));
}

inline double grid_quantile(const QuantileGrid& g, double a) {
    const auto& l = g.levels;
    const auto& v = g.values;
    if (a <= l.front()) return v.front();
    if (a > l.back()) return v.back();
    auto it = std::lower_bound(l.begin(), l.end(), a);  // l[i] >= a, l[i-1] < a
    std::size_t i = static_cast<std::size_t>(it - l.begin());
    if (l[i] == a) return v[i];
    double w = (a - l[i - 1]) / (l[i] - l[i - 1]);
    return v[i - 1] + w * (v[i] - v[i - 1]);
}

inline double grid_cdf(const QuantileGrid& g, double x) {
    const auto& l = g.levels;
    const auto& v = g.values;
    if (x < v.front()) return 0.0;
    if (x >= v.back()) return 1.0;
    auto it = std::upper_bound(v.begin(), v.end(), x);
    std::size_t i = static_cast<std::size_t>(it - v.begin()) - 1;  // v[i] <= x < v[i+1]
    return l[i] + (l[i + 1] - l[i]) * (x - v[i]) / (v[i + 1] - v[i]);
}

inline double grid_pi(const QuantileGrid& g, double x) {
    const auto& l = g.levels;
    const auto& v = g.values;
    const std::size_t m = l.size();
    double s = l.front() * std::max(v.front() - x, 0.0) + (1.0 - l.back()) * std::max(v.back() - x, 0.0);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        double a = v[i], b = v[i + 1], w = l[i + 1] - l[i];
        if (x >= b) continue;
        if (x <= a)
            s += w * (0.5 * (a + b) - x);
        else
            s += w * (b - x) * (b - x) / (2.0 * (b - a));
    }
    return s;
}

inline double grid_mean(const QuantileGrid& g) {
    const auto& l = g.levels;
    const auto& v = g.values;
    double s = l.front() * v.front() + (1.0 - l.back()) * v.back();
    for (std::size_t i = 0; i + 1 < l.size(); ++i) s += (l[i + 1] - l[i]) * 0.5 * (v[i] + v[i + 1]);
    return s;
}

inline std::size_t first_above(const Atoms& a, double x) {
    return static_cast<std::size_t>(std::upper_bound(a.x.begin(), a.x.end(), x) - a.x.begin());
}

inline double t_pi_std(double nu, double z) {
    boost::math::students_t_distribution<double> t(nu);
    return (nu + z * z) / (nu - 1.0) * boost::math::pdf(t, z) - z * boost::math::cdf(boost::math::complement(t, z));
}

} // namespace detail

double cdf(const Distribution& d, double x);
double sf(const Distribution& d, double x);
double quantile(const Distribution& d, double a);
double quantile_upper(const Distribution& d, double t);
double mean(const Distribution& d);
double pi(const Distribution& d, double x);

namespace detail {

/// Survival function of a law given only through its upper quantile
/// t -> q(1 - t): sf(x) = sup{t : q(1 - t) > x}, bisected in log t.
template <class Q>
double sf_from_upper_quantile(Q&& q_upper, double x) {
    auto qu = [&](double t) { return q_upper(std::min(t, 1.0 - 0x1p-53)); };
    double zlo = std::log(1e-300), zhi = std::log1p(-0x1p-53);
    if (qu(std::exp(zlo)) <= x) return 0.0;
    if (qu(std::exp(zhi)) > x) return 1.0;
    for (int i = 0; i < 200; ++i) {
        double zm = 0.5 * (zlo + zhi);
        if (zm <= zlo || zm >= zhi) break;
        if (qu(std::exp(zm)) > x)
            zlo = zm;
        else
            zhi = zm;
    }
    return std::min(std::exp(0.5 * (zlo + zhi)), 1.0);
}

inline double mixture_quantile(const Mixture& m, double a, bool upper) {
    double lo = INFINITY, hi = -INFINITY;
    for (auto& t : m.terms) {
        if (t.w <= 0.0) continue;
        double q = upper ? quantile_upper(*t.d, a) : quantile(*t.d, a);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    auto reached = [&](double x) {
        double s = 0.0;
        if (upper) {
            for (auto& t : m.terms) s += t.w * sf(*t.d, x);
            return s <= a;
        }
        for (auto& t : m.terms) s += t.w * cdf(*t.d, x);
        return s >= a;
    };
    if (reached(lo)) return lo;
    return numeric::bisect_boundary(reached, lo, hi);
}

} // namespace detail

inline double cdf(const Distribution& d, double x) {
    using namespace detail;
    namespace bm = boost::math;
    return std::visit(
        overloaded{
            [&](const Atoms& a) {
                std::size_t i = first_above(a, x);
                return i == 0 ? 0.0 : a.cum[i - 1];
            },
            [&](const Normal& n) { return bm::cdf(bm::normal_distribution<double>(n.mu, n.sigma), x); },
            [&](const StudentT& t) { return bm::cdf(bm::students_t_distribution<double>(t.nu), (x - t.loc) / t.scale); },
            [&](const Logistic& l) { return bm::cdf(bm::logistic_distribution<double>(l.loc, l.scale), x); },
            [&](const PointMass& p) { return x >= p.t ? 1.0 : 0.0; },
            [&](const ParetoTail& p) { return x < 1.0 ? 0.0 : -std::expm1(-p.p * std::log(x)); },
            [&](const MeanVarFsd& m) {
                double y = x - m.mu;
                return y <= 0.0 ? 0.0 : y * y / (m.sigma * m.sigma + y * y);
            },
            [&](const MeanVarSsd& m) {
                double y = x - m.mu;
                return 0.5 * (1.0 + y / std::hypot(m.sigma, y));
            },
            [&](const QuantileGrid& g) { return grid_cdf(g, x); },
            [&](const ComonotoneSum&) { return 1.0 - sf(d, x); },
            [&](const Mixture& m) {
                double s = 0.0;
                for (auto& t : m.terms) s += t.w * cdf(*t.d, x);
                return std::min(s, 1.0);
            },
        },
        d.repr());
}

inline double sf(const Distribution& d, double x) {
    using namespace detail;
    namespace bm = boost::math;
    return std::visit(
        overloaded{
            [&](const Atoms& a) { return a.tail_p[first_above(a, x)]; },
            [&](const Normal& n) {
                return bm::cdf(bm::complement(bm::normal_distribution<double>(n.mu, n.sigma), x));
            },
            [&](const StudentT& t) {
                return bm::cdf(bm::complement(bm::students_t_distribution<double>(t.nu), (x - t.loc) / t.scale));
            },
            [&](const Logistic& l) {
                return bm::cdf(bm::complement(bm::logistic_distribution<double>(l.loc, l.scale), x));
            },
            [&](const PointMass& p) { return x >= p.t ? 0.0 : 1.0; },
            [&](const ParetoTail& p) { return x < 1.0 ? 1.0 : std::pow(x, -p.p); },
            [&](const MeanVarFsd& m) {
                double y = x - m.mu;
                return y <= 0.0 ? 1.0 : m.sigma * m.sigma / (m.sigma * m.sigma + y * y);
            },
            [&](const MeanVarSsd& m) {
                double y = x - m.mu, r = std::hypot(m.sigma, y);
                return y <= 0.0 ? 0.5 * (1.0 - y / r) : 0.5 * m.sigma * m.sigma / (r * (r + y));
            },
            [&](const QuantileGrid& g) { return 1.0 - grid_cdf(g, x); },
            [&](const ComonotoneSum&) {
                return sf_from_upper_quantile([&](double t) { return quantile_upper(d, t); }, x);
            },
            [&](const Mixture& m) {
                double s = 0.0;
                for (auto& t : m.terms) s += t.w * sf(*t.d, x);
                return std::min(s, 1.0);
            },
        },
        d.repr());
}

/// Left quantile inf{x : F(x) >= a}.
inline double quantile(const Distribution& d, double a) {
    using namespace detail;
    namespace bm = boost::math;
    check_level(a);
    return std::visit(
        overloaded{
            [&](const Atoms& at) {
                auto it = std::lower_bound(at.cum.begin(), at.cum.end(), a);
                std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - at.cum.begin()), at.size() - 1);
                return at.x[i];
            },
            [&](const Normal& n) { return bm::quantile(bm::normal_distribution<double>(n.mu, n.sigma), a); },
            [&](const StudentT& t) {
                return t.loc + t.scale * bm::quantile(bm::students_t_distribution<double>(t.nu), a);
            },
            [&](const Logistic& l) { return bm::quantile(bm::logistic_distribution<double>(l.loc, l.scale), a); },
            [&](const PointMass& p) { return p.t; },
            [&](const ParetoTail& p) { return std::pow(1.0 - a, -1.0 / p.p); },
            [&](const MeanVarFsd& m) { return m.mu + m.sigma * std::sqrt(a / (1.0 - a)); },
            [&](const MeanVarSsd& m) { return m.mu + m.sigma * (a - 0.5) / std::sqrt(a * (1.0 - a)); },
            [&](const QuantileGrid& g) { return grid_quantile(g, a); },
            [&](const ComonotoneSum& c) {
                double s = 0.0;
                for (auto& t : c.terms)
                    if (t.w != 0.0) s += t.w * quantile(*t.d, a);
                return s;
            },
            [&](const Mixture& m) { return mixture_quantile(m, a, false); },
        },
        d.repr());
}

/// quantile(d, 1 - t) evaluated without forming 1 - t where the family allows.
inline double quantile_upper(const Distribution& d, double t) {
    using namespace detail;
    namespace bm = boost::math;
    check_level(t);
    return std::visit(
        overloaded{
            [&](const Normal& n) {
                return bm::quantile(bm::complement(bm::normal_distribution<double>(n.mu, n.sigma), t));
            },
            [&](const StudentT& s) {
                return s.loc + s.scale * bm::quantile(bm::complement(bm::students_t_distribution<double>(s.nu), t));
            },
            [&](const Logistic& l) {
                return bm::quantile(bm::complement(bm::logistic_distribution<double>(l.loc, l.scale), t));
            },
            [&](const ParetoTail& p) { return std::pow(t, -1.0 / p.p); },
            [&](const MeanVarFsd& m) { return m.mu + m.sigma * std::sqrt((1.0 - t) / t); },
            [&](const MeanVarSsd& m) { return m.mu + m.sigma * (0.5 - t) / std::sqrt(t * (1.0 - t)); },
            [&](const ComonotoneSum& c) {
                double s = 0.0;
                for (auto& term : c.terms)
                    if (term.w != 0.0) s += term.w * quantile_upper(*term.d, t);
                return s;
            },
            [&](const Mixture& m) { return mixture_quantile(m, t, true); },
            [&](const PointMass& p) { return p.t; },
            [&](const auto&) { return quantile(d, std::clamp(1.0 - t, 0x1p-60, 1.0 - 0x1p-53)); },
        },
        d.repr());
}

inline double mean(const Distribution& d) {
    using namespace detail;
    return std::visit(
        overloaded{
            [&](const Atoms& a) { return a.tail_px[0]; },
            [&](const Normal& n) { return n.mu; },
            [&](const StudentT& t) {
                if (t.nu <= 1.0) throw UnsupportedError("student_t with nu <= 1 has no finite mean");
                return t.loc;
            },
            [&](const Logistic& l) { return l.loc; },
            [&](const PointMass& p) { return p.t; },
            [&](const ParetoTail& p) {
                if (p.p <= 1.0) throw UnsupportedError("pareto tail with p <= 1 has no finite mean");
                return p.p / (p.p - 1.0);
            },
            [&](const MeanVarFsd& m) { return m.mu + m.sigma * kPi / 2.0; },
            [&](const MeanVarSsd& m) { return m.mu; },
            [&](const QuantileGrid& g) { return grid_mean(g); },
            [&](const ComonotoneSum& c) {
                double s = 0.0;
                for (auto& t : c.terms)
                    if (t.w != 0.0) s += t.w * mean(*t.d);
                return s;
            },
            [&](const Mixture& m) {
                double s = 0.0;
                for (auto& t : m.terms)
                    if (t.w != 0.0) s += t.w * mean(*t.d);
                return s;
            },
        },
        d.repr());
}

/// Upper tail integral of the quantile, int_a^1 F^{-1}(s) ds; a = 0 gives the mean.
inline double tail_integral(const Distribution& d, double a) {
    if (a <= 0.0) return mean(d);
    if (a >= 1.0) return 0.0;
    if (auto c = d.as<ComonotoneSum>()) {
        double s = 0.0;
        for (auto& t : c->terms)
            if (t.w != 0.0) s += t.w * tail_integral(*t.d, a);
        return s;
    }
    double q = quantile(d, a);
    return (1.0 - a) * q + pi(d, q);
}

/// Integrated survival function E[(X - x)_+].
inline double pi(const Distribution& d, double x) {
    using namespace detail;
    namespace bm = boost::math;
    return std::visit(
        overloaded{
            [&](const Atoms& a) {
                std::size_t i = first_above(a, x);
                return std::max(a.tail_px[i] - x * a.tail_p[i], 0.0);
            },
            [&](const Normal& n) {
                double z = (x - n.mu) / n.sigma;
                bm::normal_distribution<double> s;
                return n.sigma * (bm::pdf(s, z) - z * bm::cdf(bm::complement(s, z)));
            },
            [&](const StudentT& t) {
                if (t.nu <= 1.0) throw UnsupportedError("student_t with nu <= 1 has no finite mean");
                return t.scale * t_pi_std(t.nu, (x - t.loc) / t.scale);
            },
            [&](const Logistic& l) { return l.scale * numeric::softplus(-(x - l.loc) / l.scale); },
            [&](const PointMass& p) { return std::max(p.t - x, 0.0); },
            [&](const ParetoTail& p) {
                if (p.p <= 1.0) throw UnsupportedError("pareto tail with p <= 1 has no finite mean");
                if (x < 1.0) return (1.0 - x) + 1.0 / (p.p - 1.0);
                return std::pow(x, 1.0 - p.p) / (p.p - 1.0);
            },
            [&](const MeanVarFsd& m) {
                double y = x - m.mu;
                if (y < 0.0) return -y + m.sigma * kPi / 2.0;
                return m.sigma * std::atan2(m.sigma, y);
            },
            [&](const MeanVarSsd& m) {
                double y = x - m.mu, r = std::hypot(m.sigma, y);
                return y <= 0.0 ? 0.5 * (r - y) : 0.5 * m.sigma * m.sigma / (r + y);
            },
            [&](const QuantileGrid& g) { return grid_pi(g, x); },
            [&](const ComonotoneSum& c) {
                double t = sf(d, x);
                if (t <= 0.0) return 0.0;
                if (t >= 1.0) return mean(d) - x;
                double s = 0.0;
                for (auto& term : c.terms) {
                    if (term.w == 0.0) continue;
                    double q = quantile_upper(*term.d, t);
                    s += term.w * (t * q + pi(*term.d, q));
                }
                return std::max(s - t * x, 0.0);
            },
            [&](const Mixture& m) {
                double s = 0.0;
                for (auto& t : m.terms)
                    if (t.w != 0.0) s += t.w * pi(*t.d, x);
                return s;
            },
        },
        d.repr());
}

/// Law of a + b X for b >= 0.
inline Distribution affine(const Distribution& d, double a, double b) {
    require(b >= 0.0, "affine: scale must be >= 0");
    if (auto at = d.as<Atoms>()) {
        if (b == 0.0) return Distribution(PointMass{a});
        std::vector<double> xs(at->x);
        for (auto& v : xs) v = a + b * v;
        return make_atoms(std::move(xs), at->p, 1e-9);
    }
    ComonotoneSum c;
    c.terms.push_back({b, share(d)});
    if (a != 0.0) c.terms.push_back({1.0, share(Distribution(PointMass{a}))});
    return Distribution(std::move(c));
}

// ---------------------------------------------------------------------------
// integrated survival functions as piecewise-linear objects

/// pi(t) = v[0] + (x[0] - t) left of x[0], linear between knots, v.back()
/// right of x.back().
struct PiFunction {
    std::vector<double> x;
    std::vector<double> v;

    double operator()(double t) const {
        if (t <= x.front()) return v.front() + (x.front() - t);
        if (t >= x.back()) return v.back();
        auto it = std::upper_bound(x.begin(), x.end(), t);
        std::size_t i = static_cast<std::size_t>(it - x.begin());
        double w = (t - x[i - 1]) / (x[i] - x[i - 1]);
        return v[i - 1] + w * (v[i] - v[i - 1]);
    }

    double slope(std::size_t i) const {  // slope on [x[i], x[i+1]]
        return (v[i + 1] - v[i]) / (x[i + 1] - x[i]);
    }

    /// Checks shape: knots increasing, values >= 0, slopes in [-1, 0] and nondecreasing.
    void validate(double tol = 1e-10) const {
        if (x.empty() || x.size() != v.size()) throw InvalidPiError("pi function: empty or mismatched");
        double prev = -1.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (v[i] < -tol) throw InvalidPiError("pi function: negative value");
            if (i + 1 < x.size()) {
                if (!(x[i + 1] > x[i])) throw InvalidPiError("pi function: knots must increase");
                double s = slope(i);
                if (s < prev - tol || s > tol) throw InvalidPiError("pi function: slopes must be nondecreasing in [-1,0]");
                prev = s;
            }
        }
    }
};

/// Exact for Atoms (knots = atom locations). Otherwise piecewise-linear
/// interpolation on grid, refined until the chord/tangent gap on every
/// interval is at most tol, with a tangent right tail.
inline PiFunction pi_function(const Distribution& d, const std::vector<double>& grid = {}, double tol = 1e-9) {
    PiFunction out;
    if (auto a = d.as<Atoms>()) {
        out.x = a->x;
        out.v.resize(a->size());
        for (std::size_t i = 0; i < a->size(); ++i) out.v[i] = std::max(a->tail_px[i + 1] - a->x[i] * a->tail_p[i + 1], 0.0);
        out.v.back() = 0.0;
        return out;
    }
    if (auto p = d.as<PointMass>()) {
        out.x = {p->t};
        out.v = {0.0};
        return out;
    }
    if (grid.empty()) throw DomainError("pi_function: empty grid for a non-atomic distribution");
    for (std::size_t i = 1; i < grid.size(); ++i)
        require(grid[i] > grid[i - 1], "pi_function: grid must be strictly increasing");

    struct Node {
        double x, v, s;
    };
    auto node = [&](double x) { return Node{x, pi(d, x), -sf(d, x)}; };
    auto gap = [](const Node& a, const Node& b) {
        if (b.s - a.s <= 0.0) return 0.0;
        double xs = (b.v - a.v + a.s * a.x - b.s * b.x) / (a.s - b.s);
        xs = std::clamp(xs, a.x, b.x);
        double chord = a.v + (b.v - a.v) * (xs - a.x) / (b.x - a.x);
        return chord - (a.v + a.s * (xs - a.x));
    };
    std::vector<Node> nodes;
    nodes.reserve(grid.size() * 2);
    Node prev = node(grid.front());
    nodes.push_back(prev);
    const double min_width = 1e-12 * std::max(1.0, grid.back() - grid.front());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        std::vector<Node> stack{node(grid[i])};
        while (!stack.empty()) {
            Node b = stack.back();
            if (gap(prev, b) > tol && b.x - prev.x > min_width) {
                stack.push_back(node(0.5 * (prev.x + b.x)));
                continue;
            }
            nodes.push_back(b);
            prev = b;
            stack.pop_back();
        }
    }
    for (auto& n : nodes) {
        out.x.push_back(n.x);
        out.v.push_back(n.v);
    }
    for (std::size_t i = 1; i < out.v.size(); ++i) out.v[i] = std::min(out.v[i], out.v[i - 1]);
    const Node& last = nodes.back();
    if (last.v > 0.0) {
        if (last.s < 0.0) {
            out.x.push_back(last.x + last.v / -last.s);
            out.v.push_back(0.0);
        } else {
            out.v.back() = 0.0;
        }
    }
    return out;
}

/// Recovers the discrete law with F = 1 + pi'_+; each slope change is an atom.
inline Distribution cdf_from_pi(const PiFunction& p, double mass_tol = 1e-14) {
    p.validate();
    double scale = 1.0 + std::abs(p.x.front()) + std::abs(p.x.back());
    if (p.v.back() > 1e-12 * scale)
        throw InvalidPiError("pi function does not decay to 0 on the right: probability mass is missing");
    std::vector<double> xs, ps;
    double left = -1.0;
    const std::size_t n = p.x.size();
    for (std::size_t i = 0; i < n; ++i) {
        double right = i + 1 < n ? p.slope(i) : 0.0;
        right = std::clamp(right, -1.0, 0.0);
        double m = right - left;
        if (m < -1e-10) throw InvalidPiError("pi function is not convex");
        if (m > mass_tol) {
            xs.push_back(p.x[i]);
            ps.push_back(m);
        }
        left = std::max(left, right);
    }
    return make_atoms(std::move(xs), std::move(ps), 1e-8);
}

// ---------------------------------------------------------------------------
// discretisation

/// Chebyshev-spaced levels u_k = (1 - cos(pi k / K)) / 2, k = 0..K.
inline std::vector<double> chebyshev_levels(std::size_t K) {
    std::vector<double> u(K + 1);
    for (std::size_t k = 0; k <= K; ++k) {
        double h = std::sin(detail::kPi * double(k) / double(2 * K));
        u[k] = h * h;
    }
    u.front() = 0.0;
    u.back() = 1.0;
    return u;
}

struct Discretization {
    Distribution atoms;
    double pi_error;  // sup_x |pi_atoms(x) - pi_d(x)| bound
};

/// Conditional-mean atoms on Chebyshev level bins. The result is dominated by
/// d in second order, has the same mean, and its pi touches pi_d at every
/// interior bin-edge quantile.
inline Discretization discretize(const Distribution& d, std::size_t K = 2048) {
    if (d.is_atoms()) return {d, 0.0};
    if (auto p = d.as<PointMass>()) return {make_atoms({p->t}, {1.0}), 0.0};
    const double m = mean(d);
    auto u = chebyshev_levels(K);
    std::vector<double> q(K + 1), I(K + 1), piq(K + 1);
    I[0] = m;
    I[K] = 0.0;
    for (std::size_t k = 1; k < K; ++k) {
        double h = std::sin(detail::kPi * double(K - k) / double(2 * K));
        double t = h * h;  // 1 - u_k
        q[k] = quantile_upper(d, t);
        piq[k] = pi(d, q[k]);
        I[k] = t * q[k] + piq[k];
    }
    std::vector<double> xs, ps;
    double err = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double w = u[k + 1] - u[k];
        if (w <= 0.0) continue;
        double cm = (I[k] - I[k + 1]) / w;
        if (k > 0 && k + 1 < K) cm = std::clamp(cm, q[k], q[k + 1]);
        xs.push_back(cm);
        ps.push_back(w);
    }
    // gap bound per bin: envelope of tangents against the true pi
    for (std::size_t k = 1; k + 1 < K; ++k) {
        double sa = u[k] - 1.0, sb = u[k + 1] - 1.0;
        double a = q[k], b = q[k + 1];
        if (b <= a) continue;
        double xs_ = std::clamp((piq[k + 1] - piq[k] + sa * a - sb * b) / (sa - sb), a, b);
        double chord = piq[k] + (piq[k + 1] - piq[k]) * (xs_ - a) / (b - a);
        err = std::max(err, chord - (piq[k] + sa * (xs_ - a)));
    }
    {
        // left tail: asymptote m - x against tangent at q[1]
        double b = q[1], sb = -(1.0 - u[1]);
        double xl = (m - piq[1] + sb * b) / (1.0 + sb);
        err = std::max(err, u[1] * std::max(b - xl, 0.0));
        err = std::max(err, piq[K - 1]);
    }
    double tot = std::accumulate(ps.begin(), ps.end(), 0.0);
    for (auto& w : ps) w /= tot;
    return {make_atoms(std::move(xs), std::move(ps), 1e-9), err};
}

} // namespace aggrisk
