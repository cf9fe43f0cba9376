#pragma once

#include <aggrisk/dist_core.hpp>

#include <numeric>
#include <optional>

namespace aggrisk {

enum class Order { FSD, SSD };

inline const char* to_string(Order o) { return o == Order::FSD ? "fsd" : "ssd"; }

inline Order parse_order(const std::string& s) {
    if (s == "fsd" || s == "1") return Order::FSD;
    if (s == "ssd" || s == "2") return Order::SSD;
    throw DomainError("unknown order '" + s + "' (expected fsd or ssd)");
}

struct SupremumResult {
    Order order;
    Distribution sup;
    bool exact;
    std::optional<PiFunction> witness;
    double pi_error = 0.0;  // sup-norm bound on the witness when !exact
};

struct LatticeConfig {
    std::size_t levels = 2048;  // discretisation of non-atomic inputs
};

namespace detail {

inline std::vector<double> union_locations(const std::vector<const Atoms*>& xs) {
    std::vector<double> u;
    for (auto* a : xs) u.insert(u.end(), a->x.begin(), a->x.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

inline std::vector<double> probe_points(const Distribution& F, const Distribution& G, const std::vector<double>& grid) {
    std::vector<double> pts(grid);
    for (const auto* d : {&F, &G}) {
        if (auto a = d->as<Atoms>())
            pts.insert(pts.end(), a->x.begin(), a->x.end());
        else if (auto p = d->as<PointMass>())
            pts.push_back(p->t);
        else if (grid.empty()) {
            for (double u : chebyshev_levels(256)) {
                if (u <= 0.0 || u >= 1.0) continue;
                pts.push_back(u < 0.5 ? quantile(*d, u) : quantile_upper(*d, 1.0 - u));
            }
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

} // namespace detail

/// F below G in the given order, checked on atom locations plus grid (exact
/// for pairs of discrete laws).
inline bool dominates(Order order, const Distribution& F, const Distribution& G, const std::vector<double>& grid = {},
                      double tol = 1e-10) {
    auto pts = detail::probe_points(F, G, grid);
    if (order == Order::FSD) {
        for (double x : pts)
            if (cdf(F, x) < cdf(G, x) - tol) return false;
        return true;
    }
    for (double x : pts)
        if (pi(F, x) > pi(G, x) + tol * (1.0 + std::abs(x))) return false;
    if (!(F.is_atoms() && G.is_atoms()) && mean(F) > mean(G) + tol) return false;
    return true;
}

struct Envelope {
    PiFunction witness;
    Distribution sup;
};

/// Exact upper envelope of the integrated survival functions of discrete laws.
/// Masses are read off the slopes of the leading lines, not from values.
inline Envelope upper_envelope(const std::vector<const Atoms*>& in) {
    const auto U = detail::union_locations(in);
    const std::size_t n = in.size();
    struct Line {
        double c, s;  // pi = c + s x
    };
    struct Piece {
        double start;
        Line line;
        bool at_atom;
    };
    auto line_at = [](const Atoms& a, double x) {
        std::size_t i = detail::first_above(a, x);
        return Line{a.tail_px[i], -a.tail_p[i]};
    };

    std::vector<Piece> pieces;
    std::vector<Line> ln(n);
    for (std::size_t k = 0; k < U.size(); ++k) {
        const double a = U[k];
        if (k + 1 == U.size()) {
            pieces.push_back({a, {0.0, 0.0}, true});
            break;
        }
        const double b = U[k + 1];
        for (std::size_t i = 0; i < n; ++i) ln[i] = line_at(*in[i], a);
        auto val = [&](std::size_t i, double x) { return ln[i].c + ln[i].s * x; };
        const double eps = 1e-13 * (1.0 + std::abs(a) + std::abs(b));
        // leader at a: max value, ties broken by larger slope
        std::size_t L = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (val(i, a) > val(L, a) || (val(i, a) == val(L, a) && ln[i].s > ln[L].s)) L = i;
        pieces.push_back({a, ln[L], true});
        double x = a;
        while (true) {
            double best_t = INFINITY;
            std::size_t next = L;
            for (std::size_t i = 0; i < n; ++i) {
                if (ln[i].s <= ln[L].s) continue;
                if (val(i, b) - val(L, b) <= eps) continue;  // never rises above the leader inside [a, b)
                double t = (ln[L].c - ln[i].c) / (ln[i].s - ln[L].s);
                t = std::max(t, x);
                if (t < best_t || (t == best_t && ln[i].s > ln[next].s)) {
                    best_t = t;
                    next = i;
                }
            }
            if (next == L || best_t >= b) break;
            if (best_t > x)
                pieces.push_back({best_t, ln[next], false});
            else
                pieces.back().line = ln[next];
            x = best_t;
            L = next;
        }
    }

    // group knots closer than rounding; a group sitting on an input atom keeps that location
    std::vector<double> xs, ps;
    double s_left = -1.0;
    for (std::size_t j = 0; j < pieces.size();) {
        std::size_t e = j + 1;
        while (e < pieces.size() && pieces[e].start - pieces[e - 1].start <= 1e-12 * (1.0 + std::abs(pieces[e].start))) ++e;
        double loc = pieces[j].start;
        for (std::size_t q = j; q < e; ++q)
            if (pieces[q].at_atom) loc = pieces[q].start;
        double s_right = pieces[e - 1].line.s;
        double m = s_right - s_left;
        if (m > 1e-13) {
            xs.push_back(loc);
            ps.push_back(m);
            s_left = s_right;
        }
        j = e;
    }
    PiFunction w;
    for (double x : xs) {
        double m = 0.0;
        for (auto* a : in) m = std::max(m, line_at(*a, x).c + line_at(*a, x).s * x);
        w.x.push_back(x);
        w.v.push_back(std::max(m, 0.0));
    }
    w.v.back() = 0.0;
    double tot = std::accumulate(ps.begin(), ps.end(), 0.0);
    for (auto& p : ps) p /= tot;
    return {std::move(w), make_atoms(std::move(xs), std::move(ps))};
}

inline SupremumResult sup_ssd(const DistributionList& set, const LatticeConfig& cfg = {}) {
    require(!set.empty(), "sup_ssd: empty set");
    for (const auto& d : set) (void)mean(d);
    if (set.size() == 1) {
        std::optional<PiFunction> w;
        if (set[0].is_atoms()) w = pi_function(set[0]);
        return {Order::SSD, set[0], true, w, 0.0};
    }
    std::vector<Distribution> disc;
    disc.reserve(set.size());
    bool exact = true;
    double err = 0.0;
    for (const auto& d : set) {
        if (d.is_atoms()) {
            disc.push_back(d);
            continue;
        }
        auto r = discretize(d, cfg.levels);
        exact = exact && r.pi_error == 0.0;
        err = std::max(err, r.pi_error);
        disc.push_back(std::move(r.atoms));
    }
    std::vector<const Atoms*> ptrs;
    for (auto& d : disc) ptrs.push_back(d.as<Atoms>());
    auto env = upper_envelope(ptrs);
    return {Order::SSD, std::move(env.sup), exact, std::move(env.witness), err};
}

inline SupremumResult sup_fsd(const DistributionList& set, const LatticeConfig& cfg = {}) {
    require(!set.empty(), "sup_fsd: empty set");
    if (set.size() == 1) return {Order::FSD, set[0], true, std::nullopt, 0.0};
    bool all_atoms = std::all_of(set.begin(), set.end(), [](auto& d) { return d.is_atoms() || d.template as<PointMass>(); });
    if (all_atoms) {
        std::vector<Distribution> as;
        for (auto& d : set) as.push_back(d.is_atoms() ? d : make_atoms({d.as<PointMass>()->t}, {1.0}));
        std::vector<const Atoms*> ptrs;
        for (auto& d : as) ptrs.push_back(d.as<Atoms>());
        auto U = detail::union_locations(ptrs);
        std::vector<double> xs, ps;
        double prev = 0.0;
        for (double x : U) {
            double c = 1.0;
            for (auto* a : ptrs) {
                std::size_t i = detail::first_above(*a, x);
                c = std::min(c, i == 0 ? 0.0 : a->cum[i - 1]);
            }
            if (c - prev > 1e-14) {
                xs.push_back(x);
                ps.push_back(c - prev);
            }
            prev = std::max(prev, c);
        }
        return {Order::FSD, make_atoms(std::move(xs), std::move(ps), 1e-9), true, std::nullopt, 0.0};
    }
    auto u = chebyshev_levels(cfg.levels);
    QuantileGrid g;
    for (std::size_t k = 1; k + 1 < u.size(); ++k) {
        double m = -INFINITY;
        for (auto& d : set) m = std::max(m, u[k] < 0.5 ? quantile(d, u[k]) : quantile_upper(d, 1.0 - u[k]));
        if (!g.values.empty()) m = std::max(m, g.values.back());
        g.levels.push_back(u[k]);
        g.values.push_back(m);
    }
    return {Order::FSD, Distribution(std::move(g)), false, std::nullopt, 0.0};
}

inline SupremumResult supremum(Order order, const DistributionList& set, const LatticeConfig& cfg = {}) {
    return order == Order::FSD ? sup_fsd(set, cfg) : sup_ssd(set, cfg);
}

inline Distribution convex_mixture(const DistributionList& set, const std::vector<double>& lambda) {
    require(!set.empty() && set.size() == lambda.size(), "convex_mixture: weights must match the set");
    double s = 0.0;
    for (double l : lambda) {
        require(l >= 0.0, "convex_mixture: weights must be nonnegative");
        s += l;
    }
    require(std::abs(s - 1.0) <= kAtomSumTol, "convex_mixture: weights must sum to 1");
    bool all_atoms = std::all_of(set.begin(), set.end(), [](auto& d) { return d.is_atoms(); });
    if (all_atoms) {
        std::vector<double> xs, ps;
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (lambda[i] == 0.0) continue;
            const auto& a = *set[i].as<Atoms>();
            for (std::size_t j = 0; j < a.size(); ++j) {
                xs.push_back(a.x[j]);
                ps.push_back(lambda[i] * a.p[j]);
            }
        }
        return make_atoms(std::move(xs), std::move(ps), 1e-9);
    }
    Mixture m;
    for (std::size_t i = 0; i < set.size(); ++i)
        if (lambda[i] > 0.0) m.terms.push_back({lambda[i] / s, share(set[i])});
    if (m.terms.size() == 1) return *m.terms[0].d;
    return Distribution(std::move(m));
}

} // namespace aggrisk
