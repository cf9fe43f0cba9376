#pragma once

#include <aggrisk/risk.hpp>
#include <aggrisk/solver.hpp>
#include <aggrisk/uncertainty.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <random>

namespace aggrisk {

// ---------------------------------------------------------------------------
// losses

/// f(w, x) = w^T x.
struct LinearLoss {};

/// f(a, x) = sum_i beta_i (a_i - x_i)_+ + eta_i (x_i - a_i)_+.
struct NewsvendorLoss {
    Eigen::VectorXd beta, eta;
};

struct CustomLoss {
    // value at (a, x); writes a subgradient in a when grad is non-null
    std::function<double(const Eigen::VectorXd& a, const Eigen::VectorXd& x, Eigen::VectorXd* grad)> f;
    bool convex = true;
};

using LossFunction = std::variant<LinearLoss, NewsvendorLoss, CustomLoss>;

inline void validate(const LossFunction& loss) {
    if (auto n = std::get_if<NewsvendorLoss>(&loss)) {
        require(n->beta.size() == n->eta.size() && n->beta.size() > 0, "newsvendor: beta and eta must have equal nonzero length");
        require(n->beta.minCoeff() >= 0.0 && n->eta.minCoeff() >= 0.0, "newsvendor: coefficients must be nonnegative");
    } else if (auto c = std::get_if<CustomLoss>(&loss)) {
        require(bool(c->f), "custom loss: empty callable");
        if (!c->convex) throw UnsupportedError("custom loss is not convex in the action");
    }
}

/// Losses f(a, X_s) for every row of the cloud.
inline Eigen::VectorXd loss_values(const LossFunction& loss, const Eigen::VectorXd& a, const Eigen::MatrixXd& cloud) {
    return std::visit(detail::overloaded{
                          [&](const LinearLoss&) -> Eigen::VectorXd { return cloud * a; },
                          [&](const NewsvendorLoss& n) -> Eigen::VectorXd {
                              Eigen::VectorXd out(cloud.rows());
                              for (Eigen::Index s = 0; s < cloud.rows(); ++s) {
                                  double v = 0.0;
                                  for (Eigen::Index i = 0; i < a.size(); ++i) {
                                      double diff = a[i] - cloud(s, i);
                                      v += diff > 0.0 ? n.beta[i] * diff : -n.eta[i] * diff;
                                  }
                                  out[s] = v;
                              }
                              return out;
                          },
                          [&](const CustomLoss& c) -> Eigen::VectorXd {
                              Eigen::VectorXd out(cloud.rows());
                              for (Eigen::Index s = 0; s < cloud.rows(); ++s) out[s] = c.f(a, cloud.row(s).transpose(), nullptr);
                              return out;
                          },
                      },
                      loss);
}

/// g += sum_s q_s * (subgradient of f(., X_s) at a).
inline void add_loss_subgradient(const LossFunction& loss, const Eigen::VectorXd& a, const Eigen::MatrixXd& cloud,
                                 const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    std::visit(detail::overloaded{
                   [&](const LinearLoss&) { g += cloud.transpose() * q; },
                   [&](const NewsvendorLoss& n) {
                       for (Eigen::Index s = 0; s < cloud.rows(); ++s) {
                           if (q[s] == 0.0) continue;
                           for (Eigen::Index i = 0; i < a.size(); ++i) g[i] += q[s] * (a[i] >= cloud(s, i) ? n.beta[i] : -n.eta[i]);
                       }
                   },
                   [&](const CustomLoss& c) {
                       Eigen::VectorXd gs(a.size());
                       for (Eigen::Index s = 0; s < cloud.rows(); ++s) {
                           if (q[s] == 0.0) continue;
                           gs.setZero();
                           c.f(a, cloud.row(s).transpose(), &gs);
                           g += q[s] * gs;
                       }
                   },
               },
               loss);
}

// ---------------------------------------------------------------------------
// scenario sets and actions

/// Equally weighted multivariate clouds F_1..F_n, one observation per row.
struct FiniteCdfs {
    std::vector<Eigen::MatrixXd> clouds;
};

/// theta = theta0 + eta with lower <= eta <= upper and sum eta = 0, over fixed support points.
struct BoxProbability {
    Eigen::MatrixXd points;
    Eigen::VectorXd theta0, lower, upper;
};

using ScenarioSet = std::variant<FiniteCdfs, BoxProbability>;

/// N i.i.d. draws from N(mu, Sigma).
inline Eigen::MatrixXd gaussian_cloud(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, Eigen::Index N, std::mt19937_64& rng) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) throw DomainError("gaussian cloud: covariance must be positive definite");
    Eigen::MatrixXd L = llt.matrixL();
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd out(N, mu.size());
    Eigen::VectorXd e(mu.size());
    for (Eigen::Index s = 0; s < N; ++s) {
        for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = z(rng);
        out.row(s) = (mu + L * e).transpose();
    }
    return out;
}

struct BoxBounds {
    Eigen::VectorXd lo, hi;  // bounds on theta after clipping to theta >= 0
};

inline BoxBounds box_bounds(const BoxProbability& b) {
    const auto N = b.points.rows();
    require(N > 0 && b.theta0.size() == N && b.lower.size() == N && b.upper.size() == N, "box: dimension mismatch");
    require(b.theta0.minCoeff() >= 0.0 && std::abs(b.theta0.sum() - 1.0) <= 1e-12, "box: theta0 must lie in the simplex");
    BoxBounds out{(b.theta0 + b.lower).cwiseMax(0.0), (b.theta0 + b.upper).cwiseMin(1.0)};
    if ((out.hi - out.lo).minCoeff() < 0.0 || out.lo.sum() > 1.0 + 1e-12 || out.hi.sum() < 1.0 - 1e-12)
        throw InfeasibleError("box: no admissible perturbation sums to zero within the bounds");
    return out;
}

/// sup of theta^T u over the box set; optionally returns the maximizer.
inline double box_worst_expectation(const Eigen::VectorXd& u, const BoxProbability& box, Eigen::VectorXd* theta_out = nullptr) {
    auto bb = box_bounds(box);
    require(u.size() == bb.lo.size(), "box: u has wrong length");
    Eigen::VectorXd theta = bb.lo;
    double left = 1.0 - bb.lo.sum();
    std::vector<Eigen::Index> idx(u.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return u[a] > u[b]; });
    for (auto s : idx) {
        if (left <= 0.0) break;
        double add = std::min(bb.hi[s] - bb.lo[s], left);
        theta[s] += add;
        left -= add;
    }
    if (theta_out) *theta_out = theta;
    return theta.dot(u);
}

struct ReturnTarget {
    Eigen::VectorXd mu;  // expected losses
    double r0 = 0.0;
    double m = 250.0;
};

/// Probability simplex in R^d, optionally with w^T mu <= -r0/m.
struct SimplexActions {
    Eigen::Index d = 1;
    std::optional<ReturnTarget> target;
};

struct BoxActions {
    Eigen::VectorXd lo, hi;
};

using ActionSet = std::variant<SimplexActions, BoxActions>;

inline Eigen::Index action_dim(const ActionSet& A) {
    return std::visit(detail::overloaded{[](const SimplexActions& s) { return s.d; }, [](const BoxActions& b) { return b.lo.size(); }}, A);
}

enum class Approach { WR, MA1, MA2, SAA };

inline std::string to_string(Approach a) {
    switch (a) {
    case Approach::WR: return "wr";
    case Approach::MA1: return "ma1";
    case Approach::MA2: return "ma2";
    case Approach::SAA: return "saa";
    }
    return "?";
}

inline Approach parse_approach(const std::string& s) {
    if (s == "wr") return Approach::WR;
    if (s == "ma1") return Approach::MA1;
    if (s == "ma2") return Approach::MA2;
    if (s == "saa") return Approach::SAA;
    throw DomainError("unknown approach '" + s + "'");
}

struct RobustProgram {
    ActionSet actions;
    LossFunction loss;
    ScenarioSet scenarios;
    RiskMeasure measure = ES{0.0};
    Approach approach = Approach::MA2;
    SolverConfig solver;
};

struct ProgramResult {
    double objective = INFINITY;
    Eigen::VectorXd action;
    std::vector<double> thresholds;  // WR: per (i, j, w) in that order; MA2: per (j, w)
    std::size_t iterations = 0;
    double residual = INFINITY;
    bool converged = false;
};

/// Minimizes F(a, y) over a in the action set and y in the box [ylo, yhi].
inline SolveResult solve_joint(const ActionSet& A, const Eigen::VectorXd& ylo, const Eigen::VectorXd& yhi,
                               const std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::VectorXd&)>& F,
                               const SolverConfig& cfg) {
    const Eigen::Index m = ylo.size();
    const bool simplex = std::holds_alternative<SimplexActions>(A);
    const Eigen::Index d = action_dim(A);
    const Eigen::Index n = simplex ? d - 1 : d;
    require(d >= 1, "action set must have dimension >= 1");

    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    auto add = [&](Eigen::RowVectorXd r, double h) {
        rows.push_back(std::move(r));
        rhs.push_back(h);
    };
    Eigen::VectorXd c(n + m);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n + m, n + m);
    if (simplex) {
        const auto& S = std::get<SimplexActions>(A);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + m);
            r[i] = -1.0;
            add(r, 0.0);
        }
        if (n > 0) {
            Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + m);
            r.head(n).setOnes();
            add(r, 1.0);
        }
        if (S.target) {
            const auto& t = *S.target;
            require(t.mu.size() == d, "return target: mu has wrong length");
            double bound = -t.r0 / t.m;
            if (t.mu.minCoeff() > bound)
                throw InfeasibleError("return target w^T mu <= -r0/m is unattainable: best expected loss " + std::to_string(t.mu.minCoeff()) +
                                      " exceeds " + std::to_string(bound));
            Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + m);
            for (Eigen::Index i = 0; i < n; ++i) r[i] = t.mu[i] - t.mu[n];
            if (n > 0)
                add(r, bound - t.mu[n]);
            else if (t.mu[0] > bound)
                throw InfeasibleError("return target unattainable");
        }
        c.head(n).setConstant(1.0 / double(d));
        P.topLeftCorner(n, n).setIdentity();
    } else {
        const auto& B = std::get<BoxActions>(A);
        require(B.hi.size() == d && (B.hi - B.lo).minCoeff() >= 0.0, "box actions: invalid bounds");
        for (Eigen::Index i = 0; i < d; ++i) {
            Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + m);
            r[i] = 1.0;
            add(r, B.hi[i]);
            r[i] = -1.0;
            add(r, -B.lo[i]);
        }
        c.head(n) = 0.5 * (B.lo + B.hi);
        Eigen::VectorXd half = (0.5 * (B.hi - B.lo)).cwiseMax(1e-12);
        P.topLeftCorner(n, n).diagonal() = double(n) * half.array().square();
    }
    if (m > 0) {
        for (Eigen::Index i = 0; i < m; ++i) {
            Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n + m);
            r[n + i] = 1.0;
            add(r, yhi[i]);
            r[n + i] = -1.0;
            add(r, -ylo[i]);
        }
        c.tail(m) = 0.5 * (ylo + yhi);
        Eigen::VectorXd half = (0.5 * (yhi - ylo)).cwiseMax(1e-12);
        P.bottomRightCorner(m, m).diagonal() = double(m) * half.array().square();
        if (n > 0) P *= 2.0;
    }
    Polyhedron poly;
    poly.G.resize(Eigen::Index(rows.size()), n + m);
    poly.h.resize(Eigen::Index(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        poly.G.row(Eigen::Index(r)) = rows[r];
        poly.h[Eigen::Index(r)] = rhs[r];
    }

    auto lift = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd a(d);
        if (simplex) {
            a.head(n) = u.head(n);
            a[n] = 1.0 - u.head(n).sum();
        } else {
            a = u.head(n);
        }
        return a;
    };
    ConvexObjective f = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
        Eigen::VectorXd ga = Eigen::VectorXd::Zero(d), gy = Eigen::VectorXd::Zero(m);
        double v = F(lift(u), u.tail(m), ga, gy);
        if (simplex)
            g.head(n) = ga.head(n).array() - ga[n];
        else
            g.head(n) = ga;
        g.tail(m) = gy;
        return v;
    };
    auto r = ellipsoid_minimize(f, poly, c, P, cfg);
    Eigen::VectorXd a = lift(r.x);
    if (simplex) {
        a = a.cwiseMax(0.0);
        a /= a.sum();
    }
    Eigen::VectorXd y = r.x.tail(m);
    r.x.resize(d + m);
    r.x << a, y;
    return r;
}

// ---------------------------------------------------------------------------
// measure plumbing

inline Kusuoka as_kusuoka(const RiskMeasure& r) {
    if (auto e = r.as<ES>()) return Kusuoka{{KusuokaScenario{{1.0}, {e->alpha}}}};
    if (auto k = r.as<Kusuoka>()) return *k;
    throw UnsupportedError("robust programs need an ES or Kusuoka measure, got " + describe(r));
}

namespace detail {

/// Distinct ES levels of a Kusuoka measure (capped), with index map per (w, j).
struct LevelTable {
    std::vector<double> levels;
    std::vector<std::vector<std::size_t>> index;  // index[w][j]
};

inline LevelTable level_table(const Kusuoka& k) {
    LevelTable t;
    std::map<double, std::size_t> pos;
    for (auto& s : k.scenarios) {
        std::vector<std::size_t> row;
        for (double a : s.levels) {
            double c = std::min(a, kLevelCap);
            auto [it, fresh] = pos.emplace(c, t.levels.size());
            if (fresh) t.levels.push_back(c);
            row.push_back(it->second);
        }
        t.index.push_back(std::move(row));
    }
    return t;
}

/// ES_alpha of a weighted sample; q receives the tail weights (a subgradient in L)
/// and var the threshold attaining the dual minimum.
inline double weighted_es(const Eigen::VectorXd& L, const Eigen::VectorXd& theta, double alpha, const std::vector<Eigen::Index>& desc,
                          Eigen::VectorXd* q, double* var) {
    double left = 1.0 - alpha, value = 0.0, x = L[desc.front()];
    if (q) q->setZero(L.size());
    for (auto s : desc) {
        if (theta[s] <= 0.0) continue;
        double take = std::min(theta[s], left);
        value += take * L[s];
        if (q) (*q)[s] = take / (1.0 - alpha);
        left -= take;
        x = L[s];
        if (left <= 1e-15) break;
    }
    if (var) *var = x;
    return value / (1.0 - alpha);
}

inline std::vector<Eigen::Index> descending(const Eigen::VectorXd& L) {
    std::vector<Eigen::Index> idx(L.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return L[a] > L[b]; });
    return idx;
}

/// x + mean((L - x)_+) / (1 - alpha) on an ascending sorted sample with suffix sums.
struct SortedCloud {
    std::vector<double> v;    // ascending
    std::vector<double> suf;  // suf[k] = sum of v[k..]

    explicit SortedCloud(const Eigen::VectorXd& L) : v(L.data(), L.data() + L.size()), suf(L.size() + 1, 0.0) {
        std::sort(v.begin(), v.end());
        for (std::size_t k = v.size(); k-- > 0;) suf[k] = suf[k + 1] + v[k];
    }
    std::size_t count_above(double x) const { return std::size_t(v.end() - std::upper_bound(v.begin(), v.end(), x)); }
    std::size_t count_at_least(double x) const { return std::size_t(v.end() - std::lower_bound(v.begin(), v.end(), x)); }
    double g(double x, double alpha) const {
        std::size_t k = count_above(x);
        double tail = suf[v.size() - k] - double(k) * x;
        return x + tail / (double(v.size()) * (1.0 - alpha));
    }
};

} // namespace detail

// ---------------------------------------------------------------------------
// objectives at a fixed action

/// WR value at action a with a subgradient in a; thresholds per (i, j, w).
inline double wr_objective(const RobustProgram& prog, const Eigen::VectorXd& a, Eigen::VectorXd* grad = nullptr,
                           std::vector<double>* thresholds = nullptr);
/// MA2 value at action a with a subgradient in a; thresholds per (j, w).
inline double ma2_objective(const RobustProgram& prog, const Eigen::VectorXd& a, Eigen::VectorXd* grad = nullptr,
                            std::vector<double>* thresholds = nullptr);

namespace detail {

inline double finite_wr(const RobustProgram& prog, const FiniteCdfs& F, const Eigen::VectorXd& a, Eigen::VectorXd* grad,
                        std::vector<double>* thresholds) {
    auto K = as_kusuoka(prog.measure);
    auto T = level_table(K);
    double best = -INFINITY;
    std::size_t bi = 0, bw = 0;
    std::vector<Eigen::VectorXd> losses;
    std::vector<std::vector<Eigen::Index>> orders;
    std::vector<std::vector<double>> es_vals(F.clouds.size()), vars(F.clouds.size());
    for (std::size_t i = 0; i < F.clouds.size(); ++i) {
        losses.push_back(loss_values(prog.loss, a, F.clouds[i]));
        orders.push_back(descending(losses.back()));
        Eigen::VectorXd theta = Eigen::VectorXd::Constant(losses[i].size(), 1.0 / double(losses[i].size()));
        for (double lv : T.levels) {
            double var;
            es_vals[i].push_back(weighted_es(losses[i], theta, lv, orders[i], nullptr, &var));
            vars[i].push_back(var);
        }
        for (std::size_t w = 0; w < K.scenarios.size(); ++w) {
            double v = 0.0;
            for (std::size_t j = 0; j < T.index[w].size(); ++j) v += K.scenarios[w].weights[j] * es_vals[i][T.index[w][j]];
            if (v > best) best = v, bi = i, bw = w;
        }
    }
    if (thresholds) {
        thresholds->clear();
        for (std::size_t i = 0; i < F.clouds.size(); ++i)
            for (std::size_t w = 0; w < K.scenarios.size(); ++w)
                for (std::size_t j = 0; j < T.index[w].size(); ++j) thresholds->push_back(vars[i][T.index[w][j]]);
    }
    if (grad) {
        const auto& L = losses[bi];
        Eigen::VectorXd theta = Eigen::VectorXd::Constant(L.size(), 1.0 / double(L.size())), q(L.size()), tot = Eigen::VectorXd::Zero(L.size());
        for (std::size_t j = 0; j < T.index[bw].size(); ++j) {
            double p = K.scenarios[bw].weights[j];
            if (p == 0.0) continue;
            weighted_es(L, theta, T.levels[T.index[bw][j]], orders[bi], &q, nullptr);
            tot += p * q;
        }
        grad->setZero(a.size());
        add_loss_subgradient(prog.loss, a, F.clouds[bi], tot, *grad);
    }
    return best;
}

inline double finite_ma2(const RobustProgram& prog, const FiniteCdfs& F, const Eigen::VectorXd& a, Eigen::VectorXd* grad,
                         std::vector<double>* thresholds) {
    auto K = as_kusuoka(prog.measure);
    auto T = level_table(K);
    const std::size_t n = F.clouds.size();
    std::vector<Eigen::VectorXd> losses;
    std::vector<SortedCloud> sc;
    std::vector<double> cand;
    for (auto& c : F.clouds) {
        losses.push_back(loss_values(prog.loss, a, c));
        sc.emplace_back(losses.back());
        cand.insert(cand.end(), sc.back().v.begin(), sc.back().v.end());
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    std::vector<double> phi(T.levels.size()), xstar(T.levels.size());
    std::vector<Eigen::VectorXd> phi_grad(T.levels.size());
    for (std::size_t l = 0; l < T.levels.size(); ++l) {
        double al = T.levels[l];
        auto h = [&](double x) {
            double m = -INFINITY;
            for (auto& s : sc) m = std::max(m, s.g(x, al));
            return m;
        };
        std::size_t lo = 0, hi = cand.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (h(cand[mid]) <= h(cand[mid + 1]))
                hi = mid;
            else
                lo = mid + 1;
        }
        double x = cand[lo], hv = h(x);
        // the envelope also kinks where two clouds cross; search both adjacent pieces
        for (int side = -1; side <= 1; side += 2) {
            if ((side < 0 && lo == 0) || (side > 0 && lo + 1 >= cand.size())) continue;
            double u = std::min(cand[lo], cand[lo + side]), v = std::max(cand[lo], cand[lo + side]), mid = 0.5 * (u + v);
            std::vector<double> sl(n), ic(n);
            for (std::size_t i = 0; i < n; ++i) {
                sl[i] = 1.0 - double(sc[i].count_above(mid)) / (double(sc[i].v.size()) * (1.0 - al));
                ic[i] = sc[i].g(mid, al) - sl[i] * mid;
            }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = i + 1; k < n; ++k) {
                    if (sl[i] == sl[k]) continue;
                    double xc = (ic[k] - ic[i]) / (sl[i] - sl[k]);
                    if (!(xc > u && xc < v)) continue;
                    double hc = h(xc);
                    if (hc < hv) hv = hc, x = xc;
                }
        }
        phi[l] = hv;
        xstar[l] = x;
        if (!grad) continue;
        // combine a right and a left one-sided subgradient so the threshold component vanishes
        double r = -INFINITY, lft = INFINITY;
        std::size_t ir = 0, il = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (sc[i].g(x, al) < hv - 1e-12 * (1.0 + std::abs(hv))) continue;
            double N = double(sc[i].v.size());
            double ri = 1.0 - double(sc[i].count_above(x)) / (N * (1.0 - al));
            double li = 1.0 - double(sc[i].count_at_least(x)) / (N * (1.0 - al));
            if (ri > r) r = ri, ir = i;
            if (li < lft) lft = li, il = i;
        }
        double lam = (r - lft) > 0.0 ? std::clamp(-lft / (r - lft), 0.0, 1.0) : 1.0;
        Eigen::VectorXd g = Eigen::VectorXd::Zero(a.size());
        auto side = [&](std::size_t i, bool strict, double wgt) {
            if (wgt == 0.0) return;
            const auto& L = losses[i];
            double N = double(L.size());
            Eigen::VectorXd q(L.size());
            for (Eigen::Index s = 0; s < L.size(); ++s) q[s] = (strict ? L[s] > x : L[s] >= x) ? wgt / (N * (1.0 - al)) : 0.0;
            add_loss_subgradient(prog.loss, a, F.clouds[i], q, g);
        };
        side(ir, true, lam);
        side(il, false, 1.0 - lam);
        phi_grad[l] = g;
    }

    double best = -INFINITY;
    std::size_t bw = 0;
    for (std::size_t w = 0; w < K.scenarios.size(); ++w) {
        double v = 0.0;
        for (std::size_t j = 0; j < T.index[w].size(); ++j) v += K.scenarios[w].weights[j] * phi[T.index[w][j]];
        if (v > best) best = v, bw = w;
    }
    if (thresholds) {
        thresholds->clear();
        for (std::size_t w = 0; w < K.scenarios.size(); ++w)
            for (std::size_t j = 0; j < T.index[w].size(); ++j) thresholds->push_back(xstar[T.index[w][j]]);
    }
    if (grad) {
        grad->setZero(a.size());
        for (std::size_t j = 0; j < T.index[bw].size(); ++j) *grad += K.scenarios[bw].weights[j] * phi_grad[T.index[bw][j]];
    }
    return best;
}

/// max over theta in the box set of sum_j p_j ES_{alpha_j}(L; theta), by the ellipsoid method in theta.
inline double box_worst_kusuoka_mix(const Eigen::VectorXd& L, const BoxProbability& box, const std::vector<double>& p,
                                    const std::vector<double>& alphas, Eigen::VectorXd* theta_out) {
    auto bb = box_bounds(box);
    const Eigen::Index N = L.size();
    auto desc = descending(L);
    auto value = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* super) {
        double v = 0.0;
        if (super) super->setZero(N);
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (p[j] == 0.0) continue;
            double var;
            v += p[j] * weighted_es(L, theta, alphas[j], desc, nullptr, &var);
            if (super)
                for (Eigen::Index s = 0; s < N; ++s) (*super)[s] += p[j] * std::max(L[s] - var, 0.0) / (1.0 - alphas[j]);
        }
        return v;
    };
    std::vector<Eigen::Index> free;
    double fixed_mass = 0.0;
    for (Eigen::Index s = 0; s < N; ++s) {
        if (bb.hi[s] - bb.lo[s] > 1e-14)
            free.push_back(s);
        else
            fixed_mass += bb.lo[s];
    }
    Eigen::VectorXd theta = bb.lo;
    double rem = 1.0 - fixed_mass;
    double lo_sum = 0.0, hi_sum = 0.0;
    for (auto s : free) lo_sum += bb.lo[s], hi_sum += bb.hi[s];
    if (free.size() <= 1 || rem <= lo_sum + 1e-14 || rem >= hi_sum - 1e-14) {
        // the admissible set is a single point
        if (!free.empty()) {
            double t = (hi_sum > lo_sum) ? std::clamp((rem - lo_sum) / (hi_sum - lo_sum), 0.0, 1.0) : 0.0;
            for (auto s : free) theta[s] = bb.lo[s] + t * (bb.hi[s] - bb.lo[s]);
        }
        if (theta_out) *theta_out = theta;
        return value(theta, nullptr);
    }
    const Eigen::Index k = Eigen::Index(free.size()) - 1;
    auto lift = [&](const Eigen::VectorXd& t) {
        Eigen::VectorXd th = bb.lo;
        for (Eigen::Index i = 0; i < k; ++i) th[free[i]] = t[i];
        th[free[k]] = rem - t.sum();
        return th;
    };
    Polyhedron poly;
    poly.G = Eigen::MatrixXd::Zero(2 * k + 2, k);
    poly.h.resize(2 * k + 2);
    Eigen::VectorXd c(k), half(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        auto s = free[i];
        poly.G(2 * i, i) = 1.0;
        poly.h[2 * i] = bb.hi[s];
        poly.G(2 * i + 1, i) = -1.0;
        poly.h[2 * i + 1] = -bb.lo[s];
        c[i] = 0.5 * (bb.lo[s] + bb.hi[s]);
        half[i] = 0.5 * (bb.hi[s] - bb.lo[s]);
    }
    // last free coordinate within its bounds
    poly.G.row(2 * k).setOnes();
    poly.h[2 * k] = rem - bb.lo[free[k]];
    poly.G.row(2 * k + 1).setConstant(-1.0);
    poly.h[2 * k + 1] = bb.hi[free[k]] - rem;
    Eigen::MatrixXd P = (double(k) * half.cwiseMax(1e-12).array().square()).matrix().asDiagonal();
    ConvexObjective f = [&](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
        Eigen::VectorXd sup(N);
        double v = value(lift(t), &sup);
        for (Eigen::Index i = 0; i < k; ++i) g[i] = -(sup[free[i]] - sup[free[k]]);
        return -v;
    };
    SolverConfig cfg;
    cfg.tol = 1e-12;
    auto r = ellipsoid_minimize(f, poly, c, P, cfg);
    Eigen::VectorXd th = lift(r.x);
    double v = value(th, nullptr);
    if (theta_out) *theta_out = th;
    return v;
}

inline double box_wr(const RobustProgram& prog, const BoxProbability& box, const Eigen::VectorXd& a, Eigen::VectorXd* grad) {
    auto K = as_kusuoka(prog.measure);
    Eigen::VectorXd L = loss_values(prog.loss, a, box.points);
    auto desc = descending(L);
    double best = -INFINITY;
    Eigen::VectorXd best_theta;
    std::size_t bw = 0;
    for (std::size_t w = 0; w < K.scenarios.size(); ++w) {
        std::vector<double> al;
        for (double x : K.scenarios[w].levels) al.push_back(std::min(x, kLevelCap));
        Eigen::VectorXd th;
        double v = box_worst_kusuoka_mix(L, box, K.scenarios[w].weights, al, &th);
        if (v > best) best = v, best_theta = th, bw = w;
    }
    if (grad) {
        Eigen::VectorXd tot = Eigen::VectorXd::Zero(L.size()), q(L.size());
        for (std::size_t j = 0; j < K.scenarios[bw].weights.size(); ++j) {
            weighted_es(L, best_theta, std::min(K.scenarios[bw].levels[j], kLevelCap), desc, &q, nullptr);
            tot += K.scenarios[bw].weights[j] * q;
        }
        grad->setZero(a.size());
        add_loss_subgradient(prog.loss, a, box.points, tot, *grad);
    }
    return best;
}

inline double box_ma2(const RobustProgram& prog, const BoxProbability& box, const Eigen::VectorXd& a, Eigen::VectorXd* grad,
                      std::vector<double>* thresholds) {
    auto K = as_kusuoka(prog.measure);
    auto T = level_table(K);
    Eigen::VectorXd L = loss_values(prog.loss, a, box.points);
    std::vector<double> cand(L.data(), L.data() + L.size());
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    std::vector<double> phi(T.levels.size()), xstar(T.levels.size());
    std::vector<Eigen::VectorXd> phi_grad(T.levels.size());
    for (std::size_t l = 0; l < T.levels.size(); ++l) {
        double al = T.levels[l];
        auto H = [&](double x, Eigen::VectorXd* th) {
            return x + box_worst_expectation((L.array() - x).max(0.0).matrix(), box, th) / (1.0 - al);
        };
        std::size_t lo = 0, hi = cand.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (H(cand[mid], nullptr) <= H(cand[mid + 1], nullptr))
                hi = mid;
            else
                lo = mid + 1;
        }
        double x = cand[lo];
        phi[l] = H(x, nullptr);
        xstar[l] = x;
        if (!grad) continue;
        // H is linear between breakpoints; a maximizer inside each adjacent piece is optimal at x
        double xr = lo + 1 < cand.size() ? 0.5 * (x + cand[lo + 1]) : x + 1.0;
        double xl = lo > 0 ? 0.5 * (x + cand[lo - 1]) : x - 1.0;
        Eigen::VectorXd thr, thl;
        H(xr, &thr);
        H(xl, &thl);
        double mr = 0.0, ml = 0.0;
        for (Eigen::Index s = 0; s < L.size(); ++s) {
            if (L[s] > x) mr += thr[s];
            if (L[s] >= x) ml += thl[s];
        }
        double r = 1.0 - mr / (1.0 - al), lft = 1.0 - ml / (1.0 - al);
        double lam = (r - lft) > 0.0 ? std::clamp(-lft / (r - lft), 0.0, 1.0) : 1.0;
        Eigen::VectorXd q(L.size());
        for (Eigen::Index s = 0; s < L.size(); ++s)
            q[s] = (lam * (L[s] > x ? thr[s] : 0.0) + (1.0 - lam) * (L[s] >= x ? thl[s] : 0.0)) / (1.0 - al);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(a.size());
        add_loss_subgradient(prog.loss, a, box.points, q, g);
        phi_grad[l] = g;
    }
    double best = -INFINITY;
    std::size_t bw = 0;
    for (std::size_t w = 0; w < K.scenarios.size(); ++w) {
        double v = 0.0;
        for (std::size_t j = 0; j < T.index[w].size(); ++j) v += K.scenarios[w].weights[j] * phi[T.index[w][j]];
        if (v > best) best = v, bw = w;
    }
    if (thresholds) {
        thresholds->clear();
        for (std::size_t w = 0; w < K.scenarios.size(); ++w)
            for (std::size_t j = 0; j < T.index[w].size(); ++j) thresholds->push_back(xstar[T.index[w][j]]);
    }
    if (grad) {
        grad->setZero(a.size());
        for (std::size_t j = 0; j < T.index[bw].size(); ++j) *grad += K.scenarios[bw].weights[j] * phi_grad[T.index[bw][j]];
    }
    return best;
}

/// Spectral weights of the empirical quantile function: value = sum_r w_r L_(r) over ascending order.
inline std::vector<double> spectral_weights(const RiskMeasure& r, std::size_t N) {
    std::vector<double> w(N, 0.0);
    auto es_into = [&](double alpha, double scale) {
        alpha = std::min(alpha, kLevelCap);
        for (std::size_t k = 0; k < N; ++k) {
            double lo = std::max(double(k) / double(N), alpha), hi = double(k + 1) / double(N);
            if (hi > lo) w[k] += scale * (hi - lo) / (1.0 - alpha);
        }
    };
    if (auto e = r.as<ES>())
        es_into(e->alpha, 1.0);
    else if (auto p = r.as<PD>()) {
        for (std::size_t k = 0; k < N; ++k) w[k] = std::pow(double(k + 1) / double(N), p->k) - std::pow(double(k) / double(N), p->k);
    } else
        throw UnsupportedError("SAA supports ES, PD and Kusuoka measures, got " + describe(r));
    return w;
}

} // namespace detail

inline double wr_objective(const RobustProgram& prog, const Eigen::VectorXd& a, Eigen::VectorXd* grad, std::vector<double>* thresholds) {
    if (auto F = std::get_if<FiniteCdfs>(&prog.scenarios)) return detail::finite_wr(prog, *F, a, grad, thresholds);
    if (thresholds) thresholds->clear();
    return detail::box_wr(prog, std::get<BoxProbability>(prog.scenarios), a, grad);
}

inline double ma2_objective(const RobustProgram& prog, const Eigen::VectorXd& a, Eigen::VectorXd* grad, std::vector<double>* thresholds) {
    if (auto F = std::get_if<FiniteCdfs>(&prog.scenarios)) return detail::finite_ma2(prog, *F, a, grad, thresholds);
    return detail::box_ma2(prog, std::get<BoxProbability>(prog.scenarios), a, grad, thresholds);
}

/// Empirical risk of the single cloud at action a.
inline double saa_objective(const RobustProgram& prog, const Eigen::VectorXd& a, Eigen::VectorXd* grad = nullptr) {
    auto F = std::get_if<FiniteCdfs>(&prog.scenarios);
    if (!F || F->clouds.size() != 1) throw DomainError("SAA needs exactly one empirical cloud");
    const auto& cloud = F->clouds.front();
    Eigen::VectorXd L = loss_values(prog.loss, a, cloud);
    const auto N = std::size_t(L.size());
    std::vector<Eigen::Index> asc(N);
    std::iota(asc.begin(), asc.end(), 0);
    std::stable_sort(asc.begin(), asc.end(), [&](auto x, auto y) { return L[x] < L[y]; });
    Eigen::VectorXd q = Eigen::VectorXd::Zero(L.size());
    double v;
    if (auto k = prog.measure.as<Kusuoka>()) {
        v = -INFINITY;
        for (auto& s : k->scenarios) {
            Eigen::VectorXd qs = Eigen::VectorXd::Zero(L.size());
            double vs = 0.0;
            for (std::size_t j = 0; j < s.weights.size(); ++j) {
                auto w = detail::spectral_weights(ES{s.levels[j]}, N);
                for (std::size_t r = 0; r < N; ++r) {
                    vs += s.weights[j] * w[r] * L[asc[r]];
                    qs[asc[r]] += s.weights[j] * w[r];
                }
            }
            if (vs > v) v = vs, q = qs;
        }
    } else {
        auto w = detail::spectral_weights(prog.measure, N);
        v = 0.0;
        for (std::size_t r = 0; r < N; ++r) {
            v += w[r] * L[asc[r]];
            q[asc[r]] = w[r];
        }
    }
    if (grad) {
        grad->setZero(a.size());
        add_loss_subgradient(prog.loss, a, cloud, q, *grad);
    }
    return v;
}

// ---------------------------------------------------------------------------
// programs

namespace detail {

inline void check_program(const RobustProgram& prog) {
    validate(prog.loss);
    if (prog.approach == Approach::MA2 && !consistent_with(prog.measure, Order::SSD))
        throw UnsupportedError("MA2 programs need an SSD-consistent measure, got " + describe(prog.measure));
    if (auto F = std::get_if<FiniteCdfs>(&prog.scenarios)) {
        require(!F->clouds.empty(), "program: no scenarios");
        for (auto& c : F->clouds) require(c.rows() > 0, "program: empty cloud");
    }
}

template <class Obj>
ProgramResult run_program(const RobustProgram& prog, Obj&& obj) {
    detail::check_program(prog);
    auto F = [&](const Eigen::VectorXd& a, const Eigen::VectorXd&, Eigen::VectorXd& ga, Eigen::VectorXd&) { return obj(a, &ga, nullptr); };
    auto r = solve_joint(prog.actions, Eigen::VectorXd(), Eigen::VectorXd(), F, prog.solver);
    ProgramResult out;
    out.action = r.x;
    out.objective = obj(out.action, nullptr, &out.thresholds);
    out.iterations = r.iterations;
    out.residual = r.residual;
    out.converged = r.converged;
    return out;
}

} // namespace detail

/// min over actions of the worst case over scenarios, per-scenario thresholds.
inline ProgramResult wr_program(const RobustProgram& prog) {
    return detail::run_program(prog, [&](const Eigen::VectorXd& a, Eigen::VectorXd* g, std::vector<double>* t) { return wr_objective(prog, a, g, t); });
}

/// min over actions of the risk of the SSD aggregate, thresholds shared across scenarios.
inline ProgramResult ma2_program(const RobustProgram& prog) {
    return detail::run_program(prog, [&](const Eigen::VectorXd& a, Eigen::VectorXd* g, std::vector<double>* t) { return ma2_objective(prog, a, g, t); });
}

inline ProgramResult saa_program(const RobustProgram& prog) {
    return detail::run_program(prog, [&](const Eigen::VectorXd& a, Eigen::VectorXd* g, std::vector<double>* t) {
        if (t) t->clear();
        return saa_objective(prog, a, g);
    });
}

inline ProgramResult solve_program(const RobustProgram& prog) {
    switch (prog.approach) {
    case Approach::WR: return wr_program(prog);
    case Approach::MA2: return ma2_program(prog);
    case Approach::SAA: return saa_program(prog);
    case Approach::MA1: break;
    }
    throw UnsupportedError("finite-scenario programs support wr, ma2 and saa");
}

/// Induced loss laws {F_{f(a, X)} : F in the set} at action a.
inline DistributionList induced_losses(const RobustProgram& prog, const Eigen::VectorXd& a) {
    auto F = std::get_if<FiniteCdfs>(&prog.scenarios);
    if (!F) throw UnsupportedError("induced losses need finite clouds");
    DistributionList out;
    for (auto& c : F->clouds) {
        Eigen::VectorXd L = loss_values(prog.loss, a, c);
        out.push_back(uniform_atoms(std::vector<double>(L.data(), L.data() + L.size())));
    }
    return out;
}

// ---------------------------------------------------------------------------
// portfolio programs

struct PortfolioResult {
    double objective = INFINITY;
    Eigen::VectorXd weights;
    std::size_t iterations = 0;
    double residual = INFINITY;
    bool converged = false;
};

/// min w^T mu + c_sd sqrt(w^T Sigma w) + c_norm ||w||_b over the simplex with an optional return target.
inline PortfolioResult minimize_mean_sd(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, double c_sd, double c_norm, double b,
                                        const std::optional<ReturnTarget>& target, const SolverConfig& cfg = {}) {
    const Eigen::Index d = mu.size();
    require(sigma.rows() == d && sigma.cols() == d, "portfolio: covariance has wrong shape");
    require(std::isfinite(c_sd) && std::isfinite(c_norm), "portfolio: coefficients must be finite");
    ActionSet A = SimplexActions{d, target};
    auto F = [&](const Eigen::VectorXd& w, const Eigen::VectorXd&, Eigen::VectorXd& g, Eigen::VectorXd&) {
        Eigen::VectorXd Sw = sigma * w;
        double var = std::max(w.dot(Sw), 0.0), sd = std::sqrt(var);
        double v = w.dot(mu) + c_sd * sd;
        g = mu;
        if (sd > 0.0) g += c_sd * Sw / sd;
        if (c_norm != 0.0) {
            double nb = lp_norm(w, b);
            v += c_norm * nb;
            if (nb > 0.0) {
                if (std::isinf(b)) {
                    Eigen::Index k;
                    w.cwiseAbs().maxCoeff(&k);
                    g[k] += c_norm * (w[k] >= 0.0 ? 1.0 : -1.0);
                } else if (b == 1.0) {
                    for (Eigen::Index i = 0; i < d; ++i) g[i] += c_norm * (w[i] >= 0.0 ? 1.0 : -1.0);
                } else {
                    for (Eigen::Index i = 0; i < d; ++i)
                        g[i] += c_norm * std::copysign(std::pow(std::abs(w[i]) / nb, b - 1.0), w[i]);
                }
            }
        }
        return v;
    };
    auto r = solve_joint(A, Eigen::VectorXd(), Eigen::VectorXd(), F, cfg);
    PortfolioResult out;
    out.weights = r.x;
    Eigen::VectorXd g(d), e0, e1;
    out.objective = F(out.weights, e0, g, e1);
    out.iterations = r.iterations;
    out.residual = r.residual;
    out.converged = r.converged;
    return out;
}

struct WassersteinPortfolio {
    Elliptical benchmark;  // fitted mean (losses) and covariance
    double eps = 0.0;
    double a = 2.0;  // norm on the asset space
    double p = 2.0;  // Wasserstein order
    std::optional<ReturnTarget> target;
};

/// Slope of the ambiguity term: zeta for WR, xi for MA2.
inline double wasserstein_coefficient(const RiskMeasure& r, double p, Approach approach, const Distribution& generator) {
    auto c = distortion_coefficients(r, p, generator);
    if (approach == Approach::WR) return c.zeta;
    if (approach == Approach::MA2) {
        if (!std::isfinite(c.xi)) throw UnboundedError("MA2 Wasserstein portfolio is unbounded for p = 1");
        return c.xi;
    }
    throw UnsupportedError("Wasserstein portfolios support wr and ma2");
}

inline PortfolioResult portfolio_wasserstein(const WassersteinPortfolio& m, const RiskMeasure& r, Approach approach,
                                             const SolverConfig& cfg = {}) {
    validate(m.benchmark);
    require(m.eps >= 0.0, "portfolio: eps must be >= 0");
    auto gen = elliptical_generator(m.benchmark);
    double rho_psi = evaluate(r, gen);
    double c = m.eps > 0.0 ? wasserstein_coefficient(r, m.p, approach, gen) : 0.0;
    return minimize_mean_sd(m.benchmark.mu, m.benchmark.sigma, rho_psi, c * m.eps, conjugate_exponent(m.a), m.target, cfg);
}

/// Coefficient on sqrt(w^T Sigma w) for the mean-variance class.
inline double meanvar_coefficient(const RiskMeasure& r, Approach approach) {
    auto t = mv_table(r);
    switch (approach) {
    case Approach::WR: return t.wr;
    case Approach::MA1: return t.ma1;
    case Approach::MA2: return t.ma2;
    case Approach::SAA: break;
    }
    throw UnsupportedError("mean-variance portfolios support wr, ma1 and ma2");
}

inline PortfolioResult portfolio_meanvar(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma, const RiskMeasure& r, Approach approach,
                                         const std::optional<ReturnTarget>& target, const SolverConfig& cfg = {}) {
    return minimize_mean_sd(mu, sigma, meanvar_coefficient(r, approach), 0.0, 2.0, target, cfg);
}

/// min w^T Sigma w over the simplex with an optional return target.
inline PortfolioResult markowitz(const Eigen::MatrixXd& sigma, const std::optional<ReturnTarget>& target, const SolverConfig& cfg = {}) {
    const Eigen::Index d = sigma.rows();
    double scale = sigma.diagonal().mean();
    if (!(scale > 0.0)) scale = 1.0;
    auto F = [&](const Eigen::VectorXd& w, const Eigen::VectorXd&, Eigen::VectorXd& g, Eigen::VectorXd&) {
        Eigen::VectorXd Sw = sigma * w / scale;
        g = 2.0 * Sw;
        return w.dot(Sw);
    };
    auto r = solve_joint(SimplexActions{d, target}, Eigen::VectorXd(), Eigen::VectorXd(), F, cfg);
    PortfolioResult out;
    out.weights = r.x;
    out.objective = out.weights.dot(sigma * out.weights);
    out.iterations = r.iterations;
    out.residual = r.residual * scale;
    out.converged = r.converged;
    return out;
}

/// Empirical risk minimization over the simplex for a matrix of asset losses.
inline PortfolioResult saa_portfolio(const Eigen::MatrixXd& losses, const RiskMeasure& r, const std::optional<ReturnTarget>& target,
                                     const SolverConfig& cfg = {}) {
    RobustProgram prog{SimplexActions{losses.cols(), target}, LinearLoss{}, FiniteCdfs{{losses}}, r, Approach::SAA, cfg};
    auto res = saa_program(prog);
    return {res.objective, res.action, res.iterations, res.residual, res.converged};
}

// ---------------------------------------------------------------------------
// newsvendor benchmark

struct NewsvendorParams {
    int nw = 10;  // levels per scenario
    int d = 3;
    int n = 3;  // number of distributions
    int W = 3;  // number of Kusuoka scenarios
    int N = 100;
};

/// Random instance: (mu_i, s_i) ~ N(0, I_{2d}), Sigma_i = diag(exp(s_i)), beta_i = i, eta_i = d - i + 1,
/// alpha_j = (2j - 1) / (2 n^w), weights uniform on the simplex. Clouds use common random numbers.
inline RobustProgram make_newsvendor(const NewsvendorParams& P, std::uint64_t seed) {
    require(P.nw >= 1 && P.d >= 1 && P.n >= 1 && P.W >= 1 && P.N >= 1, "newsvendor: sizes must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    FiniteCdfs F;
    for (int i = 0; i < P.n; ++i) {
        Eigen::VectorXd mu(P.d), s(P.d);
        for (int k = 0; k < P.d; ++k) mu[k] = z(rng);
        for (int k = 0; k < P.d; ++k) s[k] = z(rng);
        Eigen::MatrixXd sigma = s.array().exp().matrix().asDiagonal();
        F.clouds.push_back(gaussian_cloud(mu, sigma, P.N, rng));
    }
    NewsvendorLoss loss{Eigen::VectorXd(P.d), Eigen::VectorXd(P.d)};
    for (int i = 0; i < P.d; ++i) {
        loss.beta[i] = i + 1;
        loss.eta[i] = P.d - i;
    }
    Kusuoka K;
    std::exponential_distribution<double> e(1.0);
    for (int w = 0; w < P.W; ++w) {
        KusuokaScenario s;
        double tot = 0.0;
        for (int j = 1; j <= P.nw; ++j) {
            s.weights.push_back(e(rng));
            tot += s.weights.back();
            s.levels.push_back((2.0 * j - 1.0) / (2.0 * P.nw));
        }
        for (auto& p : s.weights) p /= tot;
        double fix = 1.0;
        for (int j = 0; j + 1 < P.nw; ++j) fix -= s.weights[j];
        s.weights.back() = fix;
        K.scenarios.push_back(std::move(s));
    }
    BoxActions A{Eigen::VectorXd::Constant(P.d, INFINITY), Eigen::VectorXd::Constant(P.d, -INFINITY)};
    for (auto& c : F.clouds) {
        A.lo = A.lo.cwiseMin(c.colwise().minCoeff().transpose());
        A.hi = A.hi.cwiseMax(c.colwise().maxCoeff().transpose());
    }
    return RobustProgram{A, loss, F, RiskMeasure(K), Approach::MA2, {}};
}

/// Size of the linear-programming form of the program (per-sample epigraph variables included).
struct ProgramSize {
    std::size_t variables, constraints, threshold_variables;
};

inline ProgramSize program_size(const NewsvendorParams& P, Approach a) {
    std::size_t K = std::size_t(P.W) * P.nw, n = P.n, N = P.N, d = P.d;
    std::size_t blocks = a == Approach::WR ? n * K : K;  // threshold variables
    std::size_t slack = n * N * K + n * N * d;
    std::size_t cons = (a == Approach::WR ? n * P.W : std::size_t(P.W)) + n * K + n * N * K + 2 * n * N * d;
    return {d + 1 + 2 * blocks + slack, cons, blocks};
}

struct BenchRow {
    std::string sweep;
    int value;
    Approach approach;
    double median_seconds;
    ProgramSize size;
    double objective;
    bool converged;
};

inline std::vector<int> default_sweep_values(const std::string& var) {
    if (var == "d") return {1, 3, 5, 10, 20};
    if (var == "n") return {1, 3, 5, 10, 20};
    if (var == "nw") return {1, 5, 10, 20, 50};
    if (var == "W") return {1, 3, 5, 10, 20};
    if (var == "N") return {50, 100, 200, 500, 1000};
    throw DomainError("unknown sweep variable '" + var + "' (expected d, n, nw, W or N)");
}

/// Times WR and MA2 solves over one swept parameter, median over reps runs.
inline std::vector<BenchRow> bench_newsvendor(const std::string& var, const std::vector<int>& values, int reps, std::uint64_t seed,
                                              const SolverConfig& cfg = {}) {
    require(reps >= 1, "bench: reps must be >= 1");
    std::vector<BenchRow> rows;
    for (int v : values) {
        NewsvendorParams P;
        if (var == "d")
            P.d = v;
        else if (var == "n")
            P.n = v;
        else if (var == "nw")
            P.nw = v;
        else if (var == "W")
            P.W = v;
        else if (var == "N")
            P.N = v;
        else
            throw DomainError("unknown sweep variable '" + var + "'");
        auto prog = make_newsvendor(P, seed + std::uint64_t(v));
        prog.solver = cfg;
        for (Approach ap : {Approach::WR, Approach::MA2}) {
            prog.approach = ap;
            std::vector<double> secs;
            ProgramResult res;
            for (int r = 0; r < reps; ++r) {
                auto t0 = std::chrono::steady_clock::now();
                res = solve_program(prog);
                secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            }
            std::nth_element(secs.begin(), secs.begin() + secs.size() / 2, secs.end());
            rows.push_back({var, v, ap, secs[secs.size() / 2], program_size(P, ap), res.objective, res.converged});
        }
    }
    return rows;
}

} // namespace aggrisk
