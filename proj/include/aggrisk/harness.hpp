#pragma once

#include <aggrisk/io.hpp>
#include <aggrisk/robustopt.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cstdio>

namespace aggrisk {

// ---------------------------------------------------------------------------
// prices

struct PriceTable {
    std::vector<std::string> dates;
    std::vector<std::string> tickers;
    Eigen::MatrixXd prices;  // date x ticker
    std::size_t dropped_rows = 0;
};

namespace detail {

inline bool valid_iso_date(const std::string& s) {
    int y, m, d;
    char tail;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &tail) != 3) return false;
    return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{unsigned(m)}, std::chrono::day{unsigned(d)}}.ok();
}

} // namespace detail

inline void validate(const PriceTable& t) {
    require(t.prices.rows() == Eigen::Index(t.dates.size()) && t.prices.cols() == Eigen::Index(t.tickers.size()), "price table: shape mismatch");
    require(t.dates.size() >= 2, "price table: need at least 2 rows");
    require(!t.tickers.empty(), "price table: no tickers");
    for (std::size_t i = 0; i < t.dates.size(); ++i) {
        if (!detail::valid_iso_date(t.dates[i])) throw DomainError("unparsable date '" + t.dates[i] + "'");
        if (i > 0 && !(t.dates[i - 1] < t.dates[i])) {
            if (t.dates[i - 1] == t.dates[i]) throw DomainError("duplicate date " + t.dates[i]);
            throw DomainError("dates not increasing at " + t.dates[i]);
        }
    }
    if (!(t.prices.array() > 0.0).all()) throw DomainError("prices must be strictly positive");
}

/// Parses CSV text. format "wide": header date,T1,...; format "long": date,ticker,price rows.
/// Rows with a missing cell are dropped and counted.
inline PriceTable parse_prices(const std::string& text, const std::string& format = "wide") {
    std::istringstream in(text);
    std::string line;
    PriceTable t;
    std::vector<std::vector<double>> rows;
    if (format == "wide") {
        if (!std::getline(in, line)) throw IoError("price CSV: empty file");
        auto head = split_csv(line);
        if (head.size() < 2 || head[0] != "date") throw IoError("price CSV: header must be date,TICKER1,...");
        t.tickers.assign(head.begin() + 1, head.end());
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line == "\r") continue;
            auto c = split_csv(line);
            c.resize(std::max(c.size(), head.size()));
            if (c.size() > head.size()) throw IoError("price CSV: too many cells on line " + std::to_string(lineno));
            std::vector<double> r;
            bool missing = false;
            for (std::size_t k = 1; k < c.size(); ++k) {
                double v;
                if (c[k].empty() || c[k] == "NA" || c[k] == "NaN") {
                    missing = true;
                    break;
                }
                if (!parse_double(c[k], v)) throw IoError("price CSV: bad number '" + c[k] + "' on line " + std::to_string(lineno));
                r.push_back(v);
            }
            if (missing) {
                ++t.dropped_rows;
                continue;
            }
            t.dates.push_back(c[0]);
            rows.push_back(std::move(r));
        }
    } else if (format == "long") {
        std::map<std::string, std::map<std::string, double>> cells;
        std::vector<std::string> order;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line == "\r") continue;
            auto c = split_csv(line);
            if (lineno == 1 && !c.empty() && c[0] == "date") continue;
            if (c.size() != 3) throw IoError("price CSV: expected date,ticker,price on line " + std::to_string(lineno));
            double v;
            if (!parse_double(c[2], v)) throw IoError("price CSV: bad number on line " + std::to_string(lineno));
            if (std::find(order.begin(), order.end(), c[1]) == order.end()) order.push_back(c[1]);
            if (!cells[c[0]].emplace(c[1], v).second) throw DomainError("duplicate date " + c[0] + " for " + c[1]);
        }
        t.tickers = order;
        for (auto& [date, m] : cells) {
            if (m.size() != order.size()) {
                ++t.dropped_rows;
                continue;
            }
            std::vector<double> r;
            for (auto& k : order) r.push_back(m.at(k));
            t.dates.push_back(date);
            rows.push_back(std::move(r));
        }
    } else {
        throw DomainError("unknown price format '" + format + "'");
    }
    t.prices.resize(Eigen::Index(rows.size()), Eigen::Index(t.tickers.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < rows[i].size(); ++k) t.prices(Eigen::Index(i), Eigen::Index(k)) = rows[i][k];
    validate(t);
    return t;
}

inline PriceTable ingest_csv(const std::string& path, const std::string& format = "wide") { return parse_prices(read_text(path), format); }

inline std::string prices_to_csv(const PriceTable& t) {
    std::string s = "date";
    for (auto& k : t.tickers) s += "," + k;
    s += "\n";
    for (Eigen::Index i = 0; i < t.prices.rows(); ++i) {
        s += t.dates[std::size_t(i)];
        for (Eigen::Index k = 0; k < t.prices.cols(); ++k) s += "," + fmt(t.prices(i, k));
        s += "\n";
    }
    return s;
}

/// Daily losses x_t = -(p_t / p_{t-1} - 1); row t corresponds to date t + 1.
inline Eigen::MatrixXd losses(const PriceTable& t) {
    const auto n = t.prices.rows();
    require(n >= 2, "losses: need at least 2 rows");
    return -(t.prices.bottomRows(n - 1).array() / t.prices.topRows(n - 1).array() - 1.0).matrix();
}

// ---------------------------------------------------------------------------
// univariate fits

struct FittedModels {
    Distribution empirical = PointMass{0.0};
    Normal normal;
    StudentT student_t;
    Logistic logistic;
    double t_loglik = 0.0;
};

namespace detail {

/// Location and scale maximizing the t likelihood at fixed nu (EM iterations).
inline std::pair<double, double> t_location_scale(const std::vector<double>& x, double nu, double mu0, double s0) {
    double mu = mu0, s2 = s0 * s0;
    const double n = double(x.size());
    for (int it = 0; it < 1000; ++it) {
        double sw = 0.0, swx = 0.0;
        std::vector<double> w(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double z = x[i] - mu;
            w[i] = (nu + 1.0) / (nu + z * z / s2);
            sw += w[i];
            swx += w[i] * x[i];
        }
        double mu_new = swx / sw, ss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) ss += w[i] * (x[i] - mu_new) * (x[i] - mu_new);
        double s2_new = ss / n;
        bool done = std::abs(mu_new - mu) <= 1e-13 * std::sqrt(s2) && std::abs(s2_new - s2) <= 1e-12 * s2;
        mu = mu_new;
        s2 = s2_new;
        if (done) break;
    }
    return {mu, std::sqrt(s2)};
}

inline double t_loglik(const std::vector<double>& x, double nu, double mu, double s) {
    double c = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * M_PI) - std::log(s), ll = 0.0;
    for (double v : x) {
        double z = (v - mu) / s;
        ll += c - 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
    }
    return ll;
}

} // namespace detail

inline constexpr double kNuLo = 2.0, kNuHi = 200.0, kNuTol = 1e-3;

/// Empirical, normal and logistic by moments; Student t by profile likelihood over nu in (2, 200].
inline FittedModels fit_models(const std::vector<double>& x) {
    require(x.size() >= 30, "fit: need at least 30 observations");
    const double n = double(x.size());
    double m = std::accumulate(x.begin(), x.end(), 0.0) / n, ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0)) throw DomainError("fit: degenerate sample (zero variance)");
    FittedModels f;
    f.empirical = uniform_atoms(x);
    f.normal = Normal{m, sd};
    f.logistic = Logistic{m, sd * std::sqrt(3.0) / M_PI};
    auto profile = [&](double nu) {
        auto [mu, s] = detail::t_location_scale(x, nu, m, sd);
        return -detail::t_loglik(x, nu, mu, s);
    };
    auto [nu, negll] = numeric::golden_min(profile, kNuLo + 1e-6, kNuHi, kNuTol);
    if (profile(kNuHi) <= negll) nu = kNuHi, negll = profile(kNuHi);
    auto [mu, s] = detail::t_location_scale(x, nu, m, sd);
    f.student_t = StudentT{nu, mu, s};
    f.t_loglik = -negll;
    return f;
}

inline DistributionList model_list(const FittedModels& f) { return {f.empirical, f.normal, f.student_t, f.logistic}; }
inline const std::vector<std::string>& model_names() {
    static const std::vector<std::string> n{"empirical", "normal", "student_t", "logistic"};
    return n;
}

// ---------------------------------------------------------------------------
// aggregation experiment

struct EnvelopeJump {
    double x;     // location where the leading model changes
    double size;  // jump of the aggregated CDF
};

struct AggregateTables {
    std::vector<std::string> names;
    std::vector<double> x;                  // curve grid
    std::vector<std::vector<double>> cdf;   // per model
    std::vector<std::vector<double>> pi;    // per model
    std::vector<double> sup1_cdf, sup2_cdf, sup2_pi;
    std::vector<double> rvar_beta, es_alpha;
    double rvar_alpha = 0.95;
    std::vector<std::vector<double>> rvar, es;  // per model, along the level grids
    std::vector<double> rvar_wr, rvar_ma1, es_wr, es_ma1, es_ma2;  // RVaR with beta < 1 is not SSD-consistent
    std::vector<EnvelopeJump> jumps;
    double pi_error = 0.0;  // discretization bound of the SSD aggregate
};

namespace detail {

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * double(i) / double(n - 1);
    return v;
}

/// Points where the argmax of pi_i changes, located by bisection on a grid bracket.
inline std::vector<EnvelopeJump> envelope_jumps(const DistributionList& set, const std::vector<double>& grid) {
    auto leader = [&](double x) {
        std::size_t b = 0;
        double m = pi(set[0], x);
        for (std::size_t i = 1; i < set.size(); ++i) {
            double v = pi(set[i], x);
            if (v > m + 1e-15 * (1.0 + std::abs(m))) m = v, b = i;
        }
        return b;
    };
    std::vector<EnvelopeJump> out;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        double lo = grid[k], hi = grid[k + 1];
        std::size_t a = leader(lo), b = leader(hi);
        if (a == b) continue;
        for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
            double mid = 0.5 * (lo + hi);
            (leader(mid) == a ? lo : hi) = mid;
        }
        double xc = 0.5 * (lo + hi);
        out.push_back({xc, cdf(set[b], xc) - cdf(set[a], xc)});
    }
    return out;
}

} // namespace detail

inline AggregateTables aggregate_experiment(const FittedModels& f, std::size_t grid_points = 401, std::size_t level_points = 51,
                                            const LatticeConfig& cfg = {}) {
    AggregateTables t;
    t.names = model_names();
    auto set = model_list(f);
    double lo = INFINITY, hi = -INFINITY;
    for (auto& d : set) {
        lo = std::min(lo, quantile(d, 0.001));
        hi = std::max(hi, quantile(d, 0.999));
    }
    double pad = 0.1 * (hi - lo);
    t.x = detail::linspace(lo - pad, hi + pad, grid_points);
    auto s1 = sup_fsd(set, cfg), s2 = sup_ssd(set, cfg);
    t.pi_error = s2.pi_error;
    t.cdf.resize(set.size());
    t.pi.resize(set.size());
    for (double x : t.x) {
        for (std::size_t i = 0; i < set.size(); ++i) {
            t.cdf[i].push_back(cdf(set[i], x));
            t.pi[i].push_back(pi(set[i], x));
        }
        t.sup1_cdf.push_back(cdf(s1.sup, x));
        t.sup2_cdf.push_back(cdf(s2.sup, x));
        t.sup2_pi.push_back(pi(s2.sup, x));
    }
    // the empirical model has jumps of its own; leader switches are located among the continuous fits and the sample
    t.jumps = detail::envelope_jumps(set, t.x);

    t.rvar_beta = detail::linspace(0.951, 1.0, level_points);
    t.es_alpha = detail::linspace(0.9, 0.99, level_points);
    t.rvar.assign(set.size(), {});
    t.es.assign(set.size(), {});
    for (double b : t.rvar_beta) {
        RiskMeasure r = RVaR{t.rvar_alpha, b};
        double wr = -INFINITY;
        for (std::size_t i = 0; i < set.size(); ++i) {
            t.rvar[i].push_back(evaluate(r, set[i]));
            wr = std::max(wr, t.rvar[i].back());
        }
        t.rvar_wr.push_back(wr);
        t.rvar_ma1.push_back(evaluate(r, s1.sup));
    }
    for (double a : t.es_alpha) {
        double wr = -INFINITY;
        for (std::size_t i = 0; i < set.size(); ++i) {
            t.es[i].push_back(es(set[i], a));
            wr = std::max(wr, t.es[i].back());
        }
        t.es_wr.push_back(wr);
        t.es_ma1.push_back(es(s1.sup, a));
        t.es_ma2.push_back(es(s2.sup, a));
    }
    return t;
}

// ---------------------------------------------------------------------------
// backtest

enum class Strategy { SAA, Markowitz, WassersteinWR, WassersteinMA2, MeanVarWR, MeanVarMA1, MeanVarMA2 };

inline std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::SAA: return "SAA";
    case Strategy::Markowitz: return "Markowitz";
    case Strategy::WassersteinWR: return "W-WR";
    case Strategy::WassersteinMA2: return "W-MA2";
    case Strategy::MeanVarWR: return "MV-WR";
    case Strategy::MeanVarMA1: return "MV-MA1";
    case Strategy::MeanVarMA2: return "MV-MA2";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s) {
    for (auto v : {Strategy::SAA, Strategy::Markowitz, Strategy::WassersteinWR, Strategy::WassersteinMA2, Strategy::MeanVarWR,
                   Strategy::MeanVarMA1, Strategy::MeanVarMA2})
        if (to_string(v) == s) return v;
    throw DomainError("unknown strategy '" + s + "'");
}

inline std::vector<Strategy> all_strategies() {
    return {Strategy::SAA, Strategy::Markowitz, Strategy::WassersteinWR, Strategy::WassersteinMA2, Strategy::MeanVarWR, Strategy::MeanVarMA1,
            Strategy::MeanVarMA2};
}

struct BacktestConfig {
    std::size_t train_window = 350;
    double r0 = 0.2;
    double m = 250.0;
    RiskMeasure measure = PD{2.0};
    double eps = 0.01;
    double p = 2.0;  // Wasserstein order
    double a = 2.0;  // norm on the asset space
    Elliptical::Kind benchmark = Elliptical::Kind::StudentT;
    std::vector<Strategy> strategies = all_strategies();
    double risk_free = 0.00165;
    std::uint64_t seed = 0;
    SolverConfig solver;
};

struct StrategyPath {
    Strategy strategy;
    std::vector<double> wealth;     // after each trading day; initial wealth 1
    std::vector<double> loss;       // realized portfolio loss per day
    std::vector<double> objective;  // optimal program value per day (NaN when held)
    std::vector<Eigen::VectorXd> weights;
    std::size_t infeasible_days = 0;
    std::size_t unconverged_days = 0;  // solver stopped before reaching the tolerance
    double ar = 0.0, av = 0.0, sr = 0.0, tc = 0.0;
};

struct BacktestReport {
    std::vector<std::string> dates;  // trading days after training
    std::vector<std::string> tickers;
    std::vector<double> nu;  // fitted t degrees of freedom per day
    std::string measure;
    double r0 = 0.0, eps = 0.0, risk_free = 0.0;
    std::vector<StrategyPath> paths;
};

inline std::optional<StrategyPath> find_path(const BacktestReport& r, Strategy s) {
    for (auto& p : r.paths)
        if (p.strategy == s) return p;
    return std::nullopt;
}

/// Degrees of freedom of a multivariate t with moment-matched location and scatter,
/// maximizing the likelihood over nu in (2, 200].
inline double fit_multivariate_nu(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
    const double d = double(X.cols());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) throw NumericError("covariance not positive definite");
    double logdet = ldlt.vectorD().array().log().sum();
    Eigen::MatrixXd C = (X.rowwise() - mu.transpose()).transpose();
    Eigen::VectorXd delta = (C.array() * ldlt.solve(C).array()).colwise().sum().transpose();
    auto negll = [&](double nu) {
        double k = nu - 2.0;
        double c = std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * d * std::log(k * M_PI) - 0.5 * logdet, ll = 0.0;
        for (Eigen::Index s = 0; s < delta.size(); ++s) ll += c - 0.5 * (nu + d) * std::log1p(delta[s] / k);
        return -ll;
    };
    auto [nu, v] = numeric::golden_min(negll, kNuLo + 1e-6, kNuHi, kNuTol);
    if (negll(kNuHi) <= v) nu = kNuHi;
    return nu;
}

namespace detail {

inline void finish_metrics(StrategyPath& p, double m, double rf) {
    const double T = double(p.loss.size());
    double mean = 0.0;
    for (double l : p.loss) mean += -l;
    mean /= T;
    double ss = 0.0;
    for (double l : p.loss) ss += (-l - mean) * (-l - mean);
    double sd = T > 1 ? std::sqrt(ss / (T - 1.0)) : 0.0;
    p.ar = mean * m;
    p.av = sd * std::sqrt(m);
    p.sr = p.av > 0.0 ? (p.ar - rf) / p.av : NAN;
    double tc = 0.0;
    for (std::size_t t = 1; t < p.weights.size(); ++t) tc += (p.weights[t] - p.weights[t - 1]).lpNorm<1>();
    p.tc = tc / T;
}

} // namespace detail

inline BacktestReport backtest(const PriceTable& table, const BacktestConfig& cfg) {
    validate(table);
    Eigen::MatrixXd X = losses(table);
    const auto Tn = std::size_t(X.rows());
    const Eigen::Index d = X.cols();
    require(cfg.train_window >= 2 && cfg.train_window < Tn, "backtest: train_window must be below the number of losses");
    require(cfg.eps >= 0.0, "backtest: eps must be >= 0");
    require(!cfg.strategies.empty(), "backtest: no strategies");

    BacktestReport rep;
    rep.tickers = table.tickers;
    rep.measure = describe(cfg.measure);
    rep.r0 = cfg.r0;
    rep.eps = cfg.eps;
    rep.risk_free = cfg.risk_free;
    for (auto s : cfg.strategies) rep.paths.push_back({s});
    std::vector<Eigen::VectorXd> prev(cfg.strategies.size(), Eigen::VectorXd::Constant(d, 1.0 / double(d)));
    std::vector<double> wealth(cfg.strategies.size(), 1.0);

    for (std::size_t t = cfg.train_window; t < Tn; ++t) {
        Eigen::MatrixXd W = X.middleRows(Eigen::Index(t - cfg.train_window), Eigen::Index(cfg.train_window));
        Eigen::VectorXd mu = W.colwise().mean().transpose();
        Eigen::MatrixXd C = W.rowwise() - mu.transpose();
        Eigen::MatrixXd cov = C.transpose() * C / double(W.rows() - 1);
        double nu = cfg.benchmark == Elliptical::Kind::StudentT ? fit_multivariate_nu(W, mu, cov) : 0.0;
        rep.nu.push_back(nu);
        rep.dates.push_back(table.dates[t + 1]);
        ReturnTarget target{mu, cfg.r0, cfg.m};
        Elliptical bench{cfg.benchmark, nu, mu, cov};
        Eigen::VectorXd x = X.row(Eigen::Index(t)).transpose();

        for (std::size_t k = 0; k < cfg.strategies.size(); ++k) {
            auto& path = rep.paths[k];
            PortfolioResult res;
            bool ok = true;
            try {
                switch (path.strategy) {
                case Strategy::SAA: res = saa_portfolio(W, cfg.measure, target, cfg.solver); break;
                case Strategy::Markowitz: res = markowitz(cov, target, cfg.solver); break;
                case Strategy::WassersteinWR:
                case Strategy::WassersteinMA2: {
                    WassersteinPortfolio wp{bench, cfg.eps, cfg.a, cfg.p, target};
                    res = portfolio_wasserstein(wp, cfg.measure, path.strategy == Strategy::WassersteinWR ? Approach::WR : Approach::MA2,
                                                cfg.solver);
                    break;
                }
                case Strategy::MeanVarWR: res = portfolio_meanvar(mu, cov, cfg.measure, Approach::WR, target, cfg.solver); break;
                case Strategy::MeanVarMA1: res = portfolio_meanvar(mu, cov, cfg.measure, Approach::MA1, target, cfg.solver); break;
                case Strategy::MeanVarMA2: res = portfolio_meanvar(mu, cov, cfg.measure, Approach::MA2, target, cfg.solver); break;
                }
            } catch (const InfeasibleError&) {
                ok = false;
            }
            if (ok) {
                prev[k] = res.weights;
                path.objective.push_back(res.objective);
                if (!res.converged) ++path.unconverged_days;
            } else {
                ++path.infeasible_days;
                path.objective.push_back(NAN);
            }
            double l = prev[k].dot(x);
            wealth[k] *= 1.0 - l;
            path.loss.push_back(l);
            path.wealth.push_back(wealth[k]);
            path.weights.push_back(prev[k]);
        }
    }
    for (auto& p : rep.paths) detail::finish_metrics(p, cfg.m, cfg.risk_free);
    return rep;
}

// ---------------------------------------------------------------------------
// report output

inline json to_json(const BacktestReport& r) {
    json paths = json::array();
    for (auto& p : r.paths) {
        json w = json::array();
        for (auto& v : p.weights) w.push_back(std::vector<double>(v.data(), v.data() + v.size()));
        json obj = json::array();
        for (double o : p.objective) obj.push_back(std::isfinite(o) ? json(o) : json(nullptr));
        paths.push_back({{"approach", to_string(p.strategy)},
                         {"AR", p.ar},
                         {"AV", p.av},
                         {"SR", p.sr},
                         {"TC", p.tc},
                         {"infeasible_days", p.infeasible_days},
                         {"unconverged_days", p.unconverged_days},
                         {"wealth", p.wealth},
                         {"loss", p.loss},
                         {"objective", obj},
                         {"weights", w}});
    }
    return {{"dates", r.dates}, {"tickers", r.tickers}, {"nu", r.nu}, {"measure", r.measure}, {"r0", r.r0},
            {"eps", r.eps},     {"risk_free", r.risk_free}, {"paths", paths}};
}

inline BacktestReport report_from_json(const json& j) {
    try {
        BacktestReport r;
        r.dates = j.at("dates").get<std::vector<std::string>>();
        r.tickers = j.at("tickers").get<std::vector<std::string>>();
        r.nu = j.at("nu").get<std::vector<double>>();
        r.measure = j.at("measure").get<std::string>();
        r.r0 = j.at("r0").get<double>();
        r.eps = j.at("eps").get<double>();
        r.risk_free = j.at("risk_free").get<double>();
        for (auto& pj : j.at("paths")) {
            StrategyPath p{parse_strategy(pj.at("approach").get<std::string>())};
            p.ar = pj.at("AR").get<double>();
            p.av = pj.at("AV").get<double>();
            p.sr = pj.at("SR").get<double>();
            p.tc = pj.at("TC").get<double>();
            p.infeasible_days = pj.at("infeasible_days").get<std::size_t>();
            p.unconverged_days = pj.at("unconverged_days").get<std::size_t>();
            p.wealth = pj.at("wealth").get<std::vector<double>>();
            p.loss = pj.at("loss").get<std::vector<double>>();
            for (auto& o : pj.at("objective")) p.objective.push_back(o.is_null() ? NAN : o.get<double>());
            for (auto& w : pj.at("weights")) {
                auto v = w.get<std::vector<double>>();
                p.weights.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
            }
            r.paths.push_back(std::move(p));
        }
        return r;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed report JSON: ") + e.what());
    }
}

/// approach,AR,AV,SR,TC
inline std::string metrics_csv(const BacktestReport& r) {
    std::string s = "approach,AR,AV,SR,TC\n";
    for (auto& p : r.paths) s += to_string(p.strategy) + "," + fmt(p.ar) + "," + fmt(p.av) + "," + fmt(p.sr) + "," + fmt(p.tc) + "\n";
    return s;
}

/// One row per trading day: date, then wealth per approach.
inline std::string wealth_csv(const BacktestReport& r) {
    std::string s = "date";
    for (auto& p : r.paths) s += "," + to_string(p.strategy);
    s += "\n";
    for (std::size_t t = 0; t < r.dates.size(); ++t) {
        s += r.dates[t];
        for (auto& p : r.paths) s += "," + fmt(p.wealth[t]);
        s += "\n";
    }
    return s;
}

inline std::string weights_csv(const BacktestReport& r) {
    std::string s = "date,approach";
    for (auto& k : r.tickers) s += "," + k;
    s += "\n";
    for (auto& p : r.paths)
        for (std::size_t t = 0; t < r.dates.size(); ++t) {
            s += r.dates[t] + "," + to_string(p.strategy);
            for (Eigen::Index i = 0; i < p.weights[t].size(); ++i) s += "," + fmt(p.weights[t][i]);
            s += "\n";
        }
    return s;
}

/// Writes report.json, metrics.csv, wealth.csv and weights.csv (csv) or report.json only (json).
inline std::vector<std::string> report_emit(const BacktestReport& r, const std::string& dir, const std::string& format = "csv",
                                            const std::string& prefix = "") {
    std::vector<std::string> files;
    auto put = [&](const std::string& name, const std::string& text) {
        std::string path = (std::filesystem::path(dir) / (prefix + name)).string();
        write_text(path, text);
        files.push_back(path);
    };
    put("report.json", to_json(r).dump(1));
    if (format == "csv") {
        put("metrics.csv", metrics_csv(r));
        put("wealth.csv", wealth_csv(r));
        put("weights.csv", weights_csv(r));
    } else if (format != "json") {
        throw DomainError("unknown report format '" + format + "'");
    }
    return files;
}

// ---------------------------------------------------------------------------
// synthetic data

/// Daily return means (x1e-3), variances (x1e-4) and correlations of the 20-stock reference set.
struct ReferenceMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

inline ReferenceMoments reference_moments() {
    static const double mean[20] = {2.3, 1.8, 1.6, 1.4, 1.8, 1.3, 3.2, 1.6, 0.7, 1.3, 0.8, 0.9, 1.4, 1.1, 1.0, 1.3, 0.6, 2.1, 1.6, 0.7};
    static const double var[20] = {5.1, 4.0, 3.8, 3.7, 5.0, 6.3, 11.6, 3.7, 2.0, 2.0, 2.1, 2.3, 5.0, 4.8, 5.1, 3.8, 6.6, 6.5, 5.7, 3.7};
    static const std::vector<std::vector<double>> lower = {
        {},
        {0.784},
        {0.679, 0.786},
        {0.660, 0.714, 0.644},
        {0.707, 0.838, 0.716, 0.704},
        {0.496, 0.546, 0.505, 0.614, 0.612},
        {0.583, 0.600, 0.519, 0.560, 0.574, 0.445},
        {0.637, 0.737, 0.685, 0.443, 0.653, 0.330, 0.473},
        {0.485, 0.563, 0.478, 0.332, 0.429, 0.251, 0.323, 0.568},
        {0.588, 0.647, 0.531, 0.529, 0.600, 0.405, 0.447, 0.513, 0.534},
        {0.438, 0.520, 0.403, 0.378, 0.449, 0.330, 0.334, 0.377, 0.479, 0.680},
        {0.491, 0.581, 0.478, 0.371, 0.494, 0.271, 0.338, 0.538, 0.656, 0.610, 0.610},
        {0.626, 0.715, 0.662, 0.457, 0.628, 0.308, 0.472, 0.922, 0.534, 0.470, 0.349, 0.513},
        {0.500, 0.580, 0.534, 0.357, 0.482, 0.292, 0.379, 0.611, 0.565, 0.483, 0.363, 0.491, 0.567},
        {0.437, 0.493, 0.498, 0.308, 0.402, 0.198, 0.307, 0.649, 0.410, 0.310, 0.274, 0.392, 0.670, 0.415},
        {0.606, 0.681, 0.584, 0.424, 0.598, 0.372, 0.471, 0.654, 0.494, 0.569, 0.469, 0.548, 0.613, 0.593, 0.539},
        {0.584, 0.646, 0.552, 0.461, 0.587, 0.397, 0.434, 0.562, 0.442, 0.514, 0.437, 0.444, 0.548, 0.457, 0.409, 0.560},
        {0.659, 0.742, 0.636, 0.595, 0.742, 0.445, 0.522, 0.653, 0.395, 0.513, 0.374, 0.425, 0.640, 0.428, 0.428, 0.595, 0.540},
        {0.525, 0.544, 0.535, 0.321, 0.440, 0.241, 0.364, 0.649, 0.452, 0.398, 0.321, 0.426, 0.633, 0.556, 0.631, 0.621, 0.521, 0.441},
        {0.479, 0.546, 0.513, 0.354, 0.450, 0.227, 0.361, 0.630, 0.563, 0.455, 0.390, 0.543, 0.623, 0.521, 0.522, 0.595, 0.555, 0.391, 0.630},
    };
    ReferenceMoments r{Eigen::VectorXd(20), Eigen::MatrixXd::Identity(20, 20)};
    for (int i = 0; i < 20; ++i) {
        r.mean[i] = mean[i] * 1e-3;
        for (int j = 0; j < i; ++j) r.cov(i, j) = r.cov(j, i) = lower[std::size_t(i)][std::size_t(j)];
    }
    // the rounded correlation table is not exactly positive semidefinite; clip eigenvalues and rescale to unit diagonal
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.cov);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-6);
    Eigen::MatrixXd R = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd s = R.diagonal().cwiseSqrt().cwiseInverse();
    R = s.asDiagonal() * R * s.asDiagonal();
    Eigen::VectorXd sd(20);
    for (int i = 0; i < 20; ++i) sd[i] = std::sqrt(var[i] * 1e-4);
    r.cov = sd.asDiagonal() * R * sd.asDiagonal();
    return r;
}

/// Prices from i.i.d. multivariate t returns with the reference moments; weekdays from 2019-01-02.
inline PriceTable synthetic_prices(std::size_t rows = 650, double nu = 4.0, std::uint64_t seed = 20200522) {
    require(rows >= 2 && nu > 2.0, "synthetic: need rows >= 2 and nu > 2");
    auto ref = reference_moments();
    const Eigen::Index d = ref.mean.size();
    Eigen::MatrixXd L = ref.cov.llt().matrixL();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::chi_squared_distribution<double> chi(nu);
    PriceTable t;
    for (Eigen::Index i = 0; i < d; ++i) t.tickers.push_back("S" + std::string(i + 1 < 10 ? "0" : "") + std::to_string(i + 1));
    t.prices.resize(Eigen::Index(rows), d);
    t.prices.row(0).setConstant(100.0);
    using namespace std::chrono;
    sys_days day = year{2019} / 1 / 2;
    auto next_weekday = [&] {
        do day += days{1};
        while (weekday{day} == Saturday || weekday{day} == Sunday);
    };
    auto iso = [&] {
        year_month_day y{day};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(y.year()), unsigned(y.month()), unsigned(y.day()));
        return std::string(buf);
    };
    t.dates.push_back(iso());
    const double scale = std::sqrt((nu - 2.0) / nu);
    Eigen::VectorXd e(d);
    for (std::size_t r = 1; r < rows; ++r) {
        Eigen::VectorXd ret;
        do {
            for (Eigen::Index i = 0; i < d; ++i) e[i] = z(rng);
            ret = ref.mean + scale * (L * e) / std::sqrt(chi(rng) / nu);
        } while ((ret.array() <= -1.0).any());
        t.prices.row(Eigen::Index(r)) = t.prices.row(Eigen::Index(r - 1)).array() * (1.0 + ret.transpose().array());
        next_weekday();
        t.dates.push_back(iso());
    }
    return t;
}

} // namespace aggrisk
