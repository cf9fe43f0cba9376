// Command line front end: ingest, fit, aggregate, risk, robust-model, optimize, bench, backtest.

#include <aggrisk/harness.hpp>
#include <aggrisk/program_io.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace aggrisk;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    double tol = 1e-10;
    std::size_t grid = 2048;
    std::string out_dir = ".";
};

std::string out_path(const Globals& g, const std::string& given, const std::string& fallback) {
    if (!given.empty()) return given;
    return (std::filesystem::path(g.out_dir) / fallback).string();
}

SolverConfig solver(const Globals& g) {
    SolverConfig s;
    s.tol = g.tol;
    return s;
}

DistributionList load_all(const std::vector<std::string>& files) {
    DistributionList set;
    for (auto& f : files)
        for (auto& d : load_distributions(f)) set.push_back(d);
    if (set.empty()) throw DomainError("no input distributions");
    return set;
}

// "key=v,key=v" after the first ':'
std::map<std::string, double> key_values(const std::string& text) {
    std::map<std::string, double> kv;
    auto colon = text.find(':');
    if (colon == std::string::npos) return kv;
    std::istringstream is(text.substr(colon + 1));
    std::string item;
    while (std::getline(is, item, ',')) {
        auto eq = item.find('=');
        double v;
        if (eq == std::string::npos || !parse_double(item.substr(eq + 1), v)) throw DomainError("bad parameter '" + item + "' in '" + text + "'");
        kv[item.substr(0, eq)] = v;
    }
    return kv;
}

std::pair<double, double> support_range(const DistributionList& set) {
    double lo = INFINITY, hi = -INFINITY;
    for (auto& d : set) {
        lo = std::min(lo, quantile(d, 0.001));
        hi = std::max(hi, quantile(d, 0.999));
    }
    double pad = 0.1 * std::max(hi - lo, 1e-12);
    return {lo - pad, hi + pad};
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

int run(int argc, char** argv) {
    CLI::App app{"aggregation of loss distributions, robust risk evaluation and robust optimization"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "random seed");
    app.add_option("--tol", g.tol, "solver tolerance");
    app.add_option("--grid", g.grid, "discretization levels for non-atomic inputs");
    app.add_option("--out-dir", g.out_dir, "output directory");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate a price CSV and write prices and losses");
    std::string ing_in, ing_format = "wide";
    ingest->add_option("--in", ing_in, "price CSV")->required();
    ingest->add_option("--format", ing_format, "wide (date,T1,...) or long (date,ticker,price)");
    ingest->callback([&] {
        auto t = ingest_csv(ing_in, ing_format);
        auto prices = out_path(g, "", "prices.csv"), loss = out_path(g, "", "losses.csv");
        write_text(prices, prices_to_csv(t));
        auto L = losses(t);
        std::string s = "date";
        for (auto& k : t.tickers) s += "," + k;
        s += "\n";
        for (Eigen::Index r = 0; r < L.rows(); ++r) {
            s += t.dates[std::size_t(r + 1)];
            for (Eigen::Index c = 0; c < L.cols(); ++c) s += "," + fmt(L(r, c));
            s += "\n";
        }
        write_text(loss, s);
        if (t.dropped_rows > 0) std::cerr << "warning: dropped " << t.dropped_rows << " row(s) with missing cells\n";
        print({{"rows", t.dates.size()}, {"tickers", t.tickers}, {"dropped_rows", t.dropped_rows}, {"prices", prices}, {"losses", loss}});
    });

    // fit
    auto* fit = app.add_subcommand("fit", "fit empirical, normal, t and logistic models to one asset's losses");
    std::string fit_in, fit_ticker, fit_format = "wide";
    bool fit_experiment = false;
    std::size_t fit_points = 401, fit_levels = 51;
    fit->add_option("--in", fit_in, "price CSV")->required();
    fit->add_option("--format", fit_format, "wide or long");
    fit->add_option("--ticker", fit_ticker, "asset column (default: first)");
    fit->add_flag("--experiment", fit_experiment, "also write aggregation curves and robust risk series");
    fit->add_option("--points", fit_points, "curve grid size");
    fit->add_option("--levels", fit_levels, "risk level grid size");
    fit->callback([&] {
        auto t = ingest_csv(fit_in, fit_format);
        Eigen::Index col = 0;
        if (!fit_ticker.empty()) {
            auto it = std::find(t.tickers.begin(), t.tickers.end(), fit_ticker);
            if (it == t.tickers.end()) throw DomainError("unknown ticker '" + fit_ticker + "'");
            col = Eigen::Index(it - t.tickers.begin());
        }
        auto L = losses(t);
        std::vector<double> x(L.col(col).data(), L.col(col).data() + L.rows());
        auto f = fit_models(x);
        auto set = model_list(f);
        json summary{{"ticker", t.tickers[std::size_t(col)]}, {"observations", x.size()}, {"student_t_loglik", f.t_loglik}};
        for (std::size_t i = 0; i < set.size(); ++i) {
            auto path = out_path(g, "", "models/" + model_names()[i] + ".json");
            write_text(path, to_json(set[i]).dump(1));
            summary["models"][model_names()[i]] = i == 0 ? json(path) : to_json(set[i]);
        }
        if (fit_experiment) {
            LatticeConfig lc{g.grid};
            auto a = aggregate_experiment(f, fit_points, fit_levels, lc);
            std::string c = "x";
            for (auto& n : a.names) c += ",cdf_" + n;
            for (auto& n : a.names) c += ",pi_" + n;
            c += ",sup1_cdf,sup2_cdf,sup2_pi\n";
            for (std::size_t i = 0; i < a.x.size(); ++i) {
                c += fmt(a.x[i]);
                for (auto& v : a.cdf) c += "," + fmt(v[i]);
                for (auto& v : a.pi) c += "," + fmt(v[i]);
                c += "," + fmt(a.sup1_cdf[i]) + "," + fmt(a.sup2_cdf[i]) + "," + fmt(a.sup2_pi[i]) + "\n";
            }
            write_text(out_path(g, "", "curves.csv"), c);
            std::string r = "beta";
            for (auto& n : a.names) r += "," + n;
            r += ",wr,ma1\n";
            for (std::size_t k = 0; k < a.rvar_beta.size(); ++k) {
                r += fmt(a.rvar_beta[k]);
                for (auto& v : a.rvar) r += "," + fmt(v[k]);
                r += "," + fmt(a.rvar_wr[k]) + "," + fmt(a.rvar_ma1[k]) + "\n";
            }
            write_text(out_path(g, "", "rvar.csv"), r);
            std::string e = "alpha";
            for (auto& n : a.names) e += "," + n;
            e += ",wr,ma1,ma2\n";
            for (std::size_t k = 0; k < a.es_alpha.size(); ++k) {
                e += fmt(a.es_alpha[k]);
                for (auto& v : a.es) e += "," + fmt(v[k]);
                e += "," + fmt(a.es_wr[k]) + "," + fmt(a.es_ma1[k]) + "," + fmt(a.es_ma2[k]) + "\n";
            }
            write_text(out_path(g, "", "es.csv"), e);
            std::string jcsv = "x,jump\n";
            for (auto& j : a.jumps) jcsv += fmt(j.x) + "," + fmt(j.size) + "\n";
            write_text(out_path(g, "", "jumps.csv"), jcsv);
            summary["jumps"] = json::array();
            for (auto& j : a.jumps) summary["jumps"].push_back({{"x", j.x}, {"size", j.size}});
        }
        print(summary);
    });

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "supremum of a set of distributions under FSD or SSD");
    std::string agg_order = "ssd", agg_out, agg_env;
    std::vector<std::string> agg_in;
    std::size_t agg_points = 401;
    agg->add_option("--order", agg_order, "fsd or ssd");
    agg->add_option("--in", agg_in, "distribution files (.json or atoms .csv)")->required();
    agg->add_option("--out", agg_out, "supremum JSON (default <out-dir>/sup.json)");
    agg->add_option("--envelope", agg_env, "envelope trace CSV (default <out-dir>/envelope.csv)");
    agg->add_option("--points", agg_points, "trace grid size");
    agg->callback([&] {
        auto set = load_all(agg_in);
        auto order = parse_order(agg_order);
        auto r = supremum(order, set, LatticeConfig{g.grid});
        auto sup_path = out_path(g, agg_out, "sup.json"), env_path = out_path(g, agg_env, "envelope.csv");
        write_text(sup_path, to_json(r.sup).dump(1));
        auto [lo, hi] = support_range(set);
        std::string s = "x,pi,cdf\n";
        for (std::size_t i = 0; i < agg_points; ++i) {
            double x = agg_points == 1 ? lo : lo + (hi - lo) * double(i) / double(agg_points - 1);
            s += fmt(x) + "," + fmt(pi(r.sup, x)) + "," + fmt(cdf(r.sup, x)) + "\n";
        }
        write_text(env_path, s);
        print({{"order", agg_order}, {"family", r.sup.family()}, {"exact", r.exact}, {"pi_error", r.pi_error}, {"sup", sup_path}, {"envelope", env_path}});
    });

    // risk
    auto* risk = app.add_subcommand("risk", "point, worst-case or aggregated risk value");
    std::string risk_measure, risk_approach = "point";
    std::vector<std::string> risk_in;
    risk->add_option("--measure", risk_measure, "var:a | es:a | rvar:a:b | pd:k | expectile:a | kusuoka:@file.json")->required();
    risk->add_option("--approach", risk_approach, "point, wr, ma1 or ma2");
    risk->add_option("--in", risk_in, "distribution files")->required();
    risk->callback([&] {
        auto r = parse_measure(risk_measure);
        std::vector<std::string> names;
        DistributionList set;
        for (auto& f : risk_in)
            for (auto& d : load_distributions(f)) set.push_back(d), names.push_back(f);
        if (set.empty()) throw DomainError("no input distributions");
        json out{{"measure", describe(r)}, {"approach", risk_approach}};
        LatticeConfig lc{g.grid};
        if (risk_approach == "point") {
            if (set.size() != 1) throw DomainError("approach point expects exactly one distribution");
            out["value"] = evaluate(r, set[0]);
            out["model_used"] = names[0];
        } else if (risk_approach == "wr") {
            std::size_t best = 0;
            std::vector<double> vals;
            for (std::size_t i = 0; i < set.size(); ++i) {
                vals.push_back(evaluate(r, set[i]));
                if (vals[i] > vals[best]) best = i;
            }
            out["value"] = vals[best];
            out["model_used"] = names[best];
        } else if (risk_approach == "ma1" || risk_approach == "ma2") {
            auto order = risk_approach == "ma1" ? Order::FSD : Order::SSD;
            if (order == Order::SSD && !consistent_with(r, Order::SSD))
                throw UnsupportedError(describe(r) + " is not consistent with second-order dominance");
            auto s = supremum(order, set, lc);
            out["value"] = evaluate(r, s.sup);
            out["model_used"] = risk_approach == "ma1" ? "sup_fsd" : "sup_ssd";
            out["exact"] = s.exact;
        } else {
            throw DomainError("unknown approach '" + risk_approach + "'");
        }
        print(out);
    });

    // robust-model
    auto* rm = app.add_subcommand("robust-model", "aggregated model of a Wasserstein ball or mean-variance class");
    std::string rm_set, rm_bench, rm_order = "ssd", rm_out, rm_q;
    std::size_t rm_levels = 199;
    rm->add_option("--set", rm_set, "wasserstein:p=2,eps=0.1 or meanvar:mu=0,sigma=1")->required();
    rm->add_option("--benchmark", rm_bench, "benchmark distribution for wasserstein sets");
    rm->add_option("--order", rm_order, "fsd or ssd");
    rm->add_option("--out", rm_out, "model JSON (default <out-dir>/model.json)");
    rm->add_option("--quantiles", rm_q, "quantile table CSV (default <out-dir>/quantiles.csv)");
    rm->add_option("--levels", rm_levels, "number of quantile levels");
    rm->callback([&] {
        auto kv = key_values(rm_set);
        auto get = [&](const std::string& k, double def) { return kv.count(k) ? kv.at(k) : def; };
        auto order = parse_order(rm_order);
        Distribution model = PointMass{0.0};
        std::string kind = rm_set.substr(0, rm_set.find(':'));
        if (kind == "wasserstein") {
            if (rm_bench.empty()) throw DomainError("wasserstein sets need --benchmark");
            auto bench = load_distributions(rm_bench);
            if (bench.size() != 1) throw DomainError("benchmark file must hold one distribution");
            WassersteinBall b{get("p", 2.0), get("eps", 0.0), bench[0]};
            model = order == Order::SSD ? wasserstein_sup_ssd(b) : wasserstein_sup_fsd(b, g.grid);
        } else if (kind == "meanvar") {
            MeanVarianceClass c{get("mu", 0.0), get("sigma", 1.0)};
            model = order == Order::SSD ? mv_sup_ssd(c) : mv_sup_fsd(c);
        } else {
            throw DomainError("unknown uncertainty set '" + kind + "'");
        }
        auto mpath = out_path(g, rm_out, "model.json"), qpath = out_path(g, rm_q, "quantiles.csv");
        write_text(mpath, to_json(model).dump(1));
        std::string s = "level,quantile\n";
        for (std::size_t i = 1; i <= rm_levels; ++i) {
            double a = double(i) / double(rm_levels + 1);
            s += fmt(a) + "," + fmt(quantile(model, a)) + "\n";
        }
        write_text(qpath, s);
        print({{"set", rm_set}, {"order", rm_order}, {"family", model.family()}, {"model", mpath}, {"quantiles", qpath}});
    });

    // optimize
    auto* opt = app.add_subcommand("optimize", "solve a robust program");
    std::string opt_prog, opt_approach = "ma2", opt_out;
    opt->add_option("--program", opt_prog, "program JSON")->required();
    opt->add_option("--approach", opt_approach, "wr, ma2 or saa");
    opt->add_option("--out", opt_out, "result JSON");
    opt->callback([&] {
        auto prog = program_from_json(read_json(opt_prog));
        prog.approach = parse_approach(opt_approach);
        prog.solver = solver(g);
        auto r = solve_program(prog);
        auto j = to_json(r, prog.approach);
        if (!opt_out.empty()) write_text(opt_out, j.dump(2));
        print(j);
    });

    // bench
    auto* bench = app.add_subcommand("bench", "timing benchmarks");
    bench->require_subcommand(1);
    auto* nv = bench->add_subcommand("newsvendor", "WR vs MA2 newsvendor sweep");
    std::vector<std::string> nv_sweep;
    std::vector<int> nv_values;
    std::string nv_out;
    int nv_reps = 5;
    nv->add_option("--sweep", nv_sweep, "d, n, nw, W or N (repeatable; default all)");
    nv->add_option("--values", nv_values, "override the sweep values");
    nv->add_option("--reps", nv_reps, "repetitions per cell (median reported)");
    nv->add_option("--out", nv_out, "CSV (default <out-dir>/bench.csv)");
    nv->callback([&] {
        if (nv_sweep.empty()) nv_sweep = {"d", "n", "nw", "W", "N"};
        std::vector<BenchRow> rows;
        for (auto& v : nv_sweep) {
            auto vals = nv_values.empty() ? default_sweep_values(v) : nv_values;
            auto r = bench_newsvendor(v, vals, nv_reps, g.seed, solver(g));
            rows.insert(rows.end(), r.begin(), r.end());
        }
        auto path = out_path(g, nv_out, "bench.csv");
        write_text(path, bench_csv(rows));
        print({{"rows", rows.size()}, {"out", path}});
    });

    // backtest
    auto* bt = app.add_subcommand("backtest", "rolling-window portfolio backtest");
    std::string bt_prices, bt_format = "wide", bt_measure = "pd:2", bt_bench = "t", bt_report = "csv", bt_prefix;
    std::vector<std::string> bt_approaches;
    BacktestConfig cfg;
    bt->add_option("--prices", bt_prices, "price CSV")->required();
    bt->add_option("--format", bt_format, "wide or long");
    bt->add_option("--measure", bt_measure, "es:a or pd:k");
    bt->add_option("--eps", cfg.eps, "Wasserstein radius");
    bt->add_option("--r0", cfg.r0, "annualized return target");
    bt->add_option("--m", cfg.m, "periods per year");
    bt->add_option("--p", cfg.p, "Wasserstein order");
    bt->add_option("--a", cfg.a, "norm on asset space");
    bt->add_option("--train-window", cfg.train_window, "training days");
    bt->add_option("--risk-free", cfg.risk_free, "annual risk-free rate for the Sharpe ratio");
    bt->add_option("--benchmark", bt_bench, "t or normal");
    bt->add_option("--approaches", bt_approaches, "subset of SAA Markowitz W-WR W-MA2 MV-WR MV-MA1 MV-MA2");
    bt->add_option("--report-format", bt_report, "csv or json");
    bt->add_option("--prefix", bt_prefix, "file name prefix");
    bt->callback([&] {
        auto t = ingest_csv(bt_prices, bt_format);
        cfg.measure = parse_measure(bt_measure);
        cfg.seed = g.seed;
        cfg.solver = solver(g);
        if (bt_bench == "t")
            cfg.benchmark = Elliptical::Kind::StudentT;
        else if (bt_bench == "normal")
            cfg.benchmark = Elliptical::Kind::Normal;
        else
            throw DomainError("unknown benchmark '" + bt_bench + "'");
        if (!bt_approaches.empty()) {
            cfg.strategies.clear();
            for (auto& a : bt_approaches) cfg.strategies.push_back(parse_strategy(a));
        }
        auto rep = backtest(t, cfg);
        auto files = report_emit(rep, g.out_dir, bt_report, bt_prefix);
        json out{{"days", rep.dates.size()}, {"files", files}};
        for (auto& p : rep.paths)
            out["metrics"].push_back({{"approach", to_string(p.strategy)}, {"AR", p.ar}, {"AV", p.av}, {"SR", p.sr}, {"TC", p.tc}, {"infeasible_days", p.infeasible_days}});
        print(out);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const UnboundedError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const InvalidPiError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
