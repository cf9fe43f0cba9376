#include <aggrisk/robustopt.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace aggrisk;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd col(std::vector<double> v) {
    MatrixXd m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

// ES of equally weighted sample by averaging the top (1 - alpha) mass
double sample_es(std::vector<double> v, double alpha) {
    std::sort(v.begin(), v.end(), std::greater<>());
    double N = double(v.size()), left = 1.0 - alpha, s = 0.0;
    for (double x : v) {
        double take = std::min(1.0 / N, left);
        s += take * x;
        left -= take;
        if (left <= 0.0) break;
    }
    return s / (1.0 - alpha);
}

RobustProgram small_newsvendor(std::uint64_t seed, int n = 3, int N = 40) {
    NewsvendorParams P;
    P.nw = 4;
    P.d = 2;
    P.n = n;
    P.W = 2;
    P.N = N;
    return make_newsvendor(P, seed);
}

VectorXd random_in_box(std::mt19937_64& rng, const BoxActions& b) {
    VectorXd a(b.lo.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = std::uniform_real_distribution<double>(b.lo[i], b.hi[i])(rng);
    return a;
}

// LP max theta^T u over {lo <= theta <= hi, sum theta = 1} by vertex enumeration:
// every vertex has all coordinates but one at a bound
double vertex_lp(const VectorXd& u, const VectorXd& lo, const VectorXd& hi) {
    const int N = int(u.size());
    double best = -INFINITY;
    for (int f = 0; f < N; ++f)
        for (int mask = 0; mask < (1 << N); ++mask) {
            double s = 0.0, v = 0.0;
            for (int i = 0; i < N; ++i) {
                if (i == f) continue;
                double t = (mask >> i) & 1 ? hi[i] : lo[i];
                s += t;
                v += t * u[i];
            }
            double tf = 1.0 - s;
            if (tf < lo[f] - 1e-15 || tf > hi[f] + 1e-15) continue;
            best = std::max(best, v + tf * u[f]);
        }
    return best;
}

} // namespace

TEST(Solver, QuadraticOnBox) {
    VectorXd target(3);
    target << 0.3, -2.0, 5.0;
    auto f = [&](const VectorXd& x, VectorXd& g) {
        g = 2.0 * (x - target);
        return (x - target).squaredNorm();
    };
    auto r = minimize_on_box(f, VectorXd::Constant(3, -1.0), VectorXd::Constant(3, 1.0));
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 0.3, 1e-4);
    EXPECT_NEAR(r.x[1], -1.0, 1e-6);
    EXPECT_NEAR(r.x[2], 1.0, 1e-6);
    EXPECT_NEAR(r.objective, 1.0 + 16.0, 1e-7);
    EXPECT_LE(r.lower_bound, r.objective);
}

TEST(Solver, SimplexLinearPicksVertex) {
    VectorXd c(4);
    c << 0.5, -0.2, 0.1, 0.3;
    auto f = [&](const VectorXd& w, VectorXd& g) {
        g = c;
        return c.dot(w);
    };
    auto r = minimize_on_simplex(f, 4);
    EXPECT_NEAR(r.objective, -0.2, 1e-7);
    EXPECT_NEAR(r.x[1], 1.0, 1e-6);
}

TEST(Solver, InfeasibleDetected) {
    MatrixXd A(1, 2);
    A << 1.0, 1.0;
    VectorXd b(1);
    b << 0.5;
    auto f = [](const VectorXd& w, VectorXd& g) {
        g.setZero(w.size());
        return 0.0;
    };
    EXPECT_THROW(minimize_on_simplex(f, 2, A, b), InfeasibleError);
}

TEST(RobustOpt, DegenerateSingleAsset) {
    std::vector<double> xs{0.3, -1.2, 2.5, 0.7, 1.1, -0.4};
    RobustProgram prog{SimplexActions{1, {}}, LinearLoss{}, FiniteCdfs{{col(xs)}}, ES{0.5}, Approach::WR, {}};
    EXPECT_NEAR(wr_program(prog).objective, sample_es(xs, 0.5), 1e-12);
    EXPECT_NEAR(ma2_program(prog).objective, sample_es(xs, 0.5), 1e-12);
    EXPECT_NEAR(saa_program(prog).objective, sample_es(xs, 0.5), 1e-12);
}

TEST(RobustOpt, NewsvendorMeanIsFlat) {
    NewsvendorLoss loss{VectorXd::Ones(1), VectorXd::Ones(1)};
    RobustProgram prog{BoxActions{VectorXd::Zero(1), VectorXd::Ones(1)}, loss, FiniteCdfs{{col({0.0, 1.0})}}, ES{0.0}, Approach::WR, {}};
    for (double a = 0.0; a <= 1.0; a += 0.125) {
        VectorXd av(1);
        av << a;
        EXPECT_NEAR(wr_objective(prog, av), 0.5, 1e-15);
        EXPECT_NEAR(ma2_objective(prog, av), 0.5, 1e-15);
    }
    auto r = wr_program(prog);
    EXPECT_NEAR(r.objective, 0.5, 1e-12);
    EXPECT_GE(r.action[0], 0.0);
    EXPECT_LE(r.action[0], 1.0);
}

TEST(RobustOpt, EsSpecialCaseMatchesThresholdScan) {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        auto prog = small_newsvendor(100 + rep);
        prog.measure = ES{0.8};
        const auto& B = std::get<BoxActions>(prog.actions);
        VectorXd a = random_in_box(rng, B);
        // golden-section min over x of max_i [x + E_i(L - x)_+ / (1 - alpha)]
        auto& F = std::get<FiniteCdfs>(prog.scenarios);
        std::vector<VectorXd> L;
        std::vector<double> cand;
        for (auto& c : F.clouds) {
            L.push_back(loss_values(prog.loss, a, c));
            cand.insert(cand.end(), L.back().data(), L.back().data() + L.back().size());
        }
        auto h = [&](double x) {
            double m = -INFINITY;
            for (auto& l : L) m = std::max(m, x + (l.array() - x).max(0.0).mean() / 0.2);
            return m;
        };
        double lo = *std::min_element(cand.begin(), cand.end()), hi = *std::max_element(cand.begin(), cand.end());
        const double r = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int it = 0; it < 200; ++it) {
            double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
            if (h(c) < h(d))
                hi = d;
            else
                lo = c;
        }
        double best = h(0.5 * (lo + hi));
        EXPECT_NEAR(ma2_objective(prog, a), best, 1e-9 * (1.0 + best));
        double wr = -INFINITY;
        for (auto& l : L) wr = std::max(wr, sample_es(std::vector<double>(l.data(), l.data() + l.size()), 0.8));
        EXPECT_NEAR(wr_objective(prog, a), wr, 1e-12 * (1.0 + wr));
    }
}

TEST(RobustOpt, FixedActionMatchesLatticeRoute) {
    std::mt19937_64 rng(32);
    for (int rep = 0; rep < 20; ++rep) {
        auto prog = small_newsvendor(200 + rep);
        VectorXd a = random_in_box(rng, std::get<BoxActions>(prog.actions));
        auto set = induced_losses(prog, a);
        double lattice = ma_value(prog.measure, Order::SSD, set);
        double ma2 = ma2_objective(prog, a);
        EXPECT_NEAR(ma2, lattice, 1e-9 * (1.0 + std::abs(lattice)));
        EXPECT_NEAR(wr_objective(prog, a), wr_value(prog.measure, set), 1e-9 * (1.0 + std::abs(lattice)));
    }
}

TEST(RobustOpt, StructuralGapAndSingleScenario) {
    for (int rep = 0; rep < 5; ++rep) {
        auto prog = small_newsvendor(300 + rep);
        auto wr = wr_program(prog), ma = ma2_program(prog);
        EXPECT_TRUE(wr.converged);
        EXPECT_TRUE(ma.converged);
        EXPECT_GE(ma.objective, wr.objective - 1e-6);
        EXPECT_NEAR(ma.objective, ma_value(prog.measure, Order::SSD, induced_losses(prog, ma.action)), 1e-5);
        EXPECT_EQ(wr.thresholds.size(), 3u * ma.thresholds.size());

        auto one = small_newsvendor(300 + rep, 1);
        EXPECT_NEAR(wr_program(one).objective, ma2_program(one).objective, 1e-6);
    }
}

TEST(RobustOpt, SubgradientInequality) {
    std::mt19937_64 rng(33);
    for (int rep = 0; rep < 10; ++rep) {
        auto prog = small_newsvendor(400 + rep);
        const auto& B = std::get<BoxActions>(prog.actions);
        for (int k = 0; k < 20; ++k) {
            VectorXd a = random_in_box(rng, B), b = random_in_box(rng, B), g;
            double fa = ma2_objective(prog, a, &g);
            EXPECT_GE(ma2_objective(prog, b), fa + g.dot(b - a) - 1e-9);
            fa = wr_objective(prog, a, &g);
            EXPECT_GE(wr_objective(prog, b), fa + g.dot(b - a) - 1e-9);
        }
    }
}

TEST(RobustOpt, ConvexAlongSegments) {
    std::mt19937_64 rng(34);
    for (int rep = 0; rep < 10; ++rep) {
        auto prog = small_newsvendor(500 + rep);
        prog.measure = ES{0.7};
        const auto& B = std::get<BoxActions>(prog.actions);
        VectorXd a = random_in_box(rng, B), b = random_in_box(rng, B);
        std::vector<double> v;
        for (int t = 0; t <= 10; ++t) v.push_back(ma2_objective(prog, a + (b - a) * (t / 10.0)));
        for (int t = 1; t < 10; ++t) EXPECT_LE(v[t], 0.5 * (v[t - 1] + v[t + 1]) + 1e-10);
    }
}

TEST(RobustOpt, RequiresSsdConsistentMeasure) {
    auto prog = small_newsvendor(1);
    prog.measure = VaR{0.9};
    EXPECT_THROW(ma2_program(prog), UnsupportedError);
}

TEST(Box, Examples) {
    BoxProbability box{MatrixXd::Zero(2, 1), VectorXd::Constant(2, 0.5), VectorXd::Constant(2, -0.25), VectorXd::Constant(2, 0.25)};
    VectorXd u(2);
    u << 1.0, 0.0;
    EXPECT_DOUBLE_EQ(box_worst_expectation(u, box), 0.75);
    u << 3.0, 3.0;
    EXPECT_DOUBLE_EQ(box_worst_expectation(u, box), 3.0);
    box.lower.setZero();
    box.upper.setZero();
    u << 2.0, 4.0;
    EXPECT_DOUBLE_EQ(box_worst_expectation(u, box), 3.0);
    box.lower.setConstant(0.1);
    EXPECT_THROW(box_worst_expectation(u, box), InfeasibleError);
}

TEST(Box, GreedyMatchesVertexEnumeration) {
    std::mt19937_64 rng(35);
    std::uniform_int_distribution<int> ns(1, 8);
    std::uniform_real_distribution<double> uu(-2.0, 2.0), r(0.0, 0.3);
    for (int rep = 0; rep < 100; ++rep) {
        int N = ns(rng);
        VectorXd th(N), u(N), lo(N), hi(N);
        for (int i = 0; i < N; ++i) th[i] = std::exponential_distribution<double>(1.0)(rng);
        th /= th.sum();
        for (int i = 0; i < N; ++i) {
            u[i] = uu(rng);
            lo[i] = -r(rng);
            hi[i] = r(rng);
        }
        BoxProbability box{MatrixXd::Zero(N, 1), th, lo, hi};
        auto bb = box_bounds(box);
        EXPECT_NEAR(box_worst_expectation(u, box), vertex_lp(u, bb.lo, bb.hi), 1e-12);
    }
}

TEST(Box, EsWrEqualsMa2) {
    std::mt19937_64 rng(36);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const int N = 6, d = 2;
        MatrixXd pts(N, d);
        for (int s = 0; s < N; ++s)
            for (int i = 0; i < d; ++i) pts(s, i) = z(rng);
        VectorXd th = VectorXd::Constant(N, 1.0 / N);
        BoxProbability box{pts, th, VectorXd::Constant(N, -0.08), VectorXd::Constant(N, 0.08)};
        NewsvendorLoss loss{VectorXd::Ones(d), VectorXd::Constant(d, 2.0)};
        BoxActions A{pts.colwise().minCoeff().transpose(), pts.colwise().maxCoeff().transpose()};
        RobustProgram prog{A, loss, box, ES{0.6}, Approach::WR, {}};
        VectorXd a = random_in_box(rng, A);
        EXPECT_NEAR(wr_objective(prog, a), ma2_objective(prog, a), 1e-7);
        auto wr = wr_program(prog), ma = ma2_program(prog);
        EXPECT_NEAR(wr.objective, ma.objective, 1e-6);
    }
}

TEST(Portfolio, ZeroRadiusWrEqualsMa2) {
    Elliptical e{Elliptical::Kind::Normal, 0.0, VectorXd(3), MatrixXd(3, 3)};
    e.mu << -0.001, 0.0005, -0.0002;
    e.sigma << 4e-4, 1e-4, 0.0, 1e-4, 3e-4, 5e-5, 0.0, 5e-5, 2e-4;
    WassersteinPortfolio m{e, 0.0, 2.0, 2.0, std::nullopt};
    auto wr = portfolio_wasserstein(m, PD{5}, Approach::WR), ma = portfolio_wasserstein(m, PD{5}, Approach::MA2);
    EXPECT_NEAR(wr.objective, ma.objective, 1e-12);
    EXPECT_LE((wr.weights - ma.weights).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Portfolio, SingletonSimplex) {
    Elliptical e{Elliptical::Kind::StudentT, 5.0, VectorXd::Constant(1, 0.01), MatrixXd::Constant(1, 1, 0.04)};
    WassersteinPortfolio m{e, 0.1, 2.0, 2.0, std::nullopt};
    auto r = portfolio_wasserstein(m, PD{10}, Approach::WR);
    double rho = power_distortion(StudentT::unit_variance(5.0), 10.0);
    EXPECT_NEAR(r.objective, 0.01 + rho * 0.2 + 10.0 / std::sqrt(19.0) * 0.1, 1e-12);
    auto s = portfolio_wasserstein(m, PD{10}, Approach::MA2);
    double xi = std::sqrt(M_PI) * std::tgamma(11.0) / (2.0 * std::tgamma(10.5));
    EXPECT_NEAR(s.objective, 0.01 + rho * 0.2 + xi * 0.1, 1e-12);
}

TEST(Portfolio, MeanVarOrderingAndKOne) {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd G(4, 4);
    for (int i = 0; i < 16; ++i) G.data()[i] = 0.01 * z(rng);
    MatrixXd S = G * G.transpose() + 1e-5 * MatrixXd::Identity(4, 4);
    VectorXd mu(4);
    for (int i = 0; i < 4; ++i) mu[i] = 0.001 * z(rng);
    for (double k : {2.0, 5.0, 20.0}) {
        double b = meanvar_coefficient(PD{k}, Approach::MA1), g = meanvar_coefficient(PD{k}, Approach::MA2),
               h = meanvar_coefficient(PD{k}, Approach::WR);
        EXPECT_GE(b, g);
        EXPECT_GE(g, h);
        VectorXd w = VectorXd::Constant(4, 0.25);
        double sd = std::sqrt(w.dot(S * w));
        EXPECT_GE(w.dot(mu) + b * sd, w.dot(mu) + g * sd);
        auto r1 = portfolio_meanvar(mu, S, PD{k}, Approach::MA1, std::nullopt);
        auto r2 = portfolio_meanvar(mu, S, PD{k}, Approach::MA2, std::nullopt);
        auto r3 = portfolio_meanvar(mu, S, PD{k}, Approach::WR, std::nullopt);
        EXPECT_GE(r1.objective, r2.objective - 1e-9);
        EXPECT_GE(r2.objective, r3.objective - 1e-9);
    }
    auto k1 = portfolio_meanvar(mu, S, PD{1}, Approach::MA2, std::nullopt);
    EXPECT_NEAR(k1.objective, mu.minCoeff(), 1e-8);
    EXPECT_NEAR(meanvar_coefficient(PD{1}, Approach::WR), 0.0, 0.0);
}

TEST(Portfolio, InfeasibleTargetNamesConstraint) {
    VectorXd mu = VectorXd::Constant(3, 0.001);
    ReturnTarget t{mu, 0.2, 250.0};
    try {
        markowitz(MatrixXd::Identity(3, 3), t);
        FAIL();
    } catch (const InfeasibleError& e) {
        EXPECT_NE(std::string(e.what()).find("return target"), std::string::npos);
    }
}

TEST(Portfolio, MarkowitzTwoAssets) {
    // interior minimizer of w^T S w on the line w = (t, 1 - t): t = (s22 - s12) / (s11 + s22 - 2 s12)
    MatrixXd S(2, 2);
    S << 4e-4, 1e-4, 1e-4, 9e-4;
    auto r = markowitz(S, std::nullopt);
    double t = (9e-4 - 1e-4) / (4e-4 + 9e-4 - 2e-4);
    EXPECT_NEAR(r.weights[0], t, 1e-5);
    VectorXd mu(2);
    mu << -0.002, 0.001;
    ReturnTarget tg{mu, 0.4, 250.0};  // needs w0 >= 0.86666...
    auto c = markowitz(S, tg);
    EXPECT_NEAR(c.weights[0], (0.0016 + 0.001) / 0.003, 1e-6);
}

TEST(Portfolio, SaaEsIsRockafellarUryasev) {
    std::mt19937_64 rng(38);
    std::normal_distribution<double> z(0.0, 1.0);
    MatrixXd X(60, 2);
    for (int s = 0; s < 60; ++s) X(s, 0) = 0.01 * z(rng), X(s, 1) = 0.02 * z(rng) - 0.002;
    auto r = saa_portfolio(X, ES{0.9}, std::nullopt);
    VectorXd L = X * r.weights;
    EXPECT_NEAR(r.objective, es(uniform_atoms(std::vector<double>(L.data(), L.data() + L.size())), 0.9), 1e-12);
    double best = INFINITY;
    for (int i = 0; i <= 20000; ++i) {
        double t = i / 20000.0;
        VectorXd w(2);
        w << t, 1.0 - t;
        VectorXd l = X * w;
        best = std::min(best, sample_es(std::vector<double>(l.data(), l.data() + l.size()), 0.9));
    }
    EXPECT_NEAR(r.objective, best, 1e-6);
    auto again = saa_portfolio(X, ES{0.9}, std::nullopt);
    EXPECT_EQ(again.objective, r.objective);
    EXPECT_EQ(again.weights, r.weights);
}

TEST(Newsvendor, GeneratorParameters) {
    NewsvendorParams P;
    auto a = make_newsvendor(P, 7), b = make_newsvendor(P, 7);
    const auto& l = std::get<NewsvendorLoss>(a.loss);
    EXPECT_EQ(l.beta, (VectorXd(3) << 1, 2, 3).finished());
    EXPECT_EQ(l.eta, (VectorXd(3) << 3, 2, 1).finished());
    const auto& K = *a.measure.as<Kusuoka>();
    ASSERT_EQ(K.scenarios.size(), 3u);
    for (auto& s : K.scenarios) {
        ASSERT_EQ(s.levels.size(), 10u);
        for (int j = 1; j <= 10; ++j) EXPECT_DOUBLE_EQ(s.levels[j - 1], (2.0 * j - 1.0) / 20.0);
    }
    const auto& fa = std::get<FiniteCdfs>(a.scenarios), &fb = std::get<FiniteCdfs>(b.scenarios);
    ASSERT_EQ(fa.clouds.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(fa.clouds[i].rows(), 100);
        EXPECT_EQ(fa.clouds[i], fb.clouds[i]);
    }
    auto w = program_size(P, Approach::WR), m = program_size(P, Approach::MA2);
    EXPECT_EQ(w.threshold_variables, 3u * m.threshold_variables);
    EXPECT_GT(w.variables, m.variables);
}

TEST(Newsvendor, BenchRowsComplete) {
    auto rows = bench_newsvendor("n", {1, 2}, 1, 3);
    ASSERT_EQ(rows.size(), 4u);
    for (auto& r : rows) {
        EXPECT_TRUE(std::isfinite(r.objective));
        EXPECT_GE(r.median_seconds, 0.0);
    }
    EXPECT_THROW(default_sweep_values("q"), DomainError);
}
