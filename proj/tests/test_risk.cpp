#include <aggrisk/risk.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace aggrisk;

namespace {

Distribution random_atoms(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-3.0, 3.0), w(0.05, 1.0);
    std::vector<double> xs(n), ps(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        xs[i] = u(rng);
        s += ps[i] = w(rng);
    }
    for (auto& p : ps) p /= s;
    return make_atoms(xs, ps, 1e-9);
}

DistributionList random_set(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> ns(2, 5), na(1, 6);
    DistributionList set;
    int n = ns(rng);
    for (int i = 0; i < n; ++i) set.push_back(random_atoms(rng, na(rng)));
    return set;
}

// ES by sorting atoms and filling the top 1 - alpha mass by hand
double es_oracle(const Distribution& d, double alpha) {
    const auto& a = *d.as<Atoms>();
    double need = 1.0 - alpha, s = 0.0;
    for (std::size_t i = a.size(); i-- > 0 && need > 0.0;) {
        double take = std::min(need, a.p[i]);
        s += take * a.x[i];
        need -= take;
    }
    return s / (1.0 - alpha);
}

// min over a dense grid plus atoms of x + pi(x)/(1-alpha)
double es_dual_oracle(const Distribution& d, double alpha) {
    const auto& a = *d.as<Atoms>();
    double best = INFINITY;
    auto f = [&](double x) {
        double p = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) p += a.p[i] * std::max(a.x[i] - x, 0.0);
        return x + p / (1.0 - alpha);
    };
    for (double x : a.x) best = std::min(best, f(x));
    return best;
}

std::vector<RiskMeasure> catalogue() {
    return {VaR{0.9},   ES{0.0},           ES{0.8},  RVaR{0.2, 0.7}, RVaR{0.5, 1.0},
            PD{1.0},    PD{5.0},           Expectile{0.5}, Expectile{0.8},
            Kusuoka{{{{0.5, 0.5}, {0.1, 0.9}}, {{1.0}, {0.6}}}}};
}

Distribution example1_f2() { return make_atoms({-7.0 / 3.0, 4.0}, {0.75, 0.25}); }

} // namespace

TEST(Risk, ParameterDomains) {
    EXPECT_THROW(RiskMeasure(VaR{1.0}), DomainError);
    EXPECT_THROW(RiskMeasure(ES{1.0}), DomainError);
    EXPECT_THROW(RiskMeasure(RVaR{0.5, 0.5}), DomainError);
    EXPECT_THROW(RiskMeasure(PD{0.5}), DomainError);
    EXPECT_THROW(RiskMeasure(Expectile{0.4}), DomainError);
    EXPECT_THROW(RiskMeasure(Kusuoka{{{{0.5, 0.6}, {0.1, 0.2}}}}), DomainError);
    EXPECT_NO_THROW(RiskMeasure(Kusuoka{{{{0.5, 0.5}, {0.1, 0.2}}}}));
}

TEST(Risk, ConsistencyTags) {
    auto t = consistency(VaR{0.5});
    EXPECT_TRUE(t.fsd_consistent);
    EXPECT_FALSE(t.ssd_consistent);
    EXPECT_FALSE(consistency(RVaR{0.1, 0.5}).ssd_consistent);
    EXPECT_TRUE(consistency(RVaR{0.1, 1.0}).ssd_consistent);
    EXPECT_TRUE(consistency(ES{0.9}).ssd_consistent);
    EXPECT_TRUE(consistency(PD{3.0}).ssd_consistent);
    EXPECT_TRUE(consistency(Expectile{0.6}).ssd_consistent);
}

TEST(Risk, SimpleValues) {
    auto d = make_atoms({-1.0, 1.0}, {0.5, 0.5});
    EXPECT_DOUBLE_EQ(evaluate(ES{0.5}, d), 1.0);
    EXPECT_DOUBLE_EQ(evaluate(ES{0.0}, d), 0.0);
    EXPECT_DOUBLE_EQ(evaluate(VaR{0.5}, d), -1.0);
    EXPECT_DOUBLE_EQ(evaluate(PD{1.0}, d), 0.0);
    EXPECT_NEAR(evaluate(Expectile{0.5}, d), 0.0, 1e-12);
    // PD_2 = (1/4)(-1) + (3/4)(1)
    EXPECT_DOUBLE_EQ(evaluate(PD{2.0}, d), 0.5);
    EXPECT_DOUBLE_EQ(evaluate(RVaR{0.5, 1.0}, d), 1.0);
}

TEST(Risk, ExpectileHalfIsMean) {
    for (Distribution d : {Distribution(Normal{0.4, 2.0}), Distribution(Logistic{-1.0, 0.3}),
                           make_atoms({0.0, 1.0, 5.0}, {0.2, 0.5, 0.3})})
        EXPECT_NEAR(evaluate(Expectile{0.5}, d), mean(d), 1e-9) << d.family();
}

TEST(Risk, EsPrimalDualAgree) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> lv(0.0, 0.99);
    for (int rep = 0; rep < 50; ++rep) {
        auto d = random_atoms(rng, 1 + rep % 7);
        double a = lv(rng);
        EXPECT_NEAR(es(d, a), es_oracle(d, a), 1e-12);
        EXPECT_NEAR(es_dual(d, a), es_dual_oracle(d, a), 1e-12);
        EXPECT_NEAR(es_primal(d, a), es_dual(d, a), 1e-12);
    }
}

TEST(Risk, ContinuousFamilies) {
    Distribution n = Normal{0.0, 1.0};
    // phi(z_{0.95}) / 0.05, frozen from a level-space quadrature
    EXPECT_NEAR(evaluate(ES{0.95}, n), 2.0627128075074253, 1e-9);
    EXPECT_NEAR(evaluate(PD{1.0}, n), 0.0, 1e-12);
    // PD_2 of N(0,1) = 1/sqrt(pi)
    EXPECT_NEAR(evaluate(PD{2.0}, n), 1.0 / std::sqrt(M_PI), 1e-9);
    Distribution g = QuantileGrid{{0.1, 0.4, 0.5, 0.9}, {-1.0, 0.0, 0.0, 2.5}};
    auto f = [&](double s, double t) { return 3.0 * s * s * (s < 0.5 ? quantile(g, s) : quantile_upper(g, t)); };
    double pd_ref = 0.0;
    for (auto [lo, hi] : {std::pair{0.0, 0.1}, {0.1, 0.4}, {0.4, 0.5}, {0.5, 0.9}, {0.9, 1.0}})
        pd_ref += numeric::integrate_levels(f, lo, hi);
    EXPECT_NEAR(evaluate(PD{3.0}, g), pd_ref, 1e-12);
}

TEST(Risk, TranslationAndScale) {
    std::mt19937_64 rng(32);
    for (int rep = 0; rep < 20; ++rep) {
        auto d = random_atoms(rng, 5);
        for (auto& r : catalogue()) {
            double v = evaluate(r, d);
            EXPECT_NEAR(evaluate(r, affine(d, 1.5, 1.0)), v + 1.5, 1e-9) << describe(r);
            EXPECT_NEAR(evaluate(r, affine(d, 0.0, 2.5)), 2.5 * v, 1e-9) << describe(r);
        }
    }
}

TEST(Risk, ConsistentWithDominance) {
    std::mt19937_64 rng(33);
    for (int rep = 0; rep < 40; ++rep) {
        auto set = random_set(rng);
        for (Order o : {Order::FSD, Order::SSD}) {
            auto s = supremum(o, set).sup;
            for (auto& r : catalogue()) {
                if (!consistent_with(r, o)) continue;
                for (auto& d : set) EXPECT_LE(evaluate(r, d), evaluate(r, s) + 1e-9) << describe(r);
            }
        }
    }
}

TEST(Risk, ExampleOne) {
    DistributionList set{make_atoms({0.0}, {1.0}), example1_f2()};
    EXPECT_NEAR(wr_value(ES{0.5}, set), 5.0 / 6.0, 1e-12);
    EXPECT_NEAR(ma_value(ES{0.5}, Order::SSD, set), 4.0 / 3.0, 1e-12);
    auto rep = cema_check(ES{0.5}, Order::SSD, set, 1);
    EXPECT_NEAR(rep.gap, 0.5, 1e-12);
}

TEST(Risk, ExampleTwoMean) {
    DistributionList set{make_atoms({-1.0}, {1.0})};
    for (int n = 2; n <= 10; ++n) set.push_back(make_atoms({-double(n), 0.0}, {1.0 / n, 1.0 - 1.0 / n}));
    // every member has mean -1; the finite aggregate is the last member, so both routes give -1
    EXPECT_NEAR(ma_value(ES{0.0}, Order::SSD, set), -1.0, 1e-12);
    EXPECT_NEAR(wr_value(ES{0.0}, set), -1.0, 1e-12);
    // the aggregate of the whole family is delta_0; its mean is the limit of the finite aggregates
    set.push_back(make_atoms({0.0}, {1.0}));
    EXPECT_NEAR(ma_value(ES{0.0}, Order::SSD, set), 0.0, 1e-12);
}

TEST(Risk, SingletonSet) {
    auto d = make_atoms({0.0, 3.0}, {0.7, 0.3});
    for (auto& r : catalogue()) {
        EXPECT_DOUBLE_EQ(wr_value(r, {d}), evaluate(r, d));
        EXPECT_DOUBLE_EQ(ma_value(r, Order::SSD, {d}), evaluate(r, d));
    }
}

TEST(Risk, VaRWorstCaseEqualsFsdAggregate) {
    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> lv(0.01, 0.99);
    for (int rep = 0; rep < 100; ++rep) {
        auto set = random_set(rng);
        RiskMeasure r = VaR{lv(rng)};
        EXPECT_EQ(wr_value(r, set), ma_value(r, Order::FSD, set));
    }
}

TEST(Risk, GapChain) {
    std::mt19937_64 rng(35);
    for (int rep = 0; rep < 100; ++rep) {
        auto set = random_set(rng);
        for (RiskMeasure r : {RiskMeasure(ES{0.9}), RiskMeasure(PD{5.0}), RiskMeasure(Expectile{0.75})}) {
            double wr = wr_value(r, set), m2 = ma_value(r, Order::SSD, set), m1 = ma_value(r, Order::FSD, set);
            EXPECT_LE(wr, m2 + 1e-9) << describe(r);
            EXPECT_LE(m2, m1 + 1e-9) << describe(r);
        }
    }
}

TEST(Risk, EsMinimaxIdentity) {
    std::mt19937_64 rng(36);
    for (int rep = 0; rep < 50; ++rep) {
        auto set = random_set(rng);
        double alpha = 0.9, best = INFINITY;
        // kinks of max pi: atom locations and crossings of pi pairs between them
        std::vector<double> cand;
        for (auto& d : set) cand.insert(cand.end(), d.as<Atoms>()->x.begin(), d.as<Atoms>()->x.end());
        std::sort(cand.begin(), cand.end());
        auto knots = cand;
        for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
            double lo = knots[k], hi = knots[k + 1];
            if (hi <= lo) continue;
            for (auto& f : set)
                for (auto& g : set) {
                    double sf = (pi(f, hi) - pi(f, lo)) / (hi - lo), sg = (pi(g, hi) - pi(g, lo)) / (hi - lo);
                    if (sf == sg) continue;
                    double x = lo + (pi(g, lo) - pi(f, lo)) / (sf - sg);
                    if (x > lo && x < hi) cand.push_back(x);
                }
        }
        for (double x : cand) {
            double m = 0.0;
            for (auto& e : set) m = std::max(m, pi(e, x));
            best = std::min(best, x + m / (1.0 - alpha));
        }
        EXPECT_NEAR(ma_value(ES{alpha}, Order::SSD, set), best, 1e-8);
    }
}

TEST(Risk, CemaOnPolytopes) {
    std::mt19937_64 rng(37);
    for (int rep = 0; rep < 10; ++rep) {
        auto set = random_set(rng);
        auto v = cema_check(VaR{0.9}, Order::FSD, set, 8);
        EXPECT_LE(v.gap, 1e-9);
        EXPECT_GE(v.gap, -1e-9);
        auto e = cema_check(ES{0.9}, Order::SSD, set, 8);
        EXPECT_GE(e.gap, -1e-9);
        EXPECT_LE(e.gap, std::max(1e-4, e.grid_bound));
    }
}

TEST(Risk, ComonotoneAdditivityOfFsdAggregate) {
    // X = f(Z), Y = g(Z) with f, g increasing; each scenario reweights the support of Z
    std::mt19937_64 rng(38);
    std::uniform_real_distribution<double> u(-2.0, 2.0), w(0.05, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> fx(5), gy(5);
        for (auto& v : fx) v = u(rng);
        for (auto& v : gy) v = u(rng);
        std::sort(fx.begin(), fx.end());
        std::sort(gy.begin(), gy.end());
        DistributionList xs, ys, sums;
        for (int s = 0; s < 3; ++s) {
            std::vector<double> ps(5), qs(5);
            double t = 0.0;
            for (auto& p : ps) t += p = w(rng);
            for (auto& p : ps) p /= t;
            for (int i = 0; i < 5; ++i) qs[i] = fx[i] + gy[i];
            xs.push_back(make_atoms(fx, ps, 1e-9));
            ys.push_back(make_atoms(gy, ps, 1e-9));
            sums.push_back(make_atoms(qs, ps, 1e-9));
        }
        auto sx = sup_fsd(xs).sup, sy = sup_fsd(ys).sup, ss = sup_fsd(sums).sup;
        for (double a : {0.1, 0.2, 0.35, 0.5, 0.6, 0.8, 0.95})
            EXPECT_NEAR(quantile(ss, a), quantile(sx, a) + quantile(sy, a), 1e-12);
        for (RiskMeasure r : {RiskMeasure(VaR{0.7}), RiskMeasure(RVaR{0.3, 0.9}), RiskMeasure(PD{3.0})})
            EXPECT_NEAR(evaluate(r, ss), evaluate(r, sx) + evaluate(r, sy), 1e-12) << describe(r);
        // worst case need not be additive
        (void)wr_value(ES{0.5}, sums);
    }
}
