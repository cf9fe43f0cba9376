#include <aggrisk/lattice.hpp>

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

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += x = e(rng);
    for (auto& x : w) x /= s;
    return w;
}

// brute-force min of step CDFs, independent of sup_fsd
double min_cdf(const DistributionList& set, double x) {
    double c = 1.0;
    for (auto& d : set) c = std::min(c, cdf(d, x));
    return c;
}

void expect_same_atoms(const Distribution& a, const Distribution& b, double tol) {
    const auto& x = *a.as<Atoms>();
    const auto& y = *b.as<Atoms>();
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_NEAR(x.x[i], y.x[i], tol);
        EXPECT_NEAR(x.p[i], y.p[i], tol);
    }
}

Distribution example1_f2() { return make_atoms({-7.0 / 3.0, 4.0}, {0.75, 0.25}); }

} // namespace

TEST(Lattice, DominatesPointMasses) {
    EXPECT_TRUE(dominates(Order::FSD, PointMass{0.0}, PointMass{1.0}));
    EXPECT_FALSE(dominates(Order::FSD, PointMass{1.0}, PointMass{0.0}));
    EXPECT_TRUE(dominates(Order::SSD, PointMass{0.0}, PointMass{1.0}));
}

TEST(Lattice, ExampleOneIncomparable) {
    auto f1 = make_atoms({0.0}, {1.0});
    auto f2 = example1_f2();
    EXPECT_FALSE(dominates(Order::SSD, f1, f2));
    EXPECT_FALSE(dominates(Order::SSD, f2, f1));
}

TEST(Lattice, ExampleOneSupremum) {
    auto r = sup_ssd({make_atoms({0.0}, {1.0}), example1_f2()});
    EXPECT_TRUE(r.exact);
    const auto& a = *r.sup.as<Atoms>();
    ASSERT_EQ(a.size(), 2u);
    EXPECT_NEAR(a.x[0], -4.0 / 3.0, 1e-12);
    EXPECT_NEAR(a.p[0], 0.75, 1e-12);
    EXPECT_NEAR(a.x[1], 4.0, 1e-12);
    EXPECT_NEAR(a.p[1], 0.25, 1e-12);
}

TEST(Lattice, ExampleOneGeneralEpsilon) {
    for (double eps : {0.1, 0.25, 0.4}) {
        // F2 = (1-eps) delta_{-(2-eps)/(1-eps)} + eps delta_{1/eps}
        auto f2 = make_atoms({-(2.0 - eps) / (1.0 - eps), 1.0 / eps}, {1.0 - eps, eps});
        auto r = sup_ssd({PointMass{0.0}, f2});
        const auto& a = *r.sup.as<Atoms>();
        ASSERT_EQ(a.size(), 2u);
        EXPECT_NEAR(a.x[0], -1.0 / (1.0 - eps), 1e-12);
        EXPECT_NEAR(a.x[1], 1.0 / eps, 1e-12);
        EXPECT_NEAR(a.p[1], eps, 1e-12);
    }
}

TEST(Lattice, ExampleTwoFiniteFamilies) {
    // F_n = (1/n) delta_{-n} + (1 - 1/n) delta_0; the finite envelope is attained by F_N
    // and the envelope tends to (-x)_+ pointwise, the aggregate of the whole family
    auto fam = [](int n) { return n == 1 ? make_atoms({-1.0}, {1.0}) : make_atoms({-double(n), 0.0}, {1.0 / n, 1.0 - 1.0 / n}); };
    double prev_gap = INFINITY;
    for (int N : {1, 2, 10, 50, 1000}) {
        DistributionList set;
        for (int n = 1; n <= N; ++n) set.push_back(fam(n));
        auto r = sup_ssd(set);
        expect_same_atoms(r.sup, fam(N), 1e-12);
        double gap = pi(r.sup, -1.0) - 1.0;  // (-x)_+ at x = -1 is 1
        EXPECT_LE(std::abs(gap), 1.0 / N + 1e-12);
        EXPECT_LE(std::abs(gap), prev_gap);
        prev_gap = std::abs(gap);
    }
}

TEST(Lattice, SupFsdExamples) {
    auto r = sup_fsd({PointMass{0.0}, PointMass{1.0}});
    EXPECT_EQ(r.sup.as<Atoms>()->x, std::vector<double>{1.0});
    auto s = sup_fsd({make_atoms({0.0, 2.0}, {0.6, 0.4}), make_atoms({1.0}, {1.0})});
    expect_same_atoms(s.sup, make_atoms({1.0, 2.0}, {0.6, 0.4}), 1e-15);
    auto single = make_atoms({0.5, 1.0}, {0.3, 0.7});
    expect_same_atoms(sup_fsd({single}).sup, single, 0.0);
    expect_same_atoms(sup_ssd({single}).sup, single, 0.0);
}

TEST(Lattice, SupFsdIsMinOfCdfs) {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 100; ++rep) {
        auto set = random_set(rng);
        auto r = sup_fsd(set);
        ASSERT_TRUE(r.exact);
        for (auto& d : set)
            for (double x : d.as<Atoms>()->x)
                for (double off : {-1e-9, 0.0, 1e-9}) EXPECT_NEAR(cdf(r.sup, x + off), min_cdf(set, x + off), 1e-12);
    }
}

TEST(Lattice, SupSsdIsEnvelope) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int rep = 0; rep < 100; ++rep) {
        auto set = random_set(rng);
        auto r = sup_ssd(set);
        for (int i = 0; i < 50; ++i) {
            double x = u(rng), m = 0.0;
            for (auto& d : set) m = std::max(m, pi(d, x));
            EXPECT_NEAR(pi(r.sup, x), m, 1e-12 * (1.0 + m));
            EXPECT_NEAR((*r.witness)(x), m, 1e-12 * (1.0 + m));
        }
        for (auto& d : set) EXPECT_TRUE(dominates(Order::SSD, d, r.sup, {}, 1e-12));
    }
}

TEST(Lattice, SsdBelowFsd) {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        auto set = random_set(rng);
        EXPECT_TRUE(dominates(Order::SSD, sup_ssd(set).sup, sup_fsd(set).sup, {}, 1e-12));
    }
}

TEST(Lattice, HullInvariance) {
    std::mt19937_64 rng(24);
    for (int rep = 0; rep < 100; ++rep) {
        auto set = random_set(rng);
        auto ext = set;
        for (int j = 0; j < 10; ++j) ext.push_back(convex_mixture(set, random_simplex(rng, set.size())));
        expect_same_atoms(sup_ssd(ext).sup, sup_ssd(set).sup, 1e-12);
        expect_same_atoms(sup_fsd(ext).sup, sup_fsd(set).sup, 1e-12);
    }
}

TEST(Lattice, Idempotence) {
    std::mt19937_64 rng(25);
    for (int rep = 0; rep < 50; ++rep) {
        auto set = random_set(rng);
        for (Order o : {Order::FSD, Order::SSD}) {
            auto s = supremum(o, set).sup;
            auto again = set;
            again.push_back(s);
            expect_same_atoms(supremum(o, again).sup, s, 1e-12);
        }
    }
}

TEST(Lattice, ConvexMixture) {
    auto a = make_atoms({0.0}, {1.0});
    auto b = make_atoms({1.0}, {1.0});
    expect_same_atoms(convex_mixture({a, b}, {1.0, 0.0}), a, 0.0);
    expect_same_atoms(convex_mixture({a, b}, {0.5, 0.5}), make_atoms({0.0, 1.0}, {0.5, 0.5}), 0.0);
    EXPECT_THROW(convex_mixture({a, b}, {0.5, 0.6}), DomainError);
    Distribution n = Normal{1.0, 2.0};
    auto m = convex_mixture({n, b}, {0.25, 0.75});
    EXPECT_NEAR(mean(m), 0.25 * 1.0 + 0.75 * 1.0, 1e-12);
}

TEST(Lattice, ContinuousInputsApproximate) {
    DistributionList set{Normal{0.0, 1.0}, Logistic{0.3, 0.5}};
    auto r = sup_ssd(set);
    EXPECT_FALSE(r.exact);
    EXPECT_GT(r.pi_error, 0.0);
    for (double x = -3.0; x <= 3.0; x += 0.25) {
        double m = std::max(pi(set[0], x), pi(set[1], x));
        EXPECT_LE(std::abs(pi(r.sup, x) - m), r.pi_error + 1e-12);
    }
    auto f = sup_fsd(set);
    EXPECT_FALSE(f.exact);
    for (double u : {0.1, 0.5, 0.9})
        EXPECT_NEAR(quantile(f.sup, u), std::max(quantile(set[0], u), quantile(set[1], u)), 1e-4);
}
