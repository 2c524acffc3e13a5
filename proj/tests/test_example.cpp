#include <gtest/gtest.h>

#include <cmath>

#include <qvilab/example.hpp>

using namespace qvi;
using namespace qvi::example;

namespace {

// Roots of xi e^{-xi} = ell0 e by Newton on log(xi) - xi - log(ell0 e).
double newton_root(double start, double ell0) {
    const double c = std::log(ell0) + 1.0;
    double xi = start;
    for (int i = 0; i < 100; ++i) xi -= (std::log(xi) - xi - c) / (1.0 / xi - 1.0);
    return xi;
}

double golden(double a, double b, double ell0) {
    auto psi_ = [&](double xi) { return (1.0 + xi) * (std::exp(-(1.0 + xi)) + ell0); };
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    while (b - a > 1e-12) {
        if (psi_(c) < psi_(d)) b = d;
        else a = c;
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    return psi_(0.5 * (a + b));
}

}

TEST(Example, RootsMatchNewtonOracle) {
    ExampleInstance e = build_instance(0.5, 0.05);
    EXPECT_NEAR(e.xi1, newton_root(0.1, 0.05), 1e-10);
    EXPECT_NEAR(e.xi2, newton_root(3.0, 0.05), 1e-10);
    EXPECT_LT(e.xi1, 1.0);
    EXPECT_GT(e.xi2, 1.0);
    EXPECT_LE(e.root_residual1, 1e-10);
    EXPECT_LE(e.root_residual2, 1e-10);
    EXPECT_NEAR(psi_prime(e.xi1, 0.05), 0.0, 1e-12);
    EXPECT_NEAR(psi_prime(e.xi2, 0.05), 0.0, 1e-12);
}

TEST(Example, SeparationPointFollowsTheHorizon) {
    for (double t0 : {0.0, 0.2, 0.5, 0.9}) {
        ExampleInstance e = build_instance(t0, 0.05);
        EXPECT_DOUBLE_EQ(e.x0, 1.0 - t0 + 1.0);
        EXPECT_DOUBLE_EQ(e.value, std::exp(-1.0));
    }
    EXPECT_THROW(build_instance(1.0, 0.05), ConfigError);
}

TEST(Example, GapAgreesWithGoldenSection) {
    ExampleInstance e = build_instance(0.5, 0.05);
    const double oracle = std::min(psi(0.0, 0.05), golden(1.0, xi_cap, 0.05));
    EXPECT_NEAR(e.obstacle_value, oracle, 1e-9);
    EXPECT_NEAR(e.gap, oracle - std::exp(-1.0), 1e-9);
    EXPECT_NEAR(e.gap, -0.095, 5e-4);
    EXPECT_LT(e.gap, 0.0);
    ObstacleResult searched = search_obstacle(e);
    EXPECT_NEAR(searched.value, oracle, 1e-6);
    EXPECT_NEAR(searched.xi[0], e.xi2, 1e-4);
}

TEST(Example, ThresholdIsEnforced) {
    EXPECT_THROW(build_instance(0.5, std::exp(-2.0)), ConfigError);
    EXPECT_THROW(build_instance(0.5, 0.0), ConfigError);
    EXPECT_NO_THROW(build_instance(0.5, 0.99 * std::exp(-2.0)));
}

TEST(Example, LargeCostNeedsShrinking) {
    ExampleInstance e = build_instance(0.5, 0.13);
    EXPECT_TRUE(e.needs_shrink);
    EXPECT_GE(e.gap, 0.0);
    ExampleOptions o;
    o.auto_shrink = true;
    ExampleInstance s = build_instance(0.5, 0.13, o);
    EXPECT_FALSE(s.needs_shrink);
    EXPECT_GT(s.shrink_steps, 0);
    EXPECT_LT(s.gap, 0.0);
    EXPECT_DOUBLE_EQ(s.requested_ell0, 0.13);
    EXPECT_DOUBLE_EQ(s.ell0, 0.13 / std::pow(2.0, s.shrink_steps));
}

// Closed-form gap against a dense scan of xi plus golden refinement.
TEST(Example, ClosedFormGapMatchesDenseScan) {
    ExampleInstance e = build_instance(0.5, 0.05);
    for (double t : {0.0, 0.3, 0.5, 0.9})
        for (double x : {-0.5, 0.7, 1.2, 1.5, 2.0, 3.3, 5.0}) {
            const double y = x - 1.0 + t;
            auto obj = [&](double xi) { return (y + xi) * std::exp(-(y + xi)) + 0.05 * (1.0 + xi); };
            double best = obj(0.0), arg = 0.0;
            for (int j = 1; j <= 200000; ++j) {
                double xi = 40.0 * j / 200000.0;
                if (obj(xi) < best) best = obj(xi), arg = xi;
            }
            double a = std::max(0.0, arg - 2e-4), b = arg + 2e-4;
            const double r = (std::sqrt(5.0) - 1.0) / 2.0;
            while (b - a > 1e-13) {
                double c = b - r * (b - a), d = a + r * (b - a);
                if (obj(c) < obj(d)) b = d;
                else a = c;
            }
            best = std::min(best, obj(0.5 * (a + b)));
            EXPECT_NEAR(e.gap_at(t, x), best - y * std::exp(-y), 1e-9) << t << " " << x;
        }
}

TEST(Example, DeltaDiamondHasNegativeGap) {
    ExampleInstance e = build_instance(0.5, 0.05);
    ASSERT_GT(e.delta, 0.0);
    double worst_inside = -1e300, worst_outside = -1e300;
    for (int j = 0; j < 4096; ++j) {
        double s = 2.0 * std::numbers::pi * j / 4096.0;
        double u = std::cos(s), v = std::sin(s), n = std::fabs(u) + std::fabs(v);
        worst_inside = std::max(worst_inside, e.gap_at(e.t0 + 0.999 * e.delta * u / n, e.x0 + 0.999 * e.delta * v / n));
        worst_outside = std::max(worst_outside, e.gap_at(e.t0 + 1.01 * e.delta * u / n, e.x0 + 1.01 * e.delta * v / n));
    }
    EXPECT_LT(worst_inside, 0.0);
    EXPECT_GE(worst_outside, 0.0);
}

TEST(Example, RunningTermIsSupportedNearTheSeparationPoint) {
    ExampleInstance e = build_instance(0.5, 0.05);
    ImpulseProblem p = e.problem();
    ASSERT_TRUE(p.running.has_value());
    const double half = 0.5 * e.delta;
    for (double t = 0.0; t <= 1.0; t += 0.01)
        for (double x = -1.0; x <= 4.0; x += 0.01) {
            double g = p.running->eval(std::vector<double>{t, x});
            ASSERT_GE(g, 0.0);
            if (std::fabs(t - e.t0) + std::fabs(x - e.x0) >= half) ASSERT_EQ(g, 0.0) << t << " " << x;
        }
    EXPECT_GT(p.running->eval(std::vector<double>{e.t0, e.x0}), 0.0);
    // V is the classical transport solution, so V_t - V_x + g = g >= 0
    GridFunction V = sample(Expr::parse(e.value_source, time_space_vars(1)), Grid(1, 1.0, 3, {0.0}, {3.0}, {7}));
    EXPECT_NEAR(V(1, 3), std::exp(-1.0), 1e-15);
}

TEST(Example, SeparationOnTheGrid) {
    ExampleInstance e = build_instance(0.5, 0.05);
    Grid g(1, 1.0, 101, {-1.0}, {4.0}, {351});
    SeparationReport r = verify_separation(e, g);
    EXPECT_TRUE(r.classical_pass);
    EXPECT_TRUE(r.modified_fail);
    EXPECT_TRUE(r.hjb_sub_pass);
    EXPECT_GT(r.region_nodes, 0u);
    EXPECT_EQ(r.violations_outside_region, 0u);
    EXPECT_TRUE(r.separation_exhibited);
    EXPECT_LT(r.grid_gap_at_center, 0.0);
    EXPECT_EQ(r.slice_x.size(), g.space_size());
}

TEST(Example, NoSeparationWithoutNegativeGap) {
    ExampleInstance e = build_instance(0.5, 0.13);
    Grid g(1, 1.0, 51, {-1.0}, {4.0}, {176});
    SeparationReport r = verify_separation(e, g);
    EXPECT_FALSE(r.separation_exhibited);
    EXPECT_EQ(r.region_nodes, 0u);
}
