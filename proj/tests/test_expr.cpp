#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qvilab/expr.hpp"

using qvi::Expr;

TEST(Expr, TerminalDataAtOne) {
    Expr e = Expr::parse("x1*exp(-x1)", {"x1"});
    EXPECT_DOUBLE_EQ(e.eval({1.0}), std::exp(-1.0));
}

TEST(Expr, ZeroConstant) {
    Expr e = Expr::parse("0", {});
    EXPECT_TRUE(e.is_constant());
    EXPECT_EQ(e.eval(std::span<const double>{}), 0.0);
}

TEST(Expr, PowerIsRightAssociative) {
    EXPECT_EQ(Expr::parse("2^3^2", {}).eval(std::span<const double>{}), 512.0);
    EXPECT_EQ(Expr::parse("(2^3)^2", {}).eval(std::span<const double>{}), 64.0);
}

TEST(Expr, UnaryMinusAndPower) {
    EXPECT_EQ(Expr::parse("-2^2", {}).eval(std::span<const double>{}), -4.0);
    EXPECT_EQ(Expr::parse("2^-1", {}).eval(std::span<const double>{}), 0.5);
    EXPECT_EQ(Expr::parse("3--2", {}).eval(std::span<const double>{}), 5.0);
}

TEST(Expr, BoundCostEvaluates) {
    Expr e = Expr::parse("l0+l0*xi1", {"xi1", "l0"}).bind({{"l0", 0.05}});
    ASSERT_EQ(e.variables().size(), 1u);
    EXPECT_NEAR(e.eval({2.0}), 0.15, 1e-15);
}

TEST(Expr, MinAndComposition) {
    EXPECT_EQ(Expr::parse("min(t,x1)", {"t", "x1"}).eval({0.3, 0.7}), 0.3);
    EXPECT_EQ(Expr::parse("abs(-4)^0.5", {}).eval(std::span<const double>{}), 2.0);
    EXPECT_EQ(Expr::parse("max(1, 5, 3)", {}).eval(std::span<const double>{}), 5.0);
    EXPECT_EQ(Expr::parse("sign(-3) + sign(0)", {}).eval(std::span<const double>{}), -1.0);
}

TEST(Expr, ScientificLiterals) {
    EXPECT_EQ(Expr::parse("1e6", {}).eval(std::span<const double>{}), 1e6);
    EXPECT_EQ(Expr::parse("2.5E-3", {}).eval(std::span<const double>{}), 2.5e-3);
    EXPECT_EQ(Expr::parse(".5", {}).eval(std::span<const double>{}), 0.5);
}

TEST(Expr, EvalByName) {
    Expr e = Expr::parse("t - x1", {"t", "x1"});
    EXPECT_EQ(e.eval(std::map<std::string, double>{{"t", 1.0}, {"x1", 3.0}}), -2.0);
    EXPECT_THROW(e.eval(std::map<std::string, double>{{"t", 1.0}}), std::invalid_argument);
}

TEST(Expr, SyntaxErrorsCarryPosition) {
    try {
        Expr::parse("1 + * 2", {});
        FAIL();
    } catch (const qvi::ParseError& e) {
        EXPECT_EQ(e.position(), 4u);
    }
    EXPECT_THROW(Expr::parse("", {}), qvi::ParseError);
    EXPECT_THROW(Expr::parse("(1", {}), qvi::ParseError);
    EXPECT_THROW(Expr::parse("1 2", {}), qvi::ParseError);
    EXPECT_THROW(Expr::parse("foo(1)", {}), qvi::ParseError);
    EXPECT_THROW(Expr::parse("min(1)", {}), qvi::ParseError);
}

TEST(Expr, UndeclaredVariableNamed) {
    try {
        Expr::parse("x1 + p2", {"x1"});
        FAIL();
    } catch (const qvi::UndeclaredVariable& e) {
        EXPECT_EQ(e.name(), "p2");
        EXPECT_EQ(e.position(), 5u);
    }
}

TEST(Expr, DomainErrors) {
    auto none = std::span<const double>{};
    EXPECT_THROW(Expr::parse("log(0)", {}).eval(none), qvi::DomainError);
    EXPECT_THROW(Expr::parse("sqrt(-1)", {}).eval(none), qvi::DomainError);
    EXPECT_THROW(Expr::parse("1/0", {}).eval(none), qvi::DomainError);
    EXPECT_THROW(Expr::parse("(-8)^(1/3)", {}).eval(none), qvi::DomainError);
    EXPECT_EQ(Expr::parse("(-2)^3", {}).eval(none), -8.0);
    try {
        Expr::parse("log(x1)", {"x1"}).eval({-2.0});
        FAIL();
    } catch (const qvi::DomainError& e) {
        EXPECT_EQ(e.function(), "log");
        EXPECT_EQ(e.argument(), -2.0);
    }
}

TEST(Expr, DependsOn) {
    Expr e = Expr::parse("0.05 + 0*t + xi1", {"t", "x1", "xi1"});
    EXPECT_TRUE(e.depends_on("t"));
    EXPECT_FALSE(e.depends_on("x1"));
    EXPECT_TRUE(e.depends_on("xi1"));
}

TEST(Expr, PrecedenceProperty) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3, 3);
    Expr e = Expr::parse("a+b*c", {"a", "b", "c"});
    Expr f = Expr::parse("a-b/c^2", {"a", "b", "c"});
    for (int i = 0; i < 200; ++i) {
        double a = u(rng), b = u(rng), c = u(rng);
        EXPECT_EQ(e.eval({a, b, c}), a + (b * c));
        EXPECT_EQ(f.eval({a, b, c}), a - (b / (c * c)));
    }
}

TEST(Expr, RoundTripIsBitExact) {
    const std::vector<std::string> vars{"t", "x1", "p1"};
    const char* sources[] = {
        "-p1 + max(0, 0.25 - (t-0.5)^2 - (x1-1.5)^2)",
        "x1*exp(-x1) - 1e-3*sin(t)*cos(x1)",
        "abs(p1)^0.5 + -2^2 - 3*-x1",
        "min(t, x1, p1) / (1 + x1^2) + sign(p1)",
        "sqrt(1 + x1^2) * log(2 + t) - 0.1",
    };
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2, 2);
    for (const char* src : sources) {
        Expr e = Expr::parse(src, vars);
        Expr back = Expr::parse(e.to_string(), vars);
        EXPECT_EQ(back.to_string(), e.to_string());
        for (int i = 0; i < 100; ++i) {
            double args[3] = {u(rng), u(rng), u(rng)};
            EXPECT_EQ(e.eval(args), back.eval(args)) << src;
        }
    }
}

TEST(Expr, SumCombinator) {
    std::vector<std::string> vars{"x1"};
    Expr a = Expr::parse("x1^2", vars), b = Expr::parse("-x1", vars);
    Expr s = qvi::sum(a, b, vars);
    EXPECT_EQ(s.eval({3.0}), 6.0);
}

TEST(Expr, FormatRealRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) {
        EXPECT_EQ(std::strtod(qvi::format_real(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(qvi::format_real(0.1), "0.1");
}
