#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gcalc/expr.hpp"

using namespace gcalc::expr;

namespace {

double ev(const char* s, double t, double x, double a)
{
    return eval(parse(s), t, x, a);
}

const char* const kCorpus[] = {
    "x",
    "sin(x)*x^2 + 0.5*t",
    "tanh(x)*exp(a)",
    "x/(1 + x^2)",
    "exp(-x^2)*cos(a*x)",
    "(x - a)^3 - 2*t*x",
    "sin(cos(x*a)) / (2 + tanh(x))",
    "x^-2 + a",
    "-x^2",
};

}  // namespace

TEST(Parse, Variables)
{
    EXPECT_EQ(parse("x").op(), Op::variable);
    EXPECT_EQ(parse("x").var(), Var::x);
    EXPECT_EQ(parse("a").var(), Var::a);
    EXPECT_EQ(parse(" t ").var(), Var::t);
}

TEST(Parse, ProductAndPowerNodes)
{
    Expr e = parse("sin(x)*x^2 + 0.5*t");
    ASSERT_EQ(e.op(), Op::add);
    EXPECT_EQ(e.lhs().op(), Op::mul);
    EXPECT_EQ(e.lhs().lhs().op(), Op::sin);
    EXPECT_EQ(e.lhs().rhs().op(), Op::pow);
    EXPECT_EQ(e.lhs().rhs().exponent(), 2);
    EXPECT_EQ(e.rhs().op(), Op::mul);
}

TEST(Parse, Precedence)
{
    EXPECT_EQ(ev("1+2*3", 0, 0, 0), 7.0);
    EXPECT_EQ(ev("(1+2)*3", 0, 0, 0), 9.0);
    EXPECT_EQ(ev("8/4/2", 0, 0, 0), 1.0);
    EXPECT_EQ(ev("5-3-1", 0, 0, 0), 1.0);
    EXPECT_EQ(ev("2*x^3", 0, 2, 0), 16.0);
    // Unary minus binds to the base, so the power applies to (-x).
    EXPECT_EQ(ev("-x^2", 0, 3, 0), 9.0);
    EXPECT_EQ(ev("-(x^2)", 0, 3, 0), -9.0);
    EXPECT_EQ(ev("x^-1", 0, 4, 0), 0.25);
    EXPECT_EQ(ev("1e-3*x", 0, 1000, 0), 1.0);
}

TEST(Parse, IncompleteInputOffset)
{
    try {
        parse("x +");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 3u);
        EXPECT_FALSE(e.expected().empty());
    }
}

TEST(Parse, DoublePlusOffset)
{
    try {
        parse("x++");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 2u);
    }
}

TEST(Parse, Errors)
{
    EXPECT_THROW(parse(""), ParseError);
    EXPECT_THROW(parse("(x"), ParseError);
    EXPECT_THROW(parse("x)"), ParseError);
    EXPECT_THROW(parse("x^1.5"), ParseError);
    EXPECT_THROW(parse("x^y"), ParseError);
    EXPECT_THROW(parse("sin x"), ParseError);
    try {
        parse("2*sqrt(x)");
        FAIL();
    } catch (const UnknownIdentifier& e) {
        EXPECT_EQ(e.name(), "sqrt");
        EXPECT_EQ(e.offset(), 2u);
    }
    EXPECT_THROW(parse("y"), UnknownIdentifier);
}

TEST(Eval, Basics)
{
    EXPECT_EQ(ev("x^2", 0, 3, 0), 9.0);
    EXPECT_EQ(ev("sin(x)", 0, 0, 0), 0.0);
    EXPECT_EQ(ev("exp(t)*x", 0, 5, 0), 5.0);
    EXPECT_EQ(ev("x^0", 0, 0, 0), 1.0);
}

TEST(Eval, DivisionByZero)
{
    EXPECT_THROW(ev("1/x", 0, 0, 0), DomainError);
    EXPECT_THROW(ev("x^-2", 0, 0, 0), DomainError);
    EXPECT_THROW(ev("1/(x-a)", 0, 2, 2), DomainError);
}

TEST(Differentiate, TextbookRules)
{
    Expr d = differentiate(parse("sin(x)"), Var::x);
    EXPECT_EQ(to_string(d), to_string(parse("cos(x)")));
    EXPECT_EQ(eval(d, 0, 0, 0), 1.0);
    EXPECT_EQ(eval(differentiate(parse("x^2"), Var::x), 0, 2, 0), 4.0);
    EXPECT_EQ(eval(differentiate(parse("exp(x)"), Var::x), 0, 0, 0), 1.0);
    EXPECT_DOUBLE_EQ(eval(differentiate(parse("tanh(x)"), Var::x), 0, 0.5, 0),
                     1.0 - std::tanh(0.5) * std::tanh(0.5));
    EXPECT_DOUBLE_EQ(eval(differentiate(parse("1/x"), Var::x), 0, 2, 0), -0.25);
}

TEST(Differentiate, Simplification)
{
    EXPECT_TRUE(differentiate(parse("t*sin(a)"), Var::x).is_constant(0.0));
    EXPECT_TRUE(differentiate(parse("3*x"), Var::x).is_constant(3.0));
    EXPECT_TRUE(differentiate(parse("x + 0*x^5"), Var::x).is_constant(1.0));
    EXPECT_EQ(differentiate(parse("x^2"), Var::x).op(), Op::mul);
    Expr e = make_pow(parse("sin(x)"), 1);
    EXPECT_EQ(e.op(), Op::sin);
}

TEST(Differentiate, CentralDifferenceOracle)
{
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double delta = 1e-5;
    Expr e = parse("tanh(x)*exp(a)");
    Expr dx = differentiate(e, Var::x);
    Expr da = differentiate(e, Var::a);
    for (int i = 0; i < 100; ++i) {
        double t = u(gen), x = u(gen), a = u(gen);
        double fx = (eval(e, t, x + delta, a) - eval(e, t, x - delta, a)) / (2 * delta);
        double fa = (eval(e, t, x, a + delta) - eval(e, t, x, a - delta)) / (2 * delta);
        EXPECT_NEAR(eval(dx, t, x, a), fx, 1e-6 * std::max(1.0, std::fabs(fx)));
        EXPECT_NEAR(eval(da, t, x, a), fa, 1e-6 * std::max(1.0, std::fabs(fa)));
    }
}

TEST(Differentiate, CorpusAgreesWithCentralDifferences)
{
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const double delta = 1e-5;
    for (const char* src : kCorpus) {
        Expr e = parse(src);
        for (Var v : {Var::x, Var::a}) {
            Expr d = differentiate(e, v);
            for (int i = 0; i < 50; ++i) {
                double t = u(gen), x = u(gen), a = u(gen);
                if (std::fabs(x) < 0.2) {
                    continue;  // away from the x^-2 pole
                }
                double up = v == Var::x ? eval(e, t, x + delta, a) : eval(e, t, x, a + delta);
                double dn = v == Var::x ? eval(e, t, x - delta, a) : eval(e, t, x, a - delta);
                double fd = (up - dn) / (2 * delta);
                EXPECT_NEAR(eval(d, t, x, a), fd, 1e-6 * std::max(1.0, std::fabs(fd))) << src;
            }
        }
    }
}

TEST(Differentiate, Linearity)
{
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Expr e1 = parse("sin(x)*a");
    Expr e2 = parse("exp(x/3)*t");
    Expr lhs = differentiate(make_add(e1, e2), Var::x);
    Expr rhs = make_add(differentiate(e1, Var::x), differentiate(e2, Var::x));
    for (int i = 0; i < 100; ++i) {
        double t = u(gen), x = u(gen), a = u(gen);
        EXPECT_EQ(eval(lhs, t, x, a), eval(rhs, t, x, a));
    }
}

TEST(Differentiate, ProductRuleWithinFourUlps)
{
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Expr f = parse("sin(x) + a");
    Expr g = parse("exp(x)*t + 2");
    Expr lhs = differentiate(make_mul(f, g), Var::x);
    Expr rhs = make_add(make_mul(differentiate(f, Var::x), g), make_mul(f, differentiate(g, Var::x)));
    for (int i = 0; i < 100; ++i) {
        double t = u(gen), x = u(gen), a = u(gen);
        double l = eval(lhs, t, x, a);
        double r = eval(rhs, t, x, a);
        double ulp = std::nextafter(std::fabs(r), INFINITY) - std::fabs(r);
        EXPECT_LE(std::fabs(l - r), 4 * ulp) << "t=" << t << " x=" << x << " a=" << a;
    }
}

TEST(Print, RoundTripEvaluatesEqually)
{
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (const char* src : kCorpus) {
        Expr e = parse(src);
        Expr back = parse(to_string(e));
        Expr d = differentiate(e, Var::x);
        Expr dback = parse(to_string(d));
        for (int i = 0; i < 20; ++i) {
            double t = u(gen), x = u(gen) + 3.0, a = u(gen);
            EXPECT_EQ(eval(e, t, x, a), eval(back, t, x, a)) << src;
            EXPECT_EQ(eval(d, t, x, a), eval(dback, t, x, a)) << to_string(d);
        }
    }
    EXPECT_EQ(eval(parse(to_string(Expr::constant(0.1))), 0, 0, 0), 0.1);
    EXPECT_EQ(eval(parse(to_string(Expr::constant(-2.5e-300))), 0, 0, 0), -2.5e-300);
}

TEST(Program, BitIdenticalToEval)
{
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (const char* src : kCorpus) {
        Expr e = parse(src);
        Program p(e);
        Program pd(differentiate(differentiate(e, Var::x), Var::a));
        Expr ed = differentiate(differentiate(e, Var::x), Var::a);
        for (int i = 0; i < 50; ++i) {
            double t = u(gen), x = u(gen) + 3.0, a = u(gen);
            EXPECT_EQ(p(t, x, a), eval(e, t, x, a)) << src;
            EXPECT_EQ(pd(t, x, a), eval(ed, t, x, a)) << src;
        }
    }
}

TEST(Program, DeepExpressionFallsBackToHeap)
{
    std::string s = "x";
    for (int i = 0; i < 60; ++i) {
        s = "(1 + " + s + ")";
    }
    // Right-nested sums need a stack as deep as the nesting.
    std::string r = "x";
    for (int i = 0; i < 60; ++i) {
        r = "x*(1 + " + r + ")";
    }
    for (const std::string& src : {s, r}) {
        Expr e = parse(src);
        EXPECT_EQ(Program(e)(0, 0.5, 0), eval(e, 0, 0.5, 0));
    }
    EXPECT_THROW(Program(parse("1/x"))(0, 0, 0), DomainError);
}

TEST(DependsOn, Variables)
{
    Expr e = parse("t*x");
    EXPECT_TRUE(depends_on(e, Var::t));
    EXPECT_TRUE(depends_on(e, Var::x));
    EXPECT_FALSE(depends_on(e, Var::a));
}
