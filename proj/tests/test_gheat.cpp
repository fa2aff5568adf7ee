#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gcalc/gheat.hpp"

using namespace gcalc;
using expr::parse;

namespace {

const VolatilityBand kBand(0.5, 1.0);
// dx = 1/64, so every node is exactly representable.
const SpaceGrid kDyadic(-8.0, 8.0, 1025);

}  // namespace

TEST(GFunction, Substitution)
{
    EXPECT_EQ(g_function(0.0, kBand), 0.0);
    EXPECT_EQ(g_function(2.0, kBand), 1.0);
    EXPECT_EQ(g_function(-2.0, kBand), -0.25);
}

TEST(GFunction, Subadditive)
{
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 10000; ++i) {
        double a = u(gen), b = u(gen);
        EXPECT_LE(g_function(a, kBand) - g_function(b, kBand), g_function(a - b, kBand));
    }
}

TEST(SpaceGrid, Validation)
{
    EXPECT_THROW(SpaceGrid(1.0, 1.0, 10), std::invalid_argument);
    EXPECT_THROW(SpaceGrid(0.0, 1.0, 2), std::invalid_argument);
    SpaceGrid g = SpaceGrid::around(1.0, kBand, 4.0, 101);
    EXPECT_EQ(g.x_min(), -15.0);
    EXPECT_EQ(g.x_max(), 17.0);
}

TEST(Solve, AffinePayoffIsExact)
{
    HeatSolution sol = solve_gheat(parse("x"), kBand, kDyadic, 1.0);
    for (int i = 0; i < kDyadic.nx(); ++i) {
        EXPECT_EQ(sol.u[static_cast<std::size_t>(i)], kDyadic.node(i));
    }
}

TEST(Solve, ConvexPayoffFollowsUpperVolatility)
{
    HeatSolution sol = solve_gheat(parse("x^2"), kBand, kDyadic, 1.0);
    EXPECT_NEAR(evaluate(sol, 0.0), 1.0, 1e-2);
    EXPECT_NEAR(evaluate(sol, 1.0), 2.0, 1e-2);
}

TEST(Solve, ConcavePayoffFollowsLowerVolatility)
{
    HeatSolution sol = solve_gheat(parse("-(x^2)"), kBand, kDyadic, 1.0);
    EXPECT_NEAR(evaluate(sol, 0.0), -0.25, 1e-2);
}

TEST(Solve, StepCountAndLastStep)
{
    HeatSolution sol = solve_gheat(parse("x"), kBand, kDyadic, 1.0, 0.9);
    double dt = 0.9 * kDyadic.dx() * kDyadic.dx();
    EXPECT_EQ(sol.dt, dt);
    EXPECT_EQ(sol.n_time_steps, static_cast<int>(std::ceil(1.0 / dt)));
}

TEST(Solve, ConstantPreserved)
{
    HeatSolution sol = solve_gheat(parse("3.25"), kBand, SpaceGrid(-3.0, 5.0, 301), 0.7);
    for (double v : sol.u) {
        EXPECT_EQ(v, 3.25);
    }
}

TEST(Solve, ComparisonPrinciple)
{
    SpaceGrid g(-6.0, 6.0, 401);
    HeatSolution lo = solve_gheat(parse("sin(x)"), kBand, g, 1.0);
    HeatSolution hi = solve_gheat(parse("sin(x) + 0.1*exp(-(x^2))"), kBand, g, 1.0);
    for (std::size_t i = 0; i < lo.u.size(); ++i) {
        EXPECT_LE(lo.u[i], hi.u[i]);
    }
}

TEST(Solve, DegenerateBandIsClassicalHeat)
{
    VolatilityBand s(0.8, 0.8);
    HeatSolution sol = solve_gheat(parse("x^2"), s, kDyadic, 1.0);
    EXPECT_NEAR(evaluate(sol, 0.0), 0.64, 1e-9);
    EXPECT_NEAR(evaluate(sol, 0.5), 0.25 + 0.64, 1e-9);
}

TEST(Solve, TranslationEquivariance)
{
    HeatSolution a = solve_gheat(parse("exp(-(x^2))*cos(3*x)"), kBand, kDyadic, 0.5);
    HeatSolution b = solve_gheat(parse("exp(-((x - 0.5)^2))*cos(3*(x - 0.5))"), kBand, kDyadic, 0.5);
    for (int i = 300; i < 700; ++i) {
        EXPECT_NEAR(b.u[static_cast<std::size_t>(i + 32)], a.u[static_cast<std::size_t>(i)], 1e-12);
    }
}

TEST(Solve, Errors)
{
    EXPECT_THROW(solve_gheat(parse("1/x"), kBand, kDyadic, 1.0), std::domain_error);
    EXPECT_THROW(solve_gheat(parse("exp(x^2)"), kBand, SpaceGrid(-30.0, 30.0, 11), 1.0), std::domain_error);
    EXPECT_THROW(solve_gheat(parse("x"), kBand, kDyadic, 0.0), std::invalid_argument);
    EXPECT_THROW(solve_gheat(parse("x"), kBand, kDyadic, 1.0, 1.5), std::invalid_argument);
}

TEST(Evaluate, NodesMidpointsAndDomain)
{
    HeatSolution sol = solve_gheat(parse("cos(x)"), kBand, kDyadic, 0.25);
    EXPECT_EQ(evaluate(sol, kDyadic.node(400)), sol.u[400]);
    double mid = 0.5 * (kDyadic.node(400) + kDyadic.node(401));
    EXPECT_EQ(evaluate(sol, mid), 0.5 * (sol.u[400] + sol.u[401]));
    EXPECT_EQ(evaluate(sol, 8.0), sol.u.back());
    EXPECT_THROW(evaluate(sol, 8.01), std::out_of_range);
    EXPECT_THROW(evaluate(sol, -9.0), std::out_of_range);
}

TEST(TrustRadius, Rule)
{
    HeatSolution sol = solve_gheat(parse("x"), kBand, kDyadic, 1.0);
    EXPECT_TRUE(within_trust_radius(sol, 0.0));
    EXPECT_TRUE(within_trust_radius(sol, 2.0));
    EXPECT_FALSE(within_trust_radius(sol, 2.5));
}
