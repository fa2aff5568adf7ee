#include <cmath>

#include <gtest/gtest.h>

#include "gcalc/variation.hpp"

using namespace gcalc;
using expr::parse;

namespace {

const VolatilityBand kBand(0.5, 1.0);

GPath path_for(const TimeGrid& grid, std::uint64_t index, double sigma = 0.8)
{
    VolatilityControl c{0, std::vector<double>(static_cast<std::size_t>(grid.n_steps()), sigma)};
    return realize_path(generate_driver(grid, 17, index), c, grid);
}

std::vector<double> ladder()
{
    return {std::ldexp(1.0, -3), std::ldexp(1.0, -4), std::ldexp(1.0, -5), std::ldexp(1.0, -6),
            std::ldexp(1.0, -7)};
}

}  // namespace

TEST(FirstVariation, StateFreeCoefficientsGiveOne)
{
    TimeGrid grid(1.0, 64);
    auto c = CoefficientSet::parse("sin(t)", "1 + t", "0.3");
    GPath g = path_for(grid, 0);
    TangentPath y = first_variation_x(c, euler_solve(c, 0.2, g, grid), g, grid);
    for (double v : y.Y) {
        EXPECT_EQ(v, 1.0);
    }
}

TEST(FirstVariation, LinearVolatilityScalesTheState)
{
    TimeGrid grid(1.0, 64);
    auto c = CoefficientSet::parse("0", "x", "0");
    GPath g = path_for(grid, 1);
    SdePath x = euler_solve(c, 2.0, g, grid);
    TangentPath y = first_variation_x(c, x, g, grid);
    for (std::size_t k = 0; k < x.X.size(); ++k) {
        EXPECT_NEAR(y.Y[k], x.X[k] / 2.0, 1e-13 * std::max(1.0, std::fabs(y.Y[k])));
    }
}

TEST(FirstVariation, AffineQuotientMatches)
{
    TimeGrid grid(1.0, 128);
    auto c = CoefficientSet::parse("0.2*x + 1", "0.3*x - 0.1", "0.4*x");
    GPath g = path_for(grid, 2);
    TangentPath y = first_variation_x(c, euler_solve(c, 0.5, g, grid), g, grid);
    auto q = difference_quotient(c, 0.5, 0.25, g, grid, 1);
    for (std::size_t k = 0; k < q.size(); ++k) {
        EXPECT_NEAR(q[k], y.Y[k], 1e-12);
    }
}

TEST(SecondVariation, VanishesForAffineAndStateFree)
{
    TimeGrid grid(1.0, 64);
    GPath g = path_for(grid, 3);
    for (auto c : {CoefficientSet::parse("0.2*x + 1", "0.3*x", "0"),
                   CoefficientSet::parse("cos(t)", "2", "t")}) {
        SdePath x = euler_solve(c, 0.1, g, grid);
        TangentPath y = first_variation_x(c, x, g, grid);
        SecondTangentPath p = second_variation_x(c, x, y, g, grid);
        for (double v : p.P) {
            EXPECT_EQ(v, 0.0);
        }
        EXPECT_EQ(difference_quotient(c, 0.1, 0.5, g, grid, 2), std::vector<double>(65, 0.0));
    }
}

TEST(Variation, OdeOracle)
{
    // dX = r X^2 dt from x0: X = x0/(1 - r x0 t), Y = 1/(1 - r x0 t)^2,
    // P = 2 r t/(1 - r x0 t)^3.
    const double r = 0.4;
    const double x0 = 0.5;
    auto c = CoefficientSet::parse("0.4*x^2", "0", "0");
    for (int n : {256, 512}) {
        TimeGrid grid(1.0, n);
        GPath g = path_for(grid, 0);
        SdePath x = euler_solve(c, x0, g, grid);
        TangentPath y = first_variation_x(c, x, g, grid);
        SecondTangentPath p = second_variation_x(c, x, y, g, grid);
        double d = 1.0 - r * x0;
        double tol = 5.0 / n;
        EXPECT_NEAR(x.X.back(), x0 / d, tol);
        EXPECT_NEAR(y.Y.back(), 1.0 / (d * d), tol);
        EXPECT_NEAR(p.P.back(), 2.0 * r / (d * d * d), tol);
    }
}

TEST(AlphaVariation, ReducesBitwiseToTheInitialCondition)
{
    TimeGrid grid(1.0, 128);
    auto c = CoefficientSet::parse("0.1*x", "sin(x)", "0.05*cos(x)", 0.7);
    GPath g = path_for(grid, 4);
    AlphaSystem sys = solve_alpha_system(c, parse("a"), g, grid, 2);
    SdePath x = euler_solve(c, 0.7, g, grid);
    TangentPath y = first_variation_x(c, x, g, grid);
    SecondTangentPath p = second_variation_x(c, x, y, g, grid);
    EXPECT_EQ(sys.X.X, x.X);
    EXPECT_EQ(sys.Y.Y, y.Y);
    EXPECT_EQ(sys.P.P, p.P);
}

TEST(AlphaVariation, QuadraticInitialCondition)
{
    TimeGrid grid(1.0, 64);
    auto c = CoefficientSet::parse("0", "0", "0", 1.5);
    GPath g = path_for(grid, 5);
    AlphaSystem sys = solve_alpha_system(c, parse("a^2"), g, grid, 2);
    for (std::size_t k = 0; k < sys.Y.Y.size(); ++k) {
        EXPECT_EQ(sys.X.X[k], 2.25);
        EXPECT_EQ(sys.Y.Y[k], 3.0);
        EXPECT_EQ(sys.P.P[k], 2.0);
    }
}

TEST(AlphaVariation, ExponentialGrowthOracle)
{
    const double alpha = 0.5;
    TimeGrid grid(1.0, 1024);
    auto c = CoefficientSet::parse("a*x", "0", "0", alpha);
    GPath g = path_for(grid, 0);
    AlphaSystem sys = solve_alpha_system(c, parse("1"), g, grid, 2);
    double e = std::exp(alpha);
    EXPECT_NEAR(sys.Y.Y.back(), e, 5.0 * grid.dt());
    EXPECT_NEAR(sys.P.P.back(), e, 5.0 * grid.dt());
    // Euler closed forms: Y_n = n dt (1 + a dt)^(n-1), P_n = n (n-1) dt^2 (1 + a dt)^(n-2).
    double dt = grid.dt();
    EXPECT_NEAR(sys.Y.Y.back(), 1024 * dt * std::pow(1.0 + alpha * dt, 1023), 1e-12);
    EXPECT_NEAR(sys.P.P.back(), 1024.0 * 1023.0 * dt * dt * std::pow(1.0 + alpha * dt, 1022), 1e-12);
}

TEST(AlphaVariation, Preconditions)
{
    TimeGrid grid(1.0, 8);
    GPath g = path_for(grid, 0);
    auto no_alpha = CoefficientSet::parse("a*x", "0", "0");
    EXPECT_THROW(solve_alpha_system(no_alpha, parse("a"), g, grid), std::invalid_argument);
    auto c = no_alpha.with_alpha(1.0);
    EXPECT_THROW(solve_alpha_system(c, parse("x"), g, grid), std::invalid_argument);
    EXPECT_THROW(solve_alpha_system(c, parse("a"), g, grid, 3), std::invalid_argument);
}

TEST(Variation, TangentIsLinearInItsStart)
{
    TimeGrid grid(1.0, 64);
    auto c = CoefficientSet::parse("0.1*x", "sin(x)", "0.05*cos(x)");
    GPath g = path_for(grid, 6);
    SdePath x = euler_solve(c, 0.3, g, grid);
    std::vector<double> y1;
    std::vector<double> y2;
    first_variation_x_into(c, x.X, g, grid, y1, 1.0);
    first_variation_x_into(c, x.X, g, grid, y2, 2.0);
    for (std::size_t k = 0; k < y1.size(); ++k) {
        EXPECT_EQ(y2[k], 2.0 * y1[k]);
    }
}

TEST(ConvergenceStudy, AffineSetIsExactToRounding)
{
    TimeGrid grid(1.0, 64);
    auto fam = control_family(kBand, grid, {2, 1, 0, 0});
    auto c = CoefficientSet::parse("0.2*x + 1", "0.3*x - 0.1", "0.4*x");
    SensitivitySetup setup;
    setup.x0 = 0.5;
    auto h = ladder();
    ConvergenceReport r = convergence_study(c, setup, h, 2.0, fam, grid, 200, 1);
    for (const auto& pt : r.ladder) {
        EXPECT_LE(pt.error, 1e-20);
    }
    ConvergenceReport r2 = convergence_study(c, setup, h, 2.0, fam, grid, 200, 1, 2);
    for (const auto& pt : r2.ladder) {
        EXPECT_EQ(pt.error, 0.0);
    }
}

TEST(ConvergenceStudy, SmoothSetOrderOne)
{
    TimeGrid grid(1.0, 64);
    auto fam = control_family(kBand, grid, {2, 1, 0, 0});
    auto c = CoefficientSet::parse("0.1*x", "sin(x)", "0.05*cos(x)");
    SensitivitySetup setup;
    setup.x0 = 0.5;
    auto h = ladder();
    ConvergenceReport r = convergence_study(c, setup, h, 2.0, fam, grid, 2000, 3);
    EXPECT_TRUE(r.strictly_decreasing());
    EXPECT_GT(r.fitted_slope, 1.8);
    EXPECT_LT(r.fitted_slope, 2.2);
    EXPECT_EQ(r.n_fitted(), 5u);
}

TEST(ConvergenceStudy, FourthPowerFlagsSmallSteps)
{
    TimeGrid grid(1.0, 32);
    auto fam = control_family(kBand, grid, {2, 0, 0, 0});
    auto c = CoefficientSet::parse("0.1*x", "sin(x)", "0.05*cos(x)");
    SensitivitySetup setup;
    double h[] = {std::ldexp(1.0, -5), std::ldexp(1.0, -7), std::ldexp(1.0, -8)};
    ConvergenceReport r = convergence_study(c, setup, h, 4.0, fam, grid, 200, 3);
    EXPECT_FALSE(r.ladder[0].flagged);
    EXPECT_FALSE(r.ladder[1].flagged);
    EXPECT_TRUE(r.ladder[2].flagged);
    EXPECT_EQ(r.n_fitted(), 2u);
}

TEST(ConvergenceStudy, AlphaMatchesXWhenReducible)
{
    TimeGrid grid(1.0, 32);
    auto fam = control_family(kBand, grid, {2, 1, 0, 0});
    auto c = CoefficientSet::parse("0.1*x", "sin(x)", "0.05*cos(x)", 0.5);
    auto h = ladder();
    SensitivitySetup sx;
    sx.x0 = 0.5;
    SensitivitySetup sa;
    sa.variable = SensitivitySetup::Variable::alpha;
    sa.x_of_alpha = parse("a");
    auto rx = convergence_study(c, sx, h, 2.0, fam, grid, 300, 8);
    auto ra = convergence_study(c, sa, h, 2.0, fam, grid, 300, 8);
    for (std::size_t j = 0; j < h.size(); ++j) {
        EXPECT_EQ(rx.ladder[j].error, ra.ladder[j].error);
    }
}

TEST(ConvergenceStudy, Preconditions)
{
    TimeGrid grid(1.0, 8);
    auto fam = control_family(kBand, grid, {2, 0, 0, 0});
    auto c = CoefficientSet::parse("0", "1", "0");
    SensitivitySetup s;
    double up[] = {0.1, 0.2};
    double zero[] = {0.0};
    double ok[] = {0.1};
    EXPECT_THROW(convergence_study(c, s, up, 2.0, fam, grid, 10, 1), std::invalid_argument);
    EXPECT_THROW(convergence_study(c, s, zero, 2.0, fam, grid, 10, 1), std::invalid_argument);
    EXPECT_THROW(convergence_study(c, s, ok, 3.0, fam, grid, 10, 1), std::invalid_argument);
}

TEST(TimeModulus, StateFreeTangentIsConstant)
{
    TimeGrid grid(1.0, 32);
    auto fam = control_family(kBand, grid, {2, 0, 0, 0});
    auto c = CoefficientSet::parse("1", "1", "0");
    SensitivitySetup s;
    TimeModulus m = time_modulus(c, s, 1, fam, grid, 100, 1);
    EXPECT_EQ(m.max_increment, 0.0);
    auto d = CoefficientSet::parse("0", "x", "0");
    TimeModulus md = time_modulus(d, s, 1, fam, grid, 2000, 1);
    // E|Y dB|^2 = sigma^2 dt E Y^2 <= e dt.
    EXPECT_GT(md.constant, 0.5);
    EXPECT_LT(md.constant, 5.0);
}

TEST(AlphaContinuity, RatiosStayBounded)
{
    TimeGrid grid(1.0, 32);
    auto fam = control_family(kBand, grid, {2, 1, 0, 0});
    auto c = CoefficientSet::parse("a*sin(x)", "0.3 + 0.1*cos(a*x)", "0", 0.5);
    double d[] = {1e-1, 1e-2, 1e-3};
    auto pts = alpha_continuity(c, parse("1 + a"), d, fam, grid, 500, 2);
    for (const auto& pt : pts) {
        EXPECT_TRUE(std::isfinite(pt.state_ratio));
        EXPECT_GT(pt.state_ratio, 0.0);
        EXPECT_LT(pt.state_ratio, 100.0);
        EXPECT_LT(pt.tangent_ratio, 100.0);
    }
    EXPECT_NEAR(pts[2].state_ratio / pts[1].state_ratio, 1.0, 0.1);
}
