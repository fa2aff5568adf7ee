#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "gcalc/sublinear.hpp"

using namespace gcalc;

namespace {

const ControlStat& argmax_stat(const SublinearEstimate& e)
{
    for (const auto& c : e.per_control) {
        if (c.control_id == e.argmax_control) {
            return c;
        }
    }
    throw std::logic_error("argmax missing");
}

}  // namespace

TEST(Estimate, ConstantFunctional)
{
    TimeGrid g(1.0, 4);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {3, 1, 1, 0});
    auto est = estimate([](const GPath&) { return 2.75; }, fam, g, 100, 1);
    EXPECT_EQ(est.value, 2.75);
    EXPECT_EQ(est.lower_value, 2.75);
    EXPECT_EQ(est.argmax_control, 0);
    EXPECT_EQ(est.n_paths, 100u);
    for (const auto& c : est.per_control) {
        EXPECT_EQ(c.mean, 2.75);
        EXPECT_EQ(c.std_error, 0.0);
    }
}

TEST(Estimate, SquaredTerminalValue)
{
    TimeGrid g(1.0, 4);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {2, 0, 0, 0});
    auto est = estimate([](const GPath& p) { return p.B.back() * p.B.back(); }, fam, g, 100000, 17);
    double se_hi = argmax_stat(est).std_error;
    EXPECT_NEAR(est.value, 1.0, 3.0 * se_hi);
    EXPECT_EQ(est.argmax_control, 1);
    double se_lo = est.per_control[0].std_error;
    EXPECT_NEAR(est.lower_value, 0.25, 3.0 * se_lo);
    EXPECT_LE(est.lower_value, est.value);
}

TEST(Estimate, AffinePayoff)
{
    TimeGrid g(1.0, 8);
    auto fam = control_family(VolatilityBand(0.2, 1.5), g, {3, 2, 2, 4});
    const double x = 0.7;
    auto est = estimate([x](const GPath& p) { return x + p.B.back(); }, fam, g, 20000, 3);
    EXPECT_NEAR(est.value, x, 3.0 * argmax_stat(est).std_error);
    double worst = 0.0;
    for (const auto& c : est.per_control) worst = std::max(worst, c.std_error);
    EXPECT_NEAR(est.lower_value, x, 3.0 * worst);
}

TEST(Estimate, StandardErrorDefinition)
{
    TimeGrid g(1.0, 2);
    VolatilityControl c{0, {1.0, 1.0}};
    std::vector<VolatilityControl> fam{c};
    const std::size_t n = 500;
    auto est = estimate([](const GPath& p) { return p.B.back(); }, fam, g, n, 4);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = realize_path(generate_driver(g, 4, i), c, g).B.back();
        s1 += v;
        s2 += v * v;
    }
    double mean = s1 / n;
    double var = (s2 - n * mean * mean) / (n - 1);
    EXPECT_NEAR(est.value, mean, 1e-14);
    EXPECT_NEAR(est.per_control[0].std_error, std::sqrt(var / n), 1e-12);
}

TEST(Estimate, ThreadCountDoesNotChangeAnyBit)
{
    TimeGrid g(1.0, 16);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {3, 2, 3, 5});
    Functional fn = [](const GPath& p) { return std::sin(p.B.back()) + p.QV[8] * p.B[3]; };
    auto a = estimate(fn, fam, g, 3001, 8, 1);
    for (unsigned t : {2u, 3u, 8u}) {
        auto b = estimate(fn, fam, g, 3001, 8, t);
        EXPECT_EQ(a.value, b.value);
        EXPECT_EQ(a.lower_value, b.lower_value);
        EXPECT_EQ(a.argmax_control, b.argmax_control);
        for (std::size_t i = 0; i < a.per_control.size(); ++i) {
            EXPECT_EQ(a.per_control[i].mean, b.per_control[i].mean);
            EXPECT_EQ(a.per_control[i].std_error, b.per_control[i].std_error);
        }
    }
}

TEST(Estimate, NonFiniteValueNamesControlAndPath)
{
    TimeGrid g(1.0, 4);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {2, 0, 0, 0});
    Functional fn = [](const GPath& p) {
        return p.B.back() > 1.8 ? std::numeric_limits<double>::infinity() : p.B.back();
    };
    // The first failing (path, control) in index order.
    int want_control = -1;
    std::size_t want_path = 0;
    for (std::size_t i = 0; i < 1000 && want_control < 0; ++i) {
        DriverPath d = generate_driver(g, 2, i);
        for (const auto& c : fam) {
            if (!std::isfinite(fn(realize_path(d, c, g)))) {
                want_control = c.id;
                want_path = i;
                break;
            }
        }
    }
    ASSERT_GE(want_control, 0);
    for (unsigned threads : {1u, 4u}) {
        try {
            estimate(fn, fam, g, 1000, 2, threads);
            FAIL();
        } catch (const SampleError& e) {
            EXPECT_EQ(e.control_id(), want_control);
            EXPECT_EQ(e.path_index(), want_path);
        }
    }
}

TEST(Estimate, Preconditions)
{
    TimeGrid g(1.0, 4);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {2, 0, 0, 0});
    Functional fn = [](const GPath&) { return 0.0; };
    EXPECT_THROW(estimate(fn, fam, g, 1, 0), std::invalid_argument);
    EXPECT_THROW(estimate(fn, std::vector<VolatilityControl>{}, g, 10, 0), std::invalid_argument);
}

TEST(Estimate, EnlargingFamilyNeverDecreasesValue)
{
    TimeGrid g(1.0, 8);
    VolatilityBand band(0.5, 1.0);
    auto small = control_family(band, g, {2, 0, 0, 1});
    auto big = control_family(band, g, {2, 3, 4, 1});
    Functional fn = [](const GPath& p) { return std::cos(2.0 * p.B.back()); };
    EXPECT_GE(estimate(fn, big, g, 2000, 6).value, estimate(fn, small, g, 2000, 6).value);
}

TEST(Estimate, DegenerateBandIsClassical)
{
    TimeGrid g(1.0, 8);
    auto fam = control_family(VolatilityBand(0.7, 0.7), g, {3, 2, 2, 1});
    auto est = estimate([](const GPath& p) { return std::exp(p.B.back()); }, fam, g, 5000, 5);
    EXPECT_LE(est.value - est.lower_value, 2.0 * argmax_stat(est).std_error);
}

TEST(Axioms, SquareAgainstLinear)
{
    TimeGrid g(1.0, 8);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {3, 1, 2, 0});
    auto rep = axiom_report(
        fam, g, 4000, 9, [](const GPath& p) { return p.B.back() * p.B.back(); },
        [](const GPath& p) { return p.B.back(); }, 2.5, -3.5);
    EXPECT_FALSE(rep.dominated);  // x^2 < x on (0, 1)
    EXPECT_TRUE(rep.monotonicity);
    EXPECT_TRUE(rep.constant_preserving);
    EXPECT_TRUE(rep.self_dominated);
    EXPECT_TRUE(rep.positive_homogeneity);
    EXPECT_EQ(rep.constant.value, -3.5);
    EXPECT_TRUE(rep.all());
}

TEST(Axioms, ZeroLambda)
{
    TimeGrid g(1.0, 4);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {2, 0, 0, 0});
    auto rep = axiom_report(
        fam, g, 500, 1, [](const GPath& p) { return p.B.back(); }, [](const GPath&) { return 0.0; },
        0.0, 1.0);
    EXPECT_EQ(rep.scaled_x.value, 0.0);
    EXPECT_TRUE(rep.positive_homogeneity);
}

TEST(Axioms, DominatedPairIsMonotone)
{
    TimeGrid g(1.0, 8);
    auto fam = control_family(VolatilityBand(0.3, 1.2), g, {2, 2, 2, 4});
    auto rep = axiom_report(
        fam, g, 3000, 12, [](const GPath& p) { return std::exp(p.B.back()); },
        [](const GPath& p) { return 1.0 + p.B.back(); }, 0.3, 0.1);
    EXPECT_TRUE(rep.dominated);
    EXPECT_TRUE(rep.monotonicity);
    EXPECT_GE(rep.x.value, rep.y.value);
    EXPECT_TRUE(rep.all());
}

TEST(Axioms, RandomizedInstancesHoldExactly)
{
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    TimeGrid g(1.0, 8);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {3, 1, 2, 21});
    for (int i = 0; i < 10; ++i) {
        double p1 = u(gen), p2 = u(gen), p3 = u(gen);
        double lambda = std::fabs(u(gen)) * 1.37;
        double c = u(gen) * 11.1;
        Functional x = [=](const GPath& p) { return p1 * std::sin(p.B.back()) + p2 * p.QV.back(); };
        Functional y = [=](const GPath& p) { return p3 * p.B[4] * p.B.back() - p1; };
        auto rep = axiom_report(fam, g, 700, 100 + i, x, y, lambda, c, 2);
        EXPECT_TRUE(rep.all()) << "instance " << i;
    }
}

TEST(Axioms, RejectsNegativeLambda)
{
    TimeGrid g(1.0, 4);
    auto fam = control_family(VolatilityBand(0.5, 1.0), g, {2, 0, 0, 0});
    Functional f = [](const GPath&) { return 0.0; };
    EXPECT_THROW(axiom_report(fam, g, 10, 1, f, f, -1.0, 0.0), std::invalid_argument);
}
