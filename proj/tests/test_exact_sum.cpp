#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gcalc/exact_sum.hpp"

using gcalc::ExactSum;
using gcalc::ExactValue;

TEST(ExactSum, CancellationIsExact)
{
    ExactSum s;
    s.add(1e100);
    s.add(1.0);
    s.add(-1e100);
    EXPECT_EQ(s.value().to_double(), 1.0);
}

TEST(ExactSum, OrderIndependent)
{
    std::mt19937_64 gen(1);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v;
    for (int i = 0; i < 5000; ++i) {
        v.push_back(n(gen) * std::exp(20.0 * n(gen)));
    }
    ExactSum a;
    for (double d : v) a.add(d);
    std::shuffle(v.begin(), v.end(), gen);
    ExactSum b;
    ExactSum c;
    for (std::size_t i = 0; i < v.size(); ++i) {
        (i % 3 == 0 ? b : c).add(v[i]);
    }
    b.merge(c);
    EXPECT_TRUE(a.value() == b.value());
    EXPECT_EQ(a.value().to_double(), b.value().to_double());
}

TEST(ExactSum, MatchesLongDoubleOnBenignData)
{
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ExactSum s;
    long double ref = 0.0L;
    for (int i = 0; i < 1000; ++i) {
        double d = u(gen);
        s.add(d);
        ref += d;
    }
    EXPECT_NEAR(s.value().to_double(), static_cast<double>(ref), 1e-12);
}

TEST(ExactSum, SubnormalsAndExtremes)
{
    ExactSum s;
    const double tiny = std::numeric_limits<double>::denorm_min();
    s.add(tiny);
    s.add(tiny);
    EXPECT_EQ(s.value().to_double(), 2 * tiny);
    ExactSum big;
    big.add(std::numeric_limits<double>::max());
    big.add(-std::numeric_limits<double>::max());
    EXPECT_TRUE(big.value().is_zero());
    ExactSum neg;
    neg.add(-0.75);
    neg.add(-0.5);
    EXPECT_EQ(neg.value().to_double(), -1.25);
    EXPECT_THROW(neg.add(std::nan("")), std::domain_error);
}

TEST(ExactSum, SquaresAndProductsAreExact)
{
    const double x = 1.0 + std::ldexp(1.0, -30);
    ExactSum s;
    s.add_square(x);  // 1 + 2^-29 + 2^-60
    s.add(-1.0);
    s.add(-std::ldexp(1.0, -29));
    EXPECT_EQ(s.value().to_double(), std::ldexp(1.0, -60));
    ExactSum p;
    p.add_product(3.0, 0.1);
    EXPECT_TRUE(p.value() == ExactValue::from_double(3.0) * ExactValue::from_double(0.1));
}

TEST(ExactValue, DivisionRoundsCorrectly)
{
    ExactValue one = ExactValue::from_double(1.0);
    EXPECT_EQ(one.divided_to_double(3), 1.0 / 3.0);
    EXPECT_EQ(ExactValue::from_double(2.0).divided_to_double(3), 2.0 / 3.0);
    EXPECT_EQ(ExactValue::from_double(-7.0).divided_to_double(10), -0.7);
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        double a = u(gen);
        auto d = static_cast<std::uint64_t>(1 + gen() % 100000);
        // a / d with a double quotient is correctly rounded too.
        EXPECT_EQ(ExactValue::from_double(a).divided_to_double(d), a / static_cast<double>(d));
    }
    // Ties go to even.
    ExactValue tie(ExactValue::Integer(1) << 53 | 1, 0);  // 2^53 + 1
    EXPECT_EQ(tie.to_double(), 9007199254740992.0);
    ExactValue tie_up((ExactValue::Integer(1) << 53) + 3, 0);
    EXPECT_EQ(tie_up.to_double(), 9007199254740996.0);
    ExactValue sub(ExactValue::Integer(3), -1076);  // 0.75 * denorm_min rounds up
    EXPECT_EQ(sub.to_double(), std::numeric_limits<double>::denorm_min());
}

TEST(ExactValue, Ordering)
{
    ExactValue a = ExactValue::from_double(0.1);
    ExactValue b = ExactValue::from_double(0.2);
    EXPECT_TRUE(a < b);
    EXPECT_TRUE(a + a == b);
    EXPECT_TRUE(-a < a);
    EXPECT_TRUE(b - a - a == ExactValue{});
}
