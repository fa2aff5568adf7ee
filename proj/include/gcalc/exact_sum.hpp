#pragma once

#include <array>
#include <compare>
#include <cstdint>

#include <boost/multiprecision/cpp_int.hpp>

namespace gcalc {

/// An exact dyadic rational mantissa * 2^exponent. Used for the cold end of
/// sample reductions (comparisons, scaling, final rounding), never in loops.
class ExactValue {
public:
    using Integer = boost::multiprecision::cpp_int;

    ExactValue() = default;
    ExactValue(Integer mantissa, int exponent);
    static ExactValue from_double(double d);  // d must be finite

    ExactValue operator-() const;
    friend ExactValue operator+(const ExactValue& a, const ExactValue& b);
    friend ExactValue operator-(const ExactValue& a, const ExactValue& b);
    friend ExactValue operator*(const ExactValue& a, const ExactValue& b);
    friend std::strong_ordering operator<=>(const ExactValue& a, const ExactValue& b);
    friend bool operator==(const ExactValue& a, const ExactValue& b);

    bool is_zero() const { return mantissa_.is_zero(); }
    int sign() const { return mantissa_.sign(); }

    /// Nearest double, ties to even.
    double to_double() const;
    /// Nearest double to value / divisor, ties to even; divisor > 0.
    double divided_to_double(std::uint64_t divisor) const;

private:
    Integer mantissa_;
    int exponent_ = 0;
};

/// Exact summation of doubles into a fixed-point long accumulator spanning the
/// whole double range. Order of additions never changes the result, which is
/// what makes parallel reductions bit-reproducible.
class ExactSum {
public:
    ExactSum() { limbs_.fill(0); }

    void add(double d);
    /// Adds d*d exactly (as the product plus its fma residual).
    void add_square(double d);
    /// Adds lambda*d exactly.
    void add_product(double lambda, double d);
    void merge(const ExactSum& other);

    ExactValue value() const;

private:
    static constexpr int kMinExponent = -1074;
    static constexpr int kLimbBits = 32;
    static constexpr std::size_t kLimbs = 72;
    static constexpr std::uint32_t kRenormalizeEvery = 1u << 28;

    void normalize();

    std::array<std::int64_t, kLimbs> limbs_;
    std::uint32_t pending_ = 0;
};

}  // namespace gcalc
