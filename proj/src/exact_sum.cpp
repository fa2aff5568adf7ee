#include "gcalc/exact_sum.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gcalc {

using Integer = ExactValue::Integer;

namespace {

// Rounds |num| * 2^exponent / den to the nearest double (ties to even).
// num, den > 0.
double round_quotient(const Integer& num, int exponent, const Integer& den)
{
    // Scale so the integer quotient carries at least 55 significant bits.
    long num_bits = static_cast<long>(boost::multiprecision::msb(num)) + 1;
    long den_bits = static_cast<long>(boost::multiprecision::msb(den)) + 1;
    long shift = std::max(0L, 56 - (num_bits - den_bits));
    Integer scaled = num << shift;
    Integer q;
    Integer r;
    boost::multiprecision::divide_qr(scaled, den, q, r);
    bool sticky = !r.is_zero();
    long e = static_cast<long>(exponent) - shift;

    long q_bits = static_cast<long>(boost::multiprecision::msb(q)) + 1;
    // Keep 53 bits unless the result is subnormal.
    long keep = 53;
    long top_exponent = e + q_bits - 1;  // exponent of the leading bit
    if (top_exponent < -1022) {
        keep = 53 - (-1022 - top_exponent);
        if (keep < 0) {
            keep = 0;
        }
    }
    long drop = q_bits - keep;
    if (drop > 0) {
        Integer mask = (Integer(1) << drop) - 1;
        Integer low = q & mask;
        Integer half = Integer(1) << (drop - 1);
        q >>= drop;
        e += drop;
        bool round_up = low > half || (low == half && (sticky || (q & 1) != 0));
        if (round_up) {
            q += 1;
        }
    }
    double mant = q.convert_to<double>();  // exact: q < 2^54
    return std::ldexp(mant, static_cast<int>(std::clamp(e, -2200L, 2200L)));
}

}  // namespace

ExactValue::ExactValue(Integer mantissa, int exponent)
    : mantissa_(std::move(mantissa)), exponent_(exponent)
{
}

ExactValue ExactValue::from_double(double d)
{
    if (!std::isfinite(d)) {
        throw std::domain_error("ExactValue::from_double: non-finite input");
    }
    if (d == 0.0) {
        return {};
    }
    int e = 0;
    double f = std::frexp(d, &e);                        // d = f * 2^e, 0.5 <= |f| < 1
    auto m = static_cast<std::int64_t>(std::ldexp(f, 53));  // exact
    return ExactValue(Integer(m), e - 53);
}

ExactValue ExactValue::operator-() const
{
    return ExactValue(-mantissa_, exponent_);
}

namespace {

// Brings both mantissas to the smaller exponent.
std::pair<Integer, Integer> align(const Integer& ma, int ea, const Integer& mb, int eb, int& e)
{
    e = std::min(ea, eb);
    Integer a = ma;
    Integer b = mb;
    if (ea > e) a <<= (ea - e);
    if (eb > e) b <<= (eb - e);
    return {std::move(a), std::move(b)};
}

}  // namespace

ExactValue operator+(const ExactValue& a, const ExactValue& b)
{
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    int e = 0;
    auto [x, y] = align(a.mantissa_, a.exponent_, b.mantissa_, b.exponent_, e);
    return ExactValue(x + y, e);
}

ExactValue operator-(const ExactValue& a, const ExactValue& b)
{
    return a + (-b);
}

ExactValue operator*(const ExactValue& a, const ExactValue& b)
{
    if (a.is_zero() || b.is_zero()) return {};
    return ExactValue(a.mantissa_ * b.mantissa_, a.exponent_ + b.exponent_);
}

std::strong_ordering operator<=>(const ExactValue& a, const ExactValue& b)
{
    ExactValue d = a - b;
    int s = d.sign();
    if (s < 0) return std::strong_ordering::less;
    if (s > 0) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

bool operator==(const ExactValue& a, const ExactValue& b)
{
    return (a <=> b) == std::strong_ordering::equal;
}

double ExactValue::to_double() const
{
    return divided_to_double(1);
}

double ExactValue::divided_to_double(std::uint64_t divisor) const
{
    if (divisor == 0) {
        throw std::invalid_argument("ExactValue::divided_to_double: zero divisor");
    }
    if (mantissa_.is_zero()) {
        return 0.0;
    }
    Integer num = boost::multiprecision::abs(mantissa_);
    double r = round_quotient(num, exponent_, Integer(divisor));
    return mantissa_.sign() < 0 ? -r : r;
}

//---------------------------------------------------------------------------//

void ExactSum::add(double d)
{
    if (d == 0.0) {
        return;
    }
    auto bits = std::bit_cast<std::uint64_t>(d);
    auto raw_exp = static_cast<int>((bits >> 52) & 0x7ffu);
    std::uint64_t mant = bits & ((std::uint64_t{1} << 52) - 1);
    if (raw_exp == 0x7ff) {
        throw std::domain_error("ExactSum::add: non-finite input");
    }
    int exp2 = 0;
    if (raw_exp == 0) {
        exp2 = -1074;
    } else {
        mant |= std::uint64_t{1} << 52;
        exp2 = raw_exp - 1075;
    }
    int pos = exp2 - kMinExponent;  // >= 0
    auto limb = static_cast<std::size_t>(pos / kLimbBits);
    int shift = pos % kLimbBits;
    unsigned __int128 wide = static_cast<unsigned __int128>(mant) << shift;
    auto c0 = static_cast<std::int64_t>(static_cast<std::uint64_t>(wide) & 0xffffffffu);
    auto c1 = static_cast<std::int64_t>(static_cast<std::uint64_t>(wide >> 32) & 0xffffffffu);
    auto c2 = static_cast<std::int64_t>(static_cast<std::uint64_t>(wide >> 64));
    if (std::signbit(d)) {
        limbs_[limb] -= c0;
        limbs_[limb + 1] -= c1;
        limbs_[limb + 2] -= c2;
    } else {
        limbs_[limb] += c0;
        limbs_[limb + 1] += c1;
        limbs_[limb + 2] += c2;
    }
    if (++pending_ >= kRenormalizeEvery) {
        normalize();
    }
}

void ExactSum::add_square(double d)
{
    add_product(d, d);
}

void ExactSum::add_product(double lambda, double d)
{
    double p = lambda * d;
    if (!std::isfinite(p)) {
        throw std::domain_error("ExactSum::add_product: product overflows");
    }
    double residual = std::fma(lambda, d, -p);
    add(p);
    add(residual);
}

void ExactSum::merge(const ExactSum& other)
{
    ExactSum rhs = other;
    rhs.normalize();
    normalize();
    for (std::size_t i = 0; i < kLimbs; ++i) {
        limbs_[i] += rhs.limbs_[i];
    }
    normalize();
}

void ExactSum::normalize()
{
    for (std::size_t i = 0; i + 1 < kLimbs; ++i) {
        std::int64_t carry = limbs_[i] >> kLimbBits;  // arithmetic shift: floor division
        limbs_[i] -= carry << kLimbBits;
        limbs_[i + 1] += carry;
    }
    pending_ = 0;
}

ExactValue ExactSum::value() const
{
    ExactSum copy = *this;
    copy.normalize();
    // After normalization only the top limb can be negative. Negative totals
    // are assembled from their magnitude.
    bool negative = copy.limbs_[kLimbs - 1] < 0;
    if (negative) {
        for (auto& l : copy.limbs_) {
            l = -l;
        }
        copy.normalize();
    }
    std::size_t lo = 0;
    while (lo < kLimbs && copy.limbs_[lo] == 0) {
        ++lo;
    }
    if (lo == kLimbs) {
        return {};
    }
    std::size_t hi = kLimbs - 1;
    while (copy.limbs_[hi] == 0) {
        --hi;
    }
    Integer m = copy.limbs_[hi];
    for (std::size_t i = hi; i-- > lo;) {
        m <<= kLimbBits;
        m += copy.limbs_[i];
    }
    if (negative) {
        m = -m;
    }
    return ExactValue(std::move(m), kMinExponent + static_cast<int>(lo) * kLimbBits);
}

}  // namespace gcalc
