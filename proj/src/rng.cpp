#include "gcalc/rng.hpp"

#include <cmath>

#include <boost/math/special_functions/erf.hpp>

namespace gcalc::rng {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo)
{
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key)
{
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

std::uint64_t bits(std::uint64_t seed, Stream stream, std::uint64_t index, std::uint32_t step)
{
    auto out = philox4x32({step, static_cast<std::uint32_t>(stream),
                           static_cast<std::uint32_t>(index),
                           static_cast<std::uint32_t>(index >> 32)},
                          {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double to_open_uniform(std::uint64_t b)
{
    return (static_cast<double>(b >> 12) + 0.5) * 0x1p-52;
}

double inverse_normal_cdf(double u)
{
    // erfc_inv is accurate to a few ulps over (0, 2) and symmetric in the tails.
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

}  // namespace gcalc::rng
