#pragma once

#include <array>
#include <cstdint>

namespace gcalc::rng {

/// Philox4x32-10 block function (Salmon et al., SC'11). Stateless: the output
/// is a pure function of (counter, key), so any stream position can be
/// generated independently of every other one.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Stream tags keep the driver noise and the random control levels disjoint.
enum class Stream : std::uint32_t { driver = 0, control = 1 };

/// 64 random bits for (seed, stream, index, step).
std::uint64_t bits(std::uint64_t seed, Stream stream, std::uint64_t index, std::uint32_t step);

/// Maps 64 bits to a uniform in the open interval (0, 1) with 52-bit resolution.
double to_open_uniform(std::uint64_t bits);

/// Inverse standard normal CDF.
double inverse_normal_cdf(double u);

inline double standard_normal(std::uint64_t seed, Stream stream, std::uint64_t index,
                              std::uint32_t step)
{
    return inverse_normal_cdf(to_open_uniform(bits(seed, stream, index, step)));
}

}  // namespace gcalc::rng
