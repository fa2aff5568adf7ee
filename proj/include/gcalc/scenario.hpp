#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace gcalc {

/// Volatility uncertainty interval [sigma_lo, sigma_hi].
struct VolatilityBand {
    double sigma_lo = 0.0;
    double sigma_hi = 1.0;

    VolatilityBand() = default;
    VolatilityBand(double lo, double hi);  // throws std::invalid_argument

    bool degenerate() const noexcept { return sigma_lo == sigma_hi; }
};

/// Uniform grid on [0, T]. Grid times are k*T/n, never accumulated.
class TimeGrid {
public:
    TimeGrid(double horizon, int n_steps);  // throws std::invalid_argument

    double horizon() const noexcept { return horizon_; }
    int n_steps() const noexcept { return n_steps_; }
    double dt() const noexcept { return dt_; }
    double time(int k) const noexcept { return k * horizon_ / n_steps_; }

private:
    double horizon_;
    int n_steps_;
    double dt_;
};

/// One admissible piecewise-constant volatility scenario.
struct VolatilityControl {
    int id = 0;
    std::vector<double> values;  // sigma_k on [t_k, t_{k+1})
};

/// Standard Brownian increments dW_k ~ N(0, dt) for one path index.
struct DriverPath {
    std::vector<double> increments;
};

/// A G-Brownian path realized under one control, with increments and
/// cumulative sums.
struct GPath {
    std::vector<double> B;    // n_steps + 1, B[0] = 0
    std::vector<double> QV;   // n_steps + 1, QV[0] = 0
    std::vector<double> dB;   // sigma_k * dW_k
    std::vector<double> dQV;  // sigma_k^2 * dt
};

struct FamilySpec {
    int n_levels = 2;  // constant controls, >= 2
    int n_switch = 0;  // switch times; each yields two bang-bang controls
    int n_random = 0;  // i.i.d. uniform level per step
    std::uint64_t seed = 0;
};

DriverPath generate_driver(const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index);
void generate_driver_into(const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index,
                          DriverPath& out);

GPath realize_path(const DriverPath& driver, const VolatilityControl& control,
                   const TimeGrid& grid);
void realize_path_into(const DriverPath& driver, const VolatilityControl& control,
                       const TimeGrid& grid, GPath& out);

/// Constants first (sigma_lo .. sigma_hi, equispaced), then bang-bang pairs
/// (lo->hi, hi->lo) per switch time j*T/(n_switch+1), then random controls.
/// Ids run 0, 1, 2, ... in that order.
std::vector<VolatilityControl> control_family(const VolatilityBand& band, const TimeGrid& grid,
                                              const FamilySpec& spec);

}  // namespace gcalc
