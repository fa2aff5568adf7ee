#include "gcalc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gcalc/rng.hpp"

namespace gcalc {

VolatilityBand::VolatilityBand(double lo, double hi) : sigma_lo(lo), sigma_hi(hi)
{
    if (!(std::isfinite(lo) && std::isfinite(hi)) || lo < 0.0 || hi <= 0.0 || lo > hi) {
        throw std::invalid_argument("volatility band requires 0 <= sigma_lo <= sigma_hi, sigma_hi > 0");
    }
}

TimeGrid::TimeGrid(double horizon, int n_steps)
    : horizon_(horizon), n_steps_(n_steps), dt_(horizon / n_steps)
{
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw std::invalid_argument("time grid horizon must be positive and finite");
    }
    if (n_steps < 1) {
        throw std::invalid_argument("time grid needs at least one step");
    }
}

void generate_driver_into(const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index,
                          DriverPath& out)
{
    const auto n = static_cast<std::size_t>(grid.n_steps());
    const double scale = std::sqrt(grid.dt());
    out.increments.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.increments[k] =
            scale * rng::standard_normal(seed, rng::Stream::driver, path_index,
                                         static_cast<std::uint32_t>(k));
    }
}

DriverPath generate_driver(const TimeGrid& grid, std::uint64_t seed, std::uint64_t path_index)
{
    DriverPath out;
    generate_driver_into(grid, seed, path_index, out);
    return out;
}

void realize_path_into(const DriverPath& driver, const VolatilityControl& control,
                       const TimeGrid& grid, GPath& out)
{
    const auto n = static_cast<std::size_t>(grid.n_steps());
    if (driver.increments.size() != n || control.values.size() != n) {
        throw std::invalid_argument("realize_path: driver (" +
                                    std::to_string(driver.increments.size()) + ") and control (" +
                                    std::to_string(control.values.size()) +
                                    ") lengths must equal n_steps (" + std::to_string(n) + ")");
    }
    out.B.resize(n + 1);
    out.QV.resize(n + 1);
    out.dB.resize(n);
    out.dQV.resize(n);
    const double dt = grid.dt();
    out.B[0] = 0.0;
    out.QV[0] = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double s = control.values[k];
        out.dB[k] = s * driver.increments[k];
        out.dQV[k] = s * s * dt;
        out.B[k + 1] = out.B[k] + out.dB[k];
        out.QV[k + 1] = out.QV[k] + out.dQV[k];
    }
}

GPath realize_path(const DriverPath& driver, const VolatilityControl& control, const TimeGrid& grid)
{
    GPath out;
    realize_path_into(driver, control, grid, out);
    return out;
}

std::vector<VolatilityControl> control_family(const VolatilityBand& band, const TimeGrid& grid,
                                              const FamilySpec& spec)
{
    if (spec.n_levels < 2 || spec.n_switch < 0 || spec.n_random < 0) {
        throw std::invalid_argument("family spec needs n_levels >= 2, n_switch >= 0, n_random >= 0");
    }
    const int n = grid.n_steps();
    const double lo = band.sigma_lo;
    const double hi = band.sigma_hi;
    std::vector<VolatilityControl> family;
    family.reserve(static_cast<std::size_t>(spec.n_levels + 2 * spec.n_switch + spec.n_random));
    auto next = [&](std::vector<double> values) {
        family.push_back({static_cast<int>(family.size()), std::move(values)});
    };

    for (int i = 0; i < spec.n_levels; ++i) {
        double level = i == spec.n_levels - 1 ? hi : lo + (hi - lo) * i / (spec.n_levels - 1);
        next(std::vector<double>(static_cast<std::size_t>(n), level));
    }

    // Switch j happens at t = j*T/(n_switch+1): step k is in the first phase
    // while k*(n_switch+1) < j*n.
    for (int j = 1; j <= spec.n_switch; ++j) {
        std::vector<double> up(static_cast<std::size_t>(n));
        std::vector<double> down(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            bool first = static_cast<long long>(k) * (spec.n_switch + 1) <
                         static_cast<long long>(j) * n;
            up[static_cast<std::size_t>(k)] = first ? lo : hi;
            down[static_cast<std::size_t>(k)] = first ? hi : lo;
        }
        next(std::move(up));
        next(std::move(down));
    }

    for (int r = 0; r < spec.n_random; ++r) {
        std::vector<double> values(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            double u = rng::to_open_uniform(rng::bits(spec.seed, rng::Stream::control,
                                                      static_cast<std::uint64_t>(r),
                                                      static_cast<std::uint32_t>(k)));
            values[static_cast<std::size_t>(k)] = std::clamp(lo + u * (hi - lo), lo, hi);
        }
        next(std::move(values));
    }
    return family;
}

}  // namespace gcalc
