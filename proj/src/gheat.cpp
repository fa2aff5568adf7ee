#include "gcalc/gheat.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gcalc {

double g_function(double alpha, const VolatilityBand& band)
{
    double pos = std::max(alpha, 0.0);
    double neg = std::max(-alpha, 0.0);
    return 0.5 * (band.sigma_hi * band.sigma_hi * pos - band.sigma_lo * band.sigma_lo * neg);
}

SpaceGrid::SpaceGrid(double x_min, double x_max, int nx)
    : x_min_(x_min), x_max_(x_max), nx_(nx), dx_((x_max - x_min) / (nx - 1))
{
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw std::invalid_argument("space grid requires finite x_min < x_max");
    }
    if (nx < 3) {
        throw std::invalid_argument("space grid requires nx >= 3");
    }
}

SpaceGrid SpaceGrid::around(double x_query, const VolatilityBand& band, double t_final, int nx)
{
    double half = 8.0 * band.sigma_hi * std::sqrt(t_final);
    return SpaceGrid(x_query - half, x_query + half, nx);
}

HeatSolution solve_gheat(const expr::Expr& payoff, const VolatilityBand& band,
                         const SpaceGrid& grid, double t_final, double safety)
{
    if (!(t_final > 0.0) || !std::isfinite(t_final)) {
        throw std::invalid_argument("solve_gheat: t_final must be positive");
    }
    if (!(safety > 0.0 && safety <= 1.0)) {
        throw std::invalid_argument("solve_gheat: safety must lie in (0, 1]");
    }
    const int nx = grid.nx();
    const double dx = grid.dx();
    const double inv_dx2 = 1.0 / (dx * dx);

    expr::Program phi(payoff);
    std::vector<double> u(static_cast<std::size_t>(nx));
    for (int i = 0; i < nx; ++i) {
        double v = phi(0.0, grid.node(i), 0.0);
        if (!std::isfinite(v)) {
            throw std::domain_error("solve_gheat: non-finite payoff at x = " +
                                    std::to_string(grid.node(i)));
        }
        u[static_cast<std::size_t>(i)] = v;
    }

    const double dt = safety * dx * dx / (band.sigma_hi * band.sigma_hi);
    const auto n_steps = static_cast<int>(std::ceil(t_final / dt));
    std::vector<double> next = u;
    double t = 0.0;
    for (int m = 0; m < n_steps; ++m) {
        double step = m == n_steps - 1 ? t_final - t : dt;
        for (int i = 1; i < nx - 1; ++i) {
            auto k = static_cast<std::size_t>(i);
            double d2 = (u[k + 1] - 2.0 * u[k] + u[k - 1]) * inv_dx2;
            next[k] = u[k] + step * g_function(d2, band);
        }
        std::swap(u, next);
        t += dt;
    }

    HeatSolution sol{grid, t_final, std::move(u), n_steps, dt, band.sigma_hi};
    return sol;
}

double evaluate(const HeatSolution& sol, double x)
{
    const SpaceGrid& g = sol.grid;
    if (!(x >= g.x_min() && x <= g.x_max())) {
        throw std::out_of_range("evaluate: x outside the solution domain");
    }
    double s = (x - g.x_min()) / g.dx();
    auto i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, g.nx() - 2);
    double w = s - i;
    double left = sol.u[static_cast<std::size_t>(i)];
    double right = sol.u[static_cast<std::size_t>(i + 1)];
    if (w == 0.0) {
        return left;
    }
    if (w == 1.0) {
        return right;
    }
    return left + w * (right - left);
}

bool within_trust_radius(const HeatSolution& sol, double x)
{
    double r = 6.0 * sol.sigma_hi * std::sqrt(sol.t_final);
    return x - r >= sol.grid.x_min() && x + r <= sol.grid.x_max();
}

}  // namespace gcalc
