#pragma once

#include <vector>

#include "gcalc/expr.hpp"
#include "gcalc/scenario.hpp"

namespace gcalc {

/// G(alpha) = (sigma_hi^2 alpha^+ - sigma_lo^2 alpha^-) / 2.
double g_function(double alpha, const VolatilityBand& band);

/// Nodes x_i = x_min + i*dx, i = 0 .. nx-1.
class SpaceGrid {
public:
    SpaceGrid(double x_min, double x_max, int nx);  // throws std::invalid_argument

    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    int nx() const noexcept { return nx_; }
    double dx() const noexcept { return dx_; }
    double node(int i) const noexcept { return x_min_ + i * dx_; }

    /// Centered on x_query with half-width 8*sigma_hi*sqrt(T).
    static SpaceGrid around(double x_query, const VolatilityBand& band, double t_final, int nx);

private:
    double x_min_;
    double x_max_;
    int nx_;
    double dx_;
};

struct HeatSolution {
    SpaceGrid grid;
    double t_final = 0.0;
    std::vector<double> u;  // values at t_final on grid nodes
    int n_time_steps = 0;
    double dt = 0.0;         // nominal step; the last one is shortened to land on t_final
    double sigma_hi = 0.0;   // band used, for the trust-radius rule
};

/// Explicit monotone scheme u += dt*G(D2 u) with dt = safety*dx^2/sigma_hi^2
/// and boundary nodes frozen at the payoff. payoff is an expression in x.
HeatSolution solve_gheat(const expr::Expr& payoff, const VolatilityBand& band,
                         const SpaceGrid& grid, double t_final, double safety = 0.9);

/// Linear interpolation; throws std::out_of_range outside [x_min, x_max].
double evaluate(const HeatSolution& sol, double x);

/// Boundary contamination is negligible where x +- 6*sigma_hi*sqrt(t_final)
/// stays inside the domain.
bool within_trust_radius(const HeatSolution& sol, double x);

}  // namespace gcalc
