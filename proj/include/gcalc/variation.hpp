#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gcalc/expr.hpp"
#include "gcalc/report.hpp"
#include "gcalc/scenario.hpp"
#include "gcalc/sde.hpp"

namespace gcalc {

struct TangentPath {
    std::vector<double> Y;
};

struct SecondTangentPath {
    std::vector<double> P;
};

/// Derivative of the Euler flow in the initial condition, Y_0 = y0 (normally 1).
TangentPath first_variation_x(const CoefficientSet& coeffs, const SdePath& xpath,
                              const GPath& gpath, const TimeGrid& grid);
void first_variation_x_into(const CoefficientSet& coeffs, std::span<const double> X,
                            const GPath& gpath, const TimeGrid& grid, std::vector<double>& Y,
                            double y0 = 1.0);

/// Second derivative in the initial condition, P_0 = 0.
SecondTangentPath second_variation_x(const CoefficientSet& coeffs, const SdePath& xpath,
                                     const TangentPath& ypath, const GPath& gpath,
                                     const TimeGrid& grid);
void second_variation_x_into(const CoefficientSet& coeffs, std::span<const double> X,
                             std::span<const double> Y, const GPath& gpath, const TimeGrid& grid,
                             std::vector<double>& P);

/// X^alpha from x(alpha) together with its first (and optionally second)
/// derivative in alpha. coeffs.alpha() must be set.
struct AlphaSystem {
    SdePath X;
    TangentPath Y;
    SecondTangentPath P;  // empty unless order == 2
};
AlphaSystem solve_alpha_system(const CoefficientSet& coeffs, const expr::Expr& x_of_alpha,
                               const GPath& gpath, const TimeGrid& grid, int order = 2);

TangentPath first_variation_alpha(const CoefficientSet& coeffs, const expr::Expr& x_of_alpha,
                                  const GPath& gpath, const TimeGrid& grid);
SecondTangentPath second_variation_alpha(const CoefficientSet& coeffs,
                                         const expr::Expr& x_of_alpha, const GPath& gpath,
                                         const TimeGrid& grid);

/// order 1: (X^{x0+h} - X^{x0})/h. order 2: (Y^{x0+h} - Y^{x0})/h.
std::vector<double> difference_quotient(const CoefficientSet& coeffs, double x0, double h,
                                        const GPath& gpath, const TimeGrid& grid, int order);

/// Which variable the sensitivity is taken in. For alpha, the base value is
/// coeffs.alpha() and the initial condition is x_of_alpha.
struct SensitivitySetup {
    enum class Variable { x, alpha };
    Variable variable = Variable::x;
    double x0 = 0.0;
    expr::Expr x_of_alpha;
};

/// For each h: the sublinear estimate of sup_k |Q^h_k - T_k|^p where Q^h is the
/// difference quotient of the given order and T the matching tangent. At p = 4
/// points with h < 2^-7 are flagged and kept out of the fit.
ConvergenceReport convergence_study(const CoefficientSet& coeffs, const SensitivitySetup& setup,
                                    std::span<const double> h_ladder, double p,
                                    std::span<const VolatilityControl> family,
                                    const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                    int order = 1, unsigned threads = 0);

/// max_k of the sublinear estimate of |T_{k+1} - T_k|^2 for the tangent of the
/// given order, and the constant C = max / dt.
struct TimeModulus {
    double max_increment = 0.0;
    double constant = 0.0;
    int argmax_step = 0;
};
TimeModulus time_modulus(const CoefficientSet& coeffs, const SensitivitySetup& setup, int order,
                         std::span<const VolatilityControl> family, const TimeGrid& grid,
                         std::size_t n_paths, std::uint64_t seed, unsigned threads = 0);

/// E sup|X^{alpha+d} - X^alpha|^2 / d^2 and the same for Y, per offset d.
struct AlphaContinuityPoint {
    double delta = 0.0;
    double state_ratio = 0.0;
    double tangent_ratio = 0.0;
};
std::vector<AlphaContinuityPoint> alpha_continuity(const CoefficientSet& coeffs,
                                                   const expr::Expr& x_of_alpha,
                                                   std::span<const double> deltas,
                                                   std::span<const VolatilityControl> family,
                                                   const TimeGrid& grid, std::size_t n_paths,
                                                   std::uint64_t seed, unsigned threads = 0);

}  // namespace gcalc
