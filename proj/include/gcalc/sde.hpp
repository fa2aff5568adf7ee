#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "gcalc/expr.hpp"
#include "gcalc/scenario.hpp"
#include "gcalc/sublinear.hpp"

namespace gcalc {

/// b, sigma and h (or one of their partial derivatives) at a point.
struct CoefficientValues {
    double b = 0.0;
    double sigma = 0.0;
    double h = 0.0;
};

/// Coefficients as plain callables of (t, x); used where a closed form is not
/// expressible in the expression language.
using CoefficientField = std::function<CoefficientValues(double t, double x)>;

enum class Partial { none, x, xx, a, xa, aa };

/// Coefficients of dX = b dt + sigma dB + h d<B>, as expressions in t, x and
/// the parameter a. All first and second partials in x and a are derived
/// symbolically at construction and spot-checked against central differences.
class CoefficientSet {
public:
    CoefficientSet(expr::Expr b, expr::Expr sigma, expr::Expr h,
                   std::optional<double> alpha = std::nullopt);
    static CoefficientSet parse(std::string_view b, std::string_view sigma, std::string_view h,
                                std::optional<double> alpha = std::nullopt);

    const expr::Expr& b(Partial d = Partial::none) const { return exprs_[index(d)][0]; }
    const expr::Expr& sigma(Partial d = Partial::none) const { return exprs_[index(d)][1]; }
    const expr::Expr& h(Partial d = Partial::none) const { return exprs_[index(d)][2]; }

    std::optional<double> alpha() const { return alpha_; }
    /// The value substituted for a: alpha when set, otherwise 0.
    double parameter() const { return alpha_.value_or(0.0); }
    CoefficientSet with_alpha(double alpha) const;

    /// True when the given partial of all three coefficients is identically 0.
    bool vanishes(Partial d) const { return zero_[index(d)]; }

    CoefficientValues values(double t, double x, Partial d = Partial::none) const;
    CoefficientValues values_at(double t, double x, double a, Partial d) const;
    CoefficientField field() const;

private:
    static std::size_t index(Partial d) { return static_cast<std::size_t>(d); }
    void spot_check() const;

    std::array<std::array<expr::Expr, 3>, 6> exprs_;
    std::array<std::array<expr::Program, 3>, 6> programs_;
    std::array<bool, 6> zero_{};
    std::optional<double> alpha_;
};

struct SdePath {
    std::vector<double> X;  // n_steps + 1
};

/// Non-finite or exploding state (|X| > 1e12) at a grid step.
class SdeError : public std::runtime_error {
public:
    SdeError(int step, const std::string& what);
    int step() const noexcept { return step_; }

private:
    int step_;
};

constexpr double kStateBound = 1e12;

/// X_{k+1} = X_k + b dt + sigma dB_k + h dQV_k, coefficients at (t_k, X_k).
SdePath euler_solve(const CoefficientSet& coeffs, double x0, const GPath& gpath,
                    const TimeGrid& grid);
SdePath euler_solve(const CoefficientField& coeffs, double x0, const GPath& gpath,
                    const TimeGrid& grid);
void euler_solve_into(const CoefficientSet& coeffs, double x0, const GPath& gpath,
                      const TimeGrid& grid, std::vector<double>& X);
void euler_solve_into(const CoefficientField& coeffs, double x0, const GPath& gpath,
                      const TimeGrid& grid, std::vector<double>& X);

/// Throws std::invalid_argument unless the path has n_steps increments.
void check_path(const GPath& gpath, const TimeGrid& grid);

/// Sublinear estimate of sup_k |X_k|^p.
SublinearEstimate moment_estimate(const CoefficientSet& coeffs, double x0, double p,
                                  std::span<const VolatilityControl> family, const TimeGrid& grid,
                                  std::size_t n_paths, std::uint64_t seed, unsigned threads = 0);

/// Several powers from one set of solves.
std::vector<SublinearEstimate> moment_estimates(const CoefficientSet& coeffs, double x0,
                                                std::span<const double> powers,
                                                std::span<const VolatilityControl> family,
                                                const TimeGrid& grid, std::size_t n_paths,
                                                std::uint64_t seed, unsigned threads = 0);

/// Sublinear estimate of sup_k |X^x_k - X^y_k|^p, divided by |x - y|^p.
double lipschitz_moment_ratio(const CoefficientSet& coeffs, double x, double y, double p,
                              std::span<const VolatilityControl> family, const TimeGrid& grid,
                              std::size_t n_paths, std::uint64_t seed, unsigned threads = 0);

/// The same ratio for y = x + d over each offset d, sharing the base solve.
std::vector<double> lipschitz_moment_ratios(const CoefficientSet& coeffs, double x,
                                            std::span<const double> offsets, double p,
                                            std::span<const VolatilityControl> family,
                                            const TimeGrid& grid, std::size_t n_paths,
                                            std::uint64_t seed, unsigned threads = 0);

/// For eta_t = sigma(t, X_t): the sublinear estimate of sup_k |sum_j eta_j dB_j|^p
/// divided by T^{p/2-1} * sum_k dt * E|eta_k|^p. Reported, not asserted.
struct IntegralMomentRatio {
    double numerator = 0.0;
    double denominator = 0.0;
    double ratio = 0.0;
};
IntegralMomentRatio stochastic_integral_ratio(const CoefficientSet& coeffs, double x0, double p,
                                              std::span<const VolatilityControl> family,
                                              const TimeGrid& grid, std::size_t n_paths,
                                              std::uint64_t seed, unsigned threads = 0);

}  // namespace gcalc
