#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gcalc/expr.hpp"
#include "gcalc/report.hpp"
#include "gcalc/scenario.hpp"
#include "gcalc/sde.hpp"

namespace gcalc {

/// b^n = b + c_n psi_b (likewise sigma, h), started from x0_n.
struct CoefficientSequence {
    CoefficientSet base;
    expr::Expr psi_b;
    expr::Expr psi_sigma;
    expr::Expr psi_h;
    std::vector<double> rates;  // c_n
    std::vector<double> x0_n;   // empty means x0 for every n
    double x0 = 0.0;
    double x0_rate_bound = 1.0;  // requires |x0_n - x0| <= bound * |c_n|

    void validate() const;  // throws std::invalid_argument
};

/// The same construction with coefficients given as callables.
struct PerturbationProblem {
    CoefficientField base;
    CoefficientField perturbation;
    std::vector<double> rates;
    std::vector<double> x0_n;
    double x0 = 0.0;
};

/// E[ int_0^T |b^n - b|^2 ds ] along the base solution, per coefficient.
struct HypothesisGap {
    double b = 0.0;
    double sigma = 0.0;
    double h = 0.0;
    double total() const { return b + sigma + h; }
};

struct EnvelopePoint {
    double t = 0.0;
    double measured = 0.0;   // E sup_{r<=t} |X^n_r - X_r|^2
    double std_error = 0.0;
    double inhomogeneity = 0.0;
    double bound = 0.0;
    bool within = false;     // measured <= bound + 3 std_error
};

struct StabilityReport {
    ConvergenceReport ladder;  // h = c_n, error = E sup_k |X^n_k - X_k|^2
    std::vector<HypothesisGap> hypothesis;
    bool hypothesis_vanishing = false;  // last gap below the first (or all zero)

    // Sampled secant Lipschitz constants of the perturbed coefficients and the
    // Gronwall rate C = 9 (K_b^2 T + 4 s^2 K_sigma^2 + s^4 T K_h^2), s the top volatility.
    double k_b = 0.0;
    double k_sigma = 0.0;
    double k_h = 0.0;
    double gronwall_constant = 0.0;
    std::vector<std::vector<EnvelopePoint>> envelope;  // per n
    bool envelope_ok = false;
};

StabilityReport stability_study(const CoefficientSequence& seq,
                                std::span<const VolatilityControl> family, const TimeGrid& grid,
                                std::size_t n_paths, std::uint64_t seed, unsigned threads = 0);

StabilityReport perturbation_study(const PerturbationProblem& problem,
                                   std::span<const VolatilityControl> family,
                                   const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                   unsigned threads = 0);

//---------------------------------------------------------------------------//
// Gronwall and Bihari bounds.
//---------------------------------------------------------------------------//

/// Moduli H for the Bihari inequality. `divergent` records whether
/// int_{0+} ds / H(s) = infinity; this is declared per entry, not computed.
struct ModulusSpec {
    enum class Kind { linear, root, log };
    Kind kind = Kind::linear;
    double scale = 1.0;    // H is multiplied by this
    double epsilon = 0.0;  // root: sqrt(s + eps^2)

    double operator()(double s) const;
    bool divergent() const;
    std::string name() const;
    static ModulusSpec from_name(std::string_view name, double scale = 1.0, double epsilon = 0.0);
};

/// A bound sampled on grid times, linearly interpolated in between.
struct BoundFunction {
    std::vector<double> t;
    std::vector<double> value;

    double operator()(double s) const;
};

/// t -> u0 exp(int_0^t v), trapezoid rule on the grid; v has n_steps + 1 samples.
BoundFunction gronwall_bound(double u0, std::span<const double> v, const TimeGrid& grid);

/// t -> F^{-1}(F(u0) + int_0^t v) with F(s) = int_{s_ref}^s dr / H(r).
BoundFunction bihari_bound(double u0, std::span<const double> v, const TimeGrid& grid,
                           const ModulusSpec& H, double s_ref = 1.0);

/// F(s) = int_{s_ref}^s dr / H(r), computed with the same quadrature.
double bihari_F(const ModulusSpec& H, double s, double s_ref = 1.0);

//---------------------------------------------------------------------------//
// Catalog of non-Lipschitz coefficient examples for the modulus variant.
//---------------------------------------------------------------------------//

/// Coefficients whose squared increments are bounded by rho(|x - x'|^2) for
/// the listed modulus, with an additive drift perturbation psi_b = 1.
///   lipschitz: b = 0.5 sin x, sigma = 0.3 cos x; rho(s) = K^2 s, H linear.
///   log:       b = -x log(x^2 + eps^2) / 2, sigma = 0.2; rho(s) ~ s log(1/s), H log.
///   root:      b = x / (x^2 + eps^2)^{1/4}, sigma = 0.2; rho(s) ~ sqrt(s), H root.
struct ModulusExample {
    std::string name;
    CoefficientField base;
    CoefficientField perturbation;
    ModulusSpec modulus;
};

ModulusExample modulus_example(std::string_view name, double epsilon = 1e-3);

/// perturbation_study on a catalog entry.
StabilityReport modulus_stability_study(const ModulusExample& example,
                                        std::span<const double> rates, double x0,
                                        std::span<const VolatilityControl> family,
                                        const TimeGrid& grid, std::size_t n_paths,
                                        std::uint64_t seed, unsigned threads = 0);

}  // namespace gcalc
