#include "gcalc/sde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gcalc {

using expr::Expr;
using expr::Var;

CoefficientSet::CoefficientSet(Expr b, Expr sigma, Expr h, std::optional<double> alpha)
    : alpha_(alpha)
{
    if (alpha && !std::isfinite(*alpha)) {
        throw std::invalid_argument("coefficient parameter alpha must be finite");
    }
    auto& e = exprs_;
    e[index(Partial::none)] = {std::move(b), std::move(sigma), std::move(h)};
    for (std::size_t c = 0; c < 3; ++c) {
        const Expr& f = e[index(Partial::none)][c];
        e[index(Partial::x)][c] = expr::differentiate(f, Var::x);
        e[index(Partial::a)][c] = expr::differentiate(f, Var::a);
        e[index(Partial::xx)][c] = expr::differentiate(e[index(Partial::x)][c], Var::x);
        e[index(Partial::xa)][c] = expr::differentiate(e[index(Partial::x)][c], Var::a);
        e[index(Partial::aa)][c] = expr::differentiate(e[index(Partial::a)][c], Var::a);
    }
    for (std::size_t d = 0; d < 6; ++d) {
        zero_[d] = true;
        for (std::size_t c = 0; c < 3; ++c) {
            programs_[d][c] = expr::Program(e[d][c]);
            zero_[d] = zero_[d] && e[d][c].is_constant(0.0);
        }
    }
    spot_check();
}

CoefficientSet CoefficientSet::parse(std::string_view b, std::string_view sigma,
                                     std::string_view h, std::optional<double> alpha)
{
    return CoefficientSet(expr::parse(b), expr::parse(sigma), expr::parse(h), alpha);
}

CoefficientSet CoefficientSet::with_alpha(double alpha) const
{
    CoefficientSet copy = *this;
    if (!std::isfinite(alpha)) {
        throw std::invalid_argument("coefficient parameter alpha must be finite");
    }
    copy.alpha_ = alpha;
    return copy;
}

CoefficientValues CoefficientSet::values_at(double t, double x, double a, Partial d) const
{
    const auto& p = programs_[index(d)];
    return {p[0](t, x, a), p[1](t, x, a), p[2](t, x, a)};
}

CoefficientValues CoefficientSet::values(double t, double x, Partial d) const
{
    return values_at(t, x, parameter(), d);
}

CoefficientField CoefficientSet::field() const
{
    return [self = *this](double t, double x) { return self.values(t, x); };
}

void CoefficientSet::spot_check() const
{
    // Each derived partial is compared with a central difference of its parent.
    struct Link {
        Partial parent;
        Partial child;
        Var var;
    };
    static constexpr Link links[] = {
        {Partial::none, Partial::x, Var::x},  {Partial::x, Partial::xx, Var::x},
        {Partial::none, Partial::a, Var::a},  {Partial::x, Partial::xa, Var::a},
        {Partial::a, Partial::aa, Var::a},
    };
    static const char* names[] = {"b", "sigma", "h"};
    const double a0 = parameter();
    for (double t : {0.25, 0.75}) {
        for (double x : {-0.7, 0.35, 1.3}) {
            for (double a : {a0, a0 + 0.45}) {
                for (const Link& link : links) {
                    for (std::size_t c = 0; c < 3; ++c) {
                        const auto& parent = programs_[index(link.parent)][c];
                        const auto& child = programs_[index(link.child)][c];
                        double exact = 0.0;
                        double fd = 0.0;
                        double scale = 1.0;
                        try {
                            exact = child(t, x, a);
                            double step = 1e-5 * std::max(1.0, std::fabs(link.var == Var::x ? x : a));
                            double up = link.var == Var::x ? parent(t, x + step, a) : parent(t, x, a + step);
                            double dn = link.var == Var::x ? parent(t, x - step, a) : parent(t, x, a - step);
                            fd = (up - dn) / (2.0 * step);
                            scale = std::max({1.0, std::fabs(exact), std::fabs(parent(t, x, a))});
                        } catch (const expr::DomainError&) {
                            continue;
                        }
                        if (!std::isfinite(exact) || !std::isfinite(fd)) {
                            continue;
                        }
                        if (std::fabs(exact - fd) > 1e-5 * scale) {
                            throw std::logic_error(
                                std::string("derivative of ") + names[c] + " (" +
                                expr::to_string(exprs_[index(link.child)][c]) +
                                ") disagrees with a central difference at t=" + std::to_string(t) +
                                ", x=" + std::to_string(x) + ", a=" + std::to_string(a));
                        }
                    }
                }
            }
        }
    }
}

//---------------------------------------------------------------------------//

SdeError::SdeError(int step, const std::string& what)
    : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step)
{
}

void check_path(const GPath& gpath, const TimeGrid& grid)
{
    const auto n = static_cast<std::size_t>(grid.n_steps());
    if (gpath.dB.size() != n || gpath.dQV.size() != n) {
        throw std::invalid_argument("G-path has " + std::to_string(gpath.dB.size()) +
                                    " increments, grid has " + std::to_string(n) + " steps");
    }
}

namespace {

template <class Eval>
void euler_loop(const Eval& eval, double x0, const GPath& gpath, const TimeGrid& grid,
                std::vector<double>& X)
{
    check_path(gpath, grid);
    if (!std::isfinite(x0)) {
        throw SdeError(0, "non-finite initial condition");
    }
    const int n = grid.n_steps();
    const double dt = grid.dt();
    X.resize(static_cast<std::size_t>(n) + 1);
    X[0] = x0;
    double x = x0;
    for (int k = 0; k < n; ++k) {
        auto kk = static_cast<std::size_t>(k);
        CoefficientValues c = eval(grid.time(k), x);
        x = x + c.b * dt + c.sigma * gpath.dB[kk] + c.h * gpath.dQV[kk];
        if (!std::isfinite(x) || std::fabs(x) > kStateBound) {
            throw SdeError(k + 1, "state left the admissible range (|X| > 1e12 or non-finite)");
        }
        X[kk + 1] = x;
    }
}

}  // namespace

void euler_solve_into(const CoefficientSet& coeffs, double x0, const GPath& gpath,
                      const TimeGrid& grid, std::vector<double>& X)
{
    euler_loop([&coeffs](double t, double x) { return coeffs.values(t, x); }, x0, gpath, grid, X);
}

void euler_solve_into(const CoefficientField& coeffs, double x0, const GPath& gpath,
                      const TimeGrid& grid, std::vector<double>& X)
{
    euler_loop(coeffs, x0, gpath, grid, X);
}

SdePath euler_solve(const CoefficientSet& coeffs, double x0, const GPath& gpath,
                    const TimeGrid& grid)
{
    SdePath out;
    euler_solve_into(coeffs, x0, gpath, grid, out.X);
    return out;
}

SdePath euler_solve(const CoefficientField& coeffs, double x0, const GPath& gpath,
                    const TimeGrid& grid)
{
    SdePath out;
    euler_solve_into(coeffs, x0, gpath, grid, out.X);
    return out;
}

//---------------------------------------------------------------------------//

namespace {

double sup_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double e : v) {
        m = std::max(m, std::fabs(e));
    }
    return m;
}

}  // namespace

std::vector<SublinearEstimate> moment_estimates(const CoefficientSet& coeffs, double x0,
                                                std::span<const double> powers,
                                                std::span<const VolatilityControl> family,
                                                const TimeGrid& grid, std::size_t n_paths,
                                                std::uint64_t seed, unsigned threads)
{
    for (double p : powers) {
        if (!(p > 0.0) || !std::isfinite(p)) {
            throw std::invalid_argument("moment power must be positive");
        }
    }
    std::vector<double> ps(powers.begin(), powers.end());
    VectorFunctional vf = [&](const GPath& path, std::span<double> out) {
        thread_local std::vector<double> X;
        euler_solve_into(coeffs, x0, path, grid, X);
        double m = sup_abs(X);
        for (std::size_t j = 0; j < ps.size(); ++j) {
            out[j] = std::pow(m, ps[j]);
        }
    };
    return estimate_many(vf, ps.size(), family, grid, n_paths, seed, threads);
}

SublinearEstimate moment_estimate(const CoefficientSet& coeffs, double x0, double p,
                                  std::span<const VolatilityControl> family, const TimeGrid& grid,
                                  std::size_t n_paths, std::uint64_t seed, unsigned threads)
{
    double ps[] = {p};
    return moment_estimates(coeffs, x0, ps, family, grid, n_paths, seed, threads).front();
}

std::vector<double> lipschitz_moment_ratios(const CoefficientSet& coeffs, double x,
                                            std::span<const double> offsets, double p,
                                            std::span<const VolatilityControl> family,
                                            const TimeGrid& grid, std::size_t n_paths,
                                            std::uint64_t seed, unsigned threads)
{
    if (!(p >= 2.0) || !std::isfinite(p)) {
        throw std::invalid_argument("lipschitz_moment_ratio requires p >= 2");
    }
    for (double d : offsets) {
        if (d == 0.0 || !std::isfinite(d)) {
            throw std::invalid_argument("lipschitz_moment_ratio requires x != y");
        }
    }
    std::vector<double> ds(offsets.begin(), offsets.end());
    VectorFunctional vf = [&](const GPath& path, std::span<double> out) {
        thread_local std::vector<double> X;
        thread_local std::vector<double> Xy;
        euler_solve_into(coeffs, x, path, grid, X);
        for (std::size_t j = 0; j < ds.size(); ++j) {
            euler_solve_into(coeffs, x + ds[j], path, grid, Xy);
            double m = 0.0;
            for (std::size_t k = 0; k < X.size(); ++k) {
                m = std::max(m, std::fabs(Xy[k] - X[k]));
            }
            out[j] = std::pow(m, p);
        }
    };
    auto est = estimate_many(vf, ds.size(), family, grid, n_paths, seed, threads);
    std::vector<double> ratios(ds.size());
    for (std::size_t j = 0; j < ds.size(); ++j) {
        // The offset actually realized is (x + d) - x, which may differ from d.
        double gap = std::fabs((x + ds[j]) - x);
        ratios[j] = est[j].value / std::pow(gap, p);
    }
    return ratios;
}

double lipschitz_moment_ratio(const CoefficientSet& coeffs, double x, double y, double p,
                              std::span<const VolatilityControl> family, const TimeGrid& grid,
                              std::size_t n_paths, std::uint64_t seed, unsigned threads)
{
    if (x == y) {
        throw std::invalid_argument("lipschitz_moment_ratio requires x != y");
    }
    if (!(p >= 2.0) || !std::isfinite(p)) {
        throw std::invalid_argument("lipschitz_moment_ratio requires p >= 2");
    }
    Functional fn = [&](const GPath& path) {
        thread_local std::vector<double> X;
        thread_local std::vector<double> Y;
        euler_solve_into(coeffs, x, path, grid, X);
        euler_solve_into(coeffs, y, path, grid, Y);
        double m = 0.0;
        for (std::size_t k = 0; k < X.size(); ++k) {
            m = std::max(m, std::fabs(Y[k] - X[k]));
        }
        return std::pow(m, p);
    };
    return estimate(fn, family, grid, n_paths, seed, threads).value / std::pow(std::fabs(x - y), p);
}

IntegralMomentRatio stochastic_integral_ratio(const CoefficientSet& coeffs, double x0, double p,
                                              std::span<const VolatilityControl> family,
                                              const TimeGrid& grid, std::size_t n_paths,
                                              std::uint64_t seed, unsigned threads)
{
    if (!(p >= 2.0) || !std::isfinite(p)) {
        throw std::invalid_argument("stochastic_integral_ratio requires p >= 2");
    }
    const auto n = static_cast<std::size_t>(grid.n_steps());
    // Output 0 is the sup of the integral; outputs 1..n are |eta_k|^p.
    VectorFunctional vf = [&](const GPath& path, std::span<double> out) {
        thread_local std::vector<double> X;
        euler_solve_into(coeffs, x0, path, grid, X);
        double integral = 0.0;
        double m = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double eta = coeffs.values(grid.time(static_cast<int>(k)), X[k]).sigma;
            integral += eta * path.dB[k];
            m = std::max(m, std::fabs(integral));
            out[k + 1] = std::pow(std::fabs(eta), p);
        }
        out[0] = std::pow(m, p);
    };
    auto est = estimate_many(vf, n + 1, family, grid, n_paths, seed, threads);
    IntegralMomentRatio r;
    r.numerator = est[0].value;
    double integral = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        integral += est[k].value * grid.dt();
    }
    r.denominator = std::pow(grid.horizon(), p / 2.0 - 1.0) * integral;
    r.ratio = r.denominator > 0.0 ? r.numerator / r.denominator : 0.0;
    return r;
}

}  // namespace gcalc
