#include "gcalc/variation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace gcalc {

using expr::Expr;

namespace {

struct Step {
    double t;
    double dt;
    double dB;
    double dQV;
};

Step step_at(const GPath& gpath, const TimeGrid& grid, int k)
{
    auto kk = static_cast<std::size_t>(k);
    return {grid.time(k), grid.dt(), gpath.dB[kk], gpath.dQV[kk]};
}

// Homogeneous part of every first-order tangent recursion, shared by the x-
// and alpha-tangents (bitwise agreement when the alpha terms vanish).
inline double linear_step(double y, const CoefficientValues& dx, const Step& s)
{
    return y + dx.b * y * s.dt + dx.sigma * y * s.dB + dx.h * y * s.dQV;
}

inline double integrate(const CoefficientValues& f, const Step& s)
{
    return f.b * s.dt + f.sigma * s.dB + f.h * s.dQV;
}

void check_state(double v, int step, const char* what)
{
    if (!std::isfinite(v) || std::fabs(v) > kStateBound) {
        throw SdeError(step, std::string(what) + " left the admissible range");
    }
}

void check_lengths(std::span<const double> X, const GPath& gpath, const TimeGrid& grid)
{
    check_path(gpath, grid);
    if (X.size() != static_cast<std::size_t>(grid.n_steps()) + 1) {
        throw std::invalid_argument("state path length does not match the grid");
    }
}

struct AlphaStart {
    double x = 0.0;
    double dx = 0.0;
    double ddx = 0.0;
};

void require_parameter_only(const Expr& x_of_alpha)
{
    if (expr::depends_on(x_of_alpha, expr::Var::x) || expr::depends_on(x_of_alpha, expr::Var::t)) {
        throw std::invalid_argument("x_of_alpha must be an expression in a only");
    }
}

struct AlphaInit {
    explicit AlphaInit(const Expr& x_of_alpha)
    {
        require_parameter_only(x_of_alpha);
        Expr d1 = expr::differentiate(x_of_alpha, expr::Var::a);
        f = expr::Program(x_of_alpha);
        f1 = expr::Program(d1);
        f2 = expr::Program(expr::differentiate(d1, expr::Var::a));
    }
    AlphaStart at(double a) const { return {f(0.0, 0.0, a), f1(0.0, 0.0, a), f2(0.0, 0.0, a)}; }

    expr::Program f;
    expr::Program f1;
    expr::Program f2;
};

double require_alpha(const CoefficientSet& coeffs)
{
    if (!coeffs.alpha()) {
        throw std::invalid_argument("alpha sensitivity needs coefficients.alpha to be set");
    }
    return *coeffs.alpha();
}

// Y^alpha (and P^alpha when P is non-null) along a solved X^alpha.
void alpha_tangents_into(const CoefficientSet& c, const AlphaStart& start,
                         std::span<const double> X, const GPath& gpath, const TimeGrid& grid,
                         std::vector<double>& Y, std::vector<double>* P)
{
    check_lengths(X, gpath, grid);
    const int n = grid.n_steps();
    const bool inhomogeneous = !c.vanishes(Partial::a);
    Y.resize(X.size());
    Y[0] = start.dx;
    if (P) {
        P->resize(X.size());
        (*P)[0] = start.ddx;
    }
    for (int k = 0; k < n; ++k) {
        auto kk = static_cast<std::size_t>(k);
        Step s = step_at(gpath, grid, k);
        double x = X[kk];
        double y = Y[kk];
        CoefficientValues fx = c.values(s.t, x, Partial::x);
        double next = linear_step(y, fx, s);
        if (inhomogeneous) {
            next += integrate(c.values(s.t, x, Partial::a), s);
        }
        check_state(next, k + 1, "alpha tangent");
        Y[kk + 1] = next;
        if (P) {
            double p = (*P)[kk];
            CoefficientValues fxx = c.values(s.t, x, Partial::xx);
            CoefficientValues fxa = c.values(s.t, x, Partial::xa);
            CoefficientValues faa = c.values(s.t, x, Partial::aa);
            double y2 = y * y;
            double gb = fxx.b * y2 + fx.b * p + 2.0 * fxa.b * y + faa.b;
            double gs = fxx.sigma * y2 + fx.sigma * p + 2.0 * fxa.sigma * y + faa.sigma;
            double gh = fxx.h * y2 + fx.h * p + 2.0 * fxa.h * y + faa.h;
            double pn = p + gb * s.dt + gs * s.dB + gh * s.dQV;
            check_state(pn, k + 1, "second alpha tangent");
            (*P)[kk + 1] = pn;
        }
    }
}

}  // namespace

void first_variation_x_into(const CoefficientSet& coeffs, std::span<const double> X,
                            const GPath& gpath, const TimeGrid& grid, std::vector<double>& Y,
                            double y0)
{
    check_lengths(X, gpath, grid);
    const int n = grid.n_steps();
    Y.resize(X.size());
    Y[0] = y0;
    for (int k = 0; k < n; ++k) {
        auto kk = static_cast<std::size_t>(k);
        Step s = step_at(gpath, grid, k);
        double next = linear_step(Y[kk], coeffs.values(s.t, X[kk], Partial::x), s);
        check_state(next, k + 1, "tangent");
        Y[kk + 1] = next;
    }
}

TangentPath first_variation_x(const CoefficientSet& coeffs, const SdePath& xpath,
                              const GPath& gpath, const TimeGrid& grid)
{
    TangentPath out;
    first_variation_x_into(coeffs, xpath.X, gpath, grid, out.Y);
    return out;
}

void second_variation_x_into(const CoefficientSet& coeffs, std::span<const double> X,
                             std::span<const double> Y, const GPath& gpath, const TimeGrid& grid,
                             std::vector<double>& P)
{
    check_lengths(X, gpath, grid);
    if (Y.size() != X.size()) {
        throw std::invalid_argument("tangent path length does not match the state path");
    }
    const int n = grid.n_steps();
    P.resize(X.size());
    P[0] = 0.0;
    for (int k = 0; k < n; ++k) {
        auto kk = static_cast<std::size_t>(k);
        Step s = step_at(gpath, grid, k);
        CoefficientValues fx = coeffs.values(s.t, X[kk], Partial::x);
        CoefficientValues fxx = coeffs.values(s.t, X[kk], Partial::xx);
        double y2 = Y[kk] * Y[kk];
        double p = P[kk];
        double next = p + (fxx.b * y2 + fx.b * p) * s.dt + (fxx.sigma * y2 + fx.sigma * p) * s.dB +
                      (fxx.h * y2 + fx.h * p) * s.dQV;
        check_state(next, k + 1, "second tangent");
        P[kk + 1] = next;
    }
}

SecondTangentPath second_variation_x(const CoefficientSet& coeffs, const SdePath& xpath,
                                     const TangentPath& ypath, const GPath& gpath,
                                     const TimeGrid& grid)
{
    SecondTangentPath out;
    second_variation_x_into(coeffs, xpath.X, ypath.Y, gpath, grid, out.P);
    return out;
}

AlphaSystem solve_alpha_system(const CoefficientSet& coeffs, const Expr& x_of_alpha,
                               const GPath& gpath, const TimeGrid& grid, int order)
{
    if (order != 1 && order != 2) {
        throw std::invalid_argument("alpha system order must be 1 or 2");
    }
    double alpha = require_alpha(coeffs);
    AlphaInit init(x_of_alpha);
    AlphaStart start = init.at(alpha);
    AlphaSystem sys;
    euler_solve_into(coeffs, start.x, gpath, grid, sys.X.X);
    alpha_tangents_into(coeffs, start, sys.X.X, gpath, grid, sys.Y.Y,
                        order == 2 ? &sys.P.P : nullptr);
    return sys;
}

TangentPath first_variation_alpha(const CoefficientSet& coeffs, const Expr& x_of_alpha,
                                  const GPath& gpath, const TimeGrid& grid)
{
    return std::move(solve_alpha_system(coeffs, x_of_alpha, gpath, grid, 1).Y);
}

SecondTangentPath second_variation_alpha(const CoefficientSet& coeffs, const Expr& x_of_alpha,
                                         const GPath& gpath, const TimeGrid& grid)
{
    return std::move(solve_alpha_system(coeffs, x_of_alpha, gpath, grid, 2).P);
}

std::vector<double> difference_quotient(const CoefficientSet& coeffs, double x0, double h,
                                        const GPath& gpath, const TimeGrid& grid, int order)
{
    if (h == 0.0 || !std::isfinite(h)) {
        throw std::invalid_argument("difference quotient needs a finite nonzero h");
    }
    if (order != 1 && order != 2) {
        throw std::invalid_argument("difference quotient order must be 1 or 2");
    }
    std::vector<double> X;
    std::vector<double> Xh;
    euler_solve_into(coeffs, x0, gpath, grid, X);
    euler_solve_into(coeffs, x0 + h, gpath, grid, Xh);
    std::vector<double> out(X.size());
    if (order == 1) {
        for (std::size_t k = 0; k < X.size(); ++k) {
            out[k] = (Xh[k] - X[k]) / h;
        }
        return out;
    }
    std::vector<double> Y;
    std::vector<double> Yh;
    first_variation_x_into(coeffs, X, gpath, grid, Y);
    first_variation_x_into(coeffs, Xh, gpath, grid, Yh);
    for (std::size_t k = 0; k < X.size(); ++k) {
        out[k] = (Yh[k] - Y[k]) / h;
    }
    return out;
}

//---------------------------------------------------------------------------//

namespace {

struct Chain {
    std::vector<double> X;
    std::vector<double> Y;
    std::vector<double> P;
};

// Solves X and, for depth >= 2, Y and, for depth 3, P, in the chosen variable
// at base value `value` (x0 or alpha). c must already carry that alpha.
class ChainSolver {
public:
    ChainSolver(const CoefficientSet& coeffs, const SensitivitySetup& setup)
        : coeffs_(coeffs), setup_(setup)
    {
        if (setup.variable == SensitivitySetup::Variable::alpha) {
            require_alpha(coeffs);
            init_.emplace(setup.x_of_alpha);
        }
    }

    bool in_alpha() const { return setup_.variable == SensitivitySetup::Variable::alpha; }
    double base() const { return in_alpha() ? *coeffs_.alpha() : setup_.x0; }

    void solve(const CoefficientSet& c, double value, int depth, const GPath& gpath,
               const TimeGrid& grid, Chain& out) const
    {
        if (!in_alpha()) {
            euler_solve_into(c, value, gpath, grid, out.X);
            if (depth >= 2) {
                first_variation_x_into(c, out.X, gpath, grid, out.Y);
            }
            if (depth >= 3) {
                second_variation_x_into(c, out.X, out.Y, gpath, grid, out.P);
            }
            return;
        }
        AlphaStart start = init_->at(value);
        euler_solve_into(c, start.x, gpath, grid, out.X);
        if (depth >= 2) {
            alpha_tangents_into(c, start, out.X, gpath, grid, out.Y, depth >= 3 ? &out.P : nullptr);
        }
    }

    // Coefficients to use at base() + shift.
    CoefficientSet shifted(double shift) const
    {
        return in_alpha() ? coeffs_.with_alpha(base() + shift) : coeffs_;
    }

private:
    const CoefficientSet& coeffs_;
    const SensitivitySetup& setup_;
    std::optional<AlphaInit> init_;
};

}  // namespace

ConvergenceReport convergence_study(const CoefficientSet& coeffs, const SensitivitySetup& setup,
                                    std::span<const double> h_ladder, double p,
                                    std::span<const VolatilityControl> family,
                                    const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                    int order, unsigned threads)
{
    if (p != 2.0 && p != 4.0) {
        throw std::invalid_argument("convergence_study supports p = 2 or p = 4");
    }
    if (order != 1 && order != 2) {
        throw std::invalid_argument("convergence_study order must be 1 or 2");
    }
    if (h_ladder.empty()) {
        throw std::invalid_argument("h ladder is empty");
    }
    for (std::size_t i = 0; i < h_ladder.size(); ++i) {
        if (h_ladder[i] == 0.0 || !std::isfinite(h_ladder[i])) {
            throw std::invalid_argument("h ladder entries must be finite and nonzero");
        }
        if (i > 0 && !(h_ladder[i] < h_ladder[i - 1])) {
            throw std::invalid_argument("h ladder must be strictly decreasing");
        }
    }
    ChainSolver solver(coeffs, setup);
    const double base = solver.base();
    std::vector<double> hs(h_ladder.begin(), h_ladder.end());
    std::vector<CoefficientSet> shifted;
    shifted.reserve(hs.size());
    for (double h : hs) {
        shifted.push_back(solver.shifted(h));
    }
    const int base_depth = order + 1;  // X,Y for order 1; X,Y,P for order 2
    const int shift_depth = order;     // X for order 1; X,Y for order 2

    VectorFunctional vf = [&](const GPath& path, std::span<double> out) {
        thread_local Chain b;
        thread_local Chain s;
        solver.solve(coeffs, base, base_depth, path, grid, b);
        const auto& target = order == 1 ? b.Y : b.P;
        const auto& lo = order == 1 ? b.X : b.Y;
        for (std::size_t j = 0; j < hs.size(); ++j) {
            solver.solve(shifted[j], base + hs[j], shift_depth, path, grid, s);
            const auto& hi = order == 1 ? s.X : s.Y;
            double m = 0.0;
            for (std::size_t k = 0; k < target.size(); ++k) {
                m = std::max(m, std::fabs((hi[k] - lo[k]) / hs[j] - target[k]));
            }
            out[j] = std::pow(m, p);
        }
    };
    auto est = estimate_many(vf, hs.size(), family, grid, n_paths, seed, threads);

    ConvergenceReport report;
    report.p_order = p;
    for (std::size_t j = 0; j < hs.size(); ++j) {
        LadderPoint pt;
        pt.h = hs[j];
        pt.error = est[j].value;
        for (const auto& c : est[j].per_control) {
            if (c.control_id == est[j].argmax_control) {
                pt.std_error = c.std_error;
            }
        }
        pt.flagged = p == 4.0 && std::fabs(hs[j]) < std::ldexp(1.0, -7);
        report.ladder.push_back(pt);
    }
    fit_slope(report);
    return report;
}

TimeModulus time_modulus(const CoefficientSet& coeffs, const SensitivitySetup& setup, int order,
                         std::span<const VolatilityControl> family, const TimeGrid& grid,
                         std::size_t n_paths, std::uint64_t seed, unsigned threads)
{
    if (order != 1 && order != 2) {
        throw std::invalid_argument("time_modulus order must be 1 or 2");
    }
    ChainSolver solver(coeffs, setup);
    const double base = solver.base();
    const auto n = static_cast<std::size_t>(grid.n_steps());
    VectorFunctional vf = [&](const GPath& path, std::span<double> out) {
        thread_local Chain b;
        solver.solve(coeffs, base, order + 1, path, grid, b);
        const auto& T = order == 1 ? b.Y : b.P;
        for (std::size_t k = 0; k < n; ++k) {
            double d = T[k + 1] - T[k];
            out[k] = d * d;
        }
    };
    auto est = estimate_many(vf, n, family, grid, n_paths, seed, threads);
    TimeModulus m;
    for (std::size_t k = 0; k < n; ++k) {
        if (est[k].value > m.max_increment) {
            m.max_increment = est[k].value;
            m.argmax_step = static_cast<int>(k);
        }
    }
    m.constant = m.max_increment / grid.dt();
    return m;
}

std::vector<AlphaContinuityPoint> alpha_continuity(const CoefficientSet& coeffs,
                                                   const Expr& x_of_alpha,
                                                   std::span<const double> deltas,
                                                   std::span<const VolatilityControl> family,
                                                   const TimeGrid& grid, std::size_t n_paths,
                                                   std::uint64_t seed, unsigned threads)
{
    SensitivitySetup setup;
    setup.variable = SensitivitySetup::Variable::alpha;
    setup.x_of_alpha = x_of_alpha;
    ChainSolver solver(coeffs, setup);
    const double base = solver.base();
    std::vector<double> ds(deltas.begin(), deltas.end());
    std::vector<CoefficientSet> shifted;
    for (double d : ds) {
        if (d == 0.0 || !std::isfinite(d)) {
            throw std::invalid_argument("alpha continuity offsets must be finite and nonzero");
        }
        shifted.push_back(solver.shifted(d));
    }
    VectorFunctional vf = [&](const GPath& path, std::span<double> out) {
        thread_local Chain b;
        thread_local Chain s;
        solver.solve(coeffs, base, 2, path, grid, b);
        for (std::size_t j = 0; j < ds.size(); ++j) {
            solver.solve(shifted[j], base + ds[j], 2, path, grid, s);
            double mx = 0.0;
            double my = 0.0;
            for (std::size_t k = 0; k < b.X.size(); ++k) {
                mx = std::max(mx, std::fabs(s.X[k] - b.X[k]));
                my = std::max(my, std::fabs(s.Y[k] - b.Y[k]));
            }
            out[2 * j] = mx * mx;
            out[2 * j + 1] = my * my;
        }
    };
    auto est = estimate_many(vf, 2 * ds.size(), family, grid, n_paths, seed, threads);
    std::vector<AlphaContinuityPoint> out;
    for (std::size_t j = 0; j < ds.size(); ++j) {
        double d2 = ds[j] * ds[j];
        out.push_back({ds[j], est[2 * j].value / d2, est[2 * j + 1].value / d2});
    }
    return out;
}

}  // namespace gcalc
