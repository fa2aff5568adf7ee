#include "gcalc/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>

#include "gcalc/sublinear.hpp"

namespace gcalc {

void CoefficientSequence::validate() const
{
    if (rates.empty()) {
        throw std::invalid_argument("coefficient sequence needs at least one rate");
    }
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!std::isfinite(rates[i])) {
            throw std::invalid_argument("rates must be finite");
        }
        if (i > 0 && std::fabs(rates[i]) > std::fabs(rates[i - 1])) {
            throw std::invalid_argument("rates must not grow along the sequence");
        }
    }
    if (rates.size() > 1 && rates.front() != 0.0 &&
        !(std::fabs(rates.back()) < std::fabs(rates.front()))) {
        throw std::invalid_argument("rates must decrease toward 0 along the sequence");
    }
    if (!x0_n.empty()) {
        if (x0_n.size() != rates.size()) {
            throw std::invalid_argument("x0_n must have one entry per rate");
        }
        for (std::size_t i = 0; i < rates.size(); ++i) {
            if (!(std::fabs(x0_n[i] - x0) <= x0_rate_bound * std::fabs(rates[i]))) {
                throw std::invalid_argument("initial conditions x0_n must approach x0 at the rate c_n");
            }
        }
    }
}

StabilityReport stability_study(const CoefficientSequence& seq,
                                std::span<const VolatilityControl> family, const TimeGrid& grid,
                                std::size_t n_paths, std::uint64_t seed, unsigned threads)
{
    seq.validate();
    PerturbationProblem problem;
    problem.base = seq.base.field();
    expr::Program pb(seq.psi_b);
    expr::Program ps(seq.psi_sigma);
    expr::Program ph(seq.psi_h);
    const double a = seq.base.parameter();
    problem.perturbation = [pb, ps, ph, a](double t, double x) {
        return CoefficientValues{pb(t, x, a), ps(t, x, a), ph(t, x, a)};
    };
    problem.rates = seq.rates;
    problem.x0_n = seq.x0_n;
    problem.x0 = seq.x0;
    return perturbation_study(problem, family, grid, n_paths, seed, threads);
}

namespace {

std::vector<int> checkpoints(int n_steps)
{
    std::vector<int> ks;
    for (int j = 0; j <= 16; ++j) {
        int k = static_cast<int>(std::lround(static_cast<double>(j) * n_steps / 16.0));
        if (ks.empty() || k != ks.back()) {
            ks.push_back(k);
        }
    }
    return ks;
}

double argmax_stderr(const SublinearEstimate& est)
{
    for (const auto& c : est.per_control) {
        if (c.control_id == est.argmax_control) {
            return c.std_error;
        }
    }
    return 0.0;
}

struct SecantMax {
    std::mutex mutex;
    double b = 0.0;
    double sigma = 0.0;
    double h = 0.0;

    void update(double kb, double ks, double kh)
    {
        std::lock_guard lock(mutex);
        b = std::max(b, kb);
        sigma = std::max(sigma, ks);
        h = std::max(h, kh);
    }
};

}  // namespace

StabilityReport perturbation_study(const PerturbationProblem& problem,
                                   std::span<const VolatilityControl> family,
                                   const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                                   unsigned threads)
{
    if (!problem.base || !problem.perturbation) {
        throw std::invalid_argument("perturbation study needs base and perturbation coefficients");
    }
    if (problem.rates.empty()) {
        throw std::invalid_argument("perturbation study needs at least one rate");
    }
    if (!problem.x0_n.empty() && problem.x0_n.size() != problem.rates.size()) {
        throw std::invalid_argument("x0_n must have one entry per rate");
    }
    const std::size_t n_seq = problem.rates.size();
    const auto n = static_cast<std::size_t>(grid.n_steps());
    const std::vector<int> ks = checkpoints(grid.n_steps());
    const std::size_t n_check = ks.size();
    const std::size_t per_n = 2 * n_check;  // u then W at each checkpoint
    const std::size_t n_out = 3 + n_seq * per_n;
    auto x0_of = [&](std::size_t i) { return problem.x0_n.empty() ? problem.x0 : problem.x0_n[i]; };

    SecantMax secant;
    VectorFunctional vf = [&](const GPath& path, std::span<double> out) {
        thread_local std::vector<double> X;
        thread_local std::vector<CoefficientValues> base_at;
        thread_local std::vector<CoefficientValues> pert_at;
        euler_solve_into(problem.base, problem.x0, path, grid, X);
        base_at.resize(n);
        pert_at.resize(n);
        double ib = 0.0;
        double is = 0.0;
        double ih = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double t = grid.time(static_cast<int>(k));
            base_at[k] = problem.base(t, X[k]);
            pert_at[k] = problem.perturbation(t, X[k]);
            ib += pert_at[k].b * pert_at[k].b * grid.dt();
            is += pert_at[k].sigma * pert_at[k].sigma * grid.dt();
            ih += pert_at[k].h * pert_at[k].h * grid.dt();
        }
        out[0] = ib;
        out[1] = is;
        out[2] = ih;

        double kb = 0.0;
        double ksig = 0.0;
        double kh = 0.0;
        for (std::size_t i = 0; i < n_seq; ++i) {
            const double c = problem.rates[i];
            double xn = x0_of(i);
            if (!std::isfinite(xn)) {
                throw SdeError(0, "non-finite initial condition");
            }
            double sup_u = (xn - X[0]) * (xn - X[0]);
            double inhom = 0.0;
            double sup_w = 0.0;
            std::size_t next_check = 0;
            auto* row = out.data() + 3 + i * per_n;
            auto record = [&](std::size_t k) {
                while (next_check < n_check && static_cast<std::size_t>(ks[next_check]) == k) {
                    row[2 * next_check] = sup_u;
                    row[2 * next_check + 1] = sup_w;
                    ++next_check;
                }
            };
            record(0);
            for (std::size_t k = 0; k < n; ++k) {
                double t = grid.time(static_cast<int>(k));
                CoefficientValues bn = problem.base(t, xn);
                CoefficientValues pn = problem.perturbation(t, xn);
                CoefficientValues f{bn.b + c * pn.b, bn.sigma + c * pn.sigma, bn.h + c * pn.h};
                // Secant constants of the perturbed coefficients between X^n and X.
                double gap = xn - X[k];
                if (gap != 0.0) {
                    const auto& b0 = base_at[k];
                    const auto& p0 = pert_at[k];
                    kb = std::max(kb, std::fabs(f.b - (b0.b + c * p0.b)) / std::fabs(gap));
                    ksig = std::max(ksig, std::fabs(f.sigma - (b0.sigma + c * p0.sigma)) / std::fabs(gap));
                    kh = std::max(kh, std::fabs(f.h - (b0.h + c * p0.h)) / std::fabs(gap));
                }
                inhom += c * (pert_at[k].b * grid.dt() + pert_at[k].sigma * path.dB[k] +
                              pert_at[k].h * path.dQV[k]);
                sup_w = std::max(sup_w, inhom * inhom);
                xn = xn + f.b * grid.dt() + f.sigma * path.dB[k] + f.h * path.dQV[k];
                if (!std::isfinite(xn) || std::fabs(xn) > kStateBound) {
                    throw SdeError(static_cast<int>(k) + 1,
                                   "perturbed state left the admissible range (|X| > 1e12 or non-finite)");
                }
                double d = xn - X[k + 1];
                sup_u = std::max(sup_u, d * d);
                record(k + 1);
            }
        }
        secant.update(kb, ksig, kh);
    };
    auto est = estimate_many(vf, n_out, family, grid, n_paths, seed, threads);

    StabilityReport report;
    report.ladder.p_order = 2.0;
    double s_hi = 0.0;
    for (const auto& ctl : family) {
        for (double s : ctl.values) {
            s_hi = std::max(s_hi, std::fabs(s));
        }
    }
    const double T = grid.horizon();
    report.k_b = secant.b;
    report.k_sigma = secant.sigma;
    report.k_h = secant.h;
    report.gronwall_constant =
        9.0 * (report.k_b * report.k_b * T + 4.0 * s_hi * s_hi * report.k_sigma * report.k_sigma +
               std::pow(s_hi, 4) * T * report.k_h * report.k_h);

    report.envelope_ok = true;
    for (std::size_t i = 0; i < n_seq; ++i) {
        const double c = problem.rates[i];
        report.hypothesis.push_back({c * c * est[0].value, c * c * est[1].value, c * c * est[2].value});
        const std::size_t off = 3 + i * per_n;
        const double dx0 = x0_of(i) - problem.x0;
        std::vector<EnvelopePoint> env;
        for (std::size_t j = 0; j < n_check; ++j) {
            EnvelopePoint pt;
            pt.t = grid.time(ks[j]);
            pt.measured = est[off + 2 * j].value;
            pt.std_error = argmax_stderr(est[off + 2 * j]);
            pt.inhomogeneity = est[off + 2 * j + 1].value;
            pt.bound = (3.0 * dx0 * dx0 + 3.0 * pt.inhomogeneity) *
                       std::exp(report.gronwall_constant * pt.t);
            pt.within = pt.measured <= pt.bound + 3.0 * pt.std_error;
            report.envelope_ok = report.envelope_ok && pt.within;
            env.push_back(pt);
        }
        LadderPoint lp;
        lp.h = c;
        lp.error = env.back().measured;
        lp.std_error = env.back().std_error;
        report.ladder.ladder.push_back(lp);
        report.envelope.push_back(std::move(env));
    }
    double first = report.hypothesis.front().total();
    double last = report.hypothesis.back().total();
    report.hypothesis_vanishing = (first == 0.0 && last == 0.0) || last < first;
    fit_slope(report.ladder);
    return report;
}

//---------------------------------------------------------------------------//

double ModulusSpec::operator()(double s) const
{
    switch (kind) {
    case Kind::linear:
        return scale * s;
    case Kind::root:
        return scale * std::sqrt(s + epsilon * epsilon);
    case Kind::log:
        return scale * s * (1.0 + std::log1p(1.0 / s));
    }
    return 0.0;
}

bool ModulusSpec::divergent() const
{
    // 1/(s log(1/s)) and 1/s are not integrable at 0; 1/sqrt(s + eps^2) is.
    return kind == Kind::linear || kind == Kind::log;
}

std::string ModulusSpec::name() const
{
    switch (kind) {
    case Kind::linear:
        return "linear";
    case Kind::root:
        return "root";
    case Kind::log:
        return "log";
    }
    return "";
}

ModulusSpec ModulusSpec::from_name(std::string_view name, double scale, double epsilon)
{
    ModulusSpec m;
    if (name == "linear") {
        m.kind = Kind::linear;
    } else if (name == "root") {
        m.kind = Kind::root;
    } else if (name == "log") {
        m.kind = Kind::log;
    } else {
        throw std::invalid_argument("unknown modulus '" + std::string(name) +
                                    "' (expected linear, root or log)");
    }
    if (!(scale > 0.0) || !std::isfinite(scale) || !(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        throw std::invalid_argument("modulus needs scale > 0 and epsilon >= 0");
    }
    m.scale = scale;
    m.epsilon = epsilon;
    return m;
}

double BoundFunction::operator()(double s) const
{
    if (t.empty()) {
        throw std::logic_error("empty bound function");
    }
    if (s <= t.front()) {
        return value.front();
    }
    if (s >= t.back()) {
        return value.back();
    }
    auto it = std::upper_bound(t.begin(), t.end(), s);
    auto i = static_cast<std::size_t>(it - t.begin());
    double w = (s - t[i - 1]) / (t[i] - t[i - 1]);
    return value[i - 1] + w * (value[i] - value[i - 1]);
}

namespace {

std::vector<double> cumulative_trapezoid(std::span<const double> v, const TimeGrid& grid)
{
    const auto n = static_cast<std::size_t>(grid.n_steps());
    if (v.size() != n + 1) {
        throw std::invalid_argument("v must have one sample per grid time (n_steps + 1)");
    }
    std::vector<double> V(n + 1, 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
        if (!(v[k] >= 0.0) || !std::isfinite(v[k])) {
            throw std::invalid_argument("v must be finite and nonnegative");
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        V[k + 1] = V[k] + 0.5 * (v[k] + v[k + 1]) * grid.dt();
    }
    return V;
}

std::vector<double> grid_times(const TimeGrid& grid)
{
    std::vector<double> t(static_cast<std::size_t>(grid.n_steps()) + 1);
    for (int k = 0; k <= grid.n_steps(); ++k) {
        t[static_cast<std::size_t>(k)] = grid.time(k);
    }
    return t;
}

// F(s) = int_{s_ref}^s dr/H(r) = int (r/H(r)) d(log r), tabulated by Simpson
// panels on the nodes log(s_ref) + i*kLogStep.
class FTable {
public:
    static constexpr double kLogStep = 0.01;
    static constexpr double kMaxLog = 690.0;  // about 1e300

    FTable(const ModulusSpec& H, double s_ref) : H_(H), y_ref_(std::log(s_ref))
    {
        if (!(s_ref > 0.0) || !std::isfinite(s_ref)) {
            throw std::invalid_argument("s_ref must be positive and finite");
        }
        lo_ = 0;
        F_.push_back(0.0);
    }

    double node(long i) const { return y_ref_ + static_cast<double>(i) * kLogStep; }

    // F at log-argument y, extending the table downward as needed.
    double F_log(double y)
    {
        auto i = static_cast<long>(std::floor((y - y_ref_) / kLogStep));
        while (i < lo_) {
            extend_down();
        }
        while (i >= hi()) {
            if (!extend_up()) {
                return std::numeric_limits<double>::infinity();
            }
        }
        return at(i) + panel(node(i), y);
    }

    // Smallest y with F(y) >= target, to 1e-12 in y; +inf if beyond the range.
    double inverse_log(double target, double y_start)
    {
        auto i = static_cast<long>(std::floor((y_start - y_ref_) / kLogStep));
        while (i < lo_) {
            extend_down();
        }
        while (i + 1 > hi()) {
            if (!extend_up()) {
                return std::numeric_limits<double>::infinity();
            }
        }
        while (at(i + 1) < target) {
            ++i;
            if (i + 1 > hi() && !extend_up()) {
                return std::numeric_limits<double>::infinity();
            }
        }
        while (i > lo_ && at(i) > target) {
            --i;
        }
        double a = node(i);
        double b = node(i + 1);
        const double base = at(i);
        while (b - a > 1e-12) {
            double m = 0.5 * (a + b);
            if (base + panel(node(i), m) < target) {
                a = m;
            } else {
                b = m;
            }
        }
        return 0.5 * (a + b);
    }

private:
    double g(double y) const
    {
        double s = std::exp(y);
        return s / H_(s);
    }
    double panel(double a, double b) const
    {
        if (b == a) {
            return 0.0;
        }
        return (b - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b));
    }
    long hi() const { return lo_ + static_cast<long>(F_.size()) - 1; }
    double at(long i) const { return F_[static_cast<std::size_t>(i - lo_)]; }

    void extend_down()
    {
        if (node(lo_) < -745.0) {
            throw std::domain_error("Bihari quadrature reached the smallest representable scale");
        }
        double v = F_.front() - panel(node(lo_ - 1), node(lo_));
        F_.insert(F_.begin(), v);
        --lo_;
    }
    bool extend_up()
    {
        if (node(hi()) > kMaxLog) {
            return false;
        }
        F_.push_back(F_.back() + panel(node(hi()), node(hi() + 1)));
        return true;
    }

    ModulusSpec H_;
    double y_ref_;
    long lo_;
    std::vector<double> F_;  // F at nodes lo_ .. hi()
};

}  // namespace

BoundFunction gronwall_bound(double u0, std::span<const double> v, const TimeGrid& grid)
{
    if (!(u0 >= 0.0) || !std::isfinite(u0)) {
        throw std::invalid_argument("u0 must be finite and nonnegative");
    }
    std::vector<double> V = cumulative_trapezoid(v, grid);
    BoundFunction out;
    out.t = grid_times(grid);
    out.value.resize(V.size());
    for (std::size_t k = 0; k < V.size(); ++k) {
        out.value[k] = u0 * std::exp(V[k]);
    }
    return out;
}

BoundFunction bihari_bound(double u0, std::span<const double> v, const TimeGrid& grid,
                           const ModulusSpec& H, double s_ref)
{
    if (!(u0 >= 0.0) || !std::isfinite(u0)) {
        throw std::invalid_argument("u0 must be finite and nonnegative");
    }
    std::vector<double> V = cumulative_trapezoid(v, grid);
    BoundFunction out;
    out.t = grid_times(grid);
    out.value.assign(V.size(), 0.0);
    if (u0 == 0.0) {
        if (H.divergent()) {
            return out;
        }
        throw std::invalid_argument("Bihari bound with u0 = 0 needs a modulus with divergent "
                                    "int_0 ds/H(s); '" + H.name() + "' is integrable at 0");
    }
    FTable table(H, s_ref);
    const double y0 = std::log(u0);
    const double F0 = table.F_log(y0);
    double y = y0;
    for (std::size_t k = 0; k < V.size(); ++k) {
        if (V[k] == 0.0) {
            out.value[k] = u0;
            continue;
        }
        y = table.inverse_log(F0 + V[k], y);
        out.value[k] = std::exp(y);
    }
    return out;
}

double bihari_F(const ModulusSpec& H, double s, double s_ref)
{
    if (!(s > 0.0) || !std::isfinite(s)) {
        throw std::invalid_argument("bihari_F needs s > 0");
    }
    FTable table(H, s_ref);
    return table.F_log(std::log(s));
}

//---------------------------------------------------------------------------//

ModulusExample modulus_example(std::string_view name, double epsilon)
{
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw std::invalid_argument("catalog regularization epsilon must be positive");
    }
    ModulusExample ex;
    ex.name = std::string(name);
    ex.perturbation = [](double, double) { return CoefficientValues{1.0, 0.0, 0.0}; };
    const double e2 = epsilon * epsilon;
    if (name == "lipschitz") {
        ex.base = [](double, double x) { return CoefficientValues{0.5 * std::sin(x), 0.3 * std::cos(x), 0.0}; };
        ex.modulus = ModulusSpec::from_name("linear", 0.34);  // 0.5^2 + 0.3^2
    } else if (name == "log") {
        ex.base = [e2](double, double x) {
            return CoefficientValues{-0.5 * x * std::log(x * x + e2), 0.2, 0.0};
        };
        ex.modulus = ModulusSpec::from_name("log");
    } else if (name == "root") {
        ex.base = [e2](double, double x) {
            return CoefficientValues{x / std::pow(x * x + e2, 0.25), 0.2, 0.0};
        };
        ex.modulus = ModulusSpec::from_name("root", 1.0, epsilon);
    } else {
        throw std::invalid_argument("unknown catalog entry '" + std::string(name) +
                                    "' (expected lipschitz, log or root)");
    }
    return ex;
}

StabilityReport modulus_stability_study(const ModulusExample& example,
                                        std::span<const double> rates, double x0,
                                        std::span<const VolatilityControl> family,
                                        const TimeGrid& grid, std::size_t n_paths,
                                        std::uint64_t seed, unsigned threads)
{
    PerturbationProblem problem;
    problem.base = example.base;
    problem.perturbation = example.perturbation;
    problem.rates.assign(rates.begin(), rates.end());
    problem.x0 = x0;
    return perturbation_study(problem, family, grid, n_paths, seed, threads);
}

}  // namespace gcalc
