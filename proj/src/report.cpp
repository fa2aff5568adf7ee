#include "gcalc/report.hpp"

#include <cmath>
#include <limits>

namespace gcalc {

bool ConvergenceReport::slope_defined() const
{
    return std::isfinite(fitted_slope);
}

bool ConvergenceReport::strictly_decreasing() const
{
    for (std::size_t i = 1; i < ladder.size(); ++i) {
        if (!(ladder[i].error < ladder[i - 1].error)) {
            return false;
        }
    }
    return true;
}

std::size_t ConvergenceReport::n_fitted() const
{
    std::size_t n = 0;
    for (const auto& p : ladder) {
        n += p.fitted ? 1 : 0;
    }
    return n;
}

void fit_slope(ConvergenceReport& report)
{
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    double n = 0.0;
    for (auto& p : report.ladder) {
        p.fitted = !p.flagged && p.error > kFitFloor && p.h != 0.0;
        if (!p.fitted) {
            continue;
        }
        double lx = std::log(std::fabs(p.h));
        double ly = std::log(p.error);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        n += 1.0;
    }
    double denom = n * sxx - sx * sx;
    if (n < 2.0 || denom <= 0.0) {
        report.fitted_slope = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    report.fitted_slope = (n * sxy - sx * sy) / denom;
}

}  // namespace gcalc
