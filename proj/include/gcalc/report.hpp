#pragma once

#include <cstddef>
#include <vector>

namespace gcalc {

struct LadderPoint {
    double h = 0.0;          // ladder parameter (step size or perturbation rate)
    double error = 0.0;
    double std_error = 0.0;  // of the maximizing control
    bool fitted = false;     // entered the slope fit
    bool flagged = false;    // below the floating-point hygiene floor
};

/// Error ladder with a least-squares slope of log(error) on log(h).
struct ConvergenceReport {
    std::vector<LadderPoint> ladder;
    double fitted_slope = 0.0;  // NaN when fewer than two points qualify
    double p_order = 0.0;

    bool slope_defined() const;
    bool strictly_decreasing() const;
    std::size_t n_fitted() const;
};

/// Points with error > 1e-14 and not flagged are fitted.
void fit_slope(ConvergenceReport& report);

constexpr double kFitFloor = 1e-14;

}  // namespace gcalc
