#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcalc/exact_sum.hpp"
#include "gcalc/scenario.hpp"

namespace gcalc {

struct ControlStat {
    int control_id = 0;
    double mean = 0.0;
    double std_error = 0.0;
};

/// Max-of-means estimate of the sublinear expectation over a control family.
struct SublinearEstimate {
    double value = 0.0;        // max over controls of the sample mean
    int argmax_control = 0;    // smallest id attaining it
    std::vector<ControlStat> per_control;
    std::size_t n_paths = 0;
    double lower_value = 0.0;  // -(max over controls of the mean of -X)
};

/// A sample failed; carries the control id and path index for diagnosis.
class SampleError : public std::runtime_error {
public:
    SampleError(int control_id, std::size_t path_index, const std::string& what);

    int control_id() const noexcept { return control_id_; }
    std::size_t path_index() const noexcept { return path_index_; }

private:
    int control_id_;
    std::size_t path_index_;
};

using Functional = std::function<double(const GPath&)>;
/// Writes several functionals of the same path into out (fixed length).
using VectorFunctional = std::function<void(const GPath&, std::span<double> out)>;

/// Every control sees the same drivers generate_driver(grid, seed, i),
/// i = 0 .. n_paths-1. threads = 0 uses the hardware concurrency; the result
/// is bit-identical for every thread count.
SublinearEstimate estimate(const Functional& functional,
                           std::span<const VolatilityControl> family, const TimeGrid& grid,
                           std::size_t n_paths, std::uint64_t seed, unsigned threads = 0);

std::vector<SublinearEstimate> estimate_many(const VectorFunctional& functional,
                                             std::size_t n_outputs,
                                             std::span<const VolatilityControl> family,
                                             const TimeGrid& grid, std::size_t n_paths,
                                             std::uint64_t seed, unsigned threads = 0);

//---------------------------------------------------------------------------//
// Lower-level engine shared by the estimators and the axiom checks.
//---------------------------------------------------------------------------//

/// Exact first and second sample moments for one (control, output) cell.
struct SampleSums {
    ExactSum sum;
    ExactSum sum_sq;

    void add(double v)
    {
        sum.add(v);
        sum_sq.add_square(v);
    }
    void merge(const SampleSums& other)
    {
        sum.merge(other.sum);
        sum_sq.merge(other.sum_sq);
    }
};

struct SampleContext {
    int control_id = 0;
    std::size_t path_index = 0;
};

/// Called once per (path, control); row holds that control's n_outputs cells
/// and scratch has n_outputs doubles of working space.
using SampleKernel = std::function<void(const GPath& path, const SampleContext& ctx,
                                        std::span<SampleSums> row, std::span<double> scratch)>;

/// Returns cells laid out [control][output]. Each cell is an exact sum, so the
/// merge order across worker threads cannot change any bit of the result.
std::vector<SampleSums> accumulate_samples(const SampleKernel& kernel, std::size_t n_outputs,
                                           std::span<const VolatilityControl> family,
                                           const TimeGrid& grid, std::size_t n_paths,
                                           std::uint64_t seed, unsigned threads);

/// Reduces output `output` of accumulate_samples() to an estimate.
SublinearEstimate reduce_samples(std::span<const SampleSums> cells, std::size_t n_outputs,
                                 std::size_t output, std::span<const VolatilityControl> family,
                                 std::size_t n_paths);

/// Exact max over controls of the sample sum for one output.
ExactValue max_sample_sum(std::span<const SampleSums> cells, std::size_t n_outputs,
                          std::size_t output, std::size_t n_controls);

//---------------------------------------------------------------------------//
// Axioms of a sublinear expectation, verified on the estimator.
//---------------------------------------------------------------------------//

/// Each flag is decided in exact arithmetic on the realized samples: the
/// combined functionals X - Y and lambda*X are accumulated exactly path by
/// path, and the max-of-means comparisons use exact sums. The double-valued
/// estimates are attached for reporting.
struct AxiomReport {
    bool dominated = false;    // X >= Y held on every sampled (path, control)
    bool monotonicity = false; // vacuously true when !dominated
    bool constant_preserving = false;
    bool self_dominated = false;
    bool positive_homogeneity = false;

    SublinearEstimate x;
    SublinearEstimate y;
    SublinearEstimate x_minus_y;
    SublinearEstimate scaled_x;
    SublinearEstimate constant;

    bool all() const
    {
        return monotonicity && constant_preserving && self_dominated && positive_homogeneity;
    }
};

AxiomReport axiom_report(std::span<const VolatilityControl> family, const TimeGrid& grid,
                         std::size_t n_paths, std::uint64_t seed, const Functional& x,
                         const Functional& y, double lambda, double c, unsigned threads = 0);

}  // namespace gcalc
