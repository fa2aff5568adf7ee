#include "gcalc/sublinear.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace gcalc {

SampleError::SampleError(int control_id, std::size_t path_index, const std::string& what)
    : std::runtime_error("control " + std::to_string(control_id) + ", path " +
                         std::to_string(path_index) + ": " + what),
      control_id_(control_id),
      path_index_(path_index)
{
}

namespace {

constexpr std::size_t kChunk = 64;

unsigned resolve_threads(unsigned requested, std::size_t n_paths)
{
    unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
    std::size_t chunks = (n_paths + kChunk - 1) / kChunk;
    return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(t, chunks)));
}

}  // namespace

std::vector<SampleSums> accumulate_samples(const SampleKernel& kernel, std::size_t n_outputs,
                                           std::span<const VolatilityControl> family,
                                           const TimeGrid& grid, std::size_t n_paths,
                                           std::uint64_t seed, unsigned threads)
{
    if (family.empty()) {
        throw std::invalid_argument("sublinear estimate needs a nonempty control family");
    }
    if (n_paths < 2) {
        throw std::invalid_argument("sublinear estimate needs n_paths >= 2");
    }
    const std::size_t n_controls = family.size();
    const std::size_t n_cells = n_controls * n_outputs;
    const std::size_t n_chunks = (n_paths + kChunk - 1) / kChunk;
    const unsigned n_workers = resolve_threads(threads, n_paths);

    std::vector<std::vector<SampleSums>> partial(n_workers);
    std::atomic<std::size_t> next_chunk{0};
    // Smallest failing path seen so far; chunks beyond it are skipped. Chunks
    // are claimed in order and always finished, so the reported failure is the
    // same for every schedule.
    std::atomic<std::size_t> first_failure{std::numeric_limits<std::size_t>::max()};
    std::mutex error_mutex;
    std::size_t error_path = std::numeric_limits<std::size_t>::max();
    std::exception_ptr error;

    auto work = [&](unsigned w) {
        auto& cells = partial[w];
        cells.assign(n_cells, SampleSums{});
        std::vector<double> scratch(n_outputs);
        DriverPath driver;
        GPath path;
        for (;;) {
            std::size_t chunk = next_chunk.fetch_add(1);
            if (chunk >= n_chunks) {
                return;
            }
            std::size_t begin = chunk * kChunk;
            if (begin > first_failure.load()) {
                return;
            }
            std::size_t end = std::min(n_paths, begin + kChunk);
            for (std::size_t i = begin; i < end; ++i) {
                generate_driver_into(grid, seed, i, driver);
                for (std::size_t c = 0; c < n_controls; ++c) {
                    SampleContext ctx{family[c].id, i};
                    try {
                        realize_path_into(driver, family[c], grid, path);
                        kernel(path, ctx, std::span<SampleSums>(cells).subspan(c * n_outputs, n_outputs),
                               scratch);
                    } catch (const SampleError&) {
                        std::lock_guard lock(error_mutex);
                        if (i < error_path) {
                            error_path = i;
                            error = std::current_exception();
                        }
                        first_failure.store(std::min(first_failure.load(), i));
                        return;
                    } catch (const std::exception& ex) {
                        std::lock_guard lock(error_mutex);
                        if (i < error_path) {
                            error_path = i;
                            error = std::make_exception_ptr(SampleError(ctx.control_id, i, ex.what()));
                        }
                        first_failure.store(std::min(first_failure.load(), i));
                        return;
                    }
                }
            }
        }
    };

    if (n_workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (unsigned w = 0; w < n_workers; ++w) {
            pool.emplace_back(work, w);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }

    std::vector<SampleSums> total = std::move(partial[0]);
    for (unsigned w = 1; w < n_workers; ++w) {
        for (std::size_t j = 0; j < n_cells; ++j) {
            total[j].merge(partial[w][j]);
        }
    }
    return total;
}

ExactValue max_sample_sum(std::span<const SampleSums> cells, std::size_t n_outputs,
                          std::size_t output, std::size_t n_controls)
{
    ExactValue best = cells[output].sum.value();
    for (std::size_t c = 1; c < n_controls; ++c) {
        ExactValue s = cells[c * n_outputs + output].sum.value();
        if (s > best) {
            best = std::move(s);
        }
    }
    return best;
}

SublinearEstimate reduce_samples(std::span<const SampleSums> cells, std::size_t n_outputs,
                                 std::size_t output, std::span<const VolatilityControl> family,
                                 std::size_t n_paths)
{
    const std::size_t n_controls = family.size();
    const auto n = static_cast<std::uint64_t>(n_paths);
    const ExactValue n_exact = ExactValue::from_double(static_cast<double>(n));

    SublinearEstimate est;
    est.n_paths = n_paths;
    est.per_control.reserve(n_controls);

    ExactValue best_upper;
    ExactValue best_lower;  // max over controls of the sum of -X
    for (std::size_t c = 0; c < n_controls; ++c) {
        const SampleSums& cell = cells[c * n_outputs + output];
        ExactValue s1 = cell.sum.value();
        ExactValue s2 = cell.sum_sq.value();
        // (n*S2 - S1^2) / (n(n-1)) is the unbiased sample variance, exactly.
        ExactValue spread = s2 * n_exact - s1 * s1;
        double variance = spread.sign() <= 0 ? 0.0 : spread.divided_to_double(n * (n - 1));
        ControlStat stat;
        stat.control_id = family[c].id;
        stat.mean = s1.divided_to_double(n);
        stat.std_error = std::sqrt(variance / static_cast<double>(n));
        est.per_control.push_back(stat);

        ExactValue neg = -s1;
        if (c == 0 || s1 > best_upper) {
            best_upper = s1;
            est.argmax_control = family[c].id;
        }
        if (c == 0 || neg > best_lower) {
            best_lower = std::move(neg);
        }
    }
    est.value = best_upper.divided_to_double(n);
    est.lower_value = -best_lower.divided_to_double(n);
    return est;
}

std::vector<SublinearEstimate> estimate_many(const VectorFunctional& functional,
                                             std::size_t n_outputs,
                                             std::span<const VolatilityControl> family,
                                             const TimeGrid& grid, std::size_t n_paths,
                                             std::uint64_t seed, unsigned threads)
{
    SampleKernel kernel = [&functional](const GPath& path, const SampleContext& ctx,
                                        std::span<SampleSums> row, std::span<double> scratch) {
        functional(path, scratch);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (!std::isfinite(scratch[j])) {
                throw SampleError(ctx.control_id, ctx.path_index,
                                  "non-finite functional value (output " + std::to_string(j) + ")");
            }
            row[j].add(scratch[j]);
        }
    };
    auto cells = accumulate_samples(kernel, n_outputs, family, grid, n_paths, seed, threads);
    std::vector<SublinearEstimate> out;
    out.reserve(n_outputs);
    for (std::size_t j = 0; j < n_outputs; ++j) {
        out.push_back(reduce_samples(cells, n_outputs, j, family, n_paths));
    }
    return out;
}

SublinearEstimate estimate(const Functional& functional, std::span<const VolatilityControl> family,
                           const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                           unsigned threads)
{
    VectorFunctional vf = [&functional](const GPath& path, std::span<double> out) {
        out[0] = functional(path);
    };
    return estimate_many(vf, 1, family, grid, n_paths, seed, threads).front();
}

//---------------------------------------------------------------------------//

AxiomReport axiom_report(std::span<const VolatilityControl> family, const TimeGrid& grid,
                         std::size_t n_paths, std::uint64_t seed, const Functional& x,
                         const Functional& y, double lambda, double c, unsigned threads)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("axiom_report: lambda must be finite and >= 0");
    }
    if (!std::isfinite(c)) {
        throw std::invalid_argument("axiom_report: constant must be finite");
    }
    enum Cell : std::size_t { kX, kY, kDiff, kScaled, kConst, kCells };
    std::atomic<bool> dominated{true};

    SampleKernel kernel = [&](const GPath& path, const SampleContext& ctx, std::span<SampleSums> row,
                              std::span<double>) {
        double xv = x(path);
        double yv = y(path);
        if (!std::isfinite(xv) || !std::isfinite(yv)) {
            throw SampleError(ctx.control_id, ctx.path_index, "non-finite functional value");
        }
        if (xv < yv) {
            dominated.store(false, std::memory_order_relaxed);
        }
        row[kX].add(xv);
        row[kY].add(yv);
        // X - Y and lambda*X enter the exact sums without intermediate rounding;
        // the squares feed only the (diagnostic) standard errors.
        row[kDiff].sum.add(xv);
        row[kDiff].sum.add(-yv);
        row[kDiff].sum_sq.add_square(xv - yv);
        row[kScaled].sum.add_product(lambda, xv);
        row[kScaled].sum_sq.add_square(lambda * xv);
        row[kConst].add(c);
    };
    auto cells = accumulate_samples(kernel, kCells, family, grid, n_paths, seed, threads);
    const std::size_t nc = family.size();

    AxiomReport report;
    report.x = reduce_samples(cells, kCells, kX, family, n_paths);
    report.y = reduce_samples(cells, kCells, kY, family, n_paths);
    report.x_minus_y = reduce_samples(cells, kCells, kDiff, family, n_paths);
    report.scaled_x = reduce_samples(cells, kCells, kScaled, family, n_paths);
    report.constant = reduce_samples(cells, kCells, kConst, family, n_paths);

    ExactValue mx = max_sample_sum(cells, kCells, kX, nc);
    ExactValue my = max_sample_sum(cells, kCells, kY, nc);
    ExactValue md = max_sample_sum(cells, kCells, kDiff, nc);
    ExactValue ml = max_sample_sum(cells, kCells, kScaled, nc);
    ExactValue mc = max_sample_sum(cells, kCells, kConst, nc);
    const ExactValue n_exact = ExactValue::from_double(static_cast<double>(n_paths));

    report.dominated = dominated.load();
    report.monotonicity = !report.dominated || (mx >= my && report.x.value >= report.y.value);
    report.constant_preserving = mc == ExactValue::from_double(c) * n_exact &&
                                 report.constant.value == c && report.constant.lower_value == c;
    report.self_dominated = mx - my <= md;
    report.positive_homogeneity = ml == ExactValue::from_double(lambda) * mx;
    return report;
}

}  // namespace gcalc
