#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gcalc/scenario.hpp"

namespace gcalc {

using json = nlohmann::ordered_json;

enum class Experiment { gheat, expect, sde, moments, sensitivity, stability, bihari, axioms, cross_check };

std::string_view experiment_name(Experiment e);
std::optional<Experiment> experiment_from_name(std::string_view name);

/// Schema violation; field() is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct SpaceGridConfig {
    double x_min = 0.0;
    double x_max = 0.0;
    int nx = 0;
    double safety = 0.9;
};

/// A validated configuration. `echo` is the input with every default filled
/// in; running from it reproduces the run.
struct ExperimentConfig {
    Experiment experiment = Experiment::expect;
    json echo;

    VolatilityBand band;
    double T = 1.0;
    int n_steps = 64;
    std::optional<SpaceGridConfig> space_grid;

    std::string b = "0";
    std::string sigma = "0";
    std::string h = "0";
    std::optional<double> alpha;
    double derivative_bound = 100.0;  // warn when sampled |b_x|, |sigma_x|, |h_x| exceed it
    std::string x0 = "0";
    std::optional<std::string> x_of_alpha;

    FamilySpec family;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    unsigned threads = 0;

    json block;  // experiment-specific settings, defaults resolved
};

/// Validates j. `forced` (from the CLI subcommand) must agree with
/// j["experiment"] when both are present.
ExperimentConfig parse_config(const json& j, std::optional<Experiment> forced = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<Experiment> forced = std::nullopt);

struct Assertion {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct RunSummary {
    json config;
    double wall_clock_seconds = 0.0;
    json results = json::object();
    std::vector<std::string> csv_files;
    std::vector<Assertion> assertions;

    bool passed() const;
    json to_json() const;
};

/// Runs the configured experiment, writing CSVs and summary.json into out_dir.
RunSummary run(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// PDE value against the scenario-supremum estimate of payoff(x + B_T) at each
/// evaluation point. Passes when each gap is within tol_pde + 3 stderr, where
/// tol_pde is the change under halving the space resolution, or within the
/// fixed `tolerance` when the block sets one.
RunSummary cross_check(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Formats a double for CSV output ("%.17g").
std::string format_double(double v);

}  // namespace gcalc
