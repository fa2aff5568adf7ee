#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcalc/experiment.hpp"
#include "gcalc/expr.hpp"

namespace {

enum Exit { kOk = 0, kAssertion = 1, kConfig = 2, kRuntime = 3 };

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<unsigned> threads;
};

struct SensitivityFlags {
    std::optional<std::string> variable;
    std::optional<int> order;
    std::optional<double> p;
    std::vector<double> h_ladder;
};

gcalc::json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw gcalc::ConfigError("<file>", "cannot open " + path);
    }
    try {
        return gcalc::json::parse(in);
    } catch (const gcalc::json::parse_error& e) {
        throw gcalc::ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
}

int report(const gcalc::RunSummary& s, const std::string& out)
{
    for (const auto& a : s.assertions) {
        std::printf("%s %s%s%s\n", a.passed ? "PASS" : "FAIL", a.name.c_str(),
                    a.detail.empty() ? "" : "  ", a.detail.c_str());
    }
    std::printf("wrote %zu csv file(s) and summary.json to %s (%.2f s)\n", s.csv_files.size(),
                out.c_str(), s.wall_clock_seconds);
    return s.passed() ? kOk : kAssertion;
}

int run_experiment(gcalc::Experiment which, const Common& common, const SensitivityFlags* sens)
{
    gcalc::json j = read_json(common.config);
    if (!j.is_object()) {
        throw gcalc::ConfigError("<root>", "expected a JSON object");
    }
    if (common.threads) {
        j["mc"]["threads"] = *common.threads;
    }
    if (sens) {
        auto& blk = j["sensitivity"];
        if (sens->variable) blk["variable"] = *sens->variable;
        if (sens->order) blk["order"] = *sens->order;
        if (sens->p) blk["p"] = *sens->p;
        if (!sens->h_ladder.empty()) blk["h_ladder"] = sens->h_ladder;
    }
    gcalc::ExperimentConfig cfg = gcalc::parse_config(j, which);
    gcalc::RunSummary s = which == gcalc::Experiment::cross_check ? gcalc::cross_check(cfg, common.out)
                                                                  : gcalc::run(cfg, common.out);
    return report(s, common.out);
}

int parse_check(const std::vector<std::string>& exprs, const std::string& config)
{
    int status = kOk;
    for (const auto& src : exprs) {
        try {
            gcalc::expr::Expr e = gcalc::expr::parse(src);
            std::printf("ok: %s\n", gcalc::expr::to_string(e).c_str());
        } catch (const gcalc::expr::ParseError& e) {
            std::printf("error at byte offset %zu: %s\n", e.offset(), e.what());
            status = kConfig;
        }
    }
    if (!config.empty()) {
        gcalc::parse_config(read_json(config));
        std::printf("config ok: %s\n", config.c_str());
    }
    return status;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Scenario Monte Carlo and PDE tools for G-expectations"};
    app.require_subcommand(1);

    struct Entry {
        gcalc::Experiment which;
        const char* help;
    };
    const Entry entries[] = {
        {gcalc::Experiment::gheat, "solve the G-heat equation on a space grid"},
        {gcalc::Experiment::expect, "sublinear expectation of a terminal payoff"},
        {gcalc::Experiment::sde, "Euler paths of a G-SDE"},
        {gcalc::Experiment::moments, "moment and Lipschitz-ratio estimates"},
        {gcalc::Experiment::sensitivity, "difference quotients against variational processes"},
        {gcalc::Experiment::stability, "stability under coefficient perturbation"},
        {gcalc::Experiment::bihari, "Bihari/Gronwall bound curve"},
        {gcalc::Experiment::axioms, "exact sublinear-expectation axiom checks"},
        {gcalc::Experiment::cross_check, "PDE versus scenario-supremum consistency"},
    };

    std::vector<Common> commons(std::size(entries));
    SensitivityFlags sens;
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < std::size(entries); ++i) {
        auto* sub = app.add_subcommand(std::string(gcalc::experiment_name(entries[i].which)), entries[i].help);
        sub->add_option("--config", commons[i].config, "experiment JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", commons[i].out, "output directory");
        sub->add_option("--threads", commons[i].threads, "worker threads (0 = all cores)");
        if (entries[i].which == gcalc::Experiment::sensitivity) {
            sub->add_option("--variable", sens.variable, "x or alpha");
            sub->add_option("--order", sens.order, "1 or 2");
            sub->add_option("--p", sens.p, "moment power (2 or 4)");
            sub->add_option("--h-ladder", sens.h_ladder, "strictly decreasing step sizes")->delimiter(',');
        }
        subs.push_back(sub);
    }
    std::vector<std::string> exprs;
    std::string pc_config;
    auto* pc = app.add_subcommand("parse-check", "parse expressions or validate a config");
    pc->add_option("--expr", exprs, "expression to parse (repeatable)");
    pc->add_option("--config", pc_config, "config to validate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (pc->parsed()) {
            return parse_check(exprs, pc_config);
        }
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (subs[i]->parsed()) {
                bool is_sens = entries[i].which == gcalc::Experiment::sensitivity;
                return run_experiment(entries[i].which, commons[i], is_sens ? &sens : nullptr);
            }
        }
    } catch (const gcalc::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "runtime error: %s\n", e.what());
        return kRuntime;
    }
    return kConfig;
}
