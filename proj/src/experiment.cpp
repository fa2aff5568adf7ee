#include "gcalc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "gcalc/expr.hpp"
#include "gcalc/gheat.hpp"
#include "gcalc/sde.hpp"
#include "gcalc/stability.hpp"
#include "gcalc/sublinear.hpp"
#include "gcalc/variation.hpp"

namespace gcalc {

namespace fs = std::filesystem;

namespace {

constexpr std::pair<Experiment, std::string_view> kNames[] = {
    {Experiment::gheat, "gheat"},         {Experiment::expect, "expect"},
    {Experiment::sde, "sde"},             {Experiment::moments, "moments"},
    {Experiment::sensitivity, "sensitivity"}, {Experiment::stability, "stability"},
    {Experiment::bihari, "bihari"},       {Experiment::axioms, "axioms"},
    {Experiment::cross_check, "cross-check"},
};

}  // namespace

std::string_view experiment_name(Experiment e)
{
    for (const auto& [k, v] : kNames) {
        if (k == e) {
            return v;
        }
    }
    return "";
}

std::optional<Experiment> experiment_from_name(std::string_view name)
{
    for (const auto& [k, v] : kNames) {
        if (v == name) {
            return k;
        }
    }
    return std::nullopt;
}

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::runtime_error(field + ": " + message), field_(std::move(field))
{
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

//---------------------------------------------------------------------------//
// Schema reading
//---------------------------------------------------------------------------//

namespace {

std::string join(const std::string& path, std::string_view key)
{
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

const json* member(const json& obj, std::string_view key)
{
    auto it = obj.find(std::string(key));
    return it == obj.end() ? nullptr : &*it;
}

const json& object_at(const json& obj, std::string_view key, const std::string& path, bool required)
{
    static const json empty = json::object();
    const json* v = member(obj, key);
    if (!v) {
        if (required) {
            throw ConfigError(join(path, key), "required object is missing");
        }
        return empty;
    }
    if (!v->is_object()) {
        throw ConfigError(join(path, key), "expected an object");
    }
    return *v;
}

double number(const json& obj, std::string_view key, const std::string& path,
              std::optional<double> fallback = std::nullopt)
{
    const json* v = member(obj, key);
    if (!v) {
        if (!fallback) {
            throw ConfigError(join(path, key), "required number is missing");
        }
        return *fallback;
    }
    if (!v->is_number()) {
        throw ConfigError(join(path, key), "expected a number");
    }
    double d = v->get<double>();
    if (!std::isfinite(d)) {
        throw ConfigError(join(path, key), "expected a finite number");
    }
    return d;
}

std::int64_t integer(const json& obj, std::string_view key, const std::string& path,
                     std::optional<std::int64_t> fallback = std::nullopt)
{
    const json* v = member(obj, key);
    if (!v) {
        if (!fallback) {
            throw ConfigError(join(path, key), "required integer is missing");
        }
        return *fallback;
    }
    if (!v->is_number_integer()) {
        throw ConfigError(join(path, key), "expected an integer");
    }
    return v->get<std::int64_t>();
}

std::uint64_t unsigned_integer(const json& obj, std::string_view key, const std::string& path,
                               std::optional<std::uint64_t> fallback = std::nullopt)
{
    const json* v = member(obj, key);
    if (!v) {
        if (!fallback) {
            throw ConfigError(join(path, key), "required integer is missing");
        }
        return *fallback;
    }
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        throw ConfigError(join(path, key), "expected a nonnegative integer");
    }
    return v->get<std::uint64_t>();
}

std::string string_at(const json& obj, std::string_view key, const std::string& path,
                      std::optional<std::string> fallback = std::nullopt)
{
    const json* v = member(obj, key);
    if (!v) {
        if (!fallback) {
            throw ConfigError(join(path, key), "required string is missing");
        }
        return *fallback;
    }
    if (!v->is_string()) {
        throw ConfigError(join(path, key), "expected a string");
    }
    return v->get<std::string>();
}

bool boolean(const json& obj, std::string_view key, const std::string& path, bool fallback)
{
    const json* v = member(obj, key);
    if (!v) {
        return fallback;
    }
    if (!v->is_boolean()) {
        throw ConfigError(join(path, key), "expected true or false");
    }
    return v->get<bool>();
}

std::vector<double> numbers(const json& obj, std::string_view key, const std::string& path,
                            std::optional<std::vector<double>> fallback = std::nullopt)
{
    const json* v = member(obj, key);
    if (!v) {
        if (!fallback) {
            throw ConfigError(join(path, key), "required array is missing");
        }
        return *fallback;
    }
    if (!v->is_array()) {
        throw ConfigError(join(path, key), "expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
        const json& e = (*v)[i];
        if (!e.is_number() || !std::isfinite(e.get<double>())) {
            throw ConfigError(join(path, key) + "[" + std::to_string(i) + "]",
                              "expected a finite number");
        }
        out.push_back(e.get<double>());
    }
    return out;
}

expr::Expr expression(const std::string& source, const std::string& field)
{
    try {
        return expr::parse(source);
    } catch (const expr::ParseError& e) {
        throw ConfigError(field, "byte offset " + std::to_string(e.offset()) + ": " + e.what());
    }
}

void require_vars(const expr::Expr& e, const std::string& field, bool t, bool x, bool a)
{
    if ((!t && expr::depends_on(e, expr::Var::t)) || (!x && expr::depends_on(e, expr::Var::x)) ||
        (!a && expr::depends_on(e, expr::Var::a))) {
        std::string allowed;
        for (auto [ok, name] : {std::pair{t, "t"}, std::pair{x, "x"}, std::pair{a, "a"}}) {
            if (ok) {
                allowed += allowed.empty() ? name : std::string(", ") + name;
            }
        }
        throw ConfigError(field, "expression may only use " + (allowed.empty() ? "constants" : allowed));
    }
}

bool needs_mc(Experiment e)
{
    return e != Experiment::gheat && e != Experiment::bihari;
}

bool needs_coefficients(Experiment e)
{
    return e == Experiment::sde || e == Experiment::moments || e == Experiment::sensitivity ||
           e == Experiment::stability;
}

std::string block_key(Experiment e)
{
    return e == Experiment::cross_check ? "cross_check" : std::string(experiment_name(e));
}

json to_json_array(const std::vector<double>& v)
{
    json a = json::array();
    for (double d : v) {
        a.push_back(d);
    }
    return a;
}

std::vector<double> default_ladder()
{
    std::vector<double> out;
    for (int k = 3; k <= 7; ++k) {
        out.push_back(std::ldexp(1.0, -k));
    }
    return out;
}

json parse_block(const ExperimentConfig& cfg, const json& root)
{
    const std::string key = block_key(cfg.experiment);
    const json& src = object_at(root, key, "", false);
    json out = json::object();
    switch (cfg.experiment) {
    case Experiment::gheat: {
        std::string payoff = string_at(src, "payoff", key);
        require_vars(expression(payoff, key + ".payoff"), key + ".payoff", false, true, false);
        out["payoff"] = payoff;
        out["nx"] = integer(src, "nx", key, 801);
        if (out["nx"].get<std::int64_t>() < 3) {
            throw ConfigError(key + ".nx", "must be at least 3");
        }
        break;
    }
    case Experiment::expect: {
        std::string payoff = string_at(src, "payoff", key);
        expression(payoff, key + ".payoff");
        out["payoff"] = payoff;
        if (member(src, "expected_value")) {
            out["expected_value"] = number(src, "expected_value", key);
            out["tolerance"] = number(src, "tolerance", key);
        }
        if (member(src, "expected_lower")) {
            out["expected_lower"] = number(src, "expected_lower", key);
            out["tolerance"] = number(src, "tolerance", key);
        }
        break;
    }
    case Experiment::sde: {
        out["path_index"] = unsigned_integer(src, "path_index", key, 0);
        break;
    }
    case Experiment::moments: {
        auto ps = numbers(src, "p", key, std::vector<double>{2.0, 4.0, 8.0});
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (!(ps[i] > 0.0)) {
                throw ConfigError(key + ".p[" + std::to_string(i) + "]", "moment power must be positive");
            }
        }
        out["p"] = to_json_array(ps);
        auto offs = numbers(src, "lipschitz_offsets", key, std::vector<double>{});
        for (std::size_t i = 0; i < offs.size(); ++i) {
            if (offs[i] == 0.0) {
                throw ConfigError(key + ".lipschitz_offsets[" + std::to_string(i) + "]", "must be nonzero");
            }
        }
        out["lipschitz_offsets"] = to_json_array(offs);
        double lp = number(src, "lipschitz_p", key, 2.0);
        if (!(lp >= 2.0)) {
            throw ConfigError(key + ".lipschitz_p", "must be at least 2");
        }
        out["lipschitz_p"] = lp;
        break;
    }
    case Experiment::sensitivity: {
        std::string var = string_at(src, "variable", key, "x");
        if (var != "x" && var != "alpha") {
            throw ConfigError(key + ".variable", "expected \"x\" or \"alpha\"");
        }
        if (var == "alpha" && (!cfg.alpha || !cfg.x_of_alpha)) {
            throw ConfigError(key + ".variable",
                              "alpha sensitivity needs coefficients.alpha and x_of_alpha");
        }
        out["variable"] = var;
        auto order = integer(src, "order", key, 1);
        if (order != 1 && order != 2) {
            throw ConfigError(key + ".order", "expected 1 or 2");
        }
        out["order"] = order;
        double p = number(src, "p", key, 2.0);
        if (p != 2.0 && p != 4.0) {
            throw ConfigError(key + ".p", "expected 2 or 4");
        }
        out["p"] = p;
        auto ladder = numbers(src, "h_ladder", key, default_ladder());
        if (ladder.empty()) {
            throw ConfigError(key + ".h_ladder", "must not be empty");
        }
        for (std::size_t i = 0; i < ladder.size(); ++i) {
            if (ladder[i] == 0.0 || (i > 0 && !(ladder[i] < ladder[i - 1]))) {
                throw ConfigError(key + ".h_ladder[" + std::to_string(i) + "]",
                                  "entries must be nonzero and strictly decreasing");
            }
        }
        out["h_ladder"] = to_json_array(ladder);
        if (member(src, "min_slope")) {
            out["min_slope"] = number(src, "min_slope", key);
        }
        out["require_decreasing"] = boolean(src, "require_decreasing", key, false);
        break;
    }
    case Experiment::stability: {
        std::vector<double> rates;
        if (member(src, "rates")) {
            rates = numbers(src, "rates", key);
        } else {
            auto n_max = integer(src, "n_max", key, 32);
            if (n_max < 1) {
                throw ConfigError(key + ".n_max", "must be at least 1");
            }
            for (std::int64_t n = 1; n <= n_max; ++n) {
                rates.push_back(1.0 / static_cast<double>(n));
            }
        }
        if (rates.empty()) {
            throw ConfigError(key + ".rates", "must not be empty");
        }
        out["rates"] = to_json_array(rates);
        if (member(src, "x0_n")) {
            auto x0n = numbers(src, "x0_n", key);
            if (x0n.size() != rates.size()) {
                throw ConfigError(key + ".x0_n", "needs one entry per rate");
            }
            out["x0_n"] = to_json_array(x0n);
        }
        if (member(src, "example")) {
            std::string ex = string_at(src, "example", key);
            if (ex != "lipschitz" && ex != "log" && ex != "root") {
                throw ConfigError(key + ".example", "expected lipschitz, log or root");
            }
            out["example"] = ex;
            out["epsilon"] = number(src, "epsilon", key, 1e-3);
            if (!(out["epsilon"].get<double>() > 0.0)) {
                throw ConfigError(key + ".epsilon", "must be positive");
            }
        } else {
            const json& pert = object_at(src, "perturbations", key, false);
            const std::string pk = key + ".perturbations";
            json po = json::object();
            for (const char* c : {"b", "sigma", "h"}) {
                std::string s = string_at(pert, c, pk, "0");
                expression(s, join(pk, c));
                po[c] = s;
            }
            out["perturbations"] = po;
        }
        if (member(src, "slope_range")) {
            auto r = numbers(src, "slope_range", key);
            if (r.size() != 2 || !(r[0] <= r[1])) {
                throw ConfigError(key + ".slope_range", "expected [lo, hi] with lo <= hi");
            }
            out["slope_range"] = to_json_array(r);
        }
        out["require_decreasing"] = boolean(src, "require_decreasing", key, false);
        break;
    }
    case Experiment::bihari: {
        double u0 = number(src, "u0", key, 1.0);
        if (!(u0 >= 0.0)) {
            throw ConfigError(key + ".u0", "must be nonnegative");
        }
        out["u0"] = u0;
        std::string v = string_at(src, "v", key, "1");
        require_vars(expression(v, key + ".v"), key + ".v", true, false, false);
        out["v"] = v;
        std::string m = string_at(src, "modulus", key, "linear");
        double scale = number(src, "scale", key, 1.0);
        double eps = number(src, "epsilon", key, 0.0);
        try {
            ModulusSpec::from_name(m, scale, eps);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key + ".modulus", e.what());
        }
        out["modulus"] = m;
        out["scale"] = scale;
        out["epsilon"] = eps;
        double s_ref = number(src, "s_ref", key, 1.0);
        if (!(s_ref > 0.0)) {
            throw ConfigError(key + ".s_ref", "must be positive");
        }
        out["s_ref"] = s_ref;
        break;
    }
    case Experiment::axioms: {
        for (auto [name, def] : {std::pair{"X", "x^2"}, std::pair{"Y", "x"}}) {
            std::string s = string_at(src, name, key, def);
            require_vars(expression(s, join(key, name)), join(key, name), true, true, true);
            out[name] = s;
        }
        double lambda = number(src, "lambda", key, 2.0);
        if (!(lambda >= 0.0)) {
            throw ConfigError(key + ".lambda", "must be nonnegative");
        }
        out["lambda"] = lambda;
        out["c"] = number(src, "c", key, -3.5);
        break;
    }
    case Experiment::cross_check: {
        std::string payoff = string_at(src, "payoff", key);
        require_vars(expression(payoff, key + ".payoff"), key + ".payoff", false, true, false);
        out["payoff"] = payoff;
        auto pts = numbers(src, "points", key, std::vector<double>{-1.0, 0.0, 1.0});
        if (pts.empty()) {
            throw ConfigError(key + ".points", "must not be empty");
        }
        out["points"] = to_json_array(pts);
        auto nx = integer(src, "nx", key, 1601);
        if (nx < 5 || nx % 2 == 0) {
            throw ConfigError(key + ".nx", "must be odd and at least 5 (the coarse grid halves it)");
        }
        out["nx"] = nx;
        if (member(src, "tolerance")) {
            out["tolerance"] = number(src, "tolerance", key);
        }
        break;
    }
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config(const json& j, std::optional<Experiment> forced)
{
    if (!j.is_object()) {
        throw ConfigError("<root>", "expected a JSON object");
    }
    ExperimentConfig cfg;
    if (const json* e = member(j, "experiment")) {
        if (!e->is_string()) {
            throw ConfigError("experiment", "expected a string");
        }
        auto parsed = experiment_from_name(e->get<std::string>());
        if (!parsed) {
            throw ConfigError("experiment", "unknown experiment '" + e->get<std::string>() + "'");
        }
        if (forced && *forced != *parsed) {
            throw ConfigError("experiment", "config declares '" + e->get<std::string>() +
                                                "' but the subcommand is '" +
                                                std::string(experiment_name(*forced)) + "'");
        }
        cfg.experiment = *parsed;
    } else if (forced) {
        cfg.experiment = *forced;
    } else {
        throw ConfigError("experiment", "required string is missing");
    }
    const Experiment ex = cfg.experiment;

    if (ex != Experiment::bihari) {
        const json& band = object_at(j, "band", "", true);
        double lo = number(band, "sigma_lo", "band");
        double hi = number(band, "sigma_hi", "band");
        try {
            cfg.band = VolatilityBand(lo, hi);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("band", e.what());
        }
    }
    const json& grid = object_at(j, "grid", "", true);
    cfg.T = number(grid, "T", "grid");
    auto n_steps = integer(grid, "n_steps", "grid", 64);
    if (!(cfg.T > 0.0)) {
        throw ConfigError("grid.T", "must be positive");
    }
    if (n_steps < 1 || n_steps > (1 << 24)) {
        throw ConfigError("grid.n_steps", "must lie in [1, 2^24]");
    }
    cfg.n_steps = static_cast<int>(n_steps);

    if (const json* sg = member(j, "space_grid")) {
        if (!sg->is_object()) {
            throw ConfigError("space_grid", "expected an object");
        }
        SpaceGridConfig s;
        s.x_min = number(*sg, "x_min", "space_grid");
        s.x_max = number(*sg, "x_max", "space_grid");
        auto nx = integer(*sg, "nx", "space_grid");
        s.safety = number(*sg, "safety", "space_grid", 0.9);
        if (!(s.x_min < s.x_max)) {
            throw ConfigError("space_grid", "requires x_min < x_max");
        }
        if (nx < 3 || nx > (1 << 24)) {
            throw ConfigError("space_grid.nx", "must lie in [3, 2^24]");
        }
        if (!(s.safety > 0.0 && s.safety <= 1.0)) {
            throw ConfigError("space_grid.safety", "must lie in (0, 1]");
        }
        s.nx = static_cast<int>(nx);
        cfg.space_grid = s;
    }

    const json& coeffs = object_at(j, "coefficients", "", needs_coefficients(ex));
    cfg.b = string_at(coeffs, "b", "coefficients", "0");
    cfg.sigma = string_at(coeffs, "sigma", "coefficients", "0");
    cfg.h = string_at(coeffs, "h", "coefficients", "0");
    expression(cfg.b, "coefficients.b");
    expression(cfg.sigma, "coefficients.sigma");
    expression(cfg.h, "coefficients.h");
    if (member(coeffs, "alpha")) {
        cfg.alpha = number(coeffs, "alpha", "coefficients");
    }
    cfg.derivative_bound = number(coeffs, "derivative_bound", "coefficients", 100.0);
    if (!(cfg.derivative_bound > 0.0)) {
        throw ConfigError("coefficients.derivative_bound", "must be positive");
    }
    cfg.x0 = string_at(j, "x0", "", "0");
    require_vars(expression(cfg.x0, "x0"), "x0", false, false, true);
    if (member(j, "x_of_alpha")) {
        cfg.x_of_alpha = string_at(j, "x_of_alpha", "");
        require_vars(expression(*cfg.x_of_alpha, "x_of_alpha"), "x_of_alpha", false, false, true);
    }

    if (needs_mc(ex)) {
        const json& mc = object_at(j, "mc", "", true);
        auto n_paths = unsigned_integer(mc, "n_paths", "mc");
        if (n_paths < 2) {
            throw ConfigError("mc.n_paths", "must be at least 2");
        }
        cfg.n_paths = static_cast<std::size_t>(n_paths);
        cfg.seed = unsigned_integer(mc, "seed", "mc");
        cfg.threads = static_cast<unsigned>(unsigned_integer(mc, "threads", "mc", 0));
    }
    const json& fam = object_at(j, "family", "", false);
    cfg.family.n_levels = static_cast<int>(integer(fam, "n_levels", "family", 2));
    cfg.family.n_switch = static_cast<int>(integer(fam, "n_switch", "family", 0));
    cfg.family.n_random = static_cast<int>(integer(fam, "n_random", "family", 0));
    cfg.family.seed = unsigned_integer(fam, "seed", "family", cfg.seed);
    if (cfg.family.n_levels < 2) {
        throw ConfigError("family.n_levels", "must be at least 2");
    }
    if (cfg.family.n_switch < 0 || cfg.family.n_random < 0) {
        throw ConfigError("family", "n_switch and n_random must be nonnegative");
    }

    cfg.block = parse_block(cfg, j);

    json& e = cfg.echo;
    e["experiment"] = std::string(experiment_name(ex));
    if (ex != Experiment::bihari) {
        e["band"] = {{"sigma_lo", cfg.band.sigma_lo}, {"sigma_hi", cfg.band.sigma_hi}};
    }
    e["grid"] = {{"T", cfg.T}, {"n_steps", cfg.n_steps}};
    if (cfg.space_grid) {
        const auto& s = *cfg.space_grid;
        e["space_grid"] = {{"x_min", s.x_min}, {"x_max", s.x_max}, {"nx", s.nx}, {"safety", s.safety}};
    }
    json c = {{"b", cfg.b}, {"sigma", cfg.sigma}, {"h", cfg.h}};
    if (cfg.alpha) {
        c["alpha"] = *cfg.alpha;
    }
    c["derivative_bound"] = cfg.derivative_bound;
    e["coefficients"] = c;
    e["x0"] = cfg.x0;
    if (cfg.x_of_alpha) {
        e["x_of_alpha"] = *cfg.x_of_alpha;
    }
    e["family"] = {{"n_levels", cfg.family.n_levels},
                   {"n_switch", cfg.family.n_switch},
                   {"n_random", cfg.family.n_random},
                   {"seed", cfg.family.seed}};
    if (needs_mc(ex)) {
        e["mc"] = {{"n_paths", cfg.n_paths}, {"seed", cfg.seed}, {"threads", cfg.threads}};
    }
    e[block_key(ex)] = cfg.block;
    return cfg;
}

ExperimentConfig load_config(const fs::path& path, std::optional<Experiment> forced)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("<file>", "cannot open " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j, forced);
}

//---------------------------------------------------------------------------//
// Running
//---------------------------------------------------------------------------//

bool RunSummary::passed() const
{
    return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

json RunSummary::to_json() const
{
    json j;
    j["config"] = config;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["results"] = results;
    j["csv_files"] = csv_files;
    json a = json::array();
    for (const auto& x : assertions) {
        a.push_back({{"name", x.name}, {"passed", x.passed}, {"detail", x.detail}});
    }
    j["assertions"] = a;
    j["passed"] = passed();
    return j;
}

namespace {

class Csv {
public:
    Csv(const fs::path& path, const std::string& header) : path_(path), out_(path, std::ios::binary)
    {
        if (!out_) {
            throw std::runtime_error("cannot write " + path.string());
        }
        out_ << header << '\n';
    }
    template <class... Ts>
    void row(const Ts&... cells)
    {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }
    std::string path() const { return path_.string(); }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(unsigned long v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "true" : "false"; }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    fs::path path_;
    std::ofstream out_;
};

struct Context {
    const ExperimentConfig& cfg;
    fs::path out_dir;
    RunSummary& summary;
    TimeGrid grid;
    std::vector<VolatilityControl> family;
    double x0;

    Context(const ExperimentConfig& c, fs::path dir, RunSummary& s)
        : cfg(c), out_dir(std::move(dir)), summary(s), grid(c.T, c.n_steps),
          x0(expr::eval(expr::parse(c.x0), 0.0, 0.0, c.alpha.value_or(0.0)))
    {
        if (c.experiment != Experiment::bihari) {
            family = control_family(c.band, grid, c.family);
        }
    }

    Csv csv(const std::string& name, const std::string& header)
    {
        Csv f(out_dir / name, header);
        summary.csv_files.push_back(f.path());
        return f;
    }
    void check(std::string name, bool passed, std::string detail = {})
    {
        summary.assertions.push_back({std::move(name), passed, std::move(detail)});
    }
    CoefficientSet coefficients() const
    {
        return CoefficientSet::parse(cfg.b, cfg.sigma, cfg.h, cfg.alpha);
    }
    double a() const { return cfg.alpha.value_or(0.0); }
};

json nan_safe(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
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

// Samples |b_x|, |sigma_x|, |h_x| on [0, T] x [x0-5, x0+5]; warns above derivative_bound.
void warn_unbounded_derivatives(Context& ctx, const CoefficientSet& coeffs)
{
    const char* names[] = {"b_x", "sigma_x", "h_x"};
    double worst[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i <= 8; ++i) {
        double t = ctx.cfg.T * i / 8.0;
        for (int j = 0; j <= 40; ++j) {
            double x = ctx.x0 - 5.0 + 0.25 * j;
            try {
                CoefficientValues d = coeffs.values(t, x, Partial::x);
                worst[0] = std::max(worst[0], std::fabs(d.b));
                worst[1] = std::max(worst[1], std::fabs(d.sigma));
                worst[2] = std::max(worst[2], std::fabs(d.h));
            } catch (const expr::DomainError&) {
            }
        }
    }
    json warnings = json::array();
    for (int c = 0; c < 3; ++c) {
        if (!(worst[c] <= ctx.cfg.derivative_bound)) {
            std::string msg = std::string("sampled |") + names[c] + "| reaches " + format_double(worst[c]) +
                              " on [x0-5, x0+5], above derivative_bound " +
                              format_double(ctx.cfg.derivative_bound);
            std::fprintf(stderr, "warning: %s\n", msg.c_str());
            warnings.push_back(msg);
        }
    }
    if (!warnings.empty()) {
        ctx.summary.results["warnings"] = warnings;
    }
}

void run_gheat(Context& ctx)
{
    const auto& blk = ctx.cfg.block;
    expr::Expr payoff = expr::parse(blk["payoff"].get<std::string>());
    SpaceGrid sg = ctx.cfg.space_grid
                       ? SpaceGrid(ctx.cfg.space_grid->x_min, ctx.cfg.space_grid->x_max, ctx.cfg.space_grid->nx)
                       : SpaceGrid::around(ctx.x0, ctx.cfg.band, ctx.cfg.T,
                                           static_cast<int>(blk["nx"].get<std::int64_t>()));
    double safety = ctx.cfg.space_grid ? ctx.cfg.space_grid->safety : 0.9;
    HeatSolution sol = solve_gheat(payoff, ctx.cfg.band, sg, ctx.cfg.T, safety);
    auto f = ctx.csv("gheat.csv", "x,u");
    for (int i = 0; i < sg.nx(); ++i) {
        f.row(sg.node(i), sol.u[static_cast<std::size_t>(i)]);
    }
    ctx.summary.results["n_time_steps"] = sol.n_time_steps;
    ctx.summary.results["dt"] = sol.dt;
    bool inside = ctx.x0 >= sg.x_min() && ctx.x0 <= sg.x_max();
    if (inside) {
        ctx.summary.results["u_at_x0"] = evaluate(sol, ctx.x0);
    }
    ctx.check("x0_within_trust_radius", inside && within_trust_radius(sol, ctx.x0));
}

void run_expect(Context& ctx)
{
    const auto& blk = ctx.cfg.block;
    expr::Program payoff(expr::parse(blk["payoff"].get<std::string>()));
    const double T = ctx.cfg.T;
    const double x0 = ctx.x0;
    const double a = ctx.a();
    Functional fn = [&](const GPath& p) { return payoff(T, x0 + p.B.back(), a); };
    auto est = estimate(fn, ctx.family, ctx.grid, ctx.cfg.n_paths, ctx.cfg.seed, ctx.cfg.threads);
    auto f = ctx.csv("expect.csv", "control_id,mean,stderr");
    for (const auto& c : est.per_control) {
        f.row(c.control_id, c.mean, c.std_error);
    }
    auto s = ctx.csv("expect_summary.csv", "value,lower_value");
    s.row(est.value, est.lower_value);
    ctx.summary.results["value"] = est.value;
    ctx.summary.results["lower_value"] = est.lower_value;
    ctx.summary.results["argmax_control"] = est.argmax_control;
    ctx.summary.results["stderr"] = argmax_stderr(est);
    if (blk.contains("expected_value")) {
        double d = std::fabs(est.value - blk["expected_value"].get<double>());
        ctx.check("value_matches", d <= blk["tolerance"].get<double>(), "gap " + format_double(d));
    }
    if (blk.contains("expected_lower")) {
        double d = std::fabs(est.lower_value - blk["expected_lower"].get<double>());
        ctx.check("lower_value_matches", d <= blk["tolerance"].get<double>(), "gap " + format_double(d));
    }
}

void run_sde(Context& ctx)
{
    CoefficientSet coeffs = ctx.coefficients();
    warn_unbounded_derivatives(ctx, coeffs);
    auto index = ctx.cfg.block["path_index"].get<std::uint64_t>();
    DriverPath driver = generate_driver(ctx.grid, ctx.cfg.seed, index);
    auto f = ctx.csv("sde.csv", "control_id,k,t,B,X");
    for (const auto& c : ctx.family) {
        GPath p = realize_path(driver, c, ctx.grid);
        SdePath x = euler_solve(coeffs, ctx.x0, p, ctx.grid);
        for (int k = 0; k <= ctx.grid.n_steps(); ++k) {
            auto kk = static_cast<std::size_t>(k);
            f.row(c.id, k, ctx.grid.time(k), p.B[kk], x.X[kk]);
        }
    }
    const double x0 = ctx.x0;
    const TimeGrid& grid = ctx.grid;
    Functional fn = [&](const GPath& p) {
        thread_local std::vector<double> X;
        euler_solve_into(coeffs, x0, p, grid, X);
        return X.back();
    };
    auto est = estimate(fn, ctx.family, ctx.grid, ctx.cfg.n_paths, ctx.cfg.seed, ctx.cfg.threads);
    auto s = ctx.csv("sde_summary.csv", "value,lower_value");
    s.row(est.value, est.lower_value);
    ctx.summary.results["terminal_value"] = est.value;
    ctx.summary.results["terminal_lower_value"] = est.lower_value;
}

void run_moments(Context& ctx)
{
    const auto& blk = ctx.cfg.block;
    CoefficientSet coeffs = ctx.coefficients();
    warn_unbounded_derivatives(ctx, coeffs);
    auto ps = blk["p"].get<std::vector<double>>();
    auto est = moment_estimates(coeffs, ctx.x0, ps, ctx.family, ctx.grid, ctx.cfg.n_paths,
                                ctx.cfg.seed, ctx.cfg.threads);
    auto f = ctx.csv("moments.csv", "p,value");
    bool finite = true;
    json vals = json::array();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        f.row(ps[i], est[i].value);
        finite = finite && std::isfinite(est[i].value);
        vals.push_back(nan_safe(est[i].value));
    }
    ctx.summary.results["moments"] = vals;
    ctx.check("moments_finite", finite);
    auto offs = blk["lipschitz_offsets"].get<std::vector<double>>();
    if (!offs.empty()) {
        double lp = blk["lipschitz_p"].get<double>();
        auto ratios = lipschitz_moment_ratios(coeffs, ctx.x0, offs, lp, ctx.family, ctx.grid,
                                              ctx.cfg.n_paths, ctx.cfg.seed, ctx.cfg.threads);
        auto g = ctx.csv("lipschitz.csv", "offset,ratio");
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (std::size_t i = 0; i < offs.size(); ++i) {
            g.row(offs[i], ratios[i]);
            lo = std::min(lo, ratios[i]);
            hi = std::max(hi, ratios[i]);
        }
        double spread = hi / lo;
        ctx.summary.results["lipschitz_ratio_spread"] = nan_safe(spread);
        ctx.check("lipschitz_ratio_within_factor_2", spread < 2.0, "max/min " + format_double(spread));
    }
}

void run_sensitivity(Context& ctx)
{
    const auto& blk = ctx.cfg.block;
    CoefficientSet coeffs = ctx.coefficients();
    warn_unbounded_derivatives(ctx, coeffs);
    SensitivitySetup setup;
    setup.x0 = ctx.x0;
    if (blk["variable"] == "alpha") {
        setup.variable = SensitivitySetup::Variable::alpha;
        setup.x_of_alpha = expr::parse(*ctx.cfg.x_of_alpha);
    }
    auto ladder = blk["h_ladder"].get<std::vector<double>>();
    double p = blk["p"].get<double>();
    int order = static_cast<int>(blk["order"].get<std::int64_t>());
    ConvergenceReport rep = convergence_study(coeffs, setup, ladder, p, ctx.family, ctx.grid,
                                              ctx.cfg.n_paths, ctx.cfg.seed, order, ctx.cfg.threads);
    auto f = ctx.csv("sensitivity.csv", "h,error,p");
    json errs = json::array();
    for (const auto& pt : rep.ladder) {
        f.row(pt.h, pt.error, p);
        errs.push_back(pt.error);
    }
    auto s = ctx.csv("sensitivity_summary.csv", "fitted_slope,n_fitted");
    s.row(rep.fitted_slope, static_cast<unsigned long>(rep.n_fitted()));
    ctx.summary.results["errors"] = errs;
    ctx.summary.results["fitted_slope"] = nan_safe(rep.fitted_slope);
    if (blk.contains("min_slope")) {
        double m = blk["min_slope"].get<double>();
        ctx.check("fitted_slope_at_least", rep.slope_defined() && rep.fitted_slope >= m,
                  "slope " + format_double(rep.fitted_slope));
    }
    if (blk["require_decreasing"].get<bool>()) {
        ctx.check("errors_strictly_decreasing", rep.strictly_decreasing());
    }
}

void run_stability(Context& ctx)
{
    const auto& blk = ctx.cfg.block;
    auto rates = blk["rates"].get<std::vector<double>>();
    StabilityReport rep;
    if (blk.contains("example")) {
        ModulusExample ex = modulus_example(blk["example"].get<std::string>(), blk["epsilon"].get<double>());
        PerturbationProblem problem{ex.base, ex.perturbation, rates, {}, ctx.x0};
        if (blk.contains("x0_n")) {
            problem.x0_n = blk["x0_n"].get<std::vector<double>>();
        }
        rep = perturbation_study(problem, ctx.family, ctx.grid, ctx.cfg.n_paths, ctx.cfg.seed,
                                 ctx.cfg.threads);
    } else {
        const auto& pert = blk["perturbations"];
        CoefficientSequence seq{ctx.coefficients(),
                                expr::parse(pert["b"].get<std::string>()),
                                expr::parse(pert["sigma"].get<std::string>()),
                                expr::parse(pert["h"].get<std::string>()),
                                rates,
                                {},
                                ctx.x0};
        if (blk.contains("x0_n")) {
            seq.x0_n = blk["x0_n"].get<std::vector<double>>();
        }
        rep = stability_study(seq, ctx.family, ctx.grid, ctx.cfg.n_paths, ctx.cfg.seed, ctx.cfg.threads);
    }
    auto f = ctx.csv("stability.csv", "c_n,error_n");
    json errs = json::array();
    for (const auto& pt : rep.ladder.ladder) {
        f.row(pt.h, pt.error);
        errs.push_back(pt.error);
    }
    auto s = ctx.csv("stability_summary.csv", "slope,gronwall_constant");
    s.row(rep.ladder.fitted_slope, rep.gronwall_constant);
    auto hyp = ctx.csv("hypothesis.csv", "c_n,gap_b,gap_sigma,gap_h");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        hyp.row(rates[i], rep.hypothesis[i].b, rep.hypothesis[i].sigma, rep.hypothesis[i].h);
    }
    auto env = ctx.csv("envelope.csv", "c_n,t,measured,stderr,bound,within");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        for (const auto& pt : rep.envelope[i]) {
            env.row(rates[i], pt.t, pt.measured, pt.std_error, pt.bound, pt.within);
        }
    }
    ctx.summary.results["errors"] = errs;
    ctx.summary.results["slope"] = nan_safe(rep.ladder.fitted_slope);
    ctx.summary.results["gronwall_constant"] = rep.gronwall_constant;
    ctx.check("gronwall_envelope", rep.envelope_ok);
    ctx.check("hypothesis_gap_vanishing", rep.hypothesis_vanishing);
    if (blk.contains("slope_range")) {
        auto r = blk["slope_range"].get<std::vector<double>>();
        double sl = rep.ladder.fitted_slope;
        ctx.check("slope_in_range", rep.ladder.slope_defined() && sl >= r[0] && sl <= r[1],
                  "slope " + format_double(sl));
    }
    if (blk["require_decreasing"].get<bool>()) {
        ctx.check("errors_strictly_decreasing", rep.ladder.strictly_decreasing());
    }
}

void run_bihari(Context& ctx)
{
    const auto& blk = ctx.cfg.block;
    expr::Program v(expr::parse(blk["v"].get<std::string>()));
    std::vector<double> vs;
    for (int k = 0; k <= ctx.grid.n_steps(); ++k) {
        vs.push_back(v(ctx.grid.time(k), 0.0, 0.0));
    }
    ModulusSpec H = ModulusSpec::from_name(blk["modulus"].get<std::string>(), blk["scale"].get<double>(),
                                           blk["epsilon"].get<double>());
    BoundFunction bound = bihari_bound(blk["u0"].get<double>(), vs, ctx.grid, H, blk["s_ref"].get<double>());
    auto f = ctx.csv("bihari.csv", "t,bound");
    for (std::size_t k = 0; k < bound.t.size(); ++k) {
        f.row(bound.t[k], bound.value[k]);
    }
    ctx.summary.results["final_bound"] = nan_safe(bound.value.back());
}

void run_axioms(Context& ctx)
{
    const auto& blk = ctx.cfg.block;
    expr::Program X(expr::parse(blk["X"].get<std::string>()));
    expr::Program Y(expr::parse(blk["Y"].get<std::string>()));
    const double T = ctx.cfg.T;
    const double x0 = ctx.x0;
    const double a = ctx.a();
    Functional fx = [&](const GPath& p) { return X(T, x0 + p.B.back(), a); };
    Functional fy = [&](const GPath& p) { return Y(T, x0 + p.B.back(), a); };
    AxiomReport rep = axiom_report(ctx.family, ctx.grid, ctx.cfg.n_paths, ctx.cfg.seed, fx, fy,
                                   blk["lambda"].get<double>(), blk["c"].get<double>(), ctx.cfg.threads);
    auto f = ctx.csv("axioms.csv", "property,passed");
    f.row("dominated", rep.dominated);
    f.row("monotonicity", rep.monotonicity);
    f.row("constant_preserving", rep.constant_preserving);
    f.row("self_dominated", rep.self_dominated);
    f.row("positive_homogeneity", rep.positive_homogeneity);
    ctx.summary.results["estimate_x"] = rep.x.value;
    ctx.summary.results["estimate_y"] = rep.y.value;
    ctx.summary.results["estimate_x_minus_y"] = rep.x_minus_y.value;
    ctx.summary.results["estimate_scaled_x"] = rep.scaled_x.value;
    ctx.summary.results["estimate_constant"] = rep.constant.value;
    ctx.check("monotonicity", rep.monotonicity, rep.dominated ? "" : "X >= Y did not hold pathwise (vacuous)");
    ctx.check("constant_preserving", rep.constant_preserving);
    ctx.check("self_dominated", rep.self_dominated);
    ctx.check("positive_homogeneity", rep.positive_homogeneity);
}

void run_cross_check(Context& ctx)
{
    const auto& blk = ctx.cfg.block;
    expr::Expr payoff = expr::parse(blk["payoff"].get<std::string>());
    auto pts = blk["points"].get<std::vector<double>>();
    const auto nx = static_cast<int>(blk["nx"].get<std::int64_t>());
    const double T = ctx.cfg.T;
    const double half = 8.0 * ctx.cfg.band.sigma_hi * std::sqrt(T);
    double safety = 0.9;
    double lo = *std::min_element(pts.begin(), pts.end()) - half;
    double hi = *std::max_element(pts.begin(), pts.end()) + half;
    if (ctx.cfg.space_grid) {
        lo = ctx.cfg.space_grid->x_min;
        hi = ctx.cfg.space_grid->x_max;
        safety = ctx.cfg.space_grid->safety;
    }
    int nx_fine = ctx.cfg.space_grid ? ctx.cfg.space_grid->nx : nx;
    if (nx_fine % 2 == 0) {
        throw std::invalid_argument("cross-check needs an odd nx to halve the space grid");
    }
    HeatSolution fine = solve_gheat(payoff, ctx.cfg.band, SpaceGrid(lo, hi, nx_fine), T, safety);
    HeatSolution coarse = solve_gheat(payoff, ctx.cfg.band, SpaceGrid(lo, hi, (nx_fine - 1) / 2 + 1), T, safety);

    expr::Program phi(payoff);
    const std::size_t m = pts.size();
    VectorFunctional vf = [&](const GPath& p, std::span<double> out) {
        for (std::size_t i = 0; i < m; ++i) {
            out[i] = phi(0.0, pts[i] + p.B.back(), 0.0);
        }
    };
    auto est = estimate_many(vf, m, ctx.family, ctx.grid, ctx.cfg.n_paths, ctx.cfg.seed, ctx.cfg.threads);
    auto f = ctx.csv("cross_check.csv", "x,u_pde,u_pde_coarse,mc_value,stderr,gap,threshold,passed");
    json gaps = json::array();
    for (std::size_t i = 0; i < m; ++i) {
        double x = pts[i];
        bool trusted = within_trust_radius(fine, x);
        double u = x >= lo && x <= hi ? evaluate(fine, x) : std::numeric_limits<double>::quiet_NaN();
        double uc = x >= lo && x <= hi ? evaluate(coarse, x) : std::numeric_limits<double>::quiet_NaN();
        double se = argmax_stderr(est[i]);
        double gap = std::fabs(u - est[i].value);
        double threshold = blk.contains("tolerance") ? blk["tolerance"].get<double>()
                                                     : std::fabs(u - uc) + 3.0 * se;
        bool ok = trusted && gap <= threshold;
        f.row(x, u, uc, est[i].value, se, gap, threshold, ok);
        gaps.push_back(nan_safe(gap));
        ctx.check("gap_at_x=" + format_double(x), ok,
                  trusted ? "gap " + format_double(gap) + " threshold " + format_double(threshold)
                          : "point outside the trust radius");
    }
    ctx.summary.results["gaps"] = gaps;
}

RunSummary execute(const ExperimentConfig& config, const fs::path& out_dir, Experiment which)
{
    auto start = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);
    RunSummary summary;
    summary.config = config.echo;
    Context ctx(config, out_dir, summary);
    try {
        switch (which) {
        case Experiment::gheat: run_gheat(ctx); break;
        case Experiment::expect: run_expect(ctx); break;
        case Experiment::sde: run_sde(ctx); break;
        case Experiment::moments: run_moments(ctx); break;
        case Experiment::sensitivity: run_sensitivity(ctx); break;
        case Experiment::stability: run_stability(ctx); break;
        case Experiment::bihari: run_bihari(ctx); break;
        case Experiment::axioms: run_axioms(ctx); break;
        case Experiment::cross_check: run_cross_check(ctx); break;
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string(experiment_name(which)) + ": " + e.what());
    }
    summary.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream js(out_dir / "summary.json", std::ios::binary);
    js << summary.to_json().dump(2) << '\n';
    return summary;
}

}  // namespace

RunSummary run(const ExperimentConfig& config, const fs::path& out_dir)
{
    return execute(config, out_dir, config.experiment);
}

RunSummary cross_check(const ExperimentConfig& config, const fs::path& out_dir)
{
    if (config.experiment != Experiment::cross_check) {
        throw ConfigError("experiment", "cross_check() needs a cross-check config");
    }
    return execute(config, out_dir, Experiment::cross_check);
}

}  // namespace gcalc
