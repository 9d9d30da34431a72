#pragma once

// Scenario and sweep configuration files (JSON, schema_version 1).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hhw/analysis.hpp"
#include "hhw/error.hpp"
#include "hhw/integrators.hpp"
#include "hhw/model.hpp"
#include "hhw/sampling.hpp"

namespace hhw::io {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

enum class Output { trajectory_csv, gaps_csv, report_json, plot_svg };

inline const char* to_string(Output o) {
    switch (o) {
    case Output::trajectory_csv: return "trajectory_csv";
    case Output::gaps_csv: return "gaps_csv";
    case Output::report_json: return "report_json";
    case Output::plot_svg: return "plot_svg";
    }
    return "unknown";
}

struct RandomInitial {
    std::uint64_t seed = 0;
    double radius = 1.0;
};

struct ScenarioConfig {
    ModelKind model = ModelKind::classical;
    MemristiveParams params; // params.base is the classical part
    std::optional<double> P_relative;
    std::optional<double> gamma_uniform;
    std::optional<NetworkState> initial;
    std::optional<RandomInitial> random_initial;
    IntegratorSpec integrator;
    std::vector<Output> outputs;
    std::filesystem::path output_dir = "hhw_out";

    bool memristive() const noexcept { return model == ModelKind::memristive; }
    const ModelParams& base() const noexcept { return params.base; }
    std::size_t neurons() const noexcept { return static_cast<std::size_t>(params.base.n); }

    bool wants(Output o) const {
        for (Output x : outputs)
            if (x == o)
                return true;
        return false;
    }

    // Coupling threshold the relative coupling refers to.
    double threshold() const {
        return memristive() ? fractional_bounds(params).P_star_frac : threshold_P_star(params.base);
    }

    // Recomputes derived fields (P from P_relative, uniform gamma for n) and validates.
    void finalize() {
        if (gamma_uniform)
            params.gamma.assign(neurons(), *gamma_uniform);
        if (memristive())
            params.validate();
        else
            params.base.validate();
        if (P_relative) {
            if (!(*P_relative >= 0.0))
                throw config_error("P_relative", "must be nonnegative");
            params.base.P = *P_relative * threshold();
        }
        integrator.validate();
        const bool caputo = integrator.kind == IntegratorKind::caputo_pc;
        if (caputo != memristive())
            throw config_error("integrator.kind", std::string(to_string(integrator.kind)) + " does not fit the " +
                                                      to_string(model) + " model");
        if (initial) {
            if (initial->neurons() != neurons())
                throw config_error("initial", "V and R need exactly n entries");
            if (initial->memristive() != memristive())
                throw config_error("initial.rho", memristive() ? "required for the memristive model"
                                                               : "only allowed for the memristive model");
        }
        if (initial.has_value() == random_initial.has_value())
            throw config_error("initial", "give exactly one of an explicit state or a random specification");
    }

    NetworkState initial_state(std::optional<std::uint64_t> seed = std::nullopt) const {
        if (initial)
            return *initial;
        return random_state(neurons(), memristive(), random_initial->radius, seed.value_or(random_initial->seed));
    }
};

enum class SweepVariable { P, alpha, n };

inline const char* to_string(SweepVariable v) {
    switch (v) {
    case SweepVariable::P: return "P";
    case SweepVariable::alpha: return "alpha";
    case SweepVariable::n: return "n";
    }
    return "unknown";
}

struct SweepConfig {
    ScenarioConfig base;
    SweepVariable variable = SweepVariable::P;
    std::vector<double> values;
    bool relative = false; // P values are multiples of the threshold
    int replicates = 1;
    std::uint64_t seed = 0;
    double sync_threshold = 1e-10;
    bool plot = true;
    std::filesystem::path output_dir = "hhw_sweep";

    ScenarioConfig scenario(double value) const {
        ScenarioConfig c = base;
        switch (variable) {
        case SweepVariable::P:
            if (relative) {
                c.P_relative = value;
            } else {
                c.P_relative.reset();
                c.params.base.P = value;
            }
            break;
        case SweepVariable::alpha: c.params.alpha = value; break;
        case SweepVariable::n: c.params.base.n = static_cast<int>(value); break;
        }
        c.finalize();
        return c;
    }

    void validate() const {
        if (values.empty())
            throw config_error("values", "must not be empty");
        if (replicates < 1)
            throw config_error("replicates", "must be at least 1");
        if (!base.random_initial)
            throw config_error("base.initial", "sweeps need a random initial specification");
        if (variable == SweepVariable::alpha && !base.memristive())
            throw config_error("sweep_variable", "alpha sweeps need the memristive model");
        if (relative && variable != SweepVariable::P)
            throw config_error("relative", "only applies to P sweeps");
        if (variable == SweepVariable::n) {
            for (double v : values)
                if (v != static_cast<double>(static_cast<int>(v)) || v < 2)
                    throw config_error("values", "n values must be integers >= 2");
            if (base.memristive() && !base.gamma_uniform)
                throw config_error("base.params.gamma", "n sweeps need a scalar gamma");
        }
        for (double v : values)
            (void)scenario(v);
    }
};

namespace detail {

// Tracks which keys of a JSON object were read so that leftovers can be rejected.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object())
            throw config_error(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& at(const std::string& key) {
        if (!j_.contains(key))
            throw config_error(field(key), "missing required field");
        seen_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number())
            throw config_error(field(key), "expected a number");
        return v.get<double>();
    }

    void number(const std::string& key, double& out) {
        if (has(key))
            out = number(key);
    }

    std::optional<double> optional_number(const std::string& key) {
        if (!has(key))
            return std::nullopt;
        return number(key);
    }

    std::int64_t integer(const std::string& key) {
        const json& v = at(key);
        if (!v.is_number_integer())
            throw config_error(field(key), "expected an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const std::string& key) {
        const json& v = at(key);
        if (v.is_number_unsigned())
            return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        throw config_error(field(key), "expected a nonnegative integer");
    }

    std::string string(const std::string& key) {
        const json& v = at(key);
        if (!v.is_string())
            throw config_error(field(key), "expected a string");
        return v.get<std::string>();
    }

    bool boolean(const std::string& key) {
        const json& v = at(key);
        if (!v.is_boolean())
            throw config_error(field(key), "expected true or false");
        return v.get<bool>();
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = at(key);
        if (!v.is_array())
            throw config_error(field(key), "expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number())
                throw config_error(field(key), "expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key))
                throw config_error(field(key), "unknown field");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void check_schema_version(ObjectReader& r) {
    const auto v = r.integer("schema_version");
    if (v != schema_version)
        throw config_error("schema_version", "unsupported version " + std::to_string(v) + " (expected " +
                                                 std::to_string(schema_version) + ")");
}

inline void parse_params(ScenarioConfig& c, const json& j) {
    ObjectReader r(j, "params");
    bool preset = false;
    if (r.has("preset")) {
        const auto name = r.string("preset");
        if (name != "wilson")
            throw config_error("params.preset", "unknown preset '" + name + "'");
        preset = true;
    }
    ModelParams& p = c.params.base;
    if (preset) {
        c.params = memristive_wilson_preset();
        c.gamma_uniform = 0.1;
        if (r.has("n"))
            p.n = static_cast<int>(r.integer("n"));
        for (auto [key, ref] : {std::pair<const char*, double*>{"a0", &p.a0}, {"a1", &p.a1}, {"a2", &p.a2},
                                {"g_K", &p.g_K}, {"E_Na", &p.E_Na}, {"E_K", &p.E_K}, {"H", &p.H},
                                {"lambda", &p.lambda}, {"tau_K", &p.tau_K}})
            r.number(key, *ref);
    } else {
        p.n = static_cast<int>(r.integer("n"));
        for (auto [key, ref] : {std::pair<const char*, double*>{"a0", &p.a0}, {"a1", &p.a1}, {"a2", &p.a2},
                                {"g_K", &p.g_K}, {"E_Na", &p.E_Na}, {"E_K", &p.E_K}, {"H", &p.H},
                                {"lambda", &p.lambda}, {"tau_K", &p.tau_K}})
            *ref = r.number(key);
    }
    r.number("J", p.J);
    if (r.has("P") && r.has("P_relative"))
        throw config_error("params.P", "give either P or P_relative, not both");
    r.number("P", p.P);
    c.P_relative = r.optional_number("P_relative");

    if (c.memristive()) {
        c.params.alpha = r.number("alpha");
        auto read = [&](const char* key, double& out) {
            if (preset)
                r.number(key, out);
            else
                out = r.number(key);
        };
        read("k", c.params.k);
        read("beta", c.params.beta);
        read("b", c.params.b);
        if (r.has("gamma") || !preset) {
            const json& g = r.at("gamma");
            if (g.is_number()) {
                c.gamma_uniform = g.get<double>();
            } else {
                c.gamma_uniform.reset();
                c.params.gamma = r.numbers("gamma");
            }
        }
    }
    r.finish();
}

inline void parse_initial(ScenarioConfig& c, const json& j) {
    ObjectReader r(j, "initial");
    if (r.has("random")) {
        ObjectReader q(r.at("random"), "initial.random");
        RandomInitial ri;
        ri.seed = q.unsigned_integer("seed");
        ri.radius = q.number("radius");
        if (!(ri.radius >= 0.0))
            throw config_error("initial.random.radius", "must be nonnegative");
        q.finish();
        c.random_initial = ri;
    }
    if (r.has("V") || r.has("R") || r.has("rho")) {
        if (c.random_initial)
            throw config_error("initial", "give exactly one of an explicit state or a random specification");
        auto V = r.numbers("V");
        auto R = r.numbers("R");
        if (V.size() != R.size())
            throw config_error("initial.R", "must have as many entries as initial.V");
        std::optional<double> rho;
        if (r.has("rho"))
            rho = r.number("rho");
        c.initial = NetworkState(std::move(V), std::move(R), rho);
    }
    r.finish();
}

inline void parse_integrator(ScenarioConfig& c, const json* j) {
    IntegratorSpec& s = c.integrator;
    if (c.memristive()) {
        s.kind = IntegratorKind::caputo_pc;
        s.dt = 0.005;
        s.t_end = 50.0;
    } else {
        s.kind = IntegratorKind::classical_adaptive;
        s.dt = 0.01;
        s.t_end = 200.0;
    }
    if (!j)
        return;
    ObjectReader r(*j, "integrator");
    if (r.has("kind")) {
        const auto k = r.string("kind");
        if (k == "classical_fixed")
            s.kind = IntegratorKind::classical_fixed;
        else if (k == "classical_adaptive")
            s.kind = IntegratorKind::classical_adaptive;
        else if (k == "caputo_pc")
            s.kind = IntegratorKind::caputo_pc;
        else
            throw config_error("integrator.kind", "unknown integrator '" + k + "'");
    }
    r.number("dt", s.dt);
    r.number("t_end", s.t_end);
    if (r.has("record_stride"))
        s.record_stride = static_cast<int>(r.integer("record_stride"));
    r.number("abs_tol", s.abs_tol);
    r.number("rel_tol", s.rel_tol);
    r.number("min_step", s.min_step);
    if (r.has("max_steps"))
        s.max_steps = r.unsigned_integer("max_steps");
    if (r.has("corrector")) {
        const auto m = r.string("corrector");
        if (m == "newton")
            s.corrector = CorrectorMode::newton;
        else if (m == "pece")
            s.corrector = CorrectorMode::pece;
        else
            throw config_error("integrator.corrector", "expected 'newton' or 'pece'");
    }
    if (r.has("corrector_sweeps"))
        s.corrector_sweeps = static_cast<int>(r.integer("corrector_sweeps"));
    if (r.has("newton_max_iterations"))
        s.newton_max_iterations = static_cast<int>(r.integer("newton_max_iterations"));
    r.number("newton_tolerance", s.newton_tolerance);
    if (r.has("memory_window"))
        s.memory_window = r.unsigned_integer("memory_window");
    if (r.has("max_history_bytes"))
        s.max_history_bytes = r.unsigned_integer("max_history_bytes");
    r.finish();
}

inline std::vector<Output> parse_outputs(const json& j) {
    if (!j.is_array())
        throw config_error("outputs", "expected an array of output names");
    std::vector<Output> out;
    for (const auto& v : j) {
        const auto name = v.is_string() ? v.get<std::string>() : std::string{};
        Output o;
        if (name == "trajectory_csv")
            o = Output::trajectory_csv;
        else if (name == "gaps_csv")
            o = Output::gaps_csv;
        else if (name == "report_json")
            o = Output::report_json;
        else if (name == "plot_svg")
            o = Output::plot_svg;
        else
            throw config_error("outputs", "unknown output '" + v.dump() + "'");
        out.push_back(o);
    }
    return out;
}

// Parses a scenario object. The schema version is checked by the caller for nested objects.
inline ScenarioConfig parse_scenario_object(const json& j, bool top_level) {
    ObjectReader r(j, "");
    if (top_level)
        check_schema_version(r);
    ScenarioConfig c;
    const auto model = r.string("model");
    if (model == "classical")
        c.model = ModelKind::classical;
    else if (model == "memristive")
        c.model = ModelKind::memristive;
    else
        throw config_error("model", "expected 'classical' or 'memristive'");
    parse_params(c, r.at("params"));
    parse_initial(c, r.at("initial"));
    parse_integrator(c, r.has("integrator") ? &r.at("integrator") : nullptr);
    c.outputs = r.has("outputs") ? parse_outputs(r.at("outputs"))
                                 : std::vector<Output>{Output::trajectory_csv, Output::gaps_csv, Output::report_json};
    if (r.has("output_dir"))
        c.output_dir = r.string("output_dir");
    r.finish();
    c.finalize();
    return c;
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw config_error("", "cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error("", path.string() + " is not valid JSON: " + e.what());
    }
}

} // namespace detail

inline ScenarioConfig parse_scenario(const json& j) { return detail::parse_scenario_object(j, true); }

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
    return parse_scenario(detail::read_json_file(path));
}

inline SweepConfig parse_sweep(const json& j) {
    detail::ObjectReader r(j, "");
    detail::check_schema_version(r);
    SweepConfig s;
    try {
        s.base = detail::parse_scenario_object(r.at("base"), false);
    } catch (const config_error& e) {
        throw config_error(e.field().empty() ? "base" : "base." + e.field(), e.reason());
    }
    const auto var = r.string("sweep_variable");
    if (var == "P")
        s.variable = SweepVariable::P;
    else if (var == "alpha")
        s.variable = SweepVariable::alpha;
    else if (var == "n")
        s.variable = SweepVariable::n;
    else
        throw config_error("sweep_variable", "expected 'P', 'alpha' or 'n'");
    s.values = r.numbers("values");
    if (r.has("relative"))
        s.relative = r.boolean("relative");
    s.replicates = static_cast<int>(r.integer("replicates"));
    s.seed = r.unsigned_integer("seed");
    if (r.has("sync_threshold"))
        s.sync_threshold = r.number("sync_threshold");
    if (r.has("plot"))
        s.plot = r.boolean("plot");
    s.output_dir = r.has("output_dir") ? std::filesystem::path(r.string("output_dir")) : s.base.output_dir;
    r.finish();
    s.validate();
    return s;
}

inline SweepConfig load_sweep(const std::filesystem::path& path) { return parse_sweep(detail::read_json_file(path)); }

} // namespace hhw::io
