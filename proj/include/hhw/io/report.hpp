#pragma once

// JSON reports: constants with their formulas, check outcomes, verdicts.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hhw/analysis.hpp"
#include "hhw/io/config.hpp"

namespace hhw::io {

namespace formula {
inline constexpr const char* Q =
    "g_K (1 + H) + |a1 E_Na| + g_K |lambda| H |E_K| + 6 a1^2 / a2 + 6 a2 / E_Na^2 + 6 (g_K lambda H)^2 / a2";
inline constexpr const char* P_star = "max(0, (Q - a0 - lambda^2 H^2 / (2 tau_K)) / n)";
inline constexpr const char* mu = "min(1 / (2 tau_K), a0 + lambda^2 H^2 / (2 tau_K) + n P - Q)";
inline constexpr const char* G =
    "1 + n H^2 + n [ (|E_Na| a0 + g_K sqrt(1 + H^2) |E_K| + |J|)^2 / a0^2 + (|E_Na a1| + g_K sqrt(1 + H^2))^2 / "
    "(a0 a2) + 2 (a1 + E_Na a2)^4 / (a0 (a2 / 2)^3) ]";
inline constexpr const char* M_R0 =
    "sum_i [ (|E_Na| a0 + g_K sqrt(R_i(0)^2 + H^2) |E_K| + |J|)^2 / a0 + (|E_Na a1| + g_K sqrt(R_i(0)^2 + H^2))^2 "
    "/ a2 + 2 (a1 + E_Na a2)^4 / (a2 / 2)^3 ]";
inline constexpr const char* T_B = "max(1 / a0, tau_K) ln+(||y0||^2 / G)";
inline constexpr const char* T_0 = "2 tau_K ln+(max_i |R_i(0)|)";
inline constexpr const char* transient =
    "sum_i V_i(0)^2 e^(-a0 t) + R_i(0)^2 e^(-t / tau_K) + M(R0) / a0 + n H^2";
inline constexpr const char* G_alpha =
    "1 + n H^2 + n [ Gamma(alpha) (|E_Na| c + g_K sqrt(1 + H^2) |E_K| + |J|)^2 / c^2 + Gamma(alpha) / c ( (|E_Na "
    "a1| + g_K sqrt(1 + H^2))^2 / a2 + 2 (a1 + E_Na a2)^4 / (a2 / 2)^3 ) ], c = a0 - k / beta";
inline constexpr const char* P_star_frac = "max(0, (Q + k / (2 beta) - a0 - lambda^2 H^2 / (2 tau_K)) / n)";
inline constexpr const char* delta = "min(1 / (2 tau_K), a0 + lambda^2 H^2 / (2 tau_K) + n P - Q - k / (2 beta))";
inline constexpr const char* mu_alpha = "Gamma(1 + alpha) / (Gamma(1 + alpha) + 2 delta t^alpha)";
inline constexpr const char* rho_bound = "1 + G_alpha max_i gamma_i^2 Gamma(alpha) / b^2";
inline constexpr const char* M_star_R0 = "M(R0) with a0 replaced by c = a0 - k / beta";
} // namespace formula

namespace detail {

inline json constant(double value, const char* f) { return json{{"value", value}, {"formula", f}}; }

inline json optional_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace detail

inline json params_json(const ScenarioConfig& c) {
    const ModelParams& p = c.base();
    json j{{"n", p.n},         {"a0", p.a0},   {"a1", p.a1},         {"a2", p.a2},   {"g_K", p.g_K},
           {"E_Na", p.E_Na},   {"E_K", p.E_K}, {"H", p.H},           {"lambda", p.lambda},
           {"tau_K", p.tau_K}, {"J", p.J},     {"P", p.P}};
    if (c.P_relative)
        j["P_relative"] = *c.P_relative;
    if (c.memristive()) {
        j["alpha"] = c.params.alpha;
        j["k"] = c.params.k;
        j["beta"] = c.params.beta;
        j["b"] = c.params.b;
        j["gamma"] = c.params.gamma;
    }
    return j;
}

inline json integrator_json(const IntegratorSpec& s) {
    json j{{"kind", to_string(s.kind)}, {"dt", s.dt}, {"t_end", s.t_end}, {"record_stride", s.record_stride}};
    if (s.kind == IntegratorKind::classical_adaptive) {
        j["abs_tol"] = s.abs_tol;
        j["rel_tol"] = s.rel_tol;
    }
    if (s.kind == IntegratorKind::caputo_pc) {
        j["corrector"] = to_string(s.corrector);
        if (s.corrector == CorrectorMode::pece)
            j["corrector_sweeps"] = s.corrector_sweeps;
        j["memory_window"] = s.memory_window;
    }
    return j;
}

inline json initial_json(const ScenarioConfig& c, std::optional<std::uint64_t> seed) {
    if (c.initial)
        return json{{"kind", "explicit"}};
    return json{{"kind", "random"}, {"seed", seed.value_or(c.random_initial->seed)}, {"radius", c.random_initial->radius}};
}

// Constants that apply to the configured model; y0 adds the initial-data dependent ones.
inline json bounds_json(const ScenarioConfig& c, const NetworkState* y0) {
    json b;
    if (!c.memristive()) {
        const auto cb = classical_bounds(c.base(), y0);
        b["Q"] = detail::constant(cb.Q, formula::Q);
        b["P_star"] = detail::constant(cb.P_star, formula::P_star);
        b["mu"] = detail::constant(cb.mu, formula::mu);
        b["G"] = detail::constant(cb.G, formula::G);
        if (cb.M_R0)
            b["M_R0"] = detail::constant(*cb.M_R0, formula::M_R0);
        if (cb.T_B)
            b["T_B"] = detail::constant(*cb.T_B, formula::T_B);
        if (cb.T_0)
            b["T_0"] = detail::constant(*cb.T_0, formula::T_0);
        b["sync_guaranteed"] = c.base().P > cb.P_star;
    } else {
        const auto fb = fractional_bounds(c.params, y0);
        b["Q"] = detail::constant(fb.Q, formula::Q);
        b["G_alpha"] = detail::constant(fb.G_alpha, formula::G_alpha);
        b["P_star_frac"] = detail::constant(fb.P_star_frac, formula::P_star_frac);
        b["delta"] = detail::constant(fb.delta, formula::delta);
        b["rho_bound"] = detail::constant(fb.rho_bound, formula::rho_bound);
        b["mu_alpha_formula"] = formula::mu_alpha;
        if (fb.M_star_R0)
            b["M_star_R0"] = detail::constant(*fb.M_star_R0, formula::M_star_R0);
        if (fb.T_0)
            b["T_0"] = detail::constant(*fb.T_0, formula::T_0);
        b["sync_guaranteed"] = fb.delta > 0.0;
    }
    return b;
}

inline json check_json(const CheckResult& r) {
    json j{{"name", r.name},
           {"pass", r.pass},
           {"measured", detail::optional_number(r.measured)},
           {"bound", detail::optional_number(r.bound)},
           {"margin", detail::optional_number(r.margin)},
           {"at_time", detail::optional_number(r.at_time)}};
    if (!r.detail.empty())
        j["detail"] = r.detail;
    return j;
}

inline json report_header(const char* command, const ScenarioConfig& c) {
    return json{{"schema_version", schema_version},
                {"command", command},
                {"model", to_string(c.model)},
                {"neurons", c.neurons()},
                {"params", params_json(c)}};
}

} // namespace hhw::io
