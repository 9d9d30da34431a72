#pragma once

// Closed-form constants, thresholds and rates of the HHW network and its
// fractional memristive extension, plus trajectory-level checks of the
// dissipativity and synchronization guarantees they imply.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hhw/error.hpp"
#include "hhw/integrators.hpp"
#include "hhw/model.hpp"
#include "hhw/parallel.hpp"
#include "hhw/sampling.hpp"
#include "hhw/special_functions.hpp"

namespace hhw {

namespace detail {

inline double log_plus(double x) { return x > 1.0 ? std::log(x) : 0.0; }

// a0 + lambda^2 H^2 / (2 tau_K): the dissipation available before coupling.
inline double intrinsic_dissipation(const ModelParams& p) {
    return p.a0 + p.lambda * p.lambda * p.H * p.H / (2.0 * p.tau_K);
}

inline void require_quadratic_domain(const ModelParams& p, const char* who) {
    if (!(p.a2 > 0.0))
        throw domain_error(std::string(who) + ": a2 must be positive");
    if (p.E_Na == 0.0)
        throw domain_error(std::string(who) + ": E_Na must be nonzero");
}

inline double quartic_term(const ModelParams& p) {
    const double c = p.a1 + p.E_Na * p.a2;
    const double h = p.a2 / 2.0;
    return 2.0 * c * c * c * c / (h * h * h);
}

} // namespace detail

// Sum of the constants that the coupling has to overcome. |lambda| is used in
// the g_K lambda H |E_K| term so that Q stays positive for lambda < 0.
inline double compute_Q(const ModelParams& p) {
    detail::require_quadratic_domain(p, "compute_Q");
    const double glh = p.g_K * p.lambda * p.H;
    return p.g_K * (1.0 + p.H) + std::fabs(p.a1 * p.E_Na) + p.g_K * std::fabs(p.lambda) * p.H * std::fabs(p.E_K) +
           6.0 * p.a1 * p.a1 / p.a2 + 6.0 * p.a2 / (p.E_Na * p.E_Na) + 6.0 / p.a2 * glh * glh;
}

// Sufficient coupling threshold for complete exponential synchronization.
inline double threshold_P_star(const ModelParams& p) {
    if (!(p.tau_K > 0.0) || p.n < 2)
        throw domain_error("threshold_P_star: needs tau_K > 0 and n >= 2");
    return std::max(0.0, (compute_Q(p) - detail::intrinsic_dissipation(p)) / p.n);
}

// Exponential rate mu(P); positive only when P > P*.
inline double rate_mu(const ModelParams& p) {
    return std::min(1.0 / (2.0 * p.tau_K), detail::intrinsic_dissipation(p) + p.n * p.P - compute_Q(p));
}

// Squared radius of the absorbing ball.
inline double absorbing_bound_G(const ModelParams& p) {
    detail::require_quadratic_domain(p, "absorbing_bound_G");
    if (!(p.a0 > 0.0))
        throw domain_error("absorbing_bound_G: a0 must be positive");
    const double s = std::sqrt(1.0 + p.H * p.H);
    const double first = std::fabs(p.E_Na) * p.a0 + p.g_K * s * std::fabs(p.E_K) + std::fabs(p.J);
    const double second = std::fabs(p.E_Na * p.a1) + p.g_K * s;
    const double per_neuron = first * first / (p.a0 * p.a0) + second * second / (p.a0 * p.a2) +
                              detail::quartic_term(p) / p.a0;
    return 1.0 + p.n * p.H * p.H + p.n * per_neuron;
}

namespace detail {

// Shared body of M(R0) and M*(R0) with decay constant `decay` (a0 or a0 - k/beta).
inline double transient_constant(const ModelParams& p, std::span<const double> R0, double decay) {
    double m = 0.0;
    const double quartic = quartic_term(p);
    for (double r : R0) {
        const double s = std::sqrt(r * r + p.H * p.H);
        const double first = std::fabs(p.E_Na) * decay + p.g_K * s * std::fabs(p.E_K) + std::fabs(p.J);
        const double second = std::fabs(p.E_Na * p.a1) + p.g_K * s;
        m += first * first / decay + second * second / p.a2 + quartic;
    }
    return m;
}

} // namespace detail

// M(R0): the initial-data dependent constant in the transient bound.
inline double constant_M(const ModelParams& p, std::span<const double> R0) {
    detail::require_quadratic_domain(p, "constant_M");
    return detail::transient_constant(p, R0, p.a0);
}

// Upper bound on sum_i V_i(t)^2 + R_i(t)^2 along the solution from y0.
inline double transient_bound(const ModelParams& p, const NetworkState& y0, double t) {
    if (!(t >= 0.0))
        throw domain_error("transient_bound: t must be nonnegative");
    double decaying = 0.0;
    const double eV = std::exp(-p.a0 * t);
    const double eR = std::exp(-t / p.tau_K);
    for (std::size_t i = 0; i < y0.neurons(); ++i)
        decaying += y0.V()[i] * y0.V()[i] * eV + y0.R()[i] * y0.R()[i] * eR;
    return decaying + constant_M(p, y0.R()) / p.a0 + p.n * p.H * p.H;
}

// Time after which trajectories from the ball of squared radius L stay in the absorbing ball.
inline double absorbing_entry_time(const ModelParams& p, double L) {
    if (!(L > 0.0))
        throw domain_error("absorbing_entry_time: L must be positive");
    return std::max(1.0 / p.a0, p.tau_K) * detail::log_plus(L / absorbing_bound_G(p));
}

// Time after which |R_i(0)| exp(-t / (2 tau_K)) <= 1 for every neuron.
inline double transient_time_T0(const NetworkState& y0, const ModelParams& p) {
    double rmax = 0.0;
    for (double r : y0.R())
        rmax = std::max(rmax, std::fabs(r));
    return 2.0 * p.tau_K * detail::log_plus(rmax);
}

struct ClassicalBounds {
    double Q = 0.0;
    double P_star = 0.0;
    double mu = 0.0;
    double G = 0.0;
    // Present when an initial state is supplied.
    std::optional<double> M_R0;
    std::optional<double> T_B;
    std::optional<double> T_0;
};

inline ClassicalBounds classical_bounds(const ModelParams& p, const NetworkState* y0 = nullptr) {
    ClassicalBounds b;
    b.Q = compute_Q(p);
    b.P_star = threshold_P_star(p);
    b.mu = rate_mu(p);
    b.G = absorbing_bound_G(p);
    if (y0) {
        b.M_R0 = constant_M(p, y0->R());
        const double L = y0->norm2_VR();
        b.T_B = L > 0.0 ? absorbing_entry_time(p, L) : 0.0;
        b.T_0 = transient_time_T0(*y0, p);
    }
    return b;
}

struct FractionalBounds {
    double Q = 0.0;
    double G_alpha = 0.0;
    double P_star_frac = 0.0;
    double delta = 0.0;
    double rho_bound = 0.0;
    std::optional<double> M_star_R0;
    std::optional<double> T_0;
};

// Bounds of the memristive network; requires a0 > k/beta.
inline FractionalBounds fractional_bounds(const MemristiveParams& mp, const NetworkState* y0 = nullptr) {
    mp.require_hypothesis();
    const ModelParams& p = mp.base;
    FractionalBounds f;
    f.Q = compute_Q(p);
    const double eff = p.a0 - mp.k / mp.beta;
    const double window_cap = mp.k / (2.0 * mp.beta);
    const double g_alpha = gamma(mp.alpha);

    const double s = std::sqrt(1.0 + p.H * p.H);
    const double first = std::fabs(p.E_Na) * eff + p.g_K * s * std::fabs(p.E_K) + std::fabs(p.J);
    const double second = std::fabs(p.E_Na * p.a1) + p.g_K * s;
    const double per_neuron = g_alpha / (eff * eff) * first * first +
                              g_alpha / eff * (second * second / p.a2 + detail::quartic_term(p));
    f.G_alpha = 1.0 + p.n * p.H * p.H + p.n * per_neuron;

    const double dissipation = detail::intrinsic_dissipation(p);
    f.P_star_frac = std::max(0.0, (f.Q + window_cap - dissipation) / p.n);
    f.delta = std::min(1.0 / (2.0 * p.tau_K), dissipation + p.n * p.P - f.Q - window_cap);

    double gmax = 0.0;
    for (double g : mp.gamma)
        gmax = std::max(gmax, g * g);
    f.rho_bound = 1.0 + f.G_alpha / (mp.b * mp.b) * gmax * g_alpha;

    if (y0) {
        f.M_star_R0 = detail::transient_constant(p, y0->R(), eff);
        f.T_0 = transient_time_T0(*y0, p);
    }
    return f;
}

// Bound on sum_i V_i(t)^2 for the memristive network from y0.
inline double fractional_transient_bound(const MemristiveParams& mp, const NetworkState& y0, double t) {
    mp.require_hypothesis();
    const ModelParams& p = mp.base;
    const double eff = p.a0 - mp.k / mp.beta;
    double v2 = 0.0;
    for (double v : y0.V())
        v2 += v * v;
    const double m_star = detail::transient_constant(p, y0.R(), eff);
    return fractional_gronwall_envelope(v2, m_star, eff, mp.alpha, t);
}

// Algebraic synchronization rate of the memristive network.
inline double rate_mu_alpha(const MemristiveParams& mp, double t) {
    if (!(t >= 0.0))
        throw domain_error("rate_mu_alpha: t must be nonnegative");
    const double delta = fractional_bounds(mp).delta;
    if (!(delta > 0.0))
        throw domain_error("rate_mu_alpha: delta(P) must be positive (P is not above the fractional threshold)");
    const double g1 = gamma(1.0 + mp.alpha);
    return g1 / (g1 + 2.0 * delta * std::pow(t, mp.alpha));
}

// Pairwise squared gaps U_ij^2 + Pi_ij^2 (i < j) at every recorded time.
struct GapSeries {
    std::size_t neurons = 0;
    std::vector<double> times;
    std::vector<double> gap_sq; // row-major [time][pair], pairs in (0,1), (0,2), ..., (n-2,n-1) order
    std::vector<double> max_gap;

    std::size_t pairs() const noexcept { return neurons * (neurons - 1) / 2; }
    std::size_t size() const noexcept { return times.size(); }
    std::span<const double> row(std::size_t k) const { return {gap_sq.data() + k * pairs(), pairs()}; }
};

inline GapSeries gap_series(const Trajectory& traj) {
    GapSeries g;
    g.neurons = traj.meta.neurons;
    if (g.neurons < 2)
        throw domain_error("gap_series: needs at least two neurons");
    g.times = traj.times;
    g.gap_sq.reserve(traj.size() * g.pairs());
    g.max_gap.reserve(traj.size());
    for (const auto& st : traj.states) {
        const auto V = st.V();
        const auto R = st.R();
        double m = 0.0;
        for (std::size_t i = 0; i < g.neurons; ++i)
            for (std::size_t j = i + 1; j < g.neurons; ++j) {
                const double u = V[i] - V[j];
                const double w = R[i] - R[j];
                const double v = u * u + w * w;
                g.gap_sq.push_back(v);
                m = std::max(m, v);
            }
        g.max_gap.push_back(m);
    }
    return g;
}

// Outcome of one check. `margin` is allowed / measured at the tightest
// sample (> 1 means slack, infinite when the measured value is zero).
struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
    double margin = std::numeric_limits<double>::infinity();
    double at_time = 0.0;
    std::string detail;
};

namespace detail {

inline void track_margin(CheckResult& r, double measured, double allowed, double t) {
    const double ratio = measured > 0.0 ? allowed / measured : std::numeric_limits<double>::infinity();
    if (ratio < r.margin || (r.margin == std::numeric_limits<double>::infinity() && measured >= r.measured)) {
        r.margin = ratio;
        r.measured = measured;
        r.bound = allowed;
        r.at_time = t;
    }
}

// First recorded index with time >= t0.
inline std::optional<std::size_t> first_at_or_after(std::span<const double> times, double t0) {
    const auto it = std::lower_bound(times.begin(), times.end(), t0 - 1e-12 * std::max(1.0, std::fabs(t0)));
    if (it == times.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - times.begin());
}

} // namespace detail

struct EnvelopeTolerance {
    double relative = 1e-6;
    double absolute = 1e-12;
};

// Generic envelope check: for every recorded t after the reference sample t_r
// (the first at or after T0), max_gap(t) <= max_gap(t_r) * decay(t - t_r).
template <class Decay>
CheckResult verify_envelope(const GapSeries& gaps, double T0, Decay&& decay, std::string name,
                            EnvelopeTolerance tol = {}) {
    CheckResult r;
    r.name = std::move(name);
    const auto ref = detail::first_at_or_after(gaps.times, T0);
    if (!ref || *ref + 1 >= gaps.size()) {
        r.pass = false;
        r.detail = "no recorded samples after T0 = " + std::to_string(T0);
        return r;
    }
    const double t_ref = gaps.times[*ref];
    const double g_ref = gaps.max_gap[*ref];
    bool ok = true;
    for (std::size_t k = *ref + 1; k < gaps.size(); ++k) {
        const double allowed = g_ref * decay(gaps.times[k] - t_ref) * (1.0 + tol.relative) + tol.absolute;
        const double measured = gaps.max_gap[k];
        if (!(measured <= allowed))
            ok = false;
        detail::track_margin(r, measured, allowed, gaps.times[k]);
    }
    r.pass = ok;
    r.detail = "reference t = " + std::to_string(t_ref) + ", reference max gap^2 = " + std::to_string(g_ref);
    return r;
}

// Exponential envelope max_gap(T0) e^{-mu (t - T0)}.
inline CheckResult verify_sync_envelope(const GapSeries& gaps, double mu, double T0, EnvelopeTolerance tol = {}) {
    if (!(mu > 0.0))
        throw domain_error("verify_sync_envelope: mu must be positive");
    return verify_envelope(
        gaps, T0, [mu](double dt) { return std::exp(-mu * dt); }, "sync_envelope", tol);
}

// Algebraic envelope max_gap(T0) mu_alpha(P, t - T0). `delta_scale` rescales
// delta(P) (debug use only).
inline CheckResult verify_frac_sync(const GapSeries& gaps, const MemristiveParams& mp, double T0,
                                    EnvelopeTolerance tol = {}, double delta_scale = 1.0) {
    const double delta = fractional_bounds(mp).delta * delta_scale;
    if (!(delta > 0.0))
        throw domain_error("verify_frac_sync: delta(P) must be positive");
    const double g1 = gamma(1.0 + mp.alpha);
    const double alpha = mp.alpha;
    return verify_envelope(
        gaps, T0, [=](double dt) { return g1 / (g1 + 2.0 * delta * std::pow(dt, alpha)); }, "frac_sync_envelope",
        tol);
}

// Trailing window standing in for limsup: the last `fraction` of the run, but
// at least min_duration as long as that stays within the second half.
struct TailWindow {
    double fraction = 0.25;
    double min_duration = 50.0;

    double start(const std::vector<double>& times) const {
        if (times.empty())
            return 0.0;
        const double t0 = times.front();
        const double span = times.back() - t0;
        const double len = std::max(fraction * span, std::min(min_duration, 0.5 * span));
        return std::max(t0, times.back() - len);
    }
};

struct DissipativityResult {
    CheckResult tail;      // limsup of the squared norm against the ball radius
    CheckResult transient; // pointwise transient bound over the whole run
    bool pass() const noexcept { return tail.pass && transient.pass; }
};

namespace detail {

inline CheckResult tail_norm_check(const Trajectory& traj, double G, double tail_start, std::string name) {
    CheckResult r;
    r.name = std::move(name);
    bool ok = true;
    double worst = -1.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.times[k] < tail_start)
            continue;
        const double v = traj.states[k].norm2_VR();
        if (!(v < G))
            ok = false;
        if (v > worst) {
            worst = v;
            r.at_time = traj.times[k];
        }
    }
    r.measured = std::max(worst, 0.0);
    r.bound = G;
    r.margin = r.measured > 0.0 ? G / r.measured : std::numeric_limits<double>::infinity();
    r.pass = ok && worst >= 0.0;
    r.detail = "tail starts at t = " + std::to_string(tail_start);
    return r;
}

inline void require_tail_after_entry(double tail_start, double entry) {
    if (tail_start < entry)
        throw domain_error("verify_dissipativity: trajectory too short, tail starts at t = " +
                           std::to_string(tail_start) + " before the absorbing entry time " + std::to_string(entry));
}

} // namespace detail

// limsup ||(V, R)||^2 < G over the tail window, plus the transient bound at every sample.
inline DissipativityResult verify_dissipativity(const Trajectory& traj, const ModelParams& p, double G,
                                                TailWindow window = {}) {
    if (traj.empty())
        throw domain_error("verify_dissipativity: empty trajectory");
    const NetworkState& y0 = traj.states.front();
    const double L = y0.norm2_VR();
    const double entry = L > 0.0 ? std::max(1.0 / p.a0, p.tau_K) * detail::log_plus(L / G) : 0.0;
    const double tail_start = window.start(traj.times);
    detail::require_tail_after_entry(tail_start, entry);

    DissipativityResult out;
    out.tail = detail::tail_norm_check(traj, G, tail_start, "dissipativity_tail");

    CheckResult& tr = out.transient;
    tr.name = "transient_bound";
    bool ok = true;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double bound = transient_bound(p, y0, traj.times[k]);
        const double v = traj.states[k].norm2_VR();
        if (!(v <= bound))
            ok = false;
        detail::track_margin(tr, v, bound, traj.times[k]);
    }
    tr.pass = ok;
    return out;
}

// Memristive counterpart: tail against G_alpha and the fractional bound on sum_i V_i^2.
inline DissipativityResult verify_dissipativity(const Trajectory& traj, const MemristiveParams& mp, double G_alpha,
                                                TailWindow window = {}) {
    if (traj.empty())
        throw domain_error("verify_dissipativity: empty trajectory");
    const NetworkState& y0 = traj.states.front();
    const double tail_start = window.start(traj.times);

    DissipativityResult out;
    out.tail = detail::tail_norm_check(traj, G_alpha, tail_start, "dissipativity_tail");

    CheckResult& tr = out.transient;
    tr.name = "transient_bound";
    bool ok = true;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double bound = fractional_transient_bound(mp, y0, traj.times[k]);
        double v2 = 0.0;
        for (double v : traj.states[k].V())
            v2 += v * v;
        if (!(v2 <= bound))
            ok = false;
        detail::track_margin(tr, v2, bound, traj.times[k]);
    }
    tr.pass = ok;
    return out;
}

// limsup rho^2 < rho_bound over the tail window.
inline CheckResult verify_memductance_bound(const Trajectory& traj, double rho_bound, TailWindow window = {}) {
    CheckResult r;
    r.name = "memductance_bound";
    const double tail_start = window.start(traj.times);
    bool ok = true;
    double worst = -1.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.times[k] < tail_start)
            continue;
        const auto rho = traj.states[k].rho();
        if (!rho)
            throw dimension_error("verify_memductance_bound: trajectory has no rho component");
        const double v = *rho * *rho;
        if (!(v < rho_bound))
            ok = false;
        if (v > worst) {
            worst = v;
            r.at_time = traj.times[k];
        }
    }
    r.measured = std::max(worst, 0.0);
    r.bound = rho_bound;
    r.margin = r.measured > 0.0 ? rho_bound / r.measured : std::numeric_limits<double>::infinity();
    r.pass = ok && worst >= 0.0;
    return r;
}

// max_gap is non-increasing (up to tolerance) over the trailing `fraction` of the run.
inline CheckResult verify_monotone_tail(const GapSeries& gaps, double fraction = 0.25, EnvelopeTolerance tol = {}) {
    CheckResult r;
    r.name = "gap_monotone_tail";
    TailWindow w{fraction, 0.0};
    const double start = w.start(gaps.times);
    bool ok = true;
    std::size_t checked = 0;
    for (std::size_t k = 1; k < gaps.size(); ++k) {
        if (gaps.times[k - 1] < start)
            continue;
        const double allowed = gaps.max_gap[k - 1] * (1.0 + tol.relative) + tol.absolute;
        if (!(gaps.max_gap[k] <= allowed))
            ok = false;
        detail::track_margin(r, gaps.max_gap[k], allowed, gaps.times[k]);
        ++checked;
    }
    r.pass = ok && checked > 0;
    r.detail = "window starts at t = " + std::to_string(start);
    return r;
}

// max over the trailing window and over pairs of |V_i - V_j| + |R_i - R_j|.
inline double terminal_sync_degree(const Trajectory& traj, double fraction = 0.25) {
    TailWindow w{fraction, 0.0};
    const double start = w.start(traj.times);
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.times[k] < start)
            continue;
        const auto V = traj.states[k].V();
        const auto R = traj.states[k].R();
        for (std::size_t i = 0; i < V.size(); ++i)
            for (std::size_t j = i + 1; j < V.size(); ++j)
                worst = std::max(worst, std::fabs(V[i] - V[j]) + std::fabs(R[i] - R[j]));
    }
    return worst;
}

struct SyncDegreeEstimate {
    double value = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    double init_radius = 0.0;
};

namespace detail {

inline Trajectory run_model(const ModelParams& p, const NetworkState& y0, const IntegratorSpec& spec) {
    return integrate_classical(p, y0, spec);
}

inline Trajectory run_model(const MemristiveParams& p, const NetworkState& y0, const IntegratorSpec& spec) {
    return integrate_caputo(p, y0, spec);
}

inline std::size_t neuron_count(const ModelParams& p) { return static_cast<std::size_t>(p.n); }
inline std::size_t neuron_count(const MemristiveParams& p) { return static_cast<std::size_t>(p.base.n); }
inline bool is_memristive(const ModelParams&) { return false; }
inline bool is_memristive(const MemristiveParams&) { return true; }

} // namespace detail

// Sup of the terminal sync degree over explicitly given initial states.
template <class Params>
double sync_degree_estimate(const Params& p, std::span<const NetworkState> initial, const IntegratorSpec& spec,
                            unsigned jobs = 1, double tail_fraction = 0.25) {
    std::vector<double> per_run(initial.size(), 0.0);
    parallel_for(initial.size(), jobs, [&](std::size_t i) {
        per_run[i] = terminal_sync_degree(detail::run_model(p, initial[i], spec), tail_fraction);
    });
    double sup = 0.0;
    for (double v : per_run)
        sup = std::max(sup, v);
    return sup;
}

// Monte-Carlo lower estimate of the synchronizing degree: sample k starts from
// a uniform point of the ball of radius init_radius drawn with derive_seed(seed, k).
template <class Params>
SyncDegreeEstimate sync_degree_estimate(const Params& p, std::size_t sample_count, double init_radius,
                                        const IntegratorSpec& spec, std::uint64_t seed, unsigned jobs = 1,
                                        double tail_fraction = 0.25) {
    if (sample_count < 1)
        throw domain_error("sync_degree_estimate: sample_count must be at least 1");
    std::vector<NetworkState> initial;
    initial.reserve(sample_count);
    for (std::size_t k = 0; k < sample_count; ++k)
        initial.push_back(
            random_state(detail::neuron_count(p), detail::is_memristive(p), init_radius, derive_seed(seed, k)));
    SyncDegreeEstimate est;
    est.value = sync_degree_estimate(p, std::span<const NetworkState>(initial), spec, jobs, tail_fraction);
    est.samples = sample_count;
    est.seed = seed;
    est.init_radius = init_radius;
    return est;
}

} // namespace hhw
