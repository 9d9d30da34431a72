#pragma once

// Hodgkin-Huxley-Wilson network: parameters, state layout and vector fields.
//
// State layout is flat everywhere: (V_1..V_n, R_1..R_n[, rho]).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hhw/error.hpp"

namespace hhw {

struct ModelParams {
    int n = 2;
    double a0 = 17.8;
    double a1 = 47.6;
    double a2 = 33.8;
    double g_K = 26.0;
    double E_Na = 0.5;
    double E_K = -0.95;
    double H = 1.0;
    double lambda = 1.0;
    double tau_K = 4.2;
    double J = 0.0;
    double P = 0.0;

    // Sign constraints on the parameters; throws config_error naming the field.
    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v))
                throw config_error(name, "must be a positive finite number");
        };
        if (n < 2)
            throw config_error("n", "network needs at least 2 neurons");
        positive(a0, "a0");
        positive(a2, "a2");
        positive(g_K, "g_K");
        positive(E_Na, "E_Na");
        positive(H, "H");
        positive(tau_K, "tau_K");
        if (!(E_K < 0.0))
            throw config_error("E_K", "must be negative");
        if (!(P >= 0.0) || !std::isfinite(P))
            throw config_error("P", "must be nonnegative");
        for (auto [v, name] : {std::pair{a1, "a1"}, {lambda, "lambda"}, {J, "J"}})
            if (!std::isfinite(v))
                throw config_error(name, "must be finite");
    }
};

// Wilson's cortical-neuron constants in scaled units of mV/100.
// The sigmoid slope is not part of that set; lambda = 1 is our default.
inline ModelParams wilson_preset(int n = 2, double P = 0.0, double lambda = 1.0, double J = 0.0) {
    ModelParams p;
    p.n = n;
    p.P = P;
    p.lambda = lambda;
    p.J = J;
    return p;
}

struct MemristiveParams {
    ModelParams base;
    double alpha = 0.5;
    double k = 1.0;
    double beta = 1.0;
    std::vector<double> gamma;
    double b = 2.0;

    void validate() const {
        base.validate();
        if (!(alpha > 0.0 && alpha < 1.0))
            throw config_error("alpha", "fractional order must lie in (0, 1)");
        if (!(k > 0.0))
            throw config_error("k", "must be positive");
        if (!(beta > 0.0))
            throw config_error("beta", "must be positive");
        if (!(b > 0.0))
            throw config_error("b", "must be positive");
        if (gamma.size() != static_cast<std::size_t>(base.n))
            throw config_error("gamma", "needs exactly n entries");
        for (double g : gamma)
            if (!std::isfinite(g))
                throw config_error("gamma", "entries must be finite");
    }

    // Hypothesis a0 > k/beta of the fractional dissipativity and sync results.
    bool hypothesis_holds() const { return base.a0 > k / beta; }

    void require_hypothesis() const {
        if (!hypothesis_holds())
            throw hypothesis_error("memristive bounds need a0 > k/beta (a0 = " + std::to_string(base.a0) +
                                   ", k/beta = " + std::to_string(k / beta) + ")");
    }
};

inline MemristiveParams memristive_wilson_preset(int n = 2, double alpha = 0.5, double P = 0.0,
                                                 double k = 1.0, double beta = 1.0, double b = 2.0,
                                                 double gamma_i = 0.1) {
    MemristiveParams p;
    p.base = wilson_preset(n, P);
    p.alpha = alpha;
    p.k = k;
    p.beta = beta;
    p.b = b;
    p.gamma.assign(static_cast<std::size_t>(n), gamma_i);
    return p;
}

class NetworkState {
public:
    NetworkState() = default;

    NetworkState(std::size_t n, bool memristive)
        : n_(n), memristive_(memristive), data_(2 * n + (memristive ? 1 : 0), 0.0) {}

    NetworkState(std::vector<double> V, std::vector<double> R, std::optional<double> rho = std::nullopt)
        : n_(V.size()), memristive_(rho.has_value()) {
        if (V.size() != R.size())
            throw dimension_error("NetworkState: V and R must have the same length");
        data_ = std::move(V);
        data_.insert(data_.end(), R.begin(), R.end());
        if (rho)
            data_.push_back(*rho);
    }

    static NetworkState from_flat(std::size_t n, std::span<const double> flat) {
        if (flat.size() != 2 * n && flat.size() != 2 * n + 1)
            throw dimension_error("NetworkState: flat vector of length " + std::to_string(flat.size()) +
                                  " does not fit n = " + std::to_string(n));
        NetworkState s(n, flat.size() == 2 * n + 1);
        std::copy(flat.begin(), flat.end(), s.data_.begin());
        return s;
    }

    std::size_t neurons() const noexcept { return n_; }
    bool memristive() const noexcept { return memristive_; }
    std::size_t dimension() const noexcept { return data_.size(); }

    std::span<double> V() noexcept { return {data_.data(), n_}; }
    std::span<const double> V() const noexcept { return {data_.data(), n_}; }
    std::span<double> R() noexcept { return {data_.data() + n_, n_}; }
    std::span<const double> R() const noexcept { return {data_.data() + n_, n_}; }

    std::optional<double> rho() const noexcept {
        if (!memristive_)
            return std::nullopt;
        return data_.back();
    }
    void set_rho(double v) {
        if (!memristive_)
            throw dimension_error("NetworkState: classical state has no rho component");
        data_.back() = v;
    }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    // Sum of V_i^2 + R_i^2 (rho excluded).
    double norm2_VR() const noexcept {
        double s = 0.0;
        for (std::size_t i = 0; i < 2 * n_; ++i)
            s += data_[i] * data_[i];
        return s;
    }

    friend bool operator==(const NetworkState&, const NetworkState&) = default;

private:
    std::size_t n_ = 0;
    bool memristive_ = false;
    std::vector<double> data_;
};

// Sodium conductance polynomial.
inline double m_inf(double s, const ModelParams& p) noexcept {
    return p.a0 + s * (p.a1 + p.a2 * s);
}

inline double m_inf_derivative(double s, const ModelParams& p) noexcept {
    return p.a1 + 2.0 * p.a2 * s;
}

// Potassium rest current H / (1 + exp(-lambda (s - E_K))), evaluated without
// overflow and kept inside the open interval (0, H) after rounding.
inline double r_inf(double s, const ModelParams& p) noexcept {
    const double x = p.lambda * (s - p.E_K);
    double r;
    if (x >= 0.0) {
        r = p.H / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        r = p.H * e / (1.0 + e);
    }
    return std::clamp(r, std::numeric_limits<double>::denorm_min(), std::nextafter(p.H, 0.0));
}

inline double r_inf_derivative(double s, const ModelParams& p) noexcept {
    const double r = r_inf(s, p);
    return p.lambda * r * (1.0 - r / p.H);
}

// Memristor window s (1 - beta s).
inline double psi(double s, double beta) noexcept { return s - beta * s * s; }

inline double psi_derivative(double s, double beta) noexcept { return 1.0 - 2.0 * beta * s; }

namespace detail {

inline void check_dims(std::size_t got, std::size_t want, const char* who) {
    if (got != want)
        throw dimension_error(std::string(who) + ": state has dimension " + std::to_string(got) +
                              ", expected " + std::to_string(want));
}

// Classical part of the V and R equations plus `extra_gain * V_i` in dV_i.
inline void hhw_core(std::span<const double> y, std::span<double> dy, const ModelParams& p,
                     double extra_gain) {
    const std::size_t n = static_cast<std::size_t>(p.n);
    const double* V = y.data();
    const double* R = y.data() + n;
    double sumV = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sumV += V[i];
    const double nd = static_cast<double>(n);
    const double inv_tau = 1.0 / p.tau_K;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = V[i];
        // sum_j P (V_j - V_i) over the complete graph
        const double coupling = p.P * (sumV - nd * v);
        dy[i] = -m_inf(v, p) * (v - p.E_Na) - p.g_K * R[i] * (v - p.E_K) + p.J + coupling + extra_gain * v;
        dy[n + i] = (r_inf(v, p) - R[i]) * inv_tau;
    }
}

} // namespace detail

// In-place vector field of the classical network.
inline void hhw_rhs(std::span<const double> y, std::span<double> dy, const ModelParams& p) {
    const std::size_t dim = 2 * static_cast<std::size_t>(p.n);
    detail::check_dims(y.size(), dim, "hhw_rhs");
    detail::check_dims(dy.size(), dim, "hhw_rhs");
    detail::hhw_core(y, dy, p, 0.0);
}

inline NetworkState hhw_rhs(const NetworkState& state, const ModelParams& p) {
    if (state.memristive())
        throw dimension_error("hhw_rhs: classical field called on a memristive state");
    NetworkState out(state.neurons(), false);
    hhw_rhs(state.flat(), out.flat(), p);
    return out;
}

// In-place vector field of the memristive network (the fractional order lives in the integrator).
inline void memristive_rhs(std::span<const double> y, std::span<double> dy, const MemristiveParams& p) {
    const std::size_t n = static_cast<std::size_t>(p.base.n);
    detail::check_dims(y.size(), 2 * n + 1, "memristive_rhs");
    detail::check_dims(dy.size(), 2 * n + 1, "memristive_rhs");
    if (p.gamma.size() != n)
        throw dimension_error("memristive_rhs: gamma needs n entries");
    const double rho = y[2 * n];
    detail::hhw_core(y, dy, p.base, p.k * psi(rho, p.beta));
    double drive = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        drive += p.gamma[i] * y[i];
    dy[2 * n] = drive - p.b * rho;
}

inline NetworkState memristive_rhs(const NetworkState& state, const MemristiveParams& p) {
    if (!state.memristive())
        throw dimension_error("memristive_rhs: state has no rho component");
    NetworkState out(state.neurons(), true);
    memristive_rhs(state.flat(), out.flat(), p);
    return out;
}

// Vector-field functors consumed by the integrators. `jacobian` writes a
// dense row-major dim x dim matrix.
struct ClassicalField {
    ModelParams params;

    std::size_t dimension() const { return 2 * static_cast<std::size_t>(params.n); }

    void operator()(std::span<const double> y, std::span<double> dy) const {
        detail::hhw_core(y, dy, params, 0.0);
    }

    void jacobian(std::span<const double> y, std::span<double> jac) const {
        fill_jacobian(y, jac, params, 0.0, dimension());
    }

    static void fill_jacobian(std::span<const double> y, std::span<double> jac, const ModelParams& p,
                              double extra_gain, std::size_t dim) {
        const std::size_t n = static_cast<std::size_t>(p.n);
        std::fill(jac.begin(), jac.end(), 0.0);
        const double nd = static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = y[i];
            double* row = jac.data() + i * dim;
            for (std::size_t j = 0; j < n; ++j)
                row[j] = p.P;
            row[i] = -(m_inf(v, p) + (v - p.E_Na) * m_inf_derivative(v, p)) - p.g_K * y[n + i] +
                     p.P * (1.0 - nd) + extra_gain;
            row[n + i] = -p.g_K * (v - p.E_K);
            double* rrow = jac.data() + (n + i) * dim;
            rrow[i] = r_inf_derivative(v, p) / p.tau_K;
            rrow[n + i] = -1.0 / p.tau_K;
        }
    }
};

struct MemristiveField {
    MemristiveParams params;

    std::size_t dimension() const { return 2 * static_cast<std::size_t>(params.base.n) + 1; }

    void operator()(std::span<const double> y, std::span<double> dy) const { memristive_rhs(y, dy, params); }

    void jacobian(std::span<const double> y, std::span<double> jac) const {
        const std::size_t n = static_cast<std::size_t>(params.base.n);
        const std::size_t dim = dimension();
        const double rho = y[2 * n];
        ClassicalField::fill_jacobian(y, jac, params.base, params.k * psi(rho, params.beta), dim);
        const double dpsi = params.k * psi_derivative(rho, params.beta);
        for (std::size_t i = 0; i < n; ++i)
            jac[i * dim + 2 * n] = dpsi * y[i];
        double* last = jac.data() + 2 * n * dim;
        for (std::size_t i = 0; i < n; ++i)
            last[i] = params.gamma[i];
        last[2 * n] = -params.b;
    }
};

enum class ModelKind { classical, memristive };

inline const char* to_string(ModelKind k) { return k == ModelKind::classical ? "classical" : "memristive"; }

enum class IntegratorKind { classical_fixed, classical_adaptive, caputo_pc };

inline const char* to_string(IntegratorKind k) {
    switch (k) {
    case IntegratorKind::classical_fixed: return "classical_fixed";
    case IntegratorKind::classical_adaptive: return "classical_adaptive";
    case IntegratorKind::caputo_pc: return "caputo_pc";
    }
    return "unknown";
}

struct TrajectoryMeta {
    ModelKind model = ModelKind::classical;
    std::size_t neurons = 0;
    IntegratorKind integrator = IntegratorKind::classical_fixed;
    double step = 0.0;
    std::optional<double> alpha;
};

// Recorded samples of one run. times strictly increasing.
struct Trajectory {
    std::vector<double> times;
    std::vector<NetworkState> states;
    TrajectoryMeta meta;

    std::size_t size() const noexcept { return times.size(); }
    bool empty() const noexcept { return times.empty(); }

    void push(double t, std::span<const double> y) {
        times.push_back(t);
        states.push_back(NetworkState::from_flat(meta.neurons, y));
    }
};

} // namespace hhw
