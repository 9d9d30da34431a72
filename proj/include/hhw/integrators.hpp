#pragma once

// Time stepping for the classical network (RK4, Dormand-Prince 5(4)) and the
// Caputo fractional network (Adams-type predictor-corrector on a uniform grid).

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hhw/error.hpp"
#include "hhw/model.hpp"
#include "hhw/special_functions.hpp"

namespace hhw {

template <class F>
concept VectorField = requires(const F& f, std::span<const double> y, std::span<double> dy) {
    f(y, dy);
};

template <class F>
concept HasJacobian = requires(const F& f, std::span<const double> y, std::span<double> jac) {
    f.jacobian(y, jac);
};

enum class CorrectorMode {
    pece,   // explicit predict-evaluate-correct-evaluate sweeps
    newton, // corrector equation solved implicitly by Newton iteration
};

inline const char* to_string(CorrectorMode m) { return m == CorrectorMode::pece ? "pece" : "newton"; }

struct IntegratorSpec {
    IntegratorKind kind = IntegratorKind::classical_fixed;
    // Fixed step for classical_fixed and caputo_pc; sampling interval for classical_adaptive.
    double dt = 0.01;
    double t_end = 200.0;
    int record_stride = 1;

    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double min_step = 1e-13;
    std::uint64_t max_steps = 200'000'000;

    CorrectorMode corrector = CorrectorMode::newton;
    int corrector_sweeps = 1;
    int newton_max_iterations = 30;
    double newton_tolerance = 1e-13;
    std::size_t memory_window = 0; // steps of history kept; 0 keeps all
    std::size_t max_history_bytes = std::size_t{2} << 30;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw config_error("dt", "must be positive");
        if (!(t_end > 0.0) || !std::isfinite(t_end))
            throw config_error("t_end", "must be positive");
        if (record_stride < 1)
            throw config_error("record_stride", "must be at least 1");
        if (kind == IntegratorKind::classical_adaptive && !(abs_tol > 0.0 && rel_tol >= 0.0))
            throw config_error("abs_tol", "adaptive tolerances must be positive");
        if (corrector_sweeps < 1 || corrector_sweeps > 3)
            throw config_error("corrector_sweeps", "must lie in [1, 3]");
        if (newton_max_iterations < 1)
            throw config_error("newton_max_iterations", "must be at least 1");
    }
};

namespace detail {

inline bool all_finite(std::span<const double> y) {
    return std::all_of(y.begin(), y.end(), [](double v) { return std::isfinite(v); });
}

// Number of uniform steps of size h covering [0, t_end]; the last grid point is >= t_end.
inline std::uint64_t grid_steps(double t_end, double h) {
    const double ratio = t_end / h;
    const double r = std::round(ratio);
    if (std::fabs(ratio - r) <= 1e-9 * std::max(1.0, r))
        return static_cast<std::uint64_t>(std::max(1.0, r));
    return static_cast<std::uint64_t>(std::ceil(ratio));
}

} // namespace detail

// Classical RK4 on a uniform grid. `sink(step, t, y)` sees t = 0, every
// record_stride-th step and the final step.
template <VectorField F, class Sink>
void rk4_integrate(const F& f, std::vector<double> y, const IntegratorSpec& spec, Sink&& sink) {
    spec.validate();
    const std::size_t dim = y.size();
    const double h = spec.dt;
    const std::uint64_t steps = detail::grid_steps(spec.t_end, h);
    if (steps > spec.max_steps)
        throw resource_error("rk4_integrate: step count exceeds max_steps");
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim), prev(dim);

    sink(std::uint64_t{0}, 0.0, std::span<const double>(y));
    for (std::uint64_t s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) * h;
        const double t_next = (s + 1 == steps) ? spec.t_end : static_cast<double>(s + 1) * h;
        const double step = t_next - t;
        prev = y;
        f(std::span<const double>(y), std::span<double>(k1));
        for (std::size_t i = 0; i < dim; ++i)
            tmp[i] = y[i] + 0.5 * step * k1[i];
        f(std::span<const double>(tmp), std::span<double>(k2));
        for (std::size_t i = 0; i < dim; ++i)
            tmp[i] = y[i] + 0.5 * step * k2[i];
        f(std::span<const double>(tmp), std::span<double>(k3));
        for (std::size_t i = 0; i < dim; ++i)
            tmp[i] = y[i] + step * k3[i];
        f(std::span<const double>(tmp), std::span<double>(k4));
        for (std::size_t i = 0; i < dim; ++i)
            y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        if (!detail::all_finite(y))
            throw integration_error("non-finite state after step at t = " + std::to_string(t_next) +
                                        " (blow-up or invalid parameters)",
                                    t, prev);
        if ((s + 1) % static_cast<std::uint64_t>(spec.record_stride) == 0 || s + 1 == steps)
            sink(s + 1, t_next, std::span<const double>(y));
    }
}

namespace detail {

// Dormand-Prince 5(4) tableau.
struct DormandPrince {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    // b - b_hat
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
};

} // namespace detail

// Embedded Dormand-Prince 5(4) with step-size control. Steps are clipped to
// land exactly on the sampling grid m * dt * record_stride, so recorded
// samples are uniform without interpolation.
template <VectorField F, class Sink>
void dopri_integrate(const F& f, std::vector<double> y, const IntegratorSpec& spec, Sink&& sink) {
    spec.validate();
    using T = detail::DormandPrince;
    const std::size_t dim = y.size();
    const double sample = spec.dt * spec.record_stride;
    const std::uint64_t samples = detail::grid_steps(spec.t_end, sample);
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), k5(dim), k6(dim), k7(dim), tmp(dim), y_new(dim);

    f(std::span<const double>(y), std::span<double>(k1));
    double t = 0.0;
    double h = std::min(sample, 1e-3);
    std::uint64_t taken = 0;
    sink(std::uint64_t{0}, 0.0, std::span<const double>(y));

    auto stage = [&](std::vector<double>& out, auto&& combine) {
        for (std::size_t i = 0; i < dim; ++i)
            tmp[i] = y[i] + combine(i);
        f(std::span<const double>(tmp), std::span<double>(out));
    };

    for (std::uint64_t m = 1; m <= samples; ++m) {
        const double target = (m == samples) ? spec.t_end : static_cast<double>(m) * sample;
        while (t < target) {
            const bool clipped = t + h >= target - 1e-12 * std::max(1.0, target);
            const double step = clipped ? target - t : h;
            stage(k2, [&](std::size_t i) { return step * T::a21 * k1[i]; });
            stage(k3, [&](std::size_t i) { return step * (T::a31 * k1[i] + T::a32 * k2[i]); });
            stage(k4, [&](std::size_t i) { return step * (T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i]); });
            stage(k5, [&](std::size_t i) {
                return step * (T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] + T::a54 * k4[i]);
            });
            stage(k6, [&](std::size_t i) {
                return step * (T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] + T::a64 * k4[i] + T::a65 * k5[i]);
            });
            for (std::size_t i = 0; i < dim; ++i)
                y_new[i] = y[i] + step * (T::b1 * k1[i] + T::b3 * k3[i] + T::b4 * k4[i] + T::b5 * k5[i] +
                                          T::b6 * k6[i]);
            f(std::span<const double>(y_new), std::span<double>(k7));

            double err = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double e = step * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] +
                                         T::e6 * k6[i] + T::e7 * k7[i]);
                const double sc = spec.abs_tol + spec.rel_tol * std::max(std::fabs(y[i]), std::fabs(y_new[i]));
                err += (e / sc) * (e / sc);
            }
            err = std::sqrt(err / static_cast<double>(dim));
            if (!std::isfinite(err))
                err = 1e10;

            const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            if (err <= 1.0 && detail::all_finite(y_new)) {
                t = clipped ? target : t + step;
                y.swap(y_new);
                k1.swap(k7);
                if (!clipped || step >= 0.5 * h)
                    h = step * factor;
                if (++taken > spec.max_steps)
                    throw resource_error("dopri_integrate: step count exceeds max_steps");
            } else {
                h = step * std::min(factor, 0.9);
            }
            if (h < spec.min_step * std::max(1.0, t))
                throw integration_error("step size underflow at t = " + std::to_string(t) +
                                            " (stiff blow-up or invalid parameters)",
                                        t, y);
        }
        sink(m, t, std::span<const double>(y));
    }
}

// Convolution weights and right-hand-side history of the fractional
// Adams predictor-corrector on a uniform grid t_k = k h.
//
// To advance from t_k to t_{k+1} with history f_0..f_k:
//   predictor  y0 + h^a/Gamma(a+1) * sum_j b_{k+1-j} f_j,  b_d = d^a - (d-1)^a
//   corrector  y0 + h^a/Gamma(a+2) * (f(y_{k+1}) + a0_k f_0 + sum_{j>=1} a_{k+1-j} f_j)
//              a_d = (d+1)^{a+1} + (d-1)^{a+1} - 2 d^{a+1},  a0_k = k^{a+1} - (k-a)(k+1)^a
class CaputoHistory {
public:
    CaputoHistory(std::size_t dim, double alpha, double h, std::size_t reserve = 0, std::size_t window = 0)
        : alpha_(alpha), h_(h), window_(window), columns_(dim) {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw domain_error("CaputoHistory: order must lie in (0, 1]");
        predictor_scale_ = std::pow(h, alpha) / gamma(alpha + 1.0);
        corrector_scale_ = std::pow(h, alpha) / gamma(alpha + 2.0);
        for (auto& c : columns_)
            c.reserve(reserve);
        pred_w_.push_back(0.0);
        corr_w_.push_back(0.0);
    }

    std::size_t dimension() const noexcept { return columns_.size(); }
    // Number of stored right-hand sides; equals completed steps + 1.
    std::size_t size() const noexcept { return columns_.empty() ? 0 : columns_.front().size(); }
    std::size_t steps() const noexcept { return size() == 0 ? 0 : size() - 1; }
    double predictor_scale() const noexcept { return predictor_scale_; }
    double corrector_scale() const noexcept { return corrector_scale_; }

    void push(std::span<const double> f) {
        if (f.size() != columns_.size())
            throw dimension_error("CaputoHistory: right-hand side has the wrong dimension");
        for (std::size_t i = 0; i < f.size(); ++i)
            columns_[i].push_back(f[i]);
        extend_weights(size());
    }

    // Predictor sums sum_j b f_j and corrector history sums (without the
    // implicit f(y_{k+1}) term) for the step k -> k+1, k = steps().
    void sums(std::span<double> pred, std::span<double> corr) const {
        const std::size_t k = steps();
        const std::size_t first = (window_ > 0 && k + 1 > window_) ? k + 1 - window_ : 0;
        const double* bw = pred_w_.data();
        const double* aw = corr_w_.data();
        const double a_first = first == 0 ? start_weight(k) : aw[k + 1 - first];
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            const double* fc = columns_[c].data();
            double sp = 0.0;
            double sc = 0.0;
            for (std::size_t j = first; j <= k; ++j) {
                const std::size_t d = k + 1 - j;
                sp += bw[d] * fc[j];
                sc += aw[d] * fc[j];
            }
            // aw[k+1] was applied to f_first; replace it by the start weight.
            sc += (a_first - aw[k + 1 - first]) * fc[first];
            pred[c] = sp;
            corr[c] = sc;
        }
    }

    // Weight a0_k of f_0 in the corrector for the step k -> k+1.
    double start_weight(std::size_t k) const {
        const double kd = static_cast<double>(k);
        return std::pow(kd, alpha_ + 1.0) - (kd - alpha_) * std::pow(kd + 1.0, alpha_);
    }

    // b_d = d^a - (d-1)^a
    static double predictor_weight(double alpha, std::size_t d) {
        const double dd = static_cast<double>(d);
        if (d <= 1)
            return d == 1 ? 1.0 : 0.0;
        return -std::pow(dd, alpha) * std::expm1(alpha * std::log1p(-1.0 / dd));
    }

    // a_d = (d+1)^p + (d-1)^p - 2 d^p with p = a + 1. For large d the second
    // difference is summed as 2 d^p sum_m C(p, 2m) d^{-2m} to avoid cancellation.
    static double corrector_weight(double alpha, std::size_t d) {
        const double p = alpha + 1.0;
        const double dd = static_cast<double>(d);
        if (d == 0)
            return 0.0;
        if (d < 8)
            return std::pow(dd + 1.0, p) + std::pow(dd - 1.0, p) - 2.0 * std::pow(dd, p);
        const double x2 = 1.0 / (dd * dd);
        double coeff = 1.0; // C(p, j)
        double xpow = 1.0;
        double sum = 0.0;
        for (int j = 0; j < 60; j += 2) {
            coeff *= (p - j) / (j + 1.0);
            coeff *= (p - j - 1.0) / (j + 2.0);
            xpow *= x2;
            const double term = coeff * xpow;
            sum += term;
            if (std::fabs(term) <= 1e-18 * std::fabs(sum))
                break;
        }
        return 2.0 * std::pow(dd, p) * sum;
    }

private:
    void extend_weights(std::size_t upto) {
        while (pred_w_.size() <= upto) {
            const std::size_t d = pred_w_.size();
            pred_w_.push_back(predictor_weight(alpha_, d));
            corr_w_.push_back(corrector_weight(alpha_, d));
        }
    }

    double alpha_;
    double h_;
    std::size_t window_;
    double predictor_scale_ = 0.0;
    double corrector_scale_ = 0.0;
    std::vector<std::vector<double>> columns_;
    std::vector<double> pred_w_;
    std::vector<double> corr_w_;
};

namespace detail {

template <VectorField F>
void numeric_jacobian(const F& f, std::span<const double> y, std::span<double> jac) {
    const std::size_t dim = y.size();
    std::vector<double> yp(y.begin(), y.end()), fp(dim), fm(dim);
    for (std::size_t c = 0; c < dim; ++c) {
        const double eps = 1e-7 * std::max(1.0, std::fabs(y[c]));
        yp[c] = y[c] + eps;
        f(std::span<const double>(yp), std::span<double>(fp));
        yp[c] = y[c] - eps;
        f(std::span<const double>(yp), std::span<double>(fm));
        yp[c] = y[c];
        for (std::size_t r = 0; r < dim; ++r)
            jac[r * dim + c] = (fp[r] - fm[r]) / (2.0 * eps);
    }
}

template <VectorField F>
void field_jacobian(const F& f, std::span<const double> y, std::span<double> jac) {
    if constexpr (HasJacobian<F>)
        f.jacobian(y, jac);
    else
        numeric_jacobian(f, y, jac);
}

inline double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v)
        m = std::max(m, std::fabs(x));
    return m;
}

} // namespace detail

// Caputo derivative D^alpha y = f(y), y(0) = y0, on the grid t_k = k dt.
// `sink(step, t, y)` sees t = 0, every record_stride-th step and the final step.
template <VectorField F, class Sink>
void caputo_integrate(const F& f, std::vector<double> y, double alpha, const IntegratorSpec& spec, Sink&& sink) {
    spec.validate();
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw domain_error("caputo_integrate: order must lie in (0, 1]");
    const std::size_t dim = y.size();
    const double h = spec.dt;
    const std::uint64_t steps = detail::grid_steps(spec.t_end, h);
    const std::size_t kept = spec.memory_window > 0 ? std::min<std::uint64_t>(spec.memory_window, steps + 1) : steps + 1;
    if (static_cast<double>(kept) * static_cast<double>(dim) * sizeof(double) >
        static_cast<double>(spec.max_history_bytes))
        throw resource_error("caputo_integrate: fractional history of " + std::to_string(kept) + " steps x " +
                             std::to_string(dim) + " components exceeds max_history_bytes");

    const std::vector<double> y0 = y;
    CaputoHistory hist(dim, alpha, h, static_cast<std::size_t>(steps + 1), spec.memory_window);
    std::vector<double> fy(dim), pred(dim), corr(dim), base(dim), guess(dim), resid(dim), jac(dim * dim);
    const double cp = hist.predictor_scale();
    const double cc = hist.corrector_scale();

    f(std::span<const double>(y), std::span<double>(fy));
    hist.push(fy);
    sink(std::uint64_t{0}, 0.0, std::span<const double>(y));

    // resid = y - base - cc f(y); returns its max norm
    auto residual = [&](std::span<const double> v, std::span<double> out) {
        f(v, std::span<double>(fy));
        for (std::size_t i = 0; i < dim; ++i)
            out[i] = v[i] - base[i] - cc * fy[i];
        return detail::inf_norm(out);
    };

    Eigen::MatrixXd A(dim, dim);
    Eigen::VectorXd rhs(dim);
    for (std::uint64_t s = 0; s < steps; ++s) {
        const double t_next = static_cast<double>(s + 1) * h;
        hist.sums(pred, corr);
        for (std::size_t i = 0; i < dim; ++i) {
            pred[i] = y0[i] + cp * pred[i];
            base[i] = y0[i] + cc * corr[i];
        }

        if (spec.corrector == CorrectorMode::pece) {
            guess = pred;
            for (int sweep = 0; sweep < spec.corrector_sweeps; ++sweep) {
                f(std::span<const double>(guess), std::span<double>(fy));
                for (std::size_t i = 0; i < dim; ++i)
                    guess[i] = base[i] + cc * fy[i];
            }
        } else {
            // Start from whichever of the predictor and the current state fits better.
            const double r_pred = detail::all_finite(pred) ? residual(pred, resid) : INFINITY;
            const double r_prev = residual(y, resid);
            guess = (r_pred < r_prev) ? pred : y;
            bool converged = false;
            for (int it = 0; it < spec.newton_max_iterations; ++it) {
                residual(guess, resid);
                detail::field_jacobian(f, std::span<const double>(guess), std::span<double>(jac));
                for (std::size_t r = 0; r < dim; ++r) {
                    for (std::size_t c = 0; c < dim; ++c)
                        A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = -cc * jac[r * dim + c];
                    A(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) += 1.0;
                    rhs(static_cast<Eigen::Index>(r)) = -resid[r];
                }
                const Eigen::VectorXd delta = A.partialPivLu().solve(rhs);
                double dmax = 0.0;
                for (std::size_t i = 0; i < dim; ++i) {
                    guess[i] += delta(static_cast<Eigen::Index>(i));
                    dmax = std::max(dmax, std::fabs(delta(static_cast<Eigen::Index>(i))));
                }
                if (!detail::all_finite(guess))
                    break;
                if (dmax <= spec.newton_tolerance * (1.0 + detail::inf_norm(guess))) {
                    converged = true;
                    break;
                }
            }
            if (!converged)
                throw integration_error("caputo corrector: Newton iteration did not converge at t = " +
                                            std::to_string(t_next),
                                        t_next - h, y);
        }

        if (!detail::all_finite(guess))
            throw integration_error("non-finite state after step at t = " + std::to_string(t_next) +
                                        " (blow-up, invalid parameters or step too large for PECE)",
                                    t_next - h, y);
        y = guess;
        f(std::span<const double>(y), std::span<double>(fy));
        hist.push(fy);
        if ((s + 1) % static_cast<std::uint64_t>(spec.record_stride) == 0 || s + 1 == steps)
            sink(s + 1, t_next, std::span<const double>(y));
    }
}

// Classical integration of the HHW network.
inline Trajectory integrate_classical(const ModelParams& p, const NetworkState& y0, const IntegratorSpec& spec) {
    p.validate();
    if (y0.memristive() || y0.neurons() != static_cast<std::size_t>(p.n))
        throw dimension_error("integrate_classical: initial state does not match the classical network");
    if (spec.kind == IntegratorKind::caputo_pc)
        throw config_error("kind", "integrate_classical needs classical_fixed or classical_adaptive");
    Trajectory traj;
    traj.meta = {ModelKind::classical, y0.neurons(), spec.kind, spec.dt, std::nullopt};
    auto sink = [&](std::uint64_t, double t, std::span<const double> y) { traj.push(t, y); };
    const ClassicalField field{p};
    std::vector<double> y(y0.flat().begin(), y0.flat().end());
    if (spec.kind == IntegratorKind::classical_fixed)
        rk4_integrate(field, std::move(y), spec, sink);
    else
        dopri_integrate(field, std::move(y), spec, sink);
    return traj;
}

// Fractional integration of the memristive network; the order is p.alpha.
inline Trajectory integrate_caputo(const MemristiveParams& p, const NetworkState& y0, const IntegratorSpec& spec) {
    p.validate();
    if (!y0.memristive() || y0.neurons() != static_cast<std::size_t>(p.base.n))
        throw dimension_error("integrate_caputo: initial state does not match the memristive network");
    if (spec.kind != IntegratorKind::caputo_pc)
        throw config_error("kind", "integrate_caputo needs caputo_pc");
    Trajectory traj;
    traj.meta = {ModelKind::memristive, y0.neurons(), spec.kind, spec.dt, p.alpha};
    auto sink = [&](std::uint64_t, double t, std::span<const double> y) { traj.push(t, y); };
    std::vector<double> y(y0.flat().begin(), y0.flat().end());
    caputo_integrate(MemristiveField{p}, std::move(y), p.alpha, spec, sink);
    return traj;
}

} // namespace hhw
