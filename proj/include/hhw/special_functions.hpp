#pragma once

// Gamma and Mittag-Leffler functions on the real line, plus the algebraic
// fractional Gronwall envelope.

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "hhw/error.hpp"

namespace hhw {

struct MLConfig {
    double series_tolerance = 1e-12;
    int max_terms = 500;
    // For z < -radius the asymptotic expansion is tried before the series.
    double asymptotic_switch_radius = 10.0;

    void validate() const {
        if (!(series_tolerance > 0.0))
            throw domain_error("MLConfig: series_tolerance must be positive");
        if (max_terms < 16)
            throw domain_error("MLConfig: max_terms must be at least 16");
        if (!(asymptotic_switch_radius > 0.0))
            throw domain_error("MLConfig: asymptotic_switch_radius must be positive");
    }
};

namespace detail {

inline std::string fmt_arg(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// Largest x with a finite double Gamma(x).
inline constexpr double gamma_overflow_arg = 171.62437695630271;

// sin(pi x) with exact zeros at the integers.
inline double sin_pi(double x) {
    const double r = std::round(x);
    const double s = std::sin(std::numbers::pi * (x - r));
    return std::fmod(r, 2.0) == 0.0 ? s : -s;
}

} // namespace detail

// Gamma(x) for x > 0.
inline double gamma(double x) {
    if (!(x > 0.0))
        throw domain_error("gamma: argument must be positive, got " + detail::fmt_arg(x));
    if (x > detail::gamma_overflow_arg)
        throw overflow_error("gamma: result overflows for x = " + detail::fmt_arg(x));
    return std::tgamma(x);
}

// 1/Gamma(x) on the whole real line: zero at the poles, reflection
// Gamma(x) Gamma(1-x) = pi / sin(pi x) for negative non-integer x.
inline double reciprocal_gamma(double x) {
    if (x > 0.0) {
        if (x > detail::gamma_overflow_arg)
            return 0.0;
        return 1.0 / std::tgamma(x);
    }
    if (x == std::round(x))
        return 0.0;
    const double g = 1.0 - x;
    if (g > detail::gamma_overflow_arg)
        return std::numeric_limits<double>::infinity() * detail::sin_pi(x);
    return detail::sin_pi(x) * std::tgamma(g) / std::numbers::pi;
}

namespace detail {

struct SeriesSum {
    long double value = 0.0L;
    long double largest_term = 0.0L;
    bool converged = false;
};

// sum_{k>=0} z^k / Gamma(k a + b) accumulated in extended precision.
inline SeriesSum ml_series(double a, double b, double z, const MLConfig& cfg) {
    SeriesSum s;
    const long double zl = z;
    long double zpow = 1.0L;
    long double prev = std::numeric_limits<long double>::infinity();
    for (int k = 0; k < cfg.max_terms; ++k) {
        const long double g = std::tgamma(static_cast<long double>(k) * a + b);
        const long double term = zpow / g;
        if (!std::isfinite(term))
            return s;
        s.value += term;
        const long double mag = std::fabs(term);
        s.largest_term = std::max(s.largest_term, mag);
        const long double floor = std::max<long double>(cfg.series_tolerance * 1e-2L, std::fabs(s.value) * LDBL_EPSILON);
        if (k > 0 && mag <= floor && mag <= prev) {
            s.converged = true;
            return s;
        }
        prev = mag;
        zpow *= zl;
    }
    return s;
}

// Rounding error carried into the series sum by cancellation.
inline double series_rounding(const SeriesSum& s) {
    return static_cast<double>(s.largest_term * LDBL_EPSILON * 8.0L);
}

// Same series in 100-digit arithmetic, for arguments where the long double sum
// cancels. Returns nothing when even that precision is not enough.
inline std::optional<double> ml_series_wide(double a, double b, double z, const MLConfig& cfg,
                                            long double largest_term) {
    using wide = boost::multiprecision::cpp_bin_float_100;
    if (!(largest_term > 0.0L) || !std::isfinite(largest_term) ||
        std::log10(largest_term / cfg.series_tolerance) > 90.0L)
        return std::nullopt;
    const wide zw = z;
    const wide aw = a;
    const wide bw = b;
    wide zpow = 1;
    wide sum = 0;
    wide prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cfg.max_terms; ++k) {
        const wide term = zpow / boost::math::tgamma(aw * k + bw);
        sum += term;
        const wide mag = abs(term);
        if (k > 0 && mag <= cfg.series_tolerance * 1e-2 && mag <= prev)
            return sum.convert_to<double>();
        prev = mag;
        zpow *= zw;
    }
    return std::nullopt;
}

struct AsymptoticSum {
    double value = 0.0;
    double error = std::numeric_limits<double>::infinity();
};

// E_{a,b}(z) ~ -sum_{k=1}^{K} z^{-k} / Gamma(b - a k), z -> -inf, 0 < a < 1.
// The error estimate is the first omitted nonzero term.
inline AsymptoticSum ml_asymptotic(double a, double b, double z, int terms = 10) {
    AsymptoticSum r;
    double zinv_pow = 1.0;
    double sum = 0.0;
    for (int k = 1; k <= terms; ++k) {
        zinv_pow /= z;
        sum -= zinv_pow * reciprocal_gamma(b - a * k);
    }
    double tail = 0.0;
    for (int k = terms + 1; k <= terms + 4 && tail == 0.0; ++k) {
        zinv_pow /= z;
        tail = std::fabs(zinv_pow * reciprocal_gamma(b - a * k));
    }
    r.value = sum;
    r.error = tail;
    if (!std::isfinite(sum))
        r.error = std::numeric_limits<double>::infinity();
    return r;
}

// E_a(-x) for 0 < a < 1, x > 0, from the completely monotone representation
//   E_a(-x) = sin(a pi)/pi * int_0^inf e^{-u} u^{a-1} / (x (s^2 + 2 s cos(a pi) + 1)) du,
// with s = u^a / x. Split at the denominator minimum when a > 1/2.
inline double ml_negative_quadrature(double a, double x, double tol) {
    const double sn = std::sin(std::numbers::pi * a);
    const double cs = std::cos(std::numbers::pi * a);
    auto integrand = [a, x, cs](double u) {
        if (u <= 0.0)
            return 0.0;
        const double s = std::pow(u, a) / x;
        const double den = x * (s * s + 2.0 * s * cs + 1.0);
        return std::exp(-u) * std::pow(u, a - 1.0) / den;
    };
    const double rel = std::max(tol * 1e-2, 1e-15);
    double err = 0.0;
    double total = 0.0;
    boost::math::quadrature::exp_sinh<double> tail_rule;
    if (cs < 0.0) {
        const double split = std::pow(-cs * x, 1.0 / a);
        boost::math::quadrature::tanh_sinh<double> head_rule;
        double e1 = 0.0;
        double e2 = 0.0;
        total = head_rule.integrate(integrand, 0.0, split, rel, &e1);
        auto shifted = [&](double v) { return integrand(split + v); };
        total += tail_rule.integrate(shifted, rel, &e2);
        err = e1 + e2;
    } else {
        total = tail_rule.integrate(integrand, rel, &err);
    }
    const double value = sn / std::numbers::pi * total;
    if (!std::isfinite(value) || std::fabs(sn / std::numbers::pi * err) > tol)
        throw convergence_error("mittag_leffler: quadrature did not converge for alpha = " +
                                fmt_arg(a) + ", z = " + fmt_arg(-x));
    return value;
}

inline void check_order(double alpha, const char* who) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw domain_error(std::string(who) + ": order must lie in (0, 1], got " + fmt_arg(alpha));
}

} // namespace detail

// One-parameter Mittag-Leffler function E_alpha(z) for real z.
inline double mittag_leffler(double alpha, double z, const MLConfig& cfg = {}) {
    detail::check_order(alpha, "mittag_leffler");
    cfg.validate();
    if (z == 0.0)
        return 1.0;
    if (alpha == 1.0)
        return std::exp(z);
    const double tol = cfg.series_tolerance;

    if (z > 0.0) {
        const auto s = detail::ml_series(alpha, 1.0, z, cfg);
        if (!s.converged)
            throw convergence_error("mittag_leffler: series did not converge within max_terms for z = " +
                                    detail::fmt_arg(z));
        return static_cast<double>(s.value);
    }

    if (-z <= cfg.asymptotic_switch_radius) {
        const auto s = detail::ml_series(alpha, 1.0, z, cfg);
        if (s.converged && detail::series_rounding(s) <= tol)
            return static_cast<double>(s.value);
    } else {
        const auto a = detail::ml_asymptotic(alpha, 1.0, z);
        if (a.error <= tol)
            return a.value;
    }
    return detail::ml_negative_quadrature(alpha, -z, tol);
}

// Two-parameter Mittag-Leffler function E_{alpha1,alpha2}(z) for real z.
inline double mittag_leffler2(double alpha1, double alpha2, double z, const MLConfig& cfg = {}) {
    detail::check_order(alpha1, "mittag_leffler2");
    if (!(alpha2 > 0.0))
        throw domain_error("mittag_leffler2: second parameter must be positive, got " +
                           detail::fmt_arg(alpha2));
    cfg.validate();
    if (alpha2 == 1.0)
        return mittag_leffler(alpha1, z, cfg);
    if (z == 0.0)
        return reciprocal_gamma(alpha2);
    const double tol = cfg.series_tolerance;

    if (z > 0.0 || -z <= cfg.asymptotic_switch_radius) {
        const auto s = detail::ml_series(alpha1, alpha2, z, cfg);
        if (s.converged && (z > 0.0 || detail::series_rounding(s) <= tol))
            return static_cast<double>(s.value);
        if (s.converged)
            if (auto w = detail::ml_series_wide(alpha1, alpha2, z, cfg, s.largest_term))
                return *w;
    } else {
        auto a = detail::ml_asymptotic(alpha1, alpha2, z);
        if (alpha1 == 1.0) {
            // On the negative axis E_{1,b} also carries e^z z^{1-b}, real only for integer b.
            if (alpha2 != std::round(alpha2))
                a.error = std::numeric_limits<double>::infinity();
            else
                a.value += std::exp(z) * std::pow(z, 1.0 - alpha2);
        }
        if (a.error <= tol)
            return a.value;
        const auto s = detail::ml_series(alpha1, alpha2, z, cfg);
        if (s.converged && detail::series_rounding(s) <= tol)
            return static_cast<double>(s.value);
        if (s.converged)
            if (auto w = detail::ml_series_wide(alpha1, alpha2, z, cfg, s.largest_term))
                return *w;
    }
    throw convergence_error("mittag_leffler2: no convergent evaluation for alpha1 = " +
                            detail::fmt_arg(alpha1) + ", alpha2 = " + detail::fmt_arg(alpha2) +
                            ", z = " + detail::fmt_arg(z) + " (raise max_terms or switch radius)");
}

// Algebraic upper bound for nonnegative solutions of D^alpha x <= p - q x:
//   x(t) < x0 Gamma(1+alpha) / (Gamma(1+alpha) + q t^alpha) + (p/q) Gamma(alpha).
inline double fractional_gronwall_envelope(double x0, double p, double q, double alpha, double t) {
    if (!(q > 0.0))
        throw domain_error("fractional_gronwall_envelope: q must be positive, got " + detail::fmt_arg(q));
    if (!(alpha > 0.0 && alpha < 1.0))
        throw domain_error("fractional_gronwall_envelope: alpha must lie in (0, 1), got " +
                           detail::fmt_arg(alpha));
    if (x0 < 0.0 || p < 0.0 || t < 0.0)
        throw domain_error("fractional_gronwall_envelope: x0, p and t must be nonnegative");
    const double g1 = gamma(1.0 + alpha);
    return x0 * g1 / (g1 + q * std::pow(t, alpha)) + p / q * gamma(alpha);
}

} // namespace hhw
