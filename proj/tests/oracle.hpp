#pragma once

// Reference evaluations written independently of the library: plain scalar
// arithmetic, long double, and closed forms. Nothing here includes hhw headers.

#include <cmath>
#include <vector>

namespace oracle {

struct Wilson {
    double a0 = 17.8, a1 = 47.6, a2 = 33.8;
    double gK = 26.0, ENa = 0.5, EK = -0.95, H = 1.0, tau = 4.2;
    double lambda = 1.0, J = 0.0;
};

// Term-by-term sum of the six positive constants.
inline long double Q(const Wilson& w) {
    long double t1 = (long double)w.gK * (1.0L + w.H);
    long double t2 = std::fabs((long double)w.a1 * w.ENa);
    long double t3 = (long double)w.gK * std::fabs((long double)w.lambda) * w.H * std::fabs((long double)w.EK);
    long double t4 = 6.0L * w.a1 * w.a1 / w.a2;
    long double t5 = 6.0L * w.a2 / ((long double)w.ENa * w.ENa);
    long double glh = (long double)w.gK * w.lambda * w.H;
    long double t6 = 6.0L / w.a2 * glh * glh;
    return t1 + t2 + t3 + t4 + t5 + t6;
}

inline long double P_star(const Wilson& w, int n) {
    long double base = w.a0 + (long double)w.lambda * w.lambda * w.H * w.H / (2.0L * w.tau);
    long double v = (Q(w) - base) / n;
    return v > 0 ? v : 0.0L;
}

// Absorbing-ball constant, one neuron's contribution multiplied out by n.
inline long double G(const Wilson& w, int n) {
    long double root = std::sqrt(1.0L + (long double)w.H * w.H);
    long double inner1 = std::fabs((long double)w.ENa) * w.a0 + w.gK * root * std::fabs((long double)w.EK) + std::fabs((long double)w.J);
    long double s1 = inner1 * inner1 / ((long double)w.a0 * w.a0);
    long double inner2 = std::fabs((long double)w.ENa * w.a1) + w.gK * root;
    long double s2 = inner2 * inner2 / ((long double)w.a0 * w.a2);
    long double c = (long double)w.a1 + (long double)w.ENa * w.a2;
    long double half = w.a2 / 2.0L;
    long double s3 = 2.0L * c * c * c * c / ((long double)w.a0 * half * half * half);
    return 1.0L + n * (long double)w.H * w.H + n * (s1 + s2 + s3);
}

// Right-hand side of one network, written with explicit double loops over j.
inline std::vector<double> hhw_rhs(const Wilson& w, double P, const std::vector<double>& V,
                                   const std::vector<double>& R) {
    const std::size_t n = V.size();
    std::vector<double> out(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = w.a0 + w.a1 * V[i] + w.a2 * V[i] * V[i];
        double coupling = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            coupling += P * (V[j] - V[i]);
        out[i] = -m * (V[i] - w.ENa) - w.gK * R[i] * (V[i] - w.EK) + w.J + coupling;
        double rinf = w.H / (1.0 + std::exp(-w.lambda * (V[i] - w.EK)));
        out[n + i] = (-R[i] + rinf) / w.tau;
    }
    return out;
}

// E_{1/2}(-x) = exp(x^2) erfc(x).
inline long double ml_half_negative(long double x) { return std::exp(x * x) * std::erfc(x); }

// Power series of E_{a,b}(z) summed in long double with a fixed number of terms.
inline long double ml_series(long double a, long double b, long double z, int terms = 10000) {
    long double sum = 0.0L;
    const long double logz = std::log(std::fabs(z));
    for (int k = 0; k < terms; ++k) {
        long double g = a * k + b;
        long double mag = (z == 0.0L) ? (k == 0 ? 1.0L : 0.0L) : std::exp(k * logz - std::lgamma(g));
        if (k == 0 && z != 0.0L)
            mag = 1.0L / std::tgamma(b);
        if (z < 0 && (k % 2 == 1))
            mag = -mag;
        sum += mag;
        if (k > 50 && std::fabs(mag) < 1e-30L)
            break;
    }
    return sum;
}

} // namespace oracle
