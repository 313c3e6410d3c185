#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace uqbench {

inline double standard_normal_pdf(double z) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

// Phi(z) through the complementary error function; erfc keeps the lower
// tail accurate where 1 - erf would cancel.
inline double standard_normal_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

namespace detail {

// Rational initial guess for the normal quantile (Beasley-Springer/Moro
// style central fit with a log-tail fit); refined by the caller.
inline double normal_quantile_estimate(double p) {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.42) {
        const double r = q * q;
        return q * (((-25.44106049637 * r + 41.39119773534) * r - 18.61500062529) * r +
                    2.50662823884) /
               ((((3.13082909833 * r - 21.06224101826) * r + 23.08336743743) * r -
                 8.47351093090) * r + 1.0);
    }
    double r = p < 0.5 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double z = (((2.32121276858 * r + 4.85014127135) * r - 2.29796479134) * r - 2.78718931138) /
               ((1.63706781897 * r + 3.54388924762) * r + 1.0) * -1.0;
    // crude but monotone tail start; Newton below does the real work
    z = r * 1.41421356237309505 - (std::log(r) + 0.8) / (r * 1.41421356237);
    return p < 0.5 ? -z : z;
}

}  // namespace detail

// Inverse of standard_normal_cdf, computed as safeguarded Newton iteration
// on the CDF itself so the pair is consistent to ~1e-12.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("normal_quantile: p must be in (0,1), got " +
                                    std::to_string(p));
    if (p == 0.5) return 0.0;

    double lo = -40.0, hi = 40.0;
    double z = detail::normal_quantile_estimate(p);
    if (!(z > lo && z < hi)) z = 0.0;
    for (int iter = 0; iter < 60; ++iter) {
        const double err = standard_normal_cdf(z) - p;
        if (err > 0.0) hi = z; else lo = z;
        const double dens = standard_normal_pdf(z);
        double step = dens > 0.0 ? err / dens : 0.0;
        double next = z - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisect when Newton escapes
        if (std::fabs(next - z) < 1e-14 * (1.0 + std::fabs(z))) return next;
        z = next;
    }
    return z;
}

namespace detail {

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the regularized incomplete beta, modified Lentz.
inline double incomplete_beta_cf(double x, double a, double b) {
    const double tiny = 1e-300;
    const double eps = 1e-15;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < eps) break;
    }
    return h;
}

inline double regularized_incomplete_beta(double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument("regularized_incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * incomplete_beta_cf(x, a, b) / a;
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(a, b)) *
                     incomplete_beta_cf(1.0 - x, b, a) / b;
}

}  // namespace detail

inline double student_t_pdf(double x, double df) {
    const double v = df;
    return std::exp(std::lgamma((v + 1.0) / 2.0) - std::lgamma(v / 2.0)) /
           std::sqrt(v * 3.14159265358979323846) *
           std::pow(1.0 + x * x / v, -(v + 1.0) / 2.0);
}

inline double student_t_cdf(double x, double df) {
    if (!(df > 0.0)) throw std::invalid_argument("student_t_cdf: df must be positive");
    if (x == 0.0) return 0.5;
    const double ib = detail::regularized_incomplete_beta(df / (x * x + df), df / 2.0, 0.5);
    return x > 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

// p-quantile of Student's t with df degrees of freedom. Safeguarded Newton
// on the CDF from the normal-quantile start; the heavy-tailed small-df
// cases fall back to bisection inside the maintained bracket.
inline double student_t_quantile(std::int64_t df, double p) {
    if (df < 1) throw std::invalid_argument("student_t_quantile: df must be >= 1");
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("student_t_quantile: p must be in (0,1), got " +
                                    std::to_string(p));
    if (p == 0.5) return 0.0;
    if (p < 0.5) return -student_t_quantile(df, 1.0 - p);

    const double v = static_cast<double>(df);
    double z = normal_quantile(p);
    // Cornish-Fisher start; exact enough at huge df that Newton converges fast.
    double x = z + (z * z * z + z) / (4.0 * v);
    double lo = 0.0;
    double hi = x;
    while (student_t_cdf(hi, v) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) break;
    }
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 100; ++iter) {
        const double err = student_t_cdf(x, v) - p;
        if (err > 0.0) hi = x; else lo = x;
        const double dens = student_t_pdf(x, v);
        double next = dens > 0.0 ? x - err / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) < 1e-12 * (1.0 + std::fabs(x))) return next;
        x = next;
    }
    return x;
}

}  // namespace uqbench
