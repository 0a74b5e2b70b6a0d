#ifndef DCMERGE_NORMAL_HPP
#define DCMERGE_NORMAL_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dcmerge {

/// Standard normal density.
inline double normal_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal CDF through erfc, which keeps full relative accuracy in the lower tail.
inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/*
 * Standard normal quantile.
 *
 * Acklam's rational approximation (relative error about 1.15e-9) followed by
 * one Halley step against normal_cdf. After the refinement the result agrees
 * with the exact quantile to roughly machine precision over (1e-300, 1 - 1e-16).
 */
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::domain_error("normal_quantile: probability outside [0, 1]");
    }
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement; the upper half is refined through symmetry so the
    // residual is computed where the CDF is small and well conditioned.
    const bool upper = x > 0.0;
    const double target = upper ? 1.0 - p : p;
    double y = upper ? -x : x;
    for (int it = 0; it < 2; ++it) {
        const double e = normal_cdf(y) - target;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * y * y);
        y = y - u / (1.0 + 0.5 * y * u);
    }
    return upper ? -y : y;
}

/// Two-sided critical value z_{(1+level)/2}.
inline double normal_two_sided_z(double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("confidence level must lie in (0, 1)");
    return normal_quantile(0.5 * (1.0 + level));
}

}  // namespace dcmerge

#endif  // DCMERGE_NORMAL_HPP
