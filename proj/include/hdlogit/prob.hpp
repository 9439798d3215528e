#pragma once

#include <cmath>

#include "hdlogit/errors.hpp"

namespace hdlogit {

// Standard normal CDF via the complementary error function (no series of
// our own; erfc is accurate in both tails).
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

// Standard normal quantile: Acklam's rational approximation (~1e-9 relative)
// polished with one Halley step against normal_cdf, giving |Phi(q(p)) - p|
// at the 1e-16 level across (0, 1).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidInputError("normal_quantile: p must lie in (0, 1)");
    }
    // Work in the lower half and reflect: 1 - p is exact for p >= 0.5, and the
    // erfc-based CDF keeps full relative precision in the lower tail, whereas
    // upper-tail evaluation saturates near 1 at ~1e-16 absolute (which would
    // cap quantile accuracy at ~5e-9 for p near 1 - 1e-8).
    if (p > 0.5) return -normal_quantile(1.0 - p);

    static constexpr double a[6] = {
        -3.969683028665376e+01,  2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01,  2.506628277459239e+00};
    static constexpr double b[5] = {
        -5.447609879822406e+01,  1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01};
    static constexpr double c[6] = {
        -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
        -2.549732539343734e+00,  4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {
         7.784695709041462e-03,  3.224671290700398e-01,  2.445134137142996e+00,
         3.754408661907416e+00};
    static constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {  // p_low <= p <= 0.5 after the reflection above
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }

    // Halley refinement; skipped in the extreme tails where exp(x^2/2) would
    // overflow (there the rational approximation already meets the absolute
    // tolerance, since the density is below 1e-250).
    if (std::abs(x) < 37.0) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

// chi^2(1) quantile through the normal quantile: if Z ~ N(0,1) then Z^2 is
// chi^2(1), so F^{-1}(p) = Phi^{-1}((1+p)/2)^2.
inline double chi2_1_quantile(double p) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw InvalidInputError("chi2_1_quantile: p must lie in [0, 1)");
    }
    if (p == 0.0) return 0.0;
    const double z = normal_quantile(0.5 * (1.0 + p));
    return z * z;
}

// chi^2(1) CDF, used when comparing empirical criterion draws against the
// reference law: F(x) = 2 Phi(sqrt(x)) - 1 = erf(sqrt(x/2)).
inline double chi2_1_cdf(double x) {
    if (x <= 0.0) return 0.0;
    return std::erf(std::sqrt(0.5 * x));
}

}  // namespace hdlogit
