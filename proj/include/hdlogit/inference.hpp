#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "hdlogit/estimators.hpp"
#include "hdlogit/prob.hpp"

namespace hdlogit {

enum class RegionKind { cr_d, cr_i, cr_ds, naive };

inline const char* region_kind_name(RegionKind k) {
    switch (k) {
        case RegionKind::cr_d: return "CR_D";
        case RegionKind::cr_i: return "CR_I";
        case RegionKind::cr_ds: return "CR_DS";
        case RegionKind::naive: return "naive";
    }
    return "?";
}

// Confidence region as a union of disjoint closed intervals (a single
// interval for the Wald-style kinds; possibly several, or none, for the
// criterion sublevel set CR_I).
struct ConfidenceRegion {
    RegionKind kind = RegionKind::cr_d;
    double level = 0.95;
    std::vector<std::pair<double, double>> intervals;
    bool empty_warning = false;

    bool covers(double alpha) const {
        for (const auto& [lo, hi] : intervals) {
            if (alpha >= lo && alpha <= hi) return true;
        }
        return false;
    }
};

// Build the (1 - xi) region.  Wald kinds need only the inference result;
// CR_I additionally needs the criterion profile, whose sublevel set
// {alpha in A : n L_n(alpha) <= chi^2_1(1 - xi)} is traced on the stored
// grid and sharpened by bisection at each boundary crossing.
inline ConfidenceRegion build_region(const InferenceResult& result,
                                     const CriterionProfile* profile, RegionKind kind,
                                     double xi = 0.05) {
    if (!(xi > 0.0 && xi <= 0.5)) {
        throw InvalidInputError("build_region: xi must lie in (0, 0.5]");
    }
    ConfidenceRegion region;
    region.kind = kind;
    region.level = 1.0 - xi;

    if (kind != RegionKind::cr_i) {
        const double half = std::sqrt(result.sigma_sq / static_cast<double>(result.n_used)) *
                            normal_quantile(1.0 - 0.5 * xi);
        region.intervals.emplace_back(result.alpha_check - half, result.alpha_check + half);
        return region;
    }

    if (profile == nullptr || !profile->ln || profile->evaluations.empty()) {
        throw InvalidInputError("build_region: CR_I requires a criterion profile");
    }
    const double threshold = chi2_1_quantile(1.0 - xi) / static_cast<double>(result.n_used);
    const auto& evals = profile->evaluations;
    const auto inside = [&](double value) { return value <= threshold; };

    // Bisect the crossing between an outside point and an inside point.
    const auto crossing = [&](double out_a, double in_a) {
        double a = out_a, b = in_a;
        while (std::abs(b - a) > 1e-8) {
            const double mid = 0.5 * (a + b);
            if (inside(profile->ln(mid))) {
                b = mid;
            } else {
                a = mid;
            }
        }
        return b;  // inside endpoint
    };

    const int m = static_cast<int>(evals.size());
    int g = 0;
    while (g < m) {
        if (!inside(evals[g].second)) {
            ++g;
            continue;
        }
        const int run_start = g;
        while (g + 1 < m && inside(evals[g + 1].second)) ++g;
        const double lo = run_start == 0
                              ? evals.front().first
                              : crossing(evals[run_start - 1].first, evals[run_start].first);
        const double hi =
            g == m - 1 ? evals.back().first : crossing(evals[g + 1].first, evals[g].first);
        region.intervals.emplace_back(lo, hi);
        ++g;
    }
    if (region.intervals.empty()) region.empty_warning = true;
    return region;
}

struct TestOutcome {
    bool reject = false;
    double statistic = 0.0;  // Wald n (alpha0 - alpha_check)^2 / sigma^2, or n L_n(alpha0)
};

// Test H0: alpha = alpha0 at level xi.  Rejection is defined as alpha0 not
// being covered by the corresponding region, so test and region are dual by
// construction (an empty CR_I rejects every alpha0).
inline TestOutcome test_alpha(const InferenceResult& result, const CriterionProfile* profile,
                              RegionKind kind, double alpha0, double xi = 0.05) {
    const ConfidenceRegion region = build_region(result, profile, kind, xi);
    TestOutcome out;
    out.reject = !region.covers(alpha0);
    if (kind == RegionKind::cr_i) {
        out.statistic = static_cast<double>(result.n_used) * profile->ln(alpha0);
    } else {
        const double dev = result.alpha_check - alpha0;
        out.statistic = static_cast<double>(result.n_used) * dev * dev / result.sigma_sq;
    }
    return out;
}

}  // namespace hdlogit
