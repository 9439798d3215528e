#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hdlogit/inference.hpp"

namespace hdlogit {

struct AnalysisConfig {
    std::vector<Method> methods = {Method::optimal_iv, Method::double_selection, Method::naive};
    double xi = 0.05;
    double interval_constant = 1.0;  // search interval half-width is C / log n
    int grid_points = 401;
    bool h0_mode = false;
    bool penalize_treatment = true;
    PenaltyRule penalty_rule = PenaltyRule::plug_in;
    double gamma = 0.05;
    Step2Mode step2_mode = Step2Mode::post_lasso;
    double lambda1_override = -1.0;  // <0: plug-in rule
    double lambda2_override = -1.0;
};

struct MethodOutput {
    InferenceResult result;                       // original treatment scale
    ConfidenceRegion region;                      // the method's primary region
    std::optional<CriterionProfile> profile;      // optimal_iv only
    std::optional<ConfidenceRegion> region_cr_i;  // optimal_iv only
};

struct AnalysisOutput {
    std::map<Method, MethodOutput> methods;
    std::map<Method, std::string> failures;  // method -> error message
    std::optional<double> one_step;          // original scale, when requested
    double d_scale = 1.0;
    double lambda1 = 0.0, lambda2 = 0.0;
    std::vector<int> support1, support2;  // original column indices
    std::vector<int> dropped_columns;     // zero-variance columns
    int n = 0, p_used = 0, p_orig = 0;
};

namespace detail {

inline InferenceResult to_original_scale(InferenceResult res, double d_scale) {
    res.alpha_check /= d_scale;
    res.sigma1_sq /= d_scale * d_scale;
    res.sigma2_sq /= d_scale * d_scale;
    res.sigma_sq /= d_scale * d_scale;
    return res;
}

inline CriterionProfile to_original_scale(const CriterionProfile& prof, double d_scale) {
    CriterionProfile out;
    out.lo = prof.lo / d_scale;
    out.hi = prof.hi / d_scale;
    out.center = prof.center / d_scale;
    out.minimizer = prof.minimizer / d_scale;
    out.root = prof.root / d_scale;
    out.evaluations.reserve(prof.evaluations.size());
    for (const auto& [a, v] : prof.evaluations) out.evaluations.emplace_back(a / d_scale, v);
    auto inner = prof.ln;
    out.ln = [inner, d_scale](double a) { return inner(a * d_scale); };
    return out;
}

}  // namespace detail

// Full pipeline on a raw dataset: standardize, run steps 1-3 once (steps 1-2
// shared across the requested methods), and report everything on the
// original treatment scale.  Numerical failures in a step are recorded
// against the methods that needed it rather than thrown, so partial results
// survive (precondition violations still throw).
inline AnalysisOutput analyze(const Dataset& dataset, const AnalysisConfig& cfg = {}) {
    if (!(cfg.xi > 0.0 && cfg.xi <= 0.5)) throw InvalidInputError("analyze: xi must lie in (0, 0.5]");
    AnalysisOutput out;
    const StandardizedData sdata = standardize(dataset);
    out.d_scale = sdata.d_scale;
    out.n = static_cast<int>(sdata.n());
    out.p_used = static_cast<int>(sdata.p());
    out.p_orig = static_cast<int>(sdata.p_orig);
    out.dropped_columns = sdata.dropped;

    const auto wants = [&](Method m) {
        return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
    };
    const bool need_step2 =
        wants(Method::optimal_iv) || wants(Method::double_selection) || wants(Method::one_step);

    const auto fail_all = [&](const std::string& why) {
        for (Method m : cfg.methods) out.failures.emplace(m, why);
    };

    Step1Options s1opts;
    s1opts.penalty_rule = cfg.penalty_rule;
    s1opts.gamma = cfg.gamma;
    s1opts.penalize_treatment = cfg.penalize_treatment;
    s1opts.h0_mode = cfg.h0_mode;

    Step1Result step1;
    try {
        if (cfg.lambda1_override >= 0.0) {
            step1.lambda1 = cfg.lambda1_override;
            LassoLogisticOptions lopts = s1opts.lasso;
            lopts.penalize_treatment = cfg.penalize_treatment;
            step1.lasso = fit_lasso_logistic(sdata, step1.lambda1, lopts);
            step1.refit = fit_logistic_refit(sdata, step1.lasso.support, s1opts.refit);
            step1.weights = step1_weights(step1.refit.index, cfg.h0_mode);
        } else {
            step1 = run_step1(sdata, s1opts);
        }
    } catch (const std::runtime_error& e) {
        fail_all(std::string("step 1: ") + e.what());
        return out;
    }
    out.lambda1 = step1.lambda1;
    for (int j : step1.lasso.support) out.support1.push_back(sdata.kept[j]);

    WeightedLassoFit step2;
    bool step2_ok = !need_step2;
    if (need_step2) {
        Step2Options s2opts;
        s2opts.mode = cfg.step2_mode;
        s2opts.gamma = cfg.gamma;
        s2opts.lambda2 = cfg.lambda2_override;
        try {
            step2 = run_step2(sdata, step1.weights, s2opts);
            step2_ok = true;
            out.lambda2 = step2.lambda2;
            for (int j : step2.support) out.support2.push_back(sdata.kept[j]);
        } catch (const std::runtime_error& e) {
            const std::string why = std::string("step 2: ") + e.what();
            for (Method m :
                 {Method::optimal_iv, Method::double_selection, Method::one_step}) {
                if (wants(m)) out.failures.emplace(m, why);
            }
        }
    }

    for (Method m : cfg.methods) {
        if (out.failures.count(m) != 0) continue;
        try {
            switch (m) {
                case Method::optimal_iv: {
                    OptimalIvOptions oopts;
                    oopts.interval_constant = cfg.interval_constant;
                    oopts.grid_points = cfg.grid_points;
                    OptimalIvOutput fit = fit_optimal_iv(sdata, step1, step2, oopts);
                    MethodOutput mo;
                    mo.result = detail::to_original_scale(fit.result, sdata.d_scale);
                    mo.profile = detail::to_original_scale(fit.profile, sdata.d_scale);
                    mo.region = build_region(mo.result, nullptr, RegionKind::cr_d, cfg.xi);
                    mo.region_cr_i = build_region(mo.result, &*mo.profile, RegionKind::cr_i, cfg.xi);
                    out.methods.emplace(m, std::move(mo));
                    break;
                }
                case Method::double_selection: {
                    MethodOutput mo;
                    mo.result = detail::to_original_scale(fit_double_selection(sdata, step1, step2),
                                                          sdata.d_scale);
                    mo.region = build_region(mo.result, nullptr, RegionKind::cr_ds, cfg.xi);
                    out.methods.emplace(m, std::move(mo));
                    break;
                }
                case Method::naive: {
                    MethodOutput mo;
                    mo.result = detail::to_original_scale(fit_naive_post_selection(sdata, step1),
                                                          sdata.d_scale);
                    mo.region = build_region(mo.result, nullptr, RegionKind::naive, cfg.xi);
                    out.methods.emplace(m, std::move(mo));
                    break;
                }
                case Method::one_step: {
                    const InstrumentSet iv = make_optimal_instrument(step1, step2);
                    out.one_step = one_step_estimator(sdata, step1, iv) / sdata.d_scale;
                    break;
                }
            }
        } catch (const std::runtime_error& e) {
            out.failures.emplace(m, e.what());
        }
    }
    return out;
}

}  // namespace hdlogit
