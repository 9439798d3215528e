#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "hdlogit/weighted_lasso.hpp"

namespace hdlogit {

enum class Method { optimal_iv, double_selection, naive, one_step };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::optimal_iv: return "optimal-iv";
        case Method::double_selection: return "double-selection";
        case Method::naive: return "naive";
        case Method::one_step: return "one-step";
    }
    return "?";
}

enum class InstrumentKind { optimal, suboptimal_unit_f };

struct InstrumentSet {
    Eigen::VectorXd z_hat;
    Eigen::VectorXd w_hat;
    InstrumentKind kind = InstrumentKind::optimal;
};

struct Diagnostics {
    int support1 = 0;          // step-1 selected controls
    int support2 = 0;          // step-2 selected controls
    int union_size = 0;        // double-selection refit support
    bool boundary_hit = false; // criterion minimizer pinned at the interval edge
    double degenerate_w_frac = 0.0;
    std::vector<std::string> warnings;
};

struct InferenceResult {
    Method method = Method::optimal_iv;
    double alpha_check = 0.0;
    double sigma1_sq = 0.0;  // sandwich variance estimate
    double sigma2_sq = 0.0;  // information-style variance estimate
    double sigma_sq = 0.0;   // max of the two, used for intervals
    int n_used = 0;
    Diagnostics diagnostics;
};

// Self-normalized criterion and everything needed to rebuild it at any
// alpha: the sublevel-set region and the test statistic both re-evaluate it.
struct CriterionProfile {
    double lo = 0.0, hi = 0.0;  // search interval A
    double center = 0.0;        // step-1 alpha_tilde (interval midpoint)
    double minimizer = 0.0;
    double root = std::numeric_limits<double>::quiet_NaN();  // score sign change
    std::vector<std::pair<double, double>> evaluations;      // grid (alpha, L_n)
    std::function<double(double)> ln;                        // L_n at any alpha
};

namespace detail {

// Self-normalized criterion with a caller-supplied mean function; the
// generic version exists so the estimating-equation algebra can be checked
// against a link whose linearization is exact.
template <class MeanFn>
double criterion_ln_with(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                         const Eigen::VectorXd& xb, const Eigen::VectorXd& z, double alpha,
                         MeanFn mean_fn) {
    const Eigen::Index n = y.size();
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = y(i) - mean_fn(d(i) * alpha + xb(i));
        const double rz = r * z(i);
        num += rz;
        den += rz * rz;
    }
    num /= static_cast<double>(n);
    den /= static_cast<double>(n);
    if (den < 1e-14) {
        throw DegenerateInstrumentError("criterion_ln: self-normalizing denominator underflow");
    }
    return num * num / den;
}

template <class MeanFn>
double score_with(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::VectorXd& xb,
                  const Eigen::VectorXd& z, double alpha, MeanFn mean_fn) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        acc += (y(i) - mean_fn(d(i) * alpha + xb(i))) * z(i);
    }
    return acc / static_cast<double>(y.size());
}

// One Newton step on the estimating equation E_n[(y - mean(d a + xb)) z] = 0
// from the starting point alpha0, with slope E_n[deriv * d * z].
template <class MeanFn, class DerivFn>
double one_step_with(const Eigen::VectorXd& y, const Eigen::VectorXd& d, const Eigen::VectorXd& xb,
                     const Eigen::VectorXd& z, double alpha0, MeanFn mean_fn, DerivFn deriv_fn) {
    const Eigen::Index n = y.size();
    double score = 0.0, slope = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double idx = d(i) * alpha0 + xb(i);
        score += (y(i) - mean_fn(idx)) * z(i);
        slope += deriv_fn(idx) * d(i) * z(i);
    }
    score /= static_cast<double>(n);
    slope /= static_cast<double>(n);
    if (std::abs(slope) < 1e-10) {
        throw WeakInstrumentError("one_step_estimator: instrument uncorrelated with treatment");
    }
    return alpha0 + score / slope;
}

inline double inverse_11(const Eigen::MatrixXd& fisher) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(fisher);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
        throw RankError("variance: Fisher information not positive definite");
    }
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(fisher.rows());
    e0(0) = 1.0;
    return ldlt.solve(e0)(0);
}

}  // namespace detail

// L_n(alpha) = |E_n[(y - G(d alpha + x' beta)) z]|^2 / E_n[(y - G(..))^2 z^2].
inline double criterion_ln(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                           const Eigen::VectorXd& xb, const Eigen::VectorXd& z, double alpha) {
    return detail::criterion_ln_with(y, d, xb, z, alpha,
                                     [](double t) { return logistic_link(t).value; });
}

struct OptimalIvOptions {
    double interval_constant = 1.0;  // half-width of A is this over log n
    int grid_points = 401;
    double golden_tol = 1e-10;
    double bisect_tol = 1e-12;
};

struct OptimalIvOutput {
    InferenceResult result;
    CriterionProfile profile;
};

// Step 3, optimal-instrument version: minimize the self-normalized criterion
// over A = [alpha_tilde +- C / log n] by grid search plus golden-section
// refinement, cross-checked against a sign change of the estimating equation.
inline OptimalIvOutput fit_optimal_iv(const StandardizedData& data, const Step1Result& step1,
                                      const WeightedLassoFit& step2,
                                      const OptimalIvOptions& opts = {}) {
    const Eigen::Index n = data.n();
    if (opts.grid_points < 3) throw InvalidInputError("fit_optimal_iv: need at least 3 grid points");

    const double alpha_tilde = step1.refit.alpha_tilde;
    const double half = opts.interval_constant / std::log(static_cast<double>(n));

    // Shared payload so the profile's evaluator stays valid after return.
    struct Payload {
        Eigen::VectorXd y, d, xb, z;
    };
    auto pay = std::make_shared<Payload>();
    pay->y = data.y;
    pay->d = data.d;
    pay->xb = step1.refit.index - data.d * alpha_tilde;  // x' beta_tilde
    pay->z = step2.z_hat;

    OptimalIvOutput out;
    CriterionProfile& prof = out.profile;
    prof.lo = alpha_tilde - half;
    prof.hi = alpha_tilde + half;
    prof.center = alpha_tilde;
    prof.ln = [pay](double a) { return criterion_ln(pay->y, pay->d, pay->xb, pay->z, a); };

    const int m = opts.grid_points;
    const double spacing = (prof.hi - prof.lo) / static_cast<double>(m - 1);
    prof.evaluations.reserve(m);
    std::vector<double> scores(m);
    int best = 0;
    for (int g = 0; g < m; ++g) {
        const double a = prof.lo + spacing * g;
        prof.evaluations.emplace_back(a, prof.ln(a));
        scores[g] = detail::score_with(pay->y, pay->d, pay->xb, pay->z, a,
                                       [](double t) { return logistic_link(t).value; });
        if (prof.evaluations[g].second < prof.evaluations[best].second) best = g;
    }

    // Golden-section polish between the neighbors of the best grid point.
    double a = prof.evaluations[std::max(best - 1, 0)].first;
    double b = prof.evaluations[std::min(best + 1, m - 1)].first;
    double best_alpha = prof.evaluations[best].first;
    double best_val = prof.evaluations[best].second;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = prof.ln(x1), f2 = prof.ln(x2);
    while (b - a > opts.golden_tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = prof.ln(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = prof.ln(x2);
        }
        if (f1 < best_val) { best_val = f1; best_alpha = x1; }
        if (f2 < best_val) { best_val = f2; best_alpha = x2; }
    }
    prof.minimizer = best_alpha;

    // Cross-check: bisect the estimating equation where its sign flips,
    // preferring the sign change nearest the criterion minimizer.
    int flip = -1;
    double flip_dist = std::numeric_limits<double>::infinity();
    for (int g = 0; g + 1 < m; ++g) {
        if ((scores[g] > 0.0) != (scores[g + 1] > 0.0)) {
            const double mid = prof.lo + spacing * (g + 0.5);
            const double dist = std::abs(mid - best_alpha);
            if (dist < flip_dist) {
                flip = g;
                flip_dist = dist;
            }
        }
    }
    if (flip >= 0) {
        double la = prof.lo + spacing * flip, lb = la + spacing;
        double sa = scores[flip];
        while (lb - la > opts.bisect_tol) {
            const double mid = 0.5 * (la + lb);
            const double sm = detail::score_with(pay->y, pay->d, pay->xb, pay->z, mid,
                                                 [](double t) { return logistic_link(t).value; });
            if ((sm > 0.0) == (sa > 0.0)) {
                la = mid;
                sa = sm;
            } else {
                lb = mid;
            }
        }
        prof.root = 0.5 * (la + lb);
    }

    InferenceResult& res = out.result;
    res.method = Method::optimal_iv;
    res.alpha_check = best_alpha;
    res.n_used = static_cast<int>(n);
    res.diagnostics.support1 = static_cast<int>(step1.lasso.support.size());
    res.diagnostics.support2 = static_cast<int>(step2.support.size());
    if (std::min(best_alpha - prof.lo, prof.hi - best_alpha) < spacing) {
        res.diagnostics.boundary_hit = true;
        res.diagnostics.warnings.push_back(
            "criterion minimizer at the edge of the search interval; enlarge the interval constant");
    }

    // Sandwich variance (Sigma_1) and optimal-design variance (Sigma_2).
    const double slope = step1.weights.w.cwiseProduct(data.d).dot(pay->z) / static_cast<double>(n);
    if (std::abs(slope) < 1e-10) {
        throw WeakInstrumentError("fit_optimal_iv: instrument uncorrelated with treatment");
    }
    double bread = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = data.y(i) - logistic_link(data.d(i) * best_alpha + pay->xb(i)).value;
        bread += r * r * pay->z(i) * pay->z(i);
    }
    bread /= static_cast<double>(n);
    res.sigma1_sq = bread / (slope * slope);

    const double ev2 = step2.v_hat.squaredNorm() / static_cast<double>(n);
    if (ev2 < 1e-14) {
        throw WeakInstrumentError("fit_optimal_iv: residual instrument has no variation");
    }
    res.sigma2_sq = 1.0 / ev2;
    res.sigma_sq = std::max(res.sigma1_sq, res.sigma2_sq);
    return out;
}

// Step 3, double-selection version: refit the logistic MLE of y on d and the
// union of the step-1 and step-2 selections.
inline InferenceResult fit_double_selection(const StandardizedData& data, const Step1Result& step1,
                                            const WeightedLassoFit& step2,
                                            const RefitOptions& ropts = {}) {
    const Eigen::Index n = data.n();
    std::vector<int> unioned;
    std::set_union(step1.lasso.support.begin(), step1.lasso.support.end(), step2.support.begin(),
                   step2.support.end(), std::back_inserter(unioned));

    const RefitLogisticFit rf = fit_logistic_refit(data, unioned, ropts);

    InferenceResult res;
    res.method = Method::double_selection;
    res.alpha_check = rf.alpha_tilde;
    res.n_used = static_cast<int>(n);
    res.diagnostics.support1 = static_cast<int>(step1.lasso.support.size());
    res.diagnostics.support2 = static_cast<int>(step2.support.size());
    res.diagnostics.union_size = static_cast<int>(unioned.size());

    // Sandwich pieces with the refit weights; observations whose conditional
    // variance has numerically vanished are dropped from the slope term.
    const Eigen::VectorXd& z = step2.z_hat;
    double slope = 0.0, bread = 0.0;
    int degenerate = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const LinkEval g = logistic_link(rf.index(i));
        if (g.deriv < 1e-12) {
            ++degenerate;
        } else {
            slope += g.deriv * data.d(i) * z(i);
        }
        const double r = data.y(i) - g.value;
        bread += r * r * z(i) * z(i);
    }
    slope /= static_cast<double>(n);
    bread /= static_cast<double>(n);
    res.diagnostics.degenerate_w_frac = static_cast<double>(degenerate) / static_cast<double>(n);
    if (res.diagnostics.degenerate_w_frac > 0.10) {
        res.diagnostics.warnings.push_back(
            "more than 10% of observations have numerically degenerate conditional variance");
    }
    if (std::abs(slope) < 1e-10) {
        throw WeakInstrumentError("fit_double_selection: instrument uncorrelated with treatment");
    }
    res.sigma1_sq = bread / (slope * slope);
    res.sigma2_sq = detail::inverse_11(rf.fisher_information);
    res.sigma_sq = std::max(res.sigma1_sq, res.sigma2_sq);
    return res;
}

// Baseline with no orthogonalization: the step-1 refit coefficient with its
// naive information-matrix standard error.
inline InferenceResult fit_naive_post_selection(const StandardizedData& data,
                                                const Step1Result& step1) {
    InferenceResult res;
    res.method = Method::naive;
    res.alpha_check = step1.refit.alpha_tilde;
    res.n_used = static_cast<int>(data.n());
    res.diagnostics.support1 = static_cast<int>(step1.lasso.support.size());
    res.sigma1_sq = res.sigma2_sq = detail::inverse_11(step1.refit.fisher_information);
    res.sigma_sq = res.sigma1_sq;
    return res;
}

// One Newton correction from the penalized step-1 estimate along the
// instrument direction (cheaper stand-in for the exact criterion minimizer).
inline double one_step_estimator(const StandardizedData& data, const Step1Result& step1,
                                 const InstrumentSet& instrument) {
    Eigen::VectorXd xb = Eigen::VectorXd::Zero(data.n());
    if (data.p() > 0) xb.noalias() = data.X * step1.lasso.beta_hat;
    // Slope uses the step-1 refit weights (the pipeline's w-hat), matching
    // the slope of the exact estimating equation at the truth.
    const Eigen::Index n = data.n();
    double score = 0.0, slope = 0.0;
    const double alpha0 = step1.lasso.alpha_hat;
    for (Eigen::Index i = 0; i < n; ++i) {
        score += (data.y(i) - logistic_link(data.d(i) * alpha0 + xb(i)).value) * instrument.z_hat(i);
        slope += step1.weights.w(i) * data.d(i) * instrument.z_hat(i);
    }
    score /= static_cast<double>(n);
    slope /= static_cast<double>(n);
    if (std::abs(slope) < 1e-10) {
        throw WeakInstrumentError("one_step_estimator: instrument uncorrelated with treatment");
    }
    return alpha0 + score / slope;
}

inline InstrumentSet make_optimal_instrument(const Step1Result& step1,
                                             const WeightedLassoFit& step2) {
    return {step2.z_hat, step1.weights.w, InstrumentKind::optimal};
}

// Valid-but-suboptimal alternative: project d on x with unit weights (plain
// Lasso plus refit) and divide the residual by w-hat, so the orthogonality
// E_n[w z x_S] = 0 still holds but the variance bound is not attained.
inline InstrumentSet suboptimal_instrument(const StandardizedData& data,
                                           const ObservationWeights& weights,
                                           const Step2Options& opts = {}) {
    ObservationWeights unit;
    unit.f = Eigen::VectorXd::Ones(data.n());
    unit.w = weights.w;
    // run_step2 divides the residual by sqrt(sigma_sq); squaring w here makes
    // that division produce z = (d - x' theta) / w.
    unit.sigma_sq = weights.w.cwiseAbs2();
    const WeightedLassoFit fit = run_step2(data, unit, opts);
    return {fit.z_hat, weights.w, InstrumentKind::suboptimal_unit_f};
}

}  // namespace hdlogit
