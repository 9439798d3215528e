#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "hdlogit/dataset.hpp"
#include "hdlogit/link.hpp"
#include "hdlogit/prob.hpp"

namespace hdlogit {

// Plug-in penalty for the outcome equation:
//   lambda1 = (1.1 / 2) sqrt(n) Phi^{-1}(1 - gamma_scale / max(n, p log n)).
inline double penalty_lambda1(Eigen::Index n, Eigen::Index p, double gamma_scale = 0.05) {
    if (n < 2 || p < 1) throw InvalidInputError("penalty_lambda1: need n >= 2, p >= 1");
    if (!(gamma_scale > 0.0 && gamma_scale < 1.0)) {
        throw InvalidInputError("penalty_lambda1: gamma_scale must lie in (0, 1)");
    }
    const double nn = static_cast<double>(n);
    const double denom = std::max(nn, static_cast<double>(p) * std::log(nn));
    return 0.5 * 1.1 * std::sqrt(nn) * normal_quantile(1.0 - gamma_scale / denom);
}

// Distribution-free alternative from the bounded-score Hoeffding bound:
//   lambda / n = 1.1 sqrt(2 log(2 (p + 1) / gamma) / n).
inline double penalty_hoeffding(Eigen::Index n, Eigen::Index p, double gamma = 0.05) {
    if (n < 1 || p < 0) throw InvalidInputError("penalty_hoeffding: need n >= 1, p >= 0");
    if (!(gamma > 0.0 && gamma < 2.0 * static_cast<double>(p + 1))) {
        throw InvalidInputError("penalty_hoeffding: gamma out of range");
    }
    const double nn = static_cast<double>(n);
    return nn * 1.1 * std::sqrt(2.0 * std::log(2.0 * static_cast<double>(p + 1) / gamma) / nn);
}

// Average logistic negative log-likelihood at (alpha, beta):
//   Lambda = E_n[ log(1 + e^{idx}) - y idx ],  idx_i = d_i alpha + x_i' beta.
inline double neg_loglik_index(const Eigen::VectorXd& y, const Eigen::VectorXd& index) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        acc += log1pexp(index(i)) - y(i) * index(i);
    }
    return acc / static_cast<double>(y.size());
}

inline double neg_loglik(const StandardizedData& data, double alpha, const Eigen::VectorXd& beta) {
    if (beta.size() != data.p()) throw InvalidInputError("neg_loglik: beta size mismatch");
    Eigen::VectorXd index = data.d * alpha;
    if (data.p() > 0) index.noalias() += data.X * beta;
    return neg_loglik_index(data.y, index);
}

struct PenalizedLogisticFit {
    double alpha_hat = 0.0;
    Eigen::VectorXd beta_hat;       // over kept standardized columns
    std::vector<int> support;       // kept-column indices with beta_hat != 0
    double lambda = 0.0;
    double objective = 0.0;         // Lambda + (lambda/n) * l1(penalized coefs)
    double kkt_violation = 0.0;
    int cycles = 0;
};

struct LassoLogisticOptions {
    bool penalize_treatment = true;
    int max_cycles = 10000;
    double coord_tol = 1e-9;   // max coefficient move in a full sweep
    double kkt_tol = 1e-7;     // stationarity certificate at the true gradient
    double weight_floor = 1e-10;
};

namespace detail {

// One column view over the stacked coefficient layout (0 = treatment, then
// the kept control columns).
inline Eigen::Map<const Eigen::VectorXd> stacked_col(const StandardizedData& data, Eigen::Index c) {
    if (c == 0) return {data.d.data(), data.d.size()};
    return {data.X.col(c - 1).data(), data.X.rows()};
}

inline double soft_threshold(double z, double t) {
    const double mag = std::abs(z) - t;
    if (mag <= 0.0) return 0.0;
    return z > 0.0 ? mag : -mag;
}

}  // namespace detail

// l1-penalized logistic regression of y on (d, x) by cyclic coordinate
// descent on the iteratively reweighted quadratic majorization.  Weights and
// working residuals refresh every full sweep; a step-halving safeguard keeps
// the exact penalized objective monotone.  Termination requires both a small
// final sweep and a KKT certificate evaluated at the true gradient.
inline PenalizedLogisticFit fit_lasso_logistic(const StandardizedData& data, double lambda,
                                               const LassoLogisticOptions& opts = {}) {
    if (lambda < 0.0) throw InvalidInputError("fit_lasso_logistic: lambda must be >= 0");
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    const Eigen::Index m = p + 1;  // treatment + controls
    const double inv_n = 1.0 / static_cast<double>(n);
    const double lam_n = lambda * inv_n;

    std::vector<bool> penalized(m, true);
    penalized[0] = opts.penalize_treatment;
    if (data.intercept >= 0) penalized[1 + data.intercept] = false;

    Eigen::VectorXd coef = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd index = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd mu(n), w(n), u(n);

    auto refresh_index = [&] {
        index.noalias() = data.d * coef(0);
        if (p > 0) index.noalias() += data.X * coef.tail(p);
    };
    auto penalty_of = [&](const Eigen::VectorXd& c) {
        double l1 = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (penalized[j]) l1 += std::abs(c(j));
        }
        return lam_n * l1;
    };
    auto objective_of = [&](const Eigen::VectorXd& c) {
        Eigen::VectorXd idx = data.d * c(0);
        if (p > 0) idx.noalias() += data.X * c.tail(p);
        return neg_loglik_index(data.y, idx) + penalty_of(c);
    };

    refresh_index();
    double obj = neg_loglik_index(data.y, index) + penalty_of(coef);

    PenalizedLogisticFit fit;
    fit.lambda = lambda;

    double kkt = std::numeric_limits<double>::infinity();
    int cycle = 0;
    for (; cycle < opts.max_cycles; ++cycle) {
        // Refresh the quadratic model at the current iterate.
        for (Eigen::Index i = 0; i < n; ++i) {
            const LinkEval g = logistic_link(index(i));
            mu(i) = g.value;
            w(i) = std::max(g.deriv, opts.weight_floor);
        }
        u = (data.y - mu).cwiseQuotient(w);  // working residual at the anchor

        const Eigen::VectorXd coef_before = coef;
        double max_delta = 0.0;
        for (Eigen::Index c = 0; c < m; ++c) {
            const auto xc = detail::stacked_col(data, c);
            const double a = w.cwiseProduct(xc.cwiseAbs2()).sum() * inv_n;
            if (a <= 0.0) continue;
            const double g = w.cwiseProduct(xc).dot(u) * inv_n;
            const double z = g + a * coef(c);
            const double updated = penalized[c] ? detail::soft_threshold(z, lam_n) / a : z / a;
            const double delta = updated - coef(c);
            if (delta != 0.0) {
                u.noalias() -= delta * xc;
                coef(c) = updated;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }

        // Exact-objective safeguard: the majorization is not a global bound,
        // so back off toward the sweep's starting point if the sweep rose.
        double new_obj = objective_of(coef);
        for (int h = 0; new_obj > obj + 1e-12 && h < 50; ++h) {
            coef = 0.5 * (coef + coef_before);
            new_obj = objective_of(coef);
            max_delta *= 0.5;
        }
        if (new_obj > obj + 1e-12) {
            coef = coef_before;
            new_obj = obj;
            max_delta = 0.0;
        }
        obj = new_obj;
        refresh_index();

        if (max_delta < opts.coord_tol) {
            // Candidate optimum: certify stationarity with the true gradient.
            kkt = 0.0;
            Eigen::VectorXd resid(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                resid(i) = logistic_link(index(i)).value - data.y(i);
            }
            for (Eigen::Index c = 0; c < m; ++c) {
                const auto xc = detail::stacked_col(data, c);
                const double grad = xc.dot(resid) * inv_n;
                double viol;
                if (!penalized[c]) {
                    viol = std::abs(grad);
                } else if (coef(c) != 0.0) {
                    viol = std::abs(grad + lam_n * (coef(c) > 0.0 ? 1.0 : -1.0));
                } else {
                    viol = std::max(0.0, std::abs(grad) - lam_n);
                }
                kkt = std::max(kkt, viol);
            }
            if (kkt <= opts.kkt_tol) {
                ++cycle;
                break;
            }
        }
    }

    fit.alpha_hat = coef(0);
    fit.beta_hat = coef.tail(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (fit.beta_hat(j) != 0.0) fit.support.push_back(static_cast<int>(j));
    }
    fit.objective = obj;
    fit.kkt_violation = kkt;
    fit.cycles = cycle;

    if (!(kkt <= opts.kkt_tol)) {
        throw ConvergenceError("fit_lasso_logistic: no KKT certificate after " +
                                   std::to_string(opts.max_cycles) + " cycles",
                               kkt);
    }
    return fit;
}

}  // namespace hdlogit
