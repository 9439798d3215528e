#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "hdlogit/logistic_lasso.hpp"

namespace hdlogit {

struct RefitLogisticFit {
    double alpha_tilde = 0.0;
    Eigen::VectorXd beta_tilde;          // over kept columns; zero off support
    std::vector<int> support;            // kept-column indices refit on
    Eigen::VectorXd index;               // d alpha + x' beta at the optimum
    Eigen::MatrixXd fisher_information;  // E_n[w zt zt'], zt = (d, x_S')'
    double gradient_norm = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct RefitOptions {
    int max_iter = 100;
    double grad_tol = 1e-8;
    int max_halvings = 50;
    double coef_cap = 30.0;  // on standardized columns; beyond this the MLE
                             // is effectively at infinity (separation)
};

// Unpenalized logistic MLE of y on (d, x_S) by Newton's method with step
// halving.  S may be empty (logistic of y on d alone).
inline RefitLogisticFit fit_logistic_refit(const StandardizedData& data,
                                           const std::vector<int>& support,
                                           const RefitOptions& opts = {}) {
    const Eigen::Index n = data.n();
    const Eigen::Index k = static_cast<Eigen::Index>(support.size());
    const Eigen::Index m = k + 1;
    const double inv_n = 1.0 / static_cast<double>(n);
    if (m >= n) throw InvalidInputError("fit_logistic_refit: support too large for n");
    for (int j : support) {
        if (j < 0 || j >= data.p()) throw InvalidInputError("fit_logistic_refit: support index out of range");
    }

    Eigen::MatrixXd Z(n, m);
    Z.col(0) = data.d;
    for (Eigen::Index c = 0; c < k; ++c) Z.col(c + 1) = data.X.col(support[c]);

    Eigen::VectorXd eta = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd index = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd mu(n), w(n), grad(m);
    Eigen::MatrixXd H(m, m);

    double nll = neg_loglik_index(data.y, index);
    RefitLogisticFit fit;

    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const LinkEval g = logistic_link(index(i));
            mu(i) = g.value;
            w(i) = g.deriv;
        }
        grad.noalias() = Z.transpose() * (mu - data.y) * inv_n;
        fit.gradient_norm = grad.lpNorm<Eigen::Infinity>();
        if (fit.gradient_norm <= opts.grad_tol) {
            fit.converged = true;
            break;
        }

        H.noalias() = Z.transpose() * w.asDiagonal() * Z * inv_n;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
        if (ldlt.info() != Eigen::Success ||
            ldlt.vectorD().minCoeff() < 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
            throw RankError("fit_logistic_refit: singular Fisher information (collinear selected columns)");
        }
        const Eigen::VectorXd step = ldlt.solve(grad);

        double t = 1.0;
        int halvings = 0;
        double new_nll;
        Eigen::VectorXd eta_try, index_try;
        for (;; ++halvings) {
            eta_try = eta - t * step;
            index_try.noalias() = Z * eta_try;
            new_nll = neg_loglik_index(data.y, index_try);
            if (new_nll <= nll + 1e-14) break;
            if (halvings >= opts.max_halvings) {
                throw SeparationError("fit_logistic_refit: step halving failed to reduce the deviance");
            }
            t *= 0.5;
        }
        eta = eta_try;
        index = index_try;
        nll = new_nll;
        if (eta.lpNorm<Eigen::Infinity>() > opts.coef_cap) {
            throw SeparationError("fit_logistic_refit: coefficients diverging (quasi-separated data)");
        }
    }
    if (!fit.converged) {
        throw ConvergenceError("fit_logistic_refit: Newton failed to converge", fit.gradient_norm);
    }

    // Fisher information at the optimum (weights at the converged index).
    for (Eigen::Index i = 0; i < n; ++i) w(i) = logistic_link(index(i)).deriv;
    fit.fisher_information.noalias() = Z.transpose() * w.asDiagonal() * Z * inv_n;

    fit.alpha_tilde = eta(0);
    fit.beta_tilde = Eigen::VectorXd::Zero(data.p());
    for (Eigen::Index c = 0; c < k; ++c) fit.beta_tilde(support[c]) = eta(c + 1);
    fit.support = support;
    fit.index = index;
    fit.iterations = iter;
    return fit;
}

// Per-observation quantities entering steps 2-3, all evaluated at a step-1
// index estimate: conditional variance w_i = G'(index_i) (equal to
// sigma^2_i = G(1-G) for the logistic link), and the weight f_i =
// w_i / sigma_i = sqrt(w_i).  When testing H_0: alpha_0 = 0 the conditional
// variance does not depend on d, which licenses the simpler choice f_i = 1
// in the auxiliary regression; h0_mode selects that.
struct ObservationWeights {
    Eigen::VectorXd w;         // G'(index)
    Eigen::VectorXd sigma_sq;  // G(index) (1 - G(index))
    Eigen::VectorXd f;         // w / sqrt(sigma_sq)
    bool h0_mode = false;
};

inline ObservationWeights step1_weights(const Eigen::VectorXd& index, bool h0_mode = false) {
    const Eigen::Index n = index.size();
    ObservationWeights out;
    out.w.resize(n);
    out.sigma_sq.resize(n);
    out.f.resize(n);
    out.h0_mode = h0_mode;
    for (Eigen::Index i = 0; i < n; ++i) {
        const LinkEval g = logistic_link(index(i));
        out.w(i) = g.deriv;
        out.sigma_sq(i) = g.value * (1.0 - g.value);
        out.f(i) = h0_mode ? 1.0 : out.w(i) / std::sqrt(out.sigma_sq(i));
    }
    return out;
}

enum class PenaltyRule { plug_in, hoeffding };

struct Step1Options {
    PenaltyRule penalty_rule = PenaltyRule::plug_in;
    double gamma = 0.05;              // tail probability budget in the rule
    bool penalize_treatment = true;
    bool h0_mode = false;
    LassoLogisticOptions lasso;
    RefitOptions refit;
};

struct Step1Result {
    PenalizedLogisticFit lasso;
    RefitLogisticFit refit;
    ObservationWeights weights;
    double lambda1 = 0.0;
};

// Step 1: penalized logistic of y on (d, x), post-selection refit, and the
// weight vectors downstream steps consume.
inline Step1Result run_step1(const StandardizedData& data, const Step1Options& opts = {}) {
    Step1Result out;
    out.lambda1 = opts.penalty_rule == PenaltyRule::plug_in
                      ? penalty_lambda1(data.n(), std::max<Eigen::Index>(data.p(), 1), opts.gamma)
                      : penalty_hoeffding(data.n(), data.p(), opts.gamma);
    LassoLogisticOptions lopts = opts.lasso;
    lopts.penalize_treatment = opts.penalize_treatment;
    out.lasso = fit_lasso_logistic(data, out.lambda1, lopts);
    out.refit = fit_logistic_refit(data, out.lasso.support, opts.refit);
    out.weights = step1_weights(out.refit.index, opts.h0_mode);
    return out;
}

}  // namespace hdlogit
