#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "hdlogit/logistic_refit.hpp"

namespace hdlogit {

// Plug-in penalty for the auxiliary (instrument) equation; four times the
// outcome-equation penalty:
//   lambda2 = 1.1 * 2 * sqrt(n) Phi^{-1}(1 - gamma_scale / max(n, p log n)).
inline double penalty_lambda2(Eigen::Index n, Eigen::Index p, double gamma_scale = 0.05) {
    return 4.0 * penalty_lambda1(n, p, gamma_scale);
}

enum class LoadingStage { initial, refined };

// Diagonal penalty loadings Gamma for the weighted Lasso of fd on fx.
struct LoadingsVector {
    Eigen::VectorXd gamma;  // one entry per kept column
    LoadingStage stage = LoadingStage::initial;
};

// Initial loadings use the crude residual proxy (fd centered); refined
// loadings plug in the pilot residual v_hat.  Any loading below 1e-12 means
// the column cannot be penalized sensibly and is reported as an error.
inline LoadingsVector compute_loadings(const StandardizedData& data, const Eigen::VectorXd& f,
                                       const Eigen::VectorXd* v_hat = nullptr) {
    const Eigen::Index n = data.n();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (f.size() != n) throw InvalidInputError("compute_loadings: weight size mismatch");

    Eigen::VectorXd envelope(n);  // squared per-observation residual factor
    LoadingsVector out;
    if (v_hat == nullptr) {
        const Eigen::VectorXd fd = f.cwiseProduct(data.d);
        envelope = (fd.array() - fd.mean()).square();
        out.stage = LoadingStage::initial;
    } else {
        if (v_hat->size() != n) throw InvalidInputError("compute_loadings: residual size mismatch");
        envelope = v_hat->cwiseAbs2();
        out.stage = LoadingStage::refined;
    }

    const Eigen::VectorXd f2env = f.cwiseAbs2().cwiseProduct(envelope);
    out.gamma.resize(data.p());
    for (Eigen::Index j = 0; j < data.p(); ++j) {
        out.gamma(j) = std::sqrt(data.X.col(j).cwiseAbs2().dot(f2env) * inv_n);
        if (out.gamma(j) < 1e-12) {
            throw DegenerateLoadingError(
                "compute_loadings: penalty loading collapsed at column " + std::to_string(j),
                static_cast<int>(j));
        }
    }
    return out;
}

struct WeightedLassoOptions {
    int max_cycles = 10000;
    double coord_tol = 1e-11;
    double kkt_tol = 1e-9;
};

struct WeightedLassoFit {
    Eigen::VectorXd theta_hat;    // Lasso solution (kept columns)
    Eigen::VectorXd theta_tilde;  // post-Lasso refit (or theta_hat in lasso_only mode)
    std::vector<int> support;     // nonzero theta_hat entries
    std::vector<int> dropped_collinear;  // support columns dropped in the refit
    double lambda2 = 0.0;
    LoadingsVector loadings;      // loadings used for the final Lasso
    Eigen::VectorXd v_hat;        // f (d - x' theta_tilde)
    Eigen::VectorXd z_hat;        // v_hat / sigma
    double kkt_violation = 0.0;
    int cycles = 0;
};

// Weighted Lasso  min_theta E_n[(f d - f x' theta)^2] + (lambda/n) |Gamma theta|_1
// by cyclic coordinate descent.  The quadratic is exact (weights fixed), so
// no majorization refresh is needed; termination is by stationarity (KKT)
// at the true gradient, |E_n[f^2 x_j (d - x'theta)]| vs lambda Gamma_jj / (2n).
inline Eigen::VectorXd fit_weighted_lasso(const StandardizedData& data, const Eigen::VectorXd& f,
                                          double lambda2, const LoadingsVector& loadings,
                                          double* kkt_out = nullptr, int* cycles_out = nullptr,
                                          const WeightedLassoOptions& opts = {}) {
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (lambda2 < 0.0) throw InvalidInputError("fit_weighted_lasso: lambda must be >= 0");
    if (loadings.gamma.size() != p) throw InvalidInputError("fit_weighted_lasso: loadings size mismatch");

    const Eigen::VectorXd f2 = f.cwiseAbs2();
    Eigen::VectorXd a(p);       // curvature E_n[f^2 x_j^2]
    for (Eigen::Index j = 0; j < p; ++j) a(j) = data.X.col(j).cwiseAbs2().dot(f2) * inv_n;

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = data.d;  // residual d - x' theta
    Eigen::VectorXd f2r = f2.cwiseProduct(r);

    double kkt = std::numeric_limits<double>::infinity();
    int cycle = 0;
    for (; cycle < opts.max_cycles; ++cycle) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (a(j) <= 0.0) continue;
            const double g = data.X.col(j).dot(f2r) * inv_n;
            const double z = g + a(j) * theta(j);
            const bool penalize = static_cast<int>(j) != data.intercept;
            const double thr = penalize ? 0.5 * lambda2 * inv_n * loadings.gamma(j) : 0.0;
            const double updated = detail::soft_threshold(z, thr) / a(j);
            const double delta = updated - theta(j);
            if (delta != 0.0) {
                r.noalias() -= delta * data.X.col(j);
                f2r.noalias() -= delta * f2.cwiseProduct(data.X.col(j));
                theta(j) = updated;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta < opts.coord_tol) {
            kkt = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double grad = data.X.col(j).dot(f2r) * inv_n;
                const bool penalize = static_cast<int>(j) != data.intercept;
                const double thr = penalize ? 0.5 * lambda2 * inv_n * loadings.gamma(j) : 0.0;
                double viol;
                if (theta(j) != 0.0) {
                    viol = std::abs(grad - thr * (theta(j) > 0.0 ? 1.0 : -1.0));
                } else {
                    viol = std::max(0.0, std::abs(grad) - thr);
                }
                kkt = std::max(kkt, viol);
            }
            if (kkt <= opts.kkt_tol) {
                ++cycle;
                break;
            }
        }
    }
    if (kkt_out != nullptr) *kkt_out = kkt;
    if (cycles_out != nullptr) *cycles_out = cycle;
    if (!(kkt <= opts.kkt_tol)) {
        throw ConvergenceError("fit_weighted_lasso: no KKT certificate after " +
                                   std::to_string(opts.max_cycles) + " cycles",
                               kkt);
    }
    return theta;
}

// Weighted least squares of d on the selected columns (weights f^2).
// Collinear columns are detected and dropped by a greedy pivoted Cholesky
// on the Gram matrix (relative pivot tolerance 1e-10); the kept system is
// then solved with one pass of iterative refinement so the fitted residual
// satisfies the normal equations to near machine precision.
inline Eigen::VectorXd weighted_post_lasso(const StandardizedData& data, const Eigen::VectorXd& f,
                                           const std::vector<int>& support,
                                           std::vector<int>* dropped_out = nullptr) {
    const Eigen::Index n = data.n();
    const Eigen::Index k = static_cast<Eigen::Index>(support.size());
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(data.p());
    if (dropped_out != nullptr) dropped_out->clear();
    if (k == 0) return theta;

    Eigen::MatrixXd FX(n, k);
    for (Eigen::Index c = 0; c < k; ++c) FX.col(c) = f.cwiseProduct(data.X.col(support[c]));
    const Eigen::MatrixXd A = FX.transpose() * FX * inv_n;
    const Eigen::VectorXd b = FX.transpose() * f.cwiseProduct(data.d) * inv_n;

    // Greedy pivoted Cholesky to pick a well-conditioned column subset.
    Eigen::VectorXd diag = A.diagonal();
    const Eigen::VectorXd diag0 = diag;
    Eigen::MatrixXd L(k, k);
    std::vector<Eigen::Index> order;
    std::vector<bool> selected(k, false);
    for (Eigen::Index t = 0; t < k; ++t) {
        Eigen::Index pivot = -1;
        double best = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (!selected[j] && diag(j) > best) {
                best = diag(j);
                pivot = j;
            }
        }
        if (pivot < 0 || best <= 1e-10 * diag0(pivot)) break;  // rest are collinear
        selected[pivot] = true;
        const double root = std::sqrt(best);
        for (Eigen::Index j = 0; j < k; ++j) {
            if (selected[j]) continue;
            double dot = A(j, pivot);
            for (std::size_t s = 0; s < order.size(); ++s) dot -= L(j, order[s]) * L(pivot, order[s]);
            L(j, pivot) = dot / root;
            diag(j) -= L(j, pivot) * L(j, pivot);
        }
        L(pivot, pivot) = root;
        order.push_back(pivot);
    }

    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < k; ++j) {
        if (selected[j]) {
            kept.push_back(j);
        } else if (dropped_out != nullptr) {
            dropped_out->push_back(support[j]);
        }
    }

    const Eigen::Index rank = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd Ak(rank, rank);
    Eigen::VectorXd bk(rank);
    for (Eigen::Index r = 0; r < rank; ++r) {
        bk(r) = b(kept[r]);
        for (Eigen::Index c = 0; c < rank; ++c) Ak(r, c) = A(kept[r], kept[c]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Ak);
    if (llt.info() != Eigen::Success) {
        throw RankError("weighted_post_lasso: Gram factorization failed after pivoting");
    }
    Eigen::VectorXd sol = llt.solve(bk);
    sol += llt.solve(bk - Ak * sol);  // refinement pass
    for (Eigen::Index r = 0; r < rank; ++r) theta(support[kept[r]]) = sol(r);
    return theta;
}

enum class Step2Mode { post_lasso, lasso_only };

struct Step2Options {
    Step2Mode mode = Step2Mode::post_lasso;
    double lambda2 = -1.0;  // <0: use penalty_lambda2(n, p)
    double gamma = 0.05;
    WeightedLassoOptions lasso;
};

// Step 2: estimate theta_0 in  f d = f x' theta_0 + v  by the weighted Lasso
// with data-driven loadings (one refinement pass), then form the residual
// v_hat and the instrument z_hat = v_hat / sigma.
inline WeightedLassoFit run_step2(const StandardizedData& data, const ObservationWeights& weights,
                                  const Step2Options& opts = {}) {
    WeightedLassoFit fit;
    fit.lambda2 = opts.lambda2 >= 0.0
                      ? opts.lambda2
                      : penalty_lambda2(data.n(), std::max<Eigen::Index>(data.p(), 1), opts.gamma);
    const Eigen::VectorXd& f = weights.f;

    if (data.p() == 0) {
        fit.theta_hat = fit.theta_tilde = Eigen::VectorXd::Zero(0);
    } else {
        // Pilot: crude loadings -> Lasso -> post-Lasso -> residual.
        const LoadingsVector gamma0 = compute_loadings(data, f);
        const Eigen::VectorXd theta0 = fit_weighted_lasso(data, f, fit.lambda2, gamma0,
                                                          nullptr, nullptr, opts.lasso);
        std::vector<int> support0;
        for (Eigen::Index j = 0; j < data.p(); ++j) {
            if (theta0(j) != 0.0) support0.push_back(static_cast<int>(j));
        }
        const Eigen::VectorXd pilot_tilde = weighted_post_lasso(data, f, support0);
        const Eigen::VectorXd pilot_v = f.cwiseProduct(data.d - data.X * pilot_tilde);

        // Refined loadings -> final Lasso (single refinement pass).
        fit.loadings = compute_loadings(data, f, &pilot_v);
        fit.theta_hat = fit_weighted_lasso(data, f, fit.lambda2, fit.loadings,
                                           &fit.kkt_violation, &fit.cycles, opts.lasso);
        for (Eigen::Index j = 0; j < data.p(); ++j) {
            if (fit.theta_hat(j) != 0.0) fit.support.push_back(static_cast<int>(j));
        }
        fit.theta_tilde = opts.mode == Step2Mode::post_lasso
                              ? weighted_post_lasso(data, f, fit.support, &fit.dropped_collinear)
                              : fit.theta_hat;
    }

    Eigen::VectorXd resid = data.d;
    if (data.p() > 0) resid.noalias() -= data.X * fit.theta_tilde;
    fit.v_hat = f.cwiseProduct(resid);
    fit.z_hat = fit.v_hat.cwiseQuotient(weights.sigma_sq.cwiseSqrt());
    return fit;
}

}  // namespace hdlogit
