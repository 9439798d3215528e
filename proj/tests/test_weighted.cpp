// Auxiliary (instrument) equation: penalty loadings, the weighted Lasso
// against closed forms and brute-force search, post-Lasso normal equations,
// and the residual/instrument identities produced by step 2.

#include <catch2/catch_amalgamated.hpp>

#include <hdlogit/rng.hpp>
#include <hdlogit/weighted_lasso.hpp>

#include <cmath>
#include <vector>

using namespace hdlogit;

namespace {

StandardizedData make_std(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                          const Eigen::MatrixXd& X, int intercept = -1) {
    StandardizedData out;
    out.y = y;
    out.d = d;
    out.X = X;
    out.d_scale = 1.0;
    out.col_scale = Eigen::VectorXd::Ones(X.cols());
    for (int j = 0; j < X.cols(); ++j) out.kept.push_back(j);
    out.intercept = intercept;
    out.p_orig = X.cols();
    return out;
}

// d = x' theta0 + noise with a random design; y is irrelevant to step 2 and
// filled with fair coin flips.
StandardizedData projection_instance(Eigen::Index n, Eigen::Index p, std::uint64_t seed,
                                     const Eigen::VectorXd& theta0, double noise_sd = 1.0,
                                     int intercept = -1) {
    RngStream rng(seed, 0);
    Eigen::VectorXd d(n), y(n);
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            X(i, j) = (static_cast<int>(j) == intercept) ? 1.0 : rng.normal();
        }
        d(i) = X.row(i).dot(theta0) + noise_sd * rng.normal();
        y(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    }
    return make_std(y, d, X, intercept);
}

Eigen::VectorXd random_weights(Eigen::Index n, std::uint64_t seed) {
    RngStream rng(seed, 1);
    Eigen::VectorXd f(n);
    for (Eigen::Index i = 0; i < n; ++i) f(i) = 0.2 + 0.8 * rng.uniform();
    return f;
}

double weighted_objective(const StandardizedData& data, const Eigen::VectorXd& f, double lambda2,
                          const LoadingsVector& loadings, const Eigen::VectorXd& theta) {
    const double n = static_cast<double>(data.n());
    const Eigen::VectorXd resid = f.cwiseProduct(data.d - data.X * theta);
    double pen = 0.0;
    for (Eigen::Index j = 0; j < data.p(); ++j) pen += loadings.gamma(j) * std::abs(theta(j));
    return resid.squaredNorm() / n + lambda2 / n * pen;
}

}  // namespace

TEST_CASE("auxiliary penalty is exactly four times the outcome penalty") {
    REQUIRE(penalty_lambda2(200, 251) == 4.0 * penalty_lambda1(200, 251));
    REQUIRE(penalty_lambda2(97, 13, 0.2) == 4.0 * penalty_lambda1(97, 13, 0.2));
}

TEST_CASE("initial loadings on a constant column equal the sd of the weighted treatment") {
    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(2);
    auto data = projection_instance(50, 2, 3, theta0, 1.0, /*intercept=*/0);
    const Eigen::VectorXd f = Eigen::VectorXd::Ones(50);

    auto loadings = compute_loadings(data, f);
    REQUIRE(loadings.stage == LoadingStage::initial);
    // With f = 1 and x_0 = 1 the loading is sqrt(E_n[(d - dbar)^2]).
    const double dbar = data.d.mean();
    const double sd = std::sqrt((data.d.array() - dbar).square().mean());
    REQUIRE(loadings.gamma(0) == Catch::Approx(sd).epsilon(1e-13));
}

TEST_CASE("refined loadings match the explicit second-moment formula") {
    Eigen::VectorXd theta0(3);
    theta0 << 1.0, 0.0, -0.5;
    auto data = projection_instance(40, 3, 7, theta0);
    const Eigen::VectorXd f = random_weights(40, 7);
    Eigen::VectorXd v(40);
    RngStream rng(7, 2);
    for (Eigen::Index i = 0; i < 40; ++i) v(i) = rng.normal();

    auto loadings = compute_loadings(data, f, &v);
    REQUIRE(loadings.stage == LoadingStage::refined);
    for (Eigen::Index j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < 40; ++i) {
            acc += f(i) * f(i) * data.X(i, j) * data.X(i, j) * v(i) * v(i);
        }
        REQUIRE(loadings.gamma(j) == Catch::Approx(std::sqrt(acc / 40.0)).epsilon(1e-12));
    }

    Eigen::VectorXd short_f(10);
    REQUIRE_THROWS_AS(compute_loadings(data, short_f), InvalidInputError);
    Eigen::VectorXd short_v(10);
    REQUIRE_THROWS_AS(compute_loadings(data, f, &short_v), InvalidInputError);
}

TEST_CASE("collapsed loadings are reported with the offending column") {
    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(2);
    auto data = projection_instance(30, 2, 11, theta0);
    const Eigen::VectorXd f = Eigen::VectorXd::Ones(30);
    const Eigen::VectorXd v = Eigen::VectorXd::Zero(30);  // residual proxy collapsed
    try {
        compute_loadings(data, f, &v);
        FAIL("expected DegenerateLoadingError");
    } catch (const DegenerateLoadingError& e) {
        REQUIRE(e.column == 0);
        REQUIRE(std::string(e.what()).find("column 0") != std::string::npos);
    }
}

TEST_CASE("single-column weighted Lasso matches the soft-threshold closed form") {
    Eigen::VectorXd theta0(1);
    theta0 << 0.8;
    auto data = projection_instance(60, 1, 13, theta0, 0.7);
    const Eigen::VectorXd f = random_weights(60, 13);
    auto loadings = compute_loadings(data, f);

    const double n = 60.0;
    const double a = data.X.col(0).cwiseAbs2().dot(f.cwiseAbs2()) / n;
    const double g = data.X.col(0).dot(f.cwiseAbs2().cwiseProduct(data.d)) / n;

    for (double lambda2 : {0.0, 5.0, 40.0, 1e4}) {
        const Eigen::VectorXd theta = fit_weighted_lasso(data, f, lambda2, loadings);
        const double thr = 0.5 * lambda2 / n * loadings.gamma(0);
        const double mag = std::abs(g) - thr;
        const double closed = mag <= 0.0 ? 0.0 : (g > 0.0 ? mag : -mag) / a;
        REQUIRE(theta(0) == Catch::Approx(closed).margin(1e-10));
    }
}

TEST_CASE("weighted Lasso matches brute-force grid refinement, p = 2") {
    Eigen::VectorXd theta0(2);
    theta0 << 1.0, 0.15;
    auto data = projection_instance(45, 2, 17, theta0, 0.8);
    const Eigen::VectorXd f = random_weights(45, 17);
    auto loadings = compute_loadings(data, f);
    const double lambda2 = 12.0;

    double kkt = 0.0;
    const Eigen::VectorXd theta = fit_weighted_lasso(data, f, lambda2, loadings, &kkt);
    REQUIRE(kkt <= 1e-9);

    double c0 = 0.0, c1 = 0.0, half = 3.0;
    double best = std::numeric_limits<double>::infinity(), b0 = 0.0, b1 = 0.0;
    for (int round = 0; round < 8; ++round) {
        for (int i0 = -20; i0 <= 20; ++i0) {
            for (int i1 = -20; i1 <= 20; ++i1) {
                Eigen::VectorXd t(2);
                t << c0 + half * i0 / 20.0, c1 + half * i1 / 20.0;
                const double obj = weighted_objective(data, f, lambda2, loadings, t);
                if (obj < best) {
                    best = obj;
                    b0 = t(0);
                    b1 = t(1);
                }
            }
        }
        c0 = b0;
        c1 = b1;
        half /= 10.0;
    }

    REQUIRE(weighted_objective(data, f, lambda2, loadings, theta) ==
            Catch::Approx(best).margin(1e-10));
    REQUIRE(theta(0) == Catch::Approx(b0).margin(1e-6));
    REQUIRE(theta(1) == Catch::Approx(b1).margin(1e-6));
}

TEST_CASE("weighted Lasso solution is invariant to rescaling the weights") {
    Eigen::VectorXd theta0(4);
    theta0 << 0.9, 0.0, -0.6, 0.0;
    auto data = projection_instance(70, 4, 19, theta0);
    const Eigen::VectorXd f = random_weights(70, 19);
    const double lambda2 = 15.0;

    auto fit_with = [&](const Eigen::VectorXd& weights) {
        auto loadings = compute_loadings(data, weights);
        return fit_weighted_lasso(data, weights, lambda2, loadings);
    };
    const Eigen::VectorXd base = fit_with(f);
    const Eigen::VectorXd scaled = fit_with(Eigen::VectorXd(3.0 * f));
    // Loadings, gradients, and thresholds all pick up the same factor c^2,
    // so the minimizer cannot move.
    REQUIRE((base - scaled).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("post-Lasso refit satisfies the weighted normal equations") {
    Eigen::VectorXd theta0(6);
    theta0 << 1.0, -0.7, 0.0, 0.4, 0.0, 0.0;
    auto data = projection_instance(80, 6, 23, theta0);
    const Eigen::VectorXd f = random_weights(80, 23);

    std::vector<int> support{0, 1, 3, 5};
    std::vector<int> dropped;
    const Eigen::VectorXd theta = weighted_post_lasso(data, f, support, &dropped);
    REQUIRE(dropped.empty());
    REQUIRE(theta(2) == 0.0);
    REQUIRE(theta(4) == 0.0);

    const Eigen::VectorXd resid = data.d - data.X * theta;
    const Eigen::VectorXd f2r = f.cwiseAbs2().cwiseProduct(resid);
    for (int j : support) {
        REQUIRE(std::abs(data.X.col(j).dot(f2r)) / 80.0 <= 1e-10);
    }

    // Empty support: zero coefficients.
    REQUIRE(weighted_post_lasso(data, f, {}).isZero(0.0));
}

TEST_CASE("post-Lasso drops exactly collinear support columns") {
    Eigen::VectorXd theta0(2);
    theta0 << 1.0, 0.0;
    auto base = projection_instance(50, 2, 29, theta0);
    Eigen::MatrixXd X(50, 3);
    X.col(0) = base.X.col(0);
    X.col(1) = base.X.col(1);
    X.col(2) = base.X.col(0);  // duplicate of column 0
    auto data = make_std(base.y, base.d, X);
    const Eigen::VectorXd f = random_weights(50, 29);

    std::vector<int> dropped;
    const Eigen::VectorXd theta = weighted_post_lasso(data, f, {0, 1, 2}, &dropped);
    REQUIRE(dropped.size() == 1);
    // One copy of the duplicated pair carries the coefficient; fitted values
    // still satisfy the normal equations on the kept columns.
    const Eigen::VectorXd resid = data.d - data.X * theta;
    const Eigen::VectorXd f2r = f.cwiseAbs2().cwiseProduct(resid);
    for (int j : {0, 1, 2}) {
        if (j == dropped[0]) continue;
        REQUIRE(std::abs(data.X.col(j).dot(f2r)) / 50.0 <= 1e-10);
    }
}

TEST_CASE("step 2 produces the residual and instrument identities") {
    Eigen::VectorXd theta0(5);
    theta0 << 0.8, 0.0, -0.5, 0.0, 0.3;
    auto data = projection_instance(100, 5, 31, theta0);

    // Weights from a synthetic step-1 index.
    RngStream rng(31, 3);
    Eigen::VectorXd index(100);
    for (Eigen::Index i = 0; i < 100; ++i) index(i) = rng.normal();
    auto weights = step1_weights(index);

    auto fit = run_step2(data, weights);
    REQUIRE(fit.lambda2 == Catch::Approx(penalty_lambda2(100, 5)).epsilon(1e-14));
    REQUIRE(fit.loadings.stage == LoadingStage::refined);
    REQUIRE(fit.kkt_violation <= 1e-9);

    const Eigen::VectorXd resid = data.d - data.X * fit.theta_tilde;
    REQUIRE((fit.v_hat - weights.f.cwiseProduct(resid)).lpNorm<Eigen::Infinity>() < 1e-14);
    // For the logistic link f = sigma, so the self-normalized instrument
    // collapses to the plain projection residual.
    REQUIRE((fit.z_hat - resid).lpNorm<Eigen::Infinity>() < 1e-13);

    // Post-Lasso theta obeys the normal equations on the selected support.
    const Eigen::VectorXd f2r = weights.f.cwiseAbs2().cwiseProduct(resid);
    for (int j : fit.support) {
        if (std::find(fit.dropped_collinear.begin(), fit.dropped_collinear.end(), j) !=
            fit.dropped_collinear.end()) {
            continue;
        }
        REQUIRE(std::abs(data.X.col(j).dot(f2r)) / 100.0 <= 1e-10);
    }

    // lambda override and lasso-only mode.
    Step2Options manual;
    manual.lambda2 = 33.0;
    manual.mode = Step2Mode::lasso_only;
    auto fit2 = run_step2(data, weights, manual);
    REQUIRE(fit2.lambda2 == 33.0);
    REQUIRE((fit2.theta_tilde - fit2.theta_hat).lpNorm<Eigen::Infinity>() == 0.0);

    // h0 weights: f = 1, so v_hat is the raw residual and z_hat rescales it.
    auto h0 = step1_weights(index, /*h0_mode=*/true);
    auto fit0 = run_step2(data, h0);
    const Eigen::VectorXd resid0 = data.d - data.X * fit0.theta_tilde;
    REQUIRE((fit0.v_hat - resid0).lpNorm<Eigen::Infinity>() == 0.0);
    REQUIRE((fit0.z_hat - resid0.cwiseQuotient(h0.sigma_sq.cwiseSqrt()))
                .lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("selected instrument support stays sparse under dense designs") {
    // 20 frozen draws at n = 200, p = 120 with a 5-sparse projection: the
    // data-driven penalty keeps the selected set an order of magnitude
    // smaller than n.
    for (std::uint64_t rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(120);
        for (int j = 0; j < 5; ++j) theta0(j) = 0.8 / (1.0 + j);
        auto data = projection_instance(200, 120, 1000 + rep, theta0);
        RngStream rng(2000 + rep, 4);
        Eigen::VectorXd index(200);
        for (Eigen::Index i = 0; i < 200; ++i) index(i) = 0.8 * rng.normal();
        auto weights = step1_weights(index);
        auto fit = run_step2(data, weights);
        REQUIRE(fit.support.size() <= 40);
    }
}
