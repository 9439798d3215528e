#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>

#include "hdlogit/dataset.hpp"
#include "hdlogit/link.hpp"
#include "hdlogit/rng.hpp"

namespace hdlogit {

// Simulation designs: the sparse declining-coefficient design and the
// approximately sparse quadratic-decay design (all coefficients nonzero).
enum class Design { sparse_decline, approx_quadratic };

inline const char* design_name(Design d) {
    return d == Design::sparse_decline ? "sparse" : "quadratic";
}

inline Design design_from_name(const std::string& s) {
    if (s == "sparse") return Design::sparse_decline;
    if (s == "quadratic") return Design::approx_quadratic;
    throw InvalidInputError("unknown design '" + s + "' (expected sparse|quadratic)");
}

// Coefficient pattern over the p-1 Gaussian coordinates (the intercept
// carries no pattern weight).
inline Eigen::VectorXd design_pattern(Design design, Eigen::Index p, bool treatment_equation) {
    if (p < 1) throw InvalidInputError("design_pattern: need p >= 1");
    Eigen::VectorXd nu = Eigen::VectorXd::Zero(p - 1);
    if (design == Design::sparse_decline) {
        if (treatment_equation) {
            for (Eigen::Index j = 0; j < std::min<Eigen::Index>(10, p - 1); ++j) {
                nu(j) = 1.0 / static_cast<double>(j + 1);
            }
        } else {
            for (Eigen::Index j = 0; j < std::min<Eigen::Index>(5, p - 1); ++j) {
                nu(j) = 1.0 / static_cast<double>(j + 1);
                if (10 + j < p - 1) nu(10 + j) = nu(j);
            }
        }
    } else {
        for (Eigen::Index j = 0; j < p - 1; ++j) {
            const double jj = static_cast<double>(j + 1);
            nu(j) = 1.0 / (jj * jj);
        }
    }
    return nu;
}

inline Eigen::MatrixXd toeplitz_ar1(Eigen::Index dim, double rho) {
    if (!(rho > -1.0 && rho < 1.0)) throw InvalidInputError("toeplitz_ar1: need |rho| < 1");
    Eigen::MatrixXd theta(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            theta(i, j) = std::pow(rho, std::abs(static_cast<double>(i - j)));
        }
    }
    return theta;
}

// Scale c such that the linear signal c * nu' z explains a fraction r2 of
// the variance of a unit-variance-noise equation:
//   r2 = c^2 q / (c^2 q + 1)  =>  c = sqrt(r2 / ((1 - r2) q)),  q = nu' Theta nu.
inline double calibrate_signal(const Eigen::MatrixXd& theta, const Eigen::VectorXd& nu, double r2) {
    if (!(r2 >= 0.0 && r2 < 1.0)) throw InvalidInputError("calibrate_signal: need r2 in [0, 1)");
    if (r2 == 0.0) return 0.0;
    const double q = nu.dot(theta * nu);
    if (q <= 0.0) throw InvalidInputError("calibrate_signal: pattern carries no variance");
    return std::sqrt(r2 / ((1.0 - r2) * q));
}

// Fully calibrated data-generating process:
//   x = (1, z')',  z ~ N(0, Theta),  Theta_ij = rho^|i-j|
//   d = c_d nu_d' z + v,        v ~ N(0, 1)
//   y ~ Bernoulli(G(alpha0 d + c_y nu_y' z))
// The lower Cholesky factor of Theta is computed once and shared.
struct DgpSpec {
    Design design = Design::sparse_decline;
    Eigen::Index n = 200, p = 250;  // p counts columns of x, intercept included
    double alpha0 = 0.0, rho = 0.5, r2d = 0.0, r2y = 0.0;
    double c_d = 0.0, c_y = 0.0;
    Eigen::VectorXd nu_d, nu_y;  // over the p-1 Gaussian coordinates
    std::shared_ptr<const Eigen::MatrixXd> chol;
};

inline DgpSpec make_dgp(Design design, Eigen::Index n, Eigen::Index p, double alpha0, double rho,
                        double r2d, double r2y) {
    if (n < 2 || p < 1) throw InvalidInputError("make_dgp: need n >= 2, p >= 1");
    DgpSpec spec;
    spec.design = design;
    spec.n = n;
    spec.p = p;
    spec.alpha0 = alpha0;
    spec.rho = rho;
    spec.r2d = r2d;
    spec.r2y = r2y;
    spec.nu_d = design_pattern(design, p, true);
    spec.nu_y = design_pattern(design, p, false);

    const Eigen::MatrixXd theta = toeplitz_ar1(p - 1, rho);
    spec.c_d = calibrate_signal(theta, spec.nu_d, r2d);
    spec.c_y = calibrate_signal(theta, spec.nu_y, r2y);

    Eigen::LLT<Eigen::MatrixXd> llt(theta);
    if (p > 1 && llt.info() != Eigen::Success) {
        throw InvalidInputError("make_dgp: covariance not positive definite");
    }
    auto L = std::make_shared<Eigen::MatrixXd>(llt.matrixL());
    spec.chol = std::move(L);
    return spec;
}

// One dataset draw.  Per observation the stream is consumed in a fixed
// order -- the p-1 covariate normals, then the treatment disturbance, then
// the outcome uniform -- so draws are reproducible across refactorings of
// the linear algebra below.
inline Dataset draw_dataset(const DgpSpec& spec, RngStream& rng) {
    const Eigen::Index n = spec.n;
    const Eigen::Index pz = spec.p - 1;

    Eigen::MatrixXd E(pz, n);
    Eigen::VectorXd v(n), u(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < pz; ++j) E(j, i) = rng.normal();
        v(i) = rng.normal();
        u(i) = rng.uniform();
    }

    Dataset data;
    data.X.resize(n, spec.p);
    data.X.col(0).setOnes();
    data.intercept = 0;

    Eigen::VectorXd signal_d = v, signal_y;
    if (pz > 0) {
        Eigen::MatrixXd Z = spec.chol->triangularView<Eigen::Lower>() * E;  // pz x n
        data.X.rightCols(pz) = Z.transpose();
        signal_d.noalias() += Z.transpose() * (spec.c_d * spec.nu_d);
        signal_y.noalias() = Z.transpose() * (spec.c_y * spec.nu_y);
    } else {
        signal_y = Eigen::VectorXd::Zero(n);
    }
    data.d = signal_d;

    data.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double prob = logistic_link(spec.alpha0 * data.d(i) + signal_y(i)).value;
        data.y(i) = u(i) < prob ? 1.0 : 0.0;
    }
    return data;
}

}  // namespace hdlogit
