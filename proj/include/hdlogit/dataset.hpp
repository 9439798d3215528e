#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "hdlogit/errors.hpp"

namespace hdlogit {

// Raw estimation problem: binary outcome y, scalar treatment d, control
// matrix X (n x p).  `intercept` marks a declared all-ones column of X
// (kept and never penalized); -1 means no declared intercept.
struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd d;
    Eigen::MatrixXd X;
    int intercept = -1;
    std::vector<std::string> col_names;  // optional; empty or size p

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return X.cols(); }

    void validate() const {
        if (n() < 2) throw InvalidInputError("dataset: need at least 2 observations");
        if (d.size() != n() || (p() > 0 && X.rows() != n())) {
            throw InvalidInputError("dataset: y/d/X row counts disagree");
        }
        if (intercept >= static_cast<int>(p())) {
            throw InvalidInputError("dataset: intercept column index out of range");
        }
        if (!col_names.empty() && static_cast<Eigen::Index>(col_names.size()) != p()) {
            throw InvalidInputError("dataset: column-name count disagrees with X");
        }
        for (Eigen::Index i = 0; i < n(); ++i) {
            if (!std::isfinite(d(i))) throw InvalidInputError("dataset: non-finite treatment value");
            if (y(i) != 0.0 && y(i) != 1.0) {
                throw InvalidInputError("dataset: outcome must be 0/1 at row " + std::to_string(i));
            }
        }
        if (p() > 0 && !X.allFinite()) throw InvalidInputError("dataset: non-finite control value");
    }
};

// Dataset rescaled to the E_n[d^2] = E_n[x_j^2] = 1 normalization all the
// estimators assume.  Zero-variance columns other than a declared intercept
// are dropped (they carry no selectable signal and break the loadings).
struct StandardizedData {
    Eigen::VectorXd y;
    Eigen::VectorXd d;       // d / d_scale
    Eigen::MatrixXd X;       // kept columns, each divided by its scale
    double d_scale = 1.0;    // sqrt(E_n[d^2]) of the raw treatment
    Eigen::VectorXd col_scale;       // per kept column, original units
    std::vector<int> kept;           // original indices of kept columns
    std::vector<int> dropped;        // original indices of dropped columns
    int intercept = -1;              // position within kept columns, or -1
    Eigen::Index p_orig = 0;

    Eigen::Index n() const { return y.size(); }
    Eigen::Index p() const { return X.cols(); }

    // Map a coefficient vector over kept standardized columns back to the
    // original p columns and units.
    Eigen::VectorXd unstandardize_controls(const Eigen::VectorXd& beta_std) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(p_orig);
        for (std::size_t k = 0; k < kept.size(); ++k) {
            out(kept[k]) = beta_std(static_cast<Eigen::Index>(k)) / col_scale(static_cast<Eigen::Index>(k));
        }
        return out;
    }
};

inline StandardizedData standardize(const Dataset& data) {
    data.validate();
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();

    StandardizedData out;
    out.y = data.y;
    out.p_orig = p;

    const double d2 = data.d.squaredNorm() / static_cast<double>(n);
    if (d2 < 1e-24) throw InvalidInputError("dataset: treatment column is identically zero");
    out.d_scale = std::sqrt(d2);
    out.d = data.d / out.d_scale;

    std::vector<int> kept;
    std::vector<double> scales;
    kept.reserve(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto col = data.X.col(j);
        const double m2 = col.squaredNorm() / static_cast<double>(n);
        if (j == data.intercept) {
            if (m2 < 1e-24) throw InvalidInputError("dataset: declared intercept column is zero");
            out.intercept = static_cast<int>(kept.size());
            kept.push_back(static_cast<int>(j));
            scales.push_back(std::sqrt(m2));
            continue;
        }
        const double mean = col.mean();
        const double var = m2 - mean * mean;
        if (m2 < 1e-24 || var <= 1e-12 * m2) {
            out.dropped.push_back(static_cast<int>(j));  // zero variance
            continue;
        }
        kept.push_back(static_cast<int>(j));
        scales.push_back(std::sqrt(m2));
    }

    out.kept = std::move(kept);
    out.col_scale = Eigen::Map<const Eigen::VectorXd>(scales.data(), static_cast<Eigen::Index>(scales.size()));
    out.X.resize(n, static_cast<Eigen::Index>(out.kept.size()));
    for (std::size_t k = 0; k < out.kept.size(); ++k) {
        out.X.col(static_cast<Eigen::Index>(k)) = data.X.col(out.kept[k]) / out.col_scale(static_cast<Eigen::Index>(k));
    }
    return out;
}

}  // namespace hdlogit
