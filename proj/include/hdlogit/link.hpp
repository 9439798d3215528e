#pragma once

#include <cmath>

#include "hdlogit/errors.hpp"

namespace hdlogit {

// Value and derivative of the logistic link at one index point.
struct LinkEval {
    double value;  // G(t)  = e^t / (1 + e^t)
    double deriv;  // G'(t) = G(t) (1 - G(t))
};

// Overflow-safe logistic link: always exponentiates the non-positive half
// index, so it is finite for any finite t (even t = +-1e6).
inline LinkEval logistic_link(double t) {
    if (!std::isfinite(t)) {
        throw InvalidInputError("logistic_link: non-finite index");
    }
    LinkEval out;
    if (t >= 0.0) {
        const double e = std::exp(-t);       // in (0, 1]
        out.value = 1.0 / (1.0 + e);
        out.deriv = out.value * (e / (1.0 + e));
    } else {
        const double e = std::exp(t);        // in (0, 1)
        out.value = e / (1.0 + e);
        out.deriv = out.value * (1.0 / (1.0 + e));
    }
    return out;
}

// log(1 + e^t) without overflow; the per-observation Bernoulli deviance term.
inline double log1pexp(double t) {
    if (t > 35.0) return t + std::exp(-t);   // log1p(e^-t) ~ e^-t to 1e-15
    if (t < -35.0) return std::exp(t);
    return std::log1p(std::exp(t));
}

}  // namespace hdlogit
