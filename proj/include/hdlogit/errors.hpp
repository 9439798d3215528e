#pragma once

#include <stdexcept>
#include <string>

namespace hdlogit {

// Input that violates a documented precondition (bad shapes, non-binary
// outcome, out-of-range tuning values).  Distinct from numerical failure.
class InvalidInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Iterative solver hit its iteration cap before meeting its certificate.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& msg, double kkt_violation)
        : std::runtime_error(msg), kkt_violation(kkt_violation) {}
    double kkt_violation;
};

// (Quasi-)separated logistic likelihood: coefficients diverge.
class SeparationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rank-deficient design where a unique solution is required.
class RankError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A penalty loading collapsed to (numerical) zero.
class DegenerateLoadingError : public std::runtime_error {
public:
    DegenerateLoadingError(const std::string& msg, int column)
        : std::runtime_error(msg), column(column) {}
    int column;
};

// Instrument carries no identifying signal for the treatment coefficient.
class WeakInstrumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Self-normalized criterion is undefined (denominator underflow).
class DegenerateInstrumentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hdlogit
