#pragma once

// Umbrella header: honest inference on a treatment coefficient in
// high-dimensional logistic regression (optimal-instrument and
// double-selection estimators), plus the simulation harness.

#include "hdlogit/analyze.hpp"
#include "hdlogit/csv.hpp"
#include "hdlogit/dataset.hpp"
#include "hdlogit/dgp.hpp"
#include "hdlogit/errors.hpp"
#include "hdlogit/estimators.hpp"
#include "hdlogit/inference.hpp"
#include "hdlogit/link.hpp"
#include "hdlogit/logistic_lasso.hpp"
#include "hdlogit/logistic_refit.hpp"
#include "hdlogit/monte_carlo.hpp"
#include "hdlogit/prob.hpp"
#include "hdlogit/rng.hpp"
#include "hdlogit/weighted_lasso.hpp"
