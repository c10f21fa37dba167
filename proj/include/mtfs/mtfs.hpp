#pragma once

// Umbrella header: joint multi-task feature selection for RUL regression and
// failure-type classification, with the solver, regularization path,
// competing-risk analysis, downstream predictors and evaluation harness.

#include "mtfs/competing_risk.hpp"
#include "mtfs/csv.hpp"
#include "mtfs/dataset.hpp"
#include "mtfs/errors.hpp"
#include "mtfs/evaluation.hpp"
#include "mtfs/objective.hpp"
#include "mtfs/params.hpp"
#include "mtfs/predictors.hpp"
#include "mtfs/rng.hpp"
#include "mtfs/selection_path.hpp"
#include "mtfs/solver.hpp"
