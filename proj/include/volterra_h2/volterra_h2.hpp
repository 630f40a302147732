#pragma once

/// Umbrella header for the whole library.

#include "volterra_h2/basis.hpp"
#include "volterra_h2/dense_eval.hpp"
#include "volterra_h2/evaluator_common.hpp"
#include "volterra_h2/experiments.hpp"
#include "volterra_h2/h2_eval.hpp"
#include "volterra_h2/hierarchy.hpp"
#include "volterra_h2/kernel.hpp"
#include "volterra_h2/laplace.hpp"
#include "volterra_h2/quadrature.hpp"
#include "volterra_h2/solvers.hpp"
