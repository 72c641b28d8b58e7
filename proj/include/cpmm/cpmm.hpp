#pragma once

#include "cpmm/errors.hpp"
#include "cpmm/random.hpp"
#include "cpmm/linear_map.hpp"
#include "cpmm/operator_norm.hpp"
#include "cpmm/prox.hpp"
#include "cpmm/stepsize.hpp"
#include "cpmm/solver.hpp"
#include "cpmm/analysis.hpp"
#include "cpmm/imaging.hpp"
#include "cpmm/radon.hpp"
#include "cpmm/scenarios.hpp"
#include "cpmm/experiments.hpp"
