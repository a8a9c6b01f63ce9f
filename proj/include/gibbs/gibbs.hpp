#pragma once

// Umbrella header.
#include "gibbs/core.hpp"
#include "gibbs/numerics.hpp"
#include "gibbs/target_functions.hpp"
#include "gibbs/quadrature.hpp"
#include "gibbs/grid_model.hpp"
#include "gibbs/log_partition.hpp"
#include "gibbs/samplers.hpp"
#include "gibbs/metrics.hpp"
#include "gibbs/registry.hpp"
#include "gibbs/harness.hpp"
#include "gibbs/selftest.hpp"
