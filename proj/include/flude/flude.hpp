#pragma once

// Umbrella header for the flude simulation library.

#include "flude/cache.hpp"
#include "flude/checkpoint.hpp"
#include "flude/dependability.hpp"
#include "flude/distributor.hpp"
#include "flude/env.hpp"
#include "flude/logging.hpp"
#include "flude/metrics.hpp"
#include "flude/model_params.hpp"
#include "flude/rng.hpp"
#include "flude/round_engine.hpp"
#include "flude/runner.hpp"
#include "flude/scenario.hpp"
#include "flude/selector.hpp"
#include "flude/trainer.hpp"
