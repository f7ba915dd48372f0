#pragma once

// Umbrella header: two-level logistic modeling of road-nested crash data.

#include "hlogit/csv.hpp"
#include "hlogit/dataset.hpp"
#include "hlogit/design.hpp"
#include "hlogit/errors.hpp"
#include "hlogit/glm.hpp"
#include "hlogit/metrics.hpp"
#include "hlogit/mixed.hpp"
#include "hlogit/model_io.hpp"
#include "hlogit/numeric.hpp"
#include "hlogit/optim.hpp"
#include "hlogit/quadrature.hpp"
#include "hlogit/rng.hpp"
#include "hlogit/simulate.hpp"
