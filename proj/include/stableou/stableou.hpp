#pragma once

#include "stableou/errors.hpp"
#include "stableou/rng.hpp"
#include "stableou/stable_dist.hpp"
#include "stableou/model.hpp"
#include "stableou/likelihood.hpp"
#include "stableou/estimators.hpp"
#include "stableou/serialization.hpp"
#include "stableou/montecarlo.hpp"
#include "stableou/io.hpp"
