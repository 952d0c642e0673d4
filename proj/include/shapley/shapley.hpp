#pragma once

// Umbrella header: Shapley effects for dependent Gaussian inputs via the
// linear closed form, black-box linearization, Monte-Carlo reference
// estimators, and the empirical-mean pipeline.

#include "shapley/acceptance.hpp"
#include "shapley/empirical.hpp"
#include "shapley/errors.hpp"
#include "shapley/exact.hpp"
#include "shapley/experiment.hpp"
#include "shapley/gaussian.hpp"
#include "shapley/linearize.hpp"
#include "shapley/mc.hpp"
#include "shapley/models.hpp"
#include "shapley/rng.hpp"
#include "shapley/subset.hpp"
