#pragma once

#include "sidemat/types.hpp"
#include "sidemat/sieve_basis.hpp"
#include "sidemat/lowrank.hpp"
#include "sidemat/rng.hpp"
#include "sidemat/simgen.hpp"
#include "sidemat/estimator_full.hpp"
#include "sidemat/estimator_mar.hpp"
#include "sidemat/estimator_mnar.hpp"
#include "sidemat/baselines.hpp"
#include "sidemat/harness.hpp"
#include "sidemat/csv.hpp"
