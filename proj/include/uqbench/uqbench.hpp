#pragma once

#include "uqbench/dataset.hpp"
#include "uqbench/dgp.hpp"
#include "uqbench/distributions.hpp"
#include "uqbench/forest.hpp"
#include "uqbench/harness.hpp"
#include "uqbench/matrix.hpp"
#include "uqbench/metrics.hpp"
#include "uqbench/mlp.hpp"
#include "uqbench/report.hpp"
#include "uqbench/rng.hpp"
#include "uqbench/uq.hpp"
