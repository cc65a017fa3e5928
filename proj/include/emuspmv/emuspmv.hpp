#pragma once

#include "emuspmv/experiment.hpp"
#include "emuspmv/machine.hpp"
#include "emuspmv/metrics.hpp"
#include "emuspmv/matrix_market.hpp"
#include "emuspmv/partition.hpp"
#include "emuspmv/reorder.hpp"
#include "emuspmv/rmat.hpp"
#include "emuspmv/rng.hpp"
#include "emuspmv/sim_config.hpp"
#include "emuspmv/sparse.hpp"
#include "emuspmv/stats.hpp"
#include "emuspmv/trace.hpp"
