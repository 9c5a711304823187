#pragma once

#include "collab/bench.hpp"
#include "collab/classification.hpp"
#include "collab/cluster.hpp"
#include "collab/config.hpp"
#include "collab/criterion.hpp"
#include "collab/data_model.hpp"
#include "collab/errors.hpp"
#include "collab/expectation.hpp"
#include "collab/ols.hpp"
#include "collab/oracle.hpp"
#include "collab/parallel.hpp"
#include "collab/rng.hpp"
#include "collab/tuner.hpp"
