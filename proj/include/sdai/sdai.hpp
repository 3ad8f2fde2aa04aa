#pragma once

#include "sdai/artifact.hpp"
#include "sdai/baselines.hpp"
#include "sdai/corruption.hpp"
#include "sdai/csv.hpp"
#include "sdai/data.hpp"
#include "sdai/error.hpp"
#include "sdai/harness.hpp"
#include "sdai/metrics.hpp"
#include "sdai/model.hpp"
#include "sdai/numerics.hpp"
#include "sdai/parallel.hpp"
#include "sdai/rng.hpp"
#include "sdai/training.hpp"
