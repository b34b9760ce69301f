#pragma once

#include "fedval/baselines.hpp"
#include "fedval/config.hpp"
#include "fedval/csv.hpp"
#include "fedval/dataset.hpp"
#include "fedval/error.hpp"
#include "fedval/experiment.hpp"
#include "fedval/fedval.hpp"
#include "fedval/io.hpp"
#include "fedval/metrics.hpp"
#include "fedval/model.hpp"
#include "fedval/round.hpp"
#include "fedval/seed.hpp"
