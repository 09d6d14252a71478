#pragma once

#include "config.hpp"
#include "errors.hpp"
#include "estimators.hpp"
#include "eval.hpp"
#include "gait.hpp"
#include "geomodel.hpp"
#include "io.hpp"
#include "pipeline.hpp"
#include "sim.hpp"
#include "state.hpp"
