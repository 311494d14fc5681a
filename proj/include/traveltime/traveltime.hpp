#pragma once

#include "traveltime/budge_estimator.hpp"
#include "traveltime/config.hpp"
#include "traveltime/csv.hpp"
#include "traveltime/data_io.hpp"
#include "traveltime/error.hpp"
#include "traveltime/local_estimators.hpp"
#include "traveltime/numeric.hpp"
#include "traveltime/prediction_eval.hpp"
#include "traveltime/random.hpp"
#include "traveltime/rjmcmc.hpp"
#include "traveltime/road_network.hpp"
#include "traveltime/simulator.hpp"
#include "traveltime/travel_time_model.hpp"
