#pragma once

#include "twinfock/bayes.hpp"
#include "twinfock/experiment.hpp"
#include "twinfock/interferometer.hpp"
#include "twinfock/random.hpp"
#include "twinfock/scaling.hpp"
#include "twinfock/specfun.hpp"
