#pragma once

#include "maxrisk/cramer.hpp"
#include "maxrisk/distortion.hpp"
#include "maxrisk/experiments.hpp"
#include "maxrisk/ext_real.hpp"
#include "maxrisk/io/config.hpp"
#include "maxrisk/largedev.hpp"
#include "maxrisk/numeric.hpp"
#include "maxrisk/premium.hpp"
#include "maxrisk/riskcore.hpp"
#include "maxrisk/space.hpp"
