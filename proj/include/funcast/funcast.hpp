#pragma once

#include "funcast/curves.hpp"
#include "funcast/error.hpp"
#include "funcast/eval.hpp"
#include "funcast/forecast.hpp"
#include "funcast/fpca.hpp"
#include "funcast/linalg.hpp"
#include "funcast/optim.hpp"
#include "funcast/parallel.hpp"
#include "funcast/rolling.hpp"
#include "funcast/score_models.hpp"
#include "funcast/sim.hpp"
