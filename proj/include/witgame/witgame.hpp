#pragma once

// Umbrella header for the whole library.

#include "witgame/dataset.hpp"
#include "witgame/deviation.hpp"
#include "witgame/equilibrium.hpp"
#include "witgame/experiment.hpp"
#include "witgame/games.hpp"
#include "witgame/metrics.hpp"
#include "witgame/neighborhood.hpp"
#include "witgame/predictors.hpp"
#include "witgame/sequence_game.hpp"
#include "witgame/svg.hpp"
#include "witgame/synth.hpp"
#include "witgame/tree.hpp"
#include "witgame/types.hpp"
#include "witgame/witness.hpp"
