#pragma once

// Umbrella header for the sharded-pool mechanism laboratory.

#include "samm/amm_core.hpp"
#include "samm/fee_design.hpp"
#include "samm/game_sim.hpp"
#include "samm/reports.hpp"
#include "samm/risk_analysis.hpp"
#include "samm/strategy.hpp"
#include "samm/throughput_model.hpp"
#include "samm/trace_replay.hpp"
