#pragma once

#include <filesystem>
#include <string>

#include "dynprice/scenario.h"

namespace dynprice {

/// Scenario files are JSON objects with four sections:
///
///   chain  { states, transition, horizon, initial_state }
///   types  [ { id, initial_state, eta, utility{capped, slope, curvature, state_gain},
///              transition{base, state_coef, action_coef, carry, floor} } ]
///   costs  { primary, ancillary0, ancillary, reserve_policy }
///   bounds { B, Z, P, Q }
///
/// Coefficient tables accept a number (constant), a list (one value per
/// stage) or a list of lists (stage x state). Cost entries are lists of
/// { poly: [...], hinges: [{weight, lead, lag, offset}] }.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text);
std::string dump_scenario(const Scenario& scenario);

}  // namespace dynprice
