// Copyright 2026 The fcelab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fcelab/estimators/alternation.hpp"

#include <string>

#include "fcelab/util/log.hpp"

namespace fcelab {

std::string_view side_name(Side side) {
  return side == Side::ebm ? "ebm" : "flow";
}

SwitchDecision record_update(AlternationState& state, double accuracy) {
  state.last_accuracy = accuracy;
  ++state.consecutive;
  const bool fired = state.side == Side::ebm ? accuracy > state.threshold
                                             : accuracy < state.threshold;
  SwitchDecision decision = SwitchDecision::stay;
  if (fired) {
    decision = SwitchDecision::threshold;
  } else if (state.consecutive >= state.max_consecutive) {
    decision = SwitchDecision::forced;
    ++state.forced_switches;
    log_warning("alternation: " + std::string(side_name(state.side)) +
                " side hit " + std::to_string(state.max_consecutive) +
                " consecutive updates, forcing a switch");
  }
  if (decision != SwitchDecision::stay) {
    state.side = state.side == Side::ebm ? Side::flow : Side::ebm;
    state.consecutive = 0;
  }
  return decision;
}

}  // namespace fcelab
