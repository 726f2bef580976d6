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

#pragma once

#include <cstdint>
#include <string_view>

namespace fcelab {

enum class Side { ebm, flow };

std::string_view side_name(Side side);

struct AlternationState {
  Side side = Side::ebm;
  double last_accuracy = 0.0;
  std::int64_t consecutive = 0;  // updates on the current side
  double threshold = 0.5;
  std::int64_t max_consecutive = 100;
  std::int64_t forced_switches = 0;
};

enum class SwitchDecision { stay, threshold, forced };

// Records one update on the current side and applies the gate: the EBM
// phase ends once accuracy exceeds the threshold, the flow phase once it
// drops below. Hitting the cap switches anyway and logs a warning.
SwitchDecision record_update(AlternationState& state, double accuracy);

}  // namespace fcelab
