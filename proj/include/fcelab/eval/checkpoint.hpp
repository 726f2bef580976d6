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
#include <optional>
#include <string>

#include "fcelab/ebm/ebm.hpp"
#include "fcelab/estimators/train.hpp"
#include "fcelab/flow/flow.hpp"

namespace fcelab {

inline constexpr char kCheckpointMagic[8] = {'F', 'C', 'E', 'L', 'A', 'B', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::optional<EnergyModel> ebm;
  std::optional<FlowModel> flow;
  std::optional<TrainState> state;
  std::string config_json;  // the RunConfig that produced the file, may be empty
};

// Any of the pointers may be null. The file is written to a temporary name
// and renamed into place.
void save_checkpoint(const std::string& path, const EnergyModel* ebm,
                     const FlowModel* flow, const TrainState* state,
                     const std::string& config_json = {});

// Throws FormatError on a bad magic or version, a truncated payload, unknown
// or missing keys, and shape mismatches.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fcelab
