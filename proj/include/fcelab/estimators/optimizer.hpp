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
#include <span>
#include <vector>

#include "fcelab/diff/tensor.hpp"

namespace fcelab {

enum class OptimizerKind { adam, adamax };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment accumulators mirror the parameter list they were created for.
// For Adamax the second accumulator holds the infinity-norm estimate u.
struct OptimizerState {
  OptimizerConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

OptimizerState make_optimizer(const OptimizerConfig& config,
                              std::span<Parameter* const> params);

// One descent step on the gradients held in params[i]->grad, which are then
// cleared. A non-finite gradient skips the step (counter unchanged), logs a
// warning, clears the gradients and returns false.
bool optimizer_step(OptimizerState& state, std::span<Parameter* const> params);

}  // namespace fcelab
