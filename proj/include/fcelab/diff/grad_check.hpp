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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "fcelab/diff/tape.hpp"

namespace fcelab {

// Builds a scalar from an input variable recorded on the variable's tape.
using ScalarOfInput = std::function<Var(Var)>;
// Builds a scalar on the given tape, binding parameters as it goes.
using ScalarOfParams = std::function<Var(Tape&)>;

// Max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)
// with central differences of width 2 * step. Throws NumericError if any
// evaluation is non-finite.
double grad_check(const ScalarOfInput& f, const Tensor& point,
                  double step = 1e-5);

// Same metric for parameter gradients. At most `max_coords` coordinates
// (drawn with `seed`) are perturbed; pass 0 to check all of them. Values and
// gradient accumulators of `params` are restored before returning.
double grad_check_params(const ScalarOfParams& f,
                         std::span<Parameter* const> params,
                         double step = 1e-5, std::size_t max_coords = 0,
                         std::uint64_t seed = 0);

}  // namespace fcelab
