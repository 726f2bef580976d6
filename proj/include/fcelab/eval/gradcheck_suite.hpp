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
#include <string>
#include <vector>

namespace fcelab {

inline constexpr double kGradCheckTolerance = 1e-4;

struct GradCheckResult {
  std::string name;
  std::size_t configurations = 0;
  double max_error = 0.0;  // worst relative error over all configurations
  bool passed() const { return max_error < kGradCheckTolerance; }
};

// Finite-difference checks of every differentiable model and objective on
// small random instances. Each check draws `configurations` fresh models
// and inputs.
std::vector<GradCheckResult> run_gradcheck_suite(std::size_t configurations = 100,
                                                 std::uint64_t seed = 0,
                                                 double step = 1e-6);

}  // namespace fcelab
