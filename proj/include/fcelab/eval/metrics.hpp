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

#include "fcelab/data/distributions.hpp"
#include "fcelab/ebm/ebm.hpp"
#include "fcelab/eval/grid.hpp"
#include "fcelab/flow/flow.hpp"

namespace fcelab {

inline constexpr std::uint64_t kDefaultEvalSeed = 20260301;

// f_k(x) - c_k with the learned c; the model is captured by reference.
LogDensityFn ebm_log_density(const EnergyModel& model, std::size_t head = 0);
LogDensityFn flow_log_density(const FlowModel& flow);

// Evaluation set: points drawn from the ground truth with a fixed seed.
Tensor mse_eval_points(const GroundTruth& truth, std::size_t n = 10000,
                       std::uint64_t seed = kDefaultEvalSeed);

// Mean squared log-density error over the given points. Throws NumericError
// if the model is non-finite anywhere.
double density_mse(const LogDensityFn& model, const GaussianMixture2D& truth,
                   const Tensor& points);
double density_mse(const Tensor& model_values, const GaussianMixture2D& truth,
                   const Tensor& points);
// Grid form: the points are the grid's cell centres.
double density_mse(const DensityGrid& grid, const GaussianMixture2D& truth);

// Mean negative log-likelihood in nats.
double mean_nll(const LogDensityFn& model, const Tensor& points);

}  // namespace fcelab
