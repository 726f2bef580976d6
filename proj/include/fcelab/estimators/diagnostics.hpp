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
#include <vector>

#include "fcelab/data/distributions.hpp"
#include "fcelab/ebm/ebm.hpp"
#include "fcelab/flow/flow.hpp"

namespace fcelab {

// Monte-Carlo Jensen-Shannon divergence (natural log, bounded by ln 2)
// between the flow density and a closed-form ground truth. n samples are
// drawn from each side.
double jsd_diagnostic(const FlowModel& flow, const GaussianMixture2D& truth,
                      std::size_t n, std::uint64_t seed);
double jsd_diagnostic(const FlowModel& flow, const GroundTruth& truth,
                      std::size_t n, std::uint64_t seed);

enum class DensityPath { forward, inverse };

// E_z[log q0(z) - log|det g'(z)|] - E_q[f(x) - c], i.e. KL(q || p) up to
// log Z. The forward path never inverts the flow; the inverse path
// recomputes log q(x) through log_prob and exists to cross-check it.
double variational_free_energy(const FlowModel& flow, const EnergyModel& ebm,
                               std::size_t n, std::uint64_t seed,
                               DensityPath path = DensityPath::forward);

// Gradient of E_data[f] - E_model[f] with respect to the EBM parameters
// in parameters() order (the entry for c is zero). The model
// samples must come from p_theta itself; nothing here provides a sampler,
// so this is an evaluation utility and not a trainer.
std::vector<Tensor> ebm_mle_gradient(const EnergyModel& ebm, const Tensor& data,
                                     const Tensor& model_samples,
                                     std::size_t head = 0);

}  // namespace fcelab
