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

#include "fcelab/data/distributions.hpp"
#include "fcelab/ebm/ebm.hpp"
#include "fcelab/estimators/train.hpp"
#include "fcelab/flow/flow.hpp"

namespace fcelab {

// Mean over the batch of log softmax_y(f_k(x) - c_k), evaluated at the
// true label y. Throws std::invalid_argument on kUnlabeled or out-of-range
// labels.
Var label_loss(Tape& tape, const EnergyModel& model, const Tensor& points,
               std::span<const int> labels, Track track = Track::params);
double label_loss(const EnergyModel& model, const Tensor& points,
                  std::span<const int> labels);

// log (1/K) sum_k exp(f_k(x) - c_k), {N}.
Var mixture_log_unnormalized(Tape& tape, const EnergyModel& model, Var x,
                             Track track = Track::params);
Tensor mixture_log_unnormalized(const EnergyModel& model, const Tensor& x);
ModelLogDensity mixture_density(const EnergyModel& model);

struct Prediction {
  std::vector<int> labels;
  Tensor posteriors;  // {N, K}, rows sum to one
};

Prediction predict(const EnergyModel& model, const Tensor& x);

double classification_accuracy(const Prediction& prediction,
                               std::span<const int> labels);

struct SemisupConfig {
  TrainConfig train;
  double label_loss_weight = 1.0;
  std::int64_t warmup_ebm_iters = 0;
};

// Alternating FCE with the class mixture as p_theta; the EBM side also
// maximizes label_loss over every labeled point each step.
std::vector<HistoryRow> semisup_train(EnergyModel& model, FlowModel& flow,
                                      const LabeledDataset& dataset,
                                      const SemisupConfig& config,
                                      TrainState& state,
                                      const TrainHooks& hooks = {});

}  // namespace fcelab
