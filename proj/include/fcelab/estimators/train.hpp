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
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fcelab/ebm/ebm.hpp"
#include "fcelab/estimators/alternation.hpp"
#include "fcelab/estimators/objectives.hpp"
#include "fcelab/estimators/optimizer.hpp"
#include "fcelab/flow/flow.hpp"

namespace fcelab {

struct TrainConfig {
  std::int64_t iterations = 20000;
  std::size_t batch_size = 500;
  OptimizerConfig ebm_optimizer{OptimizerKind::adam, 3e-4};
  OptimizerConfig flow_optimizer{OptimizerKind::adamax, 1e-5};
  double accuracy_threshold = 0.5;
  std::int64_t max_consecutive = 100;
  double negative_prior_odds = 1.0;
  std::int64_t eval_every = 500;  // 0 disables periodic evaluation
};

// Everything besides model parameters needed to resume a run exactly.
struct TrainState {
  std::uint64_t seed = 0;
  std::int64_t iteration = 0;
  std::int64_t ebm_steps = 0;
  std::int64_t flow_steps = 0;
  AlternationState alternation;
  std::mt19937_64 rng;
  OptimizerState ebm_optimizer;
  OptimizerState flow_optimizer;
};

// Either parameter list may be empty (NCE has no flow, MLE no EBM).
TrainState make_train_state(const TrainConfig& config, std::uint64_t seed,
                            std::span<Parameter* const> ebm_params,
                            std::span<Parameter* const> flow_params);

struct HistoryRow {
  std::int64_t iter = 0;  // 1-based index of the update this row describes
  std::string side;       // ebm, flow, nce or mle
  double value = 0.0;
  std::optional<double> accuracy;
  std::int64_t ebm_steps = 0;
  std::int64_t flow_steps = 0;
  std::optional<double> ebm_mse;
  std::optional<double> flow_nll;
  std::optional<double> jsd;
  std::optional<double> label_loss;
  std::optional<double> heldout_acc;
};

struct TrainHooks {
  // Runs after every eval_every-th iteration and may fill metric fields.
  std::function<void(const TrainState&, HistoryRow&)> evaluate;
  // Runs after every checkpoint_every-th iteration.
  std::function<void(const TrainState&)> checkpoint;
  std::int64_t checkpoint_every = 0;
  // Sees every row once it is complete, before any checkpoint hook.
  std::function<void(const HistoryRow&)> on_row;
};

// All trainers run from state.iteration up to config.iterations and return
// the rows for the iterations they performed. `data` is the training set;
// minibatches are drawn from it with replacement.
std::vector<HistoryRow> fce_train(EnergyModel& ebm, FlowModel& flow,
                                  const Tensor& data, const TrainConfig& config,
                                  TrainState& state, const TrainHooks& hooks = {});

std::vector<HistoryRow> nce_train(EnergyModel& ebm, const Tensor& data,
                                  const GaussianNoiseBaseline& noise,
                                  const TrainConfig& config, TrainState& state,
                                  const TrainHooks& hooks = {});

std::vector<HistoryRow> mle_train(FlowModel& flow, const Tensor& data,
                                  const TrainConfig& config, TrainState& state,
                                  const TrainHooks& hooks = {});

// Shared building blocks, also used by the semi-supervised trainer.
Tensor draw_batch(const Tensor& data, std::size_t n, std::mt19937_64& rng);

struct AlternatingSteps {
  std::function<StepStats(const Tensor& data, const Tensor& z)> ebm;
  std::function<StepStats(const Tensor& data, const Tensor& z)> flow;
  std::function<void(const StepStats&, HistoryRow&)> annotate;
  // Iterations before this index update the EBM only and bypass the gate.
  std::int64_t ebm_only_until = 0;
};

std::vector<HistoryRow> run_alternating(const Tensor& data,
                                        const TrainConfig& config,
                                        TrainState& state,
                                        const AlternatingSteps& steps,
                                        const TrainHooks& hooks);

}  // namespace fcelab
