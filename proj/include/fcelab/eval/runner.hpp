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
#include <vector>

#include "fcelab/data/distributions.hpp"
#include "fcelab/ebm/ebm.hpp"
#include "fcelab/estimators/objectives.hpp"
#include "fcelab/estimators/train.hpp"
#include "fcelab/eval/checkpoint.hpp"
#include "fcelab/eval/config.hpp"
#include "fcelab/flow/flow.hpp"

namespace fcelab {

// Independent streams derived from one run seed.
enum class SeedStream : std::uint64_t { data = 1, ebm_init, flow_init, train, pretrain };
std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream);

// Fixed evaluation material shared by every run with the same config.
struct EvalSet {
  std::optional<GaussianMixture2D> truth;  // when the ground truth has a density
  Tensor points;                           // eval_points samples from p_data
  Tensor heldout_points;                   // semisup only
  std::vector<int> heldout_labels;
};

EvalSet make_eval_set(const RunConfig& config);

struct Metrics {
  std::optional<double> ebm_mse;
  std::optional<double> flow_nll;
  std::optional<double> jsd;
  std::optional<double> heldout_acc;
};

struct Run {
  RunConfig config;
  std::uint64_t seed = 0;
  GroundTruth truth = Checkerboard{};
  Tensor train_data;
  std::optional<LabeledDataset> labeled;
  std::optional<GaussianNoiseBaseline> noise;
  std::optional<EnergyModel> ebm;
  std::optional<FlowModel> flow;
  TrainState state;
  std::vector<HistoryRow> pretrain_history;
  std::vector<HistoryRow> history;
  EvalSet eval;
};

// Builds data and models, and runs MLE pretraining when flow_init asks for
// it. A supplied pretrained flow skips that step.
Run prepare_run(const RunConfig& config, std::uint64_t seed,
                const FlowModel* pretrained = nullptr);
// Rebuilds the data from the checkpoint's seed and restores models and state.
Run resume_run(const RunConfig& config, const Checkpoint& checkpoint);

// MLE pretraining used by the 'trained' start.
FlowModel pretrain_flow(const RunConfig& config, std::uint64_t seed,
                        const Tensor& train_data,
                        std::vector<HistoryRow>* history = nullptr);

Metrics evaluate(const Run& run);

// Trains to config.iterations, evaluating every eval_every iterations.
// `on_row` sees each history row as it completes; `on_checkpoint` runs
// every checkpoint_every iterations.
void execute(Run& run, const std::function<void(const Run&)>& on_checkpoint = {},
             const std::function<void(const HistoryRow&)>& on_row = {});

void save_run_checkpoint(const std::string& path, const Run& run);

}  // namespace fcelab
