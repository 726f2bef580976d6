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

#include "fcelab/estimators/train.hpp"

#include <stdexcept>
#include <string>

#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

void validate(const TrainConfig& config, const Tensor& data) {
  if (config.iterations < 0) throw ConfigError("iterations must be >= 0");
  if (config.batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (!(config.accuracy_threshold > 0.0 && config.accuracy_threshold < 1.0)) {
    throw ConfigError("accuracy_threshold must lie in (0, 1)");
  }
  if (config.max_consecutive < 1) throw ConfigError("max_consecutive must be >= 1");
  if (!(config.negative_prior_odds > 0.0)) {
    throw ConfigError("negative_prior_odds must be > 0");
  }
  if (!(config.ebm_optimizer.learning_rate > 0.0) ||
      !(config.flow_optimizer.learning_rate > 0.0)) {
    throw ConfigError("learning rates must be > 0");
  }
  if (data.rank() != 2 || data.dim(1) != 2 || data.dim(0) == 0) {
    throw ShapeError("training data must be a non-empty {N,2} tensor, got " +
                     shape_string(data.shape()));
  }
}

void after_step(const TrainConfig& config, const TrainState& state,
                const TrainHooks& hooks, HistoryRow& row) {
  if (hooks.evaluate && config.eval_every > 0 &&
      state.iteration % config.eval_every == 0) {
    hooks.evaluate(state, row);
  }
  if (hooks.on_row) hooks.on_row(row);
  if (hooks.checkpoint && hooks.checkpoint_every > 0 &&
      state.iteration % hooks.checkpoint_every == 0) {
    hooks.checkpoint(state);
  }
}

HistoryRow make_row(const TrainState& state, std::string side, double value) {
  HistoryRow row;
  row.iter = state.iteration;
  row.side = std::move(side);
  row.value = value;
  row.ebm_steps = state.ebm_steps;
  row.flow_steps = state.flow_steps;
  return row;
}

}  // namespace

TrainState make_train_state(const TrainConfig& config, std::uint64_t seed,
                            std::span<Parameter* const> ebm_params,
                            std::span<Parameter* const> flow_params) {
  TrainState state;
  state.seed = seed;
  state.rng.seed(seed);
  state.alternation.threshold = config.accuracy_threshold;
  state.alternation.max_consecutive = config.max_consecutive;
  state.ebm_optimizer = make_optimizer(config.ebm_optimizer, ebm_params);
  state.flow_optimizer = make_optimizer(config.flow_optimizer, flow_params);
  return state;
}

Tensor draw_batch(const Tensor& data, std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, data.dim(0) - 1);
  Tensor out({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = pick(rng);
    out(i, 0) = data(j, 0);
    out(i, 1) = data(j, 1);
  }
  return out;
}

std::vector<HistoryRow> run_alternating(const Tensor& data,
                                        const TrainConfig& config,
                                        TrainState& state,
                                        const AlternatingSteps& steps,
                                        const TrainHooks& hooks) {
  validate(config, data);
  state.alternation.threshold = config.accuracy_threshold;
  state.alternation.max_consecutive = config.max_consecutive;
  std::vector<HistoryRow> history;
  while (state.iteration < config.iterations) {
    Tensor batch = draw_batch(data, config.batch_size, state.rng);
    Tensor z = standard_normal(config.batch_size, state.rng);
    const bool warmup = state.iteration < steps.ebm_only_until;
    const Side side = warmup ? Side::ebm : state.alternation.side;
    StepStats stats = side == Side::ebm ? steps.ebm(batch, z) : steps.flow(batch, z);
    ++state.iteration;
    ++(side == Side::ebm ? state.ebm_steps : state.flow_steps);
    if (!warmup) record_update(state.alternation, stats.accuracy);

    HistoryRow row = make_row(state, std::string(side_name(side)), stats.value);
    row.accuracy = stats.accuracy;
    if (steps.annotate) steps.annotate(stats, row);
    after_step(config, state, hooks, row);
    history.push_back(std::move(row));
  }
  return history;
}

std::vector<HistoryRow> fce_train(EnergyModel& ebm, FlowModel& flow,
                                  const Tensor& data, const TrainConfig& config,
                                  TrainState& state, const TrainHooks& hooks) {
  const ModelLogDensity log_p = single_head(ebm);
  const std::vector<Parameter*> ebm_params = ebm.parameters();
  AlternatingSteps steps;
  steps.ebm = [&](const Tensor& batch, const Tensor& z) {
    return fce_ebm_step(log_p, ebm_params, flow, batch, z, state.ebm_optimizer,
                        config.negative_prior_odds);
  };
  steps.flow = [&](const Tensor& batch, const Tensor& z) {
    return fce_flow_step(log_p, flow, batch, z, state.flow_optimizer,
                         config.negative_prior_odds);
  };
  return run_alternating(data, config, state, steps, hooks);
}

std::vector<HistoryRow> nce_train(EnergyModel& ebm, const Tensor& data,
                                  const GaussianNoiseBaseline& noise,
                                  const TrainConfig& config, TrainState& state,
                                  const TrainHooks& hooks) {
  validate(config, data);
  const GaussianMixture2D q = noise.distribution();
  std::vector<HistoryRow> history;
  while (state.iteration < config.iterations) {
    Tensor batch = draw_batch(data, config.batch_size, state.rng);
    Tensor negatives = q.sample(config.batch_size, state.rng);
    StepStats stats = nce_step(ebm, batch, Tensor::vector(q.log_density(batch)),
                               negatives, Tensor::vector(q.log_density(negatives)),
                               state.ebm_optimizer, config.negative_prior_odds);
    ++state.iteration;
    ++state.ebm_steps;
    HistoryRow row = make_row(state, "nce", stats.value);
    row.accuracy = stats.accuracy;
    after_step(config, state, hooks, row);
    history.push_back(std::move(row));
  }
  return history;
}

std::vector<HistoryRow> mle_train(FlowModel& flow, const Tensor& data,
                                  const TrainConfig& config, TrainState& state,
                                  const TrainHooks& hooks) {
  validate(config, data);
  std::vector<HistoryRow> history;
  while (state.iteration < config.iterations) {
    Tensor batch = draw_batch(data, config.batch_size, state.rng);
    MleStats stats = mle_flow_step(flow, batch, state.flow_optimizer);
    ++state.iteration;
    ++state.flow_steps;
    HistoryRow row = make_row(state, "mle", stats.nll);
    after_step(config, state, hooks, row);
    history.push_back(std::move(row));
  }
  return history;
}

}  // namespace fcelab
