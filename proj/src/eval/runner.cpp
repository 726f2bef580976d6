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

#include "fcelab/eval/runner.hpp"

#include "fcelab/errors.hpp"
#include "fcelab/estimators/diagnostics.hpp"
#include "fcelab/eval/metrics.hpp"
#include "fcelab/semisup/semisup.hpp"

namespace fcelab {
namespace {

bool uses_ebm(Method m) { return m != Method::mle; }
bool uses_flow(Method m) { return m != Method::nce; }

std::vector<Parameter*> params_of(std::optional<EnergyModel>& m) {
  return m ? m->parameters() : std::vector<Parameter*>{};
}
std::vector<Parameter*> params_of(std::optional<FlowModel>& m) {
  return m ? m->parameters() : std::vector<Parameter*>{};
}

// Data, noise and evaluation material depend only on config and seed.
void build_data(Run& run) {
  const RunConfig& c = run.config;
  run.truth = make_distribution(c.data);
  const std::uint64_t data_seed = derive_seed(run.seed, SeedStream::data);
  if (c.method == Method::semisup) {
    run.labeled = make_semisup_split(std::get<TwoSpirals>(run.truth), c.n_unlabeled,
                                     c.labels_per_class, data_seed);
    run.train_data = run.labeled->points;
  } else {
    run.train_data = sample(run.truth, c.n_train, data_seed).points;
  }
  if (c.method == Method::nce) run.noise = fit_gaussian_noise(run.train_data);
  run.eval = make_eval_set(c);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, SeedStream stream) {
  // splitmix64 finalizer over seed and stream id
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(stream) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

EvalSet make_eval_set(const RunConfig& config) {
  const GroundTruth truth = make_distribution(config.data);
  EvalSet out;
  if (has_log_density(truth)) out.truth = closed_form(truth);
  out.points = mse_eval_points(truth, config.eval_points, config.eval_seed);
  if (config.method == Method::semisup) {
    Samples held = sample(truth, config.heldout_points, config.eval_seed + 1);
    out.heldout_points = std::move(held.points);
    out.heldout_labels = std::move(held.labels);
  }
  return out;
}

FlowModel pretrain_flow(const RunConfig& config, std::uint64_t seed,
                        const Tensor& train_data, std::vector<HistoryRow>* history) {
  FlowModel flow(config.flow_config(), derive_seed(seed, SeedStream::flow_init));
  TrainConfig t = config.train_config();
  t.iterations = config.pretrain_iters;
  t.flow_optimizer = {OptimizerKind::adamax, config.pretrain_lr};
  t.eval_every = 0;
  std::vector<Parameter*> params = flow.parameters();
  TrainState state = make_train_state(t, derive_seed(seed, SeedStream::pretrain), {}, params);
  std::vector<HistoryRow> rows = mle_train(flow, train_data, t, state);
  if (history) *history = std::move(rows);
  return flow;
}

Run prepare_run(const RunConfig& config, std::uint64_t seed, const FlowModel* pretrained) {
  validate(config);
  Run run;
  run.config = config;
  run.seed = seed;
  build_data(run);
  const Method m = config.method;
  if (uses_ebm(m)) {
    const std::size_t heads = m == Method::semisup ? run.labeled->num_classes : 1;
    run.ebm.emplace(config.ebm_config(heads), derive_seed(seed, SeedStream::ebm_init));
  }
  if (uses_flow(m)) {
    if (pretrained) {
      run.flow = *pretrained;
    } else if (config.flow_init == FlowInit::mle_pretrained) {
      run.flow = pretrain_flow(config, seed, run.train_data, &run.pretrain_history);
    } else {
      run.flow.emplace(config.flow_config(), derive_seed(seed, SeedStream::flow_init));
    }
  }
  run.state = make_train_state(config.train_config(), derive_seed(seed, SeedStream::train),
                               params_of(run.ebm), params_of(run.flow));
  run.state.seed = seed;
  return run;
}

Run resume_run(const RunConfig& config, const Checkpoint& checkpoint) {
  validate(config);
  if (!checkpoint.state) throw FormatError("checkpoint holds no training state");
  Run run;
  run.config = config;
  run.seed = checkpoint.state->seed;
  build_data(run);
  if (uses_ebm(config.method) && !checkpoint.ebm) {
    throw FormatError("checkpoint holds no EBM for method " +
                      std::string(method_name(config.method)));
  }
  if (uses_flow(config.method) && !checkpoint.flow) {
    throw FormatError("checkpoint holds no flow for method " +
                      std::string(method_name(config.method)));
  }
  if (uses_ebm(config.method)) run.ebm = checkpoint.ebm;
  if (uses_flow(config.method)) run.flow = checkpoint.flow;
  run.state = *checkpoint.state;
  return run;
}

Metrics evaluate(const Run& run) {
  Metrics m;
  const RunConfig& c = run.config;
  if (run.ebm && run.eval.truth && run.ebm->heads() == 1) {
    m.ebm_mse = density_mse(ebm_log_density(*run.ebm), *run.eval.truth, run.eval.points);
  }
  if (run.flow) {
    m.flow_nll = mean_nll(flow_log_density(*run.flow), run.eval.points);
    if (run.eval.truth) {
      m.jsd = jsd_diagnostic(*run.flow, *run.eval.truth, c.jsd_samples, c.eval_seed + 2);
    }
  }
  if (run.ebm && c.method == Method::semisup) {
    m.heldout_acc = classification_accuracy(predict(*run.ebm, run.eval.heldout_points),
                                            run.eval.heldout_labels);
  }
  return m;
}

void execute(Run& run, const std::function<void(const Run&)>& on_checkpoint,
             const std::function<void(const HistoryRow&)>& on_row) {
  const RunConfig& c = run.config;
  TrainHooks hooks;
  hooks.evaluate = [&run](const TrainState&, HistoryRow& row) {
    const Metrics m = evaluate(run);
    row.ebm_mse = m.ebm_mse;
    row.flow_nll = m.flow_nll;
    row.jsd = m.jsd;
    row.heldout_acc = m.heldout_acc;
  };
  if (on_checkpoint && c.checkpoint_every > 0) {
    hooks.checkpoint = [&](const TrainState&) { on_checkpoint(run); };
    hooks.checkpoint_every = c.checkpoint_every;
  }
  hooks.on_row = on_row;
  std::vector<HistoryRow> rows;
  const TrainConfig t = c.train_config();
  switch (c.method) {
    case Method::fce:
      rows = fce_train(*run.ebm, *run.flow, run.train_data, t, run.state, hooks);
      break;
    case Method::nce:
      rows = nce_train(*run.ebm, run.train_data, *run.noise, t, run.state, hooks);
      break;
    case Method::mle:
      rows = mle_train(*run.flow, run.train_data, t, run.state, hooks);
      break;
    case Method::semisup:
      rows = semisup_train(*run.ebm, *run.flow, *run.labeled, c.semisup_config(), run.state,
                           hooks);
      break;
  }
  run.history.insert(run.history.end(), std::make_move_iterator(rows.begin()),
                     std::make_move_iterator(rows.end()));
}

void save_run_checkpoint(const std::string& path, const Run& run) {
  save_checkpoint(path, run.ebm ? &*run.ebm : nullptr, run.flow ? &*run.flow : nullptr,
                  &run.state, to_json(run.config));
}

}  // namespace fcelab
