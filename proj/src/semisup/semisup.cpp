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

#include "fcelab/semisup/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fcelab/diff/ops.hpp"
#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

void check_labels(std::span<const int> labels, std::size_t heads, std::size_t rows) {
  if (labels.size() != rows) {
    throw ShapeError("label_loss: " + std::to_string(rows) + " points but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y == kUnlabeled) {
      throw std::invalid_argument("label_loss: batch contains unlabeled points");
    }
    if (y < 0 || static_cast<std::size_t>(y) >= heads) {
      throw std::invalid_argument("label_loss: label " + std::to_string(y) +
                                  " outside [0, " + std::to_string(heads) + ")");
    }
  }
}

double row_logsumexp(const Tensor& t, std::size_t row) {
  const std::size_t k = t.dim(1);
  double m = -INFINITY;
  for (std::size_t j = 0; j < k; ++j) m = std::max(m, t(row, j));
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += std::exp(t(row, j) - m);
  return m + std::log(s);
}

}  // namespace

Var label_loss(Tape& tape, const EnergyModel& model, const Tensor& points,
               std::span<const int> labels, Track track) {
  if (points.rank() != 2 || points.dim(1) != 2) {
    throw ShapeError("label_loss: points must be {N,2}");
  }
  check_labels(labels, model.heads(), points.dim(0));
  const std::size_t n = points.dim(0);
  const std::size_t k = model.heads();
  Tensor one_hot({n, k});
  for (std::size_t i = 0; i < n; ++i) one_hot(i, static_cast<std::size_t>(labels[i])) = 1.0;

  Var logits = model.log_unnormalized_all(tape, tape.constant(points), track);
  Var picked = sum(logits * tape.constant(std::move(one_hot)), 1);
  return mean(picked - logsumexp(logits, 1));
}

double label_loss(const EnergyModel& model, const Tensor& points,
                  std::span<const int> labels) {
  check_labels(labels, model.heads(), points.dim(0));
  const Tensor logits = model.log_unnormalized_all(points);
  double total = 0.0;
  for (std::size_t i = 0; i < points.dim(0); ++i) {
    total += logits(i, static_cast<std::size_t>(labels[i])) - row_logsumexp(logits, i);
  }
  return total / static_cast<double>(points.dim(0));
}

Var mixture_log_unnormalized(Tape& tape, const EnergyModel& model, Var x,
                             Track track) {
  if (model.heads() == 1) return model.log_unnormalized(tape, x, 0, track);
  Var logits = model.log_unnormalized_all(tape, x, track);
  return add_scalar(logsumexp(logits, 1), -std::log(static_cast<double>(model.heads())));
}

Tensor mixture_log_unnormalized(const EnergyModel& model, const Tensor& x) {
  if (model.heads() == 1) return model.log_unnormalized(x, 0);
  const Tensor logits = model.log_unnormalized_all(x);
  const double log_k = std::log(static_cast<double>(model.heads()));
  Tensor out({x.dim(0)});
  for (std::size_t i = 0; i < x.dim(0); ++i) out[i] = row_logsumexp(logits, i) - log_k;
  return out;
}

ModelLogDensity mixture_density(const EnergyModel& model) {
  return [&model](Tape& tape, Var x, Track track) {
    return mixture_log_unnormalized(tape, model, x, track);
  };
}

Prediction predict(const EnergyModel& model, const Tensor& x) {
  const Tensor logits = model.log_unnormalized_all(x);
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  Prediction out{std::vector<int>(n), Tensor({n, k})};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out.labels[i] = static_cast<int>(best);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out.posteriors(i, j) = std::exp(logits(i, j) - logits(i, best));
      total += out.posteriors(i, j);
    }
    for (std::size_t j = 0; j < k; ++j) out.posteriors(i, j) /= total;
  }
  return out;
}

double classification_accuracy(const Prediction& prediction,
                               std::span<const int> labels) {
  if (labels.size() != prediction.labels.size() || labels.empty()) {
    throw ShapeError("classification_accuracy: label count mismatch");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += prediction.labels[i] == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<HistoryRow> semisup_train(EnergyModel& model, FlowModel& flow,
                                      const LabeledDataset& dataset,
                                      const SemisupConfig& config,
                                      TrainState& state,
                                      const TrainHooks& hooks) {
  if (model.heads() < 2) {
    throw ConfigError("semisup_train: need a model with at least 2 heads");
  }
  if (dataset.labeled_count() == 0) {
    throw ConfigError(
        "semisup_train: dataset has no labeled points; use fce_train for "
        "unsupervised training");
  }
  if (config.warmup_ebm_iters < 0) throw ConfigError("warmup_ebm_iters must be >= 0");
  const Tensor labeled = dataset.labeled_points();
  const std::vector<int> targets = dataset.labeled_targets();
  check_labels(targets, model.heads(), labeled.dim(0));

  const ModelLogDensity log_p = mixture_density(model);
  const std::vector<Parameter*> params = model.parameters();
  double last_label_loss = 0.0;
  const ExtraObjective extra = [&](Tape& tape) {
    Var l = label_loss(tape, model, labeled, targets, Track::params);
    last_label_loss = l.value().item();
    return scale(l, config.label_loss_weight);
  };

  AlternatingSteps steps;
  steps.ebm = [&](const Tensor& batch, const Tensor& z) {
    return fce_ebm_step(log_p, params, flow, batch, z, state.ebm_optimizer,
                        config.train.negative_prior_odds, extra);
  };
  steps.flow = [&](const Tensor& batch, const Tensor& z) {
    return fce_flow_step(log_p, flow, batch, z, state.flow_optimizer,
                         config.train.negative_prior_odds);
  };
  steps.annotate = [&](const StepStats&, HistoryRow& row) {
    if (row.side == side_name(Side::ebm)) row.label_loss = last_label_loss;
  };
  steps.ebm_only_until = config.warmup_ebm_iters;
  // Positives come from every training point, labeled or not; negatives are
  // flow samples only.
  return run_alternating(dataset.points, config.train, state, steps, hooks);
}

}  // namespace fcelab
