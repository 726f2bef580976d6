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
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "fcelab/data/distributions.hpp"
#include "fcelab/diff/tape.hpp"
#include "fcelab/ebm/ebm.hpp"
#include "fcelab/estimators/optimizer.hpp"
#include "fcelab/flow/flow.hpp"

namespace fcelab {

// log p(x) of the positive-class model on a tape.
using ModelLogDensity = std::function<Var(Tape&, Var, Track)>;
// Additional EBM-side objective (maximized together with the value).
using ExtraObjective = std::function<Var(Tape&)>;

ModelLogDensity single_head(const EnergyModel& model, std::size_t head = 0);

struct ContrastiveValue {
  Var value;        // mean log u(data) + mean log(1 - u(noise))
  double accuracy;  // over both sets; |logit| <= 1e-9 counts as half correct
};

// Logistic log-likelihood of separating data (positive logits) from noise.
ContrastiveValue contrastive_value(Var data_logit, Var noise_logit);

// Moment-matched Gaussian noise for the NCE baseline.
struct GaussianNoiseBaseline {
  Vec2 mean{};
  Mat2 covariance{1.0, 0.0, 0.0, 1.0};

  GaussianMixture2D distribution() const;
  Tensor sample(std::size_t n, std::mt19937_64& rng) const;
  Tensor log_density(const Tensor& x) const;
};

GaussianNoiseBaseline fit_gaussian_noise(const Tensor& data);

// NCE objective with a fixed noise density. Both batches must have equal size.
ContrastiveValue nce_objective(Tape& tape, const ModelLogDensity& log_p,
                               const Tensor& data, const Tensor& data_log_q,
                               const Tensor& noise, const Tensor& noise_log_q,
                               Track track = Track::params,
                               double negative_prior_odds = 1.0);
ContrastiveValue nce_objective(Tape& tape, const EnergyModel& ebm,
                               const Tensor& data, const Tensor& data_log_q,
                               const Tensor& noise, const Tensor& noise_log_q,
                               Track track = Track::params,
                               double negative_prior_odds = 1.0);

// Shared minimax value with the flow as adaptive noise: negatives are g(z)
// for the supplied base draws z. With flow_track == frozen the flow's
// densities enter as constants; otherwise gradients reach the flow through
// both q(x) and g(z).
ContrastiveValue fce_value(Tape& tape, const ModelLogDensity& log_p,
                           const FlowModel& flow, const Tensor& data,
                           const Tensor& z, Track ebm_track, Track flow_track,
                           double negative_prior_odds = 1.0);
ContrastiveValue fce_value(Tape& tape, const EnergyModel& ebm,
                           const FlowModel& flow, const Tensor& data,
                           const Tensor& z, Track ebm_track, Track flow_track,
                           double negative_prior_odds = 1.0);

struct StepStats {
  double value = 0.0;
  double accuracy = 0.0;
  double extra = 0.0;  // value of the extra objective, if any
};

// Ascent step on value (+ extra) over the EBM parameters.
StepStats fce_ebm_step(const ModelLogDensity& log_p,
                       std::span<Parameter* const> ebm_params,
                       const FlowModel& flow, const Tensor& data,
                       const Tensor& z, OptimizerState& opt,
                       double negative_prior_odds = 1.0,
                       const ExtraObjective& extra = {});
// Descent step on value over the flow parameters.
StepStats fce_flow_step(const ModelLogDensity& log_p, FlowModel& flow,
                        const Tensor& data, const Tensor& z,
                        OptimizerState& opt, double negative_prior_odds = 1.0);

StepStats nce_step(EnergyModel& ebm, const Tensor& data,
                   const Tensor& data_log_q, const Tensor& noise,
                   const Tensor& noise_log_q, OptimizerState& opt,
                   double negative_prior_odds = 1.0);

struct MleStats {
  double nll = 0.0;             // nats per point
  double bits_per_dim = 0.0;    // nll / (2 ln 2)
  double grad_norm = 0.0;       // before the update
};

// One ascent step on the mean log-likelihood of `batch`.
MleStats mle_flow_step(FlowModel& flow, const Tensor& batch, OptimizerState& opt);

}  // namespace fcelab
