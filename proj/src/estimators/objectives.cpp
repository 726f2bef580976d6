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

#include "fcelab/estimators/objectives.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fcelab/diff/ops.hpp"
#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

// Logits this close to zero are rounding noise between two density paths
// and count as ties.
constexpr double kTieBand = 1e-9;

double credit(double signed_logit) {
  if (signed_logit > kTieBand) return 1.0;
  return signed_logit < -kTieBand ? 0.0 : 0.5;
}

double fraction_correct(const Tensor& data_logit, const Tensor& noise_logit) {
  double correct = 0.0;
  for (double a : data_logit.data()) correct += credit(a);
  for (double a : noise_logit.data()) correct += credit(-a);
  return correct / static_cast<double>(data_logit.size() + noise_logit.size());
}

void require_batch(const Tensor& points, const Tensor& log_q, const char* what) {
  if (points.rank() != 2 || points.dim(1) != 2 || log_q.rank() != 1 ||
      log_q.dim(0) != points.dim(0)) {
    throw ShapeError(std::string(what) + ": points " + shape_string(points.shape()) +
                     " and log q " + shape_string(log_q.shape()) + " do not align");
  }
}

double squared_norm(std::span<Parameter* const> params) {
  double total = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.data()) total += g * g;
  }
  return total;
}

}  // namespace

ModelLogDensity single_head(const EnergyModel& model, std::size_t head) {
  return [&model, head](Tape& tape, Var x, Track track) {
    return model.log_unnormalized(tape, x, head, track);
  };
}

ContrastiveValue contrastive_value(Var data_logit, Var noise_logit) {
  if (data_logit.shape().size() != 1 || noise_logit.shape().size() != 1) {
    throw ShapeError("contrastive_value: logits must be vectors");
  }
  Var value = mean(log_sigmoid(data_logit)) + mean(log_sigmoid(neg(noise_logit)));
  return {value, fraction_correct(data_logit.value(), noise_logit.value())};
}

GaussianMixture2D GaussianNoiseBaseline::distribution() const {
  return GaussianMixture2D({{mean, covariance, 1.0}});
}

Tensor GaussianNoiseBaseline::sample(std::size_t n, std::mt19937_64& rng) const {
  return distribution().sample(n, rng);
}

Tensor GaussianNoiseBaseline::log_density(const Tensor& x) const {
  return Tensor::vector(distribution().log_density(x));
}

GaussianNoiseBaseline fit_gaussian_noise(const Tensor& data) {
  if (data.rank() != 2 || data.dim(1) != 2 || data.dim(0) < 2) {
    throw ShapeError("fit_gaussian_noise: need {N>=2, 2} data");
  }
  const std::size_t n = data.dim(0);
  GaussianNoiseBaseline out;
  for (std::size_t i = 0; i < n; ++i) {
    out.mean[0] += data(i, 0);
    out.mean[1] += data(i, 1);
  }
  out.mean[0] /= static_cast<double>(n);
  out.mean[1] /= static_cast<double>(n);
  Mat2 cov{0.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = data(i, 0) - out.mean[0];
    const double dy = data(i, 1) - out.mean[1];
    cov[0] += dx * dx;
    cov[1] += dx * dy;
    cov[3] += dy * dy;
  }
  for (double& c : cov) c /= static_cast<double>(n - 1);
  cov[2] = cov[1];
  out.covariance = cov;
  return out;
}

ContrastiveValue nce_objective(Tape& tape, const ModelLogDensity& log_p,
                               const Tensor& data, const Tensor& data_log_q,
                               const Tensor& noise, const Tensor& noise_log_q,
                               Track track, double negative_prior_odds) {
  require_batch(data, data_log_q, "nce_objective");
  require_batch(noise, noise_log_q, "nce_objective");
  if (data.dim(0) != noise.dim(0)) {
    throw ShapeError("nce_objective: " + std::to_string(data.dim(0)) +
                     " data points vs " + std::to_string(noise.dim(0)) +
                     " noise points");
  }
  Var data_logit = classifier_logit(log_p(tape, tape.constant(data), track),
                                    tape.constant(data_log_q), negative_prior_odds);
  Var noise_logit = classifier_logit(log_p(tape, tape.constant(noise), track),
                                     tape.constant(noise_log_q), negative_prior_odds);
  return contrastive_value(data_logit, noise_logit);
}

ContrastiveValue nce_objective(Tape& tape, const EnergyModel& ebm,
                               const Tensor& data, const Tensor& data_log_q,
                               const Tensor& noise, const Tensor& noise_log_q,
                               Track track, double negative_prior_odds) {
  return nce_objective(tape, single_head(ebm), data, data_log_q, noise,
                       noise_log_q, track, negative_prior_odds);
}

ContrastiveValue fce_value(Tape& tape, const ModelLogDensity& log_p,
                           const FlowModel& flow, const Tensor& data,
                           const Tensor& z, Track ebm_track, Track flow_track,
                           double negative_prior_odds) {
  if (data.rank() != 2 || data.dim(1) != 2 || z.rank() != 2 || z.dim(1) != 2) {
    throw ShapeError("fce_value: data and z must be {N,2}");
  }
  Var data_log_q;
  Var negatives;
  Var negative_log_q;
  if (flow_track == Track::frozen) {
    FlowSample neg = flow.push_forward(z);
    data_log_q = tape.constant(flow.log_prob(data));
    negatives = tape.constant(std::move(neg.x));
    negative_log_q = tape.constant(std::move(neg.log_prob));
  } else {
    data_log_q = flow.log_prob(tape, tape.constant(data), Track::params);
    Var base = tape.constant(z);
    FlowOutput fwd = flow.forward(tape, base, Track::params);
    negatives = fwd.out;
    negative_log_q = base_log_prob(base) - fwd.log_det;
  }
  Var data_logit = classifier_logit(log_p(tape, tape.constant(data), ebm_track),
                                    data_log_q, negative_prior_odds);
  Var noise_logit = classifier_logit(log_p(tape, negatives, ebm_track),
                                     negative_log_q, negative_prior_odds);
  return contrastive_value(data_logit, noise_logit);
}

ContrastiveValue fce_value(Tape& tape, const EnergyModel& ebm,
                           const FlowModel& flow, const Tensor& data,
                           const Tensor& z, Track ebm_track, Track flow_track,
                           double negative_prior_odds) {
  return fce_value(tape, single_head(ebm), flow, data, z, ebm_track, flow_track,
                   negative_prior_odds);
}

StepStats fce_ebm_step(const ModelLogDensity& log_p,
                       std::span<Parameter* const> ebm_params,
                       const FlowModel& flow, const Tensor& data,
                       const Tensor& z, OptimizerState& opt,
                       double negative_prior_odds, const ExtraObjective& extra) {
  Tape tape;
  ContrastiveValue v = fce_value(tape, log_p, flow, data, z, Track::params,
                                 Track::frozen, negative_prior_odds);
  StepStats stats{v.value.value().item(), v.accuracy, 0.0};
  Var objective = v.value;
  if (extra) {
    Var e = extra(tape);
    stats.extra = e.value().item();
    objective = objective + e;
  }
  tape.backward(neg(objective));
  optimizer_step(opt, ebm_params);
  return stats;
}

StepStats fce_flow_step(const ModelLogDensity& log_p, FlowModel& flow,
                        const Tensor& data, const Tensor& z,
                        OptimizerState& opt, double negative_prior_odds) {
  Tape tape;
  ContrastiveValue v = fce_value(tape, log_p, flow, data, z, Track::frozen,
                                 Track::params, negative_prior_odds);
  tape.backward(v.value);
  optimizer_step(opt, flow.parameters());
  return {v.value.value().item(), v.accuracy, 0.0};
}

StepStats nce_step(EnergyModel& ebm, const Tensor& data,
                   const Tensor& data_log_q, const Tensor& noise,
                   const Tensor& noise_log_q, OptimizerState& opt,
                   double negative_prior_odds) {
  Tape tape;
  ContrastiveValue v = nce_objective(tape, ebm, data, data_log_q, noise,
                                     noise_log_q, Track::params,
                                     negative_prior_odds);
  tape.backward(neg(v.value));
  optimizer_step(opt, ebm.parameters());
  return {v.value.value().item(), v.accuracy, 0.0};
}

MleStats mle_flow_step(FlowModel& flow, const Tensor& batch, OptimizerState& opt) {
  Tape tape;
  Var nll = neg(mean(flow.log_prob(tape, tape.constant(batch), Track::params)));
  tape.backward(nll);
  auto params = flow.parameters();
  MleStats stats;
  stats.nll = nll.value().item();
  stats.bits_per_dim = stats.nll / (2.0 * std::numbers::ln2);
  stats.grad_norm = std::sqrt(squared_norm(params));
  optimizer_step(opt, params);
  return stats;
}

}  // namespace fcelab
