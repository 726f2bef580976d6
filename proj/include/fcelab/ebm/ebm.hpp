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
#include <cstdint>
#include <vector>

#include "fcelab/diff/layers.hpp"
#include "fcelab/diff/ops.hpp"
#include "fcelab/diff/tape.hpp"

namespace fcelab {

struct EbmConfig {
  std::vector<std::size_t> hidden{128, 128, 128};
  std::size_t heads = 1;
  double slope = kDefaultLeakySlope;
};

// Unnormalized density p(x) = exp(f(x) - c) with a fully-connected leaky-ReLU
// trunk, one linear output per head and one learnable log-normalizer c per
// head. All heads share the trunk.
class EnergyModel {
 public:
  // Trunk layers get fan-in uniform init from `seed`; the output layer and c
  // start at zero.
  explicit EnergyModel(EbmConfig config = {}, std::uint64_t seed = 0);

  const EbmConfig& config() const { return config_; }
  std::size_t heads() const { return config_.heads; }

  // Output of the last hidden layer, {N, width}.
  Var features(Tape& tape, Var x, Track track = Track::params) const;
  // f_k(x) for every head, {N, K}.
  Var energies(Tape& tape, Var x, Track track = Track::params) const;
  Var energy(Tape& tape, Var x, std::size_t head,
             Track track = Track::params) const;
  // f_k(x) - c_k for every head, {N, K}.
  Var log_unnormalized_all(Tape& tape, Var x, Track track = Track::params) const;
  Var log_unnormalized(Tape& tape, Var x, std::size_t head,
                       Track track = Track::params) const;

  Tensor energy(const Tensor& x, std::size_t head = 0) const;
  Tensor log_unnormalized(const Tensor& x, std::size_t head = 0) const;
  Tensor log_unnormalized_all(const Tensor& x) const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const Parameter& normalizer() const { return normalizer_; }
  Parameter& normalizer() { return normalizer_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

 private:
  void check_head(std::size_t head) const;

  EbmConfig config_;
  std::vector<DenseLayer> layers_;  // hidden layers followed by the output layer
  Parameter normalizer_;            // ebm.c, shape {K}
};

struct PosteriorLogs {
  Tensor log_u;           // log p/(p + nu q)
  Tensor log_one_minus_u; // log nu q/(p + nu q)
};

// Logit of the data-vs-noise classifier, log p - log q - log(nu), where nu is
// the prior odds of a negative. Differentiable in both arguments.
Var classifier_logit(Var log_p, Var log_q, double negative_prior_odds = 1.0);

// u(x) = p(x) / (p(x) + q(x)) for head 0, from the model and aligned log q.
Tensor posterior(const EnergyModel& model, const Tensor& log_q, const Tensor& x);
// Both log-probabilities of the posterior, finite even where u underflows.
PosteriorLogs log_posterior(const EnergyModel& model, const Tensor& log_q,
                            const Tensor& x);

}  // namespace fcelab
