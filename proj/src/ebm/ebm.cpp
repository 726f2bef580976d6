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

#include "fcelab/ebm/ebm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

constexpr std::size_t kChunkRows = 4096;

void require_points(const Shape& shape) {
  if (shape.size() != 2 || shape[1] != 2) {
    throw ShapeError("ebm: expected {N,2} input, got " + shape_string(shape));
  }
}

// Evaluates `fn` on row chunks and stacks the per-row outputs.
template <typename Fn>
Tensor chunked_rows(const Tensor& x, std::size_t width, Fn fn) {
  require_points(x.shape());
  const std::size_t n = x.dim(0);
  Tensor out(width == 0 ? Shape{n} : Shape{n, width});
  const std::size_t per_row = width == 0 ? 1 : width;
  for (std::size_t begin = 0; begin < n; begin += kChunkRows) {
    const std::size_t rows = std::min(kChunkRows, n - begin);
    Tape tape;
    Var in = tape.constant(Tensor(
        Shape{rows, 2}, std::vector<double>(x.raw() + begin * 2,
                                            x.raw() + (begin + rows) * 2)));
    Var result = fn(tape, in);
    std::copy_n(result.value().raw(), rows * per_row, out.raw() + begin * per_row);
  }
  return out;
}

}  // namespace

EnergyModel::EnergyModel(EbmConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      normalizer_("ebm.c", Tensor(Shape{config_.heads})) {
  if (config_.heads == 0 || config_.hidden.empty()) {
    throw std::invalid_argument("EnergyModel: need >= 1 head and >= 1 hidden layer");
  }
  std::mt19937_64 rng(seed);
  std::size_t in = 2;
  for (std::size_t j = 0; j < config_.hidden.size(); ++j) {
    layers_.emplace_back("ebm.layer" + std::to_string(j), in, config_.hidden[j]);
    layers_.back().init_fan_in(rng);
    in = config_.hidden[j];
  }
  layers_.emplace_back("ebm.layer" + std::to_string(config_.hidden.size()), in,
                       config_.heads);
  layers_.back().init_zero();
}

void EnergyModel::check_head(std::size_t head) const {
  if (head >= config_.heads) {
    throw std::out_of_range("ebm: head " + std::to_string(head) +
                            " out of range for " + std::to_string(config_.heads) +
                            " heads");
  }
}

Var EnergyModel::features(Tape& tape, Var x, Track track) const {
  require_points(x.shape());
  Var h = x;
  for (std::size_t j = 0; j + 1 < layers_.size(); ++j) {
    h = leaky_relu(layers_[j](tape, h, track), config_.slope);
  }
  return h;
}

Var EnergyModel::energies(Tape& tape, Var x, Track track) const {
  return layers_.back()(tape, features(tape, x, track), track);
}

Var EnergyModel::energy(Tape& tape, Var x, std::size_t head, Track track) const {
  check_head(head);
  return column(energies(tape, x, track), head);
}

Var EnergyModel::log_unnormalized_all(Tape& tape, Var x, Track track) const {
  Var f = energies(tape, x, track);
  Var c = tape.parameter(normalizer_, track);
  return f - broadcast_to(c, f.shape());
}

Var EnergyModel::log_unnormalized(Tape& tape, Var x, std::size_t head,
                                  Track track) const {
  check_head(head);
  Var f = energy(tape, x, head, track);
  Var c = slice(tape.parameter(normalizer_, track), 0, head, head + 1);
  return f - broadcast_to(c, f.shape());
}

Tensor EnergyModel::energy(const Tensor& x, std::size_t head) const {
  check_head(head);
  return chunked_rows(x, 0, [&](Tape& tape, Var in) {
    return energy(tape, in, head, Track::frozen);
  });
}

Tensor EnergyModel::log_unnormalized(const Tensor& x, std::size_t head) const {
  check_head(head);
  return chunked_rows(x, 0, [&](Tape& tape, Var in) {
    return log_unnormalized(tape, in, head, Track::frozen);
  });
}

Tensor EnergyModel::log_unnormalized_all(const Tensor& x) const {
  return chunked_rows(x, config_.heads, [&](Tape& tape, Var in) {
    return log_unnormalized_all(tape, in, Track::frozen);
  });
}

std::vector<Parameter*> EnergyModel::parameters() {
  std::vector<Parameter*> out;
  for (DenseLayer& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&normalizer_);
  return out;
}

std::vector<const Parameter*> EnergyModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const DenseLayer& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&normalizer_);
  return out;
}

Var classifier_logit(Var log_p, Var log_q, double negative_prior_odds) {
  if (log_p.shape() != log_q.shape()) {
    throw ShapeError("classifier_logit: log p " + shape_string(log_p.shape()) +
                     " vs log q " + shape_string(log_q.shape()));
  }
  if (!(negative_prior_odds > 0.0)) {
    throw std::invalid_argument("classifier_logit: prior odds must be positive");
  }
  Var logit = log_p - log_q;
  return negative_prior_odds == 1.0
             ? logit
             : add_scalar(logit, -std::log(negative_prior_odds));
}

PosteriorLogs log_posterior(const EnergyModel& model, const Tensor& log_q,
                            const Tensor& x) {
  require_points(x.shape());
  if (log_q.rank() != 1 || log_q.dim(0) != x.dim(0)) {
    throw ShapeError("posterior: log_q " + shape_string(log_q.shape()) +
                     " does not align with x " + shape_string(x.shape()));
  }
  Tape tape;
  Var logit = classifier_logit(
      model.log_unnormalized(tape, tape.constant(x), 0, Track::frozen),
      tape.constant(log_q));
  return {log_sigmoid(logit).value(), log_sigmoid(neg(logit)).value()};
}

Tensor posterior(const EnergyModel& model, const Tensor& log_q, const Tensor& x) {
  PosteriorLogs logs = log_posterior(model, log_q, x);
  for (double& v : logs.log_u.data()) v = std::exp(v);
  return std::move(logs.log_u);
}

}  // namespace fcelab
