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

#include "fcelab/flow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fcelab/diff/ops.hpp"
#include "fcelab/errors.hpp"

namespace fcelab {
namespace {

constexpr std::size_t kChunkRows = 2048;

void require_points(const Shape& shape) {
  if (shape.size() != 2 || shape[1] != 2) {
    throw ShapeError("flow: expected {N,2} input, got " + shape_string(shape));
  }
}

struct BlockTerms {
  Var keep;     // input with the transformed coordinate zeroed
  Var free;     // 1 on the transformed coordinate, 0 elsewhere
  Var scale;    // squashed log-scale, zero on the passed coordinate
  Var shift;
};

BlockTerms conditioner(const CouplingBlock& block, double scale_max,
                       Tape& tape, Var x, Track track) {
  const std::size_t n = x.shape()[0];
  Tensor keep_mask(Shape{n, 2});
  Tensor free_mask(Shape{n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    keep_mask(i, block.passed) = 1.0;
    free_mask(i, 1 - block.passed) = 1.0;
  }
  Var keep = tape.constant(std::move(keep_mask));
  Var free = tape.constant(std::move(free_mask));

  Var masked = x * keep;
  Var h = relu(block.hidden0(tape, masked, track));
  h = relu(block.hidden1(tape, h, track));
  Var raw = block.head(tape, h, track);
  Var raw_scale = slice(raw, 1, 0, 2);
  Var shift = slice(raw, 1, 2, 4) * free;
  Var scale = fcelab::scale(tanh(fcelab::scale(raw_scale, 1.0 / scale_max)),
                            scale_max) *
              free;
  return {masked, free, scale, shift};
}

template <typename Pass>
FlowResult chunked(const Tensor& input, Pass pass) {
  require_points(input.shape());
  const std::size_t n = input.dim(0);
  FlowResult result{Tensor(Shape{n, 2}), Tensor(Shape{n})};
  for (std::size_t begin = 0; begin < n; begin += kChunkRows) {
    const std::size_t rows = std::min(kChunkRows, n - begin);
    Tensor chunk(Shape{rows, 2},
                 std::vector<double>(input.raw() + begin * 2,
                                     input.raw() + (begin + rows) * 2));
    Tape tape;
    FlowOutput out = pass(tape, tape.constant(std::move(chunk)));
    std::copy_n(out.out.value().raw(), rows * 2, result.out.raw() + begin * 2);
    std::copy_n(out.log_det.value().raw(), rows, result.log_det.raw() + begin);
  }
  return result;
}

}  // namespace

Var base_log_prob(Var z) {
  require_points(z.shape());
  return add_scalar(scale(sum(z * z, 1), -0.5), -std::log(2.0 * std::numbers::pi));
}

Tensor standard_normal(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor z(Shape{n, 2});
  for (double& v : z.data()) v = normal(rng);
  return z;
}

FlowModel::FlowModel(FlowConfig config, std::uint64_t seed) : config_(config) {
  if (config_.blocks == 0 || config_.width == 0 || !(config_.scale_max > 0.0)) {
    throw std::invalid_argument("FlowModel: blocks, width and scale_max must be positive");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < config_.blocks; ++i) {
    const std::string prefix = "flow.block" + std::to_string(i) + ".layer";
    CouplingBlock block{i % 2,
                        DenseLayer(prefix + "0", 2, config_.width),
                        DenseLayer(prefix + "1", config_.width, config_.width),
                        DenseLayer(prefix + "2", config_.width, 4)};
    block.hidden0.init_fan_in(rng);
    block.hidden1.init_fan_in(rng);
    block.head.init_zero();
    blocks_.push_back(std::move(block));
  }
}

FlowOutput FlowModel::forward(Tape& tape, Var z, Track track) const {
  require_points(z.shape());
  Var h = z;
  Var log_det;
  for (const CouplingBlock& block : blocks_) {
    BlockTerms c = conditioner(block, config_.scale_max, tape, h, track);
    h = c.keep + c.free * (h * exp(c.scale)) + c.shift;
    Var block_log_det = sum(c.scale, 1);
    log_det = log_det.valid() ? log_det + block_log_det : block_log_det;
  }
  return {h, log_det};
}

FlowOutput FlowModel::inverse(Tape& tape, Var x, Track track) const {
  require_points(x.shape());
  Var h = x;
  Var log_det;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    BlockTerms c = conditioner(*it, config_.scale_max, tape, h, track);
    h = c.keep + c.free * ((h - c.shift) * exp(neg(c.scale)));
    Var block_log_det = neg(sum(c.scale, 1));
    log_det = log_det.valid() ? log_det + block_log_det : block_log_det;
  }
  return {h, log_det};
}

Var FlowModel::log_prob(Tape& tape, Var x, Track track) const {
  FlowOutput inv = inverse(tape, x, track);
  return base_log_prob(inv.out) + inv.log_det;
}

FlowResult FlowModel::forward(const Tensor& z) const {
  return chunked(z, [this](Tape& tape, Var in) {
    return forward(tape, in, Track::frozen);
  });
}

FlowResult FlowModel::inverse(const Tensor& x) const {
  return chunked(x, [this](Tape& tape, Var in) {
    return inverse(tape, in, Track::frozen);
  });
}

Tensor FlowModel::log_prob(const Tensor& x) const {
  FlowResult result = chunked(x, [this](Tape& tape, Var in) {
    FlowOutput inv = inverse(tape, in, Track::frozen);
    return FlowOutput{inv.out, base_log_prob(inv.out) + inv.log_det};
  });
  return std::move(result.log_det);
}

FlowSample FlowModel::sample(std::size_t n, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  return sample(n, rng);
}

FlowSample FlowModel::sample(std::size_t n, std::mt19937_64& rng) const {
  if (n == 0) throw std::invalid_argument("flow sample: n must be >= 1");
  return push_forward(standard_normal(n, rng));
}

FlowSample FlowModel::push_forward(const Tensor& z) const {
  FlowResult result = chunked(z, [this](Tape& tape, Var in) {
    FlowOutput fwd = forward(tape, in, Track::frozen);
    return FlowOutput{fwd.out, base_log_prob(in) - fwd.log_det};
  });
  return {std::move(result.out), std::move(result.log_det)};
}

std::vector<Parameter*> FlowModel::parameters() {
  std::vector<Parameter*> out;
  for (CouplingBlock& b : blocks_) {
    for (DenseLayer* l : {&b.hidden0, &b.hidden1, &b.head}) {
      out.push_back(&l->weight);
      out.push_back(&l->bias);
    }
  }
  return out;
}

std::vector<const Parameter*> FlowModel::parameters() const {
  std::vector<const Parameter*> out;
  for (const CouplingBlock& b : blocks_) {
    for (const DenseLayer* l : {&b.hidden0, &b.hidden1, &b.head}) {
      out.push_back(&l->weight);
      out.push_back(&l->bias);
    }
  }
  return out;
}

void FlowModel::randomize_heads(std::mt19937_64& rng, double bound) {
  for (CouplingBlock& b : blocks_) b.head.init_uniform(rng, bound);
}

}  // namespace fcelab
